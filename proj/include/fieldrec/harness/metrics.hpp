#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fieldrec/linalg.hpp"

namespace fieldrec {

struct ClassificationRates {
    double fpr = 0.0;  // fraction of clean sensors flagged as distorting
    double fnr = 0.0;  // fraction of distorting sensors flagged as clean
    bool fpr_defined = true;  // false when there are no clean sensors
    bool fnr_defined = true;  // false when there are no distorting sensors
};

// flags: true = distorting (off-default)
ClassificationRates classification_rates(const std::vector<bool>& true_flags,
                                         const std::vector<bool>& estimated_flags);

// mean squared error relative to the prior field variance
double relative_mse(const Vector& truth, const Vector& estimate, double prior_var);

struct MetricsRow {
    std::string method;
    int replicate = 0;
    double rel_mse = 0.0;
    std::optional<ClassificationRates> rates;  // absent for methods without flags
    std::string status = "ok";
    std::string config_echo;
};

MetricsRow compute_metrics(const std::string& method, int replicate, const Vector& truth,
                           const Vector& estimate, double prior_var,
                           const std::vector<bool>* true_flags,
                           const std::vector<bool>* estimated_flags);

std::string metrics_header();
std::string metrics_line(const MetricsRow& row);

}  // namespace fieldrec
