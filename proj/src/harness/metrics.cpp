#include "fieldrec/harness/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace fieldrec {
namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

}  // namespace

ClassificationRates classification_rates(const std::vector<bool>& true_flags,
                                         const std::vector<bool>& estimated_flags) {
    if (true_flags.size() != estimated_flags.size())
        throw std::invalid_argument("classification_rates: flag length mismatch");
    int clean = 0, distorting = 0, false_pos = 0, false_neg = 0;
    for (std::size_t i = 0; i < true_flags.size(); ++i) {
        if (true_flags[i]) {
            ++distorting;
            if (!estimated_flags[i]) ++false_neg;
        } else {
            ++clean;
            if (estimated_flags[i]) ++false_pos;
        }
    }
    ClassificationRates r;
    r.fpr_defined = clean > 0;
    r.fnr_defined = distorting > 0;
    r.fpr = r.fpr_defined ? static_cast<double>(false_pos) / clean : 0.0;
    r.fnr = r.fnr_defined ? static_cast<double>(false_neg) / distorting : 0.0;
    return r;
}

double relative_mse(const Vector& truth, const Vector& estimate, double prior_var) {
    if (truth.size() != estimate.size())
        throw std::invalid_argument("relative_mse: grid size mismatch");
    if (truth.size() == 0) throw std::invalid_argument("relative_mse: empty grid");
    if (!(prior_var > 0.0)) throw std::invalid_argument("relative_mse: prior_var must be > 0");
    return (estimate - truth).squaredNorm() / (prior_var * truth.size());
}

MetricsRow compute_metrics(const std::string& method, int replicate, const Vector& truth,
                           const Vector& estimate, double prior_var,
                           const std::vector<bool>* true_flags,
                           const std::vector<bool>* estimated_flags) {
    MetricsRow row;
    row.method = method;
    row.replicate = replicate;
    row.rel_mse = relative_mse(truth, estimate, prior_var);
    if (true_flags && estimated_flags)
        row.rates = classification_rates(*true_flags, *estimated_flags);
    return row;
}

std::string metrics_header() {
    return "method,replicate,rel_mse,fpr,fnr,fpr_defined,fnr_defined,status,config";
}

std::string metrics_line(const MetricsRow& row) {
    std::ostringstream os;
    os << row.method << ',' << row.replicate << ',';
    if (row.status == "ok") os << fmt(row.rel_mse);
    os << ',';
    if (row.rates) {
        const auto& r = *row.rates;
        os << fmt(r.fpr) << ',' << fmt(r.fnr) << ',' << (r.fpr_defined ? 1 : 0) << ','
           << (r.fnr_defined ? 1 : 0);
    } else {
        os << ",,,";
    }
    os << ',' << row.status << ',' << row.config_echo;
    return os.str();
}

}  // namespace fieldrec
