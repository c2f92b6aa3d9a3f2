#pragma once

#include <vector>

#include "fieldrec/geo.hpp"

namespace fieldrec {

// Disjoint cover of the sensors by clusters labeled 1..n_clusters.
struct ClusterPartition {
    std::vector<int> assignment;  // sensor index -> cluster id (1-based)
    int n_clusters = 0;
    void validate() const;
    std::vector<std::vector<std::size_t>> members() const;  // indexed by cluster id - 1
};

struct LinkageResult {
    ClusterPartition partition;
    std::vector<double> merge_heights;  // non-decreasing for complete linkage
};

// Agglomerative complete-linkage clustering on a precomputed symmetric
// distance matrix, cut at n_clusters.  Cluster ids are assigned 1..I in order
// of each cluster's smallest sensor index.
LinkageResult complete_linkage(const Matrix& distances, int n_clusters);

// Complete-linkage clustering of (longitude, latitude) sensors under the
// great-circle distance.
ClusterPartition cluster_sensors(const std::vector<Location>& lonlat, int n_clusters);

// One cluster's answer at the target: a point estimate and its quality
// (Bayes risk for the linear estimator, predictive variance for the
// empirical-Bayes estimators).
struct LocalEstimate {
    int cluster_id = 0;
    double estimate = 0.0;
    double quality = 0.0;
};

// Select the local estimate with minimal risk; ties go to the lowest cluster
// id.  Returns (fused estimate, risk bound), the bound being the minimal risk.
std::pair<double, double> dsblue_fuse(const std::vector<LocalEstimate>& locals);
// Same selection rule with predictive variance as the quality; no bound.
double deb_fuse(const std::vector<LocalEstimate>& locals);

}  // namespace fieldrec
