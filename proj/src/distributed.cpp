#include "fieldrec/distributed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fieldrec {

void ClusterPartition::validate() const {
    if (n_clusters < 1) throw std::invalid_argument("partition: need at least one cluster");
    if (assignment.empty()) throw std::invalid_argument("partition: no sensors");
    std::vector<int> sizes(static_cast<std::size_t>(n_clusters), 0);
    for (int id : assignment) {
        if (id < 1 || id > n_clusters)
            throw std::invalid_argument("partition: cluster id out of range");
        ++sizes[static_cast<std::size_t>(id - 1)];
    }
    for (int s : sizes)
        if (s == 0) throw std::invalid_argument("partition: empty cluster");
}

std::vector<std::vector<std::size_t>> ClusterPartition::members() const {
    validate();
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n_clusters));
    for (std::size_t i = 0; i < assignment.size(); ++i)
        out[static_cast<std::size_t>(assignment[i] - 1)].push_back(i);
    return out;
}

LinkageResult complete_linkage(const Matrix& distances, int n_clusters) {
    const Eigen::Index n = distances.rows();
    if (n < 1 || distances.cols() != n)
        throw std::invalid_argument("complete_linkage: bad distance matrix");
    if (n_clusters < 1 || n_clusters > n)
        throw std::invalid_argument("complete_linkage: cluster count out of range");

    // Active cluster list; linkage distances updated in place (complete
    // linkage: distance between merged clusters is the pairwise max).
    Matrix link = distances;
    std::vector<bool> active(static_cast<std::size_t>(n), true);
    std::vector<int> smallest_member(static_cast<std::size_t>(n));
    std::iota(smallest_member.begin(), smallest_member.end(), 0);
    std::vector<int> owner(static_cast<std::size_t>(n));  // sensor -> active cluster slot
    std::iota(owner.begin(), owner.end(), 0);

    LinkageResult result;
    int remaining = static_cast<int>(n);
    while (remaining > n_clusters) {
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index bi = -1, bj = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!active[static_cast<std::size_t>(i)]) continue;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                if (!active[static_cast<std::size_t>(j)]) continue;
                if (link(i, j) < best) {
                    best = link(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        result.merge_heights.push_back(best);
        // merge slot bj into slot bi
        for (Eigen::Index k = 0; k < n; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == bi || k == bj) continue;
            const double d = std::max(link(bi, k), link(bj, k));
            link(bi, k) = d;
            link(k, bi) = d;
        }
        active[static_cast<std::size_t>(bj)] = false;
        smallest_member[static_cast<std::size_t>(bi)] =
            std::min(smallest_member[static_cast<std::size_t>(bi)],
                     smallest_member[static_cast<std::size_t>(bj)]);
        for (auto& o : owner)
            if (o == static_cast<int>(bj)) o = static_cast<int>(bi);
        --remaining;
    }

    // label clusters 1..I in order of smallest member index
    std::vector<std::pair<int, int>> slots;  // (smallest member, slot)
    for (Eigen::Index i = 0; i < n; ++i)
        if (active[static_cast<std::size_t>(i)])
            slots.emplace_back(smallest_member[static_cast<std::size_t>(i)],
                               static_cast<int>(i));
    std::sort(slots.begin(), slots.end());
    std::vector<int> slot_to_id(static_cast<std::size_t>(n), 0);
    for (std::size_t r = 0; r < slots.size(); ++r)
        slot_to_id[static_cast<std::size_t>(slots[r].second)] = static_cast<int>(r) + 1;

    result.partition.n_clusters = n_clusters;
    result.partition.assignment.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        result.partition.assignment[static_cast<std::size_t>(i)] =
            slot_to_id[static_cast<std::size_t>(owner[static_cast<std::size_t>(i)])];
    result.partition.validate();
    return result;
}

ClusterPartition cluster_sensors(const std::vector<Location>& lonlat, int n_clusters) {
    if (lonlat.empty()) throw std::invalid_argument("cluster_sensors: no sensors");
    const Eigen::Index n = static_cast<Eigen::Index>(lonlat.size());
    Matrix d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = great_circle_distance(lonlat[static_cast<std::size_t>(i)],
                                                   lonlat[static_cast<std::size_t>(j)]);
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return complete_linkage(d, n_clusters).partition;
}

namespace {

const LocalEstimate& select_min_quality(const std::vector<LocalEstimate>& locals,
                                        const char* what) {
    if (locals.empty()) throw std::invalid_argument(std::string(what) + ": no local estimates");
    const LocalEstimate* best = nullptr;
    for (const auto& l : locals) {
        if (!std::isfinite(l.quality) || l.quality < 0.0)
            throw std::invalid_argument(std::string(what) +
                                        ": qualities must be finite and non-negative");
        if (best == nullptr || l.quality < best->quality ||
            (l.quality == best->quality && l.cluster_id < best->cluster_id))
            best = &l;
    }
    return *best;
}

}  // namespace

std::pair<double, double> dsblue_fuse(const std::vector<LocalEstimate>& locals) {
    const LocalEstimate& best = select_min_quality(locals, "dsblue_fuse");
    return {best.estimate, best.quality};
}

double deb_fuse(const std::vector<LocalEstimate>& locals) {
    return select_min_quality(locals, "deb_fuse").estimate;
}

}  // namespace fieldrec
