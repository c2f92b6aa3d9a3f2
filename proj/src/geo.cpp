#include "fieldrec/geo.hpp"

#include <algorithm>
#include <cmath>

namespace fieldrec {
namespace {

constexpr double kDegToRad = M_PI / 180.0;

void check_lonlat(const Location& p) {
    if (!p.allFinite()) throw std::invalid_argument("lon/lat must be finite");
    if (std::abs(p[1]) > 90.0) throw std::invalid_argument("latitude must be in [-90, 90]");
}

}  // namespace

double great_circle_distance(const Location& p, const Location& q) {
    check_lonlat(p);
    check_lonlat(q);
    const double phi1 = p[1] * kDegToRad;
    const double phi2 = q[1] * kDegToRad;
    const double dphi = (q[1] - p[1]) * kDegToRad;
    const double dlam = (q[0] - p[0]) * kDegToRad;
    const double sp = std::sin(0.5 * dphi);
    const double sl = std::sin(0.5 * dlam);
    const double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

EquirectangularProjection::EquirectangularProjection(const Location& origin_lonlat)
    : origin_(origin_lonlat), cos_lat0_(std::cos(origin_lonlat[1] * kDegToRad)) {
    check_lonlat(origin_lonlat);
    if (cos_lat0_ <= 0.0)
        throw std::invalid_argument("projection origin too close to a pole");
}

EquirectangularProjection EquirectangularProjection::about_centroid(
    const std::vector<Location>& lonlat) {
    if (lonlat.empty()) throw std::invalid_argument("projection: no points");
    Location c = Location::Zero();
    for (const auto& p : lonlat) {
        check_lonlat(p);
        c += p;
    }
    c /= static_cast<double>(lonlat.size());
    return EquirectangularProjection(c);
}

Location EquirectangularProjection::to_plane_km(const Location& lonlat) const {
    check_lonlat(lonlat);
    return {kEarthRadiusKm * cos_lat0_ * (lonlat[0] - origin_[0]) * kDegToRad,
            kEarthRadiusKm * (lonlat[1] - origin_[1]) * kDegToRad};
}

Location EquirectangularProjection::to_lonlat(const Location& plane_km) const {
    return {origin_[0] + plane_km[0] / (kEarthRadiusKm * cos_lat0_) / kDegToRad,
            origin_[1] + plane_km[1] / kEarthRadiusKm / kDegToRad};
}

std::vector<Location> EquirectangularProjection::to_plane_km(
    const std::vector<Location>& lonlat) const {
    std::vector<Location> out;
    out.reserve(lonlat.size());
    for (const auto& p : lonlat) out.push_back(to_plane_km(p));
    return out;
}

}  // namespace fieldrec
