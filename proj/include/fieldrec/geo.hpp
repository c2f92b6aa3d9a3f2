#pragma once

#include <vector>

#include "fieldrec/linalg.hpp"

namespace fieldrec {

// IUGG mean Earth radius.
constexpr double kEarthRadiusKm = 6371.0088;

// Haversine distance in km between (longitude, latitude) points in degrees.
double great_circle_distance(const Location& p, const Location& q);

// Local equirectangular projection: km-scaled plane about a reference point,
// exactly invertible (to_lonlat . to_plane_km == identity up to rounding).
class EquirectangularProjection {
public:
    explicit EquirectangularProjection(const Location& origin_lonlat);
    static EquirectangularProjection about_centroid(const std::vector<Location>& lonlat);

    Location to_plane_km(const Location& lonlat) const;
    Location to_lonlat(const Location& plane_km) const;
    std::vector<Location> to_plane_km(const std::vector<Location>& lonlat) const;

    const Location& origin() const { return origin_; }

private:
    Location origin_;  // (lon, lat) degrees
    double cos_lat0_;
};

}  // namespace fieldrec
