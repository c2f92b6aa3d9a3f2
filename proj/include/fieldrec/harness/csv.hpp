#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fieldrec/distortion.hpp"
#include "fieldrec/distributed.hpp"
#include "fieldrec/harness/metrics.hpp"
#include "fieldrec/linalg.hpp"

namespace fieldrec {

// Splits one CSV record; supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line);

struct SensorData {
    std::vector<std::string> ids;  // first-appearance order
    std::vector<Location> locations;
    std::vector<std::vector<double>> observations;
    std::size_t size() const { return ids.size(); }
};

// observations: header sensor_id,x1,x2,value; one row per reading
SensorData read_observations_csv(std::istream& in);
void write_observations_csv(std::ostream& out, const SensorData& data);

struct NamedLocations {
    std::vector<std::string> ids;
    std::vector<Location> coords;
};

// locations: header sensor_id,x1,x2 or sensor_id,longitude,latitude
NamedLocations read_locations_csv(std::istream& in);
void write_locations_csv(std::ostream& out, const NamedLocations& locs, bool lonlat);

struct GridTable {
    std::vector<Location> points;
    std::optional<Vector> truth;
    Vector estimate;
    std::optional<Vector> predictive_var;
};

// grid: header x1,x2[,truth],estimate[,predictive_var]
void write_grid_csv(std::ostream& out, const GridTable& table);
GridTable read_grid_csv(std::istream& in);

// partition: header sensor_id,cluster_id
void write_partition_csv(std::ostream& out, const std::vector<std::string>& ids,
                         const ClusterPartition& partition);
struct NamedPartition {
    std::vector<std::string> ids;
    std::vector<std::size_t> cluster;
};
NamedPartition read_partition_csv(std::istream& in);

// flags: header sensor_id,flag with 0/1 entries (1 = distorting)
void write_flags_csv(std::ostream& out, const std::vector<std::string>& ids,
                     const std::vector<bool>& flags);
std::vector<bool> read_flags_csv(std::istream& in);

// estimated distortions: header sensor_id,is_default,gain,offset
void write_psi_csv(std::ostream& out, const std::vector<std::string>& ids,
                   const DistortionParams& psi);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

// Daily-measurement ingest in the air-quality archive schema
// (State.Code, County.Code, Site.Num, Longitude, Latitude, Date.Local,
// X1st.Max.Value).  Rows are grouped by site; locations are (lon, lat).
struct IngestOptions {
    bool fahrenheit = true;       // convert readings F -> C before filtering
    double min_value = -17.88;    // outlier bounds, applied after conversion
    double max_value = 60.0;
    std::string date_prefix;      // keep only dates starting with this
};

struct IngestResult {
    SensorData data;
    std::size_t rows_read = 0;
    std::size_t kept = 0;
    std::size_t outliers = 0;
    std::size_t duplicates = 0;
    std::size_t malformed = 0;
    double missing_fraction = 0.0;  // 1 - kept / (sites x distinct dates)
    std::vector<std::string> warnings;
};

IngestResult ingest_epa_csv(std::istream& in, const IngestOptions& opts);

}  // namespace fieldrec
