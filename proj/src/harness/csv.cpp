#include "fieldrec/harness/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace fieldrec {
namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& field, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(field, &pos);
        if (pos != field.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument("csv: bad " + what + ": '" + field + "'");
    }
}

bool next_record(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim(line).empty()) return true;
    }
    return false;
}

std::vector<std::string> header_of(std::istream& in, const std::string& what) {
    std::string line;
    if (!next_record(in, line)) throw std::invalid_argument("csv: empty " + what + " file");
    auto cols = split_csv_line(line);
    for (auto& c : cols) c = trim(c);
    return cols;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

SensorData read_observations_csv(std::istream& in) {
    const auto header = header_of(in, "observations");
    const auto ci = column_index(header, "sensor_id");
    const auto cx1 = column_index(header, "x1");
    const auto cx2 = column_index(header, "x2");
    const auto cv = column_index(header, "value");

    SensorData data;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    while (next_record(in, line)) {
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw std::invalid_argument("csv: observations row has wrong field count: " + line);
        const std::string id = trim(f[ci]);
        const double x1 = to_double(trim(f[cx1]), "x1");
        const double x2 = to_double(trim(f[cx2]), "x2");
        const double v = to_double(trim(f[cv]), "value");
        auto [it, fresh] = index.emplace(id, data.ids.size());
        if (fresh) {
            data.ids.push_back(id);
            data.locations.emplace_back(x1, x2);
            data.observations.emplace_back();
        } else {
            const Location& loc = data.locations[it->second];
            if (loc.x() != x1 || loc.y() != x2)
                throw std::invalid_argument("csv: sensor '" + id + "' appears at two locations");
        }
        data.observations[it->second].push_back(v);
    }
    if (data.ids.empty()) throw std::invalid_argument("csv: observations file has no data rows");
    return data;
}

void write_observations_csv(std::ostream& out, const SensorData& data) {
    out << "sensor_id,x1,x2,value\n";
    for (std::size_t i = 0; i < data.size(); ++i)
        for (double v : data.observations[i])
            out << data.ids[i] << ',' << fmt(data.locations[i].x()) << ','
                << fmt(data.locations[i].y()) << ',' << fmt(v) << '\n';
}

NamedLocations read_locations_csv(std::istream& in) {
    const auto header = header_of(in, "locations");
    const auto ci = column_index(header, "sensor_id");
    std::size_t cx1, cx2;
    if (std::find(header.begin(), header.end(), "longitude") != header.end()) {
        cx1 = column_index(header, "longitude");
        cx2 = column_index(header, "latitude");
    } else {
        cx1 = column_index(header, "x1");
        cx2 = column_index(header, "x2");
    }

    NamedLocations locs;
    std::set<std::string> seen;
    std::string line;
    while (next_record(in, line)) {
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw std::invalid_argument("csv: locations row has wrong field count: " + line);
        const std::string id = trim(f[ci]);
        if (!seen.insert(id).second)
            throw std::invalid_argument("csv: duplicate sensor_id '" + id + "' in locations");
        locs.ids.push_back(id);
        locs.coords.emplace_back(to_double(trim(f[cx1]), "coordinate"),
                                 to_double(trim(f[cx2]), "coordinate"));
    }
    if (locs.ids.empty()) throw std::invalid_argument("csv: locations file has no data rows");
    return locs;
}

void write_locations_csv(std::ostream& out, const NamedLocations& locs, bool lonlat) {
    out << (lonlat ? "sensor_id,longitude,latitude\n" : "sensor_id,x1,x2\n");
    for (std::size_t i = 0; i < locs.ids.size(); ++i)
        out << locs.ids[i] << ',' << fmt(locs.coords[i].x()) << ',' << fmt(locs.coords[i].y())
            << '\n';
}

void write_grid_csv(std::ostream& out, const GridTable& table) {
    const auto n = static_cast<std::size_t>(table.estimate.size());
    if (table.points.size() != n || (table.truth && static_cast<std::size_t>(table.truth->size()) != n) ||
        (table.predictive_var && static_cast<std::size_t>(table.predictive_var->size()) != n))
        throw std::invalid_argument("csv: grid column lengths differ");
    out << "x1,x2";
    if (table.truth) out << ",truth";
    out << ",estimate";
    if (table.predictive_var) out << ",predictive_var";
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << fmt(table.points[i].x()) << ',' << fmt(table.points[i].y());
        if (table.truth) out << ',' << fmt((*table.truth)[i]);
        out << ',' << fmt(table.estimate[i]);
        if (table.predictive_var) out << ',' << fmt((*table.predictive_var)[i]);
        out << '\n';
    }
}

GridTable read_grid_csv(std::istream& in) {
    const auto header = header_of(in, "grid");
    const auto cx1 = column_index(header, "x1");
    const auto cx2 = column_index(header, "x2");
    const auto ce = column_index(header, "estimate");
    const bool has_truth = std::find(header.begin(), header.end(), "truth") != header.end();
    const bool has_var =
        std::find(header.begin(), header.end(), "predictive_var") != header.end();
    const std::size_t ct = has_truth ? column_index(header, "truth") : 0;
    const std::size_t cv = has_var ? column_index(header, "predictive_var") : 0;

    std::vector<Location> pts;
    std::vector<double> truth, est, pvar;
    std::string line;
    while (next_record(in, line)) {
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw std::invalid_argument("csv: grid row has wrong field count: " + line);
        pts.emplace_back(to_double(trim(f[cx1]), "x1"), to_double(trim(f[cx2]), "x2"));
        est.push_back(to_double(trim(f[ce]), "estimate"));
        if (has_truth) truth.push_back(to_double(trim(f[ct]), "truth"));
        if (has_var) pvar.push_back(to_double(trim(f[cv]), "predictive_var"));
    }
    if (pts.empty()) throw std::invalid_argument("csv: grid file has no data rows");

    GridTable table;
    table.points = std::move(pts);
    table.estimate = Eigen::Map<const Vector>(est.data(), static_cast<Eigen::Index>(est.size()));
    if (has_truth)
        table.truth = Eigen::Map<const Vector>(truth.data(), static_cast<Eigen::Index>(truth.size()));
    if (has_var)
        table.predictive_var =
            Eigen::Map<const Vector>(pvar.data(), static_cast<Eigen::Index>(pvar.size()));
    return table;
}

void write_partition_csv(std::ostream& out, const std::vector<std::string>& ids,
                         const ClusterPartition& partition) {
    if (ids.size() != partition.assignment.size())
        throw std::invalid_argument("csv: partition/id length mismatch");
    out << "sensor_id,cluster_id\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        out << ids[i] << ',' << partition.assignment[i] << '\n';
}

NamedPartition read_partition_csv(std::istream& in) {
    const auto header = header_of(in, "partition");
    const auto ci = column_index(header, "sensor_id");
    const auto cc = column_index(header, "cluster_id");
    NamedPartition part;
    std::string line;
    while (next_record(in, line)) {
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw std::invalid_argument("csv: partition row has wrong field count: " + line);
        part.ids.push_back(trim(f[ci]));
        const double c = to_double(trim(f[cc]), "cluster_id");
        if (c < 1 || c != std::floor(c))
            throw std::invalid_argument("csv: cluster_id must be a positive integer");
        part.cluster.push_back(static_cast<std::size_t>(c));
    }
    if (part.ids.empty()) throw std::invalid_argument("csv: partition file has no data rows");
    return part;
}

void write_flags_csv(std::ostream& out, const std::vector<std::string>& ids,
                     const std::vector<bool>& flags) {
    if (ids.size() != flags.size()) throw std::invalid_argument("csv: flags/id length mismatch");
    out << "sensor_id,flag\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        out << ids[i] << ',' << (flags[i] ? 1 : 0) << '\n';
}

std::vector<bool> read_flags_csv(std::istream& in) {
    const auto header = header_of(in, "flags");
    const auto ci = column_index(header, "sensor_id");
    const auto cf = column_index(header, "flag");
    (void)ci;
    std::vector<bool> flags;
    std::string line;
    while (next_record(in, line)) {
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw std::invalid_argument("csv: flags row has wrong field count: " + line);
        const std::string v = trim(f[cf]);
        if (v == "0") flags.push_back(false);
        else if (v == "1") flags.push_back(true);
        else throw std::invalid_argument("csv: flag must be 0 or 1, got '" + v + "'");
    }
    if (flags.empty()) throw std::invalid_argument("csv: flags file has no data rows");
    return flags;
}

void write_psi_csv(std::ostream& out, const std::vector<std::string>& ids,
                   const DistortionParams& psi) {
    if (ids.size() != psi.size()) throw std::invalid_argument("csv: psi/id length mismatch");
    out << "sensor_id,is_default,gain,offset\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        out << ids[i] << ',' << (psi[i].is_default ? 1 : 0) << ',' << fmt(psi[i].gain) << ','
            << fmt(psi[i].offset) << '\n';
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << metrics_header() << '\n';
    for (const auto& row : rows) out << metrics_line(row) << '\n';
}

IngestResult ingest_epa_csv(std::istream& in, const IngestOptions& opts) {
    if (!(opts.min_value < opts.max_value))
        throw std::invalid_argument("ingest: outlier bounds must satisfy min < max");
    const auto header = header_of(in, "measurement");
    const auto c_state = column_index(header, "State.Code");
    const auto c_county = column_index(header, "County.Code");
    const auto c_site = column_index(header, "Site.Num");
    const auto c_lon = column_index(header, "Longitude");
    const auto c_lat = column_index(header, "Latitude");
    const auto c_date = column_index(header, "Date.Local");
    const auto c_value = column_index(header, "X1st.Max.Value");

    IngestResult res;
    std::unordered_map<std::string, std::size_t> site_index;
    std::set<std::pair<std::size_t, std::string>> seen;  // (site, date)
    std::set<std::string> dates;
    std::string line;
    std::size_t row_no = 1;
    while (next_record(in, line)) {
        ++row_no;
        ++res.rows_read;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) {
            ++res.malformed;
            res.warnings.push_back("row " + std::to_string(row_no) + ": wrong field count");
            continue;
        }
        const std::string date = trim(f[c_date]);
        if (!opts.date_prefix.empty() && date.rfind(opts.date_prefix, 0) != 0) continue;

        double lon, lat, value;
        try {
            lon = to_double(trim(f[c_lon]), "Longitude");
            lat = to_double(trim(f[c_lat]), "Latitude");
            value = to_double(trim(f[c_value]), "X1st.Max.Value");
        } catch (const std::invalid_argument& e) {
            ++res.malformed;
            res.warnings.push_back("row " + std::to_string(row_no) + ": " + e.what());
            continue;
        }
        if (opts.fahrenheit) value = (value - 32.0) * 5.0 / 9.0;
        if (value < opts.min_value || value > opts.max_value) {
            ++res.outliers;
            continue;
        }

        const std::string key = trim(f[c_state]) + "-" + trim(f[c_county]) + "-" + trim(f[c_site]);
        auto [it, fresh] = site_index.emplace(key, res.data.ids.size());
        if (fresh) {
            res.data.ids.push_back(key);
            res.data.locations.emplace_back(lon, lat);
            res.data.observations.emplace_back();
        }
        if (!seen.emplace(it->second, date).second) {
            ++res.duplicates;  // keep the first reading for a (site, date)
            continue;
        }
        dates.insert(date);
        res.data.observations[it->second].push_back(value);
        ++res.kept;
    }
    if (res.data.ids.empty()) throw std::invalid_argument("ingest: no usable measurement rows");
    const double cells = static_cast<double>(res.data.ids.size()) * dates.size();
    res.missing_fraction = cells > 0 ? 1.0 - res.kept / cells : 0.0;
    return res;
}

}  // namespace fieldrec
