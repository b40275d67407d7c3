#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "bitmc/matrix.hpp"
#include "bitmc/metrics.hpp"
#include "bitmc/observation.hpp"
#include "bitmc/rng.hpp"

namespace bitmc {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kResultSchemaVersion = 1;

namespace detail {

/// Shortest decimal that round-trips the double exactly (up to 17 digits).
inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) parts.push_back(field);
    if (!line.empty() && line.back() == sep) parts.emplace_back();
    return parts;
}

inline double parse_number(const std::string& s, const std::string& path, std::size_t lineno) {
    const auto bad = [&] {
        return ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
    };
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw bad();
    while (*end != '\0' && std::isspace(static_cast<unsigned char>(*end))) ++end;
    if (*end != '\0') throw bad();
    // overflow is an error; gradual underflow keeps the rounded subnormal
    if (errno == ERANGE && (v == HUGE_VAL || v == -HUGE_VAL)) throw bad();
    return v;
}

inline std::int64_t parse_int(const std::string& s, const std::string& path, std::size_t lineno) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad integer '" + s + "'");
    }
}

}  // namespace detail

// --- matrix CSV: header line "rows,cols", then one comma-separated row per line

inline void write_matrix_csv(const std::string& path, const DenseMatrix& m) {
    auto out = detail::open_output(path);
    out << m.rows() << "," << m.cols() << "\n";
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ",";
            out << detail::format_double(m(i, j));
        }
        out << "\n";
    }
}

inline DenseMatrix read_matrix_csv(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: missing header");
    const auto header = detail::split(line, ',');
    if (header.size() != 2) throw ParseError(path + ":1: header must be rows,cols");
    const Index rows = detail::parse_int(header[0], path, 1);
    const Index cols = detail::parse_int(header[1], path, 1);
    if (rows <= 0 || cols <= 0) throw ParseError(path + ":1: dimensions must be positive");
    DenseMatrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line))
            throw ParseError(path + ": expected " + std::to_string(rows) + " rows");
        const auto parts = detail::split(line, ',');
        if (static_cast<Index>(parts.size()) != cols)
            throw ParseError(path + ":" + std::to_string(i + 2) + ": expected " +
                             std::to_string(cols) + " columns");
        for (Index j = 0; j < cols; ++j)
            m(i, j) = detail::parse_number(parts[j], path, static_cast<std::size_t>(i + 2));
    }
    if (!all_finite(m)) throw ParseError(path + ": matrix entries must be finite");
    return m;
}

// --- observation set file: header "d1,d2", then "i,j,y" lines

inline void write_observations(const std::string& path, const ObservationSet& obs) {
    auto out = detail::open_output(path);
    out << obs.d1 << "," << obs.d2 << "\n";
    for (const auto& e : obs.entries) out << e.i << "," << e.j << "," << e.y << "\n";
}

inline ObservationSet read_observations(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: missing header");
    const auto header = detail::split(line, ',');
    if (header.size() != 2) throw ParseError(path + ":1: header must be d1,d2");
    ObservationSet obs;
    obs.d1 = detail::parse_int(header[0], path, 1);
    obs.d2 = detail::parse_int(header[1], path, 1);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto parts = detail::split(line, ',');
        if (parts.size() != 3)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected i,j,y");
        Observation e;
        e.i = detail::parse_int(parts[0], path, lineno);
        e.j = detail::parse_int(parts[1], path, lineno);
        e.y = static_cast<int>(detail::parse_int(parts[2], path, lineno));
        obs.entries.push_back(e);
    }
    obs.validate();
    return obs;
}

// --- ratings ingestion

enum class RatingsFormat { tsv_uirt, csv_uir };

struct RatingRecord {
    std::int64_t user = 0;
    std::int64_t item = 0;
    double rating = 0.0;
    std::optional<std::int64_t> timestamp;
};

/// Ratings with contiguous row/column index maps (ids sorted ascending).
struct RatingsTable {
    std::vector<RatingRecord> records;
    std::map<std::int64_t, Index> user_index;
    std::map<std::int64_t, Index> item_index;
    Index d1 = 0;
    Index d2 = 0;
    std::vector<std::string> warnings;

    Index row_of(std::int64_t user) const { return user_index.at(user); }
    Index col_of(std::int64_t item) const { return item_index.at(item); }

    double mean_rating() const {
        if (records.empty()) throw std::invalid_argument("RatingsTable: empty table");
        double acc = 0.0;
        for (const auto& r : records) acc += r.rating;
        return acc / static_cast<double>(records.size());
    }
};

inline RatingsTable parse_ratings(const std::string& path, RatingsFormat format) {
    auto in = detail::open_input(path);
    const char sep = format == RatingsFormat::tsv_uirt ? '\t' : ',';
    const std::size_t want = format == RatingsFormat::tsv_uirt ? 4 : 3;

    RatingsTable table;
    std::unordered_map<std::uint64_t, std::size_t> position;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto parts = detail::split(line, sep);
        if (parts.size() != want)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(want) + " fields");
        RatingRecord rec;
        rec.user = detail::parse_int(parts[0], path, lineno);
        rec.item = detail::parse_int(parts[1], path, lineno);
        rec.rating = detail::parse_number(parts[2], path, lineno);
        if (!std::isfinite(rec.rating))
            throw ParseError(path + ":" + std::to_string(lineno) + ": rating must be finite");
        if (format == RatingsFormat::tsv_uirt)
            rec.timestamp = detail::parse_int(parts[3], path, lineno);

        const std::uint64_t key = (static_cast<std::uint64_t>(rec.user) << 32) ^
                                  static_cast<std::uint64_t>(rec.item & 0xffffffff);
        auto [it, inserted] = position.try_emplace(key, table.records.size());
        if (inserted) {
            table.records.push_back(rec);
        } else {
            table.warnings.push_back(path + ":" + std::to_string(lineno) +
                                     ": duplicate (user,item), keeping last");
            table.records[it->second] = rec;
        }
    }
    for (const auto& r : table.records) {
        table.user_index.emplace(r.user, 0);
        table.item_index.emplace(r.item, 0);
    }
    Index next = 0;
    for (auto& [id, idx] : table.user_index) idx = next++;
    next = 0;
    for (auto& [id, idx] : table.item_index) idx = next++;
    table.d1 = static_cast<Index>(table.user_index.size());
    table.d2 = static_cast<Index>(table.item_index.size());
    return table;
}

// --- binarization and train/holdout split

struct SplitObservations {
    ObservationSet train;
    std::vector<HoldoutEntry> holdout;
    double threshold = 0.0;
};

/// Binarize ratings against a global threshold (default: the mean rating of
/// the whole table) and hold out a seeded uniform sample of entries.
/// A rating equal to the threshold maps to -1.
inline SplitObservations binarize_split(const RatingsTable& table, double holdout_fraction,
                                        RngSeed seed, std::optional<double> threshold = {}) {
    if (table.records.empty()) throw std::invalid_argument("binarize_split: empty table");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw std::invalid_argument("binarize_split: holdout_fraction must lie in (0,1)");

    SplitObservations out;
    out.threshold = threshold ? *threshold : table.mean_rating();

    const std::size_t n = table.records.size();
    const auto holdout_count =
        static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    Rng rng(seed);
    for (std::size_t k = n; k > 1; --k) {  // Fisher-Yates over record indices
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % k);
        std::swap(order[k - 1], order[j]);
    }

    out.train.d1 = table.d1;
    out.train.d2 = table.d2;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& rec = table.records[order[k]];
        const int label = rec.rating > out.threshold ? 1 : -1;
        const Index i = table.row_of(rec.user);
        const Index j = table.col_of(rec.item);
        if (k < holdout_count)
            out.holdout.push_back({i, j, rec.rating, label});
        else
            out.train.entries.push_back({i, j, label});
    }
    return out;
}

// --- experiment result JSON

inline void write_result_json(const std::string& path, nlohmann::json body) {
    body["schema_version"] = kResultSchemaVersion;
    auto out = detail::open_output(path);
    out << body.dump(2) << "\n";
}

inline nlohmann::json read_result_json(const std::string& path) {
    auto in = detail::open_input(path);
    nlohmann::json body;
    try {
        in >> body;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (!body.contains("schema_version") || !body["schema_version"].is_number_integer())
        throw SchemaError(path + ": missing schema_version");
    if (body["schema_version"].get<int>() != kResultSchemaVersion)
        throw SchemaError(path + ": schema_version " +
                          std::to_string(body["schema_version"].get<int>()) +
                          " != " + std::to_string(kResultSchemaVersion));
    return body;
}

}  // namespace bitmc
