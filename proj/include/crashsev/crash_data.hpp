#pragma once

#include "crashsev/csv.hpp"
#include "crashsev/error.hpp"
#include "crashsev/rng.hpp"
#include "crashsev/severity.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

namespace crashsev {

enum class FieldGroup : std::uint8_t { Crash, Driver, Vehicle, Roadway, Environment, Situation };

inline constexpr std::array<FieldGroup, 6> kAllGroups = {FieldGroup::Crash,   FieldGroup::Driver,
                                                         FieldGroup::Vehicle, FieldGroup::Roadway,
                                                         FieldGroup::Environment, FieldGroup::Situation};

constexpr std::string_view to_string(FieldGroup g) {
    switch (g) {
    case FieldGroup::Crash: return "crash characteristics";
    case FieldGroup::Driver: return "driver";
    case FieldGroup::Vehicle: return "vehicle";
    case FieldGroup::Roadway: return "roadway";
    case FieldGroup::Environment: return "environment";
    case FieldGroup::Situation: return "situation";
    }
    return "?";
}

enum class FieldKind : std::uint8_t {
    Category,
    Month,     // 1..12
    Count,     // integer >= min
    Kilograms, // real >= 0
    Years,     // integer >= 0
    Sequence,  // integer >= 1
};

struct FieldSpec {
    std::string_view name;   // snake_case identifier used by templates and schema maps
    std::string_view column; // default header name
    FieldGroup group;
    FieldKind kind;
    long long min = 0;
};

// clang-format off
inline constexpr std::array<FieldSpec, 44> kFields = {{
    {"accident_type",      "ACCIDENT_TYPE",      FieldGroup::Crash, FieldKind::Category},
    {"event_type",         "EVENT_TYPE",         FieldGroup::Crash, FieldKind::Category},
    {"vehicle_1_coll_pt",  "VEHICLE_1_COLL_PT",  FieldGroup::Crash, FieldKind::Category},
    {"vehicle_2_coll_pt",  "VEHICLE_2_COLL_PT",  FieldGroup::Crash, FieldKind::Category},
    {"object_type",        "OBJECT_TYPE",        FieldGroup::Crash, FieldKind::Category},
    {"dca",                "DCA",                FieldGroup::Crash, FieldKind::Category},
    {"accident_month",     "ACCIDENT_MONTH",     FieldGroup::Crash, FieldKind::Month, 1},
    {"time_period",        "TIME_PERIOD",        FieldGroup::Crash, FieldKind::Category},
    {"day_of_week",        "DAY_OF_WEEK",        FieldGroup::Crash, FieldKind::Category},
    {"lga_name",           "LGA_NAME",           FieldGroup::Crash, FieldKind::Category},
    {"region_name",        "REGION_NAME",        FieldGroup::Crash, FieldKind::Category},
    {"deg_urban_name",     "DEG_URBAN_NAME",     FieldGroup::Crash, FieldKind::Category},

    {"driver_sex",         "DRIVER_SEX",         FieldGroup::Driver, FieldKind::Category},
    {"age_group",          "AGE_GROUP",          FieldGroup::Driver, FieldKind::Category},
    {"road_user_type",     "ROAD_USER_TYPE",     FieldGroup::Driver, FieldKind::Category},
    {"helmet_belt_worn",   "HELMET_BELT_WORN",   FieldGroup::Driver, FieldKind::Category},

    {"vehicle_type",       "VEHICLE_TYPE",       FieldGroup::Vehicle, FieldKind::Category},
    {"vehicle_weight",     "VEHICLE_WEIGHT",     FieldGroup::Vehicle, FieldKind::Kilograms},
    {"no_of_wheels",       "NO_OF_WHEELS",       FieldGroup::Vehicle, FieldKind::Count},
    {"seating_capacity",   "SEATING_CAPACITY",   FieldGroup::Vehicle, FieldKind::Count},
    {"fuel_type",          "FUEL_TYPE",          FieldGroup::Vehicle, FieldKind::Category},
    {"vehicle_age",        "VEHICLE_AGE",        FieldGroup::Vehicle, FieldKind::Years},
    {"vehicle_body_style", "VEHICLE_BODY_STYLE", FieldGroup::Vehicle, FieldKind::Category},
    {"trailer_type",       "TRAILER_TYPE",       FieldGroup::Vehicle, FieldKind::Category},
    {"lamps",              "LAMPS",              FieldGroup::Vehicle, FieldKind::Category},
    {"vehicle_movement",   "VEHICLE_MOVEMENT",   FieldGroup::Vehicle, FieldKind::Category},

    {"road_type",          "ROAD_TYPE",          FieldGroup::Roadway, FieldKind::Category},
    {"road_geometry",      "ROAD_GEOMETRY",      FieldGroup::Roadway, FieldKind::Category},
    {"speed_zone",         "SPEED_ZONE",         FieldGroup::Roadway, FieldKind::Category},
    {"road_surface_type",  "ROAD_SURFACE_TYPE",  FieldGroup::Roadway, FieldKind::Category},
    {"road_type_int",      "ROAD_TYPE_INT",      FieldGroup::Roadway, FieldKind::Category},
    {"complex_int_no",     "COMPLEX_INT_NO",     FieldGroup::Roadway, FieldKind::Category},

    {"light_condition",    "LIGHT_CONDITION",    FieldGroup::Environment, FieldKind::Category},
    {"surface_cond",       "SURFACE_COND",       FieldGroup::Environment, FieldKind::Category},
    {"surface_cond_seq",   "SURFACE_COND_SEQ",   FieldGroup::Environment, FieldKind::Sequence, 1},
    {"atmosph_cond",       "ATMOSPH_COND",       FieldGroup::Environment, FieldKind::Category},
    {"atmosph_cond_seq",   "ATMOSPH_COND_SEQ",   FieldGroup::Environment, FieldKind::Sequence, 1},

    {"no_of_vehicles",     "NO_OF_VEHICLES",     FieldGroup::Situation, FieldKind::Count, 1},
    {"traffic_control",    "TRAFFIC_CONTROL",    FieldGroup::Situation, FieldKind::Category},
    {"no_persons",         "NO_PERSONS",         FieldGroup::Situation, FieldKind::Count, 1},
    {"no_occupants",       "NO_OCCUPANTS",       FieldGroup::Situation, FieldKind::Count},
    {"sub_dca",            "SUB_DCA",            FieldGroup::Situation, FieldKind::Category},
    {"sub_dca_seq",        "SUB_DCA_SEQ",        FieldGroup::Situation, FieldKind::Sequence, 1},
    {"driver_intent",      "DRIVER_INTENT",      FieldGroup::Situation, FieldKind::Category},
}};
// clang-format on

inline constexpr std::size_t kFieldCount = kFields.size();
inline constexpr std::string_view kUnknown = "Unknown";
inline constexpr std::string_view kRecordIdColumn = "RECORD_ID";
inline constexpr std::string_view kSeverityColumn = "SEVERITY";

/// Index into kFields for a snake_case field name.
inline std::optional<std::size_t> field_index(std::string_view name) {
    for (std::size_t i = 0; i < kFields.size(); ++i)
        if (kFields[i].name == name) return i;
    return std::nullopt;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::string_view trim(std::string_view s) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::string format_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

/// A cell: unknown, a category string, an integer, or a real.
class FieldValue {
public:
    FieldValue() = default;
    static FieldValue text(std::string s) { return FieldValue(Storage(std::move(s))); }
    static FieldValue integer(long long v) { return FieldValue(Storage(v)); }
    static FieldValue real(double v) { return FieldValue(Storage(v)); }

    bool is_unknown() const noexcept { return std::holds_alternative<std::monostate>(v_); }
    std::optional<long long> as_integer() const {
        if (auto p = std::get_if<long long>(&v_)) return *p;
        return std::nullopt;
    }
    std::optional<double> as_real() const {
        if (auto p = std::get_if<double>(&v_)) return *p;
        return std::nullopt;
    }

    /// Canonical cell text; "Unknown" for the unknown sentinel.
    std::string str() const {
        if (auto p = std::get_if<std::string>(&v_)) return *p;
        if (auto p = std::get_if<long long>(&v_)) return std::to_string(*p);
        if (auto p = std::get_if<double>(&v_)) return format_real(*p);
        return std::string(kUnknown);
    }

    friend bool operator==(const FieldValue&, const FieldValue&) = default;

private:
    using Storage = std::variant<std::monostate, std::string, long long, double>;
    explicit FieldValue(Storage v) : v_(std::move(v)) {}
    Storage v_;
};

struct CrashRecord {
    std::string record_id;
    std::array<FieldValue, kFieldCount> values{};
    RawSeverityCode severity = RawSeverityCode::from_int(4);
    SeverityClass label = SeverityClass::MinorOrNonInjury;

    const FieldValue& get(std::string_view field) const {
        auto i = field_index(field);
        if (!i) throw Error(ErrorCode::UnresolvedPlaceholder, "no such field: " + std::string(field));
        return values[*i];
    }
    FieldValue& get(std::string_view field) {
        return const_cast<FieldValue&>(std::as_const(*this).get(field));
    }

    friend bool operator==(const CrashRecord&, const CrashRecord&) = default;
};

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<CrashRecord> records) : records_(std::move(records)) {
        for (const auto& r : records_) ++counts_[index_of(r.label)];
    }

    const std::vector<CrashRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    std::size_t count(SeverityClass c) const { return counts_[index_of(c)]; }
    const std::array<std::size_t, 3>& class_counts() const noexcept { return counts_; }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::vector<CrashRecord> records_;
    std::array<std::size_t, 3> counts_{};
};

/// Header-name overrides: field name (or "record_id"/"severity") -> column header.
struct SchemaMap {
    std::map<std::string, std::string> columns;

    static SchemaMap from_json(const nlohmann::json& j) {
        SchemaMap schema;
        if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "schema map must be a JSON object");
        for (const auto& [key, value] : j.items()) {
            if (key != "record_id" && key != "severity" && !field_index(key))
                throw Error(ErrorCode::InvalidConfig, "schema map names unknown field: " + key);
            if (!value.is_string()) throw Error(ErrorCode::InvalidConfig, "schema map value for " + key + " must be a string");
            schema.columns[key] = value.get<std::string>();
        }
        return schema;
    }

    std::string column_for(std::string_view field, std::string_view fallback) const {
        if (auto it = columns.find(std::string(field)); it != columns.end()) return it->second;
        return std::string(fallback);
    }
};

struct RowError {
    std::size_t line = 0;
    ErrorCode code = ErrorCode::MalformedRow;
    std::string message;
};

struct ParseResult {
    Dataset dataset;
    std::vector<RowError> errors;

    /// Throws the first row error, if any.
    const Dataset& checked() const {
        if (!errors.empty()) {
            const auto& e = errors.front();
            throw Error(e.code, "line " + std::to_string(e.line) + ": " + e.message);
        }
        return dataset;
    }
};

namespace detail {

inline bool is_unknown_cell(std::string_view cell) {
    auto lowered = to_lower(trim(cell));
    return lowered.empty() || lowered == "unknown" || lowered == "not known";
}

inline FieldValue parse_cell(const FieldSpec& spec, std::string_view raw) {
    auto cell = trim(raw);
    if (is_unknown_cell(cell)) return {};
    if (spec.kind == FieldKind::Category) return FieldValue::text(std::string(cell));

    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (spec.kind == FieldKind::Kilograms) {
        double v = 0;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last || !std::isfinite(v) || v < 0)
            throw Error(ErrorCode::MalformedRow, std::string(spec.column) + " is not a non-negative weight: '" + std::string(cell) + "'");
        return FieldValue::real(v);
    }
    long long v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw Error(ErrorCode::MalformedRow, std::string(spec.column) + " is not an integer: '" + std::string(cell) + "'");
    if (v < spec.min || (spec.kind == FieldKind::Month && v > 12))
        throw Error(ErrorCode::MalformedRow, std::string(spec.column) + " out of range: " + std::to_string(v));
    return FieldValue::integer(v);
}

} // namespace detail

/// Parses comma-delimited text with a header row. Header-level problems throw;
/// row-level problems are collected so one bad row does not hide the rest.
inline ParseResult parse_records(std::istream& source, const SchemaMap& schema = {},
                                 const SeverityMapping& mapping = {}) {
    csv::Reader reader(source);
    std::vector<std::string> header;
    if (!reader.next(header)) throw Error(ErrorCode::MissingColumn, "input has no header row");
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

    std::unordered_map<std::string, std::size_t> by_name;
    for (std::size_t i = 0; i < header.size(); ++i) by_name.emplace(to_lower(trim(header[i])), i);

    auto locate = [&](std::string_view field, std::string_view fallback) {
        auto column = schema.column_for(field, fallback);
        auto it = by_name.find(to_lower(column));
        if (it == by_name.end()) throw Error(ErrorCode::MissingColumn, "column " + column + " absent from header");
        return it->second;
    };

    const std::size_t id_col = locate("record_id", kRecordIdColumn);
    const std::size_t severity_col = locate("severity", kSeverityColumn);
    std::array<std::size_t, kFieldCount> cols{};
    for (std::size_t i = 0; i < kFieldCount; ++i) cols[i] = locate(kFields[i].name, kFields[i].column);

    ParseResult result;
    std::vector<CrashRecord> records;
    std::unordered_set<std::string> seen;
    std::vector<std::string> row;
    while (reader.next(row)) {
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        const auto line = reader.line();
        try {
            if (row.size() != header.size())
                throw Error(ErrorCode::MalformedRow, "expected " + std::to_string(header.size()) + " fields, got " +
                                                         std::to_string(row.size()));
            CrashRecord rec;
            rec.record_id = std::string(trim(row[id_col]));
            if (rec.record_id.empty()) throw Error(ErrorCode::MalformedRow, "empty record id");
            if (!seen.insert(rec.record_id).second)
                throw Error(ErrorCode::MalformedRow, "duplicate record id " + rec.record_id);

            auto sev = trim(row[severity_col]);
            long long code = 0;
            auto [ptr, ec] = std::from_chars(sev.data(), sev.data() + sev.size(), code);
            if (ec != std::errc{} || ptr != sev.data() + sev.size() || sev.empty())
                throw Error(ErrorCode::UnknownSeverityCode, "severity '" + std::string(sev) + "' is not a code");
            rec.severity = RawSeverityCode::from_int(code);
            rec.label = mapping(rec.severity);

            for (std::size_t i = 0; i < kFieldCount; ++i) rec.values[i] = detail::parse_cell(kFields[i], row[cols[i]]);
            records.push_back(std::move(rec));
        } catch (const Error& e) {
            result.errors.push_back({line, e.code(), e.what()});
        }
    }
    result.dataset = Dataset(std::move(records));
    return result;
}

/// Writes records using the default column names; parse_records reads it back unchanged.
inline void serialize_records(std::ostream& out, const Dataset& ds) {
    std::vector<std::string> row;
    row.emplace_back(kRecordIdColumn);
    for (const auto& f : kFields) row.emplace_back(f.column);
    row.emplace_back(kSeverityColumn);
    csv::write_row(out, row);
    for (const auto& rec : ds.records()) {
        row.clear();
        row.push_back(rec.record_id);
        for (const auto& v : rec.values) row.push_back(v.str());
        row.push_back(std::to_string(rec.severity.value()));
        csv::write_row(out, row);
    }
}

/// Draws n_per_class records of each class. Each class is shuffled with its own
/// stream of the seeded generator; output is grouped in class order.
inline Dataset stratified_sample(const Dataset& ds, std::size_t n_per_class, std::uint64_t seed) {
    std::vector<CrashRecord> out;
    out.reserve(n_per_class * kAllClasses.size());
    for (auto c : kAllClasses) {
        if (ds.count(c) < n_per_class)
            throw Error(ErrorCode::InsufficientClassPopulation,
                        std::string(to_string(c)) + " has " + std::to_string(ds.count(c)) + " records, need " +
                            std::to_string(n_per_class));
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.records()[i].label == c) idx.push_back(i);
        DeterministicRng rng(seed, index_of(c));
        rng.shuffle(std::span(idx));
        for (std::size_t k = 0; k < n_per_class; ++k) out.push_back(ds.records()[idx[k]]);
    }
    return Dataset(std::move(out));
}

} // namespace crashsev
