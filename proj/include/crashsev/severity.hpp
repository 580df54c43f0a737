#pragma once

#include "crashsev/error.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace crashsev {

/// Three-way outcome taxonomy used for inference and scoring.
enum class SeverityClass : std::uint8_t { Fatal = 0, SeriousInjury = 1, MinorOrNonInjury = 2 };

inline constexpr std::array<SeverityClass, 3> kAllClasses = {
    SeverityClass::Fatal, SeverityClass::SeriousInjury, SeverityClass::MinorOrNonInjury};

constexpr std::size_t index_of(SeverityClass c) { return static_cast<std::size_t>(c); }

constexpr std::string_view to_string(SeverityClass c) {
    switch (c) {
    case SeverityClass::Fatal: return "Fatal";
    case SeverityClass::SeriousInjury: return "SeriousInjury";
    case SeverityClass::MinorOrNonInjury: return "MinorOrNonInjury";
    }
    return "?";
}

inline std::optional<SeverityClass> parse_severity_class(std::string_view name) {
    for (auto c : kAllClasses)
        if (to_string(c) == name) return c;
    return std::nullopt;
}

/// Code on the four-point ordinal scale of the source data.
class RawSeverityCode {
public:
    static RawSeverityCode from_int(long long code) {
        if (code < 1 || code > 4)
            throw Error(ErrorCode::UnknownSeverityCode, "severity code " + std::to_string(code) + " not in {1,2,3,4}");
        return RawSeverityCode(static_cast<int>(code));
    }

    int value() const noexcept { return code_; }
    friend bool operator==(RawSeverityCode, RawSeverityCode) = default;

private:
    explicit RawSeverityCode(int code) : code_(code) {}
    int code_;
};

/// Raw code -> merged class. Overridable because the numeric direction of the
/// ordinal scale differs between exports. The default follows the CrashStats
/// export: 1 fatal, 2 serious injury, 3 other (minor) injury, 4 non-injury.
class SeverityMapping {
public:
    SeverityMapping()
        : table_{SeverityClass::Fatal, SeverityClass::SeriousInjury, SeverityClass::MinorOrNonInjury,
                 SeverityClass::MinorOrNonInjury} {}

    explicit SeverityMapping(std::array<SeverityClass, 4> table) : table_(table) { validate(); }

    /// Accepts {"1": "Fatal", "2": "SeriousInjury", ...}; all four codes required.
    static SeverityMapping from_json(const nlohmann::json& j) {
        std::array<SeverityClass, 4> table{};
        for (int code = 1; code <= 4; ++code) {
            auto key = std::to_string(code);
            if (!j.is_object() || !j.contains(key) || !j[key].is_string())
                throw Error(ErrorCode::InvalidConfig, "severity mapping lacks code " + key);
            auto c = parse_severity_class(j[key].get<std::string>());
            if (!c) throw Error(ErrorCode::InvalidConfig, "unknown class name for code " + key);
            table[code - 1] = *c;
        }
        return SeverityMapping(table);
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (int code = 1; code <= 4; ++code) j[std::to_string(code)] = std::string(to_string(table_[code - 1]));
        return j;
    }

    SeverityClass operator()(RawSeverityCode code) const { return table_[code.value() - 1]; }

    /// Smallest raw code mapping to c; used when writing records back out.
    RawSeverityCode representative(SeverityClass c) const {
        for (int code = 1; code <= 4; ++code)
            if (table_[code - 1] == c) return RawSeverityCode::from_int(code);
        throw Error(ErrorCode::InvalidConfig, "mapping is not onto " + std::string(to_string(c)));
    }

private:
    void validate() const {
        for (auto c : kAllClasses) {
            bool hit = false;
            for (auto t : table_) hit = hit || t == c;
            if (!hit) throw Error(ErrorCode::InvalidConfig, "severity mapping is not onto " + std::string(to_string(c)));
        }
    }

    std::array<SeverityClass, 4> table_;
};

inline SeverityClass merge_severity(RawSeverityCode code, const SeverityMapping& mapping = {}) {
    return mapping(code);
}

} // namespace crashsev
