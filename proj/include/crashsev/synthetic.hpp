#pragma once

#include "crashsev/crash_data.hpp"
#include "crashsev/rng.hpp"

#include <array>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace crashsev {

// Schema-compatible stand-in for the CrashStats export. Category vocabularies
// follow the public data dictionary; values are random, with a mild tilt so
// that more severe classes see higher speeds and less restraint use.

namespace detail {

using Pool = std::vector<std::string_view>;

// clang-format off
inline const std::array<Pool, kFieldCount>& category_pools() {
    static const std::array<Pool, kFieldCount> pools = [] {
        std::array<Pool, kFieldCount> p{};
        auto set = [&](std::string_view field, Pool values) { p[*field_index(field)] = std::move(values); };
        set("accident_type", {"Collision with vehicle", "Struck pedestrian", "Collision with a fixed object",
                              "No collision and no object struck", "Vehicle overturned (no collision)",
                              "Collision with some other object", "Struck animal"});
        set("event_type", {"Collision", "Struck pedestrian", "Vehicle overturned", "Struck fixed object", "Struck animal"});
        set("vehicle_1_coll_pt", {"Front", "Rear", "Left side", "Right side", "Front left", "Front right", "Rear left", "Rear right"});
        set("vehicle_2_coll_pt", {"Front", "Rear", "Left side", "Right side", "Not applicable"});
        set("object_type", {"Not applicable", "Tree", "Pole", "Fence", "Guard rail", "Sign post", "Animal"});
        set("dca", {"Cross traffic", "Rear end", "Head on", "Right through", "Off carriageway on straight",
                    "Pedestrian near side", "Off carriageway on right bend into object"});
        set("time_period", {"early morning", "morning", "afternoon", "evening", "night"});
        set("day_of_week", {"Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"});
        set("lga_name", {"Melbourne", "Casey", "Greater Geelong", "Ballarat", "Greater Bendigo", "Wyndham", "Hume",
                         "Mildura", "Greater Shepparton", "Latrobe"});
        set("region_name", {"Metropolitan North West Region", "Metropolitan South East Region", "Eastern Region",
                            "Northern Region", "South Western Region", "Western Region"});
        set("deg_urban_name", {"Melbourne CBD", "metropolitan Melbourne", "a large provincial city", "a small town",
                               "rural Victoria"});
        set("driver_sex", {"M", "F"});
        set("age_group", {"16-17", "18-21", "22-25", "26-29", "30-39", "40-49", "50-59", "60-64", "65-69", "70+"});
        set("road_user_type", {"Drivers", "Motorcyclists", "Bicyclists"});
        set("helmet_belt_worn", {"Seatbelt worn", "Helmet worn", "Not appropriate", "Seatbelt not worn", "Helmet not worn"});
        set("vehicle_type", {"Car", "Station Wagon", "Utility", "Panel Van", "Motor Cycle", "Light Commercial Vehicle",
                             "Heavy Vehicle (Rigid)"});
        set("fuel_type", {"Petrol", "Diesel", "Electric", "Gas", "Multi"});
        set("vehicle_body_style", {"Sedan", "Hatchback", "Wagon", "Utility", "Van", "Tray", "Solo"});
        set("trailer_type", {"No trailer", "Caravan", "Box trailer", "Boat trailer"});
        set("lamps", {"On", "Off", "Not applicable"});
        set("vehicle_movement", {"going straight ahead", "turning right", "turning left", "stopped", "overtaking",
                                 "reversing", "out of control"});
        set("road_type", {"Road", "Street", "Highway", "Freeway", "Avenue", "Drive"});
        set("road_geometry", {"Not at intersection", "T intersection", "Cross intersection", "Multiple intersection",
                              "Dead end"});
        set("speed_zone", {"40 km/hr", "50 km/hr", "60 km/hr", "70 km/hr", "80 km/hr", "100 km/hr", "110 km/hr"});
        set("road_surface_type", {"1", "2", "3"});
        set("road_type_int", {"Road", "Street", "Avenue", "Not applicable"});
        set("complex_int_no", {"0", "1"});
        set("light_condition", {"Day", "Dusk/Dawn", "Dark street lights on", "Dark no street lights", "Dark street lights off"});
        set("surface_cond", {"Dry", "Wet", "Muddy", "Icy"});
        set("atmosph_cond", {"Clear", "Raining", "Fog", "Smoke", "Strong winds"});
        set("traffic_control", {"No control", "Stop-go lights", "Giveway sign", "Stop sign", "Roundabout",
                                "Pedestrian crossing"});
        set("sub_dca", {"Vehicle speed excessive", "Driver fatigued", "Alcohol involved", "Failed to give way",
                        "Loss of control", "Distracted driver"});
        set("driver_intent", {"going straight ahead", "turning right", "turning left", "changing lanes", "parking",
                              "overtaking"});
        return p;
    }();
    return pools;
}
// clang-format on

} // namespace detail

struct SyntheticOptions {
    double unknown_rate = 0.04; // share of cells left Unknown
};

/// n_per_class records of each class with ids "SYN-000001"..., written in
/// class order Fatal, SeriousInjury, MinorOrNonInjury under the default mapping.
inline Dataset generate_synthetic(std::size_t n_per_class, std::uint64_t seed, SyntheticOptions opt = {}) {
    const auto& pools = detail::category_pools();
    const SeverityMapping mapping;
    DeterministicRng rng(seed, 0x53594e);
    auto chance = [&](double p) { return static_cast<double>(rng.below(1'000'000)) < p * 1'000'000.0; };
    auto between = [&](long long lo, long long hi) { return lo + static_cast<long long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); };

    std::vector<CrashRecord> records;
    std::size_t serial = 0;
    for (auto cls : kAllClasses) {
        const long long tilt = 2 - static_cast<long long>(index_of(cls)); // Fatal 2, Serious 1, Minor 0
        for (std::size_t k = 0; k < n_per_class; ++k) {
            CrashRecord rec;
            char id[32];
            std::snprintf(id, sizeof id, "SYN-%06zu", ++serial);
            rec.record_id = id;
            rec.severity = mapping.representative(cls);
            rec.label = cls;
            if (cls == SeverityClass::MinorOrNonInjury && chance(0.1)) rec.severity = RawSeverityCode::from_int(4);

            for (std::size_t f = 0; f < kFieldCount; ++f) {
                const auto& spec = kFields[f];
                if (chance(opt.unknown_rate)) continue;
                switch (spec.kind) {
                case FieldKind::Category: {
                    const auto& pool = pools[f];
                    std::size_t i = rng.below(pool.size());
                    if ((spec.name == "speed_zone" || spec.name == "helmet_belt_worn") && tilt > 0)
                        i = std::max<std::size_t>(i, std::min<std::size_t>(pool.size() - 1, rng.below(pool.size()) + tilt));
                    rec.values[f] = FieldValue::text(std::string(pool[i]));
                    break;
                }
                case FieldKind::Month: rec.values[f] = FieldValue::integer(between(1, 12)); break;
                case FieldKind::Count:
                    if (spec.name == "no_of_wheels") rec.values[f] = FieldValue::integer(chance(0.1) ? 2 : 4);
                    else if (spec.name == "seating_capacity") rec.values[f] = FieldValue::integer(between(1, 8));
                    else if (spec.name == "no_of_vehicles") rec.values[f] = FieldValue::integer(between(1, 4));
                    else if (spec.name == "no_persons") rec.values[f] = FieldValue::integer(between(1, 6));
                    else rec.values[f] = FieldValue::integer(between(spec.min, 5));
                    break;
                case FieldKind::Kilograms: rec.values[f] = FieldValue::real(static_cast<double>(between(18, 60) * 50)); break;
                case FieldKind::Years: rec.values[f] = FieldValue::integer(between(0, 25)); break;
                case FieldKind::Sequence: rec.values[f] = FieldValue::integer(chance(0.85) ? 1 : 2); break;
                }
            }
            records.push_back(std::move(rec));
        }
    }
    return Dataset(std::move(records));
}

} // namespace crashsev
