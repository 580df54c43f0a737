#pragma once

#include "crashsev/embedded_assets.hpp"
#include "crashsev/narrative.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace crashsev {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json_file(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
    }
}

/// Canonical narrative template, name "default", version "1".
inline const NarrativeTemplate& default_template() {
    static const NarrativeTemplate tpl = parse_template(assets::default_template);
    return tpl;
}

inline const DisplayMappings& default_display_mappings() {
    static const DisplayMappings m = DisplayMappings::from_json(nlohmann::json::parse(assets::display_mappings));
    return m;
}

inline std::vector<KnowledgeFact> default_knowledge_facts() {
    return knowledge_facts_from_json(nlohmann::json::parse(assets::knowledge_facts));
}

} // namespace crashsev
