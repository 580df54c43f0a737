#pragma once

#include "crashsev.hpp"

#include <filesystem>
#include <fstream>
#include <string>

namespace crashsev::testing {

inline std::filesystem::path fixture_dir() { return CRASHSEV_TEST_FIXTURE_DIR; }
inline std::filesystem::path golden_dir() { return CRASHSEV_TEST_GOLDEN_DIR; }

inline Dataset load_fixture(const std::string& name) {
    std::ifstream in(fixture_dir() / name);
    return parse_records(in).checked();
}

/// Fully specified record used for golden narratives and prompts.
inline CrashRecord record_f1() { return load_fixture("f1.csv").records().front(); }

/// One exemplar per class; none shares an id with F1.
inline Dataset exemplar_pool() { return load_fixture("exemplars.csv"); }

inline std::vector<Exemplar> f1_exemplars() {
    return select_exemplars(exemplar_pool(), 0, {"F1"});
}

inline std::string render_prompt(const ChatPrompt& p) {
    std::string out;
    for (const auto& m : p.messages) {
        out += "[";
        out += to_string(m.role);
        out += "]\n";
        out += m.content;
        out += "\n";
    }
    return out;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::path(CRASHSEV_TEST_SCRATCH_DIR) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace crashsev::testing
