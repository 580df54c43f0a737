#pragma once

#include "crashsev/assets.hpp"
#include "crashsev/crash_data.hpp"
#include "crashsev/narrative.hpp"
#include "crashsev/rng.hpp"
#include "crashsev/severity.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace crashsev {

enum class ShotMode : std::uint8_t { Zero, Few };

/// One cell of the experiment matrix.
struct PromptStrategy {
    ShotMode shot = ShotMode::Zero;
    bool pe = false;
    bool cot = false;

    /// Few-shot with reasoning sits outside the default six settings.
    bool extended() const noexcept { return shot == ShotMode::Few && cot; }

    std::string name() const {
        std::string n = shot == ShotMode::Zero ? "ZS" : "FS";
        if (pe) n += "_PE";
        if (cot) n += "_CoT";
        return n;
    }

    friend bool operator==(const PromptStrategy&, const PromptStrategy&) = default;
    friend auto operator<=>(const PromptStrategy&, const PromptStrategy&) = default;
};

inline const std::array<PromptStrategy, 6> kBaseStrategies = {{
    {ShotMode::Zero, false, false},
    {ShotMode::Zero, false, true},
    {ShotMode::Zero, true, false},
    {ShotMode::Zero, true, true},
    {ShotMode::Few, false, false},
    {ShotMode::Few, true, false},
}};

inline const std::array<PromptStrategy, 2> kExtendedStrategies = {{
    {ShotMode::Few, false, true},
    {ShotMode::Few, true, true},
}};

inline PromptStrategy parse_strategy(std::string_view name) {
    for (const auto& s : kBaseStrategies)
        if (s.name() == name) return s;
    for (const auto& s : kExtendedStrategies)
        if (s.name() == name) return s;
    throw Error(ErrorCode::UnknownStrategy, "unknown strategy '" + std::string(name) + "'");
}

struct LabelSet {
    std::string fatal_display;
    std::string serious_display;
    std::string minor_display;

    const std::string& display(SeverityClass c) const {
        switch (c) {
        case SeverityClass::Fatal: return fatal_display;
        case SeverityClass::SeriousInjury: return serious_display;
        case SeverityClass::MinorOrNonInjury: return minor_display;
        }
        return minor_display;
    }
};

inline constexpr std::string_view kFatalLabel = "Fatal accident";
inline constexpr std::string_view kSoftFatalLabel = "Serious accident with potentially fatal outcomes";
inline constexpr std::string_view kSeriousLabel = "Serious injury accident";
inline constexpr std::string_view kMinorLabel = "Minor or non-injury accident";

/// pe swaps the fatal label for its softened wording; the others never change.
inline LabelSet label_set(bool pe) {
    return {std::string(pe ? kSoftFatalLabel : kFatalLabel), std::string(kSeriousLabel), std::string(kMinorLabel)};
}

/// Named clause texts loaded from a "== name ==" sectioned asset.
class PromptClauses {
public:
    static PromptClauses parse(std::string_view text, std::string version) {
        PromptClauses pc;
        pc.version_ = std::move(version);
        std::istringstream in{std::string(text)};
        std::string current;
        std::string body;
        auto flush = [&] {
            if (current.empty()) return;
            while (!body.empty() && body.back() == '\n') body.pop_back();
            pc.sections_[current] = body;
            body.clear();
        };
        for (std::string line; std::getline(in, line);) {
            if (current.empty() && line.starts_with('#')) continue;
            if (line.starts_with("== ") && line.ends_with(" ==")) {
                flush();
                current = line.substr(3, line.size() - 6);
                continue;
            }
            if (!current.empty()) body += line + '\n';
        }
        flush();
        for (auto required : {"persona", "categories", "output_only", "cot", "zero_shot_user", "few_shot_intro",
                              "few_shot_example", "few_shot_query"})
            if (!pc.sections_.count(required))
                throw Error(ErrorCode::InvalidConfig, std::string("prompt clauses lack section ") + required);
        return pc;
    }

    const std::string& operator[](const std::string& name) const { return sections_.at(name); }
    const std::string& version() const noexcept { return version_; }

private:
    std::map<std::string, std::string> sections_;
    std::string version_;
};

inline const PromptClauses& default_prompt_clauses() {
    static const PromptClauses pc = PromptClauses::parse(assets::prompt_clauses_v1, "1");
    return pc;
}

/// Single-pass {key} substitution; substituted text is not rescanned.
inline std::string fill(std::string_view tpl, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] == '{') {
            auto close = tpl.find('}', i);
            if (close != std::string_view::npos) {
                auto it = values.find(std::string(tpl.substr(i + 1, close - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tpl[i++]);
    }
    return out;
}

inline std::string build_system_prompt(const PromptStrategy& strategy,
                                       const PromptClauses& clauses = default_prompt_clauses()) {
    const auto labels = label_set(strategy.pe);
    std::map<std::string, std::string> vars{
        {"fatal", labels.fatal_display}, {"serious", labels.serious_display}, {"minor", labels.minor_display}};
    std::string out = fill(clauses["persona"], vars);
    out += "\n\n";
    out += fill(clauses["categories"], vars);
    out += "\n\n";
    out += fill(clauses[strategy.cot ? "cot" : "output_only"], vars);
    return out;
}

enum class Role : std::uint8_t { System, User };

constexpr std::string_view to_string(Role r) { return r == Role::System ? "system" : "user"; }

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatPrompt {
    std::vector<ChatMessage> messages;
    PromptStrategy strategy;
    std::string subject_record_id;
};

struct Exemplar {
    Narrative narrative;
    SeverityClass label = SeverityClass::MinorOrNonInjury;
};

/// Exemplars are always shown least to most severe.
inline constexpr std::array<SeverityClass, 3> kExemplarOrder = {
    SeverityClass::MinorOrNonInjury, SeverityClass::SeriousInjury, SeverityClass::Fatal};

inline ChatPrompt assemble(const PromptStrategy& strategy, const Narrative& subject,
                           const std::vector<Exemplar>& exemplars,
                           const PromptClauses& clauses = default_prompt_clauses()) {
    ChatPrompt prompt{{}, strategy, subject.source_record_id};
    prompt.messages.push_back({Role::System, build_system_prompt(strategy, clauses)});

    if (strategy.shot == ShotMode::Zero) {
        if (!exemplars.empty())
            throw Error(ErrorCode::ExemplarCardinality, "zero-shot prompts take no exemplars");
        prompt.messages.push_back({Role::User, fill(clauses["zero_shot_user"], {{"narrative", subject.text}})});
        return prompt;
    }

    if (exemplars.size() != 3)
        throw Error(ErrorCode::ExemplarCardinality, "few-shot needs 3 exemplars, got " + std::to_string(exemplars.size()));
    std::array<const Exemplar*, 3> by_class{};
    for (const auto& ex : exemplars) {
        auto& slot = by_class[index_of(ex.label)];
        if (slot) throw Error(ErrorCode::ExemplarCardinality, "duplicate exemplar class " + std::string(to_string(ex.label)));
        if (ex.narrative.source_record_id == subject.source_record_id)
            throw Error(ErrorCode::ExemplarOverlap, "exemplar " + ex.narrative.source_record_id + " is the subject");
        slot = &ex;
    }

    const auto labels = label_set(strategy.pe);
    std::string user = clauses["few_shot_intro"];
    int index = 1;
    for (auto c : kExemplarOrder) {
        const auto* ex = by_class[index_of(c)];
        user += "\n\n";
        user += fill(clauses["few_shot_example"], {{"index", std::to_string(index++)},
                                                   {"narrative", ex->narrative.text},
                                                   {"label", labels.display(c)}});
    }
    user += "\n\n";
    user += fill(clauses["few_shot_query"], {{"narrative", subject.text}});
    prompt.messages.push_back({Role::User, std::move(user)});
    return prompt;
}

/// One record per class, in exemplar display order, none of them in exclude.
inline std::vector<CrashRecord> select_exemplar_records(const Dataset& ds, std::uint64_t seed,
                                                        const std::set<std::string>& exclude) {
    std::vector<CrashRecord> picked;
    for (auto c : kExemplarOrder) {
        std::vector<const CrashRecord*> candidates;
        for (const auto& r : ds.records())
            if (r.label == c && !exclude.count(r.record_id)) candidates.push_back(&r);
        if (candidates.empty())
            throw Error(ErrorCode::InsufficientClassPopulation,
                        std::string(to_string(c)) + " has no record outside the excluded set");
        DeterministicRng rng(seed, 0x45584d50ULL + index_of(c));
        picked.push_back(*candidates[rng.below(candidates.size())]);
    }
    return picked;
}

inline std::vector<Exemplar> select_exemplars(const Dataset& ds, std::uint64_t seed,
                                              const std::set<std::string>& exclude,
                                              const NarrativeTemplate& tpl = default_template(),
                                              const DisplayMappings& mappings = default_display_mappings()) {
    std::vector<Exemplar> out;
    for (const auto& r : select_exemplar_records(ds, seed, exclude))
        out.push_back({render_narrative(r, tpl, mappings), r.label});
    return out;
}

} // namespace crashsev
