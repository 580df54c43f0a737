#pragma once

#include "crashsev/crash_data.hpp"
#include "crashsev/error.hpp"

#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace crashsev {

/*
 * Template text format
 *
 *   @name <name>            header lines, only before the body
 *   @version <version>
 *   # comment               whole-line comments
 *   {field}                 replaced by the field's display value
 *   [? field: ...]          body rendered only when field is not Unknown
 *   \{ \} \[ \] \\          literal brackets and backslash
 *
 * Conditionals may contain one nested conditional. Line breaks and runs of
 * whitespace collapse to a single space in the rendered narrative.
 */
struct TemplateSegment {
    enum class Kind { Literal, Placeholder, Conditional };
    Kind kind = Kind::Literal;
    std::string text;          // Literal
    std::size_t field = 0;     // Placeholder / Conditional key
    std::vector<TemplateSegment> body; // Conditional
};

struct NarrativeTemplate {
    std::string name;
    std::string version;
    std::vector<TemplateSegment> segments;

    /// Number of {field} placeholders, nested ones included.
    std::size_t placeholder_count() const {
        std::function<std::size_t(const std::vector<TemplateSegment>&)> walk = [&](const auto& segs) {
            std::size_t n = 0;
            for (const auto& s : segs) {
                if (s.kind == TemplateSegment::Kind::Placeholder) ++n;
                if (s.kind == TemplateSegment::Kind::Conditional) n += walk(s.body);
            }
            return n;
        };
        return walk(segments);
    }

    /// Distinct field indices referenced by placeholders.
    std::vector<std::size_t> referenced_fields() const {
        std::vector<bool> seen(kFieldCount, false);
        std::function<void(const std::vector<TemplateSegment>&)> walk = [&](const auto& segs) {
            for (const auto& s : segs) {
                if (s.kind == TemplateSegment::Kind::Placeholder) seen[s.field] = true;
                if (s.kind == TemplateSegment::Kind::Conditional) walk(s.body);
            }
        };
        walk(segments);
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < kFieldCount; ++i)
            if (seen[i]) out.push_back(i);
        return out;
    }
};

struct Narrative {
    std::string text;
    std::string source_record_id;
    std::string template_name;

    friend bool operator==(const Narrative&, const Narrative&) = default;
};

namespace detail {

class TemplateParser {
public:
    explicit TemplateParser(std::string_view body) : src_(body) {}

    std::vector<TemplateSegment> parse() {
        auto segs = parse_sequence(0);
        if (pos_ != src_.size()) fail("unbalanced ']'");
        return segs;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::TemplateSyntax, what + " at offset " + std::to_string(pos_));
    }

    std::size_t resolve(std::string_view name) const {
        auto trimmed = trim(name);
        auto idx = field_index(trimmed);
        if (!idx) throw Error(ErrorCode::UnresolvedPlaceholder, "template references unknown field '" + std::string(trimmed) + "'");
        return *idx;
    }

    std::vector<TemplateSegment> parse_sequence(int depth) {
        std::vector<TemplateSegment> out;
        std::string literal;
        auto flush = [&] {
            if (!literal.empty()) out.push_back({TemplateSegment::Kind::Literal, std::move(literal), 0, {}});
            literal.clear();
        };
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\\') {
                if (pos_ + 1 >= src_.size()) fail("dangling escape");
                literal.push_back(src_[pos_ + 1]);
                pos_ += 2;
            } else if (c == '{') {
                auto close = src_.find('}', pos_);
                if (close == std::string_view::npos) fail("unterminated placeholder");
                flush();
                out.push_back({TemplateSegment::Kind::Placeholder, {}, resolve(src_.substr(pos_ + 1, close - pos_ - 1)), {}});
                pos_ = close + 1;
            } else if (c == '[' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '?') {
                if (depth >= 2) fail("conditional blocks nest at most one level");
                auto colon = src_.find(':', pos_);
                if (colon == std::string_view::npos) fail("conditional without ':'");
                flush();
                TemplateSegment cond{TemplateSegment::Kind::Conditional, {}, resolve(src_.substr(pos_ + 2, colon - pos_ - 2)), {}};
                pos_ = colon + 1;
                cond.body = parse_sequence(depth + 1);
                if (pos_ >= src_.size() || src_[pos_] != ']') fail("unterminated conditional");
                ++pos_;
                out.push_back(std::move(cond));
            } else if (c == ']') {
                if (depth == 0) fail("unbalanced ']'");
                break;
            } else if (c == '}') {
                fail("unbalanced '}'");
            } else {
                literal.push_back(c);
                ++pos_;
            }
        }
        flush();
        return out;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            // no space before closing punctuation left behind by omitted blocks
            if (c != '.' && c != ',' && c != ';' && c != ')') out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

} // namespace detail

inline NarrativeTemplate parse_template(std::string_view text) {
    NarrativeTemplate tpl;
    std::string body;
    bool in_header = true;
    std::istringstream lines{std::string(text)};
    for (std::string line; std::getline(lines, line);) {
        auto t = trim(line);
        if (t.starts_with('#')) continue;
        if (in_header && t.starts_with('@')) {
            auto sp = t.find(' ');
            auto key = t.substr(1, sp == std::string_view::npos ? t.size() : sp - 1);
            auto value = sp == std::string_view::npos ? std::string_view{} : trim(t.substr(sp));
            if (key == "name") tpl.name = value;
            else if (key == "version") tpl.version = value;
            else throw Error(ErrorCode::TemplateSyntax, "unknown header @" + std::string(key));
            continue;
        }
        if (!t.empty()) in_header = false;
        body += line;
        body += '\n';
    }
    tpl.segments = detail::TemplateParser(body).parse();
    return tpl;
}

/// Per-field value -> phrase tables, e.g. road surface codes to words.
class DisplayMappings {
public:
    DisplayMappings() = default;

    /// {"field": {"raw value": "display phrase", ...}, ...}
    static DisplayMappings from_json(const nlohmann::json& j) {
        DisplayMappings m;
        if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "display mappings must be a JSON object");
        for (const auto& [field, table] : j.items()) {
            if (field.starts_with('_')) continue;
            auto idx = field_index(field);
            if (!idx) throw Error(ErrorCode::InvalidConfig, "display mapping for unknown field " + field);
            for (const auto& [raw, shown] : table.items()) m.tables_[*idx][raw] = shown.get<std::string>();
        }
        return m;
    }

    /// Display text, or nullopt when the value is (or maps to) Unknown.
    std::optional<std::string> display(std::size_t field, const FieldValue& v) const {
        if (v.is_unknown()) return std::nullopt;
        auto raw = v.str();
        if (auto t = tables_.find(field); t != tables_.end()) {
            if (auto it = t->second.find(raw); it != t->second.end()) {
                if (it->second == kUnknown) return std::nullopt;
                return it->second;
            }
        }
        return raw;
    }

private:
    std::map<std::size_t, std::map<std::string, std::string>> tables_;
};

inline Narrative render_narrative(const CrashRecord& record, const NarrativeTemplate& tpl,
                                  const DisplayMappings& mappings = {}) {
    std::string raw;
    std::function<void(const std::vector<TemplateSegment>&)> emit = [&](const auto& segs) {
        for (const auto& s : segs) {
            switch (s.kind) {
            case TemplateSegment::Kind::Literal: raw += s.text; break;
            case TemplateSegment::Kind::Placeholder:
                raw += mappings.display(s.field, record.values[s.field]).value_or(std::string(kUnknown));
                break;
            case TemplateSegment::Kind::Conditional:
                if (mappings.display(s.field, record.values[s.field])) emit(s.body);
                break;
            }
        }
    };
    emit(tpl.segments);
    return {detail::collapse_whitespace(raw), record.record_id, tpl.name};
}

/// A domain statement appended to narratives of records it applies to.
struct KnowledgeFact {
    std::string text;
    std::function<bool(const CrashRecord&)> applies = [](const CrashRecord&) { return true; };

    /// {"text": "...", "when": {"field": ["value", ...]}, "unless": {...}}
    /// Every "when" field must hold one of its listed values and no "unless"
    /// field may; comparison is case-insensitive on the raw cell text.
    static KnowledgeFact from_json(const nlohmann::json& j) {
        KnowledgeFact fact;
        fact.text = j.at("text").get<std::string>();
        auto read = [](const nlohmann::json& obj) {
            std::vector<std::pair<std::size_t, std::vector<std::string>>> conds;
            for (const auto& [field, values] : obj.items()) {
                auto idx = field_index(field);
                if (!idx) throw Error(ErrorCode::InvalidConfig, "knowledge fact references unknown field " + field);
                std::vector<std::string> lowered;
                for (const auto& v : values) lowered.push_back(to_lower(v.get<std::string>()));
                conds.emplace_back(*idx, std::move(lowered));
            }
            return conds;
        };
        auto when = read(j.value("when", nlohmann::json::object()));
        auto unless = read(j.value("unless", nlohmann::json::object()));
        fact.applies = [when, unless](const CrashRecord& r) {
            auto holds = [&](const auto& cond) {
                auto cell = to_lower(r.values[cond.first].str());
                return std::find(cond.second.begin(), cond.second.end(), cell) != cond.second.end();
            };
            return std::all_of(when.begin(), when.end(), holds) && std::none_of(unless.begin(), unless.end(), holds);
        };
        return fact;
    }
};

inline std::vector<KnowledgeFact> knowledge_facts_from_json(const nlohmann::json& j) {
    std::vector<KnowledgeFact> facts;
    for (const auto& item : j) facts.push_back(KnowledgeFact::from_json(item));
    return facts;
}

inline Narrative augment_with_knowledge(Narrative n, const std::vector<KnowledgeFact>& facts, const CrashRecord& record) {
    for (const auto& fact : facts) {
        if (!fact.applies(record)) continue;
        if (!n.text.empty()) n.text += ' ';
        n.text += fact.text;
    }
    return n;
}

} // namespace crashsev
