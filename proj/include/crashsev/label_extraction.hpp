#pragma once

#include "crashsev/error.hpp"
#include "crashsev/prompting.hpp"
#include "crashsev/severity.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crashsev {

struct TextSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

/// A class read out of a response, or Unresolved when no label was found.
struct PredictedLabel {
    std::optional<SeverityClass> label;
    std::optional<TextSpan> matched_span;

    bool resolved() const noexcept { return label.has_value(); }
    static PredictedLabel unresolved() { return {}; }

    friend bool operator==(const PredictedLabel&, const PredictedLabel&) = default;
};

inline constexpr std::string_view kUnresolvedName = "Unresolved";

inline std::string to_string(const PredictedLabel& p) {
    return p.label ? std::string(to_string(*p.label)) : std::string(kUnresolvedName);
}

/// Lowercased text with whitespace runs collapsed, plus the original offset
/// of every folded byte.
struct FoldedText {
    std::string text;
    std::vector<std::size_t> origin;
};

inline FoldedText fold_text(std::string_view s) {
    FoldedText f;
    f.text.reserve(s.size());
    f.origin.reserve(s.size() + 1);
    bool in_space = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto u = static_cast<unsigned char>(s[i]);
        if (std::isspace(u)) {
            if (!in_space) {
                f.text.push_back(' ');
                f.origin.push_back(i);
            }
            in_space = true;
            continue;
        }
        in_space = false;
        f.text.push_back(static_cast<char>(std::tolower(u)));
        f.origin.push_back(i);
    }
    f.origin.push_back(s.size());
    return f;
}

namespace detail {

struct FoldedLabel {
    std::string text;
    SeverityClass cls;
};

/// Labels of label_set(pe), folded, longest first.
inline std::vector<FoldedLabel> folded_labels(bool pe) {
    auto labels = label_set(pe);
    std::vector<FoldedLabel> out;
    for (auto c : kAllClasses) out.push_back({fold_text(labels.display(c)).text, c});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.text.size() > b.text.size(); });
    return out;
}

inline bool starts_word(std::string_view folded, std::size_t i) {
    if (i == 0) return true;
    auto prev = static_cast<unsigned char>(folded[i - 1]);
    return !std::isalnum(prev) && prev != '-';
}

} // namespace detail

/// Scans left to right taking the longest label at each position; the last
/// match wins because reasoning responses state their verdict at the end.
inline PredictedLabel extract_label(std::string_view response_text, bool pe) {
    const auto folded = fold_text(response_text);
    const auto labels = detail::folded_labels(pe);
    std::string_view hay = folded.text;

    PredictedLabel last;
    std::size_t i = 0;
    while (i < hay.size()) {
        bool matched = false;
        if (detail::starts_word(hay, i)) {
            for (const auto& l : labels) {
                if (hay.compare(i, l.text.size(), l.text) == 0) {
                    const auto end = i + l.text.size();
                    last.label = l.cls;
                    last.matched_span = TextSpan{folded.origin[i], folded.origin[end - 1] + 1};
                    i = end;
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) ++i;
    }
    return last;
}

/// Inverse of the label_set display mapping.
inline SeverityClass canonicalize(std::string_view display_label, bool pe) {
    auto folded = fold_text(trim(display_label)).text;
    for (const auto& l : detail::folded_labels(pe))
        if (l.text == folded) return l.cls;
    throw Error(ErrorCode::UnknownLabel, "'" + std::string(display_label) + "' is not a label when pe=" + (pe ? "true" : "false"));
}

} // namespace crashsev
