#pragma once

#include "crashsev/embedded_assets.hpp"
#include "crashsev/label_extraction.hpp"
#include "crashsev/severity.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace crashsev {

namespace detail {

inline bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline std::string clean_token(std::string_view raw) {
    std::string kept;
    for (char ch : raw) {
        auto u = static_cast<unsigned char>(ch);
        if (is_word_byte(u)) kept.push_back(static_cast<char>(std::tolower(u)));
        else if (ch == '-' || ch == '/' || ch == '.' || ch == ',') kept.push_back(ch);
    }
    auto is_joiner = [](char c) { return c == '-' || c == '/' || c == '.' || c == ','; };
    std::size_t b = 0, e = kept.size();
    while (b < e && is_joiner(kept[b])) ++b;
    while (e > b && is_joiner(kept[e - 1])) --e;

    std::string out;
    for (std::size_t i = b; i < e; ++i) {
        char c = kept[i];
        // decimal points and digit grouping survive only between digits
        if ((c == '.' || c == ',') && !(is_digit(kept[i - 1]) && is_digit(kept[i + 1]))) continue;
        out.push_back(c);
    }
    return out;
}

} // namespace detail

/// Lowercase, split on whitespace, strip punctuation. Hyphens and slashes
/// inside a token survive ("rear-end", "km/hr").
inline std::vector<std::string> normalize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (start == i) break;
        auto tok = detail::clean_token(text.substr(start, i - start));
        if (!tok.empty()) tokens.push_back(std::move(tok));
    }
    return tokens;
}

class StopwordList {
public:
    StopwordList() = default;

    /// One word per line; blank lines and lines starting with '#' are skipped.
    static StopwordList parse(std::string_view text) {
        StopwordList list;
        std::istringstream in{std::string(text)};
        for (std::string line; std::getline(in, line);) {
            if (line.empty() || line.starts_with('#')) continue;
            for (auto& tok : normalize(line)) list.words_.insert(std::move(tok));
        }
        return list;
    }

    bool contains(const std::string& token) const { return words_.count(token) != 0; }
    std::size_t size() const noexcept { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

inline const StopwordList& default_stopwords() {
    static const StopwordList list = StopwordList::parse(assets::stopwords);
    return list;
}

struct TermFrequencyTable {
    SeverityClass cls = SeverityClass::MinorOrNonInjury;
    std::map<std::string, std::uint64_t> unigrams;
    std::map<std::string, std::uint64_t> bigrams; // "first second"
    std::uint64_t total_responses = 0;

    std::map<std::string, std::uint64_t> entries() const {
        auto all = unigrams;
        for (const auto& [term, n] : bigrams) all[term] += n;
        return all;
    }

    std::uint64_t unigram_total() const {
        std::uint64_t n = 0;
        for (const auto& [_, c] : unigrams) n += c;
        return n;
    }

    bool empty() const noexcept { return unigrams.empty() && bigrams.empty(); }

    friend bool operator==(const TermFrequencyTable&, const TermFrequencyTable&) = default;
};

struct ScoredResponse {
    std::string text;
    SeverityClass truth = SeverityClass::MinorOrNonInjury;
    PredictedLabel predicted;
};

using TermTables = std::array<TermFrequencyTable, 3>;

/// Counts only correctly classified responses. Unigrams skip stopwords;
/// bigrams join neighbouring tokens when neither is a stopword.
inline TermTables term_frequencies(const std::vector<ScoredResponse>& responses,
                                   const StopwordList& stopwords = default_stopwords()) {
    TermTables tables;
    for (auto c : kAllClasses) tables[index_of(c)].cls = c;
    for (const auto& r : responses) {
        if (r.predicted.label != r.truth) continue;
        auto& t = tables[index_of(r.truth)];
        ++t.total_responses;
        const auto tokens = normalize(r.text);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (stopwords.contains(tokens[i])) continue;
            ++t.unigrams[tokens[i]];
            if (i + 1 < tokens.size() && !stopwords.contains(tokens[i + 1]))
                ++t.bigrams[tokens[i] + ' ' + tokens[i + 1]];
        }
    }
    return tables;
}

/// Top-k rows as TSV with a term/count header; ties sort lexicographically.
inline std::string emit_table(const TermFrequencyTable& t, std::size_t k) {
    auto all = t.entries();
    std::vector<std::pair<std::string, std::uint64_t>> rows(all.begin(), all.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (rows.size() > k) rows.resize(k);
    std::string out = "term\tcount\n";
    for (const auto& [term, n] : rows) out += term + '\t' + std::to_string(n) + '\n';
    return out;
}

} // namespace crashsev
