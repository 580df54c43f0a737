#pragma once

#include "crashsev/label_extraction.hpp"
#include "crashsev/prompting.hpp"
#include "crashsev/severity.hpp"

#include <array>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace crashsev {

/// Rows: true class. Columns: predicted class, then Unresolved.
class ConfusionMatrix {
public:
    static constexpr std::size_t kUnresolvedColumn = 3;

    void add(SeverityClass truth, const PredictedLabel& predicted) {
        ++counts_[index_of(truth)][predicted.label ? index_of(*predicted.label) : kUnresolvedColumn];
    }

    std::uint64_t at(SeverityClass truth, SeverityClass predicted) const {
        return counts_[index_of(truth)][index_of(predicted)];
    }
    std::uint64_t unresolved(SeverityClass truth) const { return counts_[index_of(truth)][kUnresolvedColumn]; }

    std::uint64_t row_total(SeverityClass truth) const {
        std::uint64_t n = 0;
        for (auto v : counts_[index_of(truth)]) n += v;
        return n;
    }
    std::uint64_t column_total(SeverityClass predicted) const {
        std::uint64_t n = 0;
        for (const auto& row : counts_) n += row[index_of(predicted)];
        return n;
    }
    std::uint64_t unresolved_total() const {
        std::uint64_t n = 0;
        for (const auto& row : counts_) n += row[kUnresolvedColumn];
        return n;
    }
    std::uint64_t total() const {
        std::uint64_t n = 0;
        for (auto c : kAllClasses) n += row_total(c);
        return n;
    }

    const std::array<std::array<std::uint64_t, 4>, 3>& cells() const noexcept { return counts_; }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::array<std::array<std::uint64_t, 4>, 3> counts_{};
};

using LabeledPair = std::pair<SeverityClass, PredictedLabel>;

inline ConfusionMatrix confusion(const std::vector<LabeledPair>& pairs) {
    ConfusionMatrix cm;
    for (const auto& [truth, predicted] : pairs) cm.add(truth, predicted);
    return cm;
}

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double accuracy = 0; // class-specific accuracy, same as recall
    bool precision_degenerate = false; // nothing predicted as this class
    bool recall_degenerate = false;    // no samples of this class

    friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

/// Unresolved answers count as false negatives of their true class and as
/// false positives of nothing. Zero denominators give 0 and set the flag.
inline ClassMetrics class_metrics(const ConfusionMatrix& cm, SeverityClass c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const auto predicted = cm.column_total(c);
    const auto actual = cm.row_total(c);

    ClassMetrics m;
    m.precision_degenerate = predicted == 0;
    m.recall_degenerate = actual == 0;
    m.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? tp / static_cast<double>(actual) : 0.0;
    m.accuracy = m.recall;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

struct EvaluationReport {
    std::array<ClassMetrics, 3> per_class{};
    double macro_accuracy = 0;
    double macro_f1 = 0;
    std::uint64_t unresolved_count = 0;
    std::uint64_t n = 0;
    PromptStrategy strategy;
    std::string model_id;
    ConfusionMatrix confusion;

    const ClassMetrics& of(SeverityClass c) const { return per_class[index_of(c)]; }

    friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

inline EvaluationReport report_from_confusion(const ConfusionMatrix& cm, const PromptStrategy& strategy,
                                              std::string model_id) {
    EvaluationReport r;
    r.confusion = cm;
    r.strategy = strategy;
    r.model_id = std::move(model_id);
    r.n = cm.total();
    r.unresolved_count = cm.unresolved_total();
    double acc = 0, f1 = 0;
    for (auto c : kAllClasses) {
        r.per_class[index_of(c)] = class_metrics(cm, c);
        acc += r.of(c).accuracy;
        f1 += r.of(c).f1;
    }
    r.macro_accuracy = acc / 3.0;
    r.macro_f1 = f1 / 3.0;
    return r;
}

inline EvaluationReport report(const std::vector<LabeledPair>& pairs, const PromptStrategy& strategy,
                               std::string model_id) {
    return report_from_confusion(confusion(pairs), strategy, std::move(model_id));
}

/// Unweighted mean of three class accuracies.
inline double macro_accuracy(double fatal, double serious, double minor) { return (fatal + serious + minor) / 3.0; }

// --- serialization ---------------------------------------------------------

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
    nlohmann::json j = nlohmann::json::object();
    for (auto t : kAllClasses) {
        nlohmann::json row = nlohmann::json::object();
        for (auto p : kAllClasses) row[std::string(to_string(p))] = cm.at(t, p);
        row[std::string(kUnresolvedName)] = cm.unresolved(t);
        j[std::string(to_string(t))] = row;
    }
    return j;
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
    ConfusionMatrix cm;
    for (auto t : kAllClasses) {
        const auto& row = j.at(std::string(to_string(t)));
        for (auto p : kAllClasses)
            for (std::uint64_t k = row.at(std::string(to_string(p))).get<std::uint64_t>(); k; --k)
                cm.add(t, PredictedLabel{p, std::nullopt});
        for (std::uint64_t k = row.at(std::string(kUnresolvedName)).get<std::uint64_t>(); k; --k)
            cm.add(t, PredictedLabel::unresolved());
    }
    return cm;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
    nlohmann::json per_class = nlohmann::json::object();
    for (auto c : kAllClasses) {
        const auto& m = r.of(c);
        per_class[std::string(to_string(c))] = {
            {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"accuracy", m.accuracy},
            {"precision_degenerate", m.precision_degenerate}, {"recall_degenerate", m.recall_degenerate}};
    }
    return {{"strategy", r.strategy.name()},
            {"model_id", r.model_id},
            {"n", r.n},
            {"unresolved_count", r.unresolved_count},
            {"macro_accuracy", r.macro_accuracy},
            {"macro_f1", r.macro_f1},
            {"per_class", per_class},
            {"confusion", to_json(r.confusion)}};
}

/// Rebuilds a report from its JSON form; metrics are recomputed from the confusion matrix.
inline EvaluationReport report_from_json(const nlohmann::json& j) {
    return report_from_confusion(confusion_from_json(j.at("confusion")), parse_strategy(j.at("strategy").get<std::string>()),
                                 j.at("model_id").get<std::string>());
}

inline std::string fixed(double v, int digits) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

/// Markdown table with one row per (strategy, model) report.
inline std::string markdown_table(const std::vector<EvaluationReport>& reports) {
    const auto labels = label_set(false);
    std::ostringstream md;
    md << "| Strategy | Model | Macro F1-score | Macro-accuracy | " << labels.fatal_display << " | "
       << labels.serious_display << " | " << labels.minor_display << " | Unresolved | n |\n";
    md << "|---|---|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& r : reports) {
        md << "| " << r.strategy.name() << " | " << r.model_id << " | " << fixed(r.macro_f1, 4) << " | "
           << fixed(r.macro_accuracy, 4) << " | " << fixed(r.of(SeverityClass::Fatal).accuracy, 4) << " | "
           << fixed(r.of(SeverityClass::SeriousInjury).accuracy, 4) << " | "
           << fixed(r.of(SeverityClass::MinorOrNonInjury).accuracy, 4) << " | " << r.unresolved_count << " | " << r.n
           << " |\n";
    }
    return md.str();
}

} // namespace crashsev
