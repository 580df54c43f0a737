#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace crashsev;
using namespace crashsev::testing;

namespace {

constexpr double kEps = 1e-12;

PredictedLabel pred(SeverityClass c) { return {c, std::nullopt}; }

const PromptStrategy kZS{};

} // namespace

TEST(Metrics, FatalAccuracyFromTwentyTwoOfFifty) {
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 50; ++i)
        pairs.emplace_back(SeverityClass::Fatal, i < 22 ? pred(SeverityClass::Fatal) : pred(SeverityClass::SeriousInjury));
    auto r = report(pairs, kZS, "m");
    EXPECT_NEAR(r.of(SeverityClass::Fatal).accuracy, 0.44, kEps);
    EXPECT_NEAR(r.of(SeverityClass::Fatal).precision, 1.0, kEps);
    EXPECT_TRUE(r.of(SeverityClass::SeriousInjury).recall_degenerate);
    EXPECT_NEAR(r.of(SeverityClass::SeriousInjury).precision, 0.0, kEps);
}

TEST(Metrics, MacroAccuracyExamples) {
    EXPECT_NEAR(macro_accuracy(0.44, 0.34, 0.58), 0.4533, 5e-5);
    EXPECT_NEAR(macro_accuracy(0.00, 1.00, 0.02), 0.3400, 5e-5);
    EXPECT_NEAR(macro_accuracy(0.40, 0.64, 0.38), 0.4733, 5e-5);
}

TEST(Metrics, ReferenceMacroAccuraciesFollowFromClassAccuracies) {
    for (const auto& row : kReferenceRows) {
        auto r = report(pairs_for_accuracies(row.fatal, row.serious, row.minor), parse_strategy(row.setting), row.model);
        EXPECT_NEAR(r.macro_accuracy, row.macro_accuracy, 0.005) << row.setting << " " << row.model;
        EXPECT_NEAR(r.of(SeverityClass::Fatal).accuracy, row.fatal, kEps);
        EXPECT_NEAR(r.of(SeverityClass::SeriousInjury).accuracy, row.serious, kEps);
        EXPECT_NEAR(r.of(SeverityClass::MinorOrNonInjury).accuracy, row.minor, kEps);
    }
}

TEST(Metrics, HandComputedConfusion) {
    // truth F: F,F,S,U   truth S: S,M   truth M: M,M,F
    std::vector<LabeledPair> pairs = {
        {SeverityClass::Fatal, pred(SeverityClass::Fatal)},
        {SeverityClass::Fatal, pred(SeverityClass::Fatal)},
        {SeverityClass::Fatal, pred(SeverityClass::SeriousInjury)},
        {SeverityClass::Fatal, PredictedLabel::unresolved()},
        {SeverityClass::SeriousInjury, pred(SeverityClass::SeriousInjury)},
        {SeverityClass::SeriousInjury, pred(SeverityClass::MinorOrNonInjury)},
        {SeverityClass::MinorOrNonInjury, pred(SeverityClass::MinorOrNonInjury)},
        {SeverityClass::MinorOrNonInjury, pred(SeverityClass::MinorOrNonInjury)},
        {SeverityClass::MinorOrNonInjury, pred(SeverityClass::Fatal)},
    };
    auto r = report(pairs, kZS, "m");
    EXPECT_EQ(r.n, 9u);
    EXPECT_EQ(r.unresolved_count, 1u);
    EXPECT_EQ(r.confusion.unresolved(SeverityClass::Fatal), 1u);
    // Fatal: tp 2, fp 1, fn 2 -> P 2/3, R 1/2, F1 4/7
    EXPECT_NEAR(r.of(SeverityClass::Fatal).precision, 2.0 / 3, kEps);
    EXPECT_NEAR(r.of(SeverityClass::Fatal).recall, 0.5, kEps);
    EXPECT_NEAR(r.of(SeverityClass::Fatal).f1, 4.0 / 7, kEps);
    // Serious: tp 1, fp 1, fn 1 -> 1/2, 1/2, 1/2
    EXPECT_NEAR(r.of(SeverityClass::SeriousInjury).f1, 0.5, kEps);
    // Minor: tp 2, fp 1, fn 1 -> 2/3, 2/3, 2/3
    EXPECT_NEAR(r.of(SeverityClass::MinorOrNonInjury).f1, 2.0 / 3, kEps);
    EXPECT_NEAR(r.macro_accuracy, (0.5 + 0.5 + 2.0 / 3) / 3, kEps);
    EXPECT_NEAR(r.macro_f1, (4.0 / 7 + 0.5 + 2.0 / 3) / 3, kEps);
}

TEST(Metrics, EmptyInputIsAllDegenerate) {
    auto r = report({}, kZS, "m");
    EXPECT_EQ(r.n, 0u);
    for (auto c : kAllClasses) {
        EXPECT_TRUE(r.of(c).precision_degenerate);
        EXPECT_TRUE(r.of(c).recall_degenerate);
        EXPECT_EQ(r.of(c).f1, 0.0);
    }
}

TEST(Metrics, AgreesWithRecountOnRandomMultisets) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        auto pairs = random_pairs(rng, 1 + rng() % 300);
        auto r = report(pairs, kZS, "m");
        auto o = recount(pairs);
        for (auto c : kAllClasses) {
            auto i = index_of(c);
            ASSERT_NEAR(r.of(c).precision, o.precision[i], kEps);
            ASSERT_NEAR(r.of(c).recall, o.recall[i], kEps);
            ASSERT_NEAR(r.of(c).f1, o.f1[i], kEps);
        }
        ASSERT_NEAR(r.macro_accuracy, o.macro_accuracy, kEps);
        ASSERT_NEAR(r.macro_f1, o.macro_f1, kEps);
        ASSERT_EQ(r.unresolved_count, o.unresolved);
    }
}

TEST(Metrics, PermutationInvariant) {
    std::mt19937_64 rng(8);
    auto pairs = random_pairs(rng, 120);
    auto base = report(pairs, kZS, "m");
    for (int k = 0; k < 20; ++k) {
        std::shuffle(pairs.begin(), pairs.end(), rng);
        ASSERT_EQ(report(pairs, kZS, "m"), base);
    }
}

TEST(Metrics, BoundsAndF1Identity) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        auto r = report(random_pairs(rng, 1 + rng() % 50), kZS, "m");
        for (auto c : kAllClasses) {
            const auto& m = r.of(c);
            for (double v : {m.precision, m.recall, m.f1}) {
                ASSERT_GE(v, 0.0);
                ASSERT_LE(v, 1.0);
            }
            if (m.precision > 0 && m.recall > 0) {
                ASSERT_NEAR(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall), kEps);
            }
            ASSERT_LE(m.f1, std::max(m.precision, m.recall) + kEps);
        }
    }
}

TEST(Metrics, JsonRoundTrip) {
    std::mt19937_64 rng(4);
    auto r = report(random_pairs(rng, 77), parse_strategy("ZS_PE_CoT"), "llama3-70b");
    auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
    EXPECT_EQ(back, r);
}

TEST(Metrics, MarkdownTableLayout) {
    auto row = kReferenceRows[2];
    auto r = report(pairs_for_accuracies(row.fatal, row.serious, row.minor), kZS, "LLaMA3-70B");
    auto md = markdown_table({r});
    EXPECT_NE(md.find("| Strategy | Model | Macro F1-score | Macro-accuracy | Fatal accident |"), std::string::npos);
    EXPECT_NE(md.find("| ZS | LLaMA3-70B | "), std::string::npos);
    EXPECT_NE(md.find("| 0.4533 | 0.4400 | 0.3400 | 0.5800 | 0 | 150 |"), std::string::npos);
}
