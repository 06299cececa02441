#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "efc/metrics.hpp"
#include "efc/rng.hpp"

namespace {

efc::ConfusionMatrix worked_example() {
    efc::ConfusionMatrix cm({"A", "B"});
    cm.add(0, 0, 8);   // true A predicted A
    cm.add(0, 1, 2);   // true A predicted B
    cm.add(1, 1, 10);  // true B predicted B
    return cm;
}

}  // namespace

TEST_CASE("a perfectly diagonal matrix scores 1 everywhere") {
    efc::ConfusionMatrix cm({"a", "b", "c"});
    cm.add(0, 0, 5);
    cm.add(1, 1, 7);
    cm.add(2, 2, 9);
    efc::MetricsReport rep = efc::compute_metrics(cm);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(rep.per_fold[0][c].precision == 1.0);
        CHECK(rep.per_fold[0][c].recall == 1.0);
        CHECK(rep.per_fold[0][c].f1 == 1.0);
        CHECK_FALSE(rep.per_fold[0][c].degenerate);
    }
    CHECK(rep.macro_f1.mean == 1.0);
    CHECK(rep.weighted_f1.mean == 1.0);
}

TEST_CASE("the two-class worked example reproduces the hand numbers") {
    efc::MetricsReport rep = efc::compute_metrics(worked_example());
    const auto& a = rep.per_fold[0][0];
    const auto& b = rep.per_fold[0][1];
    CHECK(a.precision == Catch::Approx(1.0).margin(1e-12));
    CHECK(a.recall == Catch::Approx(0.8).margin(1e-12));
    CHECK(a.f1 == Catch::Approx(8.0 / 9.0).margin(1e-12));
    CHECK(a.support == 10);
    CHECK(b.precision == Catch::Approx(10.0 / 12.0).margin(1e-12));
    CHECK(b.recall == Catch::Approx(1.0).margin(1e-12));
    CHECK(b.f1 == Catch::Approx(10.0 / 11.0).margin(1e-12));
    CHECK(rep.macro_f1.mean ==
          Catch::Approx((8.0 / 9.0 + 10.0 / 11.0) / 2.0).margin(1e-12));
    // equal support, so the weighted mean coincides with the macro mean
    CHECK(rep.weighted_f1.mean == Catch::Approx(rep.macro_f1.mean).margin(1e-12));
}

TEST_CASE("zero true positives yield zero F1 without dividing by zero") {
    efc::ConfusionMatrix cm({"a", "b"});
    cm.add(0, 1, 4);  // every true a predicted b
    cm.add(1, 0, 6);  // every true b predicted a
    efc::MetricsReport rep = efc::compute_metrics(cm);
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(rep.per_fold[0][c].precision == 0.0);
        CHECK(rep.per_fold[0][c].recall == 0.0);
        CHECK(rep.per_fold[0][c].f1 == 0.0);
        CHECK(std::isfinite(rep.per_fold[0][c].f1));
    }
}

TEST_CASE("suspicious verdicts count against recall but never precision") {
    efc::ConfusionMatrix cm({"a", "b"});
    const std::size_t susp = cm.suspicious_column();
    REQUIRE(susp == 2);
    cm.add(0, 0, 8);
    cm.add(0, susp, 2);  // suspicious: a false negative for class a
    cm.add(1, 1, 10);
    efc::MetricsReport rep = efc::compute_metrics(cm);
    const auto& a = rep.per_fold[0][0];
    CHECK(a.precision == 1.0);  // no column charge anywhere
    CHECK(a.recall == Catch::Approx(0.8).margin(1e-12));
    const auto& b = rep.per_fold[0][1];
    CHECK(b.precision == 1.0);
    CHECK(b.recall == 1.0);
}

TEST_CASE("a class with zero predictions and zero true rows is flagged degenerate") {
    efc::ConfusionMatrix cm({"a", "ghost"});
    cm.add(0, 0, 5);
    efc::MetricsReport rep = efc::compute_metrics(cm);
    const auto& ghost = rep.per_fold[0][1];
    CHECK(ghost.degenerate);
    CHECK(ghost.precision == 0.0);
    CHECK(ghost.recall == 0.0);
    CHECK(ghost.f1 == 0.0);
    CHECK(ghost.support == 0);
    // the degenerate class still drags the unweighted macro mean down
    CHECK(rep.macro_f1.mean == Catch::Approx(0.5).margin(1e-12));
    // but not the support-weighted mean
    CHECK(rep.weighted_f1.mean == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("metrics match a brute-force recomputation on random matrices") {
    auto gen = efc::label_rng(5, "metrics-fuzz");
    for (int rep_i = 0; rep_i < 50; ++rep_i) {
        const std::size_t k = 2 + efc::bounded_uint(gen, 3);
        std::vector<std::string> labels;
        for (std::size_t c = 0; c < k; ++c) labels.push_back("c" + std::to_string(c));
        efc::ConfusionMatrix cm(labels);
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t c = 0; c <= k; ++c) {
                cm.add(r, c, efc::bounded_uint(gen, 20));
            }
        }
        efc::MetricsReport rep = efc::compute_metrics(cm);

        double macro = 0.0;
        double weighted = 0.0;
        std::uint64_t total = 0;
        for (std::size_t r = 0; r < k; ++r) total += cm.row_sum(r);
        for (std::size_t c = 0; c < k; ++c) {
            const double tp = static_cast<double>(cm.at(c, c));
            double colsum = 0.0;
            for (std::size_t r = 0; r < k; ++r) colsum += static_cast<double>(cm.at(r, c));
            const double rowsum = static_cast<double>(cm.row_sum(c));
            const double p = colsum == 0.0 ? 0.0 : tp / colsum;
            const double r = rowsum == 0.0 ? 0.0 : tp / rowsum;
            const double f1 = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
            CHECK(rep.per_fold[0][c].precision == Catch::Approx(p).margin(1e-12));
            CHECK(rep.per_fold[0][c].recall == Catch::Approx(r).margin(1e-12));
            CHECK(rep.per_fold[0][c].f1 == Catch::Approx(f1).margin(1e-12));
            macro += f1 / static_cast<double>(k);
            if (total > 0) weighted += f1 * rowsum / static_cast<double>(total);
        }
        CHECK(rep.macro_f1.mean == Catch::Approx(macro).margin(1e-12));
        CHECK(rep.weighted_f1.mean == Catch::Approx(weighted).margin(1e-12));
    }
}

TEST_CASE("fold statistics compute mean, standard error and the 1.96 interval") {
    efc::FoldStat s = efc::fold_stat({0.8, 0.9, 1.0});
    CHECK(s.mean == Catch::Approx(0.9).margin(1e-12));
    // sample sd is 0.1, so the standard error is 0.1/sqrt(3)
    CHECK(s.stderr_ == Catch::Approx(0.1 / std::sqrt(3.0)).margin(1e-12));
    CHECK(s.ci95 == Catch::Approx(1.96 * 0.1 / std::sqrt(3.0)).margin(1e-12));

    efc::FoldStat one = efc::fold_stat({0.7});
    CHECK(one.mean == 0.7);
    CHECK(one.stderr_ == 0.0);
    CHECK(one.ci95 == 0.0);

    efc::FoldStat none = efc::fold_stat({});
    CHECK(none.mean == 0.0);
}

TEST_CASE("aggregation pools folds and rejects mismatched label sets") {
    efc::ConfusionMatrix f1({"a", "b"});
    f1.add(0, 0, 10);
    f1.add(1, 1, 10);
    efc::ConfusionMatrix f2({"a", "b"});
    f2.add(0, 0, 8);
    f2.add(0, 1, 2);
    f2.add(1, 1, 10);
    efc::MetricsReport rep = efc::aggregate_metrics({f1, f2});
    REQUIRE(rep.per_fold.size() == 2);
    CHECK(rep.fold_macro_f1[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(rep.recall[0].mean == Catch::Approx((1.0 + 0.8) / 2.0).margin(1e-12));
    CHECK(rep.macro_f1.mean ==
          Catch::Approx((rep.fold_macro_f1[0] + rep.fold_macro_f1[1]) / 2.0).margin(1e-12));

    efc::ConfusionMatrix other({"a", "zzz"});
    CHECK_THROWS_AS(efc::aggregate_metrics({f1, other}), efc::ValidationError);
    CHECK_THROWS_AS(efc::aggregate_metrics({}), efc::ValidationError);
}

TEST_CASE("confusion matrix lookups work by label") {
    efc::ConfusionMatrix cm = worked_example();
    CHECK(cm.index_of("A") == 0);
    CHECK(cm.index_of("B") == 1);
    CHECK_THROWS_AS(cm.index_of("suspicious"), efc::ValidationError);
    CHECK(cm.row_sum(0) == 10);
    CHECK(cm.col_sum(1) == 12);
    CHECK(cm.at(0, 1) == 2);
}
