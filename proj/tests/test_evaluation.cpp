#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "efc/evaluation.hpp"

namespace {

struct ClassSpec {
    std::string label;
    std::size_t rows;
    std::uint16_t lo;  // symbols drawn uniformly from [lo, hi]
    std::uint16_t hi;
};

// Labels must arrive sorted; blocks are laid out in that order.
efc::DiscretizedTable class_table(const std::vector<ClassSpec>& specs, std::size_t m,
                                  std::uint16_t q, std::uint64_t seed) {
    efc::DiscretizedTable t;
    t.m = m;
    t.q = q;
    for (std::uint32_t c = 0; c < specs.size(); ++c) {
        const auto& spec = specs[c];
        t.label_vocab.push_back(spec.label);
        auto gen = efc::label_rng(seed, spec.label);
        for (std::size_t r = 0; r < spec.rows; ++r) {
            t.label_ids.push_back(c);
            for (std::size_t k = 0; k < m; ++k) {
                t.symbols.push_back(static_cast<std::uint16_t>(
                    spec.lo + efc::bounded_uint(gen, spec.hi - spec.lo + 1u)));
            }
        }
    }
    t.n_rows = t.label_ids.size();
    return t;
}

std::map<std::string, std::vector<std::size_t>> fold_counts_by_class(
    const efc::DiscretizedTable& t, const efc::FoldAssignment& fa) {
    std::map<std::string, std::vector<std::size_t>> counts;
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        auto& v = counts[t.label(r)];
        if (v.empty()) v.resize(fa.k + 1, 0);
        v[fa.fold_of[r]] += 1;
    }
    return counts;
}

// Four classes over a 10-symbol alphabet: class identity c draws feature i
// uniformly from the pair {2b+1, 2b+2} with b = (c + i) mod 4, so supports
// rotate across features and states 9 and 10 stay unoccupied. The fourth
// class can impersonate another identity, which makes it either foreign to
// every trained model (identity 3) or a twin of benign (identity 0).
efc::DiscretizedTable rotated_pair_table(std::uint32_t withheld_identity, std::uint64_t seed) {
    const std::vector<std::string> labels = {"benign", "flood", "scan", "zero-day"};
    efc::DiscretizedTable t;
    t.m = 10;
    t.q = 10;
    for (std::uint32_t c = 0; c < labels.size(); ++c) {
        t.label_vocab.push_back(labels[c]);
        auto gen = efc::label_rng(seed, labels[c]);
        const std::uint32_t identity = c == 3 ? withheld_identity : c;
        for (std::size_t r = 0; r < 300; ++r) {
            t.label_ids.push_back(c);
            for (std::size_t i = 0; i < t.m; ++i) {
                const auto b = (identity + static_cast<std::uint32_t>(i)) % 4;
                t.symbols.push_back(
                    static_cast<std::uint16_t>(2 * b + 1 + efc::bounded_uint(gen, 2)));
            }
        }
    }
    t.n_rows = t.label_ids.size();
    return t;
}

}  // namespace

TEST_CASE("stratified folds are deterministic and balanced per class") {
    efc::DiscretizedTable t =
        class_table({{"a", 103, 1, 3}, {"b", 47, 1, 3}}, 3, 3, 7);
    efc::FoldAssignment fa = efc::stratified_folds(t, 5, 11);
    efc::FoldAssignment fa2 = efc::stratified_folds(t, 5, 11);
    CHECK(fa.fold_of == fa2.fold_of);

    efc::FoldAssignment other = efc::stratified_folds(t, 5, 12);
    CHECK(fa.fold_of != other.fold_of);

    for (const auto& [label, per_fold] : fold_counts_by_class(t, fa)) {
        std::size_t lo = *std::min_element(per_fold.begin(), per_fold.end() - 1);
        std::size_t hi = *std::max_element(per_fold.begin(), per_fold.end() - 1);
        CHECK(hi - lo <= 1);
        CHECK(per_fold[fa.k] == 0);  // no sentinel rows here
    }
}

TEST_CASE("every row tests exactly once and never trains in its own fold") {
    efc::DiscretizedTable t = class_table({{"a", 40, 1, 3}, {"b", 25, 1, 3}}, 3, 3, 9);
    efc::FoldAssignment fa = efc::stratified_folds(t, 5, 1);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        std::size_t tested = 0;
        for (std::size_t f = 0; f < fa.k; ++f) {
            const bool train = fa.is_training_row(r, f);
            const bool test = fa.is_test_row(r, f);
            CHECK(train != test);
            if (test) ++tested;
        }
        CHECK(tested == 1);
    }
}

TEST_CASE("classes smaller than the fold count become test-only sentinels") {
    efc::DiscretizedTable t = class_table({{"a", 50, 1, 3}, {"tiny", 3, 1, 3}}, 3, 3, 13);
    efc::FoldAssignment fa = efc::stratified_folds(t, 5, 2);
    REQUIRE(fa.small_classes == std::vector<std::string>{"tiny"});
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        if (t.label(r) != "tiny") continue;
        CHECK(fa.fold_of[r] == fa.k);
        for (std::size_t f = 0; f < fa.k; ++f) {
            CHECK_FALSE(fa.is_training_row(r, f));
            CHECK(fa.is_test_row(r, f));
        }
    }
}

TEST_CASE("fold construction rejects bad arguments") {
    efc::DiscretizedTable t = class_table({{"a", 10, 1, 3}}, 3, 3, 1);
    CHECK_THROWS_AS(efc::stratified_folds(t, 1, 0), efc::ValidationError);
    efc::DiscretizedTable unlabeled = t;
    unlabeled.label_ids.clear();
    CHECK_THROWS_AS(efc::stratified_folds(unlabeled, 5, 0), efc::ValidationError);
}

TEST_CASE("removing a class drops its rows and vocabulary entry") {
    efc::DiscretizedTable t =
        class_table({{"a", 10, 1, 2}, {"b", 5, 1, 2}, {"c", 7, 1, 2}}, 3, 3, 3);
    efc::DiscretizedTable r = efc::remove_class(t, "b");
    CHECK(r.n_rows == 17);
    CHECK(r.label_vocab == std::vector<std::string>{"a", "c"});
    std::size_t a_rows = 0;
    for (auto id : r.label_ids) {
        if (id == 0) ++a_rows;
    }
    CHECK(a_rows == 10);
}

TEST_CASE("withholding a class reproduces cross-validation on the reduced table") {
    efc::DiscretizedTable t = class_table(
        {{"a", 60, 1, 4}, {"b", 45, 1, 4}, {"c", 52, 2, 4}}, 4, 4, 21);
    const std::string excluded = "b";
    efc::DiscretizedTable reduced = efc::remove_class(t, excluded);

    efc::CvOptions opt;
    opt.k = 4;
    opt.cap = 30;
    opt.seed = 123;

    efc::FoldAssignment fa_full = efc::stratified_folds(t, opt.k, opt.seed);
    efc::FoldAssignment fa_red = efc::stratified_folds(reduced, opt.k, opt.seed);

    // fold ids of the surviving rows match the reduced table row for row
    std::vector<std::uint32_t> surviving;
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        if (t.label(r) != excluded) surviving.push_back(fa_full.fold_of[r]);
    }
    REQUIRE(surviving == fa_red.fold_of);

    // per-fold models are bit-identical between the two protocols
    for (std::size_t f = 0; f < opt.k; ++f) {
        efc::MultiClassModel full = efc::fit_fold(t, fa_full, f, opt, &excluded);
        efc::MultiClassModel red = efc::fit_fold(reduced, fa_red, f, opt);
        REQUIRE(full.classes.size() == red.classes.size());
        for (std::size_t c = 0; c < full.classes.size(); ++c) {
            CHECK(full.classes[c].label == red.classes[c].label);
            CHECK(full.classes[c].couplings == red.classes[c].couplings);
            CHECK(full.classes[c].fields == red.classes[c].fields);
            CHECK(full.classes[c].threshold == red.classes[c].threshold);
        }
    }
}

TEST_CASE("cross-validation reports cover every test row once") {
    // supports avoid the reference symbol q = 5 so each class keeps a
    // strongly negative energy signature
    efc::DiscretizedTable t = class_table({{"a", 80, 1, 2}, {"b", 60, 3, 4}}, 4, 5, 33);
    efc::CvOptions opt;
    opt.k = 5;
    opt.seed = 5;
    efc::MetricsReport rep = efc::cross_validate(t, opt);
    REQUIRE(rep.labels == t.label_vocab);
    REQUIRE(rep.fold_matrices.size() == 5);
    std::uint64_t total = 0;
    for (const auto& cm : rep.fold_matrices) {
        for (std::size_t c = 0; c < cm.labels.size(); ++c) total += cm.row_sum(c);
    }
    CHECK(total == t.n_rows);
    CHECK(rep.flags.empty());
    // disjoint supports separate cleanly
    CHECK(rep.macro_f1.mean > 0.9);
}

TEST_CASE("a single point-mass class scores perfect recall") {
    efc::DiscretizedTable t = class_table({{"only", 40, 2, 2}}, 3, 3, 41);
    efc::CvOptions opt;
    opt.k = 4;
    efc::MetricsReport rep = efc::cross_validate(t, opt);
    for (const auto& fold : rep.per_fold) {
        CHECK(fold[0].recall == 1.0);
        CHECK(fold[0].precision == 1.0);
    }
    CHECK(rep.macro_f1.mean == 1.0);
}

TEST_CASE("small and skipped classes are flagged in the report") {
    // tiny: 3 rows < k = 5 folds -> sentinel flag
    efc::DiscretizedTable t =
        class_table({{"a", 50, 1, 3}, {"tiny", 3, 1, 3}}, 3, 3, 43);
    efc::CvOptions opt;
    opt.k = 5;
    efc::MetricsReport rep = efc::cross_validate(t, opt);
    bool found = false;
    for (const auto& f : rep.flags) {
        if (f.find("'tiny'") != std::string::npos &&
            f.find("fewer rows than folds") != std::string::npos) {
            found = true;
        }
    }
    CHECK(found);

    // two rows with k = 2 leaves one training row per fold -> skipped flag
    efc::DiscretizedTable t2 = class_table({{"a", 30, 1, 3}, {"pair", 2, 1, 3}}, 3, 3, 47);
    efc::CvOptions opt2;
    opt2.k = 2;
    efc::MetricsReport rep2 = efc::cross_validate(t2, opt2);
    bool skipped = false;
    for (const auto& f : rep2.flags) {
        if (f.find("'pair'") != std::string::npos &&
            f.find("fewer than 2 training flows") != std::string::npos) {
            skipped = true;
        }
    }
    CHECK(skipped);
}

TEST_CASE("a fold with no trainable class is rejected") {
    efc::DiscretizedTable t = class_table({{"only", 3, 1, 2}}, 3, 3, 51);
    efc::CvOptions opt;
    opt.k = 2;
    // 3 rows split 2/1: the fold testing 2 rows trains on 1, which is too few
    CHECK_THROWS_AS(efc::cross_validate(t, opt), efc::ValidationError);
}

TEST_CASE("withheld flows with foreign symbols are overwhelmingly suspicious") {
    // identity 3 is shared with no trained class on any feature
    efc::DiscretizedTable t = rotated_pair_table(3, 61);
    efc::CvOptions opt;
    opt.k = 5;
    opt.seed = 17;
    efc::UnknownExperimentReport rep =
        efc::unknown_attack_experiment(t, "zero-day", "benign", opt);
    CHECK(rep.n == 300);
    CHECK(rep.as_benign + rep.as_other + rep.as_suspicious == rep.n);
    CHECK(rep.frac_benign + rep.frac_other + rep.frac_suspicious ==
          Catch::Approx(1.0).margin(1e-12));
    CHECK(rep.frac_suspicious >= 0.9);
}

TEST_CASE("a withheld twin of the benign class lands on benign or suspicious") {
    // identity 0 draws from exactly the symbol pairs benign draws from
    efc::DiscretizedTable t = rotated_pair_table(0, 71);
    efc::CvOptions opt;
    opt.k = 5;
    opt.seed = 19;
    efc::UnknownExperimentReport rep =
        efc::unknown_attack_experiment(t, "zero-day", "benign", opt);
    CHECK(rep.frac_benign + rep.frac_suspicious >= 0.9);
    CHECK(rep.frac_other <= 0.1);
}

TEST_CASE("the experiment validates its class arguments") {
    efc::DiscretizedTable t = class_table({{"a", 20, 1, 2}, {"b", 20, 1, 2}}, 3, 3, 81);
    efc::CvOptions opt;
    opt.k = 2;
    CHECK_THROWS_AS(efc::unknown_attack_experiment(t, "a", "a", opt), efc::ValidationError);
    CHECK_THROWS_AS(efc::unknown_attack_experiment(t, "ghost", "a", opt), efc::ValidationError);
    CHECK_THROWS_AS(efc::unknown_attack_experiment(t, "a", "ghost", opt), efc::ValidationError);
    CHECK_THROWS_AS(efc::unknown_attack_experiment(t, "suspicious", "a", opt),
                    efc::ValidationError);
}
