#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <future>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "efc/classifier.hpp"
#include "efc/error.hpp"
#include "efc/metrics.hpp"
#include "efc/preprocess.hpp"
#include "efc/rng.hpp"
#include "efc/table.hpp"

namespace efc {

// Per-row fold ids in 0..k-1. Classes with fewer than k rows cannot be
// stratified: their rows get the sentinel id k, which places them in every
// test fold and in no training fold.
struct FoldAssignment {
    std::size_t k = 0;
    std::vector<std::uint32_t> fold_of;
    std::vector<std::string> small_classes;

    bool is_training_row(std::size_t row, std::size_t fold) const {
        return fold_of[row] != fold && fold_of[row] != k;
    }
    bool is_test_row(std::size_t row, std::size_t fold) const {
        return fold_of[row] == fold || fold_of[row] == k;
    }
};

struct CvOptions {
    std::size_t k = 5;
    std::uint16_t q = 30;   // bins; ignored when the table is already discretized
    double alpha = 0.5;
    std::size_t cap = 0;    // per-class training cap, 0 = uncapped
    std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t fold_seed(std::uint64_t seed) { return mix_seed(seed, fnv1a64("cv-folds")); }
inline std::uint64_t undersample_seed(std::uint64_t seed) {
    return mix_seed(seed, fnv1a64("cv-undersample"));
}

}  // namespace detail

// Stratified assignment: each class is shuffled by its own label-keyed
// stream and dealt round-robin, so per-fold class proportions differ by at
// most one row, and adding or removing a class never reshuffles the others.
inline FoldAssignment stratified_folds(const std::vector<std::string>& label_vocab,
                                       const std::vector<std::uint32_t>& label_ids,
                                       std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("fold count must be at least 2, got " + std::to_string(k));
    if (label_ids.empty()) throw ValidationError("cannot build folds for an unlabeled table");
    FoldAssignment fa;
    fa.k = k;
    fa.fold_of.resize(label_ids.size());
    std::vector<std::vector<std::size_t>> groups(label_vocab.size());
    for (std::size_t r = 0; r < label_ids.size(); ++r) groups[label_ids[r]].push_back(r);
    for (std::size_t c = 0; c < groups.size(); ++c) {
        auto& rows = groups[c];
        if (rows.empty()) continue;
        if (rows.size() < k) {
            for (std::size_t r : rows) fa.fold_of[r] = static_cast<std::uint32_t>(k);
            fa.small_classes.push_back(label_vocab[c]);
            continue;
        }
        auto gen = label_rng(detail::fold_seed(seed), label_vocab[c]);
        shuffle_inplace(rows, gen);
        for (std::size_t pos = 0; pos < rows.size(); ++pos) {
            fa.fold_of[rows[pos]] = static_cast<std::uint32_t>(pos % k);
        }
    }
    return fa;
}

inline FoldAssignment stratified_folds(const DiscretizedTable& t, std::size_t k,
                                       std::uint64_t seed) {
    return stratified_folds(t.label_vocab, t.label_ids, k, seed);
}

namespace detail {

struct LabelIndex {
    std::vector<std::string> vocab;     // sorted
    std::vector<std::uint32_t> ids;     // per row
};

inline LabelIndex index_labels(const std::vector<std::string>& labels) {
    std::map<std::string, std::uint32_t> idmap;
    for (const auto& l : labels) idmap.emplace(l, 0);
    LabelIndex idx;
    idx.vocab.reserve(idmap.size());
    for (auto& [label, id] : idmap) {
        id = static_cast<std::uint32_t>(idx.vocab.size());
        idx.vocab.push_back(label);
    }
    idx.ids.reserve(labels.size());
    for (const auto& l : labels) idx.ids.push_back(idmap.at(l));
    return idx;
}

}  // namespace detail

inline FoldAssignment stratified_folds(const RawFlowTable& t, std::size_t k, std::uint64_t seed) {
    const auto idx = detail::index_labels(t.labels);
    return stratified_folds(idx.vocab, idx.ids, k, seed);
}

// Drop vocabulary entries that no row uses (after row selection).
inline DiscretizedTable compact_classes(const DiscretizedTable& t) {
    if (!t.has_labels()) return t;
    std::vector<std::uint64_t> counts(t.label_vocab.size(), 0);
    for (auto id : t.label_ids) ++counts[id];
    std::vector<std::uint32_t> remap(t.label_vocab.size(), 0);
    DiscretizedTable out;
    out.n_rows = t.n_rows;
    out.m = t.m;
    out.q = t.q;
    out.symbols = t.symbols;
    for (std::size_t c = 0; c < t.label_vocab.size(); ++c) {
        if (counts[c] == 0) continue;
        remap[c] = static_cast<std::uint32_t>(out.label_vocab.size());
        out.label_vocab.push_back(t.label_vocab[c]);
    }
    out.label_ids.reserve(t.label_ids.size());
    for (auto id : t.label_ids) out.label_ids.push_back(remap[id]);
    return out;
}

inline DiscretizedTable remove_class(const DiscretizedTable& t, const std::string& label) {
    std::vector<std::size_t> keep;
    keep.reserve(t.n_rows);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        if (t.label(r) != label) keep.push_back(r);
    }
    return compact_classes(select_rows(t, keep));
}

inline RawFlowTable remove_class(const RawFlowTable& t, const std::string& label) {
    std::vector<std::size_t> keep;
    keep.reserve(t.n_rows);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        if (t.labels[r] != label) keep.push_back(r);
    }
    return select_rows(t, keep);
}

namespace detail {

// Training rows for one fold, ascending: non-sentinel rows outside the fold,
// minus an optional excluded class.
inline std::vector<std::size_t> training_rows(const FoldAssignment& fa, std::size_t fold,
                                              const std::vector<std::string>& vocab,
                                              const std::vector<std::uint32_t>& ids,
                                              const std::string* exclude) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < fa.fold_of.size(); ++r) {
        if (!fa.is_training_row(r, fold)) continue;
        if (exclude && vocab[ids[r]] == *exclude) continue;
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<std::size_t> test_rows(const FoldAssignment& fa, std::size_t fold) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < fa.fold_of.size(); ++r) {
        if (fa.is_test_row(r, fold)) rows.push_back(r);
    }
    return rows;
}

// Undersample, then drop classes left with fewer than 2 rows (they cannot be
// fitted); returns a compacted table ready for fit_multiclass.
inline DiscretizedTable finalize_training(const DiscretizedTable& train, std::size_t cap,
                                          std::uint64_t useed,
                                          std::vector<std::string>* skipped) {
    DiscretizedTable capped = undersample(train, cap, useed);
    std::vector<std::uint64_t> counts(capped.label_vocab.size(), 0);
    for (auto id : capped.label_ids) ++counts[id];
    std::vector<std::size_t> keep;
    keep.reserve(capped.n_rows);
    for (std::size_t r = 0; r < capped.n_rows; ++r) {
        if (counts[capped.label_ids[r]] >= 2) keep.push_back(r);
    }
    if (skipped) {
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts[c] == 1) skipped->push_back(capped.label_vocab[c]);
        }
    }
    if (keep.size() == capped.n_rows) return compact_classes(capped);
    return compact_classes(select_rows(capped, keep));
}

struct FoldOutcome {
    ConfusionMatrix cm{{}};
    std::vector<std::string> skipped;     // classes with too few training rows
    std::vector<EnergyVector> test_predictions;
    std::vector<std::size_t> test_row_ids;  // original row indices, parallel to predictions
    std::vector<std::uint32_t> predicted_vocab_col;  // vocab column per prediction (or suspicious)
    MultiClassModel model;
};

inline ConfusionMatrix score_fold(const std::vector<std::string>& vocab,
                                  const std::vector<std::uint32_t>& true_ids,
                                  const std::vector<std::size_t>& rows,
                                  const MultiClassModel& model,
                                  const std::vector<EnergyVector>& preds,
                                  std::vector<std::uint32_t>* pred_cols) {
    ConfusionMatrix cm(vocab);
    std::vector<std::size_t> model_to_vocab(model.classes.size());
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        model_to_vocab[c] = cm.index_of(model.classes[c].label);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t col = preds[i].suspicious ? cm.suspicious_column()
                                                    : model_to_vocab[preds[i].argmin];
        cm.add(true_ids[rows[i]], col, 1);
        if (pred_cols) pred_cols->push_back(static_cast<std::uint32_t>(col));
    }
    return cm;
}

}  // namespace detail

// Train the models for one fold of an already-discretized table. Exposed so
// protocol-equality properties can compare fold models directly.
inline MultiClassModel fit_fold(const DiscretizedTable& t, const FoldAssignment& fa,
                                std::size_t fold, const CvOptions& opt,
                                const std::string* exclude = nullptr,
                                std::vector<std::string>* skipped = nullptr) {
    const auto rows = detail::training_rows(fa, fold, t.label_vocab, t.label_ids, exclude);
    const DiscretizedTable train = detail::finalize_training(
        select_rows(t, rows), opt.cap, detail::undersample_seed(opt.seed), skipped);
    if (train.label_vocab.empty()) {
        throw ValidationError("fold " + std::to_string(fold) + " has no trainable class");
    }
    return fit_multiclass(train, opt.alpha);
}

namespace detail {

inline FoldOutcome run_fold_discretized(const DiscretizedTable& t, const FoldAssignment& fa,
                                        std::size_t fold, const CvOptions& opt,
                                        const std::string* exclude) {
    FoldOutcome out;
    out.model = fit_fold(t, fa, fold, opt, exclude, &out.skipped);
    out.test_row_ids = test_rows(fa, fold);
    const DiscretizedTable test = select_rows(t, out.test_row_ids);
    out.test_predictions = classify_batch(out.model, test);
    out.cm = score_fold(t.label_vocab, t.label_ids, out.test_row_ids, out.model,
                        out.test_predictions, &out.predicted_vocab_col);
    return out;
}

inline FoldOutcome run_fold_raw(const RawFlowTable& t, const std::vector<std::string>& vocab,
                                const std::vector<std::uint32_t>& ids, const FoldAssignment& fa,
                                std::size_t fold, const CvOptions& opt,
                                const std::string* exclude) {
    FoldOutcome out;
    const auto train_ids = training_rows(fa, fold, vocab, ids, exclude);
    const RawFlowTable train_raw = select_rows(t, train_ids);
    const PreprocessorState pre = fit_preprocessor(train_raw, opt.q);
    const DiscretizedTable train = finalize_training(
        transform(pre, train_raw), opt.cap, undersample_seed(opt.seed), &out.skipped);
    if (train.label_vocab.empty()) {
        throw ValidationError("fold " + std::to_string(fold) + " has no trainable class");
    }
    out.model = fit_multiclass(train, opt.alpha);
    out.model.preprocessor = pre;

    out.test_row_ids = test_rows(fa, fold);
    const DiscretizedTable test = transform(pre, select_rows(t, out.test_row_ids));
    out.test_predictions = classify_batch(out.model, test);
    out.cm = score_fold(vocab, ids, out.test_row_ids, out.model, out.test_predictions,
                        &out.predicted_vocab_col);
    return out;
}

template <typename RunFold>
inline std::vector<FoldOutcome> run_all_folds(std::size_t k, RunFold&& run) {
    std::vector<std::future<FoldOutcome>> futures;
    futures.reserve(k);
    for (std::size_t f = 0; f < k; ++f) {
        futures.push_back(std::async(std::launch::async, run, f));
    }
    std::vector<FoldOutcome> outcomes;
    outcomes.reserve(k);
    for (auto& fu : futures) outcomes.push_back(fu.get());
    return outcomes;
}

inline MetricsReport assemble_report(std::vector<FoldOutcome> outcomes,
                                     const FoldAssignment& fa) {
    std::vector<ConfusionMatrix> matrices;
    std::set<std::string> skipped;
    for (auto& o : outcomes) {
        matrices.push_back(std::move(o.cm));
        skipped.insert(o.skipped.begin(), o.skipped.end());
    }
    MetricsReport rep = aggregate_metrics(std::move(matrices));
    for (const auto& label : fa.small_classes) {
        rep.flags.push_back("class '" + label + "' has fewer rows than folds; " +
                            "kept in every test fold, excluded from training");
    }
    for (const auto& label : skipped) {
        rep.flags.push_back("class '" + label +
                            "' had fewer than 2 training flows in some fold; skipped there");
    }
    return rep;
}

}  // namespace detail

// Stratified k-fold cross-validation on an already-discretized table.
inline MetricsReport cross_validate(const DiscretizedTable& t, const CvOptions& opt) {
    if (!t.has_labels()) throw ValidationError("cross-validation requires a labeled table");
    const FoldAssignment fa = stratified_folds(t, opt.k, opt.seed);
    auto outcomes = detail::run_all_folds(opt.k, [&](std::size_t f) {
        return detail::run_fold_discretized(t, fa, f, opt, nullptr);
    });
    return detail::assemble_report(std::move(outcomes), fa);
}

// Stratified k-fold cross-validation from raw flows: each fold fits its own
// preprocessor on its training portion, caps classes, fits models, and
// evaluates on the held-out portion.
inline MetricsReport cross_validate(const RawFlowTable& t, const CvOptions& opt) {
    if (!t.has_labels()) throw ValidationError("cross-validation requires a labeled table");
    const auto idx = detail::index_labels(t.labels);
    const FoldAssignment fa = stratified_folds(idx.vocab, idx.ids, opt.k, opt.seed);
    auto outcomes = detail::run_all_folds(opt.k, [&](std::size_t f) {
        return detail::run_fold_raw(t, idx.vocab, idx.ids, fa, f, opt, nullptr);
    });
    return detail::assemble_report(std::move(outcomes), fa);
}

// Where the flows of a class withheld from training end up: predicted as the
// benign class, as some other known class, or flagged suspicious.
struct UnknownExperimentReport {
    std::string withheld;
    std::string benign;
    std::uint64_t n = 0;  // withheld test predictions counted across folds
    std::uint64_t as_benign = 0;
    std::uint64_t as_other = 0;
    std::uint64_t as_suspicious = 0;
    double frac_benign = 0.0;
    double frac_other = 0.0;
    double frac_suspicious = 0.0;
};

namespace detail {

inline void check_unknown_args(const std::vector<std::string>& vocab, const std::string& withheld,
                               const std::string& benign) {
    if (withheld == benign) {
        throw ValidationError("withheld class and benign class must differ");
    }
    if (withheld == kSuspiciousLabel || benign == kSuspiciousLabel) {
        throw ValidationError("the reserved verdict label cannot name a class");
    }
    auto has = [&](const std::string& l) {
        return std::find(vocab.begin(), vocab.end(), l) != vocab.end();
    };
    if (!has(withheld)) throw ValidationError("withheld class '" + withheld + "' not in table");
    if (!has(benign)) throw ValidationError("benign class '" + benign + "' not in table");
}

inline UnknownExperimentReport tally_unknown(const std::vector<FoldOutcome>& outcomes,
                                             const std::vector<std::string>& vocab,
                                             const std::vector<std::uint32_t>& ids,
                                             const std::string& withheld,
                                             const std::string& benign) {
    UnknownExperimentReport rep;
    rep.withheld = withheld;
    rep.benign = benign;
    const std::uint32_t suspicious_col = static_cast<std::uint32_t>(vocab.size());
    const std::size_t benign_col =
        std::find(vocab.begin(), vocab.end(), benign) - vocab.begin();
    for (const auto& o : outcomes) {
        for (std::size_t i = 0; i < o.test_row_ids.size(); ++i) {
            if (vocab[ids[o.test_row_ids[i]]] != withheld) continue;
            ++rep.n;
            const std::uint32_t col = o.predicted_vocab_col[i];
            if (col == suspicious_col) {
                ++rep.as_suspicious;
            } else if (col == benign_col) {
                ++rep.as_benign;
            } else {
                ++rep.as_other;
            }
        }
    }
    if (rep.n == 0) throw ValidationError("withheld class produced no test predictions");
    rep.frac_benign = static_cast<double>(rep.as_benign) / static_cast<double>(rep.n);
    rep.frac_other = static_cast<double>(rep.as_other) / static_cast<double>(rep.n);
    rep.frac_suspicious = static_cast<double>(rep.as_suspicious) / static_cast<double>(rep.n);
    return rep;
}

}  // namespace detail

// Withholding protocol: run k-fold CV with the withheld class deleted from
// every training fold (it stays in the test folds), then aggregate where its
// flows were placed.
inline UnknownExperimentReport unknown_attack_experiment(const DiscretizedTable& t,
                                                         const std::string& withheld,
                                                         const std::string& benign,
                                                         const CvOptions& opt) {
    if (!t.has_labels()) throw ValidationError("the experiment requires a labeled table");
    detail::check_unknown_args(t.label_vocab, withheld, benign);
    const FoldAssignment fa = stratified_folds(t, opt.k, opt.seed);
    auto outcomes = detail::run_all_folds(opt.k, [&](std::size_t f) {
        return detail::run_fold_discretized(t, fa, f, opt, &withheld);
    });
    return detail::tally_unknown(outcomes, t.label_vocab, t.label_ids, withheld, benign);
}

inline UnknownExperimentReport unknown_attack_experiment(const RawFlowTable& t,
                                                         const std::string& withheld,
                                                         const std::string& benign,
                                                         const CvOptions& opt) {
    if (!t.has_labels()) throw ValidationError("the experiment requires a labeled table");
    const auto idx = detail::index_labels(t.labels);
    detail::check_unknown_args(idx.vocab, withheld, benign);
    const FoldAssignment fa = stratified_folds(idx.vocab, idx.ids, opt.k, opt.seed);
    auto outcomes = detail::run_all_folds(opt.k, [&](std::size_t f) {
        return detail::run_fold_raw(t, idx.vocab, idx.ids, fa, f, opt, &withheld);
    });
    return detail::tally_unknown(outcomes, idx.vocab, idx.ids, withheld, benign);
}

}  // namespace efc
