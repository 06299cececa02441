#pragma once

#include <cstddef>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "efc/error.hpp"
#include "efc/potts.hpp"
#include "efc/preprocess.hpp"
#include "efc/schema.hpp"
#include "efc/table.hpp"

namespace efc {

// One trained model per traffic class, in training order, plus the
// preprocessing state when the model was fitted from raw flows.
struct MultiClassModel {
    std::size_t m = 0;
    std::uint16_t q = 0;
    double alpha = 0.0;
    std::vector<ClassModel> classes;
    std::optional<PreprocessorState> preprocessor;

    std::size_t class_index(const std::string& label) const {
        for (std::size_t c = 0; c < classes.size(); ++c) {
            if (classes[c].label == label) return c;
        }
        throw ValidationError("model has no class '" + label + "'");
    }
};

// Result of classifying one flow: its energy under every class model, the
// minimum-energy class, and the open-set verdict. The verdict is suspicious
// exactly when even the best class's energy lies strictly above that class's
// training threshold.
struct EnergyVector {
    std::vector<double> energies;  // one per class, training order
    std::uint32_t argmin = 0;
    bool suspicious = false;
};

inline const std::string& verdict_label(const MultiClassModel& model, const EnergyVector& ev) {
    static const std::string suspicious{kSuspiciousLabel};
    return ev.suspicious ? suspicious : model.classes[ev.argmin].label;
}

enum class SingleVerdict { normal, abnormal };

// Single-model open-set rule: normal when the flow's energy does not exceed
// the class threshold (boundary inclusive).
inline SingleVerdict classify_single(const ClassModel& model, const std::uint16_t* symbols) {
    return flow_energy(model, symbols) <= model.threshold ? SingleVerdict::normal
                                                          : SingleVerdict::abnormal;
}

inline EnergyVector classify(const MultiClassModel& model, const std::uint16_t* symbols) {
    if (model.classes.empty()) throw ValidationError("model has no classes");
    EnergyVector ev;
    ev.energies.resize(model.classes.size());
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        ev.energies[c] = flow_energy(model.classes[c], symbols);
        // strict comparison keeps the earliest class on ties
        if (ev.energies[c] < ev.energies[ev.argmin]) ev.argmin = static_cast<std::uint32_t>(c);
    }
    ev.suspicious = ev.energies[ev.argmin] > model.classes[ev.argmin].threshold;
    return ev;
}

inline std::vector<EnergyVector> classify_batch(const MultiClassModel& model,
                                                const DiscretizedTable& t) {
    if (t.m != model.m || t.q != model.q) {
        throw ValidationError("table shape does not match the model");
    }
    std::vector<EnergyVector> out;
    out.reserve(t.n_rows);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        out.push_back(classify(model, t.symbols.data() + r * t.m));
    }
    return out;
}

// Fit one model per class present in the table. Classes train independently,
// so they run concurrently. The open-set verdict name is reserved and must
// not appear as a training label.
inline MultiClassModel fit_multiclass(const DiscretizedTable& t, double alpha) {
    if (!t.has_labels()) throw ValidationError("training requires a labeled table");
    for (const auto& label : t.label_vocab) {
        if (label == kSuspiciousLabel) {
            throw ValidationError("training data uses the reserved label '" +
                                  std::string(kSuspiciousLabel) + "'");
        }
    }
    MultiClassModel model;
    model.m = t.m;
    model.q = t.q;
    model.alpha = alpha;

    const auto groups = rows_by_class(t);
    std::vector<std::future<ClassModel>> futures;
    futures.reserve(groups.size());
    for (std::size_t c = 0; c < groups.size(); ++c) {
        futures.push_back(std::async(std::launch::async, [&t, &groups, alpha, c] {
            return fit_class(t, groups[c], alpha, t.label_vocab[c]);
        }));
    }
    model.classes.reserve(groups.size());
    for (auto& f : futures) model.classes.push_back(f.get());
    return model;
}

// Full training pipeline from raw flows: fit the preprocessor on the whole
// table, discretize, then fit per-class models.
inline MultiClassModel fit_pipeline(const RawFlowTable& raw, std::uint16_t q, double alpha) {
    PreprocessorState pre = fit_preprocessor(raw, q);
    MultiClassModel model = fit_multiclass(transform(pre, raw), alpha);
    model.preprocessor = std::move(pre);
    return model;
}

// Classify raw flows with a model that carries preprocessing state.
inline std::vector<EnergyVector> classify_raw(const MultiClassModel& model,
                                              const RawFlowTable& raw) {
    if (!model.preprocessor) {
        throw ValidationError("model carries no preprocessing state for raw flows");
    }
    return classify_batch(model, transform(*model.preprocessor, raw));
}

}  // namespace efc
