#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "efc/evaluation.hpp"
#include "efc/metrics.hpp"

namespace efc {

// Scoring convention, stated in every report because the open-set verdict
// makes precision/recall ambiguous otherwise.
inline constexpr const char* kMetricsConvention =
    "suspicious verdicts count as false negatives for the flow's true class and never as false "
    "positives for any known class; intervals are 1.96 x standard error across folds (95% CI, "
    "normal approximation)";

namespace detail {

inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline std::string pm(const FoldStat& s) { return fmt3(s.mean) + " +/- " + fmt3(s.ci95); }

inline nlohmann::json stat_json(const FoldStat& s) {
    return {{"mean", s.mean}, {"stderr", s.stderr_}, {"ci95", s.ci95}};
}

inline nlohmann::json matrix_json(const ConfusionMatrix& cm) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < cm.labels.size(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c <= cm.labels.size(); ++c) row.push_back(cm.at(r, c));
        rows.push_back(std::move(row));
    }
    nlohmann::json cols = cm.labels;
    cols.push_back(std::string(kSuspiciousLabel));
    return {{"true_labels", cm.labels}, {"predicted_columns", cols}, {"counts", rows}};
}

inline std::string bar(double fraction, int width = 40) {
    const int n = std::clamp(static_cast<int>(fraction * width + 0.5), 0, width);
    return std::string(static_cast<std::size_t>(n), '#');
}

}  // namespace detail

inline nlohmann::json metrics_report_json(const MetricsReport& rep) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < rep.labels.size(); ++c) {
        std::uint64_t support = 0;
        bool degenerate = false;
        for (const auto& fold : rep.per_fold) {
            support += fold[c].support;
            degenerate = degenerate || fold[c].degenerate;
        }
        per_class.push_back({{"label", rep.labels[c]},
                             {"precision", detail::stat_json(rep.precision[c])},
                             {"recall", detail::stat_json(rep.recall[c])},
                             {"f1", detail::stat_json(rep.f1[c])},
                             {"test_support_total", support},
                             {"degenerate_in_some_fold", degenerate}});
    }
    nlohmann::json folds = nlohmann::json::array();
    for (std::size_t f = 0; f < rep.fold_matrices.size(); ++f) {
        folds.push_back({{"confusion", detail::matrix_json(rep.fold_matrices[f])},
                         {"macro_f1", rep.fold_macro_f1[f]},
                         {"weighted_f1", rep.fold_weighted_f1[f]}});
    }
    return {{"convention", kMetricsConvention},
            {"classes", per_class},
            {"macro_f1", detail::stat_json(rep.macro_f1)},
            {"weighted_f1", detail::stat_json(rep.weighted_f1)},
            {"folds", folds},
            {"flags", rep.flags}};
}

// Aligned per-class table with macro/weighted average rows.
inline std::string metrics_report_text(const MetricsReport& rep) {
    std::size_t w = std::string("Weighted average").size();
    for (const auto& l : rep.labels) w = std::max(w, l.size());

    std::string out;
    out += "Scoring convention: ";
    out += kMetricsConvention;
    out += "\n\n";
    auto row = [&](const std::string& name, const std::string& p, const std::string& r,
                   const std::string& f1) {
        out += name;
        out.append(w - name.size() + 2, ' ');
        for (const std::string* cell : {&p, &r, &f1}) {
            out += *cell;
            if (cell->size() < 18) out.append(18 - cell->size(), ' ');
        }
        out += '\n';
    };
    row("Class", "Precision", "Recall", "F1");
    for (std::size_t c = 0; c < rep.labels.size(); ++c) {
        row(rep.labels[c], detail::pm(rep.precision[c]), detail::pm(rep.recall[c]),
            detail::pm(rep.f1[c]));
    }
    row("Macro average", "", "", detail::pm(rep.macro_f1));
    row("Weighted average", "", "", detail::pm(rep.weighted_f1));
    for (const auto& flag : rep.flags) {
        out += "note: ";
        out += flag;
        out += '\n';
    }
    return out;
}

inline nlohmann::json unknown_report_json(const UnknownExperimentReport& rep) {
    return {{"convention", kMetricsConvention},
            {"withheld", rep.withheld},
            {"benign", rep.benign},
            {"test_predictions", rep.n},
            {"counts",
             {{"benign", rep.as_benign},
              {"other_known", rep.as_other},
              {"suspicious", rep.as_suspicious}}},
            {"fractions",
             {{"benign", rep.frac_benign},
              {"other_known", rep.frac_other},
              {"suspicious", rep.frac_suspicious}}}};
}

// Per-destination fractions as text bars.
inline std::string unknown_report_text(const UnknownExperimentReport& rep) {
    std::string out;
    out += "Withheld from training: " + rep.withheld + "  (" + std::to_string(rep.n) +
           " test predictions)\n";
    auto line = [&](const std::string& name, double frac) {
        out += "  ";
        out += name;
        out.append(14 - name.size(), ' ');
        out += detail::fmt3(frac);
        out += "  ";
        out += detail::bar(frac);
        out += '\n';
    };
    line("benign", rep.frac_benign);
    line("other known", rep.frac_other);
    line("suspicious", rep.frac_suspicious);
    return out;
}

}  // namespace efc
