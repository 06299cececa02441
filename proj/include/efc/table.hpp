#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "efc/csv.hpp"
#include "efc/error.hpp"
#include "efc/schema.hpp"

namespace efc {

// Ingested dataset, column major. For feature k exactly one of
// numeric[k] / symbolic[k] is populated, matching schema.features[k].kind.
struct RawFlowTable {
    DatasetSchema schema;
    std::size_t n_rows = 0;
    std::vector<std::vector<double>> numeric;
    std::vector<std::vector<std::string>> symbolic;
    std::vector<std::string> labels;  // empty when ingested without a label column

    bool has_labels() const { return !labels.empty(); }
};

struct IngestOptions {
    bool clip_nonfinite = false;  // replace inf/nan cells with the column's finite max
    bool require_label = true;    // demand the schema's label column in the file
};

struct IngestStats {
    std::size_t rows_ingested = 0;
    std::vector<std::string> columns_dropped;  // file columns not used as feature or label
    std::size_t nonfinite_clipped = 0;
    std::size_t suffixed_numbers = 0;  // cells parsed via a K/M/G/T magnitude suffix
};

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Numeric cell grammar: a double, optionally followed by a decimal magnitude
// suffix (K/M/G/T, optional space before it). Textual infinities and NaN are
// accepted as non-finite values so the clip option can handle them.
// Returns false when the cell is not numeric at all.
inline bool parse_numeric_cell(std::string_view cell, double& value, bool& suffixed) {
    suffixed = false;
    if (cell.empty()) return false;
    const std::string low = lower(cell);
    if (low == "inf" || low == "+inf" || low == "infinity" || low == "+infinity") {
        value = std::numeric_limits<double>::infinity();
        return true;
    }
    if (low == "-inf" || low == "-infinity") {
        value = -std::numeric_limits<double>::infinity();
        return true;
    }
    if (low == "nan" || low == "-nan" || low == "+nan") {
        value = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (*first == '+') ++first;  // from_chars rejects a leading plus
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc::result_out_of_range) {
        // magnitude overflow, keep the sign and let the caller clip or reject
        value = (*first == '-') ? -std::numeric_limits<double>::infinity()
                                : std::numeric_limits<double>::infinity();
        while (ptr != last && (std::isdigit(static_cast<unsigned char>(*ptr)) || *ptr == '.' ||
                               *ptr == 'e' || *ptr == 'E' || *ptr == '+' || *ptr == '-')) {
            ++ptr;
        }
        return ptr == last;
    }
    if (ec != std::errc()) return false;
    if (ptr == last) {
        value = v;
        return true;
    }
    std::string_view rest(ptr, static_cast<std::size_t>(last - ptr));
    if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
    if (rest.size() != 1) return false;
    double mult = 0.0;
    switch (std::tolower(static_cast<unsigned char>(rest.front()))) {
        case 'k': mult = 1e3; break;
        case 'm': mult = 1e6; break;
        case 'g': mult = 1e9; break;
        case 't': mult = 1e12; break;
        default: return false;
    }
    value = v * mult;
    suffixed = true;
    return true;
}

// Trim every header cell and disambiguate repeats as Name.1, Name.2, ...
inline std::vector<std::string> normalize_header(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    out.reserve(raw.size());
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& cell : raw) {
        std::string name(csv::trim(cell));
        auto [it, fresh] = seen.try_emplace(name, 0);
        if (!fresh) {
            ++it->second;
            name += "." + std::to_string(it->second);
        }
        out.push_back(std::move(name));
    }
    return out;
}

[[noreturn]] inline void cell_error(std::size_t row, const std::string& column,
                                    const std::string& what, std::string_view cell) {
    throw ValidationError("row " + std::to_string(row) + ", column '" + column + "': " + what +
                          " ('" + std::string(cell) + "')");
}

}  // namespace detail

// Parse a CSV document against a schema. Feature and label columns are
// located by header name (after trimming); any other file column is dropped
// and recorded in the stats. Rows are reported 1-based, counting data rows.
inline RawFlowTable ingest_csv(const csv::Document& doc, const DatasetSchema& schema,
                               const IngestOptions& opts = {}, IngestStats* stats = nullptr) {
    schema.validate();
    if (doc.header.empty()) throw ValidationError("input has no header row");

    const std::vector<std::string> header = detail::normalize_header(doc.header);
    std::unordered_map<std::string, std::size_t> col_of;
    for (std::size_t c = 0; c < header.size(); ++c) col_of.emplace(header[c], c);

    const std::size_t m = schema.features.size();
    std::vector<std::size_t> feat_col(m);
    for (std::size_t k = 0; k < m; ++k) {
        auto it = col_of.find(schema.features[k].name);
        if (it == col_of.end()) {
            throw ValidationError("input is missing feature column '" + schema.features[k].name +
                                  "'");
        }
        feat_col[k] = it->second;
    }
    auto label_it = col_of.find(schema.label_column);
    const bool have_label = label_it != col_of.end();
    if (opts.require_label && !have_label) {
        throw ValidationError("input is missing label column '" + schema.label_column + "'");
    }

    IngestStats local;
    std::vector<bool> used(header.size(), false);
    for (std::size_t c : feat_col) used[c] = true;
    if (have_label) used[label_it->second] = true;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (!used[c]) local.columns_dropped.push_back(header[c]);
    }

    RawFlowTable t;
    t.schema = schema;
    t.n_rows = doc.rows.size();
    t.numeric.resize(m);
    t.symbolic.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        if (schema.features[k].kind == FeatureKind::continuous) {
            t.numeric[k].reserve(t.n_rows);
        } else {
            t.symbolic[k].reserve(t.n_rows);
        }
    }
    if (have_label) t.labels.reserve(t.n_rows);

    // nonfinite cells to patch after the column maxima are known
    std::vector<std::pair<std::size_t, std::size_t>> pending;  // (feature, row)

    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        const auto& row = doc.rows[r];
        const std::size_t rowno = r + 1;
        if (row.size() != header.size()) {
            throw ValidationError("row " + std::to_string(rowno) + ": has " +
                                  std::to_string(row.size()) + " cells, header has " +
                                  std::to_string(header.size()));
        }
        for (std::size_t k = 0; k < m; ++k) {
            const std::string_view cell = csv::trim(row[feat_col[k]]);
            const std::string& colname = schema.features[k].name;
            if (cell.empty()) detail::cell_error(rowno, colname, "missing value", cell);
            if (schema.features[k].kind == FeatureKind::symbolic) {
                t.symbolic[k].emplace_back(cell);
                continue;
            }
            double v = 0.0;
            bool suffixed = false;
            if (!detail::parse_numeric_cell(cell, v, suffixed)) {
                detail::cell_error(rowno, colname, "not a number", cell);
            }
            if (suffixed) ++local.suffixed_numbers;
            if (!std::isfinite(v)) {
                if (!opts.clip_nonfinite) {
                    detail::cell_error(rowno, colname,
                                       "non-finite value (rerun with clipping to accept)", cell);
                }
                pending.emplace_back(k, r);
                ++local.nonfinite_clipped;
            }
            t.numeric[k].push_back(v);
        }
        if (have_label) {
            const std::string_view cell = csv::trim(row[label_it->second]);
            if (cell.empty()) {
                detail::cell_error(rowno, schema.label_column, "missing label", cell);
            }
            t.labels.emplace_back(cell);
        }
    }

    if (!pending.empty()) {
        std::vector<double> col_max(m, 0.0);
        std::vector<bool> col_has(m, false);
        for (std::size_t k = 0; k < m; ++k) {
            for (double v : t.numeric[k]) {
                if (!std::isfinite(v)) continue;
                if (!col_has[k] || v > col_max[k]) {
                    col_max[k] = v;
                    col_has[k] = true;
                }
            }
        }
        for (auto [k, r] : pending) {
            if (!col_has[k]) {
                throw ValidationError("column '" + t.schema.features[k].name +
                                      "' has no finite value to clip to");
            }
            t.numeric[k][r] = col_max[k];
        }
    }

    local.rows_ingested = t.n_rows;
    if (stats) *stats = std::move(local);
    return t;
}

inline RawFlowTable ingest_csv_file(const std::string& path, const DatasetSchema& schema,
                                    const IngestOptions& opts = {}, IngestStats* stats = nullptr) {
    return ingest_csv(csv::read_file(path), schema, opts, stats);
}

// Row subset in the given order. Labels follow when present.
inline RawFlowTable select_rows(const RawFlowTable& t, const std::vector<std::size_t>& rows) {
    RawFlowTable out;
    out.schema = t.schema;
    out.n_rows = rows.size();
    const std::size_t m = t.schema.features.size();
    out.numeric.resize(m);
    out.symbolic.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        if (t.schema.features[k].kind == FeatureKind::continuous) {
            out.numeric[k].reserve(rows.size());
            for (std::size_t r : rows) out.numeric[k].push_back(t.numeric[k].at(r));
        } else {
            out.symbolic[k].reserve(rows.size());
            for (std::size_t r : rows) out.symbolic[k].push_back(t.symbolic[k].at(r));
        }
    }
    if (t.has_labels()) {
        out.labels.reserve(rows.size());
        for (std::size_t r : rows) out.labels.push_back(t.labels.at(r));
    }
    return out;
}

// Relabel every row whose label is in `sources` to `target`. Each source
// must actually occur; row count and order are untouched. A self-merge
// (target among sources) is a no-op for those rows.
inline std::size_t merge_labels(RawFlowTable& t, const std::vector<std::string>& sources,
                                const std::string& target) {
    std::unordered_set<std::string> present(t.labels.begin(), t.labels.end());
    std::unordered_set<std::string> from;
    for (const auto& s : sources) {
        if (!present.count(s)) {
            throw ValidationError("merge source label '" + s + "' not present in the table");
        }
        from.insert(s);
    }
    std::size_t changed = 0;
    for (auto& l : t.labels) {
        if (from.count(l) && l != target) {
            l = target;
            ++changed;
        }
    }
    return changed;
}

inline void emit_csv(const RawFlowTable& t, std::ostream& os) {
    std::vector<std::string> header;
    for (const auto& f : t.schema.features) header.push_back(f.name);
    if (t.has_labels()) header.push_back(t.schema.label_column);
    csv::write_row(os, header);
    std::vector<std::string> row(header.size());
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        for (std::size_t k = 0; k < t.schema.features.size(); ++k) {
            row[k] = t.schema.features[k].kind == FeatureKind::continuous
                         ? csv::format_double(t.numeric[k][r])
                         : t.symbolic[k][r];
        }
        if (t.has_labels()) row.back() = t.labels[r];
        csv::write_row(os, row);
    }
}

inline void emit_csv_file(const RawFlowTable& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    emit_csv(t, os);
    if (!os.good()) throw IoError("write failed for '" + path + "'");
}

}  // namespace efc
