#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "efc/error.hpp"

namespace efc {

// Reserved open-set verdict. Never a trainable class.
inline constexpr std::string_view kSuspiciousLabel = "suspicious";

enum class FeatureKind { continuous, symbolic };

inline const char* to_string(FeatureKind k) {
    return k == FeatureKind::continuous ? "continuous" : "symbolic";
}

inline FeatureKind feature_kind_from_string(std::string_view s) {
    if (s == "continuous") return FeatureKind::continuous;
    if (s == "symbolic") return FeatureKind::symbolic;
    throw ConfigError("unknown feature kind: '" + std::string(s) +
                      "' (expected continuous or symbolic)");
}

struct ClassLabel {
    std::string value;
    bool is_suspicious = false;

    bool operator==(const ClassLabel&) const = default;
};

inline ClassLabel suspicious_label() { return {std::string(kSuspiciousLabel), true}; }

struct FeatureDescriptor {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;
    std::size_t position = 0;  // index among retained features, 0-based

    bool operator==(const FeatureDescriptor&) const = default;
};

// Column layout of one dataset: which columns are features (and of what
// kind), which column carries the class label, and which columns are
// discarded before any processing.
struct DatasetSchema {
    std::vector<FeatureDescriptor> features;
    std::string label_column;
    std::vector<std::string> dropped_columns;

    void validate() const {
        if (features.size() < 2) {
            throw ValidationError("schema needs at least 2 features, got " +
                                  std::to_string(features.size()));
        }
        std::unordered_set<std::string> names;
        for (std::size_t i = 0; i < features.size(); ++i) {
            const auto& f = features[i];
            if (!names.insert(f.name).second) {
                throw ValidationError("schema: duplicate feature name '" + f.name + "'");
            }
            if (f.position != i) {
                throw ValidationError("schema: feature '" + f.name +
                                      "' has position " + std::to_string(f.position) +
                                      ", expected contiguous index " + std::to_string(i));
            }
        }
        if (names.count(label_column)) {
            throw ValidationError("schema: label column '" + label_column +
                                  "' also listed as a feature");
        }
        for (const auto& d : dropped_columns) {
            if (names.count(d)) {
                throw ValidationError("schema: dropped column '" + d +
                                      "' also listed as a feature");
            }
        }
    }
};

namespace detail {

inline DatasetSchema make_schema(std::vector<std::pair<std::string, FeatureKind>> feats,
                                 std::string label, std::vector<std::string> dropped) {
    DatasetSchema s;
    s.features.reserve(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
        s.features.push_back({std::move(feats[i].first), feats[i].second, i});
    }
    s.label_column = std::move(label);
    s.dropped_columns = std::move(dropped);
    s.validate();
    return s;
}

}  // namespace detail

inline std::vector<std::string> builtin_schema_ids() { return {"cidds001", "cicids2017"}; }

// Column profiles for the two public flow datasets this tool targets.
//
// cidds001: NetFlow export, weeks 1-4 of the simulated environment. The
// identifier columns (addresses, first-seen timestamp) do not characterize
// traffic and are dropped; 'Flows' is constant 1 in this dataset and the
// remaining per-flow metadata columns are bookkeeping, so they are dropped
// too. Proto and Flags are categorical.
//
// cicids2017: bidirectional flows from CICFlowMeter. Flow ID, endpoint
// addresses and the timestamp are dropped; every retained column is numeric.
// The public CSVs repeat 'Fwd Header Length'; the duplicate occurrence is
// ingested under the suffixed name and dropped.
inline DatasetSchema builtin_schema(const std::string& dataset_id) {
    using FK = FeatureKind;
    if (dataset_id == "cidds001") {
        return detail::make_schema(
            {{"Duration", FK::continuous},
             {"Proto", FK::symbolic},
             {"Src Pt", FK::continuous},
             {"Dst Pt", FK::continuous},
             {"Packets", FK::continuous},
             {"Bytes", FK::continuous},
             {"Flags", FK::symbolic},
             {"Tos", FK::continuous}},
            "attackType",
            {"Date first seen", "Src IP Addr", "Dst IP Addr", "Flows", "class", "attackID",
             "attackDescription"});
    }
    if (dataset_id == "cicids2017") {
        std::vector<std::pair<std::string, FK>> feats;
        for (const char* name :
             {"Source Port", "Destination Port", "Protocol", "Flow Duration",
              "Total Fwd Packets", "Total Backward Packets", "Total Length of Fwd Packets",
              "Total Length of Bwd Packets", "Fwd Packet Length Max", "Fwd Packet Length Min",
              "Fwd Packet Length Mean", "Fwd Packet Length Std", "Bwd Packet Length Max",
              "Bwd Packet Length Min", "Bwd Packet Length Mean", "Bwd Packet Length Std",
              "Flow Bytes/s", "Flow Packets/s", "Flow IAT Mean", "Flow IAT Std", "Flow IAT Max",
              "Flow IAT Min", "Fwd IAT Total", "Fwd IAT Mean", "Fwd IAT Std", "Fwd IAT Max",
              "Fwd IAT Min", "Bwd IAT Total", "Bwd IAT Mean", "Bwd IAT Std", "Bwd IAT Max",
              "Bwd IAT Min", "Fwd PSH Flags", "Bwd PSH Flags", "Fwd URG Flags", "Bwd URG Flags",
              "Fwd Header Length", "Bwd Header Length", "Fwd Packets/s", "Bwd Packets/s",
              "Min Packet Length", "Max Packet Length", "Packet Length Mean", "Packet Length Std",
              "Packet Length Variance", "FIN Flag Count", "SYN Flag Count", "RST Flag Count",
              "PSH Flag Count", "ACK Flag Count", "URG Flag Count", "CWE Flag Count",
              "ECE Flag Count", "Down/Up Ratio", "Average Packet Size", "Avg Fwd Segment Size",
              "Avg Bwd Segment Size", "Fwd Avg Bytes/Bulk", "Fwd Avg Packets/Bulk",
              "Fwd Avg Bulk Rate", "Bwd Avg Bytes/Bulk", "Bwd Avg Packets/Bulk",
              "Bwd Avg Bulk Rate", "Subflow Fwd Packets", "Subflow Fwd Bytes",
              "Subflow Bwd Packets", "Subflow Bwd Bytes", "Init_Win_bytes_forward",
              "Init_Win_bytes_backward", "act_data_pkt_fwd", "min_seg_size_forward",
              "Active Mean", "Active Std", "Active Max", "Active Min", "Idle Mean", "Idle Std",
              "Idle Max", "Idle Min"}) {
            feats.emplace_back(name, FK::continuous);
        }
        return detail::make_schema(std::move(feats), "Label",
                                   {"Flow ID", "Source IP", "Destination IP", "Timestamp",
                                    "Fwd Header Length.1", "External IP"});
    }
    std::string known;
    for (const auto& id : builtin_schema_ids()) {
        if (!known.empty()) known += ", ";
        known += id;
    }
    throw ConfigError("unknown dataset profile '" + dataset_id + "'; known profiles: " + known);
}

// Sidecar format: {"features": [{"name":..., "kind":...}, ...],
//                  "label_column":..., "dropped_columns": [...]}
inline DatasetSchema schema_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("features") || !j.contains("label_column")) {
        throw ConfigError("schema sidecar must be an object with 'features' and 'label_column'");
    }
    std::vector<std::pair<std::string, FeatureKind>> feats;
    for (const auto& f : j.at("features")) {
        feats.emplace_back(f.at("name").get<std::string>(),
                           feature_kind_from_string(f.at("kind").get<std::string>()));
    }
    std::vector<std::string> dropped;
    if (j.contains("dropped_columns")) {
        dropped = j.at("dropped_columns").get<std::vector<std::string>>();
    }
    return detail::make_schema(std::move(feats), j.at("label_column").get<std::string>(),
                               std::move(dropped));
}

inline nlohmann::json schema_to_json(const DatasetSchema& s) {
    nlohmann::json feats = nlohmann::json::array();
    for (const auto& f : s.features) {
        feats.push_back({{"name", f.name}, {"kind", to_string(f.kind)}});
    }
    return {{"features", feats},
            {"label_column", s.label_column},
            {"dropped_columns", s.dropped_columns}};
}

}  // namespace efc
