#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "efc/classifier.hpp"
#include "efc/error.hpp"
#include "efc/schema.hpp"
#include "efc/version.hpp"

namespace efc {

// CRC-32 (reflected polynomial 0xEDB88320), the checksum zlib and PNG use.
inline std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (is.bad()) throw IoError("read failed for '" + path + "'");
    return bytes;
}

// Write via a temp file in the same directory, then rename into place, so a
// crash never leaves a half-written file under the target name.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open '" + tmp + "' for writing");
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        os.flush();
        if (!os.good()) throw IoError("write failed for '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot move '" + tmp + "' to '" + path + "'");
    }
}

inline std::uint32_t file_crc32(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    return crc32(bytes.data(), bytes.size());
}

// Training provenance carried in the model header alongside the model itself.
struct ModelInfo {
    std::uint64_t seed = 0;
    std::size_t cap = 0;
    std::string tool_version = kVersion;
};

namespace detail {

inline constexpr char kModelMagic[8] = {'E', 'F', 'C', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

inline void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void put_u64le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64le(std::string& out, double v) {
    put_u64le(out, std::bit_cast<std::uint64_t>(v));
}

struct ByteReader {
    const std::string& bytes;
    std::size_t pos = 0;

    std::uint32_t u32le() {
        check(4, "integer");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }
    std::uint64_t u64le() {
        check(8, "integer");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    double f64le() { return std::bit_cast<double>(u64le()); }
    void f64le_array(std::vector<double>& out, std::size_t count, const std::string& field) {
        check(count * 8, field);
        out.resize(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = f64le();
    }
    void check(std::size_t need, const std::string& field) {
        if (pos + need > bytes.size()) {
            throw ValidationError("model file truncated while reading " + field);
        }
    }
};

inline nlohmann::json preprocessor_header(const PreprocessorState& pre) {
    nlohmann::json j;
    j["schema"] = schema_to_json(pre.schema);
    j["q"] = pre.q;
    nlohmann::json feats = nlohmann::json::array();
    for (std::size_t k = 0; k < pre.schema.features.size(); ++k) {
        if (pre.schema.features[k].kind == FeatureKind::continuous) {
            feats.push_back({{"edges", pre.continuous[k].edges.size()}});
        } else {
            feats.push_back({{"vocab", pre.symbolic[k].vocab}});
        }
    }
    j["features"] = std::move(feats);
    return j;
}

}  // namespace detail

// Layout: magic, format version (u32), header length (u64), structured-text
// header, numeric payload (little-endian f64: preprocessor scales and edges,
// then per class threshold, energy summary, fields, couplings), CRC-32 of
// everything before it.
inline std::string serialize_model(const MultiClassModel& model, const ModelInfo& info) {
    if (model.classes.empty()) throw ValidationError("refusing to save a model with no classes");
    for (const auto& c : model.classes) {
        if (c.m != model.m || c.q != model.q) {
            throw ValidationError("class '" + c.label + "' does not match the model dimensions");
        }
    }

    nlohmann::json header;
    header["m"] = model.m;
    header["q"] = model.q;
    header["alpha"] = model.alpha;
    // regularization convention, recorded so alternate conventions can be
    // told apart when comparing models
    header["pseudocount_convention"] =
        "f_i = (1-alpha)*empirical + alpha/q; f_ij = (1-alpha)*empirical + alpha/q^2 (i != j); "
        "f_ii(a,b) = f_i(a)*[a==b]";
    header["cap"] = info.cap;
    header["seed"] = info.seed;
    header["tool_version"] = info.tool_version;
    header["preprocessor"] =
        model.preprocessor ? detail::preprocessor_header(*model.preprocessor) : nlohmann::json();
    {
        nlohmann::json classes = nlohmann::json::array();
        for (const auto& c : model.classes) classes.push_back({{"label", c.label}});
        header["classes"] = std::move(classes);
    }
    const std::string header_text =
        header.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);

    std::string out(detail::kModelMagic, sizeof(detail::kModelMagic));
    detail::put_u32le(out, detail::kModelFormatVersion);
    detail::put_u64le(out, header_text.size());
    out += header_text;

    if (model.preprocessor) {
        const auto& pre = *model.preprocessor;
        for (std::size_t k = 0; k < pre.schema.features.size(); ++k) {
            if (pre.schema.features[k].kind != FeatureKind::continuous) continue;
            detail::put_f64le(out, pre.continuous[k].scale);
            for (double e : pre.continuous[k].edges) detail::put_f64le(out, e);
        }
    }
    for (const auto& c : model.classes) {
        detail::put_f64le(out, c.threshold);
        detail::put_f64le(out, c.train_energy.min);
        detail::put_f64le(out, c.train_energy.median);
        detail::put_f64le(out, c.train_energy.p95);
        detail::put_f64le(out, c.train_energy.max);
        for (double v : c.fields) detail::put_f64le(out, v);
        for (double v : c.couplings) detail::put_f64le(out, v);
    }

    detail::put_u32le(out, crc32(out.data(), out.size()));
    return out;
}

inline void save_model(const MultiClassModel& model, const std::string& path,
                       const ModelInfo& info = {}) {
    write_file_atomic(path, serialize_model(model, info));
}

inline MultiClassModel deserialize_model(const std::string& bytes, ModelInfo* info = nullptr) {
    // integrity gates first: magic, format version, checksum; only then the
    // header is trusted enough to parse
    if (bytes.size() < sizeof(detail::kModelMagic) + 4 + 8 + 4) {
        throw ValidationError("model file too short to contain a checksum");
    }
    if (std::memcmp(bytes.data(), detail::kModelMagic, sizeof(detail::kModelMagic)) != 0) {
        throw ValidationError("not a model file (bad magic)");
    }
    detail::ByteReader r{bytes, sizeof(detail::kModelMagic)};
    const std::uint32_t version = r.u32le();
    if (version != detail::kModelFormatVersion) {
        throw ValidationError("unsupported model format version " + std::to_string(version) +
                              ", expected " + std::to_string(detail::kModelFormatVersion));
    }
    {
        detail::ByteReader tail{bytes, bytes.size() - 4};
        const std::uint32_t stored = tail.u32le();
        const std::uint32_t actual = crc32(bytes.data(), bytes.size() - 4);
        if (stored != actual) {
            throw ValidationError("model file checksum mismatch (file corrupt or truncated)");
        }
    }

    const std::uint64_t header_len = r.u64le();
    r.check(header_len, "header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(r.pos, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("model header is not valid structured text: ") +
                              e.what());
    }
    r.pos += header_len;

    MultiClassModel model;
    ModelInfo local;
    try {
        model.m = header.at("m").get<std::size_t>();
        model.q = header.at("q").get<std::uint16_t>();
        model.alpha = header.at("alpha").get<double>();
        local.cap = header.at("cap").get<std::size_t>();
        local.seed = header.at("seed").get<std::uint64_t>();
        local.tool_version = header.at("tool_version").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("model header field missing or mistyped: ") + e.what());
    }
    if (model.m < 2) throw ValidationError("model header: m must be at least 2");
    if (model.q < 2) throw ValidationError("model header: q must be at least 2");

    if (!header.at("preprocessor").is_null()) {
        const auto& pj = header.at("preprocessor");
        PreprocessorState pre;
        try {
            pre.schema = schema_from_json(pj.at("schema"));
            pre.q = pj.at("q").get<std::uint16_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("model header preprocessor: ") + e.what());
        }
        if (pre.q != model.q) {
            throw ValidationError("model header: preprocessor q disagrees with model q");
        }
        if (pre.schema.features.size() != model.m) {
            throw ValidationError("model header: preprocessor feature count (" +
                                  std::to_string(pre.schema.features.size()) +
                                  ") disagrees with m (" + std::to_string(model.m) + ")");
        }
        const auto& feats = pj.at("features");
        if (!feats.is_array() || feats.size() != model.m) {
            throw ValidationError("model header: preprocessor feature state count mismatch");
        }
        pre.continuous.resize(model.m);
        pre.symbolic.resize(model.m);
        for (std::size_t k = 0; k < model.m; ++k) {
            const bool is_cont = pre.schema.features[k].kind == FeatureKind::continuous;
            if (is_cont != feats[k].contains("edges")) {
                throw ValidationError("model header: feature '" + pre.schema.features[k].name +
                                      "' state does not match its declared kind");
            }
            if (is_cont) {
                const auto n_edges = feats[k].at("edges").get<std::size_t>();
                if (n_edges >= model.q) {
                    throw ValidationError("model header: feature '" +
                                          pre.schema.features[k].name + "' declares " +
                                          std::to_string(n_edges) + " edges, limit is q-1");
                }
                pre.continuous[k].scale = r.f64le();
                r.f64le_array(pre.continuous[k].edges, n_edges,
                              "edges of feature '" + pre.schema.features[k].name + "'");
                if (pre.continuous[k].scale <= 0.0) {
                    throw ValidationError("model header: feature '" +
                                          pre.schema.features[k].name +
                                          "' has a non-positive scale");
                }
                for (std::size_t e = 1; e < pre.continuous[k].edges.size(); ++e) {
                    if (!(pre.continuous[k].edges[e - 1] < pre.continuous[k].edges[e])) {
                        throw ValidationError("model file: edges of feature '" +
                                              pre.schema.features[k].name +
                                              "' are not strictly increasing");
                    }
                }
            } else {
                pre.symbolic[k].vocab = feats[k].at("vocab").get<std::vector<std::string>>();
            }
        }
        model.preprocessor = std::move(pre);
    }

    const auto& classes = header.at("classes");
    if (!classes.is_array() || classes.empty()) {
        throw ValidationError("model header: class list missing or empty");
    }
    const std::size_t d = model.m * (model.q - 1u);
    for (const auto& cj : classes) {
        ClassModel c;
        c.label = cj.at("label").get<std::string>();
        if (c.label.empty() || c.label == kSuspiciousLabel) {
            throw ValidationError("model header: invalid class label '" + c.label + "'");
        }
        for (const auto& prev : model.classes) {
            if (prev.label == c.label) {
                throw ValidationError("model header: duplicate class label '" + c.label + "'");
            }
        }
        c.m = model.m;
        c.q = model.q;
        c.threshold = r.f64le();
        c.train_energy.min = r.f64le();
        c.train_energy.median = r.f64le();
        c.train_energy.p95 = r.f64le();
        c.train_energy.max = r.f64le();
        r.f64le_array(c.fields, model.m * model.q, "fields of class '" + c.label + "'");
        r.f64le_array(c.couplings, d * d, "couplings of class '" + c.label + "'");
        model.classes.push_back(std::move(c));
    }

    if (r.pos != bytes.size() - 4) {
        throw ValidationError("model file has " + std::to_string(bytes.size() - 4 - r.pos) +
                              " unexpected trailing payload bytes");
    }
    if (info) *info = std::move(local);
    return model;
}

inline MultiClassModel load_model(const std::string& path, ModelInfo* info = nullptr) {
    return deserialize_model(read_file_bytes(path), info);
}

// Run manifest: deterministic structured text (sorted keys, no timestamps)
// written beside every output so a run can be replayed exactly.
inline void write_manifest(const std::string& path, const nlohmann::json& manifest) {
    std::string text = manifest.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
    text += '\n';
    write_file_atomic(path, text);
}

}  // namespace efc
