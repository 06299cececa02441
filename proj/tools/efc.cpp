// Command-line front end: train, predict, evaluate, unknown, synth.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <efc/efc.hpp>

namespace {

using nlohmann::json;

struct CommonArgs {
    std::string input;
    std::string schema;
    std::uint16_t bins = 30;
    double alpha = 0.5;
    std::size_t cap = 0;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    bool clip_nonfinite = false;
    std::vector<std::string> merges;
};

std::string crc_hex(std::uint32_t crc) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", crc);
    return buf;
}

json input_entry(const std::string& path) {
    const std::string bytes = efc::read_file_bytes(path);
    return {{"path", path},
            {"bytes", bytes.size()},
            {"crc32", crc_hex(efc::crc32(bytes.data(), bytes.size()))}};
}

json stats_json(const efc::IngestStats& stats) {
    return {{"rows_ingested", stats.rows_ingested},
            {"columns_dropped", stats.columns_dropped},
            {"nonfinite_clipped", stats.nonfinite_clipped},
            {"suffixed_numbers", stats.suffixed_numbers}};
}

efc::DatasetSchema resolve_schema(const std::string& value) {
    for (const auto& id : efc::builtin_schema_ids()) {
        if (value == id) return efc::builtin_schema(id);
    }
    std::ifstream probe(value);
    if (!probe.good()) {
        std::string known;
        for (const auto& id : efc::builtin_schema_ids()) {
            if (!known.empty()) known += ", ";
            known += id;
        }
        throw efc::ConfigError("--schema '" + value + "' is neither a builtin profile (" + known +
                               ") nor a readable sidecar file");
    }
    json j;
    try {
        j = json::parse(efc::read_file_bytes(value));
    } catch (const json::exception& e) {
        throw efc::ConfigError("schema sidecar '" + value + "': " + e.what());
    }
    return efc::schema_from_json(j);
}

struct MergeGroup {
    std::string target;
    std::vector<std::string> sources;
};

// --merge "Target=Src1|Src2": relabel sources to the target before anything
// else sees the labels.
std::vector<MergeGroup> parse_merges(const std::vector<std::string>& specs) {
    std::vector<MergeGroup> groups;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
            throw efc::ConfigError("--merge expects Target=Src1|Src2, got '" + s + "'");
        }
        MergeGroup g;
        g.target = s.substr(0, eq);
        std::size_t start = eq + 1;
        while (start <= s.size()) {
            const auto bar = s.find('|', start);
            const std::string src =
                s.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
            if (src.empty()) throw efc::ConfigError("--merge has an empty source in '" + s + "'");
            g.sources.push_back(src);
            if (bar == std::string::npos) break;
            start = bar + 1;
        }
        groups.push_back(std::move(g));
    }
    return groups;
}

efc::RawFlowTable load_table(const CommonArgs& args, bool require_label,
                             efc::IngestStats* stats) {
    const efc::DatasetSchema schema = resolve_schema(args.schema);
    efc::IngestOptions opts;
    opts.clip_nonfinite = args.clip_nonfinite;
    opts.require_label = require_label;
    efc::RawFlowTable t = efc::ingest_csv_file(args.input, schema, opts, stats);
    for (const auto& g : parse_merges(args.merges)) {
        efc::merge_labels(t, g.sources, g.target);
    }
    return t;
}

json common_flags_json(const CommonArgs& args) {
    return {{"input", args.input},       {"schema", args.schema},
            {"bins", args.bins},         {"alpha", args.alpha},
            {"cap", args.cap},           {"folds", args.folds},
            {"seed", args.seed},         {"clip_nonfinite", args.clip_nonfinite},
            {"merge", args.merges}};
}

json manifest_skeleton(const std::string& subcommand) {
    return {{"tool", "efc"},
            {"tool_version", efc::kVersion},
            {"subcommand", subcommand}};
}

std::string sanitize_for_filename(const std::string& label) {
    std::string out;
    for (char c : label) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '.';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? "_" : out;
}

int cmd_train(const CommonArgs& args, const std::string& model_path) {
    efc::IngestStats stats;
    const efc::RawFlowTable raw = load_table(args, true, &stats);

    const auto t0 = std::chrono::steady_clock::now();
    efc::PreprocessorState pre = efc::fit_preprocessor(raw, args.bins);
    efc::DiscretizedTable table = efc::transform(pre, raw);
    table = efc::undersample(table, args.cap, args.seed);
    efc::MultiClassModel model = efc::fit_multiclass(table, args.alpha);
    model.preprocessor = std::move(pre);
    const double total_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    efc::ModelInfo info;
    info.seed = args.seed;
    info.cap = args.cap;
    efc::save_model(model, model_path, info);

    const auto groups = efc::rows_by_class(table);
    std::printf("%-24s %10s %14s %10s\n", "class", "flows", "threshold", "fit_sec");
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        std::printf("%-24s %10zu %14.6f %10.3f\n", model.classes[c].label.c_str(),
                    groups[c].size(), model.classes[c].threshold,
                    model.classes[c].fit_seconds);
    }
    std::printf("trained %zu classes in %.3f s; wrote %s\n", model.classes.size(), total_s,
                model_path.c_str());

    json manifest = manifest_skeleton("train");
    manifest["flags"] = common_flags_json(args);
    manifest["flags"]["model"] = model_path;
    manifest["inputs"] = json::array({input_entry(args.input)});
    manifest["ingest"] = stats_json(stats);
    manifest["outputs"] = json::array({model_path});
    efc::write_manifest(model_path + ".manifest.json", manifest);
    return 0;
}

int cmd_predict(const std::string& input, const std::string& model_path, const std::string& out,
                bool emit_energies, bool clip_nonfinite) {
    const efc::MultiClassModel model = efc::load_model(model_path);
    if (!model.preprocessor) {
        throw efc::ValidationError("model '" + model_path + "' carries no preprocessing state");
    }
    efc::IngestOptions opts;
    opts.clip_nonfinite = clip_nonfinite;
    opts.require_label = false;
    efc::IngestStats stats;
    const efc::RawFlowTable raw =
        efc::ingest_csv_file(input, model.preprocessor->schema, opts, &stats);
    const efc::DiscretizedTable table = efc::transform(*model.preprocessor, raw);
    const std::vector<efc::EnergyVector> preds = efc::classify_batch(model, table);

    std::ostringstream os;
    std::vector<std::string> row{"verdict", "energy", "argmin_class"};
    if (emit_energies) {
        for (const auto& c : model.classes) row.push_back("energy_" + c.label);
    }
    efc::csv::write_row(os, row);
    for (const auto& p : preds) {
        row.clear();
        row.push_back(efc::verdict_label(model, p));
        row.push_back(efc::csv::format_double(p.energies[p.argmin]));
        row.push_back(model.classes[p.argmin].label);
        if (emit_energies) {
            for (double e : p.energies) row.push_back(efc::csv::format_double(e));
        }
        efc::csv::write_row(os, row);
    }
    efc::write_file_atomic(out, os.str());
    std::printf("classified %zu flows; wrote %s\n", preds.size(), out.c_str());

    json manifest = manifest_skeleton("predict");
    manifest["flags"] = {{"input", input},
                         {"model", model_path},
                         {"out", out},
                         {"emit_energies", emit_energies},
                         {"clip_nonfinite", clip_nonfinite}};
    manifest["inputs"] = json::array({input_entry(input), input_entry(model_path)});
    manifest["ingest"] = stats_json(stats);
    manifest["outputs"] = json::array({out});
    efc::write_manifest(out + ".manifest.json", manifest);
    return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& out) {
    efc::IngestStats stats;
    const efc::RawFlowTable raw = load_table(args, true, &stats);

    efc::CvOptions opt;
    opt.k = args.folds;
    opt.q = args.bins;
    opt.alpha = args.alpha;
    opt.cap = args.cap;
    opt.seed = args.seed;
    const efc::MetricsReport rep = efc::cross_validate(raw, opt);

    const std::string text = efc::metrics_report_text(rep);
    std::fputs(text.c_str(), stdout);
    efc::write_file_atomic(out, efc::metrics_report_json(rep).dump(2) + "\n");
    efc::write_file_atomic(out + ".txt", text);

    json manifest = manifest_skeleton("evaluate");
    manifest["flags"] = common_flags_json(args);
    manifest["flags"]["out"] = out;
    manifest["inputs"] = json::array({input_entry(args.input)});
    manifest["ingest"] = stats_json(stats);
    manifest["outputs"] = json::array({out, out + ".txt"});
    efc::write_manifest(out + ".manifest.json", manifest);
    return 0;
}

int cmd_unknown(const CommonArgs& args, const std::string& out_base, const std::string& benign,
                const std::string& withheld) {
    efc::IngestStats stats;
    const efc::RawFlowTable raw = load_table(args, true, &stats);

    std::vector<std::string> targets;
    if (!withheld.empty()) {
        targets.push_back(withheld);
    } else {
        std::set<std::string> labels(raw.labels.begin(), raw.labels.end());
        for (const auto& l : labels) {
            if (l != benign) targets.push_back(l);
        }
        if (targets.empty()) {
            throw efc::ValidationError("no class other than '" + benign + "' to withhold");
        }
    }

    efc::CvOptions opt;
    opt.k = args.folds;
    opt.q = args.bins;
    opt.alpha = args.alpha;
    opt.cap = args.cap;
    opt.seed = args.seed;

    json outputs = json::array();
    for (const auto& target : targets) {
        const efc::UnknownExperimentReport rep =
            efc::unknown_attack_experiment(raw, target, benign, opt);
        const std::string text = efc::unknown_report_text(rep);
        std::fputs(text.c_str(), stdout);
        const std::string path = out_base + "_" + sanitize_for_filename(target) + ".json";
        efc::write_file_atomic(path, efc::unknown_report_json(rep).dump(2) + "\n");
        efc::write_file_atomic(path + ".txt", text);
        outputs.push_back(path);
        outputs.push_back(path + ".txt");
    }

    json manifest = manifest_skeleton("unknown");
    manifest["flags"] = common_flags_json(args);
    manifest["flags"]["out"] = out_base;
    manifest["flags"]["benign"] = benign;
    manifest["flags"]["withheld"] = withheld.empty() ? json() : json(withheld);
    manifest["inputs"] = json::array({input_entry(args.input)});
    manifest["ingest"] = stats_json(stats);
    manifest["outputs"] = outputs;
    efc::write_manifest(out_base + ".manifest.json", manifest);
    return 0;
}

int cmd_synth(const std::string& input, const std::string& out) {
    json j;
    try {
        j = json::parse(efc::read_file_bytes(input));
    } catch (const json::exception& e) {
        throw efc::ConfigError("synthetic spec '" + input + "': " + e.what());
    }
    const std::string mode = j.value("mode", std::string("discrete"));
    const efc::SyntheticSpec spec = efc::synthetic_spec_from_json(j);

    if (mode == "continuous") {
        const efc::RawFlowTable t = efc::generate_continuous(spec);
        std::ostringstream os;
        efc::emit_csv(t, os);
        efc::write_file_atomic(out, os.str());
        std::printf("generated %zu continuous flows; wrote %s\n", t.n_rows, out.c_str());
    } else if (mode == "discrete") {
        const efc::DiscretizedTable t = efc::generate(spec);
        std::ostringstream os;
        std::vector<std::string> row;
        for (std::size_t i = 0; i < t.m; ++i) row.push_back("f" + std::to_string(i));
        row.push_back("label");
        efc::csv::write_row(os, row);
        for (std::size_t r = 0; r < t.n_rows; ++r) {
            row.clear();
            for (std::size_t i = 0; i < t.m; ++i) row.push_back(std::to_string(t.at(r, i)));
            row.push_back(t.label(r));
            efc::csv::write_row(os, row);
        }
        efc::write_file_atomic(out, os.str());
        std::printf("generated %zu discretized flows; wrote %s\n", t.n_rows, out.c_str());
    } else {
        throw efc::ConfigError("synthetic spec mode must be 'discrete' or 'continuous', got '" +
                               mode + "'");
    }

    json manifest = manifest_skeleton("synth");
    manifest["flags"] = {{"input", input}, {"out", out}};
    manifest["inputs"] = json::array({input_entry(input)});
    manifest["outputs"] = json::array({out});
    efc::write_manifest(out + ".manifest.json", manifest);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"energy-based flow classifier"};
    app.require_subcommand(1);
    app.set_version_flag("--version", efc::kVersion);

    CommonArgs args;
    std::string model_path;
    std::string out;
    std::string benign = "normal";
    std::string withheld;
    bool emit_energies = false;

    auto add_common = [&](CLI::App* cmd, bool with_folds) {
        cmd->add_option("--input", args.input, "input CSV")->required();
        cmd->add_option("--schema", args.schema, "builtin profile name or schema sidecar path")
            ->required();
        cmd->add_option("--bins", args.bins, "discretization bins (default 30)");
        cmd->add_option("--alpha", args.alpha, "pseudocount weight (default 0.5)");
        cmd->add_option("--cap", args.cap, "per-class undersampling cap (0 = uncapped)");
        if (with_folds) cmd->add_option("--folds", args.folds, "fold count (default 5)");
        cmd->add_option("--seed", args.seed, "seed for all randomness");
        cmd->add_flag("--clip-nonfinite", args.clip_nonfinite,
                      "replace non-finite cells with the column's finite max");
        cmd->add_option("--merge", args.merges,
                        "relabel classes, e.g. --merge \"Target=Src1|Src2\" (repeatable)");
    };

    CLI::App* train = app.add_subcommand("train", "fit per-class models and save them");
    add_common(train, false);
    train->add_option("--model", model_path, "output model file")->required();

    CLI::App* predict = app.add_subcommand("predict", "classify flows with a saved model");
    predict->add_option("--input", args.input, "input CSV")->required();
    predict->add_option("--model", model_path, "model file")->required();
    predict->add_option("--out", out, "output predictions CSV")->required();
    predict->add_flag("--emit-energies", emit_energies, "also write per-class energies");
    predict->add_flag("--clip-nonfinite", args.clip_nonfinite,
                      "replace non-finite cells with the column's finite max");

    CLI::App* evaluate = app.add_subcommand("evaluate", "stratified k-fold cross-validation");
    add_common(evaluate, true);
    evaluate->add_option("--out", out, "output report (structured text)")->required();

    CLI::App* unknown = app.add_subcommand(
        "unknown", "withhold attack classes from training, track their verdicts");
    add_common(unknown, true);
    unknown->add_option("--out", out, "output report base path")->required();
    unknown->add_option("--benign", benign, "benign class label (default 'normal')");
    unknown->add_option("--withheld", withheld,
                        "withhold only this class (default: each non-benign class in turn)");

    CLI::App* synth = app.add_subcommand("synth", "generate synthetic flows from a spec file");
    synth->add_option("--input", args.input, "synthetic spec file")->required();
    synth->add_option("--out", out, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // bad usage is a config error
    }

    try {
        if (train->parsed()) return cmd_train(args, model_path);
        if (predict->parsed()) {
            return cmd_predict(args.input, model_path, out, emit_energies, args.clip_nonfinite);
        }
        if (evaluate->parsed()) return cmd_evaluate(args, out);
        if (unknown->parsed()) return cmd_unknown(args, out, benign, withheld);
        if (synth->parsed()) return cmd_synth(args.input, out);
    } catch (const efc::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const efc::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const efc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
