// Experiment front end: run streams, ablate variants, sweep key-grid sizes,
// export cluster plot data and datasets. All randomness flows from the config
// seeds, so reruns overwrite outputs with identical numeric content.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clumo/config.hpp"
#include "clumo/continual.hpp"
#include "clumo/datagen.hpp"
#include "clumo/errors.hpp"
#include "clumo/metrics.hpp"
#include "clumo/model.hpp"
#include "clumo/pool.hpp"
#include "clumo/serialize.hpp"

namespace fs = std::filesystem;
using namespace clumo;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--override", args.overrides,
                    "dotted-path config override, e.g. train.lr=0.25 (repeatable)");
    cmd->add_option("--seed", args.seed, "run a single seed instead of the config's list");
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
}

ExperimentConfig load_effective_config(const CommonArgs& args) {
    std::ifstream is(args.config_path);
    if (!is) throw ConfigError("config: cannot read '" + args.config_path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: '" + args.config_path + "' is not valid JSON: " + e.what());
    }
    for (const std::string& ov : args.overrides) apply_override(doc, ov);

    const bool explicit_out = doc.contains("out_dir");
    ExperimentConfig cfg = config_from_json(doc);
    if (!args.out_dir.empty()) {
        cfg.out_dir = args.out_dir;
    } else if (!explicit_out) {
        if (const char* env = std::getenv("CLUMO_OUT")) cfg.out_dir = env;
    }
    if (args.seed) cfg.seeds = {*args.seed};
    cfg.validate();
    return cfg;
}

std::string order_string(const ExperimentConfig& cfg) {
    return cfg.task_order.empty() ? natural_order(cfg.stream.num_tasks) : cfg.task_order;
}

TaskStream build_stream(const ExperimentConfig& cfg, std::uint64_t seed) {
    TaskStream stream;
    if (!cfg.data_file.empty()) {
        std::ifstream is(cfg.data_file);
        if (!is) throw IoError("data_file: cannot read '" + cfg.data_file + "'");
        stream = load_stream(is);
    } else {
        stream = make_stream(cfg.stream, seed);
    }
    if (!cfg.task_order.empty()) stream = permute_stream(stream, cfg.task_order);
    return stream;
}

struct RunOutput {
    RunReport report;
    StreamResult result;
};

RunOutput run_once(const ExperimentConfig& cfg, const TaskStream& stream, Variant variant,
                   std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.variant = variant;
    tc.seed = seed;
    ModelDims dims = dims_for_stream(stream, cfg.feature_dim);

    const auto t0 = std::chrono::steady_clock::now();
    StreamResult result = run_stream(stream, tc, dims);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::optional<ClusteringError> clustering;
    if (!result.model.pools.empty()) {
        clustering = clustering_error(result.model.pools, stream.tasks, result.model.visual,
                                      result.model.textual);
    }
    nlohmann::json echo = to_json(cfg);
    echo["train"]["variant"] = to_string(variant);
    RunOutput out{build_report(std::move(echo), order_string(cfg), to_string(variant), seed,
                               result.accuracy, clustering, wall),
                  std::move(result)};
    return out;
}

std::string pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", fraction * 100.0);
    return buf;
}

void print_run_line(const RunReport& r) {
    std::cout << "variant=" << r.variant << " seed=" << r.seed << " A=" << pct(r.average_accuracy)
              << (r.forgetting.defined ? " F=" + pct(r.forgetting.average) : " F=n/a") << "\n";
}

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd ms;
    if (xs.empty()) return ms;
    for (double x : xs) ms.mean += x;
    ms.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double acc = 0.0;
        for (double x : xs) acc += (x - ms.mean) * (x - ms.mean);
        ms.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
    }
    return ms;
}

int cmd_run(const CommonArgs& args) {
    ExperimentConfig cfg = load_effective_config(args);
    fs::create_directories(cfg.out_dir);

    std::vector<double> accs, forgets;
    for (std::uint64_t seed : cfg.seeds) {
        TaskStream stream = build_stream(cfg, seed);
        RunOutput out = run_once(cfg, stream, cfg.train.variant, seed);
        const fs::path report_path = fs::path(cfg.out_dir) /
            ("run_" + out.report.variant + "_seed" + std::to_string(seed) + ".json");
        emit_report(out.report, report_path);

        std::ofstream cp(fs::path(cfg.out_dir) / ("checkpoint_seed" + std::to_string(seed) + ".txt"));
        save_checkpoint(cp, out.result.model);

        print_run_line(out.report);
        accs.push_back(out.report.average_accuracy);
        if (out.report.forgetting.defined) forgets.push_back(out.report.forgetting.average);
    }

    if (cfg.seeds.size() > 1) {
        MeanStd a = mean_std(accs), f = mean_std(forgets);
        nlohmann::json summary = {
            {"seeds", cfg.seeds},
            {"accuracy", {{"mean", a.mean}, {"stddev", a.stddev}}},
            {"forgetting", {{"mean", f.mean}, {"stddev", f.stddev}}},
        };
        std::ofstream os(fs::path(cfg.out_dir) / "summary.json");
        os << summary.dump(2) << '\n';
        std::cout << "summary: A=" << pct(a.mean) << " +/- " << pct(a.stddev)
                  << "  F=" << pct(f.mean) << " +/- " << pct(f.stddev) << "\n";
    }
    return 0;
}

std::vector<Variant> parse_variants(const std::string& csv) {
    if (csv.empty()) return all_variants();
    std::vector<Variant> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        std::string name = csv.substr(start, comma == std::string::npos ? comma : comma - start);
        if (!name.empty()) out.push_back(variant_from_string(name));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw ConfigError("ablate: empty variant list");
    return out;
}

int cmd_ablate(const CommonArgs& args, const std::string& variants_csv) {
    ExperimentConfig cfg = load_effective_config(args);
    fs::create_directories(cfg.out_dir);
    std::vector<Variant> variants = parse_variants(variants_csv);

    // One stream per seed, shared by every variant so comparisons are paired.
    std::map<std::uint64_t, TaskStream> streams;
    for (std::uint64_t seed : cfg.seeds) streams.emplace(seed, build_stream(cfg, seed));

    nlohmann::json combined;
    std::ofstream table(fs::path(cfg.out_dir) / "ablate.txt");
    table << "variant          A (acc %)      F (forgetting %)\n";
    for (Variant v : variants) {
        std::vector<double> accs, forgets;
        nlohmann::json per_seed;
        for (std::uint64_t seed : cfg.seeds) {
            RunOutput out = run_once(cfg, streams.at(seed), v, seed);
            emit_report(out.report, fs::path(cfg.out_dir) /
                ("ablate_" + to_string(v) + "_seed" + std::to_string(seed) + ".json"));
            accs.push_back(out.report.average_accuracy);
            if (out.report.forgetting.defined) forgets.push_back(out.report.forgetting.average);
            per_seed[std::to_string(seed)] = {
                {"accuracy", out.report.average_accuracy},
                {"forgetting", out.report.forgetting.defined
                                   ? nlohmann::json(out.report.forgetting.average)
                                   : nlohmann::json(nullptr)}};
            print_run_line(out.report);
        }
        MeanStd a = mean_std(accs), f = mean_std(forgets);
        combined[to_string(v)] = {{"mean_accuracy", a.mean},
                                  {"mean_forgetting", f.mean},
                                  {"per_seed", per_seed}};
        table << to_string(v);
        for (std::size_t i = to_string(v).size(); i < 17; ++i) table << ' ';
        table << pct(a.mean) << "      " << (forgets.empty() ? "n/a" : pct(f.mean)) << '\n';
    }
    std::ofstream os(fs::path(cfg.out_dir) / "ablate.json");
    os << combined.dump(2) << '\n';
    return 0;
}

struct SweepPoint {
    std::size_t s_v = 0, s_t = 0, length = 0;  // length 0 keeps the config value
    std::string label;
};

SweepPoint parse_size(const std::string& token) {
    SweepPoint p;
    p.label = token;
    std::size_t a = 0, b = 0, c = 0;
    char x1 = 0, x2 = 0;
    std::istringstream ss(token);
    if (ss >> a >> x1 >> b && x1 == 'x') {
        if (ss >> x2 >> c && x2 == 'x') p.length = c;
        if (!ss.eof() && p.length == 0) throw ConfigError("sweep: bad size '" + token + "'");
    } else {
        throw ConfigError("sweep: bad size '" + token + "' (want AxB or AxBxL)");
    }
    if (a == 0 || b == 0) throw ConfigError("sweep: key counts in '" + token + "' must be >= 1");
    p.s_v = a;
    p.s_t = b;
    return p;
}

int cmd_sweep_keys(const CommonArgs& args, const std::string& sizes_csv) {
    ExperimentConfig cfg = load_effective_config(args);
    fs::create_directories(cfg.out_dir);

    std::vector<SweepPoint> points;
    std::size_t start = 0;
    while (start <= sizes_csv.size()) {
        std::size_t comma = sizes_csv.find(',', start);
        std::string tok =
            sizes_csv.substr(start, comma == std::string::npos ? comma : comma - start);
        if (!tok.empty()) points.push_back(parse_size(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (points.empty()) throw ConfigError("sweep: no sizes given");

    std::map<std::uint64_t, TaskStream> streams;
    for (std::uint64_t seed : cfg.seeds) streams.emplace(seed, build_stream(cfg, seed));

    nlohmann::json combined;
    std::ofstream table(fs::path(cfg.out_dir) / "sweep.txt");
    table << "size        A (acc %)\n";
    double best = 0.0, worst = 1.0;
    for (const SweepPoint& p : points) {
        ExperimentConfig point_cfg = cfg;
        point_cfg.train.visual_key_count = p.s_v;
        point_cfg.train.textual_key_count = p.s_t;
        if (p.length > 0) point_cfg.train.prompt_length = p.length;
        point_cfg.train.validate();

        std::vector<double> accs;
        for (std::uint64_t seed : cfg.seeds) {
            RunOutput out = run_once(point_cfg, streams.at(seed), point_cfg.train.variant, seed);
            emit_report(out.report, fs::path(cfg.out_dir) /
                ("sweep_" + p.label + "_seed" + std::to_string(seed) + ".json"));
            accs.push_back(out.report.average_accuracy);
        }
        MeanStd a = mean_std(accs);
        best = std::max(best, a.mean);
        worst = std::min(worst, a.mean);
        combined[p.label] = {{"mean_accuracy", a.mean}};
        table << p.label;
        for (std::size_t i = p.label.size(); i < 12; ++i) table << ' ';
        table << pct(a.mean) << '\n';
        std::cout << "size=" << p.label << " A=" << pct(a.mean) << "\n";
    }
    combined["spread"] = best - worst;
    table << "spread (max-min, points): " << pct(best - worst) << '\n';
    std::cout << "spread=" << pct(best - worst) << " points\n";
    std::ofstream os(fs::path(cfg.out_dir) / "sweep.json");
    os << combined.dump(2) << '\n';
    return 0;
}

void write_viz_csv(const fs::path& path, const Tensor2D& projected, const Tensor2D& features,
                   const Tensor2D& keys, int task_id) {
    std::ofstream os(path);
    if (!os) throw IoError("viz: cannot write " + path.string());
    os << "x,y,key,task\n";
    for (std::size_t i = 0; i < projected.rows; ++i) {
        KeyMatch m = select_key(features.row(i), keys);
        os << format_double(projected.at(i, 0)) << ',' << format_double(projected.at(i, 1)) << ','
           << m.key << ',' << task_id << '\n';
    }
}

int cmd_viz(const CommonArgs& args, std::string checkpoint_path) {
    ExperimentConfig cfg = load_effective_config(args);
    fs::create_directories(cfg.out_dir);
    if (checkpoint_path.empty()) {
        checkpoint_path = (fs::path(cfg.out_dir) /
                           ("checkpoint_seed" + std::to_string(cfg.seeds.front()) + ".txt"))
                              .string();
    }
    std::ifstream is(checkpoint_path);
    if (!is) throw ConfigError("viz: missing checkpoint '" + checkpoint_path + "'");
    ModelState model = load_checkpoint(is);

    TaskStream stream = build_stream(cfg, cfg.seeds.front());
    if (model.pools.size() > stream.size()) {
        throw ConfigError("viz: checkpoint has more pools than the stream has tasks");
    }

    std::size_t files = 0;
    for (std::size_t t = 0; t < model.pools.size(); ++t) {
        const KeyKeyPromptPool& pool = model.pools[t];
        const std::vector<Instance>& split = stream.tasks[t].train;

        for (bool visual : {true, false}) {
            const FrozenEncoder& enc = visual ? model.visual : model.textual;
            Tensor2D feats(split.size(), model.dims.feature_dim);
            for (std::size_t i = 0; i < split.size(); ++i) {
                Tensor2D pooled = pooled_feature(enc, visual ? split[i].visual : split[i].textual);
                std::copy(pooled.data.begin(), pooled.data.end(), feats.row(i).begin());
            }
            PcaResult pca = pca_project(feats, 2);
            const std::string mod = visual ? "visual" : "textual";
            const Tensor2D& before = visual ? pool.initial_visual_keys : pool.initial_textual_keys;
            const Tensor2D& after = visual ? pool.visual_keys : pool.textual_keys;
            write_viz_csv(fs::path(cfg.out_dir) /
                              ("viz_task" + std::to_string(t) + "_" + mod + "_before.csv"),
                          pca.projected, feats, before, static_cast<int>(t));
            write_viz_csv(fs::path(cfg.out_dir) /
                              ("viz_task" + std::to_string(t) + "_" + mod + "_after.csv"),
                          pca.projected, feats, after, static_cast<int>(t));
            files += 2;
        }
    }
    std::cout << "wrote " << files << " plot-data files to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_export_data(const CommonArgs& args) {
    ExperimentConfig cfg = load_effective_config(args);
    fs::create_directories(cfg.out_dir);
    TaskStream stream = build_stream(cfg, cfg.seeds.front());
    const fs::path path = fs::path(cfg.out_dir) / "stream.txt";
    std::ofstream os(path);
    if (!os) throw IoError("export-data: cannot write " + path.string());
    save_stream(os, stream);
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continual-learning experiments with key-key prompt pools"};
    app.require_subcommand(1);

    CommonArgs run_args, ablate_args, sweep_args, viz_args, export_args;
    std::string variants_csv;
    std::string sizes_csv = "2x2,3x3,4x4,5x5";
    std::string checkpoint_path;

    CLI::App* run = app.add_subcommand("run", "train and evaluate the configured stream");
    add_common(run, run_args);

    CLI::App* ablate = app.add_subcommand("ablate", "compare method variants on one stream");
    add_common(ablate, ablate_args);
    ablate->add_option("--variants", variants_csv, "comma-separated variant subset");

    CLI::App* sweep = app.add_subcommand("sweep-keys", "sweep key-grid sizes (AxB or AxBxL)");
    add_common(sweep, sweep_args);
    sweep->add_option("--sizes", sizes_csv, "comma-separated sizes, default 2x2,3x3,4x4,5x5");

    CLI::App* viz = app.add_subcommand("viz", "export PCA cluster plot data from a checkpoint");
    add_common(viz, viz_args);
    viz->add_option("--checkpoint", checkpoint_path, "checkpoint file (default: first seed's)");

    CLI::App* exp = app.add_subcommand("export-data", "write the synthetic stream to a text file");
    add_common(exp, export_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (ablate->parsed()) return cmd_ablate(ablate_args, variants_csv);
        if (sweep->parsed()) return cmd_sweep_keys(sweep_args, sizes_csv);
        if (viz->parsed()) return cmd_viz(viz_args, checkpoint_path);
        if (exp->parsed()) return cmd_export_data(export_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
