// Command-line front end: train / eval / instability / ablate / dump-scenes.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "setdet/harness.hpp"

namespace {

using namespace setdet;

TrainConfig load_or_default(const std::string& path) {
    TrainConfig cfg;
    if (!path.empty()) cfg = load_config_file(path);
    apply_env_seed_override(cfg);
    return cfg;
}

void print_summary(const ExperimentResult& r) {
    std::printf("epoch  mean_IS    AP50     mean_AP\n");
    for (const EpochRecord& rec : r.records) {
        if (rec.mean_is)
            std::printf("%5d  %8.4f  %7.4f  %7.4f\n", rec.epoch, *rec.mean_is, rec.ap50,
                        rec.mean_ap);
        else
            std::printf("%5d         -  %7.4f  %7.4f\n", rec.epoch, rec.ap50, rec.mean_ap);
    }
    std::printf("final AP50 %.4f, mean IS (epochs 2..%d) %.4f\n", r.final_ap50(),
                r.records.empty() ? 0 : r.records.back().epoch,
                r.mean_is(2, r.records.empty() ? 0 : r.records.back().epoch));
}

int cmd_train(const std::string& config_path, std::optional<uint64_t> seed,
              std::optional<int> dn_groups, bool no_mask, const std::string& out_dir, bool force) {
    TrainConfig cfg = load_or_default(config_path);
    if (seed) cfg.seed = *seed;
    if (dn_groups) cfg.dn_groups = *dn_groups;
    if (no_mask) cfg.use_mask = false;
    cfg.validate();
    std::printf("training: %d epochs, %d denoising groups, mask %s, seed %llu\n", cfg.epochs,
                cfg.dn_groups, cfg.use_mask ? "on" : "off",
                static_cast<unsigned long long>(cfg.seed));
    const ExperimentResult r = run_experiment(cfg, out_dir, force);
    print_summary(r);
    if (!out_dir.empty()) std::printf("results written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path) {
    TrainConfig cfg = load_or_default(config_path);
    cfg.validate();
    ModelParams params = load_checkpoint(cfg.model(), config_digest(cfg), checkpoint_path);
    const auto val = generate_split(cfg.dataset(), true);
    const EvalResult r = evaluate(params, val, cfg);
    std::printf("AP50 %.4f  mean_AP %.4f  (%zu validation scenes)\n", r.ap50, r.mean_ap,
                val.size());
    return 0;
}

int cmd_instability(const std::vector<std::string>& run_dirs) {
    std::vector<std::vector<EpochRecord>> runs;
    for (const std::string& dir : run_dirs)
        runs.push_back(parse_metrics_csv((std::filesystem::path(dir) / "metrics.csv").string()));

    std::printf("epoch");
    for (const std::string& dir : run_dirs) std::printf("  %18s", dir.c_str());
    std::printf("\n");
    size_t max_epochs = 0;
    for (const auto& r : runs) max_epochs = std::max(max_epochs, r.size());
    for (size_t e = 0; e < max_epochs; ++e) {
        std::printf("%5zu", e + 1);
        for (const auto& r : runs) {
            if (e < r.size() && r[e].mean_is)
                std::printf("  %18.4f", *r[e].mean_is);
            else
                std::printf("  %18s", "-");
        }
        std::printf("\n");
    }
    std::printf(" mean");
    for (const auto& r : runs) {
        double sum = 0.0;
        int count = 0;
        for (const auto& rec : r)
            if (rec.mean_is) {
                sum += *rec.mean_is;
                ++count;
            }
        std::printf("  %18.4f", count ? sum / count : 0.0);
    }
    std::printf("\n");
    return 0;
}

struct AblateRun {
    std::string name;
    TrainConfig cfg;
};

int cmd_ablate(const std::string& sweep, const std::string& config_path,
               std::optional<uint64_t> seed, const std::string& out_dir, int jobs, bool force) {
    TrainConfig base = load_or_default(config_path);
    if (seed) base.seed = *seed;

    std::vector<AblateRun> runs;
    if (sweep == "groups") {
        for (int p : {0, 1, 5}) {
            TrainConfig c = base;
            c.dn_groups = p;
            runs.push_back({"groups_" + std::to_string(p), c});
        }
    } else if (sweep == "mask") {
        TrainConfig on = base, off = base;
        on.use_mask = true;
        off.use_mask = false;
        runs.push_back({"mask_on", on});
        runs.push_back({"mask_off", off});
    } else if (sweep == "noise") {
        for (double v : {0.0, 0.2, 0.4, 0.6, 0.8}) {
            TrainConfig c = base;
            c.lambda1 = v;
            c.lambda2 = 0.4;
            char name[32];
            std::snprintf(name, sizeof(name), "lambda1_%.1f", v);
            runs.push_back({name, c});
        }
        for (double v : {0.0, 0.2, 0.6, 0.8}) {
            TrainConfig c = base;
            c.lambda1 = 0.4;
            c.lambda2 = v;
            char name[32];
            std::snprintf(name, sizeof(name), "lambda2_%.1f", v);
            runs.push_back({name, c});
        }
    } else {
        std::fprintf(stderr, "unknown sweep '%s' (expected groups|noise|mask)\n", sweep.c_str());
        return 1;
    }
    for (AblateRun& r : runs) r.cfg.validate();

    // the dataset is shared by every run in the sweep
    const auto train = generate_split(base.dataset(), false);
    const auto val = generate_split(base.dataset(), true);

    std::vector<ExperimentResult> results(runs.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (size_t i = next.fetch_add(1); i < runs.size(); i = next.fetch_add(1)) {
            const std::string dir =
                out_dir.empty() ? "" : (std::filesystem::path(out_dir) / runs[i].name).string();
            results[i] = run_experiment_on(runs[i].cfg, train, val, dir, force);
        }
    };
    std::vector<std::future<void>> pool;
    for (int j = 0; j < std::max(1, jobs); ++j)
        pool.push_back(std::async(std::launch::async, worker));
    for (auto& f : pool) f.get();

    std::printf("%-14s %8s %10s\n", "run", "AP50", "mean_IS");
    for (size_t i = 0; i < runs.size(); ++i) {
        std::printf("%-14s %8.4f %10.4f\n", runs[i].name.c_str(), results[i].final_ap50(),
                    results[i].mean_is(2, runs[i].cfg.epochs));
    }
    return 0;
}

int cmd_dump_scenes(const std::string& config_path, const std::string& out_path, int count,
                    bool validation) {
    TrainConfig cfg = load_or_default(config_path);
    cfg.validate();
    const DatasetConfig data = cfg.dataset();
    const int begin = validation ? data.n_train : 0;
    const int available = validation ? data.n_val : data.n_train;
    const int n = count > 0 ? std::min(count, available) : available;

    std::ofstream out(out_path);
    if (!out) {
        std::fprintf(stderr, "cannot open %s for writing\n", out_path.c_str());
        return 1;
    }
    for (int i = 0; i < n; ++i) {
        const Scene scene = generate_scene(data, begin + i);
        out << scene_dump_record(scene, begin + i) << "\n";
    }
    std::printf("wrote %d scene records to %s\n", n, out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"set-prediction detector with denoising-query training"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint_path, sweep, dump_path;
    std::optional<uint64_t> seed;
    std::optional<int> dn_groups;
    bool no_mask = false, force = false, validation = false;
    int jobs = 2, count = 0;
    std::vector<std::string> run_dirs;

    CLI::App* train = app.add_subcommand("train", "train a model and record per-epoch metrics");
    train->add_option("--config", config_path, "config file (key = value lines)");
    train->add_option("--seed", seed, "override config seed");
    train->add_option("--dn-groups", dn_groups, "override denoising group count P");
    train->add_flag("--no-mask", no_mask, "disable the denoising attention mask");
    train->add_option("--out", out_dir, "output directory for metrics.csv and checkpoint");
    train->add_flag("--force", force, "overwrite existing results");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the validation split");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--config", config_path, "config the checkpoint was trained with");

    CLI::App* inst = app.add_subcommand("instability", "compare per-epoch matching instability");
    inst->add_option("--run-dir", run_dirs, "run directory (repeatable)")
        ->required()
        ->expected(1, -1);

    CLI::App* ablate = app.add_subcommand("ablate", "run a preconfigured ablation sweep");
    ablate->add_option("--sweep", sweep, "groups|noise|mask")->required();
    ablate->add_option("--config", config_path, "base config file");
    ablate->add_option("--seed", seed, "override config seed");
    ablate->add_option("--out", out_dir, "directory for per-run results");
    ablate->add_option("--jobs", jobs, "concurrent runs");
    ablate->add_flag("--force", force, "overwrite existing results");

    CLI::App* dump = app.add_subcommand("dump-scenes", "write synthetic scenes as JSON lines");
    dump->add_option("--config", config_path, "config file");
    dump->add_option("--out", dump_path, "output file")->required();
    dump->add_option("--count", count, "number of scenes (default: whole split)");
    dump->add_flag("--val", validation, "dump the validation split");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return cmd_train(config_path, seed, dn_groups, no_mask, out_dir, force);
        if (eval->parsed()) return cmd_eval(checkpoint_path, config_path);
        if (inst->parsed()) return cmd_instability(run_dirs);
        if (ablate->parsed()) return cmd_ablate(sweep, config_path, seed, out_dir, jobs, force);
        if (dump->parsed()) return cmd_dump_scenes(config_path, dump_path, count, validation);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
