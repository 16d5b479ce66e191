#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "eegbench/runner.hpp"

namespace fs = std::filesystem;
using namespace eegbench;

namespace {

int exit_code(const Error& e) {
    const std::string cat = e.category();
    if (cat == "config") return 2;
    if (cat == "audit") return 3;
    if (cat == "io" || cat == "format") return 4;
    return 1;
}

config::RunConfig load_config(const std::string& path, int threads) {
    config::RunConfig cfg = path.empty() ? config::parse(nlohmann::json::object()) : config::load(path);
    // parallelism never changes results, so it stays out of the hash
    if (threads > 0) cfg.eval.threads = threads;
    return cfg;
}

void print_files(const fs::path& out, const std::vector<std::string>& files) {
    for (const auto& f : files) std::cout << (out / f).string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EEG vowel decoding benchmark"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string config_path, out_dir, root, results_dir, axis = "feature_family", edf_dir, best;
    int threads = 0, n_perm = 10000;

    auto* ingest_cmd = app.add_subcommand("ingest", "Read a BIDS tree of EDF files, preprocess, write an epoch archive");
    ingest_cmd->add_option("--root", root, "BIDS root (defaults to data.path or $EEGBENCH_DATA_ROOT)");
    ingest_cmd->add_option("--out", out_dir, "Archive directory")->required();
    ingest_cmd->add_option("--config", config_path, "Run configuration (JSON)");

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic epoch archive");
    synth_cmd->add_option("--config", config_path, "Run configuration (JSON)");
    synth_cmd->add_option("--out", out_dir, "Archive directory")->required();
    synth_cmd->add_option("--edf", edf_dir, "Also write a BIDS-style EDF fixture here");

    auto* run_cmd = app.add_subcommand("run", "LOSO benchmark with audit, statistics and analyses");
    run_cmd->add_option("--config", config_path, "Run configuration (JSON)");
    run_cmd->add_option("--out", out_dir, "Output directory")->required();

    auto* ablate_cmd = app.add_subcommand("ablate", "Ablation along one axis");
    ablate_cmd->add_option("--config", config_path, "Run configuration (JSON)");
    ablate_cmd->add_option("--axis", axis, "feature_family | time_window | channel_region | pca");
    ablate_cmd->add_option("--out", out_dir, "Output directory")->required();

    auto* tgm_cmd = app.add_subcommand("tgm", "Temporal generalization matrix");
    tgm_cmd->add_option("--config", config_path, "Run configuration (JSON)");
    tgm_cmd->add_option("--out", out_dir, "Output directory")->required();

    auto* stats_cmd = app.add_subcommand("stats", "Recompute stats.csv from a run directory");
    stats_cmd->add_option("--results", results_dir, "Run directory")->required();
    stats_cmd->add_option("--n-perm", n_perm, "Permutation draws");
    stats_cmd->add_option("--best", best, "Model for the permutation test");

    auto* report_cmd = app.add_subcommand("report", "Table-style summary of a run directory");
    report_cmd->add_option("--results", results_dir, "Run directory")->required();

    for (auto* c : {ingest_cmd, synth_cmd, run_cmd, ablate_cmd, tgm_cmd, stats_cmd})
        c->add_option("--threads", threads, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*ingest_cmd) {
            auto cfg = load_config(config_path, threads);
            if (root.empty()) root = cfg.data.path;
            if (const char* env = std::getenv(config::kDataRootEnv); root.empty() && env) root = env;
            if (root.empty()) throw ConfigError("no BIDS root: pass --root, set data.path or $EEGBENCH_DATA_ROOT");
            if (cfg.data.label_map.empty()) throw ConfigError("data.label_map: required for ingestion");
            const auto res = runner::ingest_dataset(root, cfg.data.label_map, cfg.preprocess, cfg.eval.threads);
            ingest::ArchiveMeta meta;
            meta.provenance_hash = cfg.preprocess.hash();
            meta.pipeline = preprocess::canonical_steps();
            meta.pipeline.pop_back();  // normalization happens per fold
            ingest::write_archive(out_dir, res.epochs, meta);
            std::size_t total = 0;
            for (const auto& s : res.subjects) {
                std::printf("%s epochs=%zu rejected=%zu bad_channels=%zu\n", s.subject.c_str(), s.epochs, s.rejected,
                            s.bad_channels);
                total += s.epochs;
            }
            std::printf("total=%zu shape=(%zu,%ld,%ld)\n", total, res.epochs.trials(), static_cast<long>(res.epochs.channels()),
                        static_cast<long>(res.epochs.samples()));
        } else if (*synth_cmd) {
            const auto cfg = load_config(config_path, threads);
            const EpochSet e = synth::generate(cfg.synth, nullptr, cfg.eval.threads);
            ingest::ArchiveMeta meta;
            meta.provenance_hash = cfg.hash;
            meta.pipeline = {"synth"};
            meta.extra["plant"] = synth::plant_name(cfg.synth.plant);
            meta.extra["snr"] = cfg.synth.snr;
            meta.extra["seed"] = cfg.synth.seed;
            ingest::write_archive(out_dir, e, meta);
            if (!edf_dir.empty()) synth::make_edf_fixture(cfg.synth, edf_dir);
            std::printf("trials=%zu channels=%ld samples=%ld\n", e.trials(), static_cast<long>(e.channels()),
                        static_cast<long>(e.samples()));
        } else if (*run_cmd) {
            const auto cfg = load_config(config_path, threads);
            const EpochSet e = runner::load_epochs(cfg);
            const auto res = runner::run_benchmark(cfg, e, out_dir);
            print_files(out_dir, res.files);
        } else if (*ablate_cmd) {
            const auto cfg = load_config(config_path, threads);
            const auto ax = harness::parse_axis(axis);
            const EpochSet e = runner::load_epochs(cfg);
            for (const auto& r : runner::run_ablation(cfg, e, ax, out_dir))
                std::printf("%-16s dims=%-5ld acc=%.4f +/- %.4f delta=%+.4f\n", r.label.c_str(), static_cast<long>(r.dims),
                            r.mean, r.sd, r.delta_vs_chance);
        } else if (*tgm_cmd) {
            const auto cfg = load_config(config_path, threads);
            const EpochSet e = runner::load_epochs(cfg);
            const Matrix m = runner::run_tgm(cfg, e, out_dir);
            Index best_i = 0;
            for (Index i = 1; i < m.rows(); ++i)
                if (m(i, i) > m(best_i, best_i)) best_i = i;
            const auto points = harness::tgm_points(e.samples(), cfg.eval.tgm_step);
            const double t = e.tmin + static_cast<double>(points[static_cast<std::size_t>(best_i)]) / e.fs;
            std::printf("tgm %ldx%ld diagonal peak %.4f at %.3f s\n", static_cast<long>(m.rows()), static_cast<long>(m.cols()),
                        m(best_i, best_i), t);
        } else if (*stats_cmd) {
            report::StatsOptions o;
            o.n_perm = n_perm;
            o.best_model = best;
            o.threads = threads > 0 ? threads : 1;
            const auto reports = runner::run_stats(results_dir, o);
            std::printf("%zu tests written to %s\n", reports.size(), (fs::path(results_dir) / "stats.csv").c_str());
        } else if (*report_cmd) {
            std::cout << runner::run_report(results_dir);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.category() << ": " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
