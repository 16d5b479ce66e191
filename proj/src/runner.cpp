#include "eegbench/runner.hpp"

#include <algorithm>
#include <map>

#include "eegbench/seed.hpp"
#include "parallel.hpp"

namespace eegbench::runner {

namespace fs = std::filesystem;

IngestResult ingest_dataset(const fs::path& root, const ingest::LabelMap& label_map,
                            const preprocess::PreprocessConfig& cfg, int threads) {
    const auto scan = ingest::scan_bids(root);
    if (scan.subjects.empty()) throw IoError("no subject folders with EDF files below '" + root.string() + "'");
    for (const auto& m : scan.missing) warn("ingest: subject " + m + " missing from the sequence");
    std::vector<preprocess::SubjectResult> parts(scan.subjects.size());
    detail::parallel_for(parts.size(), threads, [&](std::size_t s) {
        const auto& files = scan.subjects[s];
        std::vector<ingest::Recording> recs;
        std::vector<std::string> ids;
        for (const auto& p : files.edf_paths) {
            recs.push_back(ingest::read_edf_file(p));
            ids.push_back(p.stem().string());
        }
        parts[s] = preprocess::preprocess_subject(recs, label_map, cfg, files.subject_id, ids);
    });
    IngestResult out;
    out.missing = scan.missing;
    std::vector<EpochSet> sets;
    for (std::size_t s = 0; s < parts.size(); ++s) {
        out.subjects.push_back({scan.subjects[s].subject_id, parts[s].epochs.trials(), parts[s].rejected,
                                parts[s].bad_channels.count()});
        sets.push_back(std::move(parts[s].epochs));
    }
    out.epochs = preprocess::concat(sets);
    return out;
}

EpochSet load_epochs(const config::RunConfig& cfg) {
    switch (cfg.data.source) {
        case config::Source::synth: return synth::generate(cfg.synth, nullptr, cfg.eval.threads);
        case config::Source::archive: return ingest::read_archive(cfg.data.path).epochs;
        case config::Source::bids:
            return ingest_dataset(cfg.data.path, cfg.data.label_map, cfg.preprocess, cfg.eval.threads).epochs;
    }
    throw ConfigError("unknown data source");
}

report::Header header_of(const config::RunConfig& cfg) {
    report::Header h;
    h.config_hash = cfg.hash;
    h.seed = cfg.seed;
    return h;
}

namespace {

void emit(const fs::path& out, const std::string& name, const std::string& text, std::vector<std::string>& files) {
    ingest::write_text_file(out / name, text);
    files.push_back(name);
}

void ensure_dir(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());
}

const config::NamedPipeline& features_pipeline(const config::RunConfig& cfg, const std::string& name) {
    if (!name.empty()) return cfg.pipeline(name);
    for (const auto& p : cfg.pipelines)
        if (p.spec.input == harness::Input::features) return p;
    throw ConfigError("no feature pipeline configured");
}

}  // namespace

RunOutputs run_benchmark(const config::RunConfig& cfg, const EpochSet& epochs, const fs::path& out) {
    ensure_dir(out);
    const auto header = header_of(cfg);
    auto opt = cfg.eval_options();
    RunOutputs result;
    auto& files = result.files;

    if (cfg.eval.protocol == "within_subject" || cfg.eval.protocol == "learning_curve") {
        std::string text;
        for (const auto& np : cfg.pipelines) {
            if (np.spec.input == harness::Input::vote) continue;
            const std::string body = cfg.eval.protocol == "within_subject"
                                         ? report::within_subject_csv(np.spec.name, harness::within_subject_cv(epochs, np.spec, cfg.eval.k, opt), header)
                                         : report::learning_curve_csv(np.spec.name,
                                                                      harness::learning_curve(epochs, cfg.eval.learning_curve_n,
                                                                                              cfg.eval.learning_curve_reps, np.spec, opt),
                                                                      header);
            // keep a single header line
            text += text.empty() ? body : body.substr(body.find('\n', body.find('\n') + 1) + 1);
        }
        emit(out, cfg.eval.protocol + ".csv", text, files);
        return result;
    }

    auto specs = cfg.pipeline_specs();
    for (auto& s : specs)
        if (s.name == cfg.analyses.importance_pipeline) s.collect_importance = true;
    opt.strict_audit = false;
    result.run = harness::loso(epochs, specs, opt);
    const auto& run = result.run;
    emit(out, "audit.json", report::audit_json(run, header), files);
    if (cfg.eval.strict_audit && !run.audit_passed()) {
        for (const auto& v : run.verdicts)
            if (!v.pass)
                throw AuditError("checkpoint " + std::to_string(v.checkpoint) + " (" + v.name + ") failed: " + v.witness);
    }

    const auto table = report::from_run(run, cfg.pipelines, header);
    emit(out, "results.csv", report::results_csv(table), files);
    emit(out, "predictions.csv", report::predictions_csv(table), files);
    for (const auto& p : run.pipelines)
        emit(out, "confusion_" + p.name + ".csv", report::confusion_csv(p.pooled_confusion(), cfg.data.class_names, header),
             files);

    report::StatsOptions so;
    so.n_perm = cfg.stats.n_perm;
    so.seed = cfg.seed;
    so.best_model = cfg.stats.best_model;
    so.pairwise_models = cfg.stats.pairwise_models;
    so.threads = cfg.eval.threads;
    const auto reports = report::benchmark_stats(table, so);
    emit(out, "stats.csv", report::stats_csv(reports, header), files);
    emit(out, "summary.csv", report::summary_csv(report::summarize(table, reports), header), files);

    const auto& an = cfg.analyses;
    if (an.pairwise) {
        const auto& np = features_pipeline(cfg, an.pairwise_pipeline);
        const auto rows = analyses::pairwise_tasks(epochs, np.spec, opt, cfg.data.class_names);
        emit(out, "pairwise.csv", report::pairwise_csv(rows, header), files);
        if (an.has_formants) {
            // formant table rows follow the class order
            analyses::FormantTable ordered;
            for (const auto& v : cfg.data.class_names) {
                const auto it = std::find(an.formants.vowels.begin(), an.formants.vowels.end(), v);
                if (it == an.formants.vowels.end()) throw ConfigError("analyses.formants: vowel '" + v + "' missing");
                const auto i = static_cast<std::size_t>(it - an.formants.vowels.begin());
                ordered.vowels.push_back(v);
                ordered.f1.push_back(an.formants.f1[i]);
                ordered.f2.push_back(an.formants.f2[i]);
            }
            const Matrix dist = analyses::acoustic_distances(ordered);
            std::vector<double> acc;
            std::vector<std::string> labels;
            for (std::size_t i = 0; i < 10; ++i) {
                acc.push_back(rows[i].mean);
                labels.push_back(rows[i].label);
            }
            const auto r = analyses::rsa(dist, acc, cfg.stats.n_perm, derive_seed(cfg.seed, "rsa"));
            emit(out, "rsa.csv", report::rsa_csv(r, labels, analyses::condensed(dist), acc, header), files);
        }
    }
    if (!an.importance_pipeline.empty()) {
        const auto& pr = run.find(an.importance_pipeline);
        std::vector<Vector> imps;
        for (const auto& f : pr.folds) imps.push_back(f.importance);
        if (imps.empty() || imps.front().size() == 0)
            throw ConfigError("analyses.importance_pipeline: '" + an.importance_pipeline +
                              "' yields no feature importances (needs tree or linear classifier without PCA)");
        const auto shares = analyses::electrode_importance(imps, pr.registry, epochs.channels());
        emit(out, "importance.csv", report::importance_csv(epochs.channel_names, shares, header), files);
        if (!an.dropout_ks.empty()) {
            const auto ranking = analyses::rank_channels(shares);
            auto spec = cfg.pipeline(an.importance_pipeline).spec;
            spec.collect_importance = false;
            const auto top = analyses::channel_dropout(epochs, ranking, an.dropout_ks, analyses::Direction::top, spec, opt);
            const auto bottom =
                analyses::channel_dropout(epochs, ranking, an.dropout_ks, analyses::Direction::bottom, spec, opt);
            emit(out, "dropout.csv", report::dropout_csv(top, bottom, header), files);
        }
    }
    if (an.erp) {
        emit(out, "erp.csv",
             report::erp_csv(analyses::erp(epochs, an.erp_channels, analyses::kErpWindows, cfg.data.class_names), header),
             files);
    }
    return result;
}

std::vector<harness::AblationRow> run_ablation(const config::RunConfig& cfg, const EpochSet& epochs, harness::Axis axis,
                                               const fs::path& out) {
    ensure_dir(out);
    const auto name = harness::axis_name(axis);
    const auto it = cfg.eval.ablation_grids.find(name);
    const auto grid = it != cfg.eval.ablation_grids.end() ? it->second : config::default_grid(axis);
    auto base = features_pipeline(cfg, cfg.eval.ablation_pipeline).spec;
    base.collect_importance = false;
    auto opt = cfg.eval_options();
    const auto rows = harness::ablation_run(epochs, axis, grid, base, opt);
    ingest::write_text_file(out / ("ablation_" + name + ".csv"), report::ablation_csv(name, rows, header_of(cfg)));
    return rows;
}

Matrix run_tgm(const config::RunConfig& cfg, const EpochSet& epochs, const fs::path& out) {
    ensure_dir(out);
    const auto decoder = cfg.eval.tgm_pipeline.empty() ? classify::lda_spec() : cfg.pipeline(cfg.eval.tgm_pipeline).spec.classifier;
    auto opt = cfg.eval_options();
    const Matrix m = harness::tgm(epochs, cfg.eval.tgm_step, decoder, opt);
    ingest::write_text_file(out / "tgm.csv", report::tgm_csv(m, harness::tgm_points(epochs.samples(), cfg.eval.tgm_step),
                                                            epochs.fs, epochs.tmin, header_of(cfg)));
    return m;
}

std::vector<stats::StatReport> run_stats(const fs::path& dir, const report::StatsOptions& opt) {
    const auto table = report::read_results(dir);
    auto o = opt;
    o.seed = table.header.seed;
    const auto reports = report::benchmark_stats(table, o);
    ingest::write_text_file(dir / "stats.csv", report::stats_csv(reports, table.header));
    return reports;
}

std::string run_report(const fs::path& dir) {
    const auto table = report::read_results(dir);
    std::vector<stats::StatReport> reports;
    if (fs::exists(dir / "stats.csv")) {
        report::Header h;
        report::read_csv(dir / "stats.csv", &h);
        if (h.config_hash != table.header.config_hash)
            throw FormatError("stats.csv and results.csv carry different config hashes");
        reports = report::read_stats(dir / "stats.csv");
    } else {
        report::StatsOptions o;
        o.seed = table.header.seed;
        reports = report::benchmark_stats(table, o);
    }
    const auto rows = report::summarize(table, reports);
    ingest::write_text_file(dir / "summary.csv", report::summary_csv(rows, table.header));
    return report::summary_text(rows);
}

}  // namespace eegbench::runner
