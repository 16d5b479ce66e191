#include "eegbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"

namespace eegbench::report {

namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string Header::line() const {
    return "# eegbench version=" + version + " config_hash=" + config_hash + " seed=" + std::to_string(seed);
}

Header Header::parse(const std::string& line) {
    static const std::regex re(R"(^# eegbench version=(\S+) config_hash=(\S*) seed=(\d+)\s*$)");
    std::smatch m;
    if (!std::regex_match(line, m, re)) throw FormatError("malformed metadata header: '" + line + "'");
    Header h;
    h.version = m[1].str();
    h.config_hash = m[2].str();
    h.seed = std::stoull(m[3].str());
    return h;
}

// ---------------------------------------------------------------- results table

std::vector<std::string> ResultsTable::models() const {
    std::vector<std::string> out;
    for (const auto& f : folds)
        if (std::find(out.begin(), out.end(), f.model) == out.end()) out.push_back(f.model);
    return out;
}

std::vector<double> ResultsTable::accuracies(const std::string& model) const {
    std::vector<double> out;
    for (const auto& f : folds)
        if (f.model == model) out.push_back(f.balanced_accuracy);
    return out;
}

std::vector<std::string> ResultsTable::fold_ids(const std::string& model) const {
    std::vector<std::string> out;
    for (const auto& f : folds)
        if (f.model == model) out.push_back(f.fold);
    return out;
}

std::string ResultsTable::group(const std::string& model) const {
    for (const auto& f : folds)
        if (f.model == model) return f.group;
    return "";
}

int ResultsTable::classes() const {
    int k = 0;
    for (const auto& p : predictions) k = std::max({k, p.truth + 1, p.predicted + 1});
    return k;
}

ResultsTable from_run(const harness::RunResult& run, const std::vector<config::NamedPipeline>& pipelines,
                      const Header& header) {
    ResultsTable t;
    t.header = header;
    for (const auto& p : run.pipelines) {
        std::string group;
        for (const auto& np : pipelines)
            if (np.spec.name == p.name) group = np.group;
        for (const auto& f : p.folds) {
            t.folds.push_back({p.name, group, f.fold, f.trials.size(), f.balanced_accuracy, f.macro_f1});
            for (std::size_t i = 0; i < f.trials.size(); ++i)
                t.predictions.push_back({p.name, f.fold, f.trials[i], f.truth[i], f.predicted[i]});
        }
    }
    return t;
}

std::string results_csv(const ResultsTable& t) {
    std::ostringstream s;
    s << t.header.line() << "\nmodel,group,fold,n_trials,balanced_accuracy,macro_f1\n";
    for (const auto& f : t.folds)
        s << f.model << ',' << f.group << ',' << f.fold << ',' << f.trials << ',' << fmt(f.balanced_accuracy) << ','
          << fmt(f.macro_f1) << '\n';
    return s.str();
}

std::string predictions_csv(const ResultsTable& t) {
    std::ostringstream s;
    s << t.header.line() << "\nmodel,fold,trial,truth,predicted\n";
    for (const auto& p : t.predictions)
        s << p.model << ',' << p.fold << ',' << p.trial << ',' << p.truth << ',' << p.predicted << '\n';
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file, Header* header) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open '" + file.string() + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (header && !saw_header) *header = Header::parse(line);
            saw_header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    if (header && !saw_header) throw FormatError("'" + file.string() + "' lacks the metadata header line");
    return rows;
}

namespace {

std::map<std::string, std::size_t> column_index(const std::vector<std::string>& head,
                                                const std::vector<std::string>& required, const fs::path& file) {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < head.size(); ++i) idx[head[i]] = i;
    for (const auto& r : required)
        if (!idx.count(r)) throw FormatError("'" + file.string() + "' lacks column '" + r + "'");
    return idx;
}

double to_double(const std::string& s, const fs::path& file) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError("'" + file.string() + "': not a number: '" + s + "'");
    }
}

}  // namespace

ResultsTable read_results(const fs::path& dir) {
    ResultsTable t;
    const auto rfile = dir / "results.csv";
    const auto rows = read_csv(rfile, &t.header);
    if (rows.empty()) throw FormatError("'" + rfile.string() + "' is empty");
    const auto c = column_index(rows[0], {"model", "group", "fold", "n_trials", "balanced_accuracy", "macro_f1"}, rfile);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != rows[0].size()) throw FormatError("'" + rfile.string() + "': ragged row " + std::to_string(i));
        t.folds.push_back({r[c.at("model")], r[c.at("group")], r[c.at("fold")],
                           static_cast<std::size_t>(to_double(r[c.at("n_trials")], rfile)),
                           to_double(r[c.at("balanced_accuracy")], rfile), to_double(r[c.at("macro_f1")], rfile)});
    }
    const auto pfile = dir / "predictions.csv";
    if (fs::exists(pfile)) {
        const auto prow = read_csv(pfile);
        if (!prow.empty()) {
            const auto p = column_index(prow[0], {"model", "fold", "trial", "truth", "predicted"}, pfile);
            for (std::size_t i = 1; i < prow.size(); ++i) {
                const auto& r = prow[i];
                if (r.size() != prow[0].size())
                    throw FormatError("'" + pfile.string() + "': ragged row " + std::to_string(i));
                t.predictions.push_back({r[p.at("model")], r[p.at("fold")],
                                         static_cast<std::size_t>(to_double(r[p.at("trial")], pfile)),
                                         static_cast<int>(to_double(r[p.at("truth")], pfile)),
                                         static_cast<int>(to_double(r[p.at("predicted")], pfile))});
            }
        }
    }
    return t;
}

std::string confusion_csv(const Matrix& confusion, const std::vector<std::string>& class_names, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\ntrue\\predicted";
    auto name = [&](Index k) {
        return static_cast<std::size_t>(k) < class_names.size() ? class_names[static_cast<std::size_t>(k)]
                                                                : std::to_string(k);
    };
    for (Index k = 0; k < confusion.cols(); ++k) s << ',' << name(k);
    s << '\n';
    for (Index i = 0; i < confusion.rows(); ++i) {
        s << name(i);
        for (Index k = 0; k < confusion.cols(); ++k) s << ',' << fmt(confusion(i, k));
        s << '\n';
    }
    return s.str();
}

std::string audit_json(const harness::RunResult& run, const Header& h) {
    nlohmann::ordered_json j;
    j["version"] = h.version;
    j["config_hash"] = h.config_hash;
    j["seed"] = h.seed;
    j["passed"] = run.audit_passed();
    j["checkpoints"] = nlohmann::ordered_json::array();
    for (const auto& v : run.verdicts)
        j["checkpoints"].push_back({{"checkpoint", v.checkpoint}, {"name", v.name}, {"pass", v.pass}, {"witness", v.witness}});
    j["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : run.trail.folds)
        j["folds"].push_back({{"test_subject", f.test_subject},
                              {"train_trials", f.train.size()},
                              {"test_trials", f.test.size()},
                              {"validation_trials", f.validation.size()}});
    j["records"] = nlohmann::ordered_json::array();
    for (const auto& r : run.trail.records)
        j["records"].push_back(
            {{"fold", r.fold}, {"operation", r.operation}, {"fit_scope", r.fit_scope}, {"trials", r.data_scope.size()}});
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- statistics

std::vector<stats::StatReport> benchmark_stats(const ResultsTable& t, const StatsOptions& opt) {
    const auto models = t.models();
    if (models.empty()) throw DomainError("benchmark_stats: no results");
    const int classes = t.classes();
    if (classes < 2) throw DomainError("benchmark_stats: predictions missing or single-class");
    const double chance = 1.0 / classes;
    const auto folds = t.fold_ids(models.front());
    for (const auto& m : models)
        if (t.fold_ids(m) != folds) throw DomainError("benchmark_stats: model '" + m + "' has different folds");

    std::vector<stats::StatReport> out;
    std::vector<stats::StatReport> vs_chance;
    for (const auto& m : models) {
        const auto acc = t.accuracies(m);
        auto r = stats::wilcoxon_signed_rank(acc, chance, stats::Alternative::one_sided_greater);
        r.test = "wilcoxon_vs_chance:" + m;
        r.effect = acc.size() >= 2 ? harness::cohens_d(acc, chance) : 0.0;
        vs_chance.push_back(r);
    }
    stats::correct(vs_chance, stats::Correction::bonferroni);
    out.insert(out.end(), vs_chance.begin(), vs_chance.end());

    auto paired = [&](const std::string& a, const std::string& b) {
        const auto xa = t.accuracies(a), xb = t.accuracies(b);
        std::vector<double> diff(xa.size());
        for (std::size_t i = 0; i < xa.size(); ++i) diff[i] = xa[i] - xb[i];
        auto r = stats::wilcoxon_signed_rank(diff, 0.0, stats::Alternative::two_sided);
        const double sd = harness::sample_sd(diff);
        r.effect = sd > 0.0 ? harness::mean(diff) / sd : 0.0;
        return r;
    };

    if (models.size() >= 2) {
        if (opt.pairwise_models) {
            std::vector<stats::StatReport> pairs;
            for (std::size_t i = 0; i < models.size(); ++i)
                for (std::size_t j = i + 1; j < models.size(); ++j) {
                    auto r = paired(models[i], models[j]);
                    r.test = "wilcoxon_pair:" + models[i] + "|" + models[j];
                    pairs.push_back(r);
                }
            stats::correct(pairs, stats::Correction::bh_fdr);
            out.insert(out.end(), pairs.begin(), pairs.end());
        }
        if (folds.size() >= 2) {
            Matrix scores(static_cast<Index>(folds.size()), static_cast<Index>(models.size()));
            for (std::size_t j = 0; j < models.size(); ++j) {
                const auto acc = t.accuracies(models[j]);
                for (std::size_t i = 0; i < acc.size(); ++i)
                    scores(static_cast<Index>(i), static_cast<Index>(j)) = acc[i];
            }
            out.push_back(stats::friedman(scores));
        }
    }

    // best representative per group, compared pairwise
    std::vector<std::pair<std::string, std::string>> best_of_group;  // group, model
    for (const auto& m : models) {
        const auto g = t.group(m);
        if (g.empty() || g == "ensemble") continue;
        auto it = std::find_if(best_of_group.begin(), best_of_group.end(), [&](const auto& p) { return p.first == g; });
        if (it == best_of_group.end()) best_of_group.push_back({g, m});
        else if (harness::mean(t.accuracies(m)) > harness::mean(t.accuracies(it->second))) it->second = m;
    }
    for (std::size_t i = 0; i < best_of_group.size(); ++i)
        for (std::size_t j = i + 1; j < best_of_group.size(); ++j) {
            auto r = paired(best_of_group[i].second, best_of_group[j].second);
            r.test = "group:" + best_of_group[i].first + "_vs_" + best_of_group[j].first + ":" +
                     best_of_group[i].second + "|" + best_of_group[j].second;
            out.push_back(r);
        }

    std::string best = opt.best_model;
    if (best.empty()) {
        best = models.front();
        for (const auto& m : models)
            if (harness::mean(t.accuracies(m)) > harness::mean(t.accuracies(best))) best = m;
    } else if (std::find(models.begin(), models.end(), best) == models.end()) {
        throw DomainError("benchmark_stats: best model '" + best + "' not in results");
    }
    std::vector<stats::FoldPredictions> fp;
    for (const auto& f : folds) {
        stats::FoldPredictions p;
        for (const auto& row : t.predictions)
            if (row.model == best && row.fold == f) {
                p.truth.push_back(row.truth);
                p.predicted.push_back(row.predicted);
            }
        fp.push_back(std::move(p));
    }
    auto perm = stats::permutation_test(fp, classes, opt.n_perm, opt.seed, opt.threads);
    perm.test = "permutation:" + best;
    out.push_back(perm);
    for (const auto& r : out) r.validate();
    return out;
}

std::string stats_csv(const std::vector<stats::StatReport>& reports, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\ntest,statistic_name,statistic,p_raw,p_corrected,correction,m,alternative,effect\n";
    for (const auto& r : reports)
        s << r.test << ',' << r.statistic_name << ',' << fmt(r.statistic) << ',' << fmt(r.p_raw) << ','
          << fmt(r.p_corrected) << ',' << stats::correction_name(r.correction) << ',' << r.m << ','
          << stats::alternative_name(r.alternative) << ',' << fmt(r.effect) << '\n';
    return s.str();
}

std::vector<stats::StatReport> read_stats(const fs::path& file) {
    const auto rows = read_csv(file);
    if (rows.empty()) throw FormatError("'" + file.string() + "' is empty");
    const auto c = column_index(rows[0], {"test", "statistic_name", "statistic", "p_raw", "p_corrected", "correction", "m"}, file);
    std::vector<stats::StatReport> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        stats::StatReport s;
        s.test = r.at(c.at("test"));
        s.statistic_name = r.at(c.at("statistic_name"));
        s.statistic = to_double(r.at(c.at("statistic")), file);
        s.p_raw = to_double(r.at(c.at("p_raw")), file);
        s.p_corrected = to_double(r.at(c.at("p_corrected")), file);
        const auto& corr = r.at(c.at("correction"));
        s.correction = corr == "bonferroni" ? stats::Correction::bonferroni
                       : corr == "bh_fdr"   ? stats::Correction::bh_fdr
                                            : stats::Correction::none;
        s.m = static_cast<int>(to_double(r.at(c.at("m")), file));
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------- summary

std::vector<SummaryRow> summarize(const ResultsTable& t, const std::vector<stats::StatReport>& reports) {
    const int classes = std::max(2, t.classes());
    std::vector<SummaryRow> out;
    for (const auto& m : t.models()) {
        SummaryRow row;
        row.model = m;
        row.group = t.group(m);
        const auto acc = t.accuracies(m);
        row.mean = harness::mean(acc);
        row.sd = harness::sample_sd(acc);
        std::vector<double> f1;
        for (const auto& f : t.folds)
            if (f.model == m) f1.push_back(f.macro_f1);
        row.macro_f1 = harness::mean(f1);
        row.d = acc.size() >= 2 ? harness::cohens_d(acc, 1.0 / classes) : 0.0;
        for (const auto& r : reports)
            if (r.test == "wilcoxon_vs_chance:" + m) {
                row.p_raw = r.p_raw;
                row.p_bonf = r.p_corrected;
            }
        out.push_back(row);
    }
    return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\nmodel,group,balanced_accuracy_mean,balanced_accuracy_sd,macro_f1,cohens_d,p_raw,p_bonf\n";
    for (const auto& r : rows)
        s << r.model << ',' << r.group << ',' << fmt(r.mean) << ',' << fmt(r.sd) << ',' << fmt(r.macro_f1) << ','
          << fmt(r.d) << ',' << fmt(r.p_raw) << ',' << fmt(r.p_bonf) << '\n';
    return s.str();
}

std::string summary_text(const std::vector<SummaryRow>& rows) {
    auto sorted = rows;
    std::stable_sort(sorted.begin(), sorted.end(), [](const SummaryRow& a, const SummaryRow& b) { return a.mean > b.mean; });
    std::ostringstream s;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %-11s %-16s %-8s %-8s %-8s\n", "Model", "Group", "Bal. Acc (%)", "F1",
                  "Cohen d", "p_Bonf");
    s << buf;
    for (const auto& r : sorted) {
        std::snprintf(buf, sizeof buf, "%-16s %-11s %6.1f +/- %-6.1f %-8.3f %-8.2f %-8.3f\n", r.model.c_str(),
                      r.group.c_str(), 100.0 * r.mean, 100.0 * r.sd, r.macro_f1, r.d, r.p_bonf);
        s << buf;
    }
    return s.str();
}

// ---------------------------------------------------------------- analyses

std::string pairwise_csv(const std::vector<analyses::TaskRow>& rows, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\npair,chance,acc_mean,acc_sd,d,p_raw,p_bonf,m\n";
    for (const auto& r : rows)
        s << r.label << ',' << fmt(r.chance) << ',' << fmt(r.mean) << ',' << fmt(r.sd) << ',' << fmt(r.d) << ','
          << fmt(r.test.p_raw) << ',' << fmt(r.test.p_corrected) << ',' << r.test.m << '\n';
    return s.str();
}

std::string rsa_csv(const stats::StatReport& r, const std::vector<std::string>& pairs,
                    const std::vector<double>& distances, const std::vector<double>& accuracies, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\npair,acoustic_distance,pair_accuracy,neural_confusion\n";
    for (std::size_t i = 0; i < pairs.size(); ++i)
        s << pairs[i] << ',' << fmt(distances[i]) << ',' << fmt(accuracies[i]) << ',' << fmt(1.0 - accuracies[i]) << '\n';
    s << "spearman_rho," << fmt(r.statistic) << ",p," << fmt(r.p_raw) << '\n';
    return s.str();
}

std::string importance_csv(const std::vector<std::string>& channels, const std::vector<double>& shares, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\nchannel,share\n";
    for (std::size_t i = 0; i < channels.size(); ++i) s << channels[i] << ',' << fmt(shares[i]) << '\n';
    return s.str();
}

std::string dropout_csv(const std::vector<analyses::DropoutPoint>& top, const std::vector<analyses::DropoutPoint>& bottom,
                        const Header& h) {
    std::ostringstream s;
    s << h.line() << "\ndirection,k,acc_mean,acc_sd\n";
    for (const auto& p : top) s << "top," << p.k << ',' << fmt(p.mean) << ',' << fmt(p.sd) << '\n';
    for (const auto& p : bottom) s << "bottom," << p.k << ',' << fmt(p.mean) << ',' << fmt(p.sd) << '\n';
    return s.str();
}

std::string erp_csv(const analyses::ErpResult& r, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\nvowel,channel,component,peak_uv,latency_ms\n";
    for (const auto& p : r.peaks)
        s << p.vowel << ',' << p.channel << ',' << p.component << ',' << fmt(p.peak_uv) << ',' << fmt(p.latency_ms) << '\n';
    for (std::size_t i = 0; i < r.anova.size(); ++i)
        s << "anova," << r.anova_labels[i] << ",F=" << fmt(r.anova[i].statistic) << ",p=" << fmt(r.anova[i].p_raw)
          << ",eta2p=" << fmt(r.anova[i].effect) << '\n';
    return s.str();
}

std::string ablation_csv(const std::string& axis, const std::vector<harness::AblationRow>& rows, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\naxis,label,dims,acc_mean,acc_sd,delta_vs_chance\n";
    for (const auto& r : rows)
        s << axis << ',' << r.label << ',' << r.dims << ',' << fmt(r.mean) << ',' << fmt(r.sd) << ','
          << fmt(r.delta_vs_chance) << '\n';
    return s.str();
}

std::string tgm_csv(const Matrix& m, const std::vector<Index>& points, double fs, double tmin, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\ntrain_time_s";
    for (Index p : points) s << ',' << fmt(tmin + static_cast<double>(p) / fs);
    s << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        s << fmt(tmin + static_cast<double>(points[static_cast<std::size_t>(i)]) / fs);
        for (Index j = 0; j < m.cols(); ++j) s << ',' << fmt(m(i, j));
        s << '\n';
    }
    return s.str();
}

std::string within_subject_csv(const std::string& model, const std::vector<harness::SubjectCv>& rows, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\nmodel,subject,fold,balanced_accuracy\n";
    for (const auto& r : rows)
        for (const auto& f : r.folds) s << model << ',' << r.subject << ',' << f.fold << ',' << fmt(f.balanced_accuracy) << '\n';
    return s.str();
}

std::string learning_curve_csv(const std::string& model, const std::vector<harness::CurvePoint>& rows, const Header& h) {
    std::ostringstream s;
    s << h.line() << "\nmodel,n_train,rep,balanced_accuracy\n";
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.accuracies.size(); ++i)
            s << model << ',' << r.n_train << ',' << i << ',' << fmt(r.accuracies[i]) << '\n';
    return s.str();
}

}  // namespace eegbench::report
