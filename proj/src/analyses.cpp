#include "eegbench/analyses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace eegbench::analyses {

namespace {

int class_of(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DomainError("unknown class '" + name + "'");
    return static_cast<int>(it - names.begin());
}

}  // namespace

std::vector<TaskRow> pairwise_tasks(const EpochSet& epochs, const harness::PipelineSpec& pipeline,
                                    const harness::EvalOptions& opt, const std::vector<std::string>& class_names) {
    if (class_names.size() != 5) throw DomainError("pairwise_tasks: expects five vowel classes");
    std::vector<int> present(5, 0);
    for (int y : epochs.labels)
        if (y >= 0 && y < 5) present[static_cast<std::size_t>(y)] = 1;
    for (int c = 0; c < 5; ++c)
        if (!present[static_cast<std::size_t>(c)])
            throw DomainError("pairwise_tasks: class '" + class_names[static_cast<std::size_t>(c)] + "' has no trials");

    std::vector<std::vector<int>> tasks;
    for (int a = 0; a < 5; ++a)
        for (int b = a + 1; b < 5; ++b) tasks.push_back({a, b});
    for (const char* t : {"aei", "aiu", "iou"}) {
        std::vector<int> cls;
        for (const char* p = t; *p; ++p) cls.push_back(class_of(class_names, std::string(1, *p)));
        tasks.push_back(cls);
    }

    std::vector<TaskRow> rows;
    for (const auto& cls : tasks) {
        TaskRow row;
        row.classes = cls;
        for (std::size_t i = 0; i < cls.size(); ++i) {
            if (cls.size() == 2 && i) row.label += "-";
            row.label += class_names[static_cast<std::size_t>(cls[i])];
        }
        row.chance = 1.0 / static_cast<double>(cls.size());
        harness::PipelineSpec p = pipeline;
        p.name = row.label;
        const auto run = harness::loso(harness::select_classes(epochs, cls), {p}, opt);
        row.accuracies = run.pipelines.front().fold_accuracies();
        row.mean = harness::mean(row.accuracies);
        row.sd = harness::sample_sd(row.accuracies);
        row.d = row.accuracies.size() >= 2 ? harness::cohens_d(row.accuracies, row.chance) : 0.0;
        row.test = stats::wilcoxon_signed_rank(row.accuracies, row.chance, stats::Alternative::one_sided_greater);
        row.test.test = "wilcoxon:" + row.label;
        rows.push_back(std::move(row));
    }
    for (std::size_t begin : {std::size_t{0}, std::size_t{10}}) {
        const std::size_t end = begin == 0 ? 10 : rows.size();
        std::vector<stats::StatReport> family;
        for (std::size_t i = begin; i < end; ++i) family.push_back(rows[i].test);
        stats::correct(family, stats::Correction::bonferroni);
        for (std::size_t i = begin; i < end; ++i) rows[i].test = family[i - begin];
    }
    return rows;
}

double bark(double hz) {
    if (!(hz > 0.0)) throw DomainError("bark: frequency must be positive");
    return 26.81 * hz / (1960.0 + hz) - 0.53;
}

void FormantTable::validate() const {
    if (vowels.size() != f1.size() || vowels.size() != f2.size()) throw ConfigError("formant table: ragged columns");
    if (vowels.size() < 2) throw ConfigError("formant table: need at least two vowels");
    for (std::size_t i = 0; i < vowels.size(); ++i)
        if (!(f1[i] > 0.0) || !(f2[i] > 0.0)) throw ConfigError("formant table: formants must be positive");
}

Matrix acoustic_distances(const FormantTable& table) {
    table.validate();
    const auto n = static_cast<Index>(table.vowels.size());
    Matrix d = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
            const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
            d(i, j) = d(j, i) = std::hypot(bark(table.f1[a]) - bark(table.f1[b]), bark(table.f2[a]) - bark(table.f2[b]));
        }
    return d;
}

std::vector<double> condensed(const Matrix& m) {
    if (m.rows() != m.cols()) throw DomainError("condensed: matrix must be square");
    std::vector<double> out;
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = i + 1; j < m.cols(); ++j) out.push_back(m(i, j));
    return out;
}

stats::StatReport rsa(const Matrix& acoustic, const std::vector<double>& pair_accuracies, int n_perm,
                      std::uint64_t seed) {
    const auto dist = condensed(acoustic);
    if (dist.size() != pair_accuracies.size())
        throw DomainError("rsa: " + std::to_string(dist.size()) + " acoustic pairs vs " +
                          std::to_string(pair_accuracies.size()) + " accuracies");
    std::vector<double> confusion;
    for (double a : pair_accuracies) confusion.push_back(1.0 - a);
    auto r = stats::spearman(dist, confusion, n_perm, seed);
    r.test = "rsa_spearman";
    return r;
}

std::vector<double> electrode_importance(const std::vector<Vector>& fold_importances,
                                         const std::vector<features::Column>& registry, Index channels) {
    if (fold_importances.empty()) throw DomainError("electrode_importance: no folds");
    for (const auto& col : registry)
        if (col.channel < 0 || col.channel >= channels)
            throw DomainError("electrode_importance: column '" + features::family_name(col.family) + ":" + col.detail +
                              "' has no channel");
    Vector avg = Vector::Zero(static_cast<Index>(registry.size()));
    for (const auto& f : fold_importances) {
        if (f.size() != avg.size()) throw DomainError("electrode_importance: importance length differs from registry");
        avg += f;
    }
    avg /= static_cast<double>(fold_importances.size());
    std::vector<double> share(static_cast<std::size_t>(channels), 0.0);
    for (std::size_t j = 0; j < registry.size(); ++j)
        share[static_cast<std::size_t>(registry[j].channel)] += avg(static_cast<Index>(j));
    const double total = std::accumulate(share.begin(), share.end(), 0.0);
    if (total <= 0.0) {
        warn("electrode_importance: all importances are zero, returning uniform shares");
        std::fill(share.begin(), share.end(), 1.0 / static_cast<double>(channels));
        return share;
    }
    for (double& s : share) s /= total;
    return share;
}

std::vector<Index> rank_channels(const std::vector<double>& shares) {
    std::vector<Index> order(shares.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return shares[static_cast<std::size_t>(a)] > shares[static_cast<std::size_t>(b)];
    });
    return order;
}

std::vector<DropoutPoint> channel_dropout(const EpochSet& epochs, const std::vector<Index>& ranking,
                                          const std::vector<int>& ks, Direction direction,
                                          const harness::PipelineSpec& pipeline, const harness::EvalOptions& opt) {
    if (static_cast<Index>(ranking.size()) != epochs.channels())
        throw DomainError("channel_dropout: ranking must list every channel once");
    std::vector<DropoutPoint> out;
    for (int k : ks) {
        if (k < 0 || k >= epochs.channels())
            throw DomainError("channel_dropout: K=" + std::to_string(k) + " must be below the channel count");
        DropoutPoint point;
        point.k = k;
        for (int i = 0; i < k; ++i)
            point.dropped.push_back(direction == Direction::top ? ranking[static_cast<std::size_t>(i)]
                                                                : ranking[ranking.size() - 1 - static_cast<std::size_t>(i)]);
        const auto run = harness::loso(k ? harness::zero_channels(epochs, point.dropped) : epochs, {pipeline}, opt);
        point.accuracies = run.pipelines.front().fold_accuracies();
        point.mean = harness::mean(point.accuracies);
        point.sd = harness::sample_sd(point.accuracies);
        out.push_back(std::move(point));
    }
    return out;
}

ErpResult erp(const EpochSet& epochs, const std::vector<std::string>& channels, const std::vector<ErpWindow>& windows,
              const std::vector<std::string>& class_names) {
    epochs.validate();
    const int classes = static_cast<int>(class_names.size());
    std::vector<Index> rows;
    for (const auto& ch : channels) {
        const int c = epochs.channel_index(ch);
        if (c < 0) throw DomainError("erp: channel '" + ch + "' missing");
        rows.push_back(c);
    }
    const Index n = epochs.samples();
    auto time_of = [&](Index i) { return epochs.tmin + static_cast<double>(i) / epochs.fs; };
    std::vector<std::pair<Index, Index>> spans;
    for (const auto& w : windows) {
        Index lo = -1, hi = -1;
        for (Index i = 0; i < n; ++i)
            if (time_of(i) >= w.start - 1e-9 && time_of(i) <= w.end + 1e-9) {
                if (lo < 0) lo = i;
                hi = i;
            }
        if (lo < 0) throw DomainError("erp: window " + w.component + " lies outside the epoch");
        spans.push_back({lo, hi});
    }

    // per subject, per class average waveform for every requested channel
    const auto subjects = epochs.subject_ids();
    std::map<std::string, std::size_t> subject_pos;
    for (std::size_t s = 0; s < subjects.size(); ++s) subject_pos[subjects[s]] = s;
    const auto nch = static_cast<Index>(rows.size());
    std::vector<std::vector<Matrix>> sums(subjects.size(), std::vector<Matrix>(static_cast<std::size_t>(classes)));
    std::vector<std::vector<int>> counts(subjects.size(), std::vector<int>(static_cast<std::size_t>(classes), 0));
    for (std::size_t t = 0; t < epochs.trials(); ++t) {
        const int y = epochs.labels[t];
        if (y < 0 || y >= classes) throw DomainError("erp: label outside the class list");
        const std::size_t s = subject_pos[epochs.subjects[t]];
        auto& acc = sums[s][static_cast<std::size_t>(y)];
        if (acc.size() == 0) acc = Matrix::Zero(nch, n);
        for (Index r = 0; r < nch; ++r) acc.row(r) += epochs.data[t].row(rows[static_cast<std::size_t>(r)]);
        ++counts[s][static_cast<std::size_t>(y)];
    }

    ErpResult out;
    out.waveforms.assign(static_cast<std::size_t>(nch), Matrix::Zero(classes, n));
    std::vector<int> contributing(static_cast<std::size_t>(classes), 0);
    for (std::size_t s = 0; s < subjects.size(); ++s)
        for (int k = 0; k < classes; ++k) {
            const int cnt = counts[s][static_cast<std::size_t>(k)];
            if (!cnt) continue;
            Matrix& m = sums[s][static_cast<std::size_t>(k)];
            m /= static_cast<double>(cnt);
            for (Index r = 0; r < nch; ++r) out.waveforms[static_cast<std::size_t>(r)].row(k) += m.row(r);
            ++contributing[static_cast<std::size_t>(k)];
        }
    for (auto& w : out.waveforms)
        for (int k = 0; k < classes; ++k)
            if (contributing[static_cast<std::size_t>(k)]) w.row(k) /= contributing[static_cast<std::size_t>(k)];

    auto pick = [&](const Eigen::Ref<const Eigen::RowVectorXd>& wave, std::size_t wi) {
        const auto [lo, hi] = spans[wi];
        Index at = lo;
        for (Index i = lo; i <= hi; ++i)
            if (windows[wi].negative ? wave(i) < wave(at) : wave(i) > wave(at)) at = i;
        return std::pair{wave(at), at};
    };

    for (Index r = 0; r < nch; ++r) {
        for (std::size_t wi = 0; wi < windows.size(); ++wi) {
            for (int k = 0; k < classes; ++k) {
                if (!contributing[static_cast<std::size_t>(k)]) continue;
                const auto [value, at] = pick(out.waveforms[static_cast<std::size_t>(r)].row(k), wi);
                out.peaks.push_back({class_names[static_cast<std::size_t>(k)], channels[static_cast<std::size_t>(r)],
                                     windows[wi].component, value, 1000.0 * time_of(at)});
            }
            std::vector<std::vector<double>> groups;
            for (int k = 0; k < classes; ++k) {
                std::vector<double> g;
                for (std::size_t s = 0; s < subjects.size(); ++s)
                    if (counts[s][static_cast<std::size_t>(k)])
                        g.push_back(pick(sums[s][static_cast<std::size_t>(k)].row(r), wi).first);
                if (!g.empty()) groups.push_back(std::move(g));
            }
            auto report = stats::anova_oneway(groups);
            const std::string label = channels[static_cast<std::size_t>(r)] + ":" + windows[wi].component;
            report.test = "anova:" + label;
            out.anova.push_back(report);
            out.anova_labels.push_back(label);
        }
    }
    return out;
}

}  // namespace eegbench::analyses
