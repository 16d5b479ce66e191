#include "eegbench/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "eegbench/seed.hpp"

namespace eegbench::config {

using nlohmann::json;

namespace {

// Strict view of one JSON object: every key must be consumed.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(where() + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    template <class T>
    void opt(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + ": wrong type");
        }
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    Obj child(const std::string& key) { return Obj(raw(key), where(key)); }

    std::string where(const std::string& key = "") const {
        const std::string base = path_.empty() ? "config" : path_;
        return key.empty() ? base : (path_.empty() ? key : path_ + "." + key);
    }

    void done() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown key '" + where(k) + "'");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<features::Family> parse_families(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected a list of feature families");
    std::vector<features::Family> out;
    for (const auto& v : j) {
        if (!v.is_string()) throw ConfigError(where + ": family names must be strings");
        try {
            out.push_back(features::parse_family(v.get<std::string>()));
        } catch (const Error& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    return out;
}

json families_json(const std::vector<features::Family>& fams) {
    json a = json::array();
    for (auto f : fams) a.push_back(features::family_name(f));
    return a;
}

classify::ClassifierSpec defaults_for(classify::Kind kind, std::uint64_t seed) {
    switch (kind) {
        case classify::Kind::gbdt: return classify::gbdt_spec(seed);
        case classify::Kind::random_forest: return classify::random_forest_spec(seed);
        case classify::Kind::linear_svm: return classify::linear_svm_spec(seed);
        case classify::Kind::logistic: return classify::logistic_spec();
        case classify::Kind::stacking: return classify::stacking_spec(seed);
        default: {
            classify::ClassifierSpec s = classify::lda_spec();
            s.kind = kind;
            return s;
        }
    }
}

classify::ClassifierSpec parse_classifier(const json& j, const std::string& path, std::uint64_t seed) {
    Obj o(j, path);
    std::string kind;
    o.opt("kind", kind);
    if (kind.empty()) throw ConfigError(o.where("kind") + ": required");
    classify::Kind k;
    try {
        k = classify::parse_kind(kind);
    } catch (const Error& e) {
        throw ConfigError(o.where("kind") + ": " + e.what());
    }
    auto s = defaults_for(k, seed);
    o.opt("seed", s.seed);
    o.opt("n_estimators", s.n_estimators);
    o.opt("num_leaves", s.num_leaves);
    o.opt("learning_rate", s.learning_rate);
    o.opt("min_child_samples", s.min_child_samples);
    o.opt("max_bins", s.max_bins);
    o.opt("min_samples_leaf", s.min_samples_leaf);
    o.opt("shrinkage", s.shrinkage);
    o.opt("C", s.C);
    o.opt("max_iter", s.max_iter);
    o.opt("tol", s.tol);
    o.opt("inner_k", s.inner_k);
    if (o.has("bases")) {
        const auto& b = o.raw("bases");
        if (!b.is_array()) throw ConfigError(o.where("bases") + ": expected a list");
        s.bases.clear();
        for (std::size_t i = 0; i < b.size(); ++i)
            s.bases.push_back(parse_classifier(b[i], o.where("bases") + "[" + std::to_string(i) + "]", seed));
    }
    if (o.has("meta")) s.meta = {parse_classifier(o.raw("meta"), o.where("meta"), seed)};
    o.done();
    try {
        s.validate();
    } catch (const Error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return s;
}

json classifier_json(const classify::ClassifierSpec& s) {
    json j;
    j["kind"] = classify::kind_name(s.kind);
    j["seed"] = s.seed;
    j["n_estimators"] = s.n_estimators;
    j["num_leaves"] = s.num_leaves;
    j["learning_rate"] = s.learning_rate;
    j["min_child_samples"] = s.min_child_samples;
    j["max_bins"] = s.max_bins;
    j["min_samples_leaf"] = s.min_samples_leaf;
    j["shrinkage"] = s.shrinkage;
    j["C"] = s.C;
    j["max_iter"] = s.max_iter;
    j["tol"] = s.tol;
    j["inner_k"] = s.inner_k;
    if (!s.bases.empty()) {
        j["bases"] = json::array();
        for (const auto& b : s.bases) j["bases"].push_back(classifier_json(b));
    }
    if (!s.meta.empty()) j["meta"] = classifier_json(s.meta.front());
    return j;
}

NamedPipeline parse_pipeline(const json& j, const std::string& path, const RunConfig& cfg) {
    Obj o(j, path);
    NamedPipeline p;
    auto& s = p.spec;
    s.families = cfg.families;
    s.bands = cfg.bands;
    s.pca_components = cfg.pca_components;
    o.opt("name", s.name);
    if (s.name.empty()) throw ConfigError(o.where("name") + ": required");
    if (s.name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.+-") != std::string::npos)
        throw ConfigError(o.where("name") + ": use letters, digits and _ . + - only");
    std::string input = "features";
    o.opt("input", input);
    try {
        s.input = harness::parse_input(input);
    } catch (const Error& e) {
        throw ConfigError(o.where("input") + ": " + e.what());
    }
    o.opt("group", p.group);
    if (o.has("families")) s.families = parse_families(o.raw("families"), o.where("families"));
    o.opt("pca_components", s.pca_components);
    o.opt("euclidean_alignment", s.euclidean_alignment);
    o.opt("normalize", s.normalize);
    o.opt("collect_importance", s.collect_importance);
    o.opt("vote", s.vote);
    if (o.has("classifier")) s.classifier = parse_classifier(o.raw("classifier"), o.where("classifier"), cfg.seed);
    else if (s.input == harness::Input::features || s.input == harness::Input::tangent)
        throw ConfigError(o.where("classifier") + ": required for input '" + input + "'");
    o.done();
    if (p.group.empty()) p.group = s.input == harness::Input::vote ? "ensemble"
                                   : (s.input == harness::Input::features ? "classical" : "riemannian");
    return p;
}

json pipeline_json(const NamedPipeline& p) {
    const auto& s = p.spec;
    json j;
    j["name"] = s.name;
    j["input"] = harness::input_name(s.input);
    j["group"] = p.group;
    j["families"] = families_json(s.families);
    j["pca_components"] = s.pca_components;
    j["euclidean_alignment"] = s.euclidean_alignment;
    j["normalize"] = s.normalize;
    j["collect_importance"] = s.collect_importance;
    j["vote"] = s.vote;
    if (s.input == harness::Input::features || s.input == harness::Input::tangent)
        j["classifier"] = classifier_json(s.classifier);
    return j;
}

std::vector<harness::GridPoint> parse_grid(const json& j, harness::Axis axis, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty list");
    std::vector<harness::GridPoint> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        Obj o(j[i], path + "[" + std::to_string(i) + "]");
        harness::GridPoint g;
        o.opt("label", g.label);
        if (g.label.empty()) throw ConfigError(o.where("label") + ": required");
        switch (axis) {
            case harness::Axis::feature_family:
                g.families = parse_families(o.raw("families"), o.where("families"));
                break;
            case harness::Axis::time_window:
                o.opt("t0", g.t0);
                o.opt("t1", g.t1);
                if (!(g.t1 > g.t0)) throw ConfigError(o.where() + ": t1 must exceed t0");
                break;
            case harness::Axis::channel_region:
                o.opt("channels", g.channels);
                if (g.channels.empty()) throw ConfigError(o.where("channels") + ": required");
                break;
            case harness::Axis::pca:
                o.opt("components", g.components);
                if (g.components < 0) throw ConfigError(o.where("components") + ": must be >= 0");
                break;
        }
        o.done();
        out.push_back(std::move(g));
    }
    return out;
}

json grid_json(harness::Axis axis, const std::vector<harness::GridPoint>& grid) {
    json a = json::array();
    for (const auto& g : grid) {
        json j;
        j["label"] = g.label;
        switch (axis) {
            case harness::Axis::feature_family: j["families"] = families_json(g.families); break;
            case harness::Axis::time_window:
                j["t0"] = g.t0;
                j["t1"] = g.t1;
                break;
            case harness::Axis::channel_region: j["channels"] = g.channels; break;
            case harness::Axis::pca: j["components"] = g.components; break;
        }
        a.push_back(j);
    }
    return a;
}

void parse_synth(Obj o, synth::SynthSpec& s) {
    o.opt("subjects", s.subjects);
    o.opt("trials_per_class", s.trials_per_class);
    o.opt("class_names", s.class_names);
    if (o.has("channels")) {
        const auto& c = o.raw("channels");
        if (c.is_number_integer()) {
            const int n = c.get<int>();
            const auto& m = synth::standard_montage();
            if (n < 1 || n > static_cast<int>(m.size()))
                throw ConfigError(o.where("channels") + ": count must be in [1, " + std::to_string(m.size()) + "]");
            s.channels.assign(m.begin(), m.begin() + n);
        } else {
            try {
                s.channels = c.get<std::vector<std::string>>();
            } catch (const json::exception&) {
                throw ConfigError(o.where("channels") + ": expected a count or a list of names");
            }
        }
    }
    o.opt("fs", s.fs);
    o.opt("tmin", s.tmin);
    o.opt("tmax", s.tmax);
    o.opt("noise_uv", s.noise_uv);
    o.opt("pink_fraction", s.pink_fraction);
    std::string plant = synth::plant_name(s.plant);
    o.opt("plant", plant);
    try {
        s.plant = synth::parse_plant(plant);
    } catch (const Error& e) {
        throw ConfigError(o.where("plant") + ": " + e.what());
    }
    o.opt("snr", s.snr);
    o.opt("plant_channels", s.plant_channels);
    o.opt("plant_classes", s.plant_classes);
    o.opt("band_hz", s.band_hz);
    o.opt("band_uv", s.band_uv);
    o.opt("erp_latency", s.erp_latency);
    o.opt("erp_width", s.erp_width);
    o.opt("erp_uv", s.erp_uv);
    o.opt("gain_sigma", s.gain_sigma);
    o.opt("jitter_sigma", s.jitter_sigma);
    o.opt("seed", s.seed);
    o.done();
}

json synth_json(const synth::SynthSpec& s) {
    json j;
    j["subjects"] = s.subjects;
    j["trials_per_class"] = s.trials_per_class;
    j["class_names"] = s.class_names;
    j["channels"] = s.channels;
    j["fs"] = s.fs;
    j["tmin"] = s.tmin;
    j["tmax"] = s.tmax;
    j["noise_uv"] = s.noise_uv;
    j["pink_fraction"] = s.pink_fraction;
    j["plant"] = synth::plant_name(s.plant);
    j["snr"] = s.snr;
    j["plant_channels"] = s.plant_channels;
    j["plant_classes"] = s.plant_classes;
    j["band_hz"] = s.band_hz;
    j["band_uv"] = s.band_uv;
    j["erp_latency"] = s.erp_latency;
    j["erp_width"] = s.erp_width;
    j["erp_uv"] = s.erp_uv;
    j["gain_sigma"] = s.gain_sigma;
    j["jitter_sigma"] = s.jitter_sigma;
    j["seed"] = s.seed;
    return j;
}

std::string source_name(Source s) {
    switch (s) {
        case Source::synth: return "synth";
        case Source::archive: return "archive";
        case Source::bids: return "bids";
    }
    return "?";
}

}  // namespace

std::vector<NamedPipeline> default_pipelines(const RunConfig& cfg) {
    std::vector<NamedPipeline> out;
    auto add = [&](std::string name, harness::Input input, classify::ClassifierSpec c, std::string group,
                   bool ea = false) {
        NamedPipeline p;
        p.spec.name = std::move(name);
        p.spec.input = input;
        p.spec.families = cfg.families;
        p.spec.bands = cfg.bands;
        p.spec.pca_components = cfg.pca_components;
        p.spec.euclidean_alignment = ea;
        p.spec.collect_importance = c.kind == classify::Kind::gbdt || c.kind == classify::Kind::random_forest;
        p.spec.classifier = std::move(c);
        p.group = std::move(group);
        out.push_back(std::move(p));
    };
    using harness::Input;
    const auto seed = cfg.seed;
    add("gbdt", Input::features, classify::gbdt_spec(seed), "classical");
    add("random_forest", Input::features, classify::random_forest_spec(seed), "classical");
    add("lda", Input::features, classify::lda_spec(), "classical");
    add("linear_svm", Input::features, classify::linear_svm_spec(seed), "classical");
    add("logistic", Input::features, classify::logistic_spec(), "classical");
    add("stacking", Input::features, classify::stacking_spec(seed), "classical");
    add("mdm", Input::mdm, {}, "riemannian");
    add("mdm_ea", Input::mdm, {}, "riemannian", true);
    add("ts_lda", Input::tangent, classify::lda_spec(), "riemannian");
    add("ts_lda_ea", Input::tangent, classify::lda_spec(), "riemannian", true);
    add("ts_svm", Input::tangent, classify::linear_svm_spec(seed), "riemannian");
    add("ts_svm_ea", Input::tangent, classify::linear_svm_spec(seed), "riemannian", true);
    NamedPipeline vote;
    vote.spec.name = "soft_vote";
    vote.spec.input = Input::vote;
    vote.spec.vote = {"gbdt", "random_forest", "ts_svm_ea", "ts_lda"};
    vote.group = "ensemble";
    out.push_back(std::move(vote));
    return out;
}

std::vector<harness::GridPoint> default_grid(harness::Axis axis) {
    using features::Family;
    std::vector<harness::GridPoint> g;
    switch (axis) {
        case harness::Axis::feature_family:
            g = {{"de", {Family::de}, 0, 0, {}, 0},
                 {"all", {Family::de, Family::bandpower, Family::hjorth, Family::temporal}, 0, 0, {}, 0},
                 {"hjorth", {Family::hjorth}, 0, 0, {}, 0},
                 {"bandpower", {Family::bandpower}, 0, 0, {}, 0},
                 {"temporal", {Family::temporal}, 0, 0, {}, 0}};
            break;
        case harness::Axis::time_window:
            for (auto [a, b] : std::vector<std::pair<double, double>>{
                     {0.0, 1.0}, {0.0, 0.2}, {-0.2, 0.5}, {-0.2, 1.0}, {0.1, 0.6}, {0.0, 0.5}}) {
                char label[48];
                std::snprintf(label, sizeof label, "[%g,%g]", a, b);
                g.push_back({label, {}, a, b, {}, 0});
            }
            break;
        case harness::Axis::pca:
            for (Index c : {Index{0}, Index{30}, Index{50}, Index{100}, Index{200}})
                g.push_back({c ? "pca" + std::to_string(c) : "none", {}, 0, 0, {}, c});
            break;
        case harness::Axis::channel_region:
            throw ConfigError("channel_region ablation needs eval.ablation.grids.channel_region in the config");
    }
    return g;
}

RunConfig parse(const json& doc) {
    RunConfig cfg;
    Obj root(doc, "");
    root.opt("seed", cfg.seed);
    cfg.synth.seed = cfg.seed;

    if (root.has("data")) {
        Obj o = root.child("data");
        std::string source = source_name(cfg.data.source);
        o.opt("source", source);
        if (source == "synth") cfg.data.source = Source::synth;
        else if (source == "archive") cfg.data.source = Source::archive;
        else if (source == "bids") cfg.data.source = Source::bids;
        else throw ConfigError(o.where("source") + ": expected synth, archive or bids");
        o.opt("path", cfg.data.path);
        o.opt("label_map", cfg.data.label_map);
        o.opt("class_names", cfg.data.class_names);
        o.done();
    }
    if (const char* env = std::getenv(kDataRootEnv); env && *env && cfg.data.source != Source::synth)
        cfg.data.path = env;
    if (cfg.data.source != Source::synth && cfg.data.path.empty())
        throw ConfigError("data.path: required for source '" + source_name(cfg.data.source) + "'");
    if (cfg.data.source == Source::bids && cfg.data.label_map.empty())
        throw ConfigError("data.label_map: required for BIDS ingestion");

    if (root.has("preprocess")) {
        Obj o = root.child("preprocess");
        auto& p = cfg.preprocess;
        o.opt("rereference", p.rereference);
        o.opt("resample_fs", p.resample_fs);
        o.opt("bandpass_lo", p.bandpass_lo);
        o.opt("bandpass_hi", p.bandpass_hi);
        o.opt("bandpass_order", p.bandpass_order);
        o.opt("bad_channel_z", p.bad_channel_z);
        o.opt("reject_p2p_uv", p.reject_p2p_uv);
        o.opt("epoch_tmin", p.epoch_tmin);
        o.opt("epoch_tmax", p.epoch_tmax);
        o.opt("baseline_start", p.baseline_start);
        o.opt("baseline_end", p.baseline_end);
        o.done();
        if (!(p.bandpass_hi > p.bandpass_lo) || p.bandpass_lo <= 0.0) throw ConfigError("preprocess: invalid band");
        if (!(p.epoch_tmax > p.epoch_tmin)) throw ConfigError("preprocess: epoch_tmax must exceed epoch_tmin");
        if (!(p.resample_fs > 0.0)) throw ConfigError("preprocess: resample_fs must be positive");
    }

    if (root.has("features")) {
        Obj o = root.child("features");
        if (o.has("families")) cfg.families = parse_families(o.raw("families"), o.where("families"));
        if (o.has("bands")) {
            const auto& b = o.raw("bands");
            if (!b.is_array() || b.empty()) throw ConfigError(o.where("bands") + ": expected a non-empty list");
            cfg.bands.clear();
            for (std::size_t i = 0; i < b.size(); ++i) {
                Obj bo(b[i], o.where("bands") + "[" + std::to_string(i) + "]");
                features::Band band;
                bo.opt("name", band.name);
                bo.opt("lo", band.lo);
                bo.opt("hi", band.hi);
                bo.done();
                if (band.name.empty() || !(band.hi > band.lo) || band.lo < 0.0)
                    throw ConfigError(bo.where() + ": invalid band");
                cfg.bands.push_back(band);
            }
        }
        o.opt("pca_components", cfg.pca_components);
        o.done();
        if (cfg.families.empty()) throw ConfigError("features.families: empty");
    }

    if (root.has("synth")) parse_synth(root.child("synth"), cfg.synth);
    try {
        cfg.synth.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }

    if (root.has("model")) {
        Obj o = root.child("model");
        if (o.has("pipelines")) {
            const auto& list = o.raw("pipelines");
            if (!list.is_array() || list.empty()) throw ConfigError("model.pipelines: expected a non-empty list");
            for (std::size_t i = 0; i < list.size(); ++i)
                cfg.pipelines.push_back(parse_pipeline(list[i], "model.pipelines[" + std::to_string(i) + "]", cfg));
        }
        o.done();
    }
    if (cfg.pipelines.empty()) cfg.pipelines = default_pipelines(cfg);

    if (root.has("eval")) {
        Obj o = root.child("eval");
        auto& e = cfg.eval;
        o.opt("protocol", e.protocol);
        if (e.protocol != "loso" && e.protocol != "within_subject" && e.protocol != "learning_curve")
            throw ConfigError("eval.protocol: expected loso, within_subject or learning_curve");
        o.opt("strict_audit", e.strict_audit);
        std::string inject = harness::injection_name(e.inject);
        o.opt("inject", inject);
        try {
            e.inject = harness::parse_injection(inject);
        } catch (const Error& err) {
            throw ConfigError(std::string("eval.inject: ") + err.what());
        }
        o.opt("threads", e.threads);
        o.opt("k", e.k);
        o.opt("tgm_step", e.tgm_step);
        o.opt("tgm_pipeline", e.tgm_pipeline);
        o.opt("learning_curve_n", e.learning_curve_n);
        o.opt("learning_curve_reps", e.learning_curve_reps);
        if (o.has("ablation")) {
            Obj a = o.child("ablation");
            a.opt("pipeline", e.ablation_pipeline);
            if (a.has("grids")) {
                Obj g(a.raw("grids"), a.where("grids"));
                for (auto axis : {harness::Axis::feature_family, harness::Axis::time_window,
                                  harness::Axis::channel_region, harness::Axis::pca}) {
                    const auto name = harness::axis_name(axis);
                    if (g.has(name)) e.ablation_grids[name] = parse_grid(g.raw(name), axis, g.where(name));
                }
                g.done();
            }
            a.done();
        }
        o.done();
        if (e.threads < 1) throw ConfigError("eval.threads: must be >= 1");
        if (e.k < 2) throw ConfigError("eval.k: must be >= 2");
        if (e.tgm_step < 1) throw ConfigError("eval.tgm_step: must be >= 1");
        if (e.learning_curve_reps < 1) throw ConfigError("eval.learning_curve_reps: must be >= 1");
    }

    if (root.has("stats")) {
        Obj o = root.child("stats");
        o.opt("n_perm", cfg.stats.n_perm);
        o.opt("best_model", cfg.stats.best_model);
        o.opt("pairwise_models", cfg.stats.pairwise_models);
        o.done();
        if (cfg.stats.n_perm < 1) throw ConfigError("stats.n_perm: must be >= 1");
    }

    if (root.has("analyses")) {
        Obj o = root.child("analyses");
        auto& a = cfg.analyses;
        o.opt("pairwise", a.pairwise);
        o.opt("pairwise_pipeline", a.pairwise_pipeline);
        if (o.has("formants")) {
            Obj f = o.child("formants");
            f.opt("vowels", a.formants.vowels);
            f.opt("f1", a.formants.f1);
            f.opt("f2", a.formants.f2);
            f.done();
            a.formants.validate();
            a.has_formants = true;
        }
        o.opt("importance_pipeline", a.importance_pipeline);
        o.opt("dropout_ks", a.dropout_ks);
        o.opt("erp", a.erp);
        o.opt("erp_channels", a.erp_channels);
        o.done();
    }
    root.done();

    // cross-references
    std::set<std::string> names;
    for (const auto& p : cfg.pipelines) names.insert(p.spec.name);
    auto must_name = [&](const std::string& key, const std::string& value) {
        if (!value.empty() && !names.count(value))
            throw ConfigError(key + ": no pipeline named '" + value + "'");
    };
    must_name("stats.best_model", cfg.stats.best_model);
    must_name("eval.tgm_pipeline", cfg.eval.tgm_pipeline);
    must_name("eval.ablation.pipeline", cfg.eval.ablation_pipeline);
    must_name("analyses.pairwise_pipeline", cfg.analyses.pairwise_pipeline);
    must_name("analyses.importance_pipeline", cfg.analyses.importance_pipeline);
    std::set<std::string> seen;
    for (const auto& np : cfg.pipelines) {
        const auto& s = np.spec;
        if (!seen.insert(s.name).second) throw ConfigError("duplicate pipeline name '" + s.name + "'");
        for (const auto& m : s.vote)
            if (!seen.count(m) || m == s.name)
                throw ConfigError("vote pipeline '" + s.name + "' must list earlier pipelines, got '" + m + "'");
    }

    cfg.hash = [&] {
        json canonical = to_json(cfg);
        canonical["eval"].erase("threads");  // results do not depend on it
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical.dump())));
        return std::string(buf);
    }();
    return cfg;
}

RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse(doc);
}

json to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["data"] = {{"source", source_name(cfg.data.source)},
                 {"path", cfg.data.path},
                 {"label_map", cfg.data.label_map},
                 {"class_names", cfg.data.class_names}};
    const auto& p = cfg.preprocess;
    j["preprocess"] = {{"rereference", p.rereference},     {"resample_fs", p.resample_fs},
                       {"bandpass_lo", p.bandpass_lo},     {"bandpass_hi", p.bandpass_hi},
                       {"bandpass_order", p.bandpass_order}, {"bad_channel_z", p.bad_channel_z},
                       {"reject_p2p_uv", p.reject_p2p_uv}, {"epoch_tmin", p.epoch_tmin},
                       {"epoch_tmax", p.epoch_tmax},       {"baseline_start", p.baseline_start},
                       {"baseline_end", p.baseline_end}};
    json bands = json::array();
    for (const auto& b : cfg.bands) bands.push_back({{"name", b.name}, {"lo", b.lo}, {"hi", b.hi}});
    j["features"] = {{"families", families_json(cfg.families)}, {"bands", bands}, {"pca_components", cfg.pca_components}};
    json pipes = json::array();
    for (const auto& np : cfg.pipelines) pipes.push_back(pipeline_json(np));
    j["model"] = {{"pipelines", pipes}};
    const auto& e = cfg.eval;
    json grids = json::object();
    for (const auto& [name, grid] : e.ablation_grids) grids[name] = grid_json(harness::parse_axis(name), grid);
    j["eval"] = {{"protocol", e.protocol},
                 {"strict_audit", e.strict_audit},
                 {"inject", harness::injection_name(e.inject)},
                 {"threads", e.threads},
                 {"k", e.k},
                 {"tgm_step", e.tgm_step},
                 {"tgm_pipeline", e.tgm_pipeline},
                 {"learning_curve_n", e.learning_curve_n},
                 {"learning_curve_reps", e.learning_curve_reps},
                 {"ablation", {{"pipeline", e.ablation_pipeline}, {"grids", grids}}}};
    j["stats"] = {{"n_perm", cfg.stats.n_perm},
                  {"best_model", cfg.stats.best_model},
                  {"pairwise_models", cfg.stats.pairwise_models}};
    const auto& a = cfg.analyses;
    json an = {{"pairwise", a.pairwise},
               {"pairwise_pipeline", a.pairwise_pipeline},
               {"importance_pipeline", a.importance_pipeline},
               {"dropout_ks", a.dropout_ks},
               {"erp", a.erp},
               {"erp_channels", a.erp_channels}};
    if (a.has_formants) an["formants"] = {{"vowels", a.formants.vowels}, {"f1", a.formants.f1}, {"f2", a.formants.f2}};
    j["analyses"] = an;
    j["synth"] = synth_json(cfg.synth);
    return j;
}

harness::EvalOptions RunConfig::eval_options() const {
    harness::EvalOptions o;
    o.seed = seed;
    o.strict_audit = eval.strict_audit;
    o.inject = eval.inject;
    o.threads = eval.threads;
    return o;
}

std::vector<harness::PipelineSpec> RunConfig::pipeline_specs() const {
    std::vector<harness::PipelineSpec> out;
    for (const auto& p : pipelines) out.push_back(p.spec);
    return out;
}

const NamedPipeline& RunConfig::pipeline(const std::string& name) const {
    for (const auto& p : pipelines)
        if (p.spec.name == name) return p;
    throw ConfigError("no pipeline named '" + name + "'");
}

}  // namespace eegbench::config
