#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "eegbench/analyses.hpp"
#include "eegbench/harness.hpp"
#include "eegbench/preprocess.hpp"
#include "eegbench/synth.hpp"

namespace eegbench::config {

enum class Source { synth, archive, bids };

struct DataConfig {
    Source source = Source::synth;
    std::string path;  // archive directory or BIDS root
    ingest::LabelMap label_map;
    std::vector<std::string> class_names = analyses::kVowels;
};

struct NamedPipeline {
    harness::PipelineSpec spec;
    std::string group;  // classical, deep, riemannian, ensemble
};

struct EvalConfig {
    std::string protocol = "loso";  // loso | within_subject | learning_curve
    bool strict_audit = true;
    harness::Injection inject = harness::Injection::none;
    int threads = 1;
    int k = 5;
    int tgm_step = 4;
    std::string tgm_pipeline;  // classifier of this pipeline decodes the TGM; empty = LDA
    std::vector<int> learning_curve_n{1, 3, 5, 7, 9, 11, 13, 15};
    int learning_curve_reps = 5;
    std::string ablation_pipeline;
    std::map<std::string, std::vector<harness::GridPoint>> ablation_grids;  // by axis name
};

struct StatsConfig {
    int n_perm = 10000;
    std::string best_model;  // empty: highest mean accuracy
    bool pairwise_models = true;
};

struct AnalysesConfig {
    bool pairwise = false;
    std::string pairwise_pipeline;
    bool has_formants = false;
    analyses::FormantTable formants;
    std::string importance_pipeline;
    std::vector<int> dropout_ks;
    bool erp = false;
    std::vector<std::string> erp_channels{"Cz", "FCz"};
};

struct RunConfig {
    std::uint64_t seed = 42;
    DataConfig data;
    preprocess::PreprocessConfig preprocess;
    std::vector<features::Family> families{features::Family::de, features::Family::bandpower,
                                           features::Family::hjorth, features::Family::temporal};
    std::vector<features::Band> bands = features::default_bands();
    Index pca_components = 0;
    std::vector<NamedPipeline> pipelines;
    EvalConfig eval;
    StatsConfig stats;
    AnalysesConfig analyses;
    synth::SynthSpec synth;

    std::string hash;  // FNV-1a over the canonical serialization

    harness::EvalOptions eval_options() const;
    std::vector<harness::PipelineSpec> pipeline_specs() const;
    const NamedPipeline& pipeline(const std::string& name) const;
};

/// Parses and validates a configuration document; unknown keys, wrong types
/// and invalid values raise ConfigError.
RunConfig parse(const nlohmann::json& doc);
RunConfig load(const std::filesystem::path& path);

/// Canonical form with every default filled in.
nlohmann::json to_json(const RunConfig& cfg);

/// The default benchmark line-up used when `model.pipelines` is absent.
std::vector<NamedPipeline> default_pipelines(const RunConfig& cfg);

/// Grid used by `ablate` when the config does not supply one.
std::vector<harness::GridPoint> default_grid(harness::Axis axis);

/// Env var that overrides `data.path`.
inline constexpr const char* kDataRootEnv = "EEGBENCH_DATA_ROOT";

}  // namespace eegbench::config
