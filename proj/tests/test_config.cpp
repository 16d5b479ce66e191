#include "doctest.h"

#include "eegbench/config.hpp"

using namespace eegbench;
using nlohmann::json;

TEST_CASE("defaults") {
    const auto cfg = config::parse(json::object());
    CHECK(cfg.seed == 42);
    CHECK(cfg.hash.size() == 16);
    CHECK(cfg.eval.strict_audit);
    CHECK(cfg.stats.n_perm == 10000);
    CHECK(cfg.pipeline_specs().size() == 13);
    CHECK(cfg.synth.channels.size() == 61);
}

TEST_CASE("hash is canonical") {
    const auto base = config::parse(json::object());
    CHECK(config::parse(json::object()).hash == base.hash);
    CHECK(config::parse(json{{"seed", 42}}).hash == base.hash);
    CHECK(config::parse(json{{"seed", 43}}).hash != base.hash);
    CHECK(config::parse(json{{"stats", {{"n_perm", 500}}}}).hash != base.hash);
    // parallelism never changes results
    CHECK(config::parse(json{{"eval", {{"threads", 4}}}}).hash == base.hash);
    CHECK(config::parse(json{{"eval", {{"threads", 4}}}}).eval.threads == 4);
    CHECK(config::parse(config::to_json(base)).hash == base.hash);
}

TEST_CASE("malformed documents are config errors") {
    CHECK_THROWS_AS(config::parse(json{{"sed", 1}}), ConfigError);
    CHECK_THROWS_AS(config::parse(json{{"seed", "seven"}}), ConfigError);
    CHECK_THROWS_AS(config::parse(json{{"stats", {{"n_perm", 0}}}}), ConfigError);
    CHECK_THROWS_AS(config::parse(json{{"data", {{"source", "ftp"}}}}), ConfigError);
    CHECK_THROWS_AS(config::parse(json{{"features", {{"families", {"wavelets"}}}}}), ConfigError);
    CHECK_THROWS_AS(config::parse(json{{"model", {{"pipelines", {{{"name", "x"}, {"classifier", "lda"}}}}}}}),
                    ConfigError);
    CHECK_THROWS_AS(config::parse(json{{"model", {{"pipelines", {{{"name", "v"}, {"input", "vote"}, {"vote", {"nope"}}}}}}}}),
                    ConfigError);
    CHECK_THROWS_AS(config::parse(json{{"eval", {{"inject", "everything"}}}}), ConfigError);
    CHECK_THROWS_AS(config::parse(json::array()), ConfigError);
    CHECK_THROWS_AS(config::load("/nonexistent/eegbench.json"), IoError);
}

TEST_CASE("pipeline options") {
    const json doc = {{"features", {{"families", {"de", "hjorth"}}, {"pca_components", 10}}},
                      {"model",
                       {{"pipelines",
                         {{{"name", "g"}, {"classifier", {{"kind", "gbdt"}, {"n_estimators", 50}}}},
                          {{"name", "t"},
                           {"input", "tangent"},
                           {"euclidean_alignment", true},
                           {"classifier", {{"kind", "logistic"}}}},
                          {{"name", "v"}, {"input", "vote"}, {"vote", {"g", "t"}}}}}}}};
    const auto cfg = config::parse(doc);
    const auto specs = cfg.pipeline_specs();
    REQUIRE(specs.size() == 3);
    CHECK(specs[0].classifier.kind == classify::Kind::gbdt);
    CHECK(specs[0].classifier.n_estimators == 50);
    CHECK(specs[0].pca_components == 10);
    CHECK(specs[0].families.size() == 2);
    CHECK(specs[1].input == harness::Input::tangent);
    CHECK(specs[1].euclidean_alignment);
    CHECK(specs[2].vote == std::vector<std::string>{"g", "t"});
    CHECK(cfg.pipeline("t").spec.name == "t");
    CHECK_THROWS_AS(cfg.pipeline("missing"), ConfigError);
}

TEST_CASE("synth channel count expands to montage labels") {
    const auto cfg = config::parse(json{{"synth", {{"channels", 6}, {"subjects", 3}}}});
    CHECK(cfg.synth.channels.size() == 6);
    CHECK(cfg.synth.channels.front() == synth::standard_montage().front());
    CHECK(cfg.synth.subjects == 3);
}
