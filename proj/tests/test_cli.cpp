#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({"seed": 7,
 "data": {"source": "synth"},
 "synth": {"subjects": 4, "trials_per_class": 6, "channels": 5, "plant": "band_amplitude", "snr": 1.0},
 "features": {"families": ["de"]},
 "model": {"pipelines": [{"name": "lda", "classifier": {"kind": "lda_shrinkage"}}, {"name": "mdm", "input": "mdm"},
                         {"name": "vote", "input": "vote", "vote": ["lda", "mdm"]}]},
 "stats": {"n_perm": 100}})";

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(EEGBENCH_CLI) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("run writes consistent outputs") {
    testing::TempDir tmp("cli-run");
    write(tmp / "small.json", kSmall);
    const fs::path out = tmp / "out";
    REQUIRE(run("run --config " + (tmp / "small.json").string() + " --out " + out.string(), tmp / "log") == 0);
    const std::string header = first_line(out / "results.csv");
    CHECK(header.rfind("# eegbench version=", 0) == 0);
    CHECK(header.find("config_hash=") != std::string::npos);
    CHECK(header.find("seed=7") != std::string::npos);
    for (const auto& entry : fs::directory_iterator(out))
        if (entry.path().extension() == ".csv") {
            CAPTURE(entry.path().filename().string());
            CHECK(first_line(entry.path()) == header);
        }
    CHECK(slurp(out / "audit.json").find(header.substr(header.find("config_hash=") + 12, 16)) != std::string::npos);

    int lda_rows = 0;
    std::istringstream rows(slurp(out / "results.csv"));
    for (std::string line; std::getline(rows, line);) lda_rows += line.rfind("lda,", 0) == 0;
    CHECK(lda_rows == 4);

    SUBCASE("report and stats reuse the outputs") {
        CHECK(run("report --results " + out.string(), tmp / "report.log") == 0);
        CHECK(slurp(tmp / "report.log").find("lda") != std::string::npos);
        CHECK(run("stats --results " + out.string() + " --n-perm 50", tmp / "stats.log") == 0);
        CHECK(first_line(out / "stats.csv") == header);
    }
    SUBCASE("threads leave results byte-identical") {
        const fs::path out4 = tmp / "out4";
        REQUIRE(run("run --threads 4 --config " + (tmp / "small.json").string() + " --out " + out4.string(),
                    tmp / "log4") == 0);
        CHECK(slurp(out4 / "results.csv") == slurp(out / "results.csv"));
        CHECK(slurp(out4 / "predictions.csv") == slurp(out / "predictions.csv"));
    }
}

TEST_CASE("exit codes") {
    testing::TempDir tmp("cli-exit");
    SUBCASE("malformed config key") {
        write(tmp / "bad.json", R"({"seeed": 1})");
        CHECK(run("run --config " + (tmp / "bad.json").string() + " --out " + (tmp / "out").string(), tmp / "log") == 2);
        CHECK(slurp(tmp / "log").rfind("error: config:", 0) == 0);
        CHECK_FALSE(fs::exists(tmp / "out" / "results.csv"));
    }
    SUBCASE("unknown option") { CHECK(run("run --frobnicate", tmp / "log") == 2); }
    SUBCASE("missing config file") {
        CHECK(run("run --config " + (tmp / "none.json").string() + " --out " + (tmp / "out").string(), tmp / "log") == 4);
    }
    SUBCASE("injected leakage fails the audit") {
        std::string cfg = kSmall;
        cfg.insert(cfg.rfind('}'), R"(, "eval": {"inject": "test_in_train"})");
        write(tmp / "leak.json", cfg);
        CHECK(run("run --config " + (tmp / "leak.json").string() + " --out " + (tmp / "out").string(), tmp / "log") == 3);
        CHECK(fs::exists(tmp / "out" / "audit.json"));
        CHECK_FALSE(fs::exists(tmp / "out" / "results.csv"));
    }
    SUBCASE("missing results directory") { CHECK(run("report --results " + (tmp / "nope").string(), tmp / "log") == 4); }
}

TEST_CASE("synth and ingest round trip through EDF") {
    testing::TempDir tmp("cli-ingest");
    write(tmp / "c.json", R"({"synth": {"subjects": 2, "trials_per_class": 2, "channels": 4},
                              "data": {"label_map": {"a": 0, "e": 1, "i": 2, "o": 3, "u": 4}}})");
    REQUIRE(run("synth --config " + (tmp / "c.json").string() + " --out " + (tmp / "synth").string() + " --edf " +
                    (tmp / "bids").string(),
                tmp / "log") == 0);
    REQUIRE(run("ingest --config " + (tmp / "c.json").string() + " --root " + (tmp / "bids").string() + " --out " +
                    (tmp / "arch").string(),
                tmp / "log2") == 0);
    const std::string log = slurp(tmp / "log2");
    CHECK(log.find("S01") != std::string::npos);
    CHECK(log.find("S02") != std::string::npos);
}
