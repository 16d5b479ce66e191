#include "doctest.h"

#include <cmath>
#include <fstream>

#include "eegbench/ingest.hpp"
#include "support.hpp"

using namespace eegbench;
using namespace eegbench::ingest;

namespace {

Recording sine_recording(Index channels, Index samples, double fs) {
    Recording r;
    r.fs = fs;
    r.samples.resize(channels, samples);
    for (Index c = 0; c < channels; ++c) {
        r.channel_names.push_back("C" + std::to_string(c));
        for (Index t = 0; t < samples; ++t)
            r.samples(c, t) = 100.0 * std::sin(2.0 * M_PI * (5.0 + 3.0 * static_cast<double>(c)) * t / fs);
    }
    return r;
}

}  // namespace

TEST_CASE("header size for 61 signals") {
    const auto bytes = write_edf(sine_recording(61, 256, 256.0));
    const auto h = parse_edf_header(bytes);
    CHECK(h.header_bytes == 256 + 61 * 256);
    CHECK(h.header_bytes == 15872);
    CHECK(h.n_signals() == 61);
}

TEST_CASE("digital zero maps through the linear physical scaling") {
    // (0 - dmin) * (pmax - pmin) / (dmax - dmin) + pmin
    auto digital_zero = [](double pmin, double pmax) {
        EdfWriteOptions o;
        o.physical_min = pmin;
        o.physical_max = pmax;
        Recording r;
        r.fs = 256.0;
        r.channel_names = {"Cz"};
        r.samples = Matrix::Zero(1, 256);
        auto bytes = write_edf(r, o);
        const auto h = parse_edf_header(bytes);
        std::fill(bytes.begin() + h.header_bytes, bytes.end(), std::uint8_t{0});
        return parse_edf(bytes).samples(0, 0);
    };
    CHECK(digital_zero(-3276.8, 3276.8) == doctest::Approx(32768.0 * 6553.6 / 65535.0 - 3276.8).epsilon(1e-12));
    CHECK(digital_zero(-3276.8, 3276.8) == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(std::abs(digital_zero(-3276.8, 3276.7)) < 1e-9);
}

TEST_CASE("truncated and malformed streams") {
    CHECK_THROWS_AS(parse_edf(std::vector<std::uint8_t>{}), FormatError);
    auto bytes = write_edf(sine_recording(2, 512, 256.0));
    bytes.resize(bytes.size() - 10);
    CHECK_THROWS_AS(parse_edf(bytes), FormatError);
    std::vector<std::uint8_t> header_only(bytes.begin(), bytes.begin() + 300);
    CHECK_THROWS_AS(parse_edf(header_only), FormatError);
}

TEST_CASE("write/parse round trip") {
    SUBCASE("zeros") {
        Recording r = sine_recording(3, 512, 256.0);
        r.samples.setZero();
        CHECK(parse_edf(write_edf(r)).samples.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("sines within one quantum") {
        const Recording r = sine_recording(2, 1024, 256.0);
        const EdfWriteOptions o;
        const double quantum = (o.physical_max - o.physical_min) / static_cast<double>(o.digital_max - o.digital_min);
        const Recording back = parse_edf(write_edf(r, o));
        REQUIRE(back.samples.cols() == r.samples.cols());
        CHECK((back.samples - r.samples).cwiseAbs().maxCoeff() <= quantum);
        CHECK(back.channel_names == r.channel_names);
        CHECK(back.fs == 256.0);
    }
    SUBCASE("partial last record is zero padded") {
        const Recording r = sine_recording(1, 300, 256.0);
        const Recording back = parse_edf(write_edf(r));
        REQUIRE(back.samples.cols() == 512);
        CHECK(back.samples.rightCols(212).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("events survive as annotations") {
        Recording r = sine_recording(2, 2048, 256.0);
        r.events = {{300, "vowel/a"}, {900, "vowel/u"}, {1500, "rest"}};
        const Recording back = parse_edf(write_edf(r));
        REQUIRE(back.events.size() == 3);
        CHECK(back.events[0].sample == 300);
        CHECK(back.events[1].label == "vowel/u");
        CHECK(back.samples.rows() == 2);
    }
    SUBCASE("out of range sample") {
        Recording r = sine_recording(1, 256, 256.0);
        r.samples(0, 10) = 5000.0;
        CHECK_THROWS_AS(write_edf(r), DomainError);
    }
}

TEST_CASE("scan_bids") {
    testing::TempDir tmp("scan");
    SUBCASE("empty root") { CHECK(scan_bids(tmp.path()).subjects.empty()); }
    SUBCASE("sixteen subjects plus clutter") {
        for (int s = 16; s >= 1; --s) {
            char name[16];
            std::snprintf(name, sizeof name, "sub-%02d", s);
            std::filesystem::create_directories(tmp.path() / name / "eeg");
            std::ofstream(tmp.path() / name / "eeg" / (std::string(name) + "_task-vowels_eeg.edf")) << "x";
        }
        std::filesystem::create_directories(tmp.path() / "derivatives" / "sub-99");
        std::ofstream(tmp.path() / "README") << "notes";
        std::ofstream(tmp.path() / "participants.tsv") << "id";
        const auto scan = scan_bids(tmp.path());
        REQUIRE(scan.subjects.size() == 16);
        CHECK(scan.subjects.front().subject_id == "S01");
        CHECK(scan.subjects.back().subject_id == "S16");
        for (std::size_t i = 0; i < 16; ++i) CHECK(scan.subjects[i].edf_paths.size() == 1);
        CHECK(scan.missing.empty());
    }
    SUBCASE("gaps are reported") {
        for (const char* name : {"sub-01", "sub-03"}) {
            std::filesystem::create_directories(tmp.path() / name);
            std::ofstream(tmp.path() / name / "a.edf") << "x";
        }
        const auto scan = scan_bids(tmp.path());
        CHECK(scan.subjects.size() == 2);
        CHECK(scan.missing == std::vector<std::string>{"S02"});
    }
    SUBCASE("missing root") { CHECK_THROWS_AS(scan_bids(tmp.path() / "nope"), IoError); }
}

TEST_CASE("epoching") {
    CHECK(epoch_length(-0.2, 1.0, 256.0) == 307);

    Recording r = sine_recording(4, 4096, 256.0);
    SUBCASE("no events") {
        const auto e = epoch_from_events(r, -0.2, 1.0, {});
        CHECK(e.trials() == 0);
    }
    SUBCASE("window before the start") {
        r.events = {{10, "a"}};
        CHECK_THROWS_AS(epoch_from_events(r, -0.2, 1.0, {{"a", 0}}), DomainError);
    }
    SUBCASE("labels and skips") {
        r.events = {{500, "a"}, {1200, "boundary"}, {2000, "u"}};
        const auto e = epoch_from_events(r, -0.2, 1.0, {{"a", 0}, {"u", 4}, {"boundary", -1}}, "S01", "run1");
        REQUIRE(e.trials() == 2);
        CHECK(e.labels == std::vector<int>{0, 4});
        CHECK(e.samples() == 307);
        CHECK(e.onsets == std::vector<std::int64_t>{500, 2000});
        // window starts round(-0.2 * 256) = -51 samples before the event
        CHECK(e.data[1](2, 0) == r.samples(2, 2000 - 51));
        CHECK(e.data[1](2, 306) == r.samples(2, 2000 - 51 + 306));
    }
    SUBCASE("unmapped label") {
        r.events = {{500, "x"}};
        CHECK_THROWS_AS(epoch_from_events(r, -0.2, 1.0, {{"a", 0}}), DomainError);
    }
}

TEST_CASE("archive round trip") {
    testing::TempDir tmp("archive");
    Rng rng = make_rng(1, "archive-test");
    EpochSet e;
    e.fs = 256.0;
    e.tmin = -0.2;
    e.channel_names = {"Fz", "Cz", "Pz"};
    for (int t = 0; t < 6; ++t) {
        e.data.push_back(testing::gaussian(3, 20, rng) * 10.0);
        e.labels.push_back(t % 5);
        e.subjects.push_back(t < 3 ? "S01" : "S02");
        e.onsets.push_back(100 * t);
        e.recordings.push_back(t < 3 ? "S01_run-1" : "S02_run-1");
    }
    ArchiveMeta meta;
    meta.provenance_hash = "abc";
    meta.pipeline = {"rereference", "bandpass"};
    write_archive(tmp.path(), e, meta);
    const auto back = read_archive(tmp.path());
    REQUIRE(back.epochs.trials() == 6);
    CHECK(back.epochs.labels == e.labels);
    CHECK(back.epochs.subjects == e.subjects);
    CHECK(back.epochs.onsets == e.onsets);
    CHECK(back.epochs.channel_names == e.channel_names);
    CHECK(back.meta.provenance_hash == "abc");
    for (std::size_t t = 0; t < 6; ++t)
        CHECK((back.epochs.data[t] - e.data[t].cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);

    e.labels[0] = 7;
    CHECK_THROWS_AS(write_archive(tmp / "bad", e, meta), DomainError);
    CHECK_THROWS_AS(read_archive(tmp / "missing"), IoError);
}
