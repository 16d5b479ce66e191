#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <optional>
#include <regex>
#include <set>
#include <tuple>

#include "eegbench/ingest.hpp"

namespace eegbench::ingest {

namespace fs = std::filesystem;

namespace {

// "sub-01", "sub-S01", "S01", "s1" -> "S01"; anything else is not a subject.
std::optional<std::pair<std::string, int>> subject_from_dirname(const std::string& name) {
    static const std::regex pattern(R"(^(?:sub-)?[Ss]?(\d+)$)");
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) return std::nullopt;
    const int number = std::stoi(m[1].str());
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%02d", number);
    return std::make_pair(std::string(buf), number);
}

bool has_edf_extension(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".edf";
}

}  // namespace

ScanResult scan_bids(const fs::path& root) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw IoError("scan_bids: '" + root.string() + "' is not a readable directory");

    std::map<int, SubjectFiles> found;
    fs::directory_iterator it(root, ec);
    if (ec) throw IoError("scan_bids: cannot read '" + root.string() + "': " + ec.message());
    for (const auto& entry : it) {
        if (!entry.is_directory()) continue;
        auto subject = subject_from_dirname(entry.path().filename().string());
        if (!subject) continue;
        SubjectFiles files{subject->first, {}};
        for (const auto& f : fs::recursive_directory_iterator(entry.path(), ec))
            if (f.is_regular_file() && has_edf_extension(f.path())) files.edf_paths.push_back(f.path());
        std::sort(files.edf_paths.begin(), files.edf_paths.end());
        auto& slot = found[subject->second];
        if (slot.subject_id.empty()) slot = std::move(files);
        else slot.edf_paths.insert(slot.edf_paths.end(), files.edf_paths.begin(), files.edf_paths.end());
    }

    ScanResult result;
    if (found.empty()) return result;
    const int last = found.rbegin()->first;
    for (int n = 1; n <= last; ++n) {
        if (!found.contains(n)) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "S%02d", n);
            result.missing.emplace_back(buf);
        }
    }
    for (auto& [_, files] : found) result.subjects.push_back(std::move(files));
    return result;
}

Index epoch_length(double tmin, double tmax, double fs) {
    return static_cast<Index>(std::llround((tmax - tmin) * fs));
}

EpochSet epoch_from_events(const Recording& rec, double tmin, double tmax, const LabelMap& label_map,
                           const std::string& subject, const std::string& recording) {
    if (!(tmax > tmin)) throw DomainError("epoch_from_events: tmax must exceed tmin");
    const Index length = epoch_length(tmin, tmax, rec.fs);
    const auto offset = static_cast<std::int64_t>(std::llround(tmin * rec.fs));

    EpochSet out;
    out.fs = rec.fs;
    out.tmin = static_cast<double>(offset) / rec.fs;
    out.channel_names = rec.channel_names;
    for (const auto& ev : rec.events) {
        auto it = label_map.find(ev.label);
        if (it == label_map.end())
            throw DomainError("epoch_from_events: event label '" + ev.label + "' absent from label map");
        if (it->second < 0) continue;
        const auto start = ev.sample + offset;
        if (start < 0 || start + length > rec.samples.cols())
            throw DomainError("epoch_from_events: window around sample " + std::to_string(ev.sample) +
                              " falls outside the recording");
        out.data.push_back(rec.samples.middleCols(start, length));
        out.labels.push_back(it->second);
        out.subjects.push_back(subject);
        out.onsets.push_back(ev.sample);
        out.recordings.push_back(recording);
    }
    return out;
}

void write_archive(const fs::path& dir, const EpochSet& epochs, const ArchiveMeta& meta) {
    epochs.validate();
    for (int label : epochs.labels)
        if (label < 0 || label > 4) throw DomainError("write_archive: label outside 0..4");

    const auto channels = static_cast<std::size_t>(epochs.channels());
    const auto samples = static_cast<std::size_t>(epochs.samples());
    std::vector<std::uint8_t> blob(epochs.trials() * channels * samples * 4);
    std::size_t pos = 0;
    for (const auto& trial : epochs.data) {
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t s = 0; s < samples; ++s) {
                const float value = static_cast<float>(trial(static_cast<Index>(c), static_cast<Index>(s)));
                auto bits = std::bit_cast<std::uint32_t>(value);
                for (int b = 0; b < 4; ++b) blob[pos++] = static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff);
            }
        }
    }

    nlohmann::ordered_json manifest;
    manifest["format"] = "eegbench-epochs";
    manifest["version"] = 1;
    manifest["shape"] = {epochs.trials(), channels, samples};
    manifest["dtype"] = "float32-le";
    manifest["fs"] = epochs.fs;
    manifest["tmin"] = epochs.tmin;
    manifest["channel_names"] = epochs.channel_names;
    manifest["labels"] = epochs.labels;
    manifest["subjects"] = epochs.subjects;
    manifest["onsets"] = epochs.onsets;
    manifest["recordings"] = epochs.recordings;
    manifest["provenance_hash"] = meta.provenance_hash;
    manifest["pipeline"] = meta.pipeline;
    manifest["extra"] = meta.extra;

    fs::create_directories(dir);
    write_text_file(dir / "manifest.json", manifest.dump(1) + "\n");
    write_file(dir / "epochs.f32", blob);
}

Archive read_archive(const fs::path& dir) {
    const auto text = read_file(dir / "manifest.json");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("archive manifest is not valid JSON: " + std::string(e.what()));
    }
    Archive archive;
    try {
        if (manifest.at("format") != "eegbench-epochs") throw FormatError("archive manifest has unknown format");
        const auto shape = manifest.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 3) throw FormatError("archive shape must have three entries");
        auto& e = archive.epochs;
        e.fs = manifest.at("fs").get<double>();
        e.tmin = manifest.at("tmin").get<double>();
        e.channel_names = manifest.at("channel_names").get<std::vector<std::string>>();
        e.labels = manifest.at("labels").get<std::vector<int>>();
        e.subjects = manifest.at("subjects").get<std::vector<std::string>>();
        e.onsets = manifest.at("onsets").get<std::vector<std::int64_t>>();
        e.recordings = manifest.at("recordings").get<std::vector<std::string>>();
        archive.meta.provenance_hash = manifest.at("provenance_hash").get<std::string>();
        archive.meta.pipeline = manifest.at("pipeline").get<std::vector<std::string>>();
        archive.meta.extra = manifest.value("extra", nlohmann::json::object());

        const auto [trials, channels, samples] = std::tuple{shape[0], shape[1], shape[2]};
        if (e.channel_names.size() != channels) throw FormatError("archive channel names do not match shape");
        if (e.labels.size() != trials || e.subjects.size() != trials)
            throw FormatError("archive labels/subjects do not match shape");
        const auto blob = read_file(dir / "epochs.f32");
        if (blob.size() != trials * channels * samples * 4)
            throw FormatError("archive blob is " + std::to_string(blob.size()) + " bytes, expected " +
                              std::to_string(trials * channels * samples * 4));
        std::size_t pos = 0;
        e.data.reserve(trials);
        for (std::size_t t = 0; t < trials; ++t) {
            Matrix trial(static_cast<Index>(channels), static_cast<Index>(samples));
            for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t s = 0; s < samples; ++s) {
                    std::uint32_t bits = 0;
                    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(blob[pos++]) << (8 * b);
                    trial(static_cast<Index>(c), static_cast<Index>(s)) = std::bit_cast<float>(bits);
                }
            }
            e.data.push_back(std::move(trial));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError("archive manifest is missing fields: " + std::string(ex.what()));
    }
    for (int label : archive.epochs.labels)
        if (label < 0 || label > 4) throw FormatError("archive label outside 0..4");
    return archive;
}

}  // namespace eegbench::ingest
