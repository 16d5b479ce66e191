#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "eegbench/common.hpp"

namespace eegbench::ingest {

struct EdfSignalHeader {
    std::string label;
    std::string transducer;
    std::string physical_dimension;
    double physical_min = 0.0;
    double physical_max = 0.0;
    std::int64_t digital_min = 0;
    std::int64_t digital_max = 0;
    std::string prefiltering;
    std::int64_t samples_per_record = 0;

    bool is_annotation() const { return label == "EDF Annotations"; }
    double gain() const {
        return (physical_max - physical_min) / static_cast<double>(digital_max - digital_min);
    }
};

struct EdfHeader {
    std::string version;
    std::string patient_id;
    std::string recording_id;
    std::string start_date;
    std::string start_time;
    std::int64_t header_bytes = 0;
    std::string reserved;
    std::int64_t n_records = 0;
    double record_duration = 0.0;
    std::vector<EdfSignalHeader> signals;

    std::size_t n_signals() const { return signals.size(); }
};

struct Event {
    std::int64_t sample = 0;
    std::string label;
};

/// Continuous multichannel recording in physical units.
struct Recording {
    Matrix samples;  // channels x time
    double fs = 0.0;
    std::vector<std::string> channel_names;
    std::vector<Event> events;

    void validate() const;
};

EdfHeader parse_edf_header(std::span<const std::uint8_t> bytes);

/// Parses an EDF/EDF+C byte stream. Annotation signals are decoded into
/// events and excluded from the sample matrix.
Recording parse_edf(std::span<const std::uint8_t> bytes);

struct EdfWriteOptions {
    double physical_min = -3276.8;
    double physical_max = 3276.7;
    std::int64_t digital_min = -32768;
    std::int64_t digital_max = 32767;
    double record_duration = 1.0;
    std::string patient_id = "X X X X";
    std::string recording_id = "Startdate X X X X";
    std::string physical_dimension = "uV";
};

/// Serializes a recording as EDF (EDF+C when it carries events). The last
/// data record is zero-padded when the length is not a whole number of records.
std::vector<std::uint8_t> write_edf(const Recording& rec, const EdfWriteOptions& options = {});

Recording read_edf_file(const std::filesystem::path& path);
void write_edf_file(const std::filesystem::path& path, const Recording& rec, const EdfWriteOptions& options = {});

struct SubjectFiles {
    std::string subject_id;
    std::vector<std::filesystem::path> edf_paths;
};

struct ScanResult {
    std::vector<SubjectFiles> subjects;
    std::vector<std::string> missing;  // gaps in the numeric subject sequence
};

/// Finds subject folders (`sub-01`, `sub-S01`, `S01`) below `root` and the
/// EDF files inside them. Subjects are returned as S01, S02, ... in order.
ScanResult scan_bids(const std::filesystem::path& root);

/// Annotation label -> class id. A value of -1 marks labels to skip.
using LabelMap = std::map<std::string, int>;

/// The result's tmin is snapped to the sample grid: round(tmin * fs) / fs.
EpochSet epoch_from_events(const Recording& rec, double tmin, double tmax, const LabelMap& label_map,
                           const std::string& subject = "", const std::string& recording = "");

/// Number of samples in an epoch window; 307 for [-0.2, 1.0] s at 256 Hz.
Index epoch_length(double tmin, double tmax, double fs);

struct ArchiveMeta {
    std::string provenance_hash;
    std::vector<std::string> pipeline;
    nlohmann::json extra = nlohmann::json::object();
};

/// Archive layout: `<dir>/manifest.json` and `<dir>/epochs.f32`
/// (little-endian float32, row-major [trial][channel][sample]).
void write_archive(const std::filesystem::path& dir, const EpochSet& epochs, const ArchiveMeta& meta);

struct Archive {
    EpochSet epochs;
    ArchiveMeta meta;
};

Archive read_archive(const std::filesystem::path& dir);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace eegbench::ingest
