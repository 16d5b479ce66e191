#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace eegbench {

inline constexpr const char* kVersion = "0.1.0";

// Error categories map onto CLI exit codes (config 2, audit 3, io 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* category() const noexcept { return "error"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "config"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "io"; }
};

class FormatError : public IoError {
public:
    using IoError::IoError;
    const char* category() const noexcept override { return "format"; }
};

class AuditError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "audit"; }
};

class DomainError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "domain"; }
};

/// Writes a warning line to stderr. Thread-safe; tests may capture it.
void warn(std::string_view message);

/// Number of warnings emitted since process start (test hook).
std::size_t warning_count();

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Trials x channels x samples, stored as one channels x samples matrix per trial.
struct EpochSet {
    std::vector<Matrix> data;
    std::vector<int> labels;
    std::vector<std::string> subjects;
    double fs = 0.0;
    double tmin = 0.0;  // time of sample 0 relative to the event, round(tmin * fs) / fs
    std::vector<std::string> channel_names;
    // Source bookkeeping for the temporal-leakage checkpoint: onset sample of
    // the triggering event and the recording it came from.
    std::vector<std::int64_t> onsets;
    std::vector<std::string> recordings;

    std::size_t trials() const { return data.size(); }
    Index channels() const { return channel_names.empty() ? 0 : static_cast<Index>(channel_names.size()); }
    Index samples() const { return data.empty() ? 0 : data.front().cols(); }

    /// Throws DomainError if shapes or bookkeeping vectors are inconsistent.
    void validate() const;

    /// Copy of the trials at `indices`, in that order.
    EpochSet subset(const std::vector<std::size_t>& indices) const;

    /// Distinct subject ids in sorted order.
    std::vector<std::string> subject_ids() const;

    int num_classes() const;

    int channel_index(std::string_view name) const;
};

}  // namespace eegbench
