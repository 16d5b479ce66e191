#include "eegbench/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>
#include <set>

namespace eegbench {

namespace {
std::mutex g_warn_mutex;
std::atomic<std::size_t> g_warn_count{0};
}  // namespace

void warn(std::string_view message) {
    std::lock_guard lock(g_warn_mutex);
    ++g_warn_count;
    std::cerr << "warning: " << message << '\n';
}

std::size_t warning_count() { return g_warn_count.load(); }

void EpochSet::validate() const {
    const auto n = data.size();
    if (labels.size() != n || subjects.size() != n)
        throw DomainError("EpochSet: labels/subjects length does not match trial count");
    if (!onsets.empty() && onsets.size() != n)
        throw DomainError("EpochSet: onsets length does not match trial count");
    if (!recordings.empty() && recordings.size() != n)
        throw DomainError("EpochSet: recordings length does not match trial count");
    if (!(fs > 0.0)) throw DomainError("EpochSet: sampling rate must be positive");
    for (const auto& trial : data) {
        if (trial.rows() != channels() || trial.cols() != samples())
            throw DomainError("EpochSet: trial shape mismatch");
        if (!trial.allFinite()) throw DomainError("EpochSet: non-finite sample");
    }
    for (int label : labels)
        if (label < 0) throw DomainError("EpochSet: negative label");
}

EpochSet EpochSet::subset(const std::vector<std::size_t>& indices) const {
    EpochSet out;
    out.fs = fs;
    out.tmin = tmin;
    out.channel_names = channel_names;
    out.data.reserve(indices.size());
    for (auto i : indices) {
        out.data.push_back(data.at(i));
        out.labels.push_back(labels.at(i));
        out.subjects.push_back(subjects.at(i));
        if (!onsets.empty()) out.onsets.push_back(onsets.at(i));
        if (!recordings.empty()) out.recordings.push_back(recordings.at(i));
    }
    return out;
}

std::vector<std::string> EpochSet::subject_ids() const {
    std::set<std::string> ids(subjects.begin(), subjects.end());
    return {ids.begin(), ids.end()};
}

int EpochSet::num_classes() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

int EpochSet::channel_index(std::string_view name) const {
    for (std::size_t i = 0; i < channel_names.size(); ++i)
        if (channel_names[i] == name) return static_cast<int>(i);
    return -1;
}

}  // namespace eegbench
