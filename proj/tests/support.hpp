#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "eegbench/common.hpp"
#include "eegbench/seed.hpp"

namespace testing {

// Removed on scope exit; unique per process and call.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("eegbench-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline eegbench::Matrix gaussian(eegbench::Index rows, eegbench::Index cols, eegbench::Rng& rng) {
    eegbench::Matrix m(rows, cols);
    for (eegbench::Index j = 0; j < cols; ++j)
        for (eegbench::Index i = 0; i < rows; ++i) m(i, j) = eegbench::standard_normal(rng);
    return m;
}

// A A^T + I/2 has eigenvalues bounded away from zero.
inline eegbench::Matrix random_spd(eegbench::Index d, eegbench::Rng& rng) {
    const eegbench::Matrix a = gaussian(d, d, rng);
    eegbench::Matrix s = a * a.transpose() + 0.5 * eegbench::Matrix::Identity(d, d);
    return 0.5 * (s + s.transpose());
}

inline double rel_frob(const eegbench::Matrix& a, const eegbench::Matrix& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace testing
