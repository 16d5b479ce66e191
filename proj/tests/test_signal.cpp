#include "doctest.h"

#include <cmath>

#include "eegbench/signal.hpp"
#include "support.hpp"

using namespace eegbench;
using namespace eegbench::signal;

TEST_CASE("Butterworth magnitude") {
    const double fs = 256.0;
    SUBCASE("lowpass follows the prewarped closed form") {
        const auto sos = butterworth(4, BandType::lowpass, 40.0, 0.0, fs);
        for (double f : {5.0, 20.0, 40.0, 60.0, 80.0, 110.0}) {
            const double ratio = std::tan(M_PI * f / fs) / std::tan(M_PI * 40.0 / fs);
            const double expected = 1.0 / std::sqrt(1.0 + std::pow(ratio, 8));
            CHECK(magnitude_response(sos, f, fs) == doctest::Approx(expected).epsilon(1e-9));
        }
    }
    SUBCASE("bandpass edges at -3 dB") {
        const auto sos = butter_bandpass(4, 0.5, 40.0, fs);
        CHECK(sos.size() == 4);
        CHECK(magnitude_response(sos, 40.0, fs) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
        CHECK(magnitude_response(sos, 0.5, fs) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
        CHECK(magnitude_response(sos, 10.0, fs) == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("zero-phase filtering keeps a passband tone in place") {
    const auto sos = butter_bandpass(4, 0.5, 40.0, 256.0);
    Vector x(4096);
    for (Index t = 0; t < x.size(); ++t) x[t] = std::sin(2.0 * M_PI * 10.0 * t / 256.0);
    // sine and cosine coefficients of the 10 Hz component in the middle
    auto coefficients = [](const Vector& v) {
        Matrix basis(2048, 2);
        for (Index t = 0; t < 2048; ++t) {
            basis(t, 0) = std::sin(2.0 * M_PI * 10.0 * (t + 1024) / 256.0);
            basis(t, 1) = std::cos(2.0 * M_PI * 10.0 * (t + 1024) / 256.0);
        }
        return Vector(basis.colPivHouseholderQr().solve(v.segment(1024, 2048)));
    };
    const Vector c = coefficients(sosfiltfilt(sos, x));
    CHECK(std::abs(std::atan2(c[1], c[0])) < 1e-4);
    CHECK(c.norm() == doctest::Approx(std::pow(magnitude_response(sos, 10.0, 256.0), 2)).epsilon(1e-4));
    const Vector once = coefficients(sosfilt(sos, x));
    CHECK(std::abs(std::atan2(once[1], once[0])) > 0.1);
}

TEST_CASE("resampling helpers") {
    CHECK(rational_ratio(2000.0, 256.0) == std::pair<int, int>{16, 125});
    CHECK(rational_ratio(512.0, 256.0) == std::pair<int, int>{1, 2});
    Vector x = Vector::Ones(1000);
    CHECK(resample_poly(x, 16, 125).size() == 128);
    CHECK(resample_poly(x, 16, 125).segment(20, 80).mean() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(bessel_i0(0.0) == 1.0);
    CHECK(bessel_i0(1.0) == doctest::Approx(1.2660658777520082).epsilon(1e-14));
    const Vector h = kaiser_lowpass(63, 0.25, 8.6);
    CHECK(h.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((h - h.reverse()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("Hann window and Welch density") {
    const Vector w = hann(4);
    CHECK(w[0] == 0.0);
    CHECK(w[1] == doctest::Approx(0.5));
    CHECK(w[2] == doctest::Approx(1.0));
    CHECK(w[3] == doctest::Approx(0.5));

    // unit white noise has one-sided density 2 / fs
    Rng rng = make_rng(11, "welch");
    Vector x(256 * 200);
    for (Index i = 0; i < x.size(); ++i) x[i] = standard_normal(rng);
    const auto psd = welch(x, 256.0, 128);
    CHECK(psd.freqs.size() == 65);
    CHECK(psd.freqs[1] == doctest::Approx(2.0));
    CHECK(psd.power.segment(2, 60).mean() == doctest::Approx(2.0 / 256.0).epsilon(0.03));
    CHECK(band_integral(psd, 8.0, 13.0) == doctest::Approx(5.0 * 2.0 / 256.0).epsilon(0.05));
    // Parseval: total density integrates to the variance
    CHECK(band_integral(psd, 0.0, 128.0) == doctest::Approx(1.0).epsilon(0.03));
}
