#pragma once

#include <array>
#include <vector>

#include "eegbench/common.hpp"

namespace eegbench::signal {

/// One biquad: b0 b1 b2 / 1 a1 a2.
struct Section {
    std::array<double, 3> b{};
    std::array<double, 3> a{1.0, 0.0, 0.0};
};

using Sos = std::vector<Section>;

enum class BandType { lowpass, highpass, bandpass };

/// Digital Butterworth filter via bilinear transform with prewarping,
/// as second-order sections. Bandpass of order N has 2N poles.
Sos butterworth(int order, BandType type, double f1, double f2, double fs);
Sos butter_bandpass(int order, double lo, double hi, double fs);

/// Single forward pass with zero initial state.
Vector sosfilt(const Sos& sos, const Eigen::Ref<const Vector>& x);

/// Zero-phase forward-backward filtering with odd reflection padding of
/// 3 * (2 * sections + 1) samples and steady-state initial conditions.
Vector sosfiltfilt(const Sos& sos, const Eigen::Ref<const Vector>& x);

/// Applies sosfiltfilt to every row.
Matrix sosfiltfilt_rows(const Sos& sos, const Matrix& x);

/// Complex frequency response magnitude at frequency f (Hz).
double magnitude_response(const Sos& sos, double f, double fs);

/// Polyphase rational resampling with a Kaiser-windowed sinc (beta 8.6).
/// Output length is round(n * up / down).
Vector resample_poly(const Eigen::Ref<const Vector>& x, int up, int down, double beta = 8.6);

/// Reduces target_fs / fs to an integer ratio up/down.
std::pair<int, int> rational_ratio(double fs, double target_fs);

/// Zeroth-order modified Bessel function of the first kind.
double bessel_i0(double x);

/// Kaiser-windowed sinc lowpass with unit DC gain; cutoff relative to Nyquist.
Vector kaiser_lowpass(int taps, double cutoff, double beta);

/// Periodic Hann window.
Vector hann(Index n);

struct Psd {
    Vector freqs;
    Vector power;  // one-sided density, units^2 / Hz
};

/// Welch density estimate: Hann segments, 50% overlap, constant detrend.
Psd welch(const Eigen::Ref<const Vector>& x, double fs, Index nperseg = 128);

/// Integral of the linearly interpolated PSD over [lo, hi].
double band_integral(const Psd& psd, double lo, double hi);

/// Magnitude of the discrete Fourier transform (unnormalized), one-sided.
Vector amplitude_spectrum(const Eigen::Ref<const Vector>& x);

}  // namespace eegbench::signal
