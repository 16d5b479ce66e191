#include "eegbench/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <optional>

#include <unsupported/Eigen/FFT>

namespace eegbench::signal {

namespace {

using cd = std::complex<double>;
constexpr double pi = std::numbers::pi;

cd bilinear(cd s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

double prewarp(double f, double fs) { return 2.0 * fs * std::tan(pi * f / fs); }

cd section_response(const Section& s, cd z) {
    const cd zi = 1.0 / z;
    const cd num = s.b[0] + s.b[1] * zi + s.b[2] * zi * zi;
    const cd den = s.a[0] + s.a[1] * zi + s.a[2] * zi * zi;
    return num / den;
}

cd sos_response(const Sos& sos, double f, double fs) {
    const cd z = std::polar(1.0, 2.0 * pi * f / fs);
    cd h = 1.0;
    for (const auto& s : sos) h *= section_response(s, z);
    return h;
}

// Pairs poles (conjugates first, then reals) with real zeros into biquads.
Sos zpk_to_sos(std::vector<cd> poles, std::vector<double> zeros) {
    std::vector<cd> complex_poles;
    std::vector<double> real_poles;
    for (const auto& p : poles) {
        if (std::abs(p.imag()) < 1e-12) real_poles.push_back(p.real());
        else if (p.imag() > 0.0) complex_poles.push_back(p);
    }
    Sos sos;
    std::size_t zi = 0;
    auto next_zero = [&]() -> std::optional<double> {
        if (zi < zeros.size()) return zeros[zi++];
        return std::nullopt;
    };
    auto add_zeros = [&](Section& s, int count) {
        s.b = {1.0, 0.0, 0.0};
        for (int k = 0; k < count; ++k) {
            auto z = next_zero();
            if (!z) break;
            // multiply (b0 + b1 x + b2 x^2) by (1 - z x)
            const auto b = s.b;
            s.b = {b[0], b[1] - *z * b[0], b[2] - *z * b[1]};
        }
    };
    for (const auto& p : complex_poles) {
        Section s;
        s.a = {1.0, -2.0 * p.real(), std::norm(p)};
        add_zeros(s, 2);
        sos.push_back(s);
    }
    for (std::size_t i = 0; i < real_poles.size(); i += 2) {
        Section s;
        if (i + 1 < real_poles.size()) {
            s.a = {1.0, -(real_poles[i] + real_poles[i + 1]), real_poles[i] * real_poles[i + 1]};
            add_zeros(s, 2);
        } else {
            s.a = {1.0, -real_poles[i], 0.0};
            add_zeros(s, 1);
        }
        sos.push_back(s);
    }
    return sos;
}

}  // namespace

Sos butterworth(int order, BandType type, double f1, double f2, double fs) {
    if (order < 1) throw DomainError("butterworth: order must be >= 1");
    const double nyq = fs / 2.0;
    auto check = [&](double f) {
        if (!(f > 0.0)) throw DomainError("butterworth: cutoff must be positive");
        if (!(f < nyq)) throw DomainError("butterworth: cutoff must be below Nyquist");
    };
    check(f1);
    if (type == BandType::bandpass) {
        check(f2);
        if (!(f2 > f1)) throw DomainError("butterworth: band edges must be increasing");
    }

    std::vector<cd> prototype;
    for (int k = 1; k <= order; ++k)
        prototype.push_back(std::polar(1.0, pi * (2.0 * k + order - 1.0) / (2.0 * order)));

    std::vector<cd> analog;
    std::vector<double> zeros;
    double ref_freq = 0.0;
    switch (type) {
        case BandType::lowpass: {
            const double wc = prewarp(f1, fs);
            for (const auto& p : prototype) analog.push_back(wc * p);
            zeros.assign(static_cast<std::size_t>(order), -1.0);
            ref_freq = 0.0;
            break;
        }
        case BandType::highpass: {
            const double wc = prewarp(f1, fs);
            for (const auto& p : prototype) analog.push_back(wc / p);
            zeros.assign(static_cast<std::size_t>(order), 1.0);
            ref_freq = nyq;
            break;
        }
        case BandType::bandpass: {
            const double wl = prewarp(f1, fs);
            const double wh = prewarp(f2, fs);
            const double bw = wh - wl;
            const double w0 = std::sqrt(wl * wh);
            for (const auto& p : prototype) {
                const cd half = p * bw / 2.0;
                const cd root = std::sqrt(half * half - w0 * w0);
                analog.push_back(half + root);
                analog.push_back(half - root);
            }
            for (int k = 0; k < order; ++k) {
                zeros.push_back(1.0);
                zeros.push_back(-1.0);
            }
            ref_freq = std::atan(w0 / (2.0 * fs)) * fs / pi;
            break;
        }
    }
    std::vector<cd> digital;
    for (const auto& p : analog) digital.push_back(bilinear(p, fs));

    Sos sos = zpk_to_sos(digital, zeros);
    const double gain = 1.0 / std::abs(sos_response(sos, ref_freq, fs));
    for (auto& c : sos.front().b) c *= gain;
    return sos;
}

Sos butter_bandpass(int order, double lo, double hi, double fs) {
    return butterworth(order, BandType::bandpass, lo, hi, fs);
}

double magnitude_response(const Sos& sos, double f, double fs) { return std::abs(sos_response(sos, f, fs)); }

Vector sosfilt(const Sos& sos, const Eigen::Ref<const Vector>& x) {
    Vector y = x;
    for (const auto& s : sos) {
        double z1 = 0.0, z2 = 0.0;
        for (Index n = 0; n < y.size(); ++n) {
            const double in = y[n];
            const double out = s.b[0] * in + z1;
            z1 = s.b[1] * in - s.a[1] * out + z2;
            z2 = s.b[2] * in - s.a[2] * out;
            y[n] = out;
        }
    }
    return y;
}

namespace {

// Steady-state state for a unit step, cascaded through sections.
std::vector<std::array<double, 2>> sos_step_state(const Sos& sos) {
    std::vector<std::array<double, 2>> zi;
    double scale = 1.0;
    for (const auto& s : sos) {
        const double dc = (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]);
        const double y = dc * scale;
        const double z2 = s.b[2] * scale - s.a[2] * y;
        const double z1 = y - s.b[0] * scale;
        zi.push_back({z1, z2});
        scale = y;
    }
    return zi;
}

void filter_inplace(const Sos& sos, const std::vector<std::array<double, 2>>& zi, double x0, std::vector<double>& y) {
    for (std::size_t k = 0; k < sos.size(); ++k) {
        const auto& s = sos[k];
        double z1 = zi[k][0] * x0, z2 = zi[k][1] * x0;
        const double b0 = s.b[0], b1 = s.b[1], b2 = s.b[2], a1 = s.a[1], a2 = s.a[2];
        for (double& v : y) {
            const double in = v;
            const double out = b0 * in + z1;
            z1 = b1 * in - a1 * out + z2;
            z2 = b2 * in - a2 * out;
            v = out;
        }
    }
}

}  // namespace

Vector sosfiltfilt(const Sos& sos, const Eigen::Ref<const Vector>& x) {
    const Index n = x.size();
    if (n < 2) return x;
    const Index padlen = std::min<Index>(3 * (2 * static_cast<Index>(sos.size()) + 1), n - 1);

    std::vector<double> ext(static_cast<std::size_t>(n + 2 * padlen));
    for (Index i = 0; i < padlen; ++i) ext[static_cast<std::size_t>(i)] = 2.0 * x[0] - x[padlen - i];
    for (Index i = 0; i < n; ++i) ext[static_cast<std::size_t>(padlen + i)] = x[i];
    for (Index i = 0; i < padlen; ++i)
        ext[static_cast<std::size_t>(padlen + n + i)] = 2.0 * x[n - 1] - x[n - 2 - i];

    const auto zi = sos_step_state(sos);
    filter_inplace(sos, zi, ext.front(), ext);
    std::reverse(ext.begin(), ext.end());
    filter_inplace(sos, zi, ext.front(), ext);
    std::reverse(ext.begin(), ext.end());

    Vector y(n);
    for (Index i = 0; i < n; ++i) y[i] = ext[static_cast<std::size_t>(padlen + i)];
    return y;
}

Matrix sosfiltfilt_rows(const Sos& sos, const Matrix& x) {
    Matrix y(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) y.row(r) = sosfiltfilt(sos, x.row(r).transpose()).transpose();
    return y;
}

double bessel_i0(double x) {
    // power series; converges quickly for the betas used here
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 500; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum;
}

Vector kaiser_lowpass(int taps, double cutoff, double beta) {
    Vector h(taps);
    const double alpha = 0.5 * (taps - 1);
    const double i0b = bessel_i0(beta);
    for (int n = 0; n < taps; ++n) {
        const double m = n - alpha;
        const double arg = pi * cutoff * m;
        const double sinc = m == 0.0 ? 1.0 : std::sin(arg) / arg;
        const double r = m / alpha;
        const double w = taps == 1 ? 1.0 : bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
        h[n] = cutoff * sinc * w;
    }
    h /= h.sum();
    return h;
}

std::pair<int, int> rational_ratio(double fs, double target_fs) {
    const auto a = std::llround(fs);
    const auto b = std::llround(target_fs);
    if (std::abs(fs - static_cast<double>(a)) > 1e-9 || std::abs(target_fs - static_cast<double>(b)) > 1e-9)
        throw DomainError("resample: sampling rates must be whole numbers of Hz");
    const auto g = std::gcd(a, b);
    return {static_cast<int>(b / g), static_cast<int>(a / g)};
}

Vector resample_poly(const Eigen::Ref<const Vector>& x, int up, int down, double beta) {
    if (up < 1 || down < 1) throw DomainError("resample_poly: factors must be positive");
    if (up == down) return x;
    const int max_rate = std::max(up, down);
    const int half_len = 10 * max_rate;
    const Vector h = kaiser_lowpass(2 * half_len + 1, 1.0 / max_rate, beta) * static_cast<double>(up);

    const Index n_in = x.size();
    const auto n_out = static_cast<Index>(std::llround(static_cast<double>(n_in) * up / down));
    Vector y = Vector::Zero(n_out);
    for (Index n = 0; n < n_out; ++n) {
        // y[n] = sum_j x[j] h[n*down - j*up + half_len]
        const std::int64_t m = static_cast<std::int64_t>(n) * down + half_len;
        std::int64_t j_hi = m / up;                                         // h index >= 0
        std::int64_t j_lo = (m - 2 * half_len + up - 1) / up;               // h index <= 2*half_len
        if (m - 2 * half_len < 0) j_lo = 0;
        j_lo = std::max<std::int64_t>(j_lo, 0);
        j_hi = std::min<std::int64_t>(j_hi, n_in - 1);
        double acc = 0.0;
        for (std::int64_t j = j_lo; j <= j_hi; ++j) acc += x[j] * h[m - j * up];
        y[n] = acc;
    }
    return y;
}

Vector hann(Index n) {
    Vector w(n);
    for (Index i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

Psd welch(const Eigen::Ref<const Vector>& x, double fs, Index nperseg) {
    const Index n = x.size();
    nperseg = std::min(nperseg, n);
    if (nperseg < 2) throw DomainError("welch: need at least two samples");
    const Index step = nperseg - nperseg / 2;
    const Vector w = hann(nperseg);
    const double scale = 1.0 / (fs * w.squaredNorm());
    const Index nfreq = nperseg / 2 + 1;

    Eigen::FFT<double> fft;
    std::vector<double> segment(static_cast<std::size_t>(nperseg));
    std::vector<std::complex<double>> spectrum;
    Vector power = Vector::Zero(nfreq);
    int count = 0;
    for (Index start = 0; start + nperseg <= n; start += step) {
        const double mean = x.segment(start, nperseg).mean();
        for (Index i = 0; i < nperseg; ++i) segment[static_cast<std::size_t>(i)] = (x[start + i] - mean) * w[i];
        fft.fwd(spectrum, segment);
        for (Index k = 0; k < nfreq; ++k) power[k] += std::norm(spectrum[static_cast<std::size_t>(k)]);
        ++count;
    }
    power *= scale / count;
    // one-sided: double everything except DC and (for even length) Nyquist
    const Index last = (nperseg % 2 == 0) ? nfreq - 1 : nfreq;
    for (Index k = 1; k < last; ++k) power[k] *= 2.0;

    Psd psd;
    psd.freqs = Vector::LinSpaced(nfreq, 0.0, fs * static_cast<double>(nfreq - 1) / static_cast<double>(nperseg));
    psd.power = power;
    return psd;
}

double band_integral(const Psd& psd, double lo, double hi) {
    const auto& f = psd.freqs;
    const auto& p = psd.power;
    auto interp = [&](double q) {
        if (q <= f[0]) return p[0];
        for (Index k = 1; k < f.size(); ++k) {
            if (q <= f[k]) {
                const double t = (q - f[k - 1]) / (f[k] - f[k - 1]);
                return p[k - 1] + t * (p[k] - p[k - 1]);
            }
        }
        return p[p.size() - 1];
    };
    // trapezoid over the breakpoints inside [lo, hi]; exact for the interpolant
    std::vector<double> knots{lo};
    for (Index k = 0; k < f.size(); ++k)
        if (f[k] > lo && f[k] < hi) knots.push_back(f[k]);
    knots.push_back(hi);
    double area = 0.0;
    for (std::size_t i = 1; i < knots.size(); ++i)
        area += 0.5 * (interp(knots[i - 1]) + interp(knots[i])) * (knots[i] - knots[i - 1]);
    return area;
}

Vector amplitude_spectrum(const Eigen::Ref<const Vector>& x) {
    Eigen::FFT<double> fft;
    std::vector<double> in(x.data(), x.data() + x.size());
    std::vector<std::complex<double>> out;
    fft.fwd(out, in);
    const Index nfreq = x.size() / 2 + 1;
    Vector mag(nfreq);
    for (Index k = 0; k < nfreq; ++k) mag[k] = std::abs(out[static_cast<std::size_t>(k)]);
    return mag;
}

}  // namespace eegbench::signal
