#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace arrayid::dsp {

inline constexpr double kPi = 3.14159265358979323846;

// Dense row-major matrix, minimal on purpose.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean: empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample standard deviation (divisor n-1).
inline double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) throw std::invalid_argument("sample_std: need at least 2 values");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace detail {

struct FftPlan {
    std::size_t n = 0;
    std::vector<std::size_t> bitrev;
    std::vector<std::complex<double>> twiddle;  // exp(-2*pi*i*k/n), k < n/2
};

inline const FftPlan& fft_plan(std::size_t n) {
    thread_local std::map<std::size_t, FftPlan> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    FftPlan plan;
    plan.n = n;
    plan.bitrev.resize(n);
    std::size_t log2n = 0;
    while ((std::size_t(1) << log2n) < n) ++log2n;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < log2n; ++b)
            if (i & (std::size_t(1) << b)) r |= std::size_t(1) << (log2n - 1 - b);
        plan.bitrev[i] = r;
    }
    plan.twiddle.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
        plan.twiddle[k] = {std::cos(ang), std::sin(ang)};
    }
    return cache.emplace(n, std::move(plan)).first->second;
}

}  // namespace detail

// In-place iterative radix-2 FFT. n must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& x, bool inverse = false) {
    const std::size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft: length must be a power of two, got " +
                                    std::to_string(n));
    if (n == 1) return;
    const auto& plan = detail::fft_plan(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = plan.bitrev[i];
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len >> 1;
        const std::size_t step = n / len;
        for (std::size_t base = 0; base < n; base += len) {
            for (std::size_t k = 0; k < half; ++k) {
                std::complex<double> w = plan.twiddle[k * step];
                if (inverse) w = std::conj(w);
                const std::complex<double> u = x[base + k];
                const std::complex<double> t = w * x[base + k + half];
                x[base + k] = u + t;
                x[base + k + half] = u - t;
            }
        }
    }
    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& v : x) v *= inv_n;
    }
}

// Real-input FFT: returns the n/2+1 non-redundant bins of the length-n
// transform of `x` zero-padded (or truncated) to n.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& x, std::size_t n) {
    std::vector<std::complex<double>> buf(n, {0.0, 0.0});
    const std::size_t m = std::min(n, x.size());
    for (std::size_t i = 0; i < m; ++i) buf[i] = {x[i], 0.0};
    fft_inplace(buf, false);
    buf.resize(n / 2 + 1);
    return buf;
}

// Inverse of rfft: reconstructs the Hermitian-symmetric length-n spectrum.
inline std::vector<double> irfft(const std::vector<std::complex<double>>& half, std::size_t n) {
    if (half.size() != n / 2 + 1)
        throw std::invalid_argument("irfft: expected n/2+1 bins");
    std::vector<std::complex<double>> buf(n);
    for (std::size_t k = 0; k <= n / 2; ++k) buf[k] = half[k];
    for (std::size_t k = n / 2 + 1; k < n; ++k) buf[k] = std::conj(half[n - k]);
    fft_inplace(buf, true);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
    return out;
}

// Symmetric Hann window: w[n] = 0.5 - 0.5*cos(2*pi*n/(L-1)).
inline std::vector<double> hann_symmetric(std::size_t len) {
    if (len == 0) throw std::invalid_argument("hann_symmetric: zero length");
    std::vector<double> w(len, 1.0);
    if (len == 1) return w;
    for (std::size_t i = 0; i < len; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                    static_cast<double>(len - 1));
    return w;
}

struct StftConfig {
    int window_len = 1024;
    int overlap = 728;
    int n_fft = 4096;

    int hop() const { return window_len - overlap; }

    void validate() const {
        if (!(0 <= overlap && overlap < window_len && window_len <= n_fft))
            throw std::invalid_argument(
                "StftConfig: require 0 <= overlap < window_len <= n_fft");
        if ((n_fft & (n_fft - 1)) != 0)
            throw std::invalid_argument("StftConfig: n_fft must be a power of two");
    }
};

struct Spectrogram {
    Mat magnitudes;      // rows = frequency bins (n_fft/2+1), cols = frames
    double bin_hz = 0.0; // sample_rate / n_fft
    int frame_hop = 0;

    std::size_t rows() const { return magnitudes.rows; }
    std::size_t cols() const { return magnitudes.cols; }
};

// Magnitude STFT. Frames start at multiples of hop; a trailing stretch that
// cannot fill a whole window is dropped.
inline Spectrogram stft(const std::vector<double>& signal, const StftConfig& cfg,
                        double sample_rate_hz) {
    cfg.validate();
    if (sample_rate_hz <= 0) throw std::invalid_argument("stft: sample rate must be positive");
    const std::size_t win = static_cast<std::size_t>(cfg.window_len);
    if (signal.size() < win)
        throw std::invalid_argument("stft: signal shorter than one window (" +
                                    std::to_string(signal.size()) + " < " +
                                    std::to_string(win) + ")");
    const std::size_t hop = static_cast<std::size_t>(cfg.hop());
    const std::size_t n_fft = static_cast<std::size_t>(cfg.n_fft);
    const std::size_t n_frames = (signal.size() - win) / hop + 1;
    const std::size_t n_bins = n_fft / 2 + 1;
    const std::vector<double> window = hann_symmetric(win);

    Spectrogram out;
    out.magnitudes = Mat(n_bins, n_frames);
    out.bin_hz = sample_rate_hz / static_cast<double>(cfg.n_fft);
    out.frame_hop = cfg.hop();

    std::vector<std::complex<double>> buf(n_fft);
    for (std::size_t f = 0; f < n_frames; ++f) {
        std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
        const std::size_t start = f * hop;
        for (std::size_t i = 0; i < win; ++i)
            buf[i] = {signal[start + i] * window[i], 0.0};
        fft_inplace(buf, false);
        for (std::size_t b = 0; b < n_bins; ++b)
            out.magnitudes(b, f) = std::abs(buf[b]);
    }
    return out;
}

// 4th-order Butterworth-characteristic high-pass as two cascaded biquads
// (bilinear transform / RBJ cookbook), single causal forward pass.
inline std::vector<double> highpass(const std::vector<double>& signal, double cutoff_hz,
                                    double sample_rate_hz) {
    if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0))
        throw std::invalid_argument("highpass: cutoff must lie in (0, sample_rate/2)");
    // Butterworth pole-pair Q values: 1/(2*cos(pi/8)), 1/(2*cos(3*pi/8)).
    static constexpr double kQ[2] = {0.54119610014619698, 1.30656296487637653};
    std::vector<double> y = signal;
    const double w0 = 2.0 * kPi * cutoff_hz / sample_rate_hz;
    const double cw = std::cos(w0);
    const double sw = std::sin(w0);
    for (double q : kQ) {
        const double alpha = sw / (2.0 * q);
        const double a0 = 1.0 + alpha;
        const double b0 = (1.0 + cw) / 2.0 / a0;
        const double b1 = -(1.0 + cw) / a0;
        const double b2 = (1.0 + cw) / 2.0 / a0;
        const double a1 = (-2.0 * cw) / a0;
        const double a2 = (1.0 - alpha) / a0;
        double s1 = 0.0, s2 = 0.0;  // transposed direct form II state
        for (double& v : y) {
            const double x = v;
            const double out = b0 * x + s1;
            s1 = b1 * x - a1 * out + s2;
            s2 = b2 * x - a2 * out;
            v = out;
        }
    }
    return y;
}

// Autocorrelation r[0..p].
inline std::vector<double> autocorrelation(const std::vector<double>& x, int p) {
    if (p < 0) throw std::invalid_argument("autocorrelation: negative order");
    std::vector<double> r(static_cast<std::size_t>(p) + 1, 0.0);
    const std::size_t n = x.size();
    for (int tau = 0; tau <= p; ++tau)
        for (std::size_t i = 0; i + static_cast<std::size_t>(tau) < n; ++i)
            r[static_cast<std::size_t>(tau)] += x[i] * x[i + static_cast<std::size_t>(tau)];
    return r;
}

// Autocorrelation-method LPC via Levinson-Durbin. Returns a[0..p], a[0] = 1,
// for the prediction-error filter A(z) = 1 + a[1] z^-1 + ... + a[p] z^-p.
inline std::vector<double> lpc(const std::vector<double>& signal, int p) {
    if (p < 1) throw std::invalid_argument("lpc: order must be >= 1");
    if (signal.size() <= static_cast<std::size_t>(p))
        throw std::invalid_argument("lpc: signal length must exceed the order");
    const std::vector<double> r = autocorrelation(signal, p);
    if (r[0] <= 0.0)
        throw std::runtime_error("lpc: degenerate (zero) autocorrelation");
    std::vector<double> a(static_cast<std::size_t>(p) + 1, 0.0);
    a[0] = 1.0;
    double err = r[0];
    for (int i = 1; i <= p; ++i) {
        double acc = r[static_cast<std::size_t>(i)];
        for (int k = 1; k < i; ++k)
            acc += a[static_cast<std::size_t>(k)] * r[static_cast<std::size_t>(i - k)];
        const double reflection = -acc / err;
        std::vector<double> next = a;
        next[static_cast<std::size_t>(i)] = reflection;
        for (int k = 1; k < i; ++k)
            next[static_cast<std::size_t>(k)] =
                a[static_cast<std::size_t>(k)] +
                reflection * a[static_cast<std::size_t>(i - k)];
        a = std::move(next);
        err *= (1.0 - reflection * reflection);
        if (err <= 0.0)
            throw std::runtime_error("lpc: singular recursion (non-positive error)");
    }
    return a;
}

// LPC cepstral coefficients c[0..p]:
//   c[0] = ln(p)
//   c[i] = -a[i] - sum_{k=1}^{i-1} (1 - k/i) * a[k] * c[i-k]
inline std::vector<double> lpcc(const std::vector<double>& signal, int p) {
    const std::vector<double> a = lpc(signal, p);
    std::vector<double> c(static_cast<std::size_t>(p) + 1, 0.0);
    c[0] = std::log(static_cast<double>(p));
    for (int i = 1; i <= p; ++i) {
        double acc = -a[static_cast<std::size_t>(i)];
        for (int k = 1; k < i; ++k)
            acc -= (1.0 - static_cast<double>(k) / static_cast<double>(i)) *
                   a[static_cast<std::size_t>(k)] * c[static_cast<std::size_t>(i - k)];
        c[static_cast<std::size_t>(i)] = acc;
    }
    return c;
}

// Centered moving average with truncated windows at the edges.
inline std::vector<double> moving_average(const std::vector<double>& v, int width) {
    if (width < 1 || width % 2 == 0)
        throw std::invalid_argument("moving_average: width must be odd and positive");
    if (static_cast<std::size_t>(width) > v.size())
        throw std::invalid_argument("moving_average: width exceeds vector length");
    const int n = static_cast<int>(v.size());
    const int half = width / 2;
    std::vector<double> out(v.size());
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(n - 1, i + half);
        double s = 0.0;
        for (int j = lo; j <= hi; ++j) s += v[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

// Linear-interpolation resampling at positions i*(len-1)/(out_len-1).
inline std::vector<double> resample_linear(const std::vector<double>& v, int out_len) {
    if (v.size() < 2) throw std::invalid_argument("resample_linear: need >= 2 input points");
    if (out_len < 2) throw std::invalid_argument("resample_linear: need >= 2 output points");
    std::vector<double> out(static_cast<std::size_t>(out_len));
    const double scale = static_cast<double>(v.size() - 1) / static_cast<double>(out_len - 1);
    for (int i = 0; i < out_len; ++i) {
        if (i == out_len - 1) {
            out[static_cast<std::size_t>(i)] = v.back();
            continue;
        }
        const double pos = static_cast<double>(i) * scale;
        const std::size_t j = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(j);
        out[static_cast<std::size_t>(i)] = v[j] + frac * (v[j + 1] - v[j]);
    }
    return out;
}

// Min-max normalization to [0, 1]; a constant vector maps to all zeros.
inline std::vector<double> minmax_normalize(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("minmax_normalize: empty vector");
    const auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
    const double mn = *mn_it, mx = *mx_it;
    std::vector<double> out(v.size(), 0.0);
    if (mx > mn) {
        const double inv = 1.0 / (mx - mn);
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mn) * inv;
    }
    return out;
}

}  // namespace arrayid::dsp
