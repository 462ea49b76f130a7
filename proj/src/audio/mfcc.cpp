#include "fmaml/audio/mfcc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fmaml::audio {

std::size_t MfccConfig::frame_samples(double rate) const {
    return static_cast<std::size_t>(std::llround(frame_len * rate));
}

std::size_t MfccConfig::step_samples(double rate) const {
    return static_cast<std::size_t>(std::llround(frame_step * rate));
}

std::size_t MfccConfig::frame_count(std::size_t len, double rate) const {
    const std::size_t frame = frame_samples(rate);
    if (len < frame) return 0;
    return 1 + (len - frame) / step_samples(rate);
}

void MfccConfig::validate(double rate) const {
    if (n_mfcc == 0 || n_mels == 0) throw Error("MfccConfig: n_mfcc and n_mels must be positive");
    if (n_mfcc > n_mels) throw Error("MfccConfig: n_mfcc exceeds n_mels");
    if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0) throw Error("MfccConfig: n_fft must be a power of two");
    if (frame_samples(rate) == 0 || step_samples(rate) == 0) throw Error("MfccConfig: empty frame or step");
    if (frame_samples(rate) > n_fft) throw Error("MfccConfig: frame longer than n_fft");
    if (!(log_floor > 0.0)) throw Error("MfccConfig: log floor must be positive");
}

void fft(std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0) throw Error("fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    thread_local std::vector<std::complex<double>> twiddle;
    if (twiddle.size() != n / 2) {
        twiddle.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k)
            twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len)
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = x[i + k];
                const auto a = x[i + k + len / 2];
                const auto w = twiddle[k * stride];
                const std::complex<double> v(a.real() * w.real() - a.imag() * w.imag(),
                                             a.real() * w.imag() + a.imag() * w.real());
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
            }
    }
}

std::vector<double> hamming_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges_hz(const MfccConfig& cfg, double rate) {
    const double top = hz_to_mel(rate / 2.0);
    std::vector<double> edges(cfg.n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
    return edges;
}

}  // namespace

std::vector<double> mel_centers_hz(const MfccConfig& cfg, double rate) {
    auto edges = mel_edges_hz(cfg, rate);
    return {edges.begin() + 1, edges.end() - 1};
}

Tensor mel_filterbank(const MfccConfig& cfg, double rate) {
    const auto edges = mel_edges_hz(cfg, rate);
    const std::size_t bins = cfg.n_fft / 2 + 1;
    Tensor fb({cfg.n_mels, bins});
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * rate / static_cast<double>(cfg.n_fft);
            double w = 0.0;
            if (f > lo && f <= mid) {
                w = (f - lo) / (mid - lo);
            } else if (f > mid && f < hi) {
                w = (hi - f) / (hi - mid);
            }
            fb.at(m, k) = w;
        }
    }
    return fb;
}

Tensor dct_matrix(std::size_t n_out, std::size_t n_in) {
    Tensor d({n_out, n_in});
    const double scale0 = std::sqrt(1.0 / static_cast<double>(n_in));
    const double scale = std::sqrt(2.0 / static_cast<double>(n_in));
    for (std::size_t k = 0; k < n_out; ++k)
        for (std::size_t m = 0; m < n_in; ++m)
            d.at(k, m) = (k == 0 ? scale0 : scale) *
                         std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(m) + 0.5) /
                                  static_cast<double>(n_in));
    return d;
}

Tensor windowed_frames(const Waveform& wave, const MfccConfig& cfg) {
    wave.validate();
    cfg.validate(wave.sample_rate);
    const std::size_t frame = cfg.frame_samples(wave.sample_rate);
    const std::size_t step = cfg.step_samples(wave.sample_rate);
    const std::size_t count = cfg.frame_count(wave.samples.size(), wave.sample_rate);
    if (count == 0)
        throw Error("mfcc: clip of " + std::to_string(wave.samples.size()) + " samples is shorter than one frame (" +
                    std::to_string(frame) + ")");

    const auto& x = wave.samples;
    std::vector<double> emph(x.size());
    emph[0] = x[0];
    for (std::size_t i = 1; i < x.size(); ++i) emph[i] = x[i] - cfg.preemphasis * x[i - 1];

    const auto window = hamming_window(frame);
    Tensor frames({count, frame});
    for (std::size_t t = 0; t < count; ++t)
        for (std::size_t i = 0; i < frame; ++i) frames.at(t, i) = emph[t * step + i] * window[i];
    return frames;
}

Tensor power_spectrum(const Tensor& frames, const MfccConfig& cfg) {
    const std::size_t count = frames.dim(0), frame = frames.dim(1);
    const std::size_t bins = cfg.n_fft / 2 + 1;
    Tensor power({count, bins});
    std::vector<std::complex<double>> buf(cfg.n_fft);
    for (std::size_t t = 0; t < count; ++t) {
        std::fill(buf.begin(), buf.end(), std::complex<double>{});
        for (std::size_t i = 0; i < frame; ++i) buf[i] = frames.at(t, i);
        fft(buf);
        for (std::size_t k = 0; k < bins; ++k) power.at(t, k) = std::norm(buf[k]);
    }
    return power;
}

Tensor mel_energies(const Waveform& wave, const MfccConfig& cfg) {
    const Tensor power = power_spectrum(windowed_frames(wave, cfg), cfg);
    const Tensor fb = mel_filterbank(cfg, wave.sample_rate);
    const std::size_t count = power.dim(0), bins = power.dim(1);
    Tensor out({cfg.n_mels, count});
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
        std::size_t lo = 0, hi = bins;
        while (lo < bins && fb.at(m, lo) == 0.0) ++lo;
        while (hi > lo && fb.at(m, hi - 1) == 0.0) --hi;
        for (std::size_t t = 0; t < count; ++t) {
            double acc = 0.0;
            for (std::size_t k = lo; k < hi; ++k) acc += fb.at(m, k) * power.at(t, k);
            out.at(m, t) = acc;
        }
    }
    return out;
}

Tensor mfcc(const Waveform& wave, const MfccConfig& cfg) {
    const Tensor energies = mel_energies(wave, cfg);
    const Tensor dct = dct_matrix(cfg.n_mfcc, cfg.n_mels);
    const std::size_t count = energies.dim(1);
    Tensor out({cfg.n_mfcc, count});
    std::vector<double> logmel(cfg.n_mels);
    for (std::size_t t = 0; t < count; ++t) {
        for (std::size_t m = 0; m < cfg.n_mels; ++m) logmel[m] = std::log(std::max(energies.at(m, t), cfg.log_floor));
        for (std::size_t k = 0; k < cfg.n_mfcc; ++k) {
            double acc = 0.0;
            for (std::size_t m = 0; m < cfg.n_mels; ++m) acc += dct.at(k, m) * logmel[m];
            out.at(k, t) = acc;
        }
    }
    check_finite(out, "mfcc");
    return out;
}

}  // namespace fmaml::audio
