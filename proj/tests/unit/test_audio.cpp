#include "doctest.h"

#include <cmath>
#include <complex>
#include <fstream>
#include <filesystem>
#include <numbers>
#include <random>

#include "fmaml/audio/corpus.hpp"
#include "fmaml/audio/features.hpp"
#include "fmaml/audio/mfcc.hpp"
#include "fmaml/audio/synth.hpp"
#include "fmaml/audio/wav.hpp"

using namespace fmaml;
using namespace fmaml::audio;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fmaml_audio_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Waveform tone(double hz, std::size_t n, double amplitude = 0.5) {
    Waveform w;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / 16000.0);
    return w;
}

// Straight DFT power of one real frame, zero-padded to n.
std::vector<double> dft_power(const std::vector<double>& frame, std::size_t n) {
    std::vector<double> power(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < frame.size(); ++i) {
            const double a = -2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n);
            re += frame[i] * std::cos(a);
            im += frame[i] * std::sin(a);
        }
        power[k] = re * re + im * im;
    }
    return power;
}

// HTK-mel triangles rebuilt from the formula, independent of mel_filterbank.
double triangle_weight(std::size_t m, double f, std::size_t n_mels, double rate) {
    auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
    auto hz = [](double mv) { return 700.0 * (std::pow(10.0, mv / 2595.0) - 1.0); };
    const double top = mel(rate / 2.0);
    const double lo = hz(top * double(m) / double(n_mels + 1));
    const double mid = hz(top * double(m + 1) / double(n_mels + 1));
    const double hi = hz(top * double(m + 2) / double(n_mels + 1));
    if (f > lo && f <= mid) return (f - lo) / (mid - lo);
    if (f > mid && f < hi) return (hi - f) / (hi - mid);
    return 0.0;
}

std::vector<double> row_means(const Tensor& m) {
    std::vector<double> out(m.dim(0), 0.0);
    for (std::size_t r = 0; r < m.dim(0); ++r) {
        for (std::size_t c = 0; c < m.dim(1); ++c) out[r] += m.at(r, c);
        out[r] /= static_cast<double>(m.dim(1));
    }
    return out;
}

}  // namespace

TEST_SUITE("load_wav") {
    TEST_CASE("16 kHz mono round trip keeps the length and the values to 16-bit precision") {
        const auto dir = scratch_dir("mono");
        Waveform w = tone(440.0, 56000);
        save_wav(dir / "a.wav", w);
        const Waveform r = load_wav(dir / "a.wav");
        CHECK(r.samples.size() == 56000);
        CHECK(r.sample_rate == 16000.0);
        for (std::size_t i = 0; i < r.samples.size(); i += 997) CHECK(std::abs(r.samples[i] - w.samples[i]) < 1.0 / 32768.0);
    }

    TEST_CASE("8 kHz one-second file resamples to 16000 samples") {
        const auto dir = scratch_dir("rate");
        std::vector<double> x(8000);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.25 * std::sin(0.01 * double(i));
        save_wav(dir / "b.wav", {x}, 8000);
        const Waveform r = load_wav(dir / "b.wav");
        CHECK(r.samples.size() == 16000);
        CHECK(r.sample_rate == 16000.0);
    }

    TEST_CASE("stereo channels x and -x downmix to silence") {
        const auto dir = scratch_dir("stereo");
        std::vector<double> x(4000), y(4000);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = 0.5 * std::sin(0.03 * double(i));
            y[i] = -x[i];
        }
        save_wav(dir / "c.wav", {x, y}, 16000);
        const Waveform r = load_wav(dir / "c.wav");
        REQUIRE(r.samples.size() == 4000);
        for (double v : r.samples) CHECK(v == 0.0);
    }

    TEST_CASE("bad inputs are rejected") {
        const auto dir = scratch_dir("bad");
        CHECK_THROWS_AS(load_wav(dir / "missing.wav"), WavError);
        {
            std::ofstream f(dir / "junk.wav", std::ios::binary);
            f << "this is not a riff file at all";
        }
        CHECK_THROWS_AS(load_wav(dir / "junk.wav"), WavError);
        save_wav(dir / "ok.wav", tone(100.0, 1000));
        std::fstream f(dir / "ok.wav", std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(20);
        const std::uint16_t float_format = 3;
        f.write(reinterpret_cast<const char*>(&float_format), 2);
        f.close();
        CHECK_THROWS_AS(load_wav(dir / "ok.wav"), WavError);
    }
}

TEST_SUITE("mfcc") {
    TEST_CASE("3.5 s at 16 kHz gives 348 frames") {
        const MfccConfig cfg;
        CHECK(cfg.frame_count(56000, 16000.0) == 348);
        const Tensor m = mfcc(tone(300.0, 56000), cfg);
        CHECK(m.dim(0) == 40);
        CHECK(m.dim(1) == 348);
    }

    TEST_CASE("frame count formula holds over a sweep of lengths") {
        const MfccConfig cfg;
        for (std::size_t len = 480; len < 3000; len += 37) {
            const Tensor m = mfcc(tone(500.0, len), cfg);
            CHECK(m.dim(1) == 1 + (len - 480) / 160);
        }
        CHECK_THROWS_AS(mfcc(tone(500.0, 479), cfg), Error);
    }

    TEST_CASE("zero waveform gives a constant frame vector with only c0 non-zero") {
        Waveform w;
        w.samples.assign(16000, 0.0);
        const Tensor m = mfcc(w);
        const double c0 = std::log(1e-10) * std::sqrt(40.0);
        for (std::size_t t = 0; t < m.dim(1); ++t) {
            CHECK(std::abs(m.at(0, t) - c0) < 1e-9);
            for (std::size_t k = 1; k < 40; ++k) CHECK(std::abs(m.at(k, t)) < 1e-9);
            for (std::size_t k = 0; k < 40; ++k) CHECK(std::abs(m.at(k, t) - m.at(k, 0)) < 1e-9);
        }
    }

    TEST_CASE("1 kHz tone peaks in the filter nearest 1 kHz, agreeing with a direct DFT") {
        const MfccConfig cfg;
        const Waveform w = tone(1000.0, 4000);
        const Tensor energies = mel_energies(w, cfg);
        const Tensor frames = windowed_frames(w, cfg);

        // Oracle for the first frame: O(N²) DFT and analytically rebuilt triangles.
        std::vector<double> frame(frames.dim(1));
        for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = frames.at(0, i);
        const auto power = dft_power(frame, 512);
        std::vector<double> oracle(40, 0.0);
        for (std::size_t m = 0; m < 40; ++m)
            for (std::size_t k = 0; k < power.size(); ++k)
                oracle[m] += triangle_weight(m, double(k) * 16000.0 / 512.0, 40, 16000.0) * power[k];
        for (std::size_t m = 0; m < 40; ++m) CHECK(std::abs(energies.at(m, 0) - oracle[m]) <= 1e-9 * (1.0 + oracle[m]));

        const auto centers = mel_centers_hz(cfg, 16000.0);
        std::size_t nearest = 0;
        for (std::size_t m = 1; m < centers.size(); ++m)
            if (std::abs(centers[m] - 1000.0) < std::abs(centers[nearest] - 1000.0)) nearest = m;
        for (std::size_t t = 0; t < energies.dim(1); ++t) {
            std::size_t best = 0;
            for (std::size_t m = 1; m < 40; ++m)
                if (energies.at(m, t) > energies.at(best, t)) best = m;
            CHECK(best == nearest);
        }
        CHECK(std::max_element(oracle.begin(), oracle.end()) - oracle.begin() == std::ptrdiff_t(nearest));
    }

    TEST_CASE("Parseval: time-domain frame energy equals FFT-domain energy") {
        const MfccConfig cfg;
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n(0.0, 0.2);
        Waveform w;
        w.samples.resize(8000);
        for (auto& v : w.samples) v = std::clamp(n(rng), -1.0, 1.0);
        const Tensor frames = windowed_frames(w, cfg);
        const Tensor power = power_spectrum(frames, cfg);
        for (std::size_t t = 0; t < frames.dim(0); ++t) {
            double time_energy = 0.0;
            for (std::size_t i = 0; i < frames.dim(1); ++i) time_energy += frames.at(t, i) * frames.at(t, i);
            // One-sided spectrum: interior bins stand for two conjugate bins.
            double freq_energy = power.at(t, 0) + power.at(t, 256);
            for (std::size_t k = 1; k < 256; ++k) freq_energy += 2.0 * power.at(t, k);
            freq_energy /= 512.0;
            CHECK(std::abs(time_energy - freq_energy) <= 1e-6 * time_energy);
        }
    }

    TEST_CASE("DCT-II matrix is orthonormal") {
        const Tensor d = dct_matrix(40, 40);
        double worst = 0.0;
        for (std::size_t i = 0; i < 40; ++i)
            for (std::size_t j = 0; j < 40; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 40; ++k) acc += d.at(k, i) * d.at(k, j);
                worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
            }
        CHECK(worst < 1e-10);
    }

    TEST_CASE("fft matches the direct DFT") {
        std::mt19937_64 rng(9);
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> x(64);
        for (auto& v : x) v = n(rng);
        std::vector<std::complex<double>> buf(x.begin(), x.end());
        fft(buf);
        const auto power = dft_power(x, 64);
        for (std::size_t k = 0; k <= 32; ++k) CHECK(std::abs(std::norm(buf[k]) - power[k]) < 1e-9 * (1.0 + power[k]));
        std::vector<std::complex<double>> odd(12);
        CHECK_THROWS_AS(fft(odd), Error);
    }

    TEST_CASE("mfcc is deterministic and does not modify its input") {
        const Waveform w = synth_emotion(1, 2, 77);
        const Waveform copy = w;
        const Tensor a = mfcc(w), b = mfcc(w);
        CHECK(a == b);
        CHECK(w.samples == copy.samples);
    }

    TEST_CASE("config validation") {
        MfccConfig cfg;
        cfg.n_mfcc = 41;
        CHECK_THROWS_AS(cfg.validate(16000.0), Error);
        cfg = {};
        cfg.n_fft = 256;
        CHECK_THROWS_AS(cfg.validate(16000.0), Error);
        cfg = {};
        cfg.n_fft = 500;
        CHECK_THROWS_AS(cfg.validate(16000.0), Error);
    }
}

TEST_SUITE("synth") {
    TEST_CASE("silence: deterministic, 56000 samples for 3.5 s, tiny amplitude") {
        CHECK(synth_silence(3.5, 1).samples == synth_silence(3.5, 1).samples);
        CHECK(synth_silence(3.5, 1).samples.size() == 56000);
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 1000; ++seed)
            for (double v : synth_silence(std::nullopt, seed).samples) worst = std::max(worst, std::abs(v));
        CHECK(worst < 1e-2);
        CHECK_THROWS_AS(synth_silence(0.02, 1), Error);
    }

    TEST_CASE("neutral: deterministic, RMS in range, peak at 120 Hz") {
        CHECK(synth_neutral(1.0, 3).samples == synth_neutral(1.0, 3).samples);
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const auto w = synth_neutral(std::nullopt, seed);
            double e = 0.0, peak = 0.0;
            for (double v : w.samples) {
                e += v * v;
                peak = std::max(peak, std::abs(v));
            }
            CHECK(peak <= 1.0);
            const double rms = std::sqrt(e / double(w.samples.size()));
            CHECK(rms >= 0.05);
            CHECK(rms <= 0.5);
        }
        // Direct DFT over one second, probed on a 3 Hz grid.
        const auto w = synth_neutral(1.0, 11);
        std::size_t best = 0;
        double best_power = 0.0;
        for (double hz = 30.0; hz <= 4000.0; hz += 3.0) {
            double re = 0.0, im = 0.0;
            for (std::size_t i = 0; i < 16000; ++i) {
                const double a = 2.0 * std::numbers::pi * hz * double(i) / 16000.0;
                re += w.samples[i] * std::cos(a);
                im += w.samples[i] * std::sin(a);
            }
            if (re * re + im * im > best_power) {
                best_power = re * re + im * im;
                best = static_cast<std::size_t>(hz);
            }
        }
        CHECK(best == 120);
    }

    TEST_CASE("emotion clips stay in [-1, 1]") {
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const auto w = synth_emotion(seed % 3, seed % 5, seed);
            double peak = 0.0;
            for (double v : w.samples) peak = std::max(peak, std::abs(v));
            CHECK(peak <= 1.0);
        }
        CHECK_THROWS_AS(synth_emotion(0, 5, 1), Error);
    }

    TEST_CASE("standard English counts give 341 clips") {
        CorpusSpec spec = standard_corpus_spec(4);
        spec.languages = {"english"};
        spec.counts = {spec.counts[0]};
        CHECK(spec.total() == 341);
        const auto clips = synth_emotion_corpus(spec);
        CHECK(clips.size() == 341);
        for (const auto& c : clips) {
            CHECK(c.language == "english");
            CHECK(c.mfcc.dim(0) == 40);
        }
    }

    TEST_CASE("same seed gives identical corpora") {
        CorpusSpec spec;
        spec.languages = {"a", "b"};
        spec.emotions = {"x", "y", "z"};
        spec.counts = {{2, 1, 2}, {1, 2, 1}};
        spec.seed = 21;
        const auto a = synth_emotion_corpus(spec), b = synth_emotion_corpus(spec);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].mfcc == b[i].mfcc);
            CHECK(a[i].source_id == b[i].source_id);
        }
        spec.seed = 22;
        CHECK_FALSE(synth_emotion_corpus(spec)[0].mfcc == a[0].mfcc);
    }

    TEST_CASE("corpus spec validation") {
        CorpusSpec spec;
        spec.languages = {"a"};
        spec.emotions = {"x"};
        spec.counts = {{3}};
        CHECK_THROWS_AS(synth_emotion_corpus(spec), Error);
        spec.emotions = {"x", "y"};
        spec.languages = {};
        spec.counts = {};
        CHECK_THROWS_AS(synth_emotion_corpus(spec), Error);
    }

    TEST_CASE("two emotions are linearly separable on mean-MFCC vectors") {
        CorpusSpec spec;
        spec.languages = {"english"};
        spec.emotions = {"fear", "disgust"};
        spec.counts = {{60, 60}};
        spec.seed = 8;
        const auto clips = synth_emotion_corpus(spec);
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (const auto& c : clips) {
            x.push_back(row_means(c.mfcc));
            y.push_back(c.emotion == "fear" ? 1 : 0);
        }
        // Even indices train, odd test; standardize with training statistics.
        const std::size_t d = x[0].size();
        std::vector<double> mu(d, 0.0), sd(d, 0.0);
        std::size_t n_train = 0;
        for (std::size_t i = 0; i < x.size(); i += 2, ++n_train)
            for (std::size_t j = 0; j < d; ++j) mu[j] += x[i][j];
        for (auto& v : mu) v /= double(n_train);
        for (std::size_t i = 0; i < x.size(); i += 2)
            for (std::size_t j = 0; j < d; ++j) sd[j] += (x[i][j] - mu[j]) * (x[i][j] - mu[j]);
        for (auto& v : sd) v = std::sqrt(v / double(n_train)) + 1e-12;
        for (auto& row : x)
            for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - mu[j]) / sd[j];
        // Logistic regression by full-batch gradient descent.
        std::vector<double> w(d, 0.0);
        double b = 0.0;
        for (int it = 0; it < 2000; ++it) {
            std::vector<double> gw(d, 0.0);
            double gb = 0.0;
            for (std::size_t i = 0; i < x.size(); i += 2) {
                double z = b;
                for (std::size_t j = 0; j < d; ++j) z += w[j] * x[i][j];
                const double err = 1.0 / (1.0 + std::exp(-z)) - y[i];
                for (std::size_t j = 0; j < d; ++j) gw[j] += err * x[i][j];
                gb += err;
            }
            for (std::size_t j = 0; j < d; ++j) w[j] -= 0.1 * gw[j] / double(n_train);
            b -= 0.1 * gb / double(n_train);
        }
        std::size_t correct = 0, total = 0;
        for (std::size_t i = 1; i < x.size(); i += 2, ++total) {
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * x[i][j];
            correct += (z > 0.0) == (y[i] == 1);
        }
        CHECK(double(correct) / double(total) >= 0.95);
    }

    TEST_CASE("fixed pool is tagged with the shared language") {
        const auto pool = synth_fixed_pool(3, 1);
        REQUIRE(pool.size() == 6);
        CHECK(pool[0].emotion == "silence");
        CHECK(pool[5].emotion == "neutral");
        for (const auto& c : pool) CHECK(c.language == kSharedLanguage);
        CHECK_THROWS_AS(fixed_waveform("anger", 0, 1), Error);
    }
}

TEST_SUITE("features") {
    TEST_CASE("cepstral mean normalization zeroes each row mean") {
        Tensor m({2, 3}, {1, 2, 3, -4, 0, 4});
        const Tensor c = cepstral_mean_normalize(m);
        CHECK(c == Tensor({2, 3}, {-1, 0, 1, -4, 0, 4}));
    }

    TEST_CASE("pad with row means and center crop") {
        Tensor m({2, 3}, {1, 2, 3, 0, 0, 6});
        CHECK(pad_or_crop(m, 5) == Tensor({2, 5}, {1, 2, 3, 2, 2, 0, 0, 6, 2, 2}));
        CHECK(pad_or_crop(m, 1) == Tensor({2, 1}, {2, 0}));
        CHECK(pad_or_crop(m, 3) == m);
    }

    TEST_CASE("time pooling and model input width") {
        Tensor m({1, 5}, {1, 3, 5, 7, 9});
        CHECK(pool_time(m, 2) == Tensor({1, 2}, {2, 6}));
        CHECK_THROWS_AS(pool_time(m, 0), Error);
        FeatureClip clip{Tensor({40, 348}, 1.0), "fear", "english", "x"};
        FeatureConfig cfg;
        CHECK(model_input(clip, cfg).shape() == Shape{40, 300});
        cfg.time_pool = 10;
        CHECK(model_input(clip, cfg).shape() == Shape{40, 30});
    }

    TEST_CASE("feature cache round trip") {
        const auto dir = scratch_dir("cache");
        const Tensor m = mfcc(synth_emotion(0, 0, 5));
        write_feature_cache(dir / "x.bin", m);
        CHECK(read_feature_cache(dir / "x.bin") == m);
        CHECK(fs::file_size(dir / "x.bin") == 8 + m.size() * 8);
        {
            std::ofstream f(dir / "short.bin", std::ios::binary);
            f << "abc";
        }
        CHECK_THROWS_AS(read_feature_cache(dir / "short.bin"), Error);
    }

    TEST_CASE("corpus directory round trip") {
        const auto dir = scratch_dir("corpus");
        CorpusSpec spec;
        spec.languages = {"english", "italian"};
        spec.emotions = {"fear", "anger"};
        spec.counts = {{2, 1}, {1, 1}};
        spec.seed = 3;
        CHECK(write_synthetic_corpus(dir, spec, 1) == 7);
        const auto clips = load_corpus_directory(dir);
        REQUIRE(clips.size() == 7);
        std::size_t shared = 0, english = 0;
        for (const auto& c : clips) {
            shared += c.language == kSharedLanguage;
            english += c.language == "english";
        }
        CHECK(shared == 2);
        CHECK(english == 3);
        CHECK_THROWS_AS(load_corpus_directory(dir / "nope"), Error);
    }
}
