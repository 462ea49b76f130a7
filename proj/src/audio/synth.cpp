#include "fmaml/audio/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "fmaml/core/rng.hpp"

namespace fmaml::audio {

namespace {

constexpr double kRate = kDefaultSampleRate;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kBlock = 80;  // control-rate update every 5 ms
constexpr double kChannelTilt = 0.3;  // max |exponent| of the channel tilt
constexpr double kChannelGain = 0.3;  // max |log gain| of the channel resonance
constexpr double kMaxHarmonicHz = 3800.0;

double draw_duration(std::optional<double> duration, Rng& rng) {
    if (duration) {
        if (*duration <= 0.030) throw Error("synth: duration must exceed one 30 ms frame");
        return *duration;
    }
    std::normal_distribution<double> d(3.5, 0.3);
    return std::clamp(d(rng), 2.5, 4.5);
}

std::size_t sample_count(double duration) { return static_cast<std::size_t>(std::llround(duration * kRate)); }

const std::array<double, 4096>& sine_table() {
    static const auto table = [] {
        std::array<double, 4096> t{};
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::sin(kTwoPi * static_cast<double>(i) / 4096.0);
        return t;
    }();
    return table;
}

// sin(2π·cycles)
double fast_sin(double cycles) {
    const double frac = cycles - std::floor(cycles);
    return sine_table()[static_cast<std::size_t>(frac * 4096.0) & 4095u];
}

double formant_gain(double f, double f1, double f2, double f3) {
    auto peak = [f](double center, double bw) { return std::exp(-((f - center) / bw) * ((f - center) / bw)); };
    return 1.0 + 1.5 * peak(f1, 120.0) + 1.0 * peak(f2, 180.0) + 0.6 * peak(f3, 250.0);
}

void normalize_rms(std::vector<double>& x, double target) {
    double energy = 0.0;
    for (double v : x) energy += v * v;
    const double rms = std::sqrt(energy / static_cast<double>(x.size()));
    if (rms > 0.0)
        for (auto& v : x) v *= target / rms;
    for (auto& v : x) v = std::clamp(v, -1.0, 1.0);
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Built-in families, in the order fear, disgust, happiness, anger, sadness.
const std::array<EmotionFamily, 5> kEmotionFamilies{{
    {3.0, 6.0, 4.0, 4.6, 0.040, 0.060, 0.60, 0.80, 1.30},
    {-2.0, -0.5, 2.2, 2.6, 0.020, 0.030, 1.30, 1.50, 0.95},
    {1.0, 3.0, 3.4, 3.8, 0.005, 0.015, 0.85, 1.05, 1.20},
    {-1.0, 1.0, 2.8, 3.2, 0.030, 0.040, 0.30, 0.50, 1.10},
    {-6.0, -3.0, 1.5, 1.9, 0.000, 0.010, 1.70, 2.00, 0.85},
}};

}  // namespace

Waveform synth_silence(std::optional<double> duration, std::uint64_t seed) {
    Rng rng(seed);
    const double dur = draw_duration(duration, rng);
    std::normal_distribution<double> noise(0.0, 1e-4);
    Waveform w;
    w.samples.resize(sample_count(dur));
    for (auto& v : w.samples) v = std::clamp(noise(rng), -1.0, 1.0);
    return w;
}

Waveform synth_neutral(std::optional<double> duration, std::uint64_t seed) {
    Rng rng(seed);
    const double dur = draw_duration(duration, rng);
    constexpr double f0 = 120.0;
    const std::size_t harmonics = static_cast<std::size_t>(4000.0 / f0);
    std::vector<double> amp(harmonics), phase(harmonics);
    for (std::size_t h = 1; h <= harmonics; ++h) {
        amp[h - 1] = formant_gain(f0 * static_cast<double>(h), 500.0, 1500.0, 2500.0) / static_cast<double>(h);
        phase[h - 1] = uniform(rng, 0.0, 1.0);
    }
    // 120 Hz divides 16 kHz into 400 samples, so one period is tabulated and repeated.
    constexpr std::size_t period = 400;
    std::vector<double> cycle(period);
    for (std::size_t n = 0; n < period; ++n) {
        const double cycles = static_cast<double>(n) / static_cast<double>(period);
        double acc = 0.0;
        for (std::size_t h = 0; h < harmonics; ++h)
            acc += amp[h] * std::sin(kTwoPi * (static_cast<double>(h + 1) * cycles + phase[h]));
        cycle[n] = acc;
    }
    Waveform w;
    w.samples.resize(sample_count(dur));
    for (std::size_t n = 0; n < w.samples.size(); ++n) w.samples[n] = cycle[n % period];
    normalize_rms(w.samples, 0.1);
    return w;
}

const EmotionFamily& emotion_family(std::size_t index) {
    if (index >= kEmotionFamilies.size())
        throw Error("synth: only " + std::to_string(kEmotionFamilies.size()) + " emotion families are built in");
    return kEmotionFamilies[index];
}

LanguageFamily language_family(std::size_t index) {
    // Index 0..2 are English-, Italian- and Spanish-like; later ones are spread
    // deterministically around the same region.
    static const std::array<LanguageFamily, 3> base{{
        {520.0, 1500.0, 2500.0, 100.0, 160.0, 1.00},
        {620.0, 1300.0, 2700.0, 110.0, 180.0, 1.08},
        {450.0, 1750.0, 2350.0, 95.0, 170.0, 0.94},
    }};
    if (index < base.size()) return base[index];
    const double t = static_cast<double>(index);
    return {500.0 + 80.0 * std::sin(1.7 * t), 1500.0 + 200.0 * std::sin(2.3 * t), 2500.0 + 150.0 * std::sin(3.1 * t),
            100.0 + 10.0 * std::sin(t), 170.0 + 10.0 * std::cos(t), 1.0 + 0.06 * std::sin(0.7 * t)};
}

Waveform synth_emotion(std::size_t language, std::size_t emotion, std::uint64_t seed, std::optional<double> duration) {
    const EmotionFamily& fam = emotion_family(emotion);
    const LanguageFamily lang = language_family(language);
    Rng rng(seed);
    const double dur = draw_duration(duration, rng);

    const double base_f0 = uniform(rng, lang.f0_lo, lang.f0_hi) * fam.f0_scale * uniform(rng, 0.8, 1.25);
    const double f1 = lang.f1 * uniform(rng, 0.94, 1.06);
    const double f2 = lang.f2 * uniform(rng, 0.94, 1.06);
    const double f3 = lang.f3 * uniform(rng, 0.94, 1.06);
    const double tempo = uniform(rng, fam.tempo_lo, fam.tempo_hi) * lang.tempo_scale;
    const double slope = uniform(rng, fam.slope_lo, fam.slope_hi);
    const double jitter = uniform(rng, fam.jitter_lo, fam.jitter_hi);
    const double tilt = uniform(rng, fam.tilt_lo, fam.tilt_hi);
    const double snr_db = uniform(rng, 8.0, 30.0);
    // Recording channel: a random spectral tilt and one random resonance.
    const double channel_tilt = uniform(rng, -kChannelTilt, kChannelTilt);
    const double channel_hz = uniform(rng, 300.0, 3500.0);
    const double channel_gain = uniform(rng, -kChannelGain, kChannelGain);
    const double level = uniform(rng, 0.05, 0.2);
    const double syllable_phase = uniform(rng, 0.0, 1.0);

    const std::size_t n = sample_count(dur);
    const std::size_t max_h = static_cast<std::size_t>(kMaxHarmonicHz / (base_f0 * 0.5)) + 1;
    std::vector<double> harmonic_phase(max_h);
    for (auto& p : harmonic_phase) p = uniform(rng, 0.0, 1.0);
    std::vector<double> syllable_height(static_cast<std::size_t>(tempo * dur) + 2);
    for (auto& s : syllable_height) s = uniform(rng, 0.6, 1.0);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> out(n, 0.0);
    std::vector<double> amp(max_h, 0.0);
    // Per-harmonic phase accumulators in 2^-32 cycle units.
    std::vector<std::uint32_t> acc_phase(max_h);
    for (std::size_t h = 0; h < max_h; ++h) acc_phase[h] = static_cast<std::uint32_t>(harmonic_phase[h] * 4294967296.0);
    const auto& table = sine_table();
    for (std::size_t start = 0; start < n; start += kBlock) {
        const double t = static_cast<double>(start) / kRate;
        const double glide = std::pow(2.0, slope * (t / dur - 0.5) / 12.0);
        const double f0 = base_f0 * glide * (1.0 + jitter * gauss(rng));
        std::size_t active = 0;
        for (std::size_t h = 1; h <= max_h; ++h) {
            const double fh = f0 * static_cast<double>(h);
            if (fh >= kMaxHarmonicHz) break;
            const double bump = (fh - channel_hz) / 400.0;
            amp[h - 1] = std::pow(static_cast<double>(h), -tilt) * formant_gain(fh, f1, f2, f3) *
                         std::pow(fh / 1000.0, channel_tilt) * std::exp(channel_gain * std::exp(-bump * bump));
            active = h;
        }
        const double syl = tempo * t + syllable_phase;
        const auto syl_index = static_cast<std::size_t>(syl);
        const double shape = std::max(0.0, fast_sin(0.5 * (syl - std::floor(syl))));
        const double envelope =
            0.1 + 0.9 * syllable_height[std::min(syl_index, syllable_height.size() - 1)] * std::pow(shape, 1.5);
        const auto step = static_cast<std::uint32_t>(f0 / kRate * 4294967296.0);
        const std::size_t end = std::min(n, start + kBlock);
        for (std::size_t i = start; i < end; ++i) {
            double acc = 0.0;
            for (std::size_t h = 0; h < max_h; ++h) {
                if (h < active) acc += amp[h] * table[acc_phase[h] >> 20];
                acc_phase[h] += step * static_cast<std::uint32_t>(h + 1);
            }
            out[i] = envelope * acc;
        }
    }

    double energy = 0.0;
    for (double v : out) energy += v * v;
    const double noise_sigma = std::sqrt(energy / static_cast<double>(n)) / std::pow(10.0, snr_db / 20.0);
    for (auto& v : out) v += noise_sigma * gauss(rng);
    normalize_rms(out, level);

    Waveform w;
    w.samples = std::move(out);
    return w;
}

void CorpusSpec::validate() const {
    if (emotions.size() < 2) throw Error("corpus spec: at least two emotions required");
    if (languages.empty()) throw Error("corpus spec: at least one language required");
    if (counts.size() != languages.size()) throw Error("corpus spec: counts must have one row per language");
    for (const auto& row : counts)
        if (row.size() != emotions.size()) throw Error("corpus spec: counts must have one column per emotion");
}

std::size_t CorpusSpec::total() const {
    std::size_t n = 0;
    for (const auto& row : counts)
        for (auto c : row) n += c;
    return n;
}

CorpusSpec standard_corpus_spec(std::uint64_t seed) {
    CorpusSpec spec;
    spec.languages = {"english", "italian", "spanish"};
    spec.emotions = {"fear", "disgust", "happiness", "anger", "sadness"};
    spec.counts = {{72, 50, 69, 76, 74}, {83, 68, 93, 73, 93}, {63, 50, 76, 82, 85}};
    spec.seed = seed;
    return spec;
}

std::string clip_id(const std::string& language, const std::string& emotion, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04zu", index);
    return language + "/" + emotion + "/" + buf;
}

Waveform corpus_waveform(const CorpusSpec& spec, std::size_t language, std::size_t emotion, std::size_t index) {
    const std::uint64_t seed =
        derive_seed(spec.seed, "synth-clip", (std::uint64_t(language) << 40) | (std::uint64_t(emotion) << 32) | index);
    return synth_emotion(language, emotion, seed);
}

std::vector<FeatureClip> synth_emotion_corpus(const CorpusSpec& spec, const MfccConfig& mfcc_cfg) {
    spec.validate();
    std::vector<FeatureClip> clips;
    clips.reserve(spec.total());
    for (std::size_t l = 0; l < spec.languages.size(); ++l)
        for (std::size_t e = 0; e < spec.emotions.size(); ++e)
            for (std::size_t i = 0; i < spec.counts[l][e]; ++i) {
                FeatureClip clip;
                clip.mfcc = mfcc(corpus_waveform(spec, l, e, i), mfcc_cfg);
                clip.emotion = spec.emotions[e];
                clip.language = spec.languages[l];
                clip.source_id = clip_id(spec.languages[l], spec.emotions[e], i);
                clips.push_back(std::move(clip));
            }
    return clips;
}

Waveform fixed_waveform(const std::string& label, std::size_t index, std::uint64_t seed) {
    if (label == kFixedLabels[0]) return synth_silence(std::nullopt, derive_seed(seed, "synth-silence", index));
    if (label == kFixedLabels[1]) return synth_neutral(std::nullopt, derive_seed(seed, "synth-neutral", index));
    throw Error("synth: unknown fixed label " + label);
}

std::vector<FeatureClip> synth_fixed_pool(std::size_t per_class, std::uint64_t seed, const MfccConfig& mfcc_cfg) {
    std::vector<FeatureClip> clips;
    for (const auto& label : kFixedLabels)
        for (std::size_t i = 0; i < per_class; ++i) {
            FeatureClip clip;
            clip.mfcc = mfcc(fixed_waveform(label, i, seed), mfcc_cfg);
            clip.emotion = label;
            clip.language = kSharedLanguage;
            clip.source_id = clip_id(kSharedLanguage, label, i);
            clips.push_back(std::move(clip));
        }
    return clips;
}

}  // namespace fmaml::audio
