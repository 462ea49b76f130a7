#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fmaml/audio/features.hpp"
#include "fmaml/audio/mfcc.hpp"

namespace fmaml::audio {

/// Gaussian noise with σ = 1e-4. Without a duration, the length is drawn
/// from N(3.5 s, 0.3 s).
Waveform synth_silence(std::optional<double> duration, std::uint64_t seed);

/// Harmonic series on a constant 120 Hz fundamental shaped by fixed formant
/// resonances, constant amplitude, normalized to RMS 0.1. The seed picks the
/// harmonic phases (and the duration when unset).
Waveform synth_neutral(std::optional<double> duration, std::uint64_t seed);

/// Parameter ranges of one synthetic emotion family. Tempo and tilt ranges
/// are pairwise disjoint across the built-in families.
struct EmotionFamily {
    double slope_lo, slope_hi;    ///< pitch glide across the clip, semitones
    double tempo_lo, tempo_hi;    ///< syllable rate, Hz
    double jitter_lo, jitter_hi;  ///< relative per-5ms pitch perturbation
    double tilt_lo, tilt_hi;      ///< harmonic amplitude ∝ h^-tilt
    double f0_scale;              ///< multiplies the speaker's base pitch
};

/// Formant targets and speaker pitch range of one synthetic language.
struct LanguageFamily {
    double f1, f2, f3;
    double f0_lo, f0_hi;
    double tempo_scale;
};

/// Family for the i-th emotion of a corpus (at most five are built in).
const EmotionFamily& emotion_family(std::size_t index);
LanguageFamily language_family(std::size_t index);

/// One utterance of emotion family `emotion` in language family `language`.
Waveform synth_emotion(std::size_t language, std::size_t emotion, std::uint64_t seed,
                       std::optional<double> duration = std::nullopt);

struct CorpusSpec {
    std::vector<std::string> languages;
    std::vector<std::string> emotions;
    /// counts[l][e]: clips of emotion e in language l.
    std::vector<std::vector<std::size_t>> counts;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t total() const;
};

/// English/Italian/Spanish × fear/disgust/happiness/anger/sadness with the
/// fixed per-emotion clip counts (341, 410 and 356 clips per language).
CorpusSpec standard_corpus_spec(std::uint64_t seed);

/// Source id of clip `index` of (language, emotion).
std::string clip_id(const std::string& language, const std::string& emotion, std::size_t index);

/// Waveform of one corpus clip, deterministic in (spec.seed, l, e, index).
Waveform corpus_waveform(const CorpusSpec& spec, std::size_t language, std::size_t emotion, std::size_t index);

/// Every clip of the spec as MFCC features; deterministic under spec.seed.
std::vector<FeatureClip> synth_emotion_corpus(const CorpusSpec& spec, const MfccConfig& mfcc_cfg = {});

/// Waveform of fixed-class clip `index` (label is "silence" or "neutral").
Waveform fixed_waveform(const std::string& label, std::size_t index, std::uint64_t seed);

/// `per_class` silence and neutral clips tagged with the shared language.
std::vector<FeatureClip> synth_fixed_pool(std::size_t per_class, std::uint64_t seed, const MfccConfig& mfcc_cfg = {});

}  // namespace fmaml::audio
