#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fmaml/core/tensor.hpp"

namespace fmaml::audio {

inline constexpr double kDefaultSampleRate = 16000.0;

class WavError : public Error {
public:
    using Error::Error;
};

/// Mono samples in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    double sample_rate = kDefaultSampleRate;

    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
    void validate() const;
};

/// Reads 16-bit PCM WAV (mono, or stereo downmixed by mean), resampled to
/// `target_rate` by linear interpolation when the file rate differs.
Waveform load_wav(const std::filesystem::path& path, double target_rate = kDefaultSampleRate);

/// Writes 16-bit PCM with `channels` identical (or per-channel) tracks.
void save_wav(const std::filesystem::path& path, const Waveform& wave);
void save_wav(const std::filesystem::path& path, const std::vector<std::vector<double>>& channels, std::uint32_t rate);

/// Linear-interpolation resampling; output length round(len · to / from).
std::vector<double> resample_linear(const std::vector<double>& samples, double from_rate, double to_rate);

}  // namespace fmaml::audio
