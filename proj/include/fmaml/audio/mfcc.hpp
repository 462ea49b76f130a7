#pragma once

#include <complex>
#include <vector>

#include "fmaml/audio/wav.hpp"

namespace fmaml::audio {

struct MfccConfig {
    std::size_t n_mfcc = 40;
    double frame_len = 0.030;   ///< seconds
    double frame_step = 0.010;  ///< seconds
    std::size_t n_fft = 512;
    std::size_t n_mels = 40;
    double log_floor = 1e-10;
    double preemphasis = 0.97;

    std::size_t frame_samples(double rate) const;
    std::size_t step_samples(double rate) const;
    /// 1 + floor((len − frame) / step) for len ≥ frame, else 0.
    std::size_t frame_count(std::size_t len, double rate) const;
    void validate(double rate) const;
};

/// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& x);

std::vector<double> hamming_window(std::size_t n);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Centers (Hz) of the n_mels triangular filters spaced evenly on the HTK mel
/// scale between 0 Hz and Nyquist.
std::vector<double> mel_centers_hz(const MfccConfig& cfg, double rate);

/// Triangular filter weights [n_mels × (n_fft/2+1)].
Tensor mel_filterbank(const MfccConfig& cfg, double rate);

/// Orthonormal DCT-II rows [n_out × n_in].
Tensor dct_matrix(std::size_t n_out, std::size_t n_in);

/// Pre-emphasized, Hamming-windowed frames [T × frame_samples].
Tensor windowed_frames(const Waveform& wave, const MfccConfig& cfg);

/// One-sided power spectrum |FFT|² of each frame, zero-padded to n_fft: [T × (n_fft/2+1)].
Tensor power_spectrum(const Tensor& frames, const MfccConfig& cfg);

/// Mel filterbank energies (before the log) [n_mels × T].
Tensor mel_energies(const Waveform& wave, const MfccConfig& cfg);

/// MFCC matrix [n_mfcc × T]: pre-emphasis → framing → Hamming → |FFT|² →
/// mel filterbank → log(max(·, floor)) → orthonormal DCT-II.
Tensor mfcc(const Waveform& wave, const MfccConfig& cfg = {});

}  // namespace fmaml::audio
