#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fmaml/core/tensor.hpp"

namespace fmaml::audio {

/// Labels of the two fixed classes; the order here is their slot order.
inline const std::vector<std::string> kFixedLabels{"silence", "neutral"};
/// Language tag of clips that belong to no language (the fixed-class pool).
inline const std::string kSharedLanguage = "*";

/// MFCC matrix [n_mfcc × T] of one utterance with its labels.
struct FeatureClip {
    Tensor mfcc;
    std::string emotion;
    std::string language;
    std::string source_id;

    std::size_t frames() const { return mfcc.dim(1); }
    void validate() const;
};

/// How a clip's MFCC matrix becomes a fixed-size model input.
struct FeatureConfig {
    bool cepstral_mean_norm = true;
    std::size_t fixed_frames = 300;  ///< pad with per-row mean or center-crop to this many frames
    std::size_t time_pool = 1;       ///< average non-overlapping groups of this many frames

    std::size_t input_width() const { return fixed_frames / time_pool; }
    friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Subtracts each row's mean over time.
Tensor cepstral_mean_normalize(const Tensor& mfcc);

/// Pads with the per-row mean or center-crops to `frames` columns.
Tensor pad_or_crop(const Tensor& mfcc, std::size_t frames);

/// Averages non-overlapping groups of `factor` columns (trailing remainder dropped).
Tensor pool_time(const Tensor& mfcc, std::size_t factor);

/// [rows × input_width] model input for one clip.
Tensor model_input(const FeatureClip& clip, const FeatureConfig& cfg);

/// Feature cache file: two little-endian u32 (rows, cols), then rows·cols
/// little-endian f64 in row-major order.
void write_feature_cache(const std::filesystem::path& path, const Tensor& mfcc);
Tensor read_feature_cache(const std::filesystem::path& path);

}  // namespace fmaml::audio
