#include "fmaml/audio/features.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fmaml::audio {

void FeatureClip::validate() const {
    if (mfcc.rank() != 2 || mfcc.dim(1) == 0) throw Error("FeatureClip " + source_id + ": empty MFCC matrix");
    check_finite(mfcc, "FeatureClip");
}

Tensor cepstral_mean_normalize(const Tensor& mfcc) {
    const std::size_t rows = mfcc.dim(0), cols = mfcc.dim(1);
    Tensor out = mfcc;
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mean += mfcc.at(r, c);
        mean /= static_cast<double>(cols);
        for (std::size_t c = 0; c < cols; ++c) out.at(r, c) -= mean;
    }
    return out;
}

Tensor pad_or_crop(const Tensor& mfcc, std::size_t frames) {
    const std::size_t rows = mfcc.dim(0), cols = mfcc.dim(1);
    Tensor out({rows, frames});
    if (cols >= frames) {
        const std::size_t start = (cols - frames) / 2;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < frames; ++c) out.at(r, c) = mfcc.at(r, start + c);
        return out;
    }
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mean += mfcc.at(r, c);
        mean /= static_cast<double>(cols);
        for (std::size_t c = 0; c < frames; ++c) out.at(r, c) = c < cols ? mfcc.at(r, c) : mean;
    }
    return out;
}

Tensor pool_time(const Tensor& mfcc, std::size_t factor) {
    if (factor == 0) throw Error("pool_time: factor must be positive");
    if (factor == 1) return mfcc;
    const std::size_t rows = mfcc.dim(0), cols = mfcc.dim(1) / factor;
    if (cols == 0) throw Error("pool_time: fewer frames than the pooling factor");
    Tensor out({rows, cols});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < factor; ++k) acc += mfcc.at(r, c * factor + k);
            out.at(r, c) = acc / static_cast<double>(factor);
        }
    return out;
}

Tensor model_input(const FeatureClip& clip, const FeatureConfig& cfg) {
    Tensor x = cfg.cepstral_mean_norm ? cepstral_mean_normalize(clip.mfcc) : clip.mfcc;
    return pool_time(pad_or_crop(x, cfg.fixed_frames), cfg.time_pool);
}

namespace {

static_assert(std::endian::native == std::endian::little, "feature cache I/O assumes a little-endian host");

}  // namespace

void write_feature_cache(const std::filesystem::path& path, const Tensor& mfcc) {
    if (mfcc.rank() != 2) throw Error("write_feature_cache: expected a rank-2 matrix");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write feature cache " + path.string());
    const auto rows = static_cast<std::uint32_t>(mfcc.dim(0));
    const auto cols = static_cast<std::uint32_t>(mfcc.dim(1));
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    out.write(reinterpret_cast<const char*>(mfcc.data().data()), static_cast<std::streamsize>(mfcc.size() * 8));
}

Tensor read_feature_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open feature cache " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw Error("feature cache too short: " + path.string());
    std::uint32_t rows = 0, cols = 0;
    std::memcpy(&rows, bytes.data(), 4);
    std::memcpy(&cols, bytes.data() + 4, 4);
    const std::size_t n = std::size_t(rows) * cols;
    if (bytes.size() != 8 + n * 8) throw Error("feature cache size does not match its header: " + path.string());
    std::vector<double> data(n);
    std::memcpy(data.data(), bytes.data() + 8, n * 8);
    return Tensor({rows, cols}, std::move(data));
}

}  // namespace fmaml::audio
