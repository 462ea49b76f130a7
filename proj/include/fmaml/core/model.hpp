#pragma once

#include <cstdint>
#include <vector>

#include "fmaml/core/params.hpp"

namespace fmaml {

/// CNN classifier geometry: `blocks` × (3×3 conv, stride 1, pad 1 → ReLU →
/// batchnorm → 2×2 max-pool), adaptive average pool to pooled×pooled, flatten,
/// linear head with `outputs` slots.
struct ModelConfig {
    std::size_t in_height = 40;
    std::size_t in_width = 300;
    std::size_t blocks = 4;
    std::size_t filters = 64;
    std::size_t pooled = 3;
    std::size_t outputs = 7;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    std::size_t flatten_width() const { return filters * pooled * pooled; }
    /// Spatial size entering block `b` (b == blocks gives the final map).
    std::pair<std::size_t, std::size_t> spatial_at(std::size_t b) const;
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class BnMode {
    batch,    ///< normalize with the statistics of the current batch
    running,  ///< normalize with the stored running statistics
};

/// Per-block batch statistics (mean, unbiased variance) observed in a forward pass.
struct BatchStats {
    std::vector<Tensor> mean;
    std::vector<Tensor> var;
};

/// Parameter layout, in order, per block i: conv{i}.weight [F×C×3×3],
/// conv{i}.bias [F], bn{i}.weight [F], bn{i}.bias [F]; then fc.weight
/// [outputs×flatten], fc.bias [outputs].
ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Running batchnorm statistics: bn{i}.running_mean (zeros), bn{i}.running_var (ones).
ParamSet init_running_stats(const ModelConfig& cfg);

/// Exponential moving average update of running statistics.
void update_running_stats(ParamSet& running, const BatchStats& stats, double momentum);

/// Recorded forward pass. `batch` is [B×1×H×W]; result is [B×outputs] logits.
/// `running` is required for BnMode::running; `stats` receives batch statistics
/// when non-null.
Var forward(const ModelConfig& cfg, const std::vector<Var>& params, const Var& batch, BnMode mode,
            const ParamSet* running = nullptr, BatchStats* stats = nullptr);

/// Untaped forward pass with batch statistics.
Tensor forward(const ModelConfig& cfg, const ParamSet& params, const Tensor& batch);

/// Index of the largest element in each row; ties go to the lowest index.
std::vector<std::size_t> argmax_rows(const Tensor& logits);

}  // namespace fmaml
