#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fmaml/core/meta_gradient.hpp"
#include "fmaml/episodes/episode.hpp"

namespace fmaml::meta {

using episodes::DatasetRegistry;
using episodes::Episode;
using episodes::EpisodeSpec;
using episodes::Item;
using episodes::SlotMap;

enum class Variant { maml, fmaml };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
std::string to_string(GradOrder order);
GradOrder parse_grad_order(const std::string& name);

struct TrainConfig {
    double alpha = 0.1;
    double beta = 0.001;
    std::size_t meta_batch = 16;
    std::size_t inner_steps = 5;
    std::size_t meta_iters = 2000;
    std::optional<std::size_t> finetune_iters;  ///< unset: inner_steps
    GradOrder grad_mode = GradOrder::first_order;
    Variant variant = Variant::fmaml;
    std::uint64_t seed = 0;
    std::optional<bool> freeze_fixed;  ///< unset: on for fmaml
    std::size_t supervised_epochs = 100;
    std::size_t jobs = 1;  ///< worker threads for tasks of a meta-batch and for trials
    ModelConfig model;     ///< in_height, in_width and outputs are filled in per run
    audio::FeatureConfig features;

    std::size_t finetune_steps() const { return finetune_iters.value_or(inner_steps); }
    bool freezes_fixed() const { return freeze_fixed.value_or(variant == Variant::fmaml); }
    void validate() const;
};

/// 16 hex digits identifying every field of the config.
std::string config_hash(const TrainConfig& cfg);

/// Lazily built model inputs [1×H×W] per registry index. Safe to share
/// between threads; a clip is read from the registry the first time it is
/// requested.
class InputStore {
public:
    InputStore(const DatasetRegistry& reg, audio::FeatureConfig cfg);

    const Tensor& input(std::size_t clip) const;
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    const DatasetRegistry& registry() const { return reg_; }

private:
    const DatasetRegistry& reg_;
    audio::FeatureConfig cfg_;
    std::size_t height_;
    std::size_t width_;
    std::unique_ptr<std::once_flag[]> once_;
    mutable std::vector<Tensor> cache_;
};

/// Inputs [B×1×H×W] in item order with one-hot slot targets.
LabeledBatch make_batch(const InputStore& store, const std::vector<Item>& items, std::size_t ways);

/// cfg.model with input geometry from `store` and `ways` output slots.
ModelConfig resolve_model(const TrainConfig& cfg, const InputStore& store, std::size_t ways);

/// `steps` full-batch SGD steps on the support loss; θ is untouched.
ParamSet inner_adapt(const ModelConfig& model, const ParamSet& theta, const LabeledBatch& support, double alpha,
                     std::size_t steps);

struct TaskBatch {
    std::uint64_t id = 0;
    LabeledBatch support;
    LabeledBatch query;
};

struct MetaStep {
    ParamSet theta;
    double meta_loss = 0.0;       ///< mean query loss over the tasks, before the update
    double query_accuracy = 0.0;  ///< mean query accuracy, before the update
};

/// One outer update: per-task meta-gradients summed in id order, scaled by
/// 1/|tasks|, then θ − β·g.
MetaStep meta_step(const ModelConfig& model, const ParamSet& theta, const std::vector<TaskBatch>& tasks,
                   const TrainConfig& cfg);
MetaStep meta_step(const ModelConfig& model, const ParamSet& theta, const std::vector<Episode>& tasks,
                   const InputStore& store, const TrainConfig& cfg);

struct TraceEntry {
    double meta_loss = 0.0;
    double query_accuracy = 0.0;
    double wall_ms = 0.0;
};
using TrainTrace = std::vector<TraceEntry>;

struct TrainedModel {
    ModelConfig model;
    ParamSet theta;
    TrainTrace trace;
};

/// Runs before every iteration with the sampled tasks.
using EpisodeObserver = std::function<void(std::size_t iter, const std::vector<Episode>&)>;

/// Meta-learning stage over `source_languages`. fmaml needs spec.n_fixed > 0,
/// maml needs spec.n_fixed == 0.
TrainedModel meta_train(const InputStore& store, const EpisodeSpec& spec,
                        const std::vector<std::string>& source_languages, const TrainConfig& cfg,
                        const EpisodeObserver& observer = {});

/// Update mask for fine-tuning: zeros on the output rows and biases of fixed
/// slots when freezing applies, ones elsewhere.
ParamSet finetune_mask(const ModelConfig& model, const ParamSet& theta, const SlotMap& slots, bool freeze);

/// finetune_steps() SGD steps at rate alpha on the support loss.
ParamSet fine_tune(const ModelConfig& model, const ParamSet& theta, const LabeledBatch& support,
                   const SlotMap& slots, const TrainConfig& cfg);

/// Fraction of rows whose argmax equals the target slot; batch statistics of
/// the whole query are used for batchnorm.
double evaluate(const ModelConfig& model, const ParamSet& theta, const LabeledBatch& query);

/// Random init from `seed`, then supervised_epochs full-batch steps on support.
ParamSet supervised_baseline(const ModelConfig& model, const LabeledBatch& support, const TrainConfig& cfg,
                             std::uint64_t seed);

struct ProtocolResult {
    double mean = 0.0;
    double std = 0.0;  ///< sample standard deviation; 0 for one trial
    std::vector<double> accuracies;
};

/// Trials of build_target_task → fine_tune (or supervised training when
/// `theta` is null) → evaluate. Trial i draws from derive_seed(seed, "target-task", i).
ProtocolResult run_protocol(const InputStore& store, const EpisodeSpec& spec, const std::string& target_language,
                            const TrainConfig& cfg, std::size_t trials, std::size_t eval_per_label,
                            const ModelConfig& model, const ParamSet* theta);

struct Checkpoint {
    ParamSet params;
    std::string config_hash;
    std::uint64_t seed = 0;
};

/// u64 LE header length, JSON header {names, shapes, config_hash, seed}, then
/// every tensor as little-endian f64 in order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Runs body(i) for i in [0, n) on up to `jobs` threads; rethrows the
/// exception of the lowest failing index.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body);

}  // namespace fmaml::meta
