#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "fmaml/core/rng.hpp"
#include "fmaml/episodes/registry.hpp"

namespace fmaml::episodes {

/// N+F-way, K-shot task shape.
struct EpisodeSpec {
    std::size_t n_new = 5;
    std::size_t n_fixed = 2;
    std::size_t k_shot = 5;
    std::size_t q_new = 5;    ///< query clips per new class
    std::size_t q_fixed = 5;  ///< query clips per fixed class

    std::size_t ways() const { return n_new + n_fixed; }
    void validate() const;
    friend bool operator==(const EpisodeSpec&, const EpisodeSpec&) = default;
};

/// Label of each output slot. Fixed labels occupy the last n_fixed slots in
/// the order of audio::kFixedLabels.
class SlotMap {
public:
    SlotMap() = default;
    SlotMap(std::vector<std::string> new_labels_by_slot, std::size_t n_fixed);

    std::size_t size() const { return labels_.size(); }
    std::size_t n_new() const { return labels_.size() - n_fixed_; }
    std::size_t n_fixed() const { return n_fixed_; }
    const std::string& label(std::size_t slot) const { return labels_.at(slot); }
    const std::vector<std::string>& labels() const { return labels_; }
    /// Throws when the label has no slot.
    std::size_t slot_of(const std::string& label) const;
    bool is_fixed_slot(std::size_t slot) const { return slot >= n_new() && slot < size(); }

    friend bool operator==(const SlotMap&, const SlotMap&) = default;

private:
    std::vector<std::string> labels_;
    std::size_t n_fixed_ = 0;
};

/// Fixed labels used by a spec with `n_fixed` fixed classes.
std::vector<std::string> fixed_labels(std::size_t n_fixed);

struct Item {
    std::size_t clip;  ///< registry index
    std::size_t slot;
};

struct Episode {
    std::vector<Item> support;
    std::vector<Item> query;
    SlotMap slots;
    std::string language;
    std::uint64_t id = 0;
};

/// Meta-training task: one feasible source language chosen uniformly, N labels
/// of it sampled without replacement and given a random permutation of slots
/// 0..N−1. Shared-pool labels that are not fixed in this spec count as
/// ordinary labels of every language. Fixed classes appear only in the query.
Episode sample_meta_task(const DatasetRegistry& reg, const EpisodeSpec& spec, const std::vector<std::string>& languages,
                         Rng& rng, std::uint64_t episode_id = 0);

/// Fine-tuning support (K per new label) and evaluation query
/// (`eval_per_label` per label, fixed classes included) of a target language.
struct TargetTask {
    std::vector<Item> support;
    std::vector<Item> eval_query;
    SlotMap slots;
    std::string language;
};

TargetTask build_target_task(const DatasetRegistry& reg, const EpisodeSpec& spec, const std::string& target_language,
                             std::size_t eval_per_label, Rng& rng);

/// One JSON object per line: {"source_id", "role", "slot", "episode_id"}.
void write_manifest(std::ostream& out, const DatasetRegistry& reg, const Episode& episode);

}  // namespace fmaml::episodes
