#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fmaml/meta/trainer.hpp"

namespace fmaml::harness {

/// One experiment: one target language, a grid of variants × K.
struct ExperimentConfig {
    std::string corpus;  ///< "synthetic" or a corpus directory
    std::optional<std::uint64_t> corpus_seed;  ///< synthetic corpus seed; unset: train.seed
    std::size_t fixed_per_class = 60;          ///< synthetic silence/neutral clips per class
    std::string target_language;
    std::vector<std::string> source_languages;  ///< empty: every language but the target
    std::vector<std::size_t> k_shots{5, 10, 20};
    std::vector<std::string> variants{"supervised", "maml", "fmaml"};
    std::size_t n_way = 5;    ///< new classes per task
    std::size_t q_new = 5;    ///< meta-learning query clips per new class
    std::size_t q_fixed = 5;  ///< meta-learning query clips per fixed class
    std::size_t trials = 100;
    std::size_t eval_per_label = 25;
    std::string profile = "paper";
    std::filesystem::path output_dir = "out";
    meta::TrainConfig train;

    std::uint64_t synthetic_seed() const { return corpus_seed.value_or(train.seed); }
    void validate() const;
};

/// Names accepted by apply_profile.
const std::vector<std::string>& profile_names();

/// Overwrites the profile-controlled fields of `cfg` with the named profile.
void apply_profile(ExperimentConfig& cfg, const std::string& name);

/// Parses the flat `key = value` format (see docs/config.md). The profile
/// (`profile_override`, else the file's `profile` key, else "paper") is applied
/// first; explicit keys then override it. Unknown keys, type errors and a
/// missing corpus or target_language are errors.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::optional<std::string>& profile_override = std::nullopt);
ExperimentConfig parse_config(const std::filesystem::path& path,
                              const std::optional<std::string>& profile_override = std::nullopt);

}  // namespace fmaml::harness
