#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fmaml/harness/config.hpp"

namespace fmaml::harness {

struct CellResult {
    std::string variant;
    std::size_t k_shot = 0;
    bool ok = false;
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> trials;
    std::string error;          ///< set when !ok
    double wall_seconds = 0.0;  ///< timing; not part of the comparable report
};

struct TracePoint {
    double meta_loss = 0.0;
    double query_accuracy = 0.0;
};

struct ExperimentReport {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string corpus;
    std::string corpus_fingerprint;
    std::string profile;
    std::string target_language;
    std::vector<std::string> source_languages;
    std::vector<std::string> notes;
    std::size_t meta_iters = 0;
    std::size_t trials = 0;
    std::size_t eval_per_label = 0;
    std::vector<std::size_t> k_shots;
    std::vector<std::string> variants;
    /// Target-language clips read while meta-training; must be 0.
    std::size_t target_reads_during_meta_train = 0;
    std::vector<CellResult> cells;
    /// variant → K → per-iteration trace.
    std::map<std::string, std::map<std::size_t, std::vector<TracePoint>>> traces;
    std::string started;
    std::string finished;

    const CellResult* cell(const std::string& variant, std::size_t k) const;
};

struct RunOptions {
    std::optional<std::filesystem::path> cache_dir;  ///< MFCC feature cache
    std::ostream* log = nullptr;                     ///< progress lines
    bool write_outputs = true;                       ///< report, tables, traces, checkpoints
};

/// Environment variable naming the feature cache directory.
inline constexpr const char* kCacheDirEnv = "FMAML_CACHE_DIR";

/// Hash of every field that influences results (not output_dir or jobs).
std::string experiment_hash(const ExperimentConfig& cfg);

/// Corpus clips as MFCC features, synthesized or read from a directory,
/// reusing and filling the cache when given.
std::vector<audio::FeatureClip> load_corpus(const ExperimentConfig& cfg,
                                            const std::optional<std::filesystem::path>& cache_dir);

/// 16 hex digits over ids, labels and feature values of every clip.
std::string corpus_fingerprint(const std::vector<audio::FeatureClip>& clips);

/// Leave-one-language-out run of every (variant, K) cell. A failing cell is
/// recorded with its error and the remaining cells still run. Writes
/// report.json, tables.csv, tables.txt, trace_<variant>.csv and one
/// checkpoint per meta-trained cell into cfg.output_dir.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

}  // namespace fmaml::harness
