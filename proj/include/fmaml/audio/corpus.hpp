#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fmaml/audio/features.hpp"
#include "fmaml/audio/mfcc.hpp"
#include "fmaml/audio/synth.hpp"

namespace fmaml::audio {

/// One WAV file of a corpus directory with the labels taken from its path.
struct CorpusEntry {
    std::filesystem::path file;
    std::string language;
    std::string emotion;
    std::string source_id;  ///< path relative to the root, '/'-separated
};

/// Lists root/<language>/<emotion>/<clip>.wav sorted by path. Clips under a
/// fixed-class directory ("silence", "neutral") go to the shared language
/// regardless of the language directory they sit in.
std::vector<CorpusEntry> list_corpus_directory(const std::filesystem::path& root);

FeatureClip load_corpus_clip(const CorpusEntry& entry, const MfccConfig& cfg = {});

/// Reads root/<language>/<emotion>/<clip>.wav into MFCC clips, sorted by path.
/// Clips under a fixed-class directory ("silence", "neutral") go to the
/// shared language regardless of the language directory they sit in.
std::vector<FeatureClip> load_corpus_directory(const std::filesystem::path& root, const MfccConfig& cfg = {});

/// Writes the synthetic corpus and `fixed_per_class` clips of each fixed class
/// in the directory layout above (fixed classes under root/shared/).
/// Returns the number of files written.
std::size_t write_synthetic_corpus(const std::filesystem::path& root, const CorpusSpec& spec,
                                   std::size_t fixed_per_class);

}  // namespace fmaml::audio
