#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fmaml/audio/features.hpp"

namespace fmaml::episodes {

using audio::FeatureClip;

/// Immutable index of clips by (language, label). Fixed-class clips live under
/// the shared language. Every clip handed out is counted per language so
/// callers can audit which languages a stage touched.
class DatasetRegistry {
public:
    explicit DatasetRegistry(std::vector<FeatureClip> clips);

    std::size_t size() const { return clips_.size(); }
    /// Coefficient rows shared by every clip.
    std::size_t feature_rows() const { return feature_rows_; }

    /// Clip by registry index; counts one access for its language.
    const FeatureClip& clip(std::size_t index) const;

    /// Languages other than the shared one, sorted.
    std::vector<std::string> languages() const;
    /// Labels present for `language`, sorted.
    std::vector<std::string> labels(const std::string& language) const;
    /// Registry indices of (language, label) in corpus order; empty if absent.
    const std::vector<std::size_t>& indices(const std::string& language, const std::string& label) const;

    std::size_t count(const std::string& language, const std::string& label) const;
    std::size_t total(const std::string& language) const;
    bool has_language(const std::string& language) const;

    /// Clips handed out via clip() for `language` since construction.
    std::size_t access_count(const std::string& language) const;

private:
    std::vector<FeatureClip> clips_;
    std::map<std::string, std::map<std::string, std::vector<std::size_t>>> index_;
    std::vector<std::size_t> language_slot_;  // per clip, into access_
    std::map<std::string, std::size_t> language_ids_;
    std::unique_ptr<std::atomic<std::size_t>[]> access_;
    std::size_t feature_rows_ = 0;
};

}  // namespace fmaml::episodes
