#include "fmaml/episodes/registry.hpp"

#include <set>

namespace fmaml::episodes {

DatasetRegistry::DatasetRegistry(std::vector<FeatureClip> clips) : clips_(std::move(clips)) {
    if (clips_.empty()) throw Error("register_corpus: empty corpus");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < clips_.size(); ++i) {
        const auto& c = clips_[i];
        if (c.language.empty() || c.emotion.empty())
            throw Error("register_corpus: clip " + c.source_id + " lacks a language or label");
        if (!seen.insert(c.source_id).second) throw Error("register_corpus: duplicate source_id " + c.source_id);
        c.validate();
        if (i == 0) feature_rows_ = c.mfcc.dim(0);
        if (c.mfcc.dim(0) != feature_rows_)
            throw Error("register_corpus: clip " + c.source_id + " has " + std::to_string(c.mfcc.dim(0)) +
                        " coefficient rows, expected " + std::to_string(feature_rows_));
        index_[c.language][c.emotion].push_back(i);
        language_ids_.try_emplace(c.language, language_ids_.size());
    }
    language_slot_.reserve(clips_.size());
    for (const auto& c : clips_) language_slot_.push_back(language_ids_.at(c.language));
    access_ = std::make_unique<std::atomic<std::size_t>[]>(language_ids_.size());
    for (std::size_t i = 0; i < language_ids_.size(); ++i) access_[i] = 0;
}

const FeatureClip& DatasetRegistry::clip(std::size_t index) const {
    if (index >= clips_.size()) throw Error("registry index out of range");
    access_[language_slot_[index]].fetch_add(1, std::memory_order_relaxed);
    return clips_[index];
}

std::vector<std::string> DatasetRegistry::languages() const {
    std::vector<std::string> out;
    for (const auto& [lang, labels] : index_)
        if (lang != audio::kSharedLanguage) out.push_back(lang);
    return out;
}

std::vector<std::string> DatasetRegistry::labels(const std::string& language) const {
    std::vector<std::string> out;
    if (auto it = index_.find(language); it != index_.end())
        for (const auto& [label, idx] : it->second) out.push_back(label);
    return out;
}

const std::vector<std::size_t>& DatasetRegistry::indices(const std::string& language, const std::string& label) const {
    static const std::vector<std::size_t> empty;
    auto it = index_.find(language);
    if (it == index_.end()) return empty;
    auto jt = it->second.find(label);
    return jt == it->second.end() ? empty : jt->second;
}

std::size_t DatasetRegistry::count(const std::string& language, const std::string& label) const {
    return indices(language, label).size();
}

std::size_t DatasetRegistry::total(const std::string& language) const {
    std::size_t n = 0;
    if (auto it = index_.find(language); it != index_.end())
        for (const auto& [label, idx] : it->second) n += idx.size();
    return n;
}

bool DatasetRegistry::has_language(const std::string& language) const { return index_.contains(language); }

std::size_t DatasetRegistry::access_count(const std::string& language) const {
    auto it = language_ids_.find(language);
    return it == language_ids_.end() ? 0 : access_[it->second].load(std::memory_order_relaxed);
}

}  // namespace fmaml::episodes
