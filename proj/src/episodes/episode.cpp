#include "fmaml/episodes/episode.hpp"

#include <algorithm>

#include "json.hpp"

namespace fmaml::episodes {

void EpisodeSpec::validate() const {
    if (n_new == 0 || k_shot == 0 || q_new == 0) throw Error("EpisodeSpec: n_new, k_shot and q_new must be at least 1");
    if (n_fixed > 0 && q_fixed == 0) throw Error("EpisodeSpec: q_fixed must be at least 1 with fixed classes");
    if (n_fixed == 0 && n_new < 2) throw Error("EpisodeSpec: need at least two classes");
    if (n_fixed > audio::kFixedLabels.size())
        throw Error("EpisodeSpec: at most " + std::to_string(audio::kFixedLabels.size()) + " fixed classes");
}

std::vector<std::string> fixed_labels(std::size_t n_fixed) {
    if (n_fixed > audio::kFixedLabels.size()) throw Error("too many fixed classes requested");
    return {audio::kFixedLabels.begin(), audio::kFixedLabels.begin() + static_cast<std::ptrdiff_t>(n_fixed)};
}

SlotMap::SlotMap(std::vector<std::string> new_labels_by_slot, std::size_t n_fixed)
    : labels_(std::move(new_labels_by_slot)), n_fixed_(n_fixed) {
    for (auto& f : fixed_labels(n_fixed)) labels_.push_back(std::move(f));
    auto sorted = labels_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw Error("SlotMap: duplicate label");
}

std::size_t SlotMap::slot_of(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw Error("SlotMap: label " + label + " has no slot");
    return static_cast<std::size_t>(it - labels_.begin());
}

namespace {

// Where the clips of a label live: its own language, or the shared pool.
const std::vector<std::size_t>& label_pool(const DatasetRegistry& reg, const std::string& language,
                                           const std::string& label) {
    const auto& own = reg.indices(language, label);
    return own.empty() ? reg.indices(audio::kSharedLanguage, label) : own;
}

// Labels a task in `language` may draw as new classes.
std::vector<std::string> candidate_labels(const DatasetRegistry& reg, const EpisodeSpec& spec,
                                          const std::string& language) {
    auto labels = reg.labels(language);
    const auto fixed = fixed_labels(spec.n_fixed);
    for (const auto& shared : reg.labels(audio::kSharedLanguage))
        if (std::find(fixed.begin(), fixed.end(), shared) == fixed.end() &&
            std::find(labels.begin(), labels.end(), shared) == labels.end())
            labels.push_back(shared);
    std::sort(labels.begin(), labels.end());
    return labels;
}

std::vector<std::string> feasible_labels(const DatasetRegistry& reg, const EpisodeSpec& spec,
                                         const std::string& language, std::size_t need) {
    std::vector<std::string> out;
    for (const auto& label : candidate_labels(reg, spec, language))
        if (label_pool(reg, language, label).size() >= need) out.push_back(label);
    return out;
}

std::size_t uniform_index(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

// First `k` entries of a partial Fisher–Yates shuffle.
template <class T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k, Rng& rng) {
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    pool.resize(k);
    return pool;
}

void check_fixed_pool(const DatasetRegistry& reg, const EpisodeSpec& spec, std::size_t need) {
    for (const auto& label : fixed_labels(spec.n_fixed))
        if (reg.count(audio::kSharedLanguage, label) < need)
            throw Error("fixed class " + label + " has " + std::to_string(reg.count(audio::kSharedLanguage, label)) +
                        " clips, " + std::to_string(need) + " needed");
}

}  // namespace

Episode sample_meta_task(const DatasetRegistry& reg, const EpisodeSpec& spec, const std::vector<std::string>& languages,
                         Rng& rng, std::uint64_t episode_id) {
    spec.validate();
    check_fixed_pool(reg, spec, spec.q_fixed);
    const std::size_t need = spec.k_shot + spec.q_new;
    std::vector<std::string> feasible;
    for (const auto& lang : languages)
        if (lang != audio::kSharedLanguage && reg.has_language(lang) &&
            feasible_labels(reg, spec, lang, need).size() >= spec.n_new)
            feasible.push_back(lang);
    if (feasible.empty())
        throw Error("sample_meta_task: no source language has " + std::to_string(spec.n_new) + " labels with " +
                    std::to_string(need) + " clips each");

    Episode ep;
    ep.id = episode_id;
    ep.language = feasible[uniform_index(rng, feasible.size())];
    const auto chosen = sample_without_replacement(feasible_labels(reg, spec, ep.language, need), spec.n_new, rng);
    // chosen is already in random order, so slot i goes to chosen[i].
    ep.slots = SlotMap(chosen, spec.n_fixed);
    for (std::size_t slot = 0; slot < spec.n_new; ++slot) {
        const auto picked = sample_without_replacement(label_pool(reg, ep.language, chosen[slot]), need, rng);
        for (std::size_t i = 0; i < spec.k_shot; ++i) ep.support.push_back({picked[i], slot});
        for (std::size_t i = spec.k_shot; i < need; ++i) ep.query.push_back({picked[i], slot});
    }
    for (std::size_t f = 0; f < spec.n_fixed; ++f) {
        const std::size_t slot = spec.n_new + f;
        const auto picked =
            sample_without_replacement(reg.indices(audio::kSharedLanguage, ep.slots.label(slot)), spec.q_fixed, rng);
        for (auto idx : picked) ep.query.push_back({idx, slot});
    }
    return ep;
}

TargetTask build_target_task(const DatasetRegistry& reg, const EpisodeSpec& spec, const std::string& target_language,
                             std::size_t eval_per_label, Rng& rng) {
    spec.validate();
    if (eval_per_label == 0) throw Error("build_target_task: eval_per_label must be at least 1");
    if (!reg.has_language(target_language) || target_language == audio::kSharedLanguage)
        throw Error("build_target_task: unknown target language " + target_language);
    check_fixed_pool(reg, spec, eval_per_label);
    const std::size_t need = spec.k_shot + eval_per_label;
    const auto candidates = candidate_labels(reg, spec, target_language);
    const auto feasible = feasible_labels(reg, spec, target_language, need);
    if (feasible.size() < spec.n_new) {
        std::string detail;
        for (const auto& label : candidates)
            if (label_pool(reg, target_language, label).size() < need)
                detail += " " + label + "=" + std::to_string(label_pool(reg, target_language, label).size());
        throw Error("build_target_task: " + target_language + " needs " + std::to_string(need) +
                    " clips per label for K=" + std::to_string(spec.k_shot) + ", short:" + detail);
    }

    TargetTask task;
    task.language = target_language;
    const auto chosen = sample_without_replacement(feasible, spec.n_new, rng);
    task.slots = SlotMap(chosen, spec.n_fixed);
    for (std::size_t slot = 0; slot < spec.n_new; ++slot) {
        const auto picked = sample_without_replacement(label_pool(reg, target_language, chosen[slot]), need, rng);
        for (std::size_t i = 0; i < spec.k_shot; ++i) task.support.push_back({picked[i], slot});
        for (std::size_t i = spec.k_shot; i < need; ++i) task.eval_query.push_back({picked[i], slot});
    }
    for (std::size_t f = 0; f < spec.n_fixed; ++f) {
        const std::size_t slot = spec.n_new + f;
        const auto picked =
            sample_without_replacement(reg.indices(audio::kSharedLanguage, task.slots.label(slot)), eval_per_label, rng);
        for (auto idx : picked) task.eval_query.push_back({idx, slot});
    }
    return task;
}

void write_manifest(std::ostream& out, const DatasetRegistry& reg, const Episode& episode) {
    auto emit = [&](const std::vector<Item>& items, const char* role) {
        for (const auto& item : items) {
            nlohmann::json rec;
            rec["source_id"] = reg.clip(item.clip).source_id;
            rec["role"] = role;
            rec["slot"] = item.slot;
            rec["episode_id"] = episode.id;
            out << rec.dump() << '\n';
        }
    };
    emit(episode.support, "support");
    emit(episode.query, "query");
}

}  // namespace fmaml::episodes
