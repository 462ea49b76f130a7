#include "fmaml/audio/corpus.hpp"

#include <algorithm>

namespace fmaml::audio {

namespace fs = std::filesystem;

std::vector<CorpusEntry> list_corpus_directory(const fs::path& root) {
    if (!fs::is_directory(root)) throw Error("corpus directory not found: " + root.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".wav") continue;
        const auto rel = fs::relative(entry.path(), root);
        if (std::distance(rel.begin(), rel.end()) != 3)
            throw Error("corpus file outside the <language>/<emotion>/<clip>.wav layout: " + rel.string());
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<CorpusEntry> out;
    out.reserve(files.size());
    for (const auto& file : files) {
        const auto rel = fs::relative(file, root);
        auto it = rel.begin();
        const std::string language = (it++)->string();
        const std::string emotion = (it++)->string();
        const bool fixed = std::find(kFixedLabels.begin(), kFixedLabels.end(), emotion) != kFixedLabels.end();
        out.push_back({file, fixed ? kSharedLanguage : language, emotion, rel.generic_string()});
    }
    return out;
}

FeatureClip load_corpus_clip(const CorpusEntry& entry, const MfccConfig& cfg) {
    return {mfcc(load_wav(entry.file), cfg), entry.emotion, entry.language, entry.source_id};
}

std::vector<FeatureClip> load_corpus_directory(const fs::path& root, const MfccConfig& cfg) {
    std::vector<FeatureClip> clips;
    for (const auto& entry : list_corpus_directory(root)) clips.push_back(load_corpus_clip(entry, cfg));
    return clips;
}

std::size_t write_synthetic_corpus(const fs::path& root, const CorpusSpec& spec, std::size_t fixed_per_class) {
    spec.validate();
    std::size_t written = 0;
    for (std::size_t l = 0; l < spec.languages.size(); ++l)
        for (std::size_t e = 0; e < spec.emotions.size(); ++e) {
            const fs::path dir = root / spec.languages[l] / spec.emotions[e];
            fs::create_directories(dir);
            for (std::size_t i = 0; i < spec.counts[l][e]; ++i) {
                const auto id = clip_id(spec.languages[l], spec.emotions[e], i);
                save_wav(dir / (id.substr(id.rfind('/') + 1) + ".wav"), corpus_waveform(spec, l, e, i));
                ++written;
            }
        }
    for (const auto& label : kFixedLabels) {
        const fs::path dir = root / "shared" / label;
        fs::create_directories(dir);
        for (std::size_t i = 0; i < fixed_per_class; ++i) {
            const auto id = clip_id(kSharedLanguage, label, i);
            save_wav(dir / (id.substr(id.rfind('/') + 1) + ".wav"), fixed_waveform(label, i, spec.seed));
            ++written;
        }
    }
    return written;
}

}  // namespace fmaml::audio
