#include "fmaml/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>

#include "fmaml/audio/corpus.hpp"
#include "fmaml/audio/synth.hpp"
#include "fmaml/core/rng.hpp"
#include "fmaml/harness/report.hpp"

namespace fmaml::harness {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 0x100000001b3ULL;
    return h;
}

constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ULL;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// File name for a clip in the feature cache.
std::string cache_name(const std::string& source_id) {
    std::string out;
    for (char c : source_id) {
        if (c == '/') {
            out += "__";
        } else if (c == '*') {
            out += "shared";
        } else {
            out += c;
        }
    }
    return out + ".f64";
}

// Returns the cached MFCC for `name` or computes and stores it.
template <class Compute>
Tensor cached_mfcc(const std::optional<fs::path>& dir, const std::string& name, Compute compute) {
    if (!dir) return compute();
    const fs::path file = *dir / cache_name(name);
    if (fs::exists(file)) return audio::read_feature_cache(file);
    Tensor m = compute();
    const fs::path tmp = file.string() + ".tmp" + std::to_string(std::hash<std::string>{}(name));
    audio::write_feature_cache(tmp, m);
    fs::rename(tmp, file);
    return m;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

void log_line(const RunOptions& options, const std::string& line) {
    if (options.log) *options.log << line << std::endl;
}

}  // namespace

const CellResult* ExperimentReport::cell(const std::string& variant, std::size_t k) const {
    for (const auto& c : cells)
        if (c.variant == variant && c.k_shot == k) return &c;
    return nullptr;
}

std::string experiment_hash(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["train"] = meta::config_hash(cfg.train);
    j["corpus"] = cfg.corpus;
    j["corpus_seed"] = cfg.synthetic_seed();
    j["fixed_per_class"] = cfg.fixed_per_class;
    j["target_language"] = cfg.target_language;
    j["source_languages"] = cfg.source_languages;
    j["k_shots"] = cfg.k_shots;
    j["variants"] = cfg.variants;
    j["n_way"] = cfg.n_way;
    j["q_new"] = cfg.q_new;
    j["q_fixed"] = cfg.q_fixed;
    j["trials"] = cfg.trials;
    j["eval_per_label"] = cfg.eval_per_label;
    const std::string text = j.dump();
    return hex64(fnv1a(kFnvBasis, text.data(), text.size()));
}

std::vector<audio::FeatureClip> load_corpus(const ExperimentConfig& cfg, const std::optional<fs::path>& cache_dir) {
    using audio::FeatureClip;
    std::vector<FeatureClip> clips;
    std::optional<fs::path> dir;
    if (cfg.corpus == "synthetic") {
        const auto spec = audio::standard_corpus_spec(cfg.synthetic_seed());
        if (cache_dir) dir = *cache_dir / ("synthetic-" + hex64(cfg.synthetic_seed()));
        if (dir) fs::create_directories(*dir);
        struct Job {
            std::size_t l, e, i;
            bool fixed;
        };
        std::vector<Job> jobs;
        for (std::size_t l = 0; l < spec.languages.size(); ++l)
            for (std::size_t e = 0; e < spec.emotions.size(); ++e)
                for (std::size_t i = 0; i < spec.counts[l][e]; ++i) jobs.push_back({l, e, i, false});
        for (std::size_t f = 0; f < audio::kFixedLabels.size(); ++f)
            for (std::size_t i = 0; i < cfg.fixed_per_class; ++i) jobs.push_back({0, f, i, true});
        clips.resize(jobs.size());
        meta::parallel_for(jobs.size(), cfg.train.jobs, [&](std::size_t n) {
            const Job& job = jobs[n];
            FeatureClip& c = clips[n];
            if (job.fixed) {
                c.emotion = audio::kFixedLabels[job.e];
                c.language = audio::kSharedLanguage;
                c.source_id = audio::clip_id(c.language, c.emotion, job.i);
                c.mfcc = cached_mfcc(dir, c.source_id, [&] {
                    return audio::mfcc(audio::fixed_waveform(c.emotion, job.i, spec.seed));
                });
            } else {
                c.emotion = spec.emotions[job.e];
                c.language = spec.languages[job.l];
                c.source_id = audio::clip_id(c.language, c.emotion, job.i);
                c.mfcc = cached_mfcc(dir, c.source_id,
                                     [&] { return audio::mfcc(audio::corpus_waveform(spec, job.l, job.e, job.i)); });
            }
        });
        return clips;
    }

    const auto entries = audio::list_corpus_directory(cfg.corpus);
    if (cache_dir) {
        const std::string root = fs::weakly_canonical(cfg.corpus).string();
        dir = *cache_dir / ("dir-" + hex64(fnv1a(kFnvBasis, root.data(), root.size())));
        fs::create_directories(*dir);
    }
    clips.resize(entries.size());
    meta::parallel_for(entries.size(), cfg.train.jobs, [&](std::size_t n) {
        const auto& e = entries[n];
        clips[n] = {cached_mfcc(dir, e.source_id, [&] { return audio::load_corpus_clip(e).mfcc; }), e.emotion,
                    e.language, e.source_id};
    });
    return clips;
}

std::string corpus_fingerprint(const std::vector<audio::FeatureClip>& clips) {
    std::uint64_t h = kFnvBasis;
    for (const auto& c : clips) {
        for (const std::string* s : {&c.source_id, &c.language, &c.emotion}) h = fnv1a(h, s->data(), s->size() + 1);
        const std::uint64_t dims[2] = {c.mfcc.dim(0), c.mfcc.dim(1)};
        h = fnv1a(h, dims, sizeof dims);
        h = fnv1a(h, c.mfcc.data().data(), c.mfcc.size() * sizeof(double));
    }
    return hex64(h);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    cfg.validate();
    ExperimentReport report;
    report.started = utc_now();
    report.seed = cfg.train.seed;
    report.config_hash = experiment_hash(cfg);
    report.corpus = cfg.corpus;
    report.profile = cfg.profile;
    report.target_language = cfg.target_language;
    report.meta_iters = cfg.train.meta_iters;
    report.trials = cfg.trials;
    report.eval_per_label = cfg.eval_per_label;
    report.k_shots = cfg.k_shots;
    report.variants = cfg.variants;

    log_line(options, "loading corpus " + cfg.corpus);
    auto clips = load_corpus(cfg, options.cache_dir);
    report.corpus_fingerprint = corpus_fingerprint(clips);
    const episodes::DatasetRegistry reg(std::move(clips));
    if (!reg.has_language(cfg.target_language))
        throw Error("target language '" + cfg.target_language + "' is not in the corpus");

    std::vector<std::string> sources = cfg.source_languages.empty() ? reg.languages() : cfg.source_languages;
    if (const auto it = std::find(sources.begin(), sources.end(), cfg.target_language); it != sources.end()) {
        sources.erase(it);
        if (!cfg.source_languages.empty())
            report.notes.push_back("target language '" + cfg.target_language +
                                   "' removed from source_languages; it is never seen during meta-training");
    }
    for (const auto& s : sources)
        if (!reg.has_language(s)) throw Error("source language '" + s + "' is not in the corpus");
    if (sources.empty()) throw Error("no source languages left after excluding the target");
    report.source_languages = sources;

    const meta::InputStore eval_store(reg, cfg.train.features);
    if (options.write_outputs) fs::create_directories(cfg.output_dir);

    for (const auto& variant : cfg.variants)
        for (const std::size_t k : cfg.k_shots) {
            CellResult cell;
            cell.variant = variant;
            cell.k_shot = k;
            const auto start = std::chrono::steady_clock::now();
            meta::TrainConfig t = cfg.train;
            t.seed = derive_seed(cfg.train.seed, "cell/" + variant, k);
            const episodes::EpisodeSpec fixed_spec{cfg.n_way, audio::kFixedLabels.size(), k, cfg.q_new, cfg.q_fixed};
            const episodes::EpisodeSpec flat_spec{cfg.n_way + audio::kFixedLabels.size(), 0, k, cfg.q_new, 0};
            const std::string tag = variant + " K=" + std::to_string(k);
            try {
                meta::ProtocolResult result;
                if (variant == "supervised") {
                    log_line(options, "[" + tag + "] supervised training, " + std::to_string(cfg.trials) + " trials");
                    const ModelConfig model = meta::resolve_model(t, eval_store, flat_spec.ways());
                    result = meta::run_protocol(eval_store, flat_spec, cfg.target_language, t, cfg.trials,
                                                cfg.eval_per_label, model, nullptr);
                } else {
                    t.variant = meta::parse_variant(variant);
                    const auto& spec = t.variant == meta::Variant::fmaml ? fixed_spec : flat_spec;
                    // A fresh store, so every clip meta-training touches is read through the registry audit.
                    const meta::InputStore train_store(reg, t.features);
                    const std::size_t before = reg.access_count(cfg.target_language);
                    log_line(options, "[" + tag + "] meta-training " + std::to_string(t.meta_iters) + " iterations");
                    const auto trained = meta::meta_train(
                        train_store, spec, sources, t, [&](std::size_t iter, const std::vector<episodes::Episode>&) {
                            if (iter > 0 && iter % 50 == 0)
                                log_line(options, "[" + tag + "]   iteration " + std::to_string(iter));
                        });
                    const std::size_t reads = reg.access_count(cfg.target_language) - before;
                    report.target_reads_during_meta_train += reads;
                    if (reads != 0)
                        throw Error("meta-training read " + std::to_string(reads) + " target-language clips");
                    auto& trace = report.traces[variant][k];
                    for (const auto& e : trained.trace) trace.push_back({e.meta_loss, e.query_accuracy});
                    if (options.write_outputs)
                        meta::save_checkpoint(cfg.output_dir / ("checkpoint_" + variant + "_k" + std::to_string(k) + ".bin"),
                                              {trained.theta, meta::config_hash(t), t.seed});
                    log_line(options, "[" + tag + "] fine-tuning and evaluating " + std::to_string(cfg.trials) + " trials");
                    result = meta::run_protocol(eval_store, spec, cfg.target_language, t, cfg.trials,
                                                cfg.eval_per_label, trained.model, &trained.theta);
                }
                cell.ok = true;
                cell.mean = result.mean;
                cell.std = result.std;
                cell.trials = result.accuracies;
                log_line(options, "[" + tag + "] accuracy " + format_percent(cell.mean));
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
                log_line(options, "[" + tag + "] failed: " + cell.error);
            }
            cell.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            report.cells.push_back(std::move(cell));
        }
    report.finished = utc_now();

    if (options.write_outputs) {
        write_report(cfg.output_dir / "report.json", report);
        write_text(cfg.output_dir / "tables.csv", emit_csv_table(report));
        write_text(cfg.output_dir / "tables.txt", emit_text_table(report));
        for (const auto& [variant, by_k] : report.traces) {
            for (const auto& [k, trace] : by_k)
                write_text(cfg.output_dir / ("trace_" + variant + "_k" + std::to_string(k) + ".csv"),
                           emit_trace_csv(trace));
            // The first configured K that has a trace is the variant's headline trace.
            for (const std::size_t k : cfg.k_shots)
                if (by_k.count(k)) {
                    write_text(cfg.output_dir / ("trace_" + variant + ".csv"), emit_trace_csv(by_k.at(k)));
                    break;
                }
        }
    }
    return report;
}

}  // namespace fmaml::harness
