// Command-line front end: run experiments, write the synthetic corpus,
// precompute the feature cache and re-render report tables.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "fmaml/audio/corpus.hpp"
#include "fmaml/harness/experiment.hpp"
#include "fmaml/harness/report.hpp"

namespace {

using namespace fmaml;

std::optional<std::filesystem::path> cache_dir_from_env() {
    const char* v = std::getenv(harness::kCacheDirEnv);
    if (!v || !*v) return std::nullopt;
    return std::filesystem::path(v);
}

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
            const std::optional<std::string>& output_dir, const std::optional<std::string>& profile,
            const std::optional<std::size_t>& jobs) {
    harness::ExperimentConfig cfg = harness::parse_config(config_path, profile);
    if (seed) cfg.train.seed = *seed;
    if (output_dir) cfg.output_dir = *output_dir;
    if (jobs) cfg.train.jobs = *jobs;
    cfg.validate();
    harness::RunOptions options;
    options.cache_dir = cache_dir_from_env();
    options.log = &std::cerr;
    const auto report = harness::run_experiment(cfg, options);
    std::cout << harness::emit_text_table(report);
    std::cerr << "wrote " << (cfg.output_dir / "report.json").string() << "\n";
    for (const auto& c : report.cells)
        if (!c.ok) return 2;
    return 0;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed, std::size_t fixed_per_class) {
    const std::size_t n = audio::write_synthetic_corpus(out_dir, audio::standard_corpus_spec(seed), fixed_per_class);
    std::cout << "wrote " << n << " clips to " << out_dir << "\n";
    return 0;
}

int cmd_features(const std::string& corpus, std::uint64_t seed, std::size_t fixed_per_class, std::size_t jobs) {
    const auto cache = cache_dir_from_env();
    if (!cache) throw Error(std::string("set ") + harness::kCacheDirEnv + " to the feature cache directory");
    harness::ExperimentConfig cfg;
    cfg.corpus = corpus;
    cfg.corpus_seed = seed;
    cfg.fixed_per_class = fixed_per_class;
    cfg.train.jobs = jobs;
    const auto clips = harness::load_corpus(cfg, cache);
    std::cout << "cached " << clips.size() << " clips in " << cache->string() << " (fingerprint "
              << harness::corpus_fingerprint(clips) << ")\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& files, const std::optional<std::size_t>& k, bool csv) {
    std::vector<harness::ExperimentReport> reports;
    for (const auto& f : files) reports.push_back(harness::read_report(f));
    if (reports.size() == 1 && !k) {
        std::cout << (csv ? harness::emit_csv_table(reports[0]) : harness::emit_text_table(reports[0]));
        return 0;
    }
    const std::size_t shots = k.value_or(reports.front().k_shots.empty() ? 5 : reports.front().k_shots.front());
    std::cout << harness::emit_language_table(reports, shots);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot speech emotion recognition with fixed-class meta-learning"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir, profile;
    std::optional<std::size_t> jobs;
    auto* run = app.add_subcommand("run", "Run one leave-one-language-out experiment from a config file");
    run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Master seed (overrides the config)");
    run->add_option("--output-dir", output_dir, "Output directory (overrides the config)");
    run->add_option("--profile", profile, "Preset applied before the config keys")
        ->check(CLI::IsMember({"smoke", "paper"}));
    run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    std::string synth_dir;
    std::uint64_t synth_seed = 0;
    std::size_t fixed_per_class = 60;
    auto* synth = app.add_subcommand("synth", "Write the synthetic corpus as WAV files");
    synth->add_option("out_dir", synth_dir, "Output corpus directory")->required();
    synth->add_option("--seed", synth_seed, "Corpus seed");
    synth->add_option("--fixed-per-class", fixed_per_class, "Silence and neutral clips per class");

    std::string corpus;
    std::size_t feature_jobs = 1;
    auto* features = app.add_subcommand(
        "features", std::string("Precompute MFCC features into the cache named by ") + harness::kCacheDirEnv);
    features->add_option("corpus", corpus, "Corpus directory or \"synthetic\"")->required();
    features->add_option("--seed", synth_seed, "Synthetic corpus seed");
    features->add_option("--fixed-per-class", fixed_per_class, "Synthetic silence and neutral clips per class");
    features->add_option("--jobs", feature_jobs, "Worker threads")->check(CLI::PositiveNumber);

    std::vector<std::string> report_files;
    std::optional<std::size_t> report_k;
    bool report_csv = false;
    auto* report = app.add_subcommand("report", "Re-render tables from report.json files");
    report->add_option("reports", report_files, "report.json files; several give one column per language")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("--k", report_k, "Shot count for the per-language table");
    report->add_flag("--csv", report_csv, "CSV instead of text (single report)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config_path, seed, output_dir, profile, jobs);
        if (*synth) return cmd_synth(synth_dir, synth_seed, fixed_per_class);
        if (*features) return cmd_features(corpus, synth_seed, fixed_per_class, feature_jobs);
        if (*report) return cmd_report(report_files, report_k, report_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
