#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "fmaml/audio/synth.hpp"
#include "fmaml/core/rng.hpp"
#include "fmaml/harness/config.hpp"
#include "fmaml/harness/experiment.hpp"
#include "fmaml/harness/report.hpp"

using namespace fmaml;
using namespace fmaml::harness;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

// Replaces every value by its JSON type name; arrays keep one element.
nlohmann::ordered_json schema_of(const nlohmann::ordered_json& j) {
    if (j.is_object()) {
        nlohmann::ordered_json out = nlohmann::ordered_json::object();
        for (const auto& [k, v] : j.items()) out[k] = schema_of(v);
        return out;
    }
    if (j.is_array()) {
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        if (!j.empty()) out.push_back(schema_of(j.front()));
        return out;
    }
    if (j.is_number_unsigned() || j.is_number_integer()) return "integer";
    if (j.is_number()) return "number";
    return j.type_name();
}

ExperimentReport sample_report() {
    ExperimentReport r;
    r.seed = 7;
    r.config_hash = "0123456789abcdef";
    r.corpus = "synthetic";
    r.corpus_fingerprint = "fedcba9876543210";
    r.profile = "smoke";
    r.target_language = "english";
    r.source_languages = {"italian", "spanish"};
    r.notes = {"a note"};
    r.meta_iters = 2;
    r.trials = 2;
    r.eval_per_label = 25;
    r.k_shots = {5, 10};
    r.variants = {"maml", "fmaml"};
    r.cells.push_back({"maml", 5, true, 0.6521, 0.01, {0.64, 0.6642}, "", 1.5});
    r.cells.push_back({"maml", 10, false, 0.0, 0.0, {}, "boom", 0.1});
    r.cells.push_back({"fmaml", 5, true, 0.6971, 0.02, {0.68, 0.7142}, "", 2.5});
    r.cells.push_back({"fmaml", 10, true, 0.7371, 0.03, {0.72, 0.7542}, "", 3.5});
    r.traces["maml"][5] = {{1.9, 0.2}, {1.7, 0.3}};
    r.traces["fmaml"][5] = {{1.8, 0.25}, {1.5, 0.4}};
    r.started = "2026-01-01T00:00:00Z";
    r.finished = "2026-01-01T00:01:00Z";
    return r;
}

nlohmann::ordered_json without_timestamps(nlohmann::ordered_json j) {
    j.erase("timestamps");
    return j;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Small synthetic experiment; the feature cache is shared by every case in
// this process so the corpus is synthesized once.
struct RunFixture {
    fs::path root = fs::temp_directory_path() / ("fmaml-harness-" + std::to_string(::getpid()));

    static RunFixture& get() {
        static RunFixture f;
        return f;
    }
    ~RunFixture() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }

    ExperimentConfig config(const std::string& extra = "") const {
        auto cfg = parse_config_text("corpus = synthetic\n"
                                     "target_language = english\n"
                                     "profile = smoke\n"
                                     "fixed_per_class = 30\n"
                                     "k_shots = [5]\n"
                                     "variants = [supervised, fmaml]\n"
                                     "meta_iters = 3\n"
                                     "meta_batch = 2\n"
                                     "inner_steps = 1\n"
                                     "finetune_iters = 2\n"
                                     "supervised_epochs = 3\n"
                                     "trials = 2\n"
                                     "eval_per_label = 5\n"
                                     "seed = 5\n" +
                                     extra);
        return cfg;
    }

    ExperimentReport run(ExperimentConfig cfg, const std::string& out) const {
        cfg.output_dir = root / out;
        RunOptions options;
        options.cache_dir = root / "cache";
        return run_experiment(cfg, options);
    }
};

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("minimal config takes the full-size defaults") {
        const auto cfg = parse_config_text("corpus = synthetic\ntarget_language = english\n");
        CHECK(cfg.train.alpha == 0.1);
        CHECK(cfg.train.beta == 0.001);
        CHECK(cfg.train.meta_batch == 16);
        CHECK(cfg.train.inner_steps == 5);
        CHECK(cfg.trials == 100);
        CHECK(cfg.eval_per_label == 25);
        CHECK(cfg.k_shots == std::vector<std::size_t>{5, 10, 20});
        CHECK(cfg.variants == std::vector<std::string>{"supervised", "maml", "fmaml"});
        CHECK(cfg.profile == "paper");
        CHECK(cfg.train.meta_iters == 2000);
        CHECK(cfg.train.model.blocks == 4);
        CHECK(cfg.train.model.filters == 64);
        CHECK(cfg.train.model.pooled == 3);
        CHECK(cfg.source_languages.empty());
    }

    TEST_CASE("misspelled key is rejected by name") {
        const auto msg = error_of([] { parse_config_text("corpus = synthetic\ntarget_language = english\naplha = 0.2\n"); });
        CHECK(msg.find("aplha") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
    }

    TEST_CASE("required keys") {
        CHECK(error_of([] { parse_config_text("target_language = english\n"); }).find("corpus") != std::string::npos);
        CHECK(error_of([] { parse_config_text("corpus = synthetic\n"); }).find("target_language") != std::string::npos);
    }

    TEST_CASE("type errors and malformed lines") {
        const std::string base = "corpus = synthetic\ntarget_language = english\n";
        CHECK(error_of([&] { parse_config_text(base + "alpha = fast\n"); }).find("'alpha' expects a number") !=
              std::string::npos);
        CHECK(error_of([&] { parse_config_text(base + "trials = -3\n"); }).find("'trials'") != std::string::npos);
        CHECK(error_of([&] { parse_config_text(base + "trials = 2.5\n"); }).find("'trials'") != std::string::npos);
        CHECK(error_of([&] { parse_config_text(base + "freeze_fixed = yes\n"); }).find("true or false") !=
              std::string::npos);
        CHECK(error_of([&] { parse_config_text(base + "alpha = [0.1]\n"); }).find("not a list") != std::string::npos);
        CHECK(error_of([&] { parse_config_text(base + "k_shots = [5, 10\n"); }).find("unterminated") !=
              std::string::npos);
        CHECK(error_of([&] { parse_config_text(base + "just words\n"); }).find("key = value") != std::string::npos);
        CHECK(error_of([&] { parse_config_text(base + "trials = 3\ntrials = 4\n"); }).find("duplicate") !=
              std::string::npos);
        CHECK(error_of([&] { parse_config_text(base + "variants = [maml, reptile]\n"); }).find("reptile") !=
              std::string::npos);
        CHECK(error_of([&] { parse_config_text(base + "profile = huge\n"); }).find("huge") != std::string::npos);
        CHECK(error_of([&] { parse_config_text(base + "grad_mode = third\n"); }).find("line 3") != std::string::npos);
    }

    TEST_CASE("comments, quoting and lists") {
        const auto cfg = parse_config_text(
            "# experiment\n"
            "corpus = \"/data/my corpus # 1\"   # trailing comment\n"
            "target_language = english\n"
            "source_languages = [italian, \"spanish\"]\n"
            "k_shots = [5]\n"
            "variants = [fmaml]\n"
            "alpha = 0.05\n"
            "grad_mode = first_order\n"
            "freeze_fixed = false\n"
            "corpus_seed = 99\n"
            "\n"
            "output_dir = results\n",
            std::nullopt);
        CHECK(cfg.corpus == "/data/my corpus # 1");
        CHECK(cfg.source_languages == std::vector<std::string>{"italian", "spanish"});
        CHECK(cfg.k_shots == std::vector<std::size_t>{5});
        CHECK(cfg.train.alpha == 0.05);
        CHECK(cfg.train.grad_mode == GradOrder::first_order);
        CHECK(cfg.train.freeze_fixed == false);
        CHECK(cfg.synthetic_seed() == 99);
        CHECK(cfg.output_dir == fs::path("results"));
    }

    TEST_CASE("profile applies first and explicit keys win") {
        const std::string text = "corpus = synthetic\ntarget_language = english\nprofile = smoke\nmeta_iters = 7\n";
        const auto smoke = parse_config_text(text);
        CHECK(smoke.profile == "smoke");
        CHECK(smoke.train.meta_iters == 7);
        CHECK(smoke.trials == 20);
        CHECK(smoke.train.model.filters == 8);
        const auto paper = parse_config_text(text, std::string("paper"));
        CHECK(paper.profile == "paper");
        CHECK(paper.train.meta_iters == 7);
        CHECK(paper.trials == 100);
    }

    TEST_CASE("experiment hash ignores output location and threads only") {
        const auto a = parse_config_text("corpus = synthetic\ntarget_language = english\n");
        auto b = a;
        b.output_dir = "elsewhere";
        b.train.jobs = 4;
        CHECK(experiment_hash(a) == experiment_hash(b));
        b.train.alpha = 0.2;
        CHECK(experiment_hash(a) != experiment_hash(b));
        auto c = a;
        c.trials = 99;
        CHECK(experiment_hash(a) != experiment_hash(c));
        auto d = a;
        d.target_language = "italian";
        CHECK(experiment_hash(a) != experiment_hash(d));
    }
}

TEST_SUITE("report") {
    TEST_CASE("percent formatting") {
        CHECK(format_percent(0.6971) == "69.71%");
        CHECK(format_percent(1.0) == "100.00%");
        CHECK(format_percent(0.0) == "0.00%");
        CHECK(format_percent(std::nullopt) == "—");
    }

    TEST_CASE("text table renders failed cells as a dash") {
        const auto text = emit_text_table(sample_report());
        CHECK(text.find("F-MAML      69.71%      73.71%") != std::string::npos);
        CHECK(text.find("MAML        65.21%      —") != std::string::npos);
        CHECK(text.find("boom") != std::string::npos);
    }

    TEST_CASE("CSV round-trips the numeric content") {
        Rng rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int rep = 0; rep < 50; ++rep) {
            ExperimentReport r;
            r.k_shots = {1, 5, 20};
            r.variants = {"supervised", "maml", "fmaml"};
            for (const auto& v : r.variants)
                for (auto k : r.k_shots) r.cells.push_back({v, k, u(rng) > 0.2, u(rng), 0.0, {}, "x", 0.0});
            const auto t = parse_csv_table(emit_csv_table(r));
            REQUIRE(t.k_shots == r.k_shots);
            REQUIRE(t.rows.size() == r.variants.size());
            for (std::size_t i = 0; i < r.variants.size(); ++i) {
                CHECK(t.rows[i].first == r.variants[i]);
                for (std::size_t j = 0; j < r.k_shots.size(); ++j) {
                    const CellResult* c = r.cell(r.variants[i], r.k_shots[j]);
                    if (c->ok) {
                        REQUIRE(t.rows[i].second[j].has_value());
                        CHECK(*t.rows[i].second[j] == c->mean);
                    } else {
                        CHECK_FALSE(t.rows[i].second[j].has_value());
                    }
                }
            }
        }
    }

    TEST_CASE("CSV parser rejects malformed tables") {
        CHECK_THROWS_AS(parse_csv_table(""), Error);
        CHECK_THROWS_AS(parse_csv_table("method,K=5\n"), Error);
        CHECK_THROWS_AS(parse_csv_table("variant,5\n"), Error);
        CHECK_THROWS_AS(parse_csv_table("variant,K=5\nmaml,0.5,0.6\n"), Error);
        CHECK_THROWS_AS(parse_csv_table("variant,K=5\nmaml,0.5x\n"), Error);
    }

    TEST_CASE("JSON round trip") {
        const auto r = sample_report();
        const auto j = report_to_json(r);
        const auto back = report_from_json(nlohmann::json::parse(j.dump()));
        CHECK(report_to_json(back) == j);
        CHECK(back.cell("fmaml", 10)->wall_seconds == 3.5);
        CHECK(back.traces.at("fmaml").at(5).size() == 2);
        CHECK_THROWS_AS(report_from_json(nlohmann::json::parse("{\"format\": \"other\"}")), Error);
        CHECK_THROWS_AS(report_from_json(nlohmann::json::parse("{\"format\": \"fmaml-report-1\"}")), Error);
    }

    TEST_CASE("JSON schema matches the golden file") {
        const auto golden = nlohmann::ordered_json::parse(read_file(fs::path(FMAML_GOLDEN_DIR) / "report_schema.json"));
        CHECK(schema_of(report_to_json(sample_report())).dump(2) == golden.dump(2));
    }

    TEST_CASE("wall-clock data only under timestamps") {
        auto a = sample_report();
        auto b = a;
        b.started = "other";
        b.finished = "other";
        for (auto& c : b.cells) c.wall_seconds += 10.0;
        CHECK(report_to_json(a) != report_to_json(b));
        CHECK(without_timestamps(report_to_json(a)) == without_timestamps(report_to_json(b)));
    }

    TEST_CASE("language table has one column per report") {
        auto a = sample_report();
        auto b = sample_report();
        b.target_language = "italian";
        b.cells[2].mean = 0.5;
        const auto t = emit_language_table({a, b}, 5);
        CHECK(t.find("english     italian") != std::string::npos);
        CHECK(t.find("F-MAML      69.71%      50.00%") != std::string::npos);
        CHECK(emit_language_table({a}, 20).find("—") != std::string::npos);
    }

    TEST_CASE("trace CSV columns") {
        const auto csv = emit_trace_csv({{1.5, 0.25}, {1.25, 0.5}});
        CHECK(csv == "iter,meta_loss,query_acc\n0,1.5,0.25\n1,1.25,0.5\n");
    }
}

TEST_SUITE("experiment") {
    TEST_CASE("single K gives a single row and every output file") {
        auto& f = RunFixture::get();
        const auto cfg = f.config();
        const auto r = f.run(cfg, "single");
        REQUIRE(r.cells.size() == 2);
        for (const auto& c : r.cells) {
            INFO(c.error);
            CHECK(c.ok);
            CHECK(c.k_shot == 5);
            CHECK(c.trials.size() == 2);
        }
        CHECK(r.target_reads_during_meta_train == 0);
        CHECK(r.source_languages == std::vector<std::string>{"italian", "spanish"});
        CHECK(r.notes.empty());
        CHECK(r.traces.at("fmaml").at(5).size() == 3);
        CHECK_FALSE(r.traces.count("supervised"));
        const auto t = parse_csv_table(read_file(f.root / "single" / "tables.csv"));
        CHECK(t.k_shots == std::vector<std::size_t>{5});
        CHECK(t.rows.size() == 2);
        for (const char* name : {"report.json", "tables.txt", "trace_fmaml.csv", "trace_fmaml_k5.csv",
                                 "checkpoint_fmaml_k5.bin"})
            CHECK(fs::exists(f.root / "single" / name));
        CHECK(read_report(f.root / "single" / "report.json").cells.size() == 2);
        const auto ckpt = meta::load_checkpoint(f.root / "single" / "checkpoint_fmaml_k5.bin");
        CHECK(ckpt.seed == derive_seed(5, "cell/fmaml", 5));
    }

    TEST_CASE("target listed among sources is excluded and noted") {
        auto& f = RunFixture::get();
        auto cfg = f.config("source_languages = [english, spanish]\n");
        cfg.variants = {"maml"};
        const auto r = f.run(cfg, "excluded");
        CHECK(r.source_languages == std::vector<std::string>{"spanish"});
        REQUIRE(r.notes.size() == 1);
        CHECK(r.notes[0].find("english") != std::string::npos);
        CHECK(r.target_reads_during_meta_train == 0);
        CHECK(r.cells.at(0).ok);
    }

    TEST_CASE("a failing cell is recorded and the others still run") {
        auto& f = RunFixture::get();
        // English has 50 clips of its smallest emotion, too few for 80 shots.
        auto cfg = f.config();
        cfg.variants = {"supervised"};
        cfg.k_shots = {80, 5};
        const auto r = f.run(cfg, "failing");
        REQUIRE(r.cells.size() == 2);
        CHECK_FALSE(r.cells[0].ok);
        CHECK_FALSE(r.cells[0].error.empty());
        CHECK(r.cells[1].ok);
        const auto text = read_file(f.root / "failing" / "tables.txt");
        CHECK(text.find("—") != std::string::npos);
    }

    TEST_CASE("unknown languages are errors") {
        auto& f = RunFixture::get();
        auto cfg = f.config();
        cfg.target_language = "klingon";
        CHECK_THROWS_AS(f.run(cfg, "bad"), Error);
        cfg = f.config("source_languages = [english]\n");
        CHECK(error_of([&] { f.run(cfg, "bad"); }).find("no source languages") != std::string::npos);
    }

    TEST_CASE("same config and seed give identical reports and checkpoints") {
        auto& f = RunFixture::get();
        auto cfg = f.config();
        const auto a = f.run(cfg, "det-a");
        cfg.train.jobs = 2;
        const auto b = f.run(cfg, "det-b");
        CHECK(without_timestamps(report_to_json(a)).dump() == without_timestamps(report_to_json(b)).dump());
        CHECK(read_file(f.root / "det-a" / "checkpoint_fmaml_k5.bin") ==
              read_file(f.root / "det-b" / "checkpoint_fmaml_k5.bin"));
        cfg.train.seed = 6;
        const auto c = f.run(cfg, "det-c");
        CHECK(report_to_json(c)["results"] != report_to_json(a)["results"]);
    }

    TEST_CASE("cached and fresh features agree") {
        auto& f = RunFixture::get();
        const auto cfg = f.config();
        const auto cached = load_corpus(cfg, f.root / "cache");
        const auto fresh = load_corpus(cfg, std::nullopt);
        CHECK(corpus_fingerprint(cached) == corpus_fingerprint(fresh));
        CHECK(cached.size() == audio::standard_corpus_spec(cfg.synthetic_seed()).total() + 60);
    }
}
