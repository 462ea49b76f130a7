#include "fmaml/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace fmaml::harness {

namespace {

struct Scalar {
    std::string text;
    bool quoted = false;
};

struct Value {
    bool is_list = false;
    std::vector<Scalar> items;  // one item when not a list
    std::size_t line = 0;
};

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
    throw Error("config line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Reads one scalar starting at `pos`; stops at ',' or ']' when inside a list.
Scalar read_scalar(const std::string& s, std::size_t& pos, bool in_list, std::size_t line) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    Scalar out;
    if (pos < s.size() && s[pos] == '"') {
        out.quoted = true;
        ++pos;
        while (pos < s.size() && s[pos] != '"') {
            if (s[pos] == '\\' && pos + 1 < s.size()) ++pos;
            out.text += s[pos++];
        }
        if (pos >= s.size()) fail(line, "unterminated string");
        ++pos;
    } else {
        while (pos < s.size() && s[pos] != ' ' && s[pos] != '\t' && (!in_list || (s[pos] != ',' && s[pos] != ']'))) {
            if (s[pos] == '[' || s[pos] == ']' || s[pos] == ',' || s[pos] == '"')
                fail(line, std::string("unexpected '") + s[pos] + "'");
            out.text += s[pos++];
        }
        if (out.text.empty()) fail(line, "missing value");
    }
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    return out;
}

Value parse_value(const std::string& s, std::size_t line) {
    Value v;
    v.line = line;
    std::size_t pos = 0;
    if (!s.empty() && s[0] == '[') {
        v.is_list = true;
        pos = 1;
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
        if (pos < s.size() && s[pos] == ']') {
            ++pos;
        } else {
            for (;;) {
                v.items.push_back(read_scalar(s, pos, true, line));
                if (pos >= s.size()) fail(line, "unterminated list");
                if (s[pos] == ']') {
                    ++pos;
                    break;
                }
                if (s[pos] != ',') fail(line, "expected ',' or ']' in list");
                ++pos;
            }
        }
    } else {
        v.items.push_back(read_scalar(s, pos, false, line));
    }
    if (pos != s.size()) fail(line, "unexpected text after value: '" + s.substr(pos) + "'");
    return v;
}

// Strips a '#' comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && quoted) {
            ++i;
        } else if (s[i] == '"') {
            quoted = !quoted;
        } else if (s[i] == '#' && !quoted) {
            return s.substr(0, i);
        }
    }
    return s;
}

const Scalar& single(const std::string& key, const Value& v) {
    if (v.is_list) fail(v.line, "'" + key + "' expects a single value, not a list");
    return v.items.front();
}

std::uint64_t to_uint(const std::string& key, const Scalar& s, std::size_t line) {
    std::uint64_t out = 0;
    const auto* end = s.text.data() + s.text.size();
    const auto r = std::from_chars(s.text.data(), end, out);
    if (s.quoted || r.ec != std::errc() || r.ptr != end)
        fail(line, "'" + key + "' expects a non-negative integer, got '" + s.text + "'");
    return out;
}

double to_real(const std::string& key, const Scalar& s, std::size_t line) {
    double out = 0.0;
    const auto* end = s.text.data() + s.text.size();
    const auto r = std::from_chars(s.text.data(), end, out);
    if (s.quoted || r.ec != std::errc() || r.ptr != end || !std::isfinite(out))
        fail(line, "'" + key + "' expects a number, got '" + s.text + "'");
    return out;
}

bool to_bool(const std::string& key, const Scalar& s, std::size_t line) {
    if (!s.quoted && s.text == "true") return true;
    if (!s.quoted && s.text == "false") return false;
    fail(line, "'" + key + "' expects true or false, got '" + s.text + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const Value&)>;

Setter count(std::size_t ExperimentConfig::*field) {
    return [field](ExperimentConfig& c, const std::string& k, const Value& v) {
        c.*field = to_uint(k, single(k, v), v.line);
    };
}

template <class F>
Setter train(F apply) {
    return [apply](ExperimentConfig& c, const std::string& k, const Value& v) { apply(c.train, k, v); };
}

Setter train_count(std::size_t meta::TrainConfig::*field) {
    return train([field](meta::TrainConfig& t, const std::string& k, const Value& v) {
        t.*field = to_uint(k, single(k, v), v.line);
    });
}

Setter train_real(double meta::TrainConfig::*field) {
    return train([field](meta::TrainConfig& t, const std::string& k, const Value& v) {
        t.*field = to_real(k, single(k, v), v.line);
    });
}

Setter model_count(std::size_t ModelConfig::*field) {
    return train([field](meta::TrainConfig& t, const std::string& k, const Value& v) {
        t.model.*field = to_uint(k, single(k, v), v.line);
    });
}

Setter feature_count(std::size_t audio::FeatureConfig::*field) {
    return train([field](meta::TrainConfig& t, const std::string& k, const Value& v) {
        t.features.*field = to_uint(k, single(k, v), v.line);
    });
}

std::vector<std::string> string_list(const std::string&, const Value& v) {
    std::vector<std::string> out;
    if (!v.is_list) {
        out.push_back(v.items.front().text);
        return out;
    }
    for (const auto& s : v.items) out.push_back(s.text);
    return out;
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table{
        {"corpus", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.corpus = single(k, v).text; }},
        {"corpus_seed",
         [](ExperimentConfig& c, const std::string& k, const Value& v) { c.corpus_seed = to_uint(k, single(k, v), v.line); }},
        {"fixed_per_class", count(&ExperimentConfig::fixed_per_class)},
        {"target_language",
         [](ExperimentConfig& c, const std::string& k, const Value& v) { c.target_language = single(k, v).text; }},
        {"source_languages",
         [](ExperimentConfig& c, const std::string& k, const Value& v) { c.source_languages = string_list(k, v); }},
        {"k_shots",
         [](ExperimentConfig& c, const std::string& k, const Value& v) {
             c.k_shots.clear();
             for (const auto& s : v.items) c.k_shots.push_back(to_uint(k, s, v.line));
         }},
        {"variants", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.variants = string_list(k, v); }},
        {"n_way", count(&ExperimentConfig::n_way)},
        {"q_new", count(&ExperimentConfig::q_new)},
        {"q_fixed", count(&ExperimentConfig::q_fixed)},
        {"trials", count(&ExperimentConfig::trials)},
        {"eval_per_label", count(&ExperimentConfig::eval_per_label)},
        {"output_dir", [](ExperimentConfig& c, const std::string& k, const Value& v) { c.output_dir = single(k, v).text; }},
        {"alpha", train_real(&meta::TrainConfig::alpha)},
        {"beta", train_real(&meta::TrainConfig::beta)},
        {"meta_batch", train_count(&meta::TrainConfig::meta_batch)},
        {"inner_steps", train_count(&meta::TrainConfig::inner_steps)},
        {"meta_iters", train_count(&meta::TrainConfig::meta_iters)},
        {"finetune_iters", train([](meta::TrainConfig& t, const std::string& k, const Value& v) {
             t.finetune_iters = to_uint(k, single(k, v), v.line);
         })},
        {"grad_mode", train([](meta::TrainConfig& t, const std::string& k, const Value& v) {
             try {
                 t.grad_mode = meta::parse_grad_order(single(k, v).text);
             } catch (const Error& e) {
                 fail(v.line, e.what());
             }
         })},
        {"seed", train([](meta::TrainConfig& t, const std::string& k, const Value& v) {
             t.seed = to_uint(k, single(k, v), v.line);
         })},
        {"freeze_fixed", train([](meta::TrainConfig& t, const std::string& k, const Value& v) {
             t.freeze_fixed = to_bool(k, single(k, v), v.line);
         })},
        {"supervised_epochs", train_count(&meta::TrainConfig::supervised_epochs)},
        {"jobs", train_count(&meta::TrainConfig::jobs)},
        {"blocks", model_count(&ModelConfig::blocks)},
        {"filters", model_count(&ModelConfig::filters)},
        {"pooled", model_count(&ModelConfig::pooled)},
        {"bn_eps", train([](meta::TrainConfig& t, const std::string& k, const Value& v) {
             t.model.bn_eps = to_real(k, single(k, v), v.line);
         })},
        {"fixed_frames", feature_count(&audio::FeatureConfig::fixed_frames)},
        {"time_pool", feature_count(&audio::FeatureConfig::time_pool)},
        {"cepstral_mean_norm", train([](meta::TrainConfig& t, const std::string& k, const Value& v) {
             t.features.cepstral_mean_norm = to_bool(k, single(k, v), v.line);
         })},
    };
    return table;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (corpus.empty()) throw Error("config: corpus is required");
    if (target_language.empty()) throw Error("config: target_language is required");
    if (k_shots.empty()) throw Error("config: k_shots must list at least one K");
    for (auto k : k_shots)
        if (k == 0) throw Error("config: k_shots entries must be positive");
    if (std::set<std::size_t>(k_shots.begin(), k_shots.end()).size() != k_shots.size())
        throw Error("config: k_shots has duplicates");
    if (variants.empty()) throw Error("config: variants must list at least one variant");
    for (const auto& v : variants)
        if (v != "supervised" && v != "maml" && v != "fmaml")
            throw Error("config: unknown variant '" + v + "' (expected supervised, maml or fmaml)");
    if (std::set<std::string>(variants.begin(), variants.end()).size() != variants.size())
        throw Error("config: variants has duplicates");
    if (n_way == 0) throw Error("config: n_way must be positive");
    if (q_new == 0) throw Error("config: q_new must be positive");
    if (trials == 0) throw Error("config: trials must be positive");
    if (eval_per_label == 0) throw Error("config: eval_per_label must be positive");
    train.validate();
}

const std::vector<std::string>& profile_names() {
    static const std::vector<std::string> names{"paper", "smoke"};
    return names;
}

void apply_profile(ExperimentConfig& cfg, const std::string& name) {
    meta::TrainConfig& t = cfg.train;
    if (name == "paper") {
        t.meta_iters = 2000;
        t.meta_batch = 16;
        t.beta = 0.001;
        t.model.blocks = 4;
        t.model.filters = 64;
        t.model.pooled = 3;
        t.features.fixed_frames = 300;
        t.features.time_pool = 1;
        cfg.trials = 100;
        cfg.eval_per_label = 25;
    } else if (name == "smoke") {
        t.meta_iters = 300;
        t.meta_batch = 4;
        t.beta = 0.06;
        t.model.blocks = 3;
        t.model.filters = 8;
        t.model.pooled = 3;
        t.features.fixed_frames = 300;
        t.features.time_pool = 20;
        cfg.trials = 20;
        cfg.eval_per_label = 25;
    } else {
        throw Error("unknown profile '" + name + "' (expected paper or smoke)");
    }
    cfg.profile = name;
}

ExperimentConfig parse_config_text(const std::string& text, const std::optional<std::string>& profile_override) {
    std::vector<std::pair<std::string, Value>> entries;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(strip_comment(raw));
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected 'key = value'");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty() || !std::all_of(key.begin(), key.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }))
            fail(line, "bad key '" + key + "'");
        if (key != "profile" && !setters().count(key)) fail(line, "unknown key '" + key + "'");
        if (!seen.insert(key).second) fail(line, "duplicate key '" + key + "'");
        entries.emplace_back(key, parse_value(trim(s.substr(eq + 1)), line));
    }

    ExperimentConfig cfg;
    std::string profile = "paper";
    for (const auto& [key, value] : entries)
        if (key == "profile") profile = single(key, value).text;
    if (profile_override) profile = *profile_override;
    apply_profile(cfg, profile);
    for (const auto& [key, value] : entries)
        if (key != "profile") setters().at(key)(cfg, key, value);
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path, const std::optional<std::string>& profile_override) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), profile_override);
}

}  // namespace fmaml::harness
