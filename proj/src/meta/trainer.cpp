#include "fmaml/meta/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include "fmaml/core/loss.hpp"
#include "fmaml/core/rng.hpp"
#include "json.hpp"

namespace fmaml::meta {

std::string to_string(Variant v) { return v == Variant::maml ? "maml" : "fmaml"; }

Variant parse_variant(const std::string& name) {
    if (name == "maml") return Variant::maml;
    if (name == "fmaml") return Variant::fmaml;
    throw Error("unknown variant '" + name + "' (expected maml or fmaml)");
}

std::string to_string(GradOrder order) {
    return order == GradOrder::first_order ? "first_order" : "second_order";
}

GradOrder parse_grad_order(const std::string& name) {
    if (name == "first_order") return GradOrder::first_order;
    if (name == "second_order") return GradOrder::second_order;
    throw Error("unknown grad_mode '" + name + "' (expected first_order or second_order)");
}

void TrainConfig::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("TrainConfig: alpha must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("TrainConfig: beta must be positive");
    if (meta_batch == 0) throw Error("TrainConfig: meta_batch must be at least 1");
    if (jobs == 0) throw Error("TrainConfig: jobs must be at least 1");
    if (features.time_pool == 0 || features.input_width() == 0)
        throw Error("TrainConfig: time_pool must be in [1, fixed_frames]");
}

std::string config_hash(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
    j["meta_batch"] = cfg.meta_batch;
    j["inner_steps"] = cfg.inner_steps;
    j["meta_iters"] = cfg.meta_iters;
    j["finetune_iters"] = cfg.finetune_steps();
    j["grad_mode"] = to_string(cfg.grad_mode);
    j["variant"] = to_string(cfg.variant);
    j["seed"] = cfg.seed;
    j["freeze_fixed"] = cfg.freezes_fixed();
    j["supervised_epochs"] = cfg.supervised_epochs;
    j["blocks"] = cfg.model.blocks;
    j["filters"] = cfg.model.filters;
    j["pooled"] = cfg.model.pooled;
    j["bn_eps"] = cfg.model.bn_eps;
    j["cmn"] = cfg.features.cepstral_mean_norm;
    j["fixed_frames"] = cfg.features.fixed_frames;
    j["time_pool"] = cfg.features.time_pool;
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

InputStore::InputStore(const DatasetRegistry& reg, audio::FeatureConfig cfg)
    : reg_(reg),
      cfg_(cfg),
      once_(std::make_unique<std::once_flag[]>(reg.size())),
      cache_(reg.size()) {
    if (cfg_.time_pool == 0 || cfg_.input_width() == 0) throw Error("InputStore: empty model input width");
    height_ = reg.feature_rows();
    width_ = cfg_.input_width();
}

const Tensor& InputStore::input(std::size_t clip) const {
    if (clip >= cache_.size()) throw Error("InputStore: clip index out of range");
    std::call_once(once_[clip], [&] {
        Tensor x = audio::model_input(reg_.clip(clip), cfg_);
        cache_[clip] = x.reshaped({1, x.dim(0), x.dim(1)});
    });
    return cache_[clip];
}

LabeledBatch make_batch(const InputStore& store, const std::vector<Item>& items, std::size_t ways) {
    if (items.empty()) throw Error("make_batch: no items");
    const Shape s = store.input(items.front().clip).shape();
    const std::size_t per = s[0] * s[1] * s[2];
    Tensor inputs = Tensor::uninitialized({items.size(), 1, s[1], s[2]});
    std::vector<std::size_t> slots;
    slots.reserve(items.size());
    auto dst = inputs.data();
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Tensor& x = store.input(items[i].clip);
        if (x.shape() != s) throw ShapeError("make_batch: clips of different input shapes");
        if (items[i].slot >= ways) throw Error("make_batch: slot outside the output layer");
        std::copy(x.data().begin(), x.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(i * per));
        slots.push_back(items[i].slot);
    }
    return {std::move(inputs), one_hot(slots, ways)};
}

ModelConfig resolve_model(const TrainConfig& cfg, const InputStore& store, std::size_t ways) {
    ModelConfig m = cfg.model;
    m.in_height = store.height();
    m.in_width = store.width();
    m.outputs = ways;
    m.validate();
    return m;
}

ParamSet inner_adapt(const ModelConfig& model, const ParamSet& theta, const LabeledBatch& support, double alpha,
                     std::size_t steps) {
    if (support.size() == 0) throw Error("inner_adapt: empty support set");
    return adapt(model, theta, support, alpha, steps);
}

namespace {

double accuracy_of(const Tensor& logits, const Tensor& targets) {
    const auto pred = argmax_rows(logits);
    const auto truth = argmax_rows(targets);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

MetaStep meta_step(const ModelConfig& model, const ParamSet& theta, const std::vector<TaskBatch>& tasks,
                   const TrainConfig& cfg) {
    if (tasks.empty()) throw Error("meta_step: empty task batch");
    std::vector<MetaGradient> results(tasks.size());
    parallel_for(tasks.size(), cfg.jobs, [&](std::size_t i) {
        try {
            results[i] = meta_gradient_detailed(model, theta, tasks[i].support, tasks[i].query, cfg.alpha,
                                                cfg.inner_steps, cfg.grad_mode);
        } catch (const NonFiniteError& e) {
            throw NonFiniteError("task " + std::to_string(tasks[i].id) + ": " + e.what());
        }
    });

    std::vector<std::size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tasks[a].id < tasks[b].id; });

    GradMap sum = results[order[0]].grad;
    double loss = results[order[0]].query_loss;
    double acc = accuracy_of(results[order[0]].query_logits, tasks[order[0]].query.targets);
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& r = results[order[k]];
        sum = accumulate(sum, r.grad);
        loss += r.query_loss;
        acc += accuracy_of(r.query_logits, tasks[order[k]].query.targets);
    }
    const double n = static_cast<double>(tasks.size());
    MetaStep out;
    out.theta = sgd_step(theta, scaled(sum, 1.0 / n), cfg.beta);
    out.meta_loss = loss / n;
    out.query_accuracy = acc / n;
    return out;
}

MetaStep meta_step(const ModelConfig& model, const ParamSet& theta, const std::vector<Episode>& tasks,
                   const InputStore& store, const TrainConfig& cfg) {
    std::vector<TaskBatch> batches;
    batches.reserve(tasks.size());
    for (const auto& ep : tasks)
        batches.push_back({ep.id, make_batch(store, ep.support, ep.slots.size()),
                           make_batch(store, ep.query, ep.slots.size())});
    return meta_step(model, theta, batches, cfg);
}

TrainedModel meta_train(const InputStore& store, const EpisodeSpec& spec,
                        const std::vector<std::string>& source_languages, const TrainConfig& cfg,
                        const EpisodeObserver& observer) {
    cfg.validate();
    spec.validate();
    if (cfg.variant == Variant::fmaml && spec.n_fixed == 0)
        throw Error("meta_train: fmaml needs at least one fixed class");
    if (cfg.variant == Variant::maml && spec.n_fixed != 0)
        throw Error("meta_train: maml treats every class as new; n_fixed must be 0");
    if (source_languages.empty()) throw Error("meta_train: no source languages");

    TrainedModel out;
    out.model = resolve_model(cfg, store, spec.ways());
    out.theta = init_params(out.model, derive_seed(cfg.seed, "init"));
    out.trace.reserve(cfg.meta_iters);
    for (std::size_t iter = 0; iter < cfg.meta_iters; ++iter) {
        const auto start = std::chrono::steady_clock::now();
        std::vector<Episode> tasks;
        tasks.reserve(cfg.meta_batch);
        for (std::size_t t = 0; t < cfg.meta_batch; ++t) {
            const std::uint64_t id = iter * cfg.meta_batch + t;
            Rng rng(derive_seed(cfg.seed, "meta-task", id));
            tasks.push_back(episodes::sample_meta_task(store.registry(), spec, source_languages, rng, id));
        }
        if (observer) observer(iter, tasks);
        MetaStep step;
        try {
            step = meta_step(out.model, out.theta, tasks, store, cfg);
        } catch (const NonFiniteError& e) {
            throw NonFiniteError("meta iteration " + std::to_string(iter) + ", " + e.what());
        }
        out.theta = std::move(step.theta);
        const std::chrono::duration<double, std::milli> took = std::chrono::steady_clock::now() - start;
        out.trace.push_back({step.meta_loss, step.query_accuracy, took.count()});
    }
    return out;
}

ParamSet finetune_mask(const ModelConfig& model, const ParamSet& theta, const SlotMap& slots, bool freeze) {
    ParamSet mask;
    for (std::size_t i = 0; i < theta.size(); ++i) mask.add(theta.name(i), Tensor(theta[i].shape(), 1.0));
    if (!freeze) return mask;
    if (slots.size() != model.outputs) throw Error("finetune_mask: slot map does not match the output layer");
    Tensor& w = mask.get("fc.weight");
    Tensor& b = mask.get("fc.bias");
    const std::size_t width = w.dim(1);
    for (std::size_t s = 0; s < slots.size(); ++s) {
        if (!slots.is_fixed_slot(s)) continue;
        for (std::size_t k = 0; k < width; ++k) w.data()[s * width + k] = 0.0;
        b.data()[s] = 0.0;
    }
    return mask;
}

ParamSet fine_tune(const ModelConfig& model, const ParamSet& theta, const LabeledBatch& support,
                   const SlotMap& slots, const TrainConfig& cfg) {
    if (support.size() == 0) throw Error("fine_tune: empty support set");
    const bool freeze = cfg.freezes_fixed() && slots.n_fixed() > 0;
    if (!freeze) return adapt(model, theta, support, cfg.alpha, cfg.finetune_steps());
    const ParamSet mask = finetune_mask(model, theta, slots, true);
    return adapt(model, theta, support, cfg.alpha, cfg.finetune_steps(), &mask);
}

double evaluate(const ModelConfig& model, const ParamSet& theta, const LabeledBatch& query) {
    if (query.size() == 0) throw Error("evaluate: empty query");
    return accuracy_of(forward(model, theta, query.inputs), query.targets);
}

ParamSet supervised_baseline(const ModelConfig& model, const LabeledBatch& support, const TrainConfig& cfg,
                             std::uint64_t seed) {
    if (support.size() == 0) throw Error("supervised_baseline: empty support set");
    return adapt(model, init_params(model, seed), support, cfg.alpha, cfg.supervised_epochs);
}

ProtocolResult run_protocol(const InputStore& store, const EpisodeSpec& spec, const std::string& target_language,
                            const TrainConfig& cfg, std::size_t trials, std::size_t eval_per_label,
                            const ModelConfig& model, const ParamSet* theta) {
    if (trials == 0) throw Error("run_protocol: trials must be at least 1");
    if (model.outputs != spec.ways()) throw Error("run_protocol: model outputs do not match the task ways");
    ProtocolResult out;
    out.accuracies.resize(trials);
    parallel_for(trials, cfg.jobs, [&](std::size_t i) {
        Rng rng(derive_seed(cfg.seed, "target-task", i));
        const auto task = episodes::build_target_task(store.registry(), spec, target_language, eval_per_label, rng);
        const LabeledBatch support = make_batch(store, task.support, spec.ways());
        const LabeledBatch query = make_batch(store, task.eval_query, spec.ways());
        const ParamSet tuned = theta ? fine_tune(model, *theta, support, task.slots, cfg)
                                     : supervised_baseline(model, support, cfg, derive_seed(cfg.seed, "supervised-init", i));
        out.accuracies[i] = evaluate(model, tuned, query);
    });
    out.mean = std::accumulate(out.accuracies.begin(), out.accuracies.end(), 0.0) / static_cast<double>(trials);
    if (trials > 1) {
        double ss = 0.0;
        for (double a : out.accuracies) ss += (a - out.mean) * (a - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(trials - 1));
    }
    return out;
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::ordered_json header;
    header["format"] = "fmaml-checkpoint-1";
    header["config_hash"] = ckpt.config_hash;
    header["seed"] = ckpt.seed;
    header["names"] = nlohmann::json::array();
    header["shapes"] = nlohmann::json::array();
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        header["names"].push_back(ckpt.params.name(i));
        header["shapes"].push_back(ckpt.params[i].shape());
    }
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("checkpoint: cannot write " + path.string());
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (std::size_t i = 0; i < ckpt.params.size(); ++i)
        for (double v : ckpt.params[i].data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    if (!out) throw Error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("checkpoint: cannot open " + path.string());
    const std::uint64_t len = get_u64(in);
    if (len > (1u << 26)) throw Error("checkpoint: implausible header length");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw Error("checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("checkpoint: bad header: ") + e.what());
    }
    if (header.value("format", "") != "fmaml-checkpoint-1") throw Error("checkpoint: unknown format");
    Checkpoint ckpt;
    ckpt.config_hash = header.at("config_hash").get<std::string>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    const auto& names = header.at("names");
    const auto& shapes = header.at("shapes");
    if (names.size() != shapes.size()) throw Error("checkpoint: names and shapes differ in length");
    for (std::size_t i = 0; i < names.size(); ++i) {
        Tensor t(shapes[i].get<Shape>(), 0.0);
        for (double& v : t.data()) v = std::bit_cast<double>(get_u64(in));
        ckpt.params.add(names[i].get<std::string>(), std::move(t));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw Error("checkpoint: trailing bytes");
    return ckpt;
}

}  // namespace fmaml::meta
