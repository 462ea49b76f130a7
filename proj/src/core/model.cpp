#include "fmaml/core/model.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <tuple>

#include "fmaml/core/ops.hpp"

namespace fmaml {

std::pair<std::size_t, std::size_t> ModelConfig::spatial_at(std::size_t b) const {
    std::size_t h = in_height, w = in_width;
    for (std::size_t i = 0; i < b; ++i) {
        h /= 2;
        w /= 2;
    }
    return {h, w};
}

void ModelConfig::validate() const {
    if (blocks == 0 || filters == 0 || pooled == 0 || outputs == 0)
        throw Error("ModelConfig: blocks, filters, pooled and outputs must be positive");
    std::size_t h = in_height, w = in_width;
    for (std::size_t i = 0; i < blocks; ++i) {
        if (h < 2 || w < 2)
            throw ShapeError("ModelConfig: input " + std::to_string(in_height) + "x" + std::to_string(in_width) +
                             " too small for " + std::to_string(blocks) + " pooling blocks");
        h /= 2;
        w /= 2;
    }
}

namespace {

std::string block_name(const char* kind, std::size_t i, const char* field) {
    return std::string(kind) + std::to_string(i) + "." + field;
}

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

// [B, C, H, W] -> [C, B*H*W]
GatherIndex channel_major_index(std::size_t c, std::size_t b, std::size_t h, std::size_t w) {
    auto idx = std::make_shared<std::vector<std::int64_t>>(c * b * h * w);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t s = 0; s < b; ++s)
            for (std::size_t p = 0; p < h * w; ++p)
                (*idx)[ch * b * h * w + s * h * w + p] = static_cast<std::int64_t>((s * c + ch) * h * w + p);
    return idx;
}

// 2x2 stride-2 max pool over [C, B*H*W]; the first maximum in row-major
// window order wins ties.
GatherIndex maxpool_index(const Tensor& x, std::size_t c, std::size_t b, std::size_t h, std::size_t w) {
    const std::size_t oh = h / 2, ow = w / 2;
    auto idx = std::make_shared<std::vector<std::int64_t>>(c * b * oh * ow);
    std::size_t o = 0;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t s = 0; s < b; ++s) {
            const std::size_t base = ch * b * h * w + s * h * w;
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t xx = 0; xx < ow; ++xx) {
                    std::size_t best = base + 2 * y * w + 2 * xx;
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t j = base + (2 * y + dy) * w + 2 * xx + dx;
                            if (x[j] > x[best]) best = j;
                        }
                    (*idx)[o++] = static_cast<std::int64_t>(best);
                }
        }
    return idx;
}

// Adaptive average pool of [C, B*h*w] to p×p per map, flattened per sample
// into [B, C*p*p] (channel-major within a sample).
std::shared_ptr<const SparseMap> pool_flatten_map(std::size_t c, std::size_t b, std::size_t h, std::size_t w,
                                                  std::size_t p) {
    static std::mutex mu;
    static std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, std::size_t>,
                    std::shared_ptr<const SparseMap>>
        cache;
    std::lock_guard lock(mu);
    auto key = std::make_tuple(c, b, h, w, p);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    std::vector<std::size_t> row_ptr{0}, cols;
    std::vector<double> weights;
    for (std::size_t s = 0; s < b; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j) {
                    const std::size_t y0 = (i * h) / p, y1 = ((i + 1) * h + p - 1) / p;
                    const std::size_t x0 = (j * w) / p, x1 = ((j + 1) * w + p - 1) / p;
                    const double wgt = 1.0 / static_cast<double>((y1 - y0) * (x1 - x0));
                    for (std::size_t y = y0; y < y1; ++y)
                        for (std::size_t x = x0; x < x1; ++x) {
                            cols.push_back(ch * b * h * w + s * h * w + y * w + x);
                            weights.push_back(wgt);
                        }
                    row_ptr.push_back(cols.size());
                }
    auto map = std::make_shared<SparseMap>(b * c * p * p, c * b * h * w, std::move(row_ptr), std::move(cols),
                                           std::move(weights));
    cache.emplace(key, map);
    return map;
}

Var batchnorm(const Var& x, const Var& gamma, const Var& beta, std::size_t block, BnMode mode, double eps,
              const ParamSet* running, BatchStats* stats) {
    const std::size_t c = x.shape()[0], n = x.shape()[1];
    if (mode == BnMode::batch) {
        Tensor mean, var;
        Var y = ops::batchnorm_rows(x, gamma, beta, eps, &mean, &var);
        if (stats) {
            if (n > 1)
                for (auto& v : var.data()) v *= static_cast<double>(n) / static_cast<double>(n - 1);
            stats->mean.push_back(std::move(mean));
            stats->var.push_back(std::move(var));
        }
        return y;
    }
    if (!running) throw Error("forward: running statistics required for BnMode::running");
    const Tensor& rm = running->get(block_name("bn", block, "running_mean"));
    const Tensor& rv = running->get(block_name("bn", block, "running_var"));
    Tensor shift({c, n}), inv({c, n});
    for (std::size_t i = 0; i < c; ++i) {
        const double s = 1.0 / std::sqrt(rv[i] + eps);
        for (std::size_t j = 0; j < n; ++j) {
            shift[i * n + j] = -rm[i];
            inv[i * n + j] = s;
        }
    }
    const Var xhat = ops::mul_const(ops::add(x, Var(std::move(shift))), inv);
    const Var g_col = ops::reshape(gamma, {c, 1});
    const Var b_col = ops::reshape(beta, {c, 1});
    return ops::add(ops::mul(xhat, ops::broadcast_rows(g_col, n)), ops::broadcast_rows(b_col, n));
}

}  // namespace

ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ParamSet p;
    std::size_t in_ch = 1;
    for (std::size_t i = 0; i < cfg.blocks; ++i) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * 9));
        p.add(block_name("conv", i, "weight"), uniform({cfg.filters, in_ch, 3, 3}, bound, rng));
        p.add(block_name("conv", i, "bias"), uniform({cfg.filters}, bound, rng));
        p.add(block_name("bn", i, "weight"), Tensor({cfg.filters}, 1.0));
        p.add(block_name("bn", i, "bias"), Tensor({cfg.filters}, 0.0));
        in_ch = cfg.filters;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.flatten_width()));
    p.add("fc.weight", uniform({cfg.outputs, cfg.flatten_width()}, bound, rng));
    p.add("fc.bias", uniform({cfg.outputs}, bound, rng));
    return p;
}

ParamSet init_running_stats(const ModelConfig& cfg) {
    ParamSet r;
    for (std::size_t i = 0; i < cfg.blocks; ++i) {
        r.add(block_name("bn", i, "running_mean"), Tensor({cfg.filters}, 0.0));
        r.add(block_name("bn", i, "running_var"), Tensor({cfg.filters}, 1.0));
    }
    return r;
}

void update_running_stats(ParamSet& running, const BatchStats& stats, double momentum) {
    for (std::size_t b = 0; b < stats.mean.size(); ++b) {
        Tensor& rm = running.get(block_name("bn", b, "running_mean"));
        Tensor& rv = running.get(block_name("bn", b, "running_var"));
        for (std::size_t i = 0; i < rm.size(); ++i) {
            rm[i] = (1.0 - momentum) * rm[i] + momentum * stats.mean[b][i];
            rv[i] = (1.0 - momentum) * rv[i] + momentum * stats.var[b][i];
        }
    }
}

Var forward(const ModelConfig& cfg, const std::vector<Var>& params, const Var& batch, BnMode mode,
            const ParamSet* running, BatchStats* stats) {
    const auto& bs = batch.shape();
    if (bs.size() != 4 || bs[1] != 1 || bs[2] != cfg.in_height || bs[3] != cfg.in_width)
        throw ShapeError("forward: batch " + shape_str(bs) + " does not match model input [Bx1x" +
                         std::to_string(cfg.in_height) + "x" + std::to_string(cfg.in_width) + "]");
    if (bs[0] == 0) throw ShapeError("forward: empty batch");
    if (params.size() != 4 * cfg.blocks + 2) throw ShapeError("forward: wrong parameter count");

    const std::size_t b = bs[0];
    std::size_t c = 1, h = cfg.in_height, w = cfg.in_width;
    Var x = ops::gather(batch, channel_major_index(c, b, h, w), {c, b * h * w});

    for (std::size_t i = 0; i < cfg.blocks; ++i) {
        const Var& kernel = params[4 * i];
        const Var& bias = params[4 * i + 1];
        if (kernel.shape() != Shape{cfg.filters, c, 3, 3}) throw ShapeError("forward: conv kernel shape");
        Var y = ops::relu(ops::conv3x3(x, kernel, bias, b, h, w));
        y = batchnorm(y, params[4 * i + 2], params[4 * i + 3], i, mode, cfg.bn_eps, running, stats);
        c = cfg.filters;
        x = ops::gather(y, maxpool_index(y.value(), c, b, h, w), {c, b * (h / 2) * (w / 2)});
        h /= 2;
        w /= 2;
    }

    const std::size_t flat = cfg.flatten_width();
    const Var features = ops::sparse_apply(x, pool_flatten_map(c, b, h, w, cfg.pooled), {b, flat});
    const Var& fc_w = params[4 * cfg.blocks];
    const Var& fc_b = params[4 * cfg.blocks + 1];
    if (fc_w.shape() != Shape{cfg.outputs, flat}) throw ShapeError("forward: fc.weight shape");
    Var logits = ops::matmul(features, fc_w, false, true);
    return ops::add(logits, ops::broadcast_cols(ops::reshape(fc_b, {1, cfg.outputs}), b));
}

Tensor forward(const ModelConfig& cfg, const ParamSet& params, const Tensor& batch) {
    RecordingGuard off(false);
    return forward(cfg, params.as_constants(), Var(batch), BnMode::batch).value();
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) throw ShapeError("argmax_rows: expected rank-2 logits");
    const std::size_t rows = logits.dim(0), cols = logits.dim(1);
    std::vector<std::size_t> out(rows, 0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 1; k < cols; ++k)
            if (logits.at(r, k) > logits.at(r, out[r])) out[r] = k;
    return out;
}

}  // namespace fmaml
