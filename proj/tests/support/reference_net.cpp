#include "support/reference_net.hpp"

#include <cmath>

namespace fmaml::testing {

namespace {

using Maps = std::vector<std::vector<std::vector<std::vector<double>>>>;  // [b][c][y][x]

Maps make_maps(std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
    return Maps(b, std::vector<std::vector<std::vector<double>>>(c, std::vector<std::vector<double>>(h, std::vector<double>(w, 0.0))));
}

}  // namespace

Tensor reference_forward(const ModelConfig& cfg, const ParamSet& params, const Tensor& batch) {
    const std::size_t nb = batch.dim(0);
    std::size_t c = 1, h = cfg.in_height, w = cfg.in_width;
    Maps x = make_maps(nb, 1, h, w);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t xx = 0; xx < w; ++xx) x[b][0][y][xx] = batch[(b * h + y) * w + xx];

    for (std::size_t blk = 0; blk < cfg.blocks; ++blk) {
        const std::string i = std::to_string(blk);
        const Tensor& k = params.get("conv" + i + ".weight");
        const Tensor& kb = params.get("conv" + i + ".bias");
        const Tensor& gamma = params.get("bn" + i + ".weight");
        const Tensor& beta = params.get("bn" + i + ".bias");
        const std::size_t f = cfg.filters;

        Maps y = make_maps(nb, f, h, w);
        for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t o = 0; o < f; ++o)
                for (std::size_t r = 0; r < h; ++r)
                    for (std::size_t q = 0; q < w; ++q) {
                        double acc = kb[o];
                        for (std::size_t ch = 0; ch < c; ++ch)
                            for (int dy = -1; dy <= 1; ++dy)
                                for (int dx = -1; dx <= 1; ++dx) {
                                    const long sy = static_cast<long>(r) + dy, sx = static_cast<long>(q) + dx;
                                    if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) continue;
                                    acc += k[((o * c + ch) * 3 + (dy + 1)) * 3 + (dx + 1)] * x[b][ch][sy][sx];
                                }
                        y[b][o][r][q] = acc > 0.0 ? acc : 0.0;
                    }

        const double count = static_cast<double>(nb * h * w);
        for (std::size_t o = 0; o < f; ++o) {
            double mean = 0.0;
            for (std::size_t b = 0; b < nb; ++b)
                for (std::size_t r = 0; r < h; ++r)
                    for (std::size_t q = 0; q < w; ++q) mean += y[b][o][r][q];
            mean /= count;
            double var = 0.0;
            for (std::size_t b = 0; b < nb; ++b)
                for (std::size_t r = 0; r < h; ++r)
                    for (std::size_t q = 0; q < w; ++q) var += (y[b][o][r][q] - mean) * (y[b][o][r][q] - mean);
            var /= count;
            const double denom = std::sqrt(var + cfg.bn_eps);
            for (std::size_t b = 0; b < nb; ++b)
                for (std::size_t r = 0; r < h; ++r)
                    for (std::size_t q = 0; q < w; ++q)
                        y[b][o][r][q] = gamma[o] * (y[b][o][r][q] - mean) / denom + beta[o];
        }

        const std::size_t oh = h / 2, ow = w / 2;
        Maps p = make_maps(nb, f, oh, ow);
        for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t o = 0; o < f; ++o)
                for (std::size_t r = 0; r < oh; ++r)
                    for (std::size_t q = 0; q < ow; ++q)
                        p[b][o][r][q] = std::max(std::max(y[b][o][2 * r][2 * q], y[b][o][2 * r][2 * q + 1]),
                                                 std::max(y[b][o][2 * r + 1][2 * q], y[b][o][2 * r + 1][2 * q + 1]));
        x = std::move(p);
        c = f;
        h = oh;
        w = ow;
    }

    const std::size_t pp = cfg.pooled;
    std::vector<std::vector<double>> feats(nb);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < pp; ++i)
                for (std::size_t j = 0; j < pp; ++j) {
                    const std::size_t y0 = static_cast<std::size_t>(std::floor(double(i) * h / pp));
                    const std::size_t y1 = static_cast<std::size_t>(std::ceil(double(i + 1) * h / pp));
                    const std::size_t x0 = static_cast<std::size_t>(std::floor(double(j) * w / pp));
                    const std::size_t x1 = static_cast<std::size_t>(std::ceil(double(j + 1) * w / pp));
                    double acc = 0.0;
                    for (std::size_t r = y0; r < y1; ++r)
                        for (std::size_t q = x0; q < x1; ++q) acc += x[b][ch][r][q];
                    feats[b].push_back(acc / double((y1 - y0) * (x1 - x0)));
                }

    const Tensor& fw = params.get("fc.weight");
    const Tensor& fb = params.get("fc.bias");
    Tensor logits({nb, cfg.outputs});
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t o = 0; o < cfg.outputs; ++o) {
            double acc = fb[o];
            for (std::size_t k = 0; k < feats[b].size(); ++k) acc += fw[o * feats[b].size() + k] * feats[b][k];
            logits.at(b, o) = acc;
        }
    return logits;
}

double reference_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
    double total = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        double denom = 0.0;
        for (std::size_t c = 0; c < logits.dim(1); ++c) denom += std::exp(logits.at(r, c));
        total += -(logits.at(r, labels[r]) - std::log(denom));
    }
    return total / static_cast<double>(labels.size());
}

}  // namespace fmaml::testing

#include <algorithm>
#include <random>

namespace fmaml::testing {

Tensor random_batch(std::size_t b, std::size_t h, std::size_t w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor t({b, 1, h, w});
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

Tensor random_targets(std::size_t b, std::size_t classes, std::uint64_t seed, std::vector<std::size_t>* labels) {
    std::vector<std::size_t> l(b);
    for (std::size_t i = 0; i < b; ++i) l[i] = i % classes;
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    std::shuffle(l.begin(), l.end(), rng);
    Tensor t({b, classes});
    for (std::size_t i = 0; i < b; ++i) t.at(i, l[i]) = 1.0;
    if (labels) *labels = l;
    return t;
}

double grad_rel_error(const ParamSet& a, const ParamSet& b, double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, max_rel_error(a[i], b[i], floor));
    return worst;
}

}  // namespace fmaml::testing
