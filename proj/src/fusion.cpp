#include "timeraf/fusion.hpp"

#include <algorithm>

#include "timeraf/checkpoint.hpp"

namespace timeraf {

namespace {

void check_shape(const Embedding& e, std::size_t n, std::size_t d, const char* what) {
    if (e.rows != n || e.cols != d)
        throw ConfigError(std::string(what) + ": embedding shape mismatch");
}

Vector concat_flat(const Embedding& a, const Embedding& b) {
    Vector z;
    z.reserve(a.data.size() + b.data.size());
    z.insert(z.end(), a.data.begin(), a.data.end());
    z.insert(z.end(), b.data.begin(), b.data.end());
    return z;
}

}  // namespace

FusionParams make_fusion(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    const std::size_t nd = n * d;
    FusionParams f;
    f.n = n;
    f.d = d;
    f.mlp = make_mlp({2 * nd, 2 * nd, 2 * nd, nd, nd}, rng, /*final_linear=*/true);
    zero_final_layer(f.mlp);
    return f;
}

Embedding channel_prompt(const FusionParams& params, const Embedding& x_emb,
                         const std::vector<Embedding>& cand_embs) {
    FusionCache cache;
    return channel_prompt(params, x_emb, cand_embs, cache);
}

Embedding channel_prompt(const FusionParams& params, const Embedding& x_emb,
                         const std::vector<Embedding>& cand_embs, FusionCache& cache) {
    if (cand_embs.empty()) throw ConfigError("channel_prompt: no candidates");
    check_shape(x_emb, params.n, params.d, "channel_prompt");
    for (const auto& c : cand_embs) check_shape(c, params.n, params.d, "channel_prompt");

    const std::size_t nd = params.n * params.d;
    cache.x_emb = x_emb;
    cache.per_cand.assign(cand_embs.size(), ActivationCache{});
    Vector avg(nd, 0.0);
    for (std::size_t i = 0; i < cand_embs.size(); ++i) {
        Vector out = mlp_forward(params.mlp, concat_flat(x_emb, cand_embs[i]),
                                 cache.per_cand[i]);
        for (std::size_t j = 0; j < nd; ++j) avg[j] += out[j];
    }
    const double inv_k = 1.0 / static_cast<double>(cand_embs.size());
    Embedding fused = x_emb;
    for (std::size_t j = 0; j < nd; ++j) fused.data[j] += avg[j] * inv_k;
    return fused;
}

Embedding channel_prompt_backward(const FusionParams& params, const FusionCache& cache,
                                  const Embedding& grad_out, Grads& grads) {
    check_shape(grad_out, params.n, params.d, "channel_prompt_backward");
    const std::size_t nd = params.n * params.d;
    const double inv_k = 1.0 / static_cast<double>(cache.per_cand.size());
    Vector grad_mlp_out(nd);
    for (std::size_t j = 0; j < nd; ++j) grad_mlp_out[j] = grad_out.data[j] * inv_k;

    Embedding grad_x = grad_out;  // residual path
    for (const auto& cand_cache : cache.per_cand) {
        Vector grad_z = mlp_backward(params.mlp, cand_cache, grad_mlp_out, &grads);
        // First nd components of z belong to x_emb.
        for (std::size_t j = 0; j < nd; ++j) grad_x.data[j] += grad_z[j];
    }
    return grad_x;
}

TokenConcatParams make_token_concat(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    TokenConcatParams t;
    t.n = n;
    t.d = d;
    t.mlp = make_mlp({2 * d, 2 * d, d}, rng, /*final_linear=*/true);
    zero_final_layer(t.mlp);
    return t;
}

Embedding token_concat_baseline(const TokenConcatParams& params, const Embedding& x_emb,
                                const std::vector<Embedding>& cand_embs) {
    TokenConcatCache cache;
    return token_concat_baseline(params, x_emb, cand_embs, cache);
}

Embedding token_concat_baseline(const TokenConcatParams& params, const Embedding& x_emb,
                                const std::vector<Embedding>& cand_embs,
                                TokenConcatCache& cache) {
    if (cand_embs.empty()) throw ConfigError("token_concat: no candidates");
    check_shape(x_emb, params.n, params.d, "token_concat");
    for (const auto& c : cand_embs) check_shape(c, params.n, params.d, "token_concat");

    Embedding cand_mean(params.n, params.d);
    const double inv_k = 1.0 / static_cast<double>(cand_embs.size());
    for (const auto& c : cand_embs)
        for (std::size_t j = 0; j < c.data.size(); ++j) cand_mean.data[j] += c.data[j];
    for (auto& v : cand_mean.data) v *= inv_k;

    cache.per_token.assign(params.n, ActivationCache{});
    Embedding fused = x_emb;
    for (std::size_t row = 0; row < params.n; ++row) {
        Vector z = x_emb.row(row);
        const Vector cm = cand_mean.row(row);
        z.insert(z.end(), cm.begin(), cm.end());
        Vector out = mlp_forward(params.mlp, z, cache.per_token[row]);
        for (std::size_t j = 0; j < params.d; ++j) fused.at(row, j) += out[j];
    }
    return fused;
}

Embedding token_concat_backward(const TokenConcatParams& params,
                                const TokenConcatCache& cache, const Embedding& grad_out,
                                Grads& grads) {
    check_shape(grad_out, params.n, params.d, "token_concat_backward");
    Embedding grad_x = grad_out;  // residual path
    for (std::size_t row = 0; row < params.n; ++row) {
        Vector grad_z =
            mlp_backward(params.mlp, cache.per_token[row], grad_out.row(row), &grads);
        for (std::size_t j = 0; j < params.d; ++j) grad_x.at(row, j) += grad_z[j];
    }
    return grad_x;
}

Embedding average_baseline(const Embedding& x_emb, const std::vector<Embedding>& cand_embs) {
    for (const auto& c : cand_embs)
        if (c.rows != x_emb.rows || c.cols != x_emb.cols)
            throw ConfigError("average_baseline: embedding shape mismatch");
    Embedding out = x_emb;
    for (const auto& c : cand_embs)
        for (std::size_t j = 0; j < out.data.size(); ++j) out.data[j] += c.data[j];
    const double inv = 1.0 / static_cast<double>(cand_embs.size() + 1);
    for (auto& v : out.data) v *= inv;
    return out;
}

void save_fusion(const FusionParams& params, const std::string& path) {
    Checkpoint ckpt;
    ckpt.nets["mlp"] = params.mlp;
    ckpt.meta = {{"kind", "fusion"}, {"n", params.n}, {"d", params.d}};
    save_checkpoint(ckpt, path);
}

FusionParams load_fusion(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.meta.value("kind", std::string()) != "fusion")
        throw DataError("checkpoint is not a fusion module: " + path);
    FusionParams f;
    f.n = ckpt.meta.at("n").get<std::size_t>();
    f.d = ckpt.meta.at("d").get<std::size_t>();
    f.mlp = std::move(ckpt.nets.at("mlp"));
    return f;
}

}  // namespace timeraf
