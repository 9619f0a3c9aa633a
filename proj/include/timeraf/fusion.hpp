#pragma once

#include <random>
#include <vector>

#include "timeraf/backbone.hpp"

namespace timeraf {

// Channel Prompting MLP: 4 layers over Concat(Flatten(x_emb), Flatten(c_emb)),
// widths 2nd -> 2nd -> 2nd -> nd -> nd, tanh hidden, linear output. The final
// layer starts zeroed so fusion is exactly the identity at initialization.
struct FusionParams {
    MlpParams mlp;
    std::size_t n = 0;
    std::size_t d = 0;
    std::uint64_t hash() const { return param_hash(mlp); }
};

FusionParams make_fusion(std::size_t n, std::size_t d, std::mt19937_64& rng);

struct FusionCache {
    std::vector<ActivationCache> per_cand;
    Embedding x_emb;
};

// x* = x_emb + Avg_i MLP(Concat(Flatten(x_emb), Flatten(c_i))).
Embedding channel_prompt(const FusionParams& params, const Embedding& x_emb,
                         const std::vector<Embedding>& cand_embs);
Embedding channel_prompt(const FusionParams& params, const Embedding& x_emb,
                         const std::vector<Embedding>& cand_embs, FusionCache& cache);

// Gradient of a loss on the fused embedding; accumulates MLP parameter
// gradients and returns the gradient w.r.t. x_emb.
Embedding channel_prompt_backward(const FusionParams& params, const FusionCache& cache,
                                  const Embedding& grad_out, Grads& grads);

// Token-Concat ablation: per patch position, Concat(x_emb[j], mean_i c_i[j])
// through a shared two-layer MLP (2d -> 2d -> d), plus residual. Final layer
// starts zeroed.
struct TokenConcatParams {
    MlpParams mlp;
    std::size_t n = 0;
    std::size_t d = 0;
    std::uint64_t hash() const { return param_hash(mlp); }
};

TokenConcatParams make_token_concat(std::size_t n, std::size_t d, std::mt19937_64& rng);

struct TokenConcatCache {
    std::vector<ActivationCache> per_token;
};

Embedding token_concat_baseline(const TokenConcatParams& params, const Embedding& x_emb,
                                const std::vector<Embedding>& cand_embs);
Embedding token_concat_baseline(const TokenConcatParams& params, const Embedding& x_emb,
                                const std::vector<Embedding>& cand_embs,
                                TokenConcatCache& cache);
Embedding token_concat_backward(const TokenConcatParams& params,
                                const TokenConcatCache& cache, const Embedding& grad_out,
                                Grads& grads);

// Average ablation: elementwise mean of {x_emb, c_1, ..., c_k}. Parameter-free.
Embedding average_baseline(const Embedding& x_emb, const std::vector<Embedding>& cand_embs);

// TSCK persistence.
void save_fusion(const FusionParams& params, const std::string& path);
FusionParams load_fusion(const std::string& path);

}  // namespace timeraf
