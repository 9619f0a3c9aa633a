#pragma once

#include <random>
#include <span>
#include <vector>

#include "timeraf/kbase.hpp"

namespace timeraf {

// Dual-encoder retriever. Each encoder is a two-layer MLP, hidden width
// 4*sl with tanh, linear output of width e; the two sides do not share
// parameters. Inputs are instance-normalized before encoding.
struct RetrieverParams {
    MlpParams query_encoder;
    MlpParams cand_encoder;
    std::size_t sl = 0;
    std::size_t e = 64;
    std::uint64_t hash() const;
};

struct RetrieverHyper {
    std::size_t k = 8;
    double tau_m = 0.1;   // metric temperature (target distribution)
    double tau_s = 1.0;   // score temperature (retrieval loss)
    double rho = 0.2;     // augmentation rate
};

struct RetrievalResult {
    std::vector<std::size_t> indices;   // KB indices, distinct
    Vector scores;                      // raw dot products S_q
    std::vector<bool> augmented;
    Vector target;                      // P, set after forecaster feedback
};

RetrieverParams make_retriever(std::size_t sl, std::size_t e, std::mt19937_64& rng);

Vector encode_query(const RetrieverParams& params, const Vector& window);
Vector encode_candidate(const RetrieverParams& params, const Vector& t);

// Dot-product scores against every eligible entry, in eligible order.
Vector score_all(const RetrieverParams& params, const Vector& query,
                 const KnowledgeBase& kb, std::span<const std::size_t> eligible);

// Positions of the k largest scores, ties broken by lower index.
std::vector<std::size_t> top_k(const Vector& scores, std::size_t k);

// softmax(metric_values / tau_m); callers pass higher-is-better values
// (-MSE for forecasting).
Vector target_distribution(const Vector& metric_values, double tau_m);

// KL(P || softmax(S/tau_s)) with its analytic gradient w.r.t. the scores.
struct RetrievalLoss {
    double loss;
    Vector grad_scores;
};
RetrievalLoss retrieval_loss(const Vector& scores, const Vector& target, double tau_s);

// score_all + top_k over the eligible set, mapped back to KB indices.
RetrievalResult retrieve(const RetrieverParams& params, const Vector& query,
                         const KnowledgeBase& kb, std::span<const std::size_t> eligible,
                         std::size_t k);

// Replaces each slot w.p. rho by a uniform draw from the eligible set (no
// collisions with current slots) and recomputes the affected scores.
void augment(RetrievalResult& result, const RetrieverParams& params, const Vector& query,
             const KnowledgeBase& kb, std::span<const std::size_t> eligible, double rho,
             std::mt19937_64& rng);

// TSCK persistence.
void save_retriever(const RetrieverParams& params, const std::string& path);
RetrieverParams load_retriever(const std::string& path);

}  // namespace timeraf
