#include "timeraf/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "timeraf/checkpoint.hpp"

namespace timeraf {

std::uint64_t RetrieverParams::hash() const {
    std::uint64_t h = param_hash(query_encoder);
    h = h * 1099511628211ULL ^ param_hash(cand_encoder);
    return h;
}

namespace {

// Low-pass near-identity initialization: the first sl hidden units carry
// tanh(alpha * K x) with K a binomial moving average, and the output layer
// rescales them through a shared projection. Initial scores then approximate
// the dot product of smoothed normalized windows (the desk-scale stand-in for
// starting from a pretrained dense embedding model); comparing smoothed
// windows keeps observation noise from dominating the ranking. The remaining
// hidden units start with small random weights and near-zero output columns,
// giving training spare capacity without disturbing the initial similarity.
MlpParams make_encoder(std::size_t sl, std::size_t e, const Matrix& proj,
                       std::mt19937_64& rng) {
    constexpr double kAlpha = 0.1;
    constexpr double kKernel[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    MlpParams net = make_mlp({sl, 4 * sl, e}, rng, /*final_linear=*/true);
    auto& w1 = net.layers[0].weight;
    auto& w2 = net.layers[1].weight;
    for (std::size_t r = 0; r < w1.rows; ++r) {
        if (r >= sl) {
            for (std::size_t c = 0; c < w1.cols; ++c) w1.at(r, c) *= 0.1;
            continue;
        }
        double row_sum = 0;
        for (std::size_t c = 0; c < w1.cols; ++c) {
            w1.at(r, c) = 0.0;
            const std::ptrdiff_t off =
                static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(r);
            if (off >= -2 && off <= 2) row_sum += w1.at(r, c) = kKernel[off + 2];
        }
        // edge rows lose kernel taps; renormalize so each row sums to kAlpha
        for (std::size_t c = 0; c < w1.cols; ++c) w1.at(r, c) *= kAlpha / row_sum;
    }
    std::fill(net.layers[0].bias.begin(), net.layers[0].bias.end(), 0.0);
    // The 1/sqrt(sl) factor puts embeddings at unit scale (a normalized window
    // has norm sqrt(sl)), so initial scores land in roughly [-1, 1] like cosine
    // similarities and softmax(scores / tau_s) stays well conditioned.
    const double out_scale = 1.0 / (kAlpha * std::sqrt(static_cast<double>(sl)));
    for (std::size_t r = 0; r < w2.rows; ++r)
        for (std::size_t c = 0; c < w2.cols; ++c) {
            const double base = c < sl ? proj.at(r, c) * out_scale : 0.0;
            w2.at(r, c) = base + 0.01 * w2.at(r, c);
        }
    std::fill(net.layers[1].bias.begin(), net.layers[1].bias.end(), 0.0);
    return net;
}

}  // namespace

RetrieverParams make_retriever(std::size_t sl, std::size_t e, std::mt19937_64& rng) {
    RetrieverParams r;
    r.sl = sl;
    r.e = e;
    // Shared projection so query and candidate sides agree at initialization:
    // q(x).c(t) ~ x_n^T proj^T proj t_n. Identity when e == sl, seeded
    // Gaussian sketch otherwise.
    Matrix proj(e, sl);
    if (e == sl) {
        for (std::size_t i = 0; i < e; ++i) proj.at(i, i) = 1.0;
    } else {
        std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(e)));
        for (auto& v : proj.data) v = g(rng);
    }
    r.query_encoder = make_encoder(sl, e, proj, rng);
    r.cand_encoder = make_encoder(sl, e, proj, rng);
    return r;
}

Vector encode_query(const RetrieverParams& params, const Vector& window) {
    return mlp_forward(params.query_encoder, instance_normalize(window).first);
}

Vector encode_candidate(const RetrieverParams& params, const Vector& t) {
    return mlp_forward(params.cand_encoder, instance_normalize(t).first);
}

Vector score_all(const RetrieverParams& params, const Vector& query,
                 const KnowledgeBase& kb, std::span<const std::size_t> eligible) {
    if (eligible.empty()) throw ConfigError("score_all: empty eligible set");
    const Vector q_emb = encode_query(params, query);
    Vector scores(eligible.size());
    for (std::size_t j = 0; j < eligible.size(); ++j)
        scores[j] = dot(q_emb, encode_candidate(params, kb.entries[eligible[j]].values));
    return scores;
}

std::vector<std::size_t> top_k(const Vector& scores, std::size_t k) {
    if (scores.size() < k) throw ConfigError("top_k: fewer scores than k");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;  // stable tie rule
                      });
    idx.resize(k);
    return idx;
}

Vector target_distribution(const Vector& metric_values, double tau_m) {
    return softmax(metric_values, tau_m);
}

RetrievalLoss retrieval_loss(const Vector& scores, const Vector& target, double tau_s) {
    const Vector q = softmax(scores, tau_s);
    RetrievalLoss out;
    out.loss = kl_divergence(target, q);
    out.grad_scores.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        out.grad_scores[i] = (q[i] - target[i]) / tau_s;
    return out;
}

RetrievalResult retrieve(const RetrieverParams& params, const Vector& query,
                         const KnowledgeBase& kb, std::span<const std::size_t> eligible,
                         std::size_t k) {
    const Vector scores = score_all(params, query, kb, eligible);
    const auto local = top_k(scores, k);
    RetrievalResult r;
    r.indices.reserve(k);
    r.scores.reserve(k);
    for (std::size_t pos : local) {
        r.indices.push_back(eligible[pos]);
        r.scores.push_back(scores[pos]);
    }
    r.augmented.assign(k, false);
    return r;
}

void augment(RetrievalResult& result, const RetrieverParams& params, const Vector& query,
             const KnowledgeBase& kb, std::span<const std::size_t> eligible, double rho,
             std::mt19937_64& rng) {
    if (rho < 0.0 || rho > 1.0) throw ConfigError("augment: rho must be in [0, 1]");
    if (rho == 0.0 || result.indices.empty()) return;
    if (eligible.size() <= result.indices.size()) return;  // no spare candidates

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const Vector q_emb = encode_query(params, query);
    for (std::size_t slot = 0; slot < result.indices.size(); ++slot) {
        if (coin(rng) >= rho) continue;
        // Uniform draw from eligible, rejecting collisions with current slots.
        std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
        std::size_t replacement;
        do {
            replacement = eligible[pick(rng)];
        } while (std::find(result.indices.begin(), result.indices.end(), replacement) !=
                 result.indices.end());
        result.indices[slot] = replacement;
        result.scores[slot] =
            dot(q_emb, encode_candidate(params, kb.entries[replacement].values));
        result.augmented[slot] = true;
    }
}

void save_retriever(const RetrieverParams& params, const std::string& path) {
    Checkpoint ckpt;
    ckpt.nets["query_encoder"] = params.query_encoder;
    ckpt.nets["cand_encoder"] = params.cand_encoder;
    ckpt.meta = {{"kind", "retriever"}, {"sl", params.sl}, {"e", params.e}};
    save_checkpoint(ckpt, path);
}

RetrieverParams load_retriever(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.meta.value("kind", std::string()) != "retriever")
        throw DataError("checkpoint is not a retriever: " + path);
    RetrieverParams r;
    r.sl = ckpt.meta.at("sl").get<std::size_t>();
    r.e = ckpt.meta.at("e").get<std::size_t>();
    r.query_encoder = std::move(ckpt.nets.at("query_encoder"));
    r.cand_encoder = std::move(ckpt.nets.at("cand_encoder"));
    return r;
}

}  // namespace timeraf
