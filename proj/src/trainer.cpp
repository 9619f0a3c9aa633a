#include "timeraf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "timeraf/binio.hpp"

namespace timeraf {

RetrievalPolicy retrieval_policy_from_string(const std::string& s) {
    if (s == "learned") return RetrievalPolicy::learned;
    if (s == "random") return RetrievalPolicy::random;
    if (s == "cosine") return RetrievalPolicy::cosine;
    throw ConfigError("unknown retrieval policy: " + s);
}

FusionPolicy fusion_policy_from_string(const std::string& s) {
    if (s == "channel_prompt") return FusionPolicy::channel_prompt;
    if (s == "token_concat") return FusionPolicy::token_concat;
    if (s == "average") return FusionPolicy::average;
    if (s == "none") return FusionPolicy::none;
    throw ConfigError("unknown fusion policy: " + s);
}

std::string to_string(RetrievalPolicy p) {
    switch (p) {
        case RetrievalPolicy::learned: return "learned";
        case RetrievalPolicy::random: return "random";
        case RetrievalPolicy::cosine: return "cosine";
    }
    return "?";
}

std::string to_string(FusionPolicy p) {
    switch (p) {
        case FusionPolicy::channel_prompt: return "channel_prompt";
        case FusionPolicy::token_concat: return "token_concat";
        case FusionPolicy::average: return "average";
        case FusionPolicy::none: return "none";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (k < 1) throw ConfigError("TrainConfig: k must be >= 1");
    if (lambda < 0) throw ConfigError("TrainConfig: lambda must be >= 0");
    if (!(tau_m > 0) || !(tau_s > 0)) throw ConfigError("TrainConfig: temperatures must be > 0");
    if (rho < 0 || rho > 1) throw ConfigError("TrainConfig: rho must be in [0, 1]");
}

namespace {

struct EmbeddedWindow {
    Embedding emb;
    NormStats stats;
};

EmbeddedWindow embed_window(const BackboneParams& backbone, const Vector& window) {
    auto [xn, stats] = instance_normalize(window);
    Matrix patches = patchify(xn, backbone.dims.patch_len, backbone.dims.patch_len);
    return {embed_patches(backbone, patches), stats};
}

std::vector<Embedding> embed_candidates(const BackboneParams& backbone,
                                        const KnowledgeBase& kb,
                                        const std::vector<std::size_t>& indices) {
    std::vector<Embedding> embs;
    embs.reserve(indices.size());
    for (std::size_t idx : indices)
        embs.push_back(embed_window(backbone, kb.entries[idx].values).emb);
    return embs;
}

// Fused forecast without gradient bookkeeping (forecaster feedback and
// inference both use this).
Vector fused_forecast(const Pipeline& pipe, const EmbeddedWindow& x,
                      const std::vector<Embedding>& cand_embs) {
    Embedding fused(0, 0);
    switch (pipe.cfg.fusion_policy) {
        case FusionPolicy::channel_prompt:
            fused = channel_prompt(pipe.fusion, x.emb, cand_embs);
            break;
        case FusionPolicy::token_concat:
            fused = token_concat_baseline(pipe.token_concat, x.emb, cand_embs);
            break;
        case FusionPolicy::average:
            fused = average_baseline(x.emb, cand_embs);
            break;
        case FusionPolicy::none:
            fused = x.emb;
            break;
    }
    return forecast_from_embedding(*pipe.backbone, fused, x.stats);
}

double cosine_similarity(const Vector& a, const Vector& b) {
    const double denom = std::sqrt(dot(a, a)) * std::sqrt(dot(b, b));
    if (denom == 0.0) return 0.0;
    return dot(a, b) / denom;
}

std::uint64_t hash_bytes(const void* data, std::size_t n) {
    Fnv1a64 h;
    h.feed(data, n);
    return h.value;
}

}  // namespace

Pipeline make_pipeline(const BackboneParams& backbone, const TrainConfig& cfg) {
    cfg.validate();
    Pipeline pipe;
    pipe.backbone = &backbone;
    pipe.cfg = cfg;
    std::mt19937_64 rng(cfg.seed);
    pipe.retriever = make_retriever(backbone.dims.sl, cfg.e, rng);
    pipe.fusion = make_fusion(backbone.dims.n(), backbone.dims.d, rng);
    pipe.token_concat = make_token_concat(backbone.dims.n(), backbone.dims.d, rng);

    pipe.retr_q_grads = Grads::like(pipe.retriever.query_encoder);
    pipe.retr_c_grads = Grads::like(pipe.retriever.cand_encoder);
    pipe.fusion_grads = Grads::like(pipe.fusion.mlp);
    pipe.tc_grads = Grads::like(pipe.token_concat.mlp);
    pipe.retr_q_opt = OptimizerState::adam(pipe.retriever.query_encoder, cfg.lr_retriever);
    pipe.retr_c_opt = OptimizerState::adam(pipe.retriever.cand_encoder, cfg.lr_retriever);
    pipe.fusion_opt = OptimizerState::adam(pipe.fusion.mlp, cfg.lr_fusion);
    pipe.tc_opt = OptimizerState::adam(pipe.token_concat.mlp, cfg.lr_fusion);
    return pipe;
}

std::vector<std::size_t> select_candidates(const Pipeline& pipe, const Vector& x,
                                           const KnowledgeBase& kb,
                                           std::span<const std::size_t> eligible,
                                           std::mt19937_64& rng, Vector* scores_out) {
    const std::size_t k = pipe.cfg.k;
    if (eligible.size() < k) throw ConfigError("select_candidates: eligible set smaller than k");
    std::vector<std::size_t> selected;
    switch (pipe.cfg.retrieval_policy) {
        case RetrievalPolicy::learned: {
            RetrievalResult r = retrieve(pipe.retriever, x, kb, eligible, k);
            if (scores_out) *scores_out = r.scores;
            selected = std::move(r.indices);
            break;
        }
        case RetrievalPolicy::random: {
            std::vector<std::size_t> pool(eligible.begin(), eligible.end());
            for (std::size_t i = 0; i < k; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
                std::swap(pool[i], pool[pick(rng)]);
            }
            pool.resize(k);
            selected = std::move(pool);
            if (scores_out) scores_out->assign(k, 0.0);
            break;
        }
        case RetrievalPolicy::cosine: {
            const Vector qn = instance_normalize(x).first;
            Vector sims(eligible.size());
            for (std::size_t j = 0; j < eligible.size(); ++j)
                sims[j] = cosine_similarity(
                    qn, instance_normalize(kb.entries[eligible[j]].values).first);
            const auto local = top_k(sims, k);
            Vector sel_scores;
            for (std::size_t pos : local) {
                selected.push_back(eligible[pos]);
                sel_scores.push_back(sims[pos]);
            }
            if (scores_out) *scores_out = std::move(sel_scores);
            break;
        }
    }
    return selected;
}

StepStats train_step(Pipeline& pipe, const WindowPair& pair, const KnowledgeBase& kb,
                     std::mt19937_64& rng) {
    const TrainConfig& cfg = pipe.cfg;
    StepStats stats;
    if (cfg.fusion_policy == FusionPolicy::none) {
        // w/o-RAF bypass: nothing to train.
        stats.l_pred = mse(predict(*pipe.backbone, pair.x), pair.y);
        stats.loss = stats.l_pred;
        return stats;
    }
    if (!pipe.backbone->frozen())
        throw ConfigError("train_step: backbone must be frozen");

    const auto eligible =
        eligible_candidates(kb, pair.source.dataset_id, /*training=*/true, cfg.k);
    const bool learned = cfg.retrieval_policy == RetrievalPolicy::learned;

    // Candidate selection (+ augmentation for the learned policy).
    RetrievalResult result;
    if (learned) {
        result = retrieve(pipe.retriever, pair.x, kb, eligible, cfg.k);
        augment(result, pipe.retriever, pair.x, kb, eligible, cfg.rho, rng);
    } else {
        result.indices = select_candidates(pipe, pair.x, kb, eligible, rng, &result.scores);
        result.augmented.assign(cfg.k, false);
    }
    stats.indices = result.indices;
    stats.augmented = result.augmented;

    const EmbeddedWindow x = embed_window(*pipe.backbone, pair.x);
    const std::vector<Embedding> cand_embs =
        embed_candidates(*pipe.backbone, kb, result.indices);

    // Forecaster feedback: per-candidate quality under the current fusion,
    // detached (supervision signal only). Metric is -MSE (smaller-is-better
    // flipped).
    Vector metric(result.indices.size());
    for (std::size_t i = 0; i < result.indices.size(); ++i) {
        const std::vector<Embedding> one{cand_embs[i]};
        metric[i] = -mse(fused_forecast(pipe, x, one), pair.y);
    }
    result.target = target_distribution(metric, cfg.tau_m);

    // Retrieval loss on the (augmented) scores.
    RetrievalLoss rl{0.0, Vector(result.indices.size(), 0.0)};
    if (learned) rl = retrieval_loss(result.scores, result.target, cfg.tau_s);
    stats.l_r_aug = rl.loss;

    // Prediction loss through the fusion path.
    FusionCache cp_cache;
    TokenConcatCache tc_cache;
    Embedding fused(0, 0);
    switch (cfg.fusion_policy) {
        case FusionPolicy::channel_prompt:
            fused = channel_prompt(pipe.fusion, x.emb, cand_embs, cp_cache);
            break;
        case FusionPolicy::token_concat:
            fused = token_concat_baseline(pipe.token_concat, x.emb, cand_embs, tc_cache);
            break;
        case FusionPolicy::average:
            fused = average_baseline(x.emb, cand_embs);
            break;
        case FusionPolicy::none:
            break;  // unreachable
    }
    BackboneCache bb_cache;
    const Vector forecast = forecast_from_embedding(*pipe.backbone, fused, x.stats, bb_cache);
    stats.l_pred = mse(forecast, pair.y);
    stats.loss = stats.l_pred + cfg.lambda * stats.l_r_aug;
    if (!std::isfinite(stats.loss))
        throw NumericError("train_step: non-finite loss at window " +
                           pair.source.dataset_id + ":" +
                           std::to_string(pair.source.start));

    // Fusion update: gradient chained through the frozen backbone.
    if (cfg.fusion_policy != FusionPolicy::average) {
        Vector grad_forecast(forecast.size());
        const double scale = 2.0 / static_cast<double>(forecast.size());
        for (std::size_t j = 0; j < forecast.size(); ++j)
            grad_forecast[j] = scale * (forecast[j] - pair.y[j]);
        const Embedding grad_fused =
            backward_to_embedding(*pipe.backbone, bb_cache, grad_forecast);
        if (cfg.fusion_policy == FusionPolicy::channel_prompt) {
            channel_prompt_backward(pipe.fusion, cp_cache, grad_fused, pipe.fusion_grads);
            optimizer_step(pipe.fusion.mlp, pipe.fusion_grads, pipe.fusion_opt);
        } else {
            token_concat_backward(pipe.token_concat, tc_cache, grad_fused, pipe.tc_grads);
            optimizer_step(pipe.token_concat.mlp, pipe.tc_grads, pipe.tc_opt);
        }
    }

    // Retriever update: dL/ds_i through both encoders. Skipped when lambda
    // is zero (the gradient is exactly zero there) and during warmup epochs.
    if (learned && cfg.lambda != 0.0 && pipe.epoch >= cfg.warmup_epochs) {
        const Vector qn = instance_normalize(pair.x).first;
        ActivationCache q_cache;
        const Vector q_emb = mlp_forward(pipe.retriever.query_encoder, qn, q_cache);
        Vector grad_q_emb(q_emb.size(), 0.0);
        for (std::size_t i = 0; i < result.indices.size(); ++i) {
            const double ds = cfg.lambda * rl.grad_scores[i];
            const Vector cn =
                instance_normalize(kb.entries[result.indices[i]].values).first;
            ActivationCache c_cache;
            const Vector c_emb = mlp_forward(pipe.retriever.cand_encoder, cn, c_cache);
            for (std::size_t j = 0; j < q_emb.size(); ++j) grad_q_emb[j] += ds * c_emb[j];
            Vector grad_c_emb(c_emb.size());
            for (std::size_t j = 0; j < c_emb.size(); ++j) grad_c_emb[j] = ds * q_emb[j];
            mlp_backward(pipe.retriever.cand_encoder, c_cache, grad_c_emb,
                         &pipe.retr_c_grads);
        }
        mlp_backward(pipe.retriever.query_encoder, q_cache, grad_q_emb, &pipe.retr_q_grads);
        optimizer_step(pipe.retriever.query_encoder, pipe.retr_q_grads, pipe.retr_q_opt);
        optimizer_step(pipe.retriever.cand_encoder, pipe.retr_c_grads, pipe.retr_c_opt);
    }
    return stats;
}

TrainingLog train(Pipeline& pipe, const std::vector<WindowPair>& pairs,
                  const KnowledgeBase& kb) {
    if (pipe.backbone == nullptr || !pipe.backbone->frozen())
        throw ConfigError("train: backbone must be pretrained and frozen");
    TrainingLog log;
    if (pipe.cfg.fusion_policy == FusionPolicy::none) return log;

    std::mt19937_64 rng(pipe.cfg.seed);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    double initial_loss = -1.0;
    for (std::size_t epoch = 0; epoch < pipe.cfg.epochs; ++epoch) {
        pipe.epoch = epoch;
        for (std::size_t i = order.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(rng)]);
        }
        double epoch_pred = 0.0;
        std::size_t counted = 0;
        for (std::size_t idx : order) {
            std::size_t remaining = 0;
            for (const auto& e : kb.entries)
                if (e.dataset_id != pairs[idx].source.dataset_id) ++remaining;
            if (remaining < pipe.cfg.k) {
                ++log.skipped;
                continue;
            }
            StepStats s = train_step(pipe, pairs[idx], kb, rng);
            if (initial_loss < 0.0) initial_loss = s.loss;
            if (initial_loss > 0.0 && s.loss > 1e3 * initial_loss)
                throw NumericError("train: loss diverged (" + std::to_string(s.loss) +
                                   " vs initial " + std::to_string(initial_loss) + ")");
            epoch_pred += s.l_pred;
            ++counted;
            log.steps.push_back(std::move(s));
        }
        log.epoch_l_pred.push_back(counted ? epoch_pred / static_cast<double>(counted) : 0.0);
        if (!pipe.cfg.checkpoint_dir.empty()) {
            const std::string tag = "_epoch" + std::to_string(epoch + 1) + ".tsck";
            save_retriever(pipe.retriever, pipe.cfg.checkpoint_dir + "/retriever" + tag);
            save_fusion(pipe.fusion, pipe.cfg.checkpoint_dir + "/fusion" + tag);
        }
    }
    return log;
}

Vector predict_raf(const Pipeline& pipe, const Vector& x, const KnowledgeBase& kb) {
    if (pipe.cfg.fusion_policy == FusionPolicy::none) return predict(*pipe.backbone, x);
    if (kb.size() < pipe.cfg.k) throw ConfigError("predict_raf: KB smaller than k");
    std::vector<std::size_t> all(kb.size());
    std::iota(all.begin(), all.end(), 0);
    // The random policy stays deterministic per input at inference.
    std::mt19937_64 rng(pipe.cfg.seed ^
                        hash_bytes(x.data(), x.size() * sizeof(double)));
    const auto indices = select_candidates(pipe, x, kb, all, rng, nullptr);
    const EmbeddedWindow xe = embed_window(*pipe.backbone, x);
    return fused_forecast(pipe, xe, embed_candidates(*pipe.backbone, kb, indices));
}

EvalReport evaluate(const Pipeline& pipe, const std::vector<WindowPair>& pairs,
                    const KnowledgeBase& kb) {
    if (pairs.empty()) throw ConfigError("evaluate: zero windows");
    EvalReport report;
    double total = 0.0;
    for (const auto& pair : pairs) {
        const double w = mse(predict_raf(pipe, pair.x, kb), pair.y);
        report.per_dataset_mse[pair.source.dataset_id] += w;
        report.per_dataset_windows[pair.source.dataset_id] += 1;
        report.residual_mse.push_back(w);
        total += w;
    }
    for (auto& [ds, sum] : report.per_dataset_mse)
        sum /= static_cast<double>(report.per_dataset_windows.at(ds));
    report.n_windows = pairs.size();
    report.mean_mse = total / static_cast<double>(pairs.size());
    return report;
}

EvalReport evaluate_backbone(const BackboneParams& backbone,
                             const std::vector<WindowPair>& pairs) {
    if (pairs.empty()) throw ConfigError("evaluate_backbone: zero windows");
    EvalReport report;
    double total = 0.0;
    for (const auto& pair : pairs) {
        const double w = mse(predict(backbone, pair.x), pair.y);
        report.per_dataset_mse[pair.source.dataset_id] += w;
        report.per_dataset_windows[pair.source.dataset_id] += 1;
        report.residual_mse.push_back(w);
        total += w;
    }
    for (auto& [ds, sum] : report.per_dataset_mse)
        sum /= static_cast<double>(report.per_dataset_windows.at(ds));
    report.n_windows = pairs.size();
    report.mean_mse = total / static_cast<double>(pairs.size());
    return report;
}

void write_training_log_csv(const TrainingLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open log file: " + path);
    out << "step,loss,l_pred,l_r_aug\n";
    char buf[128];
    for (std::size_t i = 0; i < log.steps.size(); ++i) {
        const auto& s = log.steps[i];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, s.loss, s.l_pred,
                      s.l_r_aug);
        out << buf;
    }
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["mean_mse"] = report.mean_mse;
    j["n_windows"] = report.n_windows;
    j["per_dataset_mse"] = report.per_dataset_mse;
    j["per_dataset_windows"] = report.per_dataset_windows;
    return j.dump(2);
}

}  // namespace timeraf
