#include "timeraf/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "timeraf/checkpoint.hpp"

namespace timeraf {

void BackboneParams::freeze() {
    proj.frozen = true;
    trunk.frozen = true;
    head.frozen = true;
}

std::uint64_t BackboneParams::hash() const {
    // Combine the three nets' hashes; order is fixed.
    std::uint64_t h = param_hash(proj);
    h = h * 1099511628211ULL ^ param_hash(trunk);
    h = h * 1099511628211ULL ^ param_hash(head);
    return h;
}

BackboneParams make_backbone(const BackboneDims& dims, std::mt19937_64& rng) {
    if (dims.sl % dims.patch_len != 0)
        throw ConfigError("make_backbone: sl must be a multiple of patch_len");
    const std::size_t n = dims.n(), nd = n * dims.d;
    BackboneParams b;
    b.dims = dims;
    b.proj = make_mlp({dims.patch_len, dims.d}, rng, /*final_linear=*/true);
    b.trunk = make_mlp({nd, 2 * nd, nd}, rng, /*final_linear=*/false);
    b.head = make_mlp({nd, dims.fl}, rng, /*final_linear=*/true);
    zero_final_layer(b.head);
    return b;
}

Embedding embed_patches(const BackboneParams& params, const Matrix& patches) {
    if (patches.cols != params.dims.patch_len)
        throw ConfigError("embed_patches: patch length mismatch");
    Embedding emb(patches.rows, params.dims.d);
    for (std::size_t i = 0; i < patches.rows; ++i)
        emb.set_row(i, mlp_forward(params.proj, patches.row(i)));
    return emb;
}

Vector forecast_from_embedding(const BackboneParams& params, const Embedding& emb,
                               const NormStats& stats) {
    BackboneCache cache;
    return forecast_from_embedding(params, emb, stats, cache);
}

Vector forecast_from_embedding(const BackboneParams& params, const Embedding& emb,
                               const NormStats& stats, BackboneCache& cache) {
    if (emb.rows != params.dims.n() || emb.cols != params.dims.d)
        throw ConfigError("forecast_from_embedding: embedding shape mismatch");
    cache.stats = stats;
    Vector trunk_out = mlp_forward(params.trunk, emb.data, cache.trunk);
    Vector head_out = mlp_forward(params.head, trunk_out, cache.head);
    return denormalize(head_out, stats);
}

Embedding backward_to_embedding(const BackboneParams& params, const BackboneCache& cache,
                                const Vector& grad_forecast, Grads* trunk_grads,
                                Grads* head_grads) {
    // forecast = head_out * std + mean
    Vector grad_head_out(grad_forecast.size());
    for (std::size_t i = 0; i < grad_forecast.size(); ++i)
        grad_head_out[i] = grad_forecast[i] * cache.stats.std;
    Vector grad_trunk_out = mlp_backward(params.head, cache.head, grad_head_out, head_grads);
    Vector grad_flat = mlp_backward(params.trunk, cache.trunk, grad_trunk_out, trunk_grads);
    Embedding grad_emb(params.dims.n(), params.dims.d);
    grad_emb.data = std::move(grad_flat);
    return grad_emb;
}

Vector predict(const BackboneParams& params, const Vector& x) {
    if (x.size() != params.dims.sl) throw ConfigError("predict: input length != sl");
    auto [xn, stats] = instance_normalize(x);
    Matrix patches = patchify(xn, params.dims.patch_len, params.dims.patch_len);
    Embedding emb = embed_patches(params, patches);
    return forecast_from_embedding(params, emb, stats);
}

PretrainReport pretrain(BackboneParams& params, const std::vector<WindowPair>& pairs,
                        const PretrainConfig& config) {
    if (pairs.empty()) throw ConfigError("pretrain: no training pairs");
    if (params.frozen()) throw ConfigError("pretrain: backbone already frozen");

    Grads proj_g = Grads::like(params.proj);
    Grads trunk_g = Grads::like(params.trunk);
    Grads head_g = Grads::like(params.head);
    OptimizerState proj_opt = OptimizerState::adam(params.proj, config.lr);
    OptimizerState trunk_opt = OptimizerState::adam(params.trunk, config.lr);
    OptimizerState head_opt = OptimizerState::adam(params.head, config.lr);

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    PretrainReport report;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(rng)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            const WindowPair& pair = pairs[idx];
            auto [xn, stats] = instance_normalize(pair.x);
            Matrix patches = patchify(xn, params.dims.patch_len, params.dims.patch_len);

            BackboneCache cache;
            cache.proj.resize(patches.rows);
            Embedding emb(patches.rows, params.dims.d);
            for (std::size_t r = 0; r < patches.rows; ++r)
                emb.set_row(r, mlp_forward(params.proj, patches.row(r), cache.proj[r]));
            Vector forecast = forecast_from_embedding(params, emb, stats, cache);

            const double loss = mse(forecast, pair.y);
            if (!std::isfinite(loss))
                throw NumericError("pretrain: non-finite loss at window " +
                                   pair.source.dataset_id + ":" +
                                   std::to_string(pair.source.start));
            epoch_loss += loss;

            Vector grad_forecast(forecast.size());
            const double scale = 2.0 / static_cast<double>(forecast.size());
            for (std::size_t j = 0; j < forecast.size(); ++j)
                grad_forecast[j] = scale * (forecast[j] - pair.y[j]);
            Embedding grad_emb =
                backward_to_embedding(params, cache, grad_forecast, &trunk_g, &head_g);
            for (std::size_t r = 0; r < patches.rows; ++r)
                mlp_backward(params.proj, cache.proj[r], grad_emb.row(r), &proj_g);

            optimizer_step(params.proj, proj_g, proj_opt);
            optimizer_step(params.trunk, trunk_g, trunk_opt);
            optimizer_step(params.head, head_g, head_opt);
        }
        report.epoch_mse.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    params.freeze();
    return report;
}

void save_backbone(const BackboneParams& params, const std::string& path) {
    Checkpoint ckpt;
    ckpt.nets["proj"] = params.proj;
    ckpt.nets["trunk"] = params.trunk;
    ckpt.nets["head"] = params.head;
    ckpt.meta = {{"kind", "backbone"},
                 {"sl", params.dims.sl},
                 {"fl", params.dims.fl},
                 {"patch_len", params.dims.patch_len},
                 {"d", params.dims.d}};
    save_checkpoint(ckpt, path);
}

BackboneParams load_backbone(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.meta.value("kind", std::string()) != "backbone")
        throw DataError("checkpoint is not a backbone: " + path);
    BackboneParams b;
    b.dims.sl = ckpt.meta.at("sl").get<std::size_t>();
    b.dims.fl = ckpt.meta.at("fl").get<std::size_t>();
    b.dims.patch_len = ckpt.meta.at("patch_len").get<std::size_t>();
    b.dims.d = ckpt.meta.at("d").get<std::size_t>();
    b.proj = std::move(ckpt.nets.at("proj"));
    b.trunk = std::move(ckpt.nets.at("trunk"));
    b.head = std::move(ckpt.nets.at("head"));
    return b;
}

}  // namespace timeraf
