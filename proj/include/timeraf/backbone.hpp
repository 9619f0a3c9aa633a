#pragma once

#include <random>
#include <vector>

#include "timeraf/tsdata.hpp"

namespace timeraf {

using Embedding = Matrix;  // n x d

struct BackboneDims {
    std::size_t sl = 512;
    std::size_t fl = 96;
    std::size_t patch_len = 64;
    std::size_t d = 16;
    std::size_t n() const { return sl / patch_len; }
};

// Small frozen forecaster: shared per-patch linear projection, two-hidden-layer
// tanh trunk over the flattened embedding, linear head. Head starts zeroed so a
// fresh backbone predicts the lookback mean.
struct BackboneParams {
    BackboneDims dims;
    MlpParams proj;   // patch_len -> d, linear
    MlpParams trunk;  // n*d -> 2*n*d -> n*d, tanh
    MlpParams head;   // n*d -> fl, linear

    bool frozen() const { return proj.frozen && trunk.frozen && head.frozen; }
    void freeze();
    std::uint64_t hash() const;
};

BackboneParams make_backbone(const BackboneDims& dims, std::mt19937_64& rng);

struct BackboneCache {
    std::vector<ActivationCache> proj;  // one per patch
    ActivationCache trunk;
    ActivationCache head;
    NormStats stats;
};

Embedding embed_patches(const BackboneParams& params, const Matrix& patches);

// Trunk + head over the flattened embedding, denormalized with stats.
Vector forecast_from_embedding(const BackboneParams& params, const Embedding& emb,
                               const NormStats& stats);
Vector forecast_from_embedding(const BackboneParams& params, const Embedding& emb,
                               const NormStats& stats, BackboneCache& cache);

// Gradient of a loss on the denormalized forecast, chained back to the
// embedding. Optional grads collect trunk/head parameter gradients (only
// needed during pretraining).
Embedding backward_to_embedding(const BackboneParams& params, const BackboneCache& cache,
                                const Vector& grad_forecast, Grads* trunk_grads = nullptr,
                                Grads* head_grads = nullptr);

// normalize -> patchify -> embed -> forecast.
Vector predict(const BackboneParams& params, const Vector& x);

struct PretrainConfig {
    std::size_t epochs = 20;
    double lr = 1e-3;
    std::uint64_t seed = 0;
};

struct PretrainReport {
    std::vector<double> epoch_mse;
};

// MSE pretraining over the pairs; freezes the backbone afterwards.
PretrainReport pretrain(BackboneParams& params, const std::vector<WindowPair>& pairs,
                        const PretrainConfig& config);

// TSCK persistence.
void save_backbone(const BackboneParams& params, const std::string& path);
BackboneParams load_backbone(const std::string& path);

}  // namespace timeraf
