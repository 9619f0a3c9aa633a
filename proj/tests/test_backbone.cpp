#include <doctest.h>

#include <filesystem>

#include "test_support.hpp"
#include "timeraf/backbone.hpp"
#include "timeraf/synth.hpp"

using namespace timeraf;

namespace {

BackboneDims tiny_dims() { return BackboneDims{16, 4, 4, 3}; }  // n=4, nd=12

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("embed_patches shape, zero case and row independence") {
    std::mt19937_64 rng(1);
    BackboneDims dims{512, 96, 64, 16};
    auto b = make_backbone(dims, rng);
    Matrix patches(8, 64);
    auto emb = embed_patches(b, patches);
    CHECK(emb.rows == 8);
    CHECK(emb.cols == 16);
    // zero input through a zero-bias linear projection stays zero
    for (double v : emb.data) CHECK(v == 0.0);

    std::uniform_real_distribution<double> dist(-1, 1);
    for (auto& v : patches.data) v = dist(rng);
    auto e1 = embed_patches(b, patches);
    Matrix swapped = patches;
    auto r2 = patches.row(2), r5 = patches.row(5);
    swapped.set_row(2, r5);
    swapped.set_row(5, r2);
    auto e2 = embed_patches(b, swapped);
    CHECK(e2.row(2) == e1.row(5));
    CHECK(e2.row(5) == e1.row(2));
    CHECK(e2.row(0) == e1.row(0));
}

TEST_CASE("forecast length and zero-embedding mean forecast") {
    std::mt19937_64 rng(2);
    BackboneDims dims{512, 96, 64, 16};
    auto b = make_backbone(dims, rng);  // head starts zeroed
    Embedding emb(8, 16);
    auto y = forecast_from_embedding(b, emb, NormStats{3.5, 2.0});
    CHECK(y.size() == 96);
    for (double v : y) CHECK(v == doctest::Approx(3.5));
}

TEST_CASE("constant input predicts that constant at init") {
    std::mt19937_64 rng(3);
    auto b = make_backbone(tiny_dims(), rng);
    Vector x(16, 7.25);
    auto y = predict(b, x);
    for (double v : y) CHECK(v == doctest::Approx(7.25));
}

TEST_CASE("predict is the explicit composition and deterministic") {
    std::mt19937_64 rng(4);
    auto dims = tiny_dims();
    auto b = make_backbone(dims, rng);
    // give the head nonzero weights so the test is not vacuous
    std::uniform_real_distribution<double> dist(-0.3, 0.3);
    for (auto& v : b.head.layers[0].weight.data) v = dist(rng);

    Vector x = test::random_vector(16, rng, 5.0);
    auto y1 = predict(b, x);
    auto y2 = predict(b, x);
    CHECK(y1 == y2);

    auto [xn, stats] = instance_normalize(x);
    auto patches = patchify(xn, dims.patch_len, dims.patch_len);
    auto emb = embed_patches(b, patches);
    auto composed = forecast_from_embedding(b, emb, stats);
    CHECK(y1 == composed);
}

TEST_CASE("gradient of MSE wrt embedding matches finite differences") {
    for (std::uint64_t seed : {31, 32, 33}) {
        std::mt19937_64 rng(seed);
        auto dims = tiny_dims();
        auto b = make_backbone(dims, rng);
        std::uniform_real_distribution<double> dist(-0.4, 0.4);
        for (auto& v : b.head.layers[0].weight.data) v = dist(rng);

        Embedding emb(dims.n(), dims.d);
        for (auto& v : emb.data) v = dist(rng);
        Vector target = test::random_vector(dims.fl, rng);
        NormStats stats{0.7, 1.3};

        BackboneCache cache;
        auto y = forecast_from_embedding(b, emb, stats, cache);
        Vector grad_y(y.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            grad_y[i] = 2.0 / static_cast<double>(y.size()) * (y[i] - target[i]);
        auto grad_emb = backward_to_embedding(b, cache, grad_y);

        test::check_input_gradients(emb.data, grad_emb.data, [&](const Vector& flat) {
            Embedding probe(dims.n(), dims.d);
            probe.data = flat;
            return mse(forecast_from_embedding(b, probe, stats), target);
        });
    }
}

TEST_CASE("pretraining gradients for trunk and head match finite differences") {
    std::mt19937_64 rng(41);
    auto dims = tiny_dims();
    auto b = make_backbone(dims, rng);
    std::uniform_real_distribution<double> dist(-0.4, 0.4);
    for (auto& v : b.head.layers[0].weight.data) v = dist(rng);

    Embedding emb(dims.n(), dims.d);
    for (auto& v : emb.data) v = dist(rng);
    Vector target = test::random_vector(dims.fl, rng);
    NormStats stats{0.0, 1.0};

    BackboneCache cache;
    auto y = forecast_from_embedding(b, emb, stats, cache);
    Vector grad_y(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        grad_y[i] = 2.0 / static_cast<double>(y.size()) * (y[i] - target[i]);
    Grads trunk_g = Grads::like(b.trunk), head_g = Grads::like(b.head);
    backward_to_embedding(b, cache, grad_y, &trunk_g, &head_g);

    auto loss_with = [&](const BackboneParams& probe) {
        return mse(forecast_from_embedding(probe, emb, stats), target);
    };
    BackboneParams probe = b;
    test::check_param_gradients(
        b.trunk, trunk_g,
        [&](const MlpParams& t) {
            probe.trunk = t;
            return loss_with(probe);
        });
    probe = b;
    test::check_param_gradients(
        b.head, head_g,
        [&](const MlpParams& h) {
            probe.head = h;
            return loss_with(probe);
        });
}

TEST_CASE("pretrain reduces loss, freezes, and beats the mean predictor") {
    SyntheticSpec spec = default_synthetic_spec();
    spec.domains.pop_back();  // A and B only
    spec.series_per_domain = 2;
    spec.length = 400;
    auto series = gen_series(spec, 5);

    auto dims = BackboneDims{64, 16, 8, 8};
    std::vector<WindowPair> pairs, holdout;
    for (const auto& s : series) {
        auto w = sliding_windows(s, dims.sl, dims.fl, 16);
        for (std::size_t i = 0; i < w.size(); ++i)
            (i % 5 == 4 ? holdout : pairs).push_back(w[i]);
    }
    REQUIRE(!pairs.empty());

    std::mt19937_64 rng(6);
    auto b = make_backbone(dims, rng);
    auto mean_loss = [&](const BackboneParams& p) {
        double total = 0;
        for (const auto& pair : pairs) total += mse(predict(p, pair.x), pair.y);
        return total / static_cast<double>(pairs.size());
    };
    const double init_mse = mean_loss(b);
    auto report = pretrain(b, pairs, PretrainConfig{8, 1e-3, 6});
    CHECK(report.epoch_mse.back() < init_mse);
    CHECK(b.frozen());

    // freeze contract
    Grads g = Grads::like(b.head);
    g.accum_count = 1;
    auto st = OptimizerState::sgd(0.1);
    CHECK_THROWS_AS(optimizer_step(b.head, g, st), ConfigError);

    // beats the mean predictor on held-out same-domain windows
    double model = 0, baseline = 0;
    for (const auto& p : holdout) {
        model += mse(predict(b, p.x), p.y);
        Vector mean_pred(p.y.size(), p.stats.mean);
        baseline += mse(mean_pred, p.y);
    }
    CHECK(model < baseline);
}

TEST_CASE("pretrain loss curve is non-increasing on a noiseless linear trend") {
    Series s;
    s.values.resize(600);
    for (std::size_t i = 0; i < s.values.size(); ++i)
        s.values[i] = 0.01 * static_cast<double>(i);
    auto pairs = sliding_windows(s, 64, 16, 8);
    std::mt19937_64 rng(7);
    auto b = make_backbone(BackboneDims{64, 16, 8, 8}, rng);
    auto report = pretrain(b, pairs, PretrainConfig{6, 1e-3, 7});
    for (std::size_t e = 1; e < report.epoch_mse.size(); ++e)
        CHECK(report.epoch_mse[e] <= report.epoch_mse[e - 1] + 1e-6);
}

TEST_CASE("pretrain rejects empty input and double pretraining") {
    std::mt19937_64 rng(8);
    auto b = make_backbone(tiny_dims(), rng);
    CHECK_THROWS_AS(pretrain(b, {}, PretrainConfig{}), ConfigError);
    Series s;
    s.values.assign(64, 1.0);
    for (std::size_t i = 0; i < 64; ++i) s.values[i] = std::sin(0.3 * i);
    auto pairs = sliding_windows(s, 16, 4, 4);
    pretrain(b, pairs, PretrainConfig{1, 1e-3, 0});
    CHECK_THROWS_AS(pretrain(b, pairs, PretrainConfig{1, 1e-3, 0}), ConfigError);
}

TEST_CASE("backbone checkpoint round trip preserves hash") {
    std::mt19937_64 rng(9);
    auto b = make_backbone(tiny_dims(), rng);
    b.freeze();
    const auto path = temp_path("backbone_rt.tsck");
    save_backbone(b, path);
    auto loaded = load_backbone(path);
    CHECK(loaded.hash() == b.hash());
    CHECK(loaded.frozen());
    CHECK(loaded.dims.sl == b.dims.sl);
}
