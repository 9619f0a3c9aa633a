#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include "test_support.hpp"
#include "timeraf/retriever.hpp"

using namespace timeraf;

namespace {

KnowledgeBase toy_kb(std::size_t n_entries, std::size_t sl, std::uint64_t seed) {
    KnowledgeBase kb;
    kb.sl = sl;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-2, 2);
    for (std::size_t i = 0; i < n_entries; ++i) {
        KbEntry e;
        e.values.resize(sl);
        for (auto& v : e.values) v = static_cast<float>(dist(rng));
        e.domain = i % 2 ? "B" : "A";
        e.dataset_id = "ds" + std::to_string(i % 4);
        e.channel_id = "v";
        e.start = i;
        kb.entries.push_back(std::move(e));
    }
    kb.rebuild_index();
    return kb;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("encoders produce e-dim embeddings and normalize their input") {
    std::mt19937_64 rng(1);
    auto r = make_retriever(16, 8, rng);
    Vector x = test::random_vector(16, rng, 3.0);
    auto q = encode_query(r, x);
    CHECK(q.size() == 8);

    // instance normalization makes the encoding shift/scale invariant
    Vector shifted(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = 4.0 * x[i] - 7.0;
    auto q2 = encode_query(r, shifted);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(q2[i] == doctest::Approx(q[i]).epsilon(1e-12));

    // the two encoders are independent nets
    auto c = encode_candidate(r, x);
    CHECK(c != q);
}

TEST_CASE("score_all equals brute-force dot products in eligible order") {
    std::mt19937_64 rng(2);
    auto kb = toy_kb(12, 16, 3);
    auto r = make_retriever(16, 8, rng);
    Vector x = test::random_vector(16, rng);
    auto q = encode_query(r, x);

    std::vector<std::size_t> eligible{0, 3, 5, 11};
    auto scores = score_all(r, x, kb, eligible);
    REQUIRE(scores.size() == eligible.size());
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        auto c = encode_candidate(r, kb.entries[eligible[i]].values);
        CHECK(scores[i] == doctest::Approx(dot(q, c)).epsilon(1e-12));
    }
}

TEST_CASE("top_k against a brute-force oracle, ties by lower index") {
    Vector s{0.1, 0.9, 0.5, 0.9, -1.0, 0.5};
    auto idx = top_k(s, 3);
    CHECK(idx == std::vector<std::size_t>{1, 3, 2});

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        Vector scores = test::random_vector(20, rng);
        for (std::size_t k : {1ul, 5ul, 20ul}) {
            auto got = top_k(scores, k);
            std::vector<std::size_t> all(scores.size());
            std::iota(all.begin(), all.end(), 0);
            std::stable_sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) {
                return scores[a] > scores[b];
            });
            all.resize(k);
            CHECK(got == all);
        }
    }
    CHECK_THROWS_AS(top_k(s, 7), ConfigError);
}

TEST_CASE("target_distribution analytic case") {
    // metric = -MSE; two candidates with mse 0.1 and 0.2, tau_m = 0.1
    auto p = target_distribution({-0.1, -0.2}, 0.1);
    const double z = 1.0 + std::exp(-1.0);
    CHECK(p[0] == doctest::Approx(1.0 / z).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-12));
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("retrieval_loss value, zero at the fixed point, and analytic gradient") {
    Vector scores{2.0, 0.0, -1.0};
    auto target = softmax(scores, 1.0);
    auto at_fixed_point = retrieval_loss(scores, target, 1.0);
    CHECK(at_fixed_point.loss == doctest::Approx(0.0).epsilon(1e-12));
    for (double g : at_fixed_point.grad_scores) CHECK(std::abs(g) <= 1e-12);

    Vector p{0.7, 0.2, 0.1};
    for (double tau_s : {1.0, 0.5, 2.0}) {
        auto rl = retrieval_loss(scores, p, tau_s);
        CHECK(rl.loss == doctest::Approx(kl_divergence(p, softmax(scores, tau_s))).epsilon(1e-12));
        test::check_input_gradients(scores, rl.grad_scores, [&](const Vector& s) {
            return retrieval_loss(s, p, tau_s).loss;
        });
        // gradients over the softmax simplex sum to zero
        double sum = 0;
        for (double g : rl.grad_scores) sum += g;
        CHECK(std::abs(sum) <= 1e-12);
    }
}

TEST_CASE("retrieval loss gradient chains through both encoders") {
    std::mt19937_64 rng(5);
    const std::size_t sl = 8, e = 4;
    auto kb = toy_kb(5, sl, 6);
    auto r = make_retriever(sl, e, rng);
    Vector x = test::random_vector(sl, rng);
    std::vector<std::size_t> eligible{0, 1, 2, 3, 4};
    Vector p{0.4, 0.3, 0.1, 0.1, 0.1};
    const double tau_s = 0.7;

    auto loss_of = [&](const RetrieverParams& probe) {
        return retrieval_loss(score_all(probe, x, kb, eligible), p, tau_s).loss;
    };

    // analytic gradient: d loss / d q = sum_i ds_i c_i, d loss / d c_i = ds_i q
    auto [xn, stats] = instance_normalize(x);
    ActivationCache q_cache;
    auto q = mlp_forward(r.query_encoder, xn, q_cache);
    std::vector<ActivationCache> c_caches(eligible.size());
    std::vector<Vector> c_embs;
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        auto [cn, cs] = instance_normalize(kb.entries[eligible[i]].values);
        c_embs.push_back(mlp_forward(r.cand_encoder, cn, c_caches[i]));
    }
    Vector scores(eligible.size());
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = dot(q, c_embs[i]);
    auto rl = retrieval_loss(scores, p, tau_s);

    Grads q_grads = Grads::like(r.query_encoder), c_grads = Grads::like(r.cand_encoder);
    Vector grad_q(e, 0.0);
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        Vector grad_c(e);
        for (std::size_t j = 0; j < e; ++j) {
            grad_q[j] += rl.grad_scores[i] * c_embs[i][j];
            grad_c[j] = rl.grad_scores[i] * q[j];
        }
        mlp_backward(r.cand_encoder, c_caches[i], grad_c, &c_grads);
    }
    mlp_backward(r.query_encoder, q_cache, grad_q, &q_grads);

    RetrieverParams probe = r;
    test::check_param_gradients(r.query_encoder, q_grads, [&](const MlpParams& qe) {
        probe.query_encoder = qe;
        return loss_of(probe);
    });
    probe = r;
    test::check_param_gradients(r.cand_encoder, c_grads, [&](const MlpParams& ce) {
        probe.cand_encoder = ce;
        return loss_of(probe);
    });
}

TEST_CASE("retrieve returns k distinct KB indices matching the oracle") {
    std::mt19937_64 rng(7);
    auto kb = toy_kb(30, 16, 8);
    auto r = make_retriever(16, 8, rng);
    Vector x = test::random_vector(16, rng);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < kb.size(); ++i)
        if (i % 3 != 0) eligible.push_back(i);

    auto res = retrieve(r, x, kb, eligible, 8);
    REQUIRE(res.indices.size() == 8);
    auto scores = score_all(r, x, kb, eligible);
    auto best = top_k(scores, 8);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(res.indices[i] == eligible[best[i]]);
        CHECK(res.scores[i] == scores[best[i]]);
        CHECK_FALSE(res.augmented[i]);
    }
    std::set<std::size_t> uniq(res.indices.begin(), res.indices.end());
    CHECK(uniq.size() == 8);
}

TEST_CASE("augment replacement rate, distinctness and score consistency") {
    std::mt19937_64 rng(9);
    auto kb = toy_kb(64, 16, 10);
    auto r = make_retriever(16, 8, rng);
    Vector x = test::random_vector(16, rng);
    std::vector<std::size_t> eligible(kb.size());
    std::iota(eligible.begin(), eligible.end(), 0);
    auto base = retrieve(r, x, kb, eligible, 8);

    std::mt19937_64 aug_rng(11);
    std::size_t replaced = 0, total = 0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
        auto res = base;
        augment(res, r, x, kb, eligible, 0.3, aug_rng);
        std::set<std::size_t> uniq(res.indices.begin(), res.indices.end());
        CHECK(uniq.size() == res.indices.size());
        for (std::size_t i = 0; i < res.indices.size(); ++i) {
            ++total;
            if (res.augmented[i]) {
                ++replaced;
                CHECK(res.indices[i] != base.indices[i]);
            } else {
                CHECK(res.indices[i] == base.indices[i]);
            }
            // scores always match a fresh encoding
            auto c = encode_candidate(r, kb.entries[res.indices[i]].values);
            auto q = encode_query(r, x);
            CHECK(res.scores[i] == doctest::Approx(dot(q, c)).epsilon(1e-12));
        }
    }
    const double rate = static_cast<double>(replaced) / static_cast<double>(total);
    CHECK(rate == doctest::Approx(0.3).epsilon(0.07));

    // rho = 0 is a no-op
    auto res0 = base;
    augment(res0, r, x, kb, eligible, 0.0, aug_rng);
    CHECK(res0.indices == base.indices);

    // eligible pool no larger than k: nothing to swap in
    std::vector<std::size_t> tight(eligible.begin(), eligible.begin() + 8);
    auto res_tight = retrieve(r, x, kb, tight, 8);
    auto before = res_tight.indices;
    augment(res_tight, r, x, kb, tight, 1.0, aug_rng);
    CHECK(res_tight.indices == before);
}

TEST_CASE("retriever checkpoint round trip preserves hash") {
    std::mt19937_64 rng(12);
    auto r = make_retriever(16, 8, rng);
    const auto path = temp_path("retr_rt.tsck");
    save_retriever(r, path);
    auto loaded = load_retriever(path);
    CHECK(loaded.hash() == r.hash());
    CHECK(loaded.sl == r.sl);
    CHECK(loaded.e == r.e);
}
