#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "test_support.hpp"
#include "timeraf/kbase.hpp"
#include "timeraf/synth.hpp"

using namespace timeraf;

namespace {

std::vector<Series> three_domain_corpus(std::size_t length = 4000) {
    SyntheticSpec spec = default_synthetic_spec();
    spec.series_per_domain = 4;
    spec.length = length;
    return gen_series(spec, 42);
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// Brute-force interval intersection over same-channel entries.
std::size_t count_overlaps(const KnowledgeBase& kb) {
    std::size_t overlaps = 0;
    for (std::size_t i = 0; i < kb.size(); ++i)
        for (std::size_t j = i + 1; j < kb.size(); ++j) {
            const auto& a = kb.entries[i];
            const auto& b = kb.entries[j];
            if (a.dataset_id != b.dataset_id || a.channel_id != b.channel_id) continue;
            const auto a_end = a.start + kb.sl, b_end = b.start + kb.sl;
            if (a.start < b_end && b.start < a_end) ++overlaps;
        }
    return overlaps;
}

}  // namespace

TEST_CASE("build_kb balance, overlap and determinism") {
    auto corpus = three_domain_corpus();
    auto kb = build_kb(corpus, 64, 100, 7);
    CHECK(kb.size() == 300);
    for (const auto& [domain, idx] : kb.domain_index) CHECK(idx.size() == 100);
    CHECK(count_overlaps(kb) == 0);

    auto kb2 = build_kb(corpus, 64, 100, 7);
    const auto p1 = temp_path("kb_det1.tskb"), p2 = temp_path("kb_det2.tskb");
    save_kb(kb, p1);
    save_kb(kb2, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
}

TEST_CASE("build_kb exhaustion selects every window regardless of seed") {
    Series s;
    s.values.assign(64 * 5, 1.0);
    s.dataset_id = "only";
    s.channel_id = "v";
    s.domain = "D";
    auto grab = [&](std::uint64_t seed) {
        auto kb = build_kb({s}, 64, 5, seed);
        std::set<std::size_t> starts;
        for (const auto& e : kb.entries) starts.insert(e.start);
        return starts;
    };
    CHECK(grab(1) == grab(99));
    CHECK(grab(1).size() == 5);
}

TEST_CASE("build_kb reports shortfalls") {
    Series s;
    s.values.assign(64 * 2, 1.0);
    s.dataset_id = "tiny";
    s.channel_id = "v";
    s.domain = "D";
    CHECK_THROWS_AS(build_kb({s}, 64, 5, 0), ConfigError);
    Series too_short = s;
    too_short.values.resize(32);
    CHECK_THROWS_AS(build_kb({too_short}, 64, 1, 0), ConfigError);
}

TEST_CASE("TSKB round trip is bit-identical") {
    auto kb = build_kb(three_domain_corpus(), 64, 100, 3);
    const auto p1 = temp_path("kb_rt1.tskb"), p2 = temp_path("kb_rt2.tskb");
    save_kb(kb, p1);
    auto loaded = load_kb(p1);
    CHECK(loaded.size() == kb.size());
    CHECK(loaded.sl == kb.sl);
    for (std::size_t i = 0; i < kb.size(); ++i) {
        CHECK(loaded.entries[i].values == kb.entries[i].values);
        CHECK(loaded.entries[i].dataset_id == kb.entries[i].dataset_id);
        CHECK(loaded.entries[i].start == kb.entries[i].start);
    }
    save_kb(loaded, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
}

TEST_CASE("empty KB round-trips") {
    KnowledgeBase kb;
    kb.sl = 64;
    const auto p = temp_path("kb_empty.tskb");
    save_kb(kb, p);
    auto loaded = load_kb(p);
    CHECK(loaded.size() == 0);
    CHECK(loaded.sl == 64);
}

TEST_CASE("corrupted KB files are rejected with distinct codes") {
    auto kb = build_kb(three_domain_corpus(), 64, 20, 5);
    const auto p = temp_path("kb_corrupt.tskb");
    save_kb(kb, p);

    // truncation by one byte
    {
        std::ifstream in(p, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        const auto t = temp_path("kb_trunc.tskb");
        std::ofstream out(t, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 1));
        out.close();
        try {
            load_kb(t);
            FAIL("expected truncation error");
        } catch (const FormatError& e) {
            CHECK(e.code == FormatError::Code::truncated);
        }
    }
    // bit flip in the payload -> checksum failure
    {
        std::ifstream in(p, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        bytes[bytes.size() / 2] ^= 0x01;
        const auto t = temp_path("kb_flip.tskb");
        std::ofstream out(t, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        try {
            load_kb(t);
            FAIL("expected checksum error");
        } catch (const FormatError& e) {
            CHECK(e.code == FormatError::Code::bad_checksum);
        }
    }
    // wrong magic
    {
        std::ifstream in(p, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        bytes[0] = 'X';
        const auto t = temp_path("kb_magic.tskb");
        std::ofstream out(t, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        try {
            load_kb(t);
            FAIL("expected magic error");
        } catch (const FormatError& e) {
            CHECK(e.code == FormatError::Code::bad_magic);
        }
    }
    // wrong version
    {
        std::ifstream in(p, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        bytes[4] = 0x7f;
        const auto t = temp_path("kb_version.tskb");
        std::ofstream out(t, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        try {
            load_kb(t);
            FAIL("expected version error");
        } catch (const FormatError& e) {
            CHECK(e.code == FormatError::Code::bad_version);
        }
    }
}

TEST_CASE("eligible_candidates leakage guard") {
    auto kb = build_kb(three_domain_corpus(), 64, 30, 11);
    const std::string query_ds = kb.entries.front().dataset_id;
    auto train_set = eligible_candidates(kb, query_ds, true);
    for (std::size_t i : train_set) CHECK(kb.entries[i].dataset_id != query_ds);
    auto infer_set = eligible_candidates(kb, query_ds, false);
    CHECK(infer_set.size() == kb.size());

    // Exhaustive property over 1000 random queries.
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<std::size_t> pick(0, kb.size() - 1);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::string& ds = kb.entries[pick(rng)].dataset_id;
        for (std::size_t i : eligible_candidates(kb, ds, true))
            CHECK(kb.entries[i].dataset_id != ds);
    }
}

TEST_CASE("eligible_candidates errors when the filter starves the pool") {
    Series a, b;
    a.values.assign(128, 1.0);
    a.dataset_id = "a";
    a.channel_id = "v";
    a.domain = "D";
    b = a;
    b.dataset_id = "b";
    auto kb = build_kb({a, b}, 64, 4, 0);
    CHECK_THROWS_AS(eligible_candidates(kb, "a", true, 3), ConfigError);
    KnowledgeBase empty;
    CHECK_THROWS_AS(eligible_candidates(empty, "a", false), ConfigError);
}

TEST_CASE("subsample preserves stratified balance") {
    auto kb = build_kb(three_domain_corpus(), 64, 100, 21);
    auto full = subsample(kb, 1.0, 1);
    CHECK(full.size() == kb.size());
    auto half = subsample(kb, 0.5, 1);
    for (const auto& [domain, idx] : half.domain_index) CHECK(idx.size() == 50);

    for (double frac : {1.0, 0.5, 0.3, 0.1, 0.01}) {
        auto sub = subsample(kb, frac, 2);
        std::size_t mn = kb.size(), mx = 0;
        for (const auto& [domain, idx] : sub.domain_index) {
            mn = std::min(mn, idx.size());
            mx = std::max(mx, idx.size());
        }
        CHECK(mx - mn <= 1);
    }
    CHECK_THROWS_AS(subsample(kb, 0.001, 0), ConfigError);
    CHECK_THROWS_AS(subsample(kb, 0.0, 0), ConfigError);
    CHECK_THROWS_AS(subsample(kb, 1.5, 0), ConfigError);
}
