#include "timeraf/kbase.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "timeraf/binio.hpp"

namespace timeraf {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'K', 'B'};
constexpr std::uint16_t kVersion = 1;

struct Candidate {
    const Series* series;
    std::size_t start;
};

// Non-overlapping window grid of one series: starts 0, sl, 2sl, ...
std::vector<std::size_t> window_grid(const Series& s, std::size_t sl) {
    std::vector<std::size_t> starts;
    for (std::size_t start = 0; start + sl <= s.values.size(); start += sl)
        starts.push_back(start);
    return starts;
}

KbEntry make_entry(const Series& s, std::size_t start, std::size_t sl) {
    KbEntry e;
    e.values.resize(sl);
    for (std::size_t i = 0; i < sl; ++i)
        e.values[i] = static_cast<double>(static_cast<float>(s.values[start + i]));
    e.domain = s.domain;
    e.dataset_id = s.dataset_id;
    e.channel_id = s.channel_id;
    e.start = start;
    return e;
}

// First k of a seeded Fisher-Yates shuffle; stable across standard libraries.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

void KnowledgeBase::rebuild_index() {
    domain_index.clear();
    for (std::size_t i = 0; i < entries.size(); ++i)
        domain_index[entries[i].domain].push_back(i);
}

KnowledgeBase build_kb(const std::vector<Series>& datasets, std::size_t sl,
                       std::size_t per_domain_quota, std::uint64_t seed) {
    if (per_domain_quota == 0) throw ConfigError("build_kb: quota must be >= 1");
    std::map<std::string, std::vector<Candidate>> by_domain;
    for (const auto& s : datasets) {
        if (s.values.size() < sl)
            throw ConfigError("build_kb: series " + s.dataset_id + "/" + s.channel_id +
                              " shorter than sl");
        for (std::size_t start : window_grid(s, sl))
            by_domain[s.domain].push_back(Candidate{&s, start});
    }
    KnowledgeBase kb;
    kb.sl = sl;
    std::mt19937_64 rng(seed);
    for (const auto& [domain, cands] : by_domain) {
        if (cands.size() < per_domain_quota) {
            std::ostringstream msg;
            msg << "build_kb: domain '" << domain << "' has only " << cands.size()
                << " non-overlapping windows, quota is " << per_domain_quota;
            throw ConfigError(msg.str());
        }
        for (std::size_t i : sample_without_replacement(cands.size(), per_domain_quota, rng))
            kb.entries.push_back(make_entry(*cands[i].series, cands[i].start, sl));
    }
    kb.rebuild_index();
    return kb;
}

KnowledgeBase build_kb_pooled(const std::vector<Series>& datasets, std::size_t sl,
                              std::size_t total_quota, std::uint64_t seed) {
    if (total_quota == 0) throw ConfigError("build_kb_pooled: quota must be >= 1");
    std::vector<Candidate> pool;
    for (const auto& s : datasets)
        for (std::size_t start : window_grid(s, sl)) pool.push_back(Candidate{&s, start});
    if (pool.size() < total_quota)
        throw ConfigError("build_kb_pooled: fewer windows than quota");
    KnowledgeBase kb;
    kb.sl = sl;
    std::mt19937_64 rng(seed);
    for (std::size_t i : sample_without_replacement(pool.size(), total_quota, rng))
        kb.entries.push_back(make_entry(*pool[i].series, pool[i].start, sl));
    kb.rebuild_index();
    return kb;
}

void save_kb(const KnowledgeBase& kb, const std::string& path) {
    BinWriter w(path);
    w.bytes(kMagic, 4);
    w.u16(kVersion);
    w.u32(static_cast<std::uint32_t>(kb.entries.size()));
    w.u32(static_cast<std::uint32_t>(kb.sl));
    for (const auto& e : kb.entries)
        for (double v : e.values) w.f32(static_cast<float>(v));
    nlohmann::json meta = nlohmann::json::array();
    for (const auto& e : kb.entries)
        meta.push_back({{"domain", e.domain},
                        {"dataset_id", e.dataset_id},
                        {"channel_id", e.channel_id},
                        {"start", e.start}});
    const std::string meta_str = meta.dump();
    w.u64(meta_str.size());
    w.str(meta_str);
    w.finish_with_checksum();
}

KnowledgeBase load_kb(const std::string& path) {
    BinReader r(path);
    const std::string magic = r.str(4);
    if (magic != std::string(kMagic, 4))
        throw FormatError(FormatError::Code::bad_magic, "not a TSKB file: " + path);
    const auto version = r.u16();
    if (version != kVersion)
        throw FormatError(FormatError::Code::bad_version,
                          "unsupported TSKB version " + std::to_string(version));
    const std::size_t n_kb = r.u32();
    const std::size_t sl = r.u32();
    KnowledgeBase kb;
    kb.sl = sl;
    kb.entries.resize(n_kb);
    for (auto& e : kb.entries) {
        e.values.resize(sl);
        for (auto& v : e.values) v = static_cast<double>(r.f32());
    }
    const std::size_t meta_len = r.u64();
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(r.str(meta_len));
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError("TSKB metadata parse error: " + std::string(e.what()));
    }
    if (meta.size() != n_kb) throw DataError("TSKB metadata entry count mismatch");
    for (std::size_t i = 0; i < n_kb; ++i) {
        kb.entries[i].domain = meta[i].at("domain").get<std::string>();
        kb.entries[i].dataset_id = meta[i].at("dataset_id").get<std::string>();
        kb.entries[i].channel_id = meta[i].at("channel_id").get<std::string>();
        kb.entries[i].start = meta[i].at("start").get<std::uint64_t>();
    }
    r.verify_checksum();
    kb.rebuild_index();
    return kb;
}

std::vector<std::size_t> eligible_candidates(const KnowledgeBase& kb,
                                             const std::string& query_dataset_id,
                                             bool training, std::size_t min_needed) {
    if (kb.entries.empty()) throw ConfigError("eligible_candidates: empty knowledge base");
    std::vector<std::size_t> out;
    out.reserve(kb.entries.size());
    for (std::size_t i = 0; i < kb.entries.size(); ++i) {
        if (training && kb.entries[i].dataset_id == query_dataset_id) continue;
        out.push_back(i);
    }
    if (out.size() < min_needed)
        throw ConfigError("eligible_candidates: only " + std::to_string(out.size()) +
                          " candidates remain after the leakage filter; grow the KB or "
                          "reduce k");
    return out;
}

KnowledgeBase subsample(const KnowledgeBase& kb, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ConfigError("subsample: fraction must be in (0, 1]");
    KnowledgeBase out;
    out.sl = kb.sl;
    std::mt19937_64 rng(seed);
    for (const auto& [domain, idx] : kb.domain_index) {
        const auto take = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(idx.size())));
        if (take == 0)
            throw ConfigError("subsample: fraction leaves domain '" + domain +
                              "' with no entries");
        for (std::size_t i : sample_without_replacement(idx.size(), take, rng))
            out.entries.push_back(kb.entries[idx[i]]);
    }
    out.rebuild_index();
    return out;
}

}  // namespace timeraf
