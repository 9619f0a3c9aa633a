#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "timeraf/tsdata.hpp"

namespace timeraf {

// One candidate sequence, stored raw (un-normalized). Values are quantized to
// f32 at build time so the in-memory KB matches its on-disk representation.
struct KbEntry {
    Vector values;  // length sl
    std::string domain;
    std::string dataset_id;
    std::string channel_id;
    std::uint64_t start = 0;
};

struct KnowledgeBase {
    std::vector<KbEntry> entries;
    std::size_t sl = 0;
    std::map<std::string, std::vector<std::size_t>> domain_index;

    std::size_t size() const { return entries.size(); }
    void rebuild_index();
};

// Domain-balanced KB: per-domain quota sampled without replacement from each
// series' non-overlapping window grid. Deterministic given the seed.
KnowledgeBase build_kb(const std::vector<Series>& datasets, std::size_t sl,
                       std::size_t per_domain_quota, std::uint64_t seed);

// Imbalanced variant: quota windows sampled uniformly from the pooled
// non-overlapping grid of all series (inherits corpus imbalance).
KnowledgeBase build_kb_pooled(const std::vector<Series>& datasets, std::size_t sl,
                              std::size_t total_quota, std::uint64_t seed);

// TSKB container: magic "TSKB", u16 version, u32 n_kb, u32 sl, n_kb rows of
// sl little-endian f32, length-prefixed JSON metadata, u64 FNV-1a checksum.
void save_kb(const KnowledgeBase& kb, const std::string& path);
KnowledgeBase load_kb(const std::string& path);

// Training mode excludes entries sharing the query's dataset_id (leakage
// guard); inference mode returns every index. Errors when fewer than
// min_needed remain.
std::vector<std::size_t> eligible_candidates(const KnowledgeBase& kb,
                                             const std::string& query_dataset_id,
                                             bool training, std::size_t min_needed = 1);

// Per-domain stratified subsample preserving the balance invariant.
KnowledgeBase subsample(const KnowledgeBase& kb, double fraction, std::uint64_t seed);

}  // namespace timeraf
