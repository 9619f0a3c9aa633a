#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "timeraf/synth.hpp"
#include "timeraf/trainer.hpp"

namespace timeraf {

// Window-pair assembly over manifest datasets, honoring split boundaries
// (training windows never straddle a split edge).
std::vector<WindowPair> collect_pairs(const std::vector<Series>& series,
                                      const SplitSpec& spec, int which /*0=train,1=val,2=test*/,
                                      std::size_t sl, std::size_t fl, std::size_t stride);

// Trains one pipeline on train_pairs and returns its eval MSE. The
// fusion_policy none cell bypasses training and scores the bare backbone.
struct CellOutcome {
    double mean_mse = 0.0;
    bool skipped = false;
    std::string reason;
};

CellOutcome run_cell(const BackboneParams& backbone, const KnowledgeBase& kb,
                     const std::vector<WindowPair>& train_pairs,
                     const std::vector<WindowPair>& eval_pairs, TrainConfig cfg);

// Mean over per-seed cells (cfg.seed replaced by each entry).
CellOutcome run_cell_seeds(const BackboneParams& backbone, const KnowledgeBase& kb,
                           const std::vector<WindowPair>& train_pairs,
                           const std::vector<WindowPair>& eval_pairs, TrainConfig cfg,
                           const std::vector<std::uint64_t>& seeds);

// TrainConfig <-> JSON (used by CLI configs and artifact echoes).
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);

}  // namespace timeraf
