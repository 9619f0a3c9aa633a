#include "timeraf/harness.hpp"

namespace timeraf {

std::vector<WindowPair> collect_pairs(const std::vector<Series>& series,
                                      const SplitSpec& spec, int which, std::size_t sl,
                                      std::size_t fl, std::size_t stride) {
    std::vector<WindowPair> pairs;
    for (const auto& s : series) {
        const auto ranges = split(s.values.size(), spec);
        const IndexRange range = ranges[static_cast<std::size_t>(which)];
        auto w = windows_in_range(s, range, sl, fl, stride);
        for (auto& p : w) pairs.push_back(std::move(p));
    }
    return pairs;
}

CellOutcome run_cell(const BackboneParams& backbone, const KnowledgeBase& kb,
                     const std::vector<WindowPair>& train_pairs,
                     const std::vector<WindowPair>& eval_pairs, TrainConfig cfg) {
    CellOutcome out;
    if (kb.size() < cfg.k && cfg.fusion_policy != FusionPolicy::none) {
        out.skipped = true;
        out.reason = "KB smaller than k (" + std::to_string(kb.size()) + " < " +
                     std::to_string(cfg.k) + ")";
        return out;
    }
    Pipeline pipe = make_pipeline(backbone, cfg);
    if (cfg.fusion_policy != FusionPolicy::none) train(pipe, train_pairs, kb);
    out.mean_mse = evaluate(pipe, eval_pairs, kb).mean_mse;
    return out;
}

CellOutcome run_cell_seeds(const BackboneParams& backbone, const KnowledgeBase& kb,
                           const std::vector<WindowPair>& train_pairs,
                           const std::vector<WindowPair>& eval_pairs, TrainConfig cfg,
                           const std::vector<std::uint64_t>& seeds) {
    CellOutcome agg;
    double total = 0.0;
    for (std::uint64_t seed : seeds) {
        cfg.seed = seed;
        CellOutcome one = run_cell(backbone, kb, train_pairs, eval_pairs, cfg);
        if (one.skipped) return one;
        total += one.mean_mse;
    }
    agg.mean_mse = total / static_cast<double>(seeds.size());
    return agg;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.k = j.value("k", cfg.k);
    cfg.tau_m = j.value("tau_m", cfg.tau_m);
    cfg.tau_s = j.value("tau_s", cfg.tau_s);
    cfg.rho = j.value("rho", cfg.rho);
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.lr_retriever = j.value("lr_retriever", cfg.lr_retriever);
    cfg.lr_fusion = j.value("lr_fusion", cfg.lr_fusion);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.warmup_epochs = j.value("warmup_epochs", cfg.warmup_epochs);
    cfg.e = j.value("e", cfg.e);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("retrieval_policy"))
        cfg.retrieval_policy =
            retrieval_policy_from_string(j.at("retrieval_policy").get<std::string>());
    if (j.contains("fusion_policy"))
        cfg.fusion_policy = fusion_policy_from_string(j.at("fusion_policy").get<std::string>());
    cfg.validate();
    return cfg;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return {{"k", cfg.k},
            {"tau_m", cfg.tau_m},
            {"tau_s", cfg.tau_s},
            {"rho", cfg.rho},
            {"lambda", cfg.lambda},
            {"lr_retriever", cfg.lr_retriever},
            {"lr_fusion", cfg.lr_fusion},
            {"epochs", cfg.epochs},
            {"warmup_epochs", cfg.warmup_epochs},
            {"e", cfg.e},
            {"seed", cfg.seed},
            {"retrieval_policy", to_string(cfg.retrieval_policy)},
            {"fusion_policy", to_string(cfg.fusion_policy)}};
}

}  // namespace timeraf
