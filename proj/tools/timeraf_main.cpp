// timeraf: operator CLI for synthetic data generation, KB building, backbone
// pretraining, retriever+fusion training, evaluation, ablations, and
// retrieval case-study export.
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "timeraf/harness.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using namespace timeraf;
using nlohmann::json;

json artifact_header(std::uint64_t seed, const json& config) {
    return {{"version", kVersion}, {"seed", seed}, {"config", config}};
}

void write_json(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << doc.dump(2) << "\n";
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ConfigError("JSON parse error in " + path + ": " + e.what());
    }
    return doc;
}

TrainConfig load_train_config(const std::string& path) {
    if (path.empty()) return TrainConfig{};
    return train_config_from_json(read_json(path));
}

std::vector<Series> filter_series(std::vector<Series> all,
                                  const std::vector<std::string>& exclude_domains,
                                  const std::vector<std::string>& only_datasets) {
    std::vector<Series> out;
    for (auto& s : all) {
        bool drop = false;
        for (const auto& d : exclude_domains)
            if (s.domain == d) drop = true;
        if (!only_datasets.empty()) {
            bool keep = false;
            for (const auto& id : only_datasets)
                if (s.dataset_id == id) keep = true;
            drop = drop || !keep;
        }
        if (!drop) out.push_back(std::move(s));
    }
    return out;
}

// ---- subcommand bodies ----

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir,
                 std::uint64_t seed, std::size_t series_per_domain, std::size_t length) {
    SyntheticSpec spec =
        spec_path.empty() ? default_synthetic_spec() : synthetic_spec_from_json(spec_path);
    if (series_per_domain) spec.series_per_domain = series_per_domain;
    if (length) spec.length = length;
    auto series = gen_series(spec, seed);
    write_dataset(out_dir, series);
    json cfg{{"series_per_domain", spec.series_per_domain}, {"length", spec.length}};
    write_json(out_dir + "/gen_info.json", artifact_header(seed, cfg));
    std::cout << "wrote " << series.size() << " series to " << out_dir << "\n";
    return 0;
}

int cmd_build_kb(const std::string& manifest, const std::string& out_path, std::size_t sl,
                 std::size_t quota, std::uint64_t seed, const std::string& mode,
                 const std::vector<std::string>& exclude_domains,
                 const std::vector<std::string>& only_datasets) {
    auto series = filter_series(load_manifest(manifest), exclude_domains, only_datasets);
    KnowledgeBase kb;
    if (mode == "balanced")
        kb = build_kb(series, sl, quota, seed);
    else if (mode == "pooled")
        kb = build_kb_pooled(series, sl, quota, seed);
    else
        throw ConfigError("build-kb: mode must be balanced or pooled");
    save_kb(kb, out_path);
    json cfg{{"manifest", manifest}, {"sl", sl}, {"quota", quota}, {"mode", mode}};
    write_json(out_path + ".json", artifact_header(seed, cfg));
    std::cout << "KB with " << kb.size() << " entries -> " << out_path << "\n";
    return 0;
}

int cmd_pretrain(const std::string& manifest, const std::string& out_path, std::size_t sl,
                 std::size_t fl, std::size_t patch_len, std::size_t d, std::size_t epochs,
                 double lr, std::uint64_t seed, const std::vector<std::string>& exclude_domains,
                 double train_frac) {
    auto series = filter_series(load_manifest(manifest), exclude_domains, {});
    if (series.empty()) throw DataError("pretrain: no series after filters");
    SplitSpec split_spec{train_frac, 0.0, 1.0 - train_frac};
    auto pairs = collect_pairs(series, split_spec, 0, sl, fl, fl);
    BackboneDims dims{sl, fl, patch_len, d};
    std::mt19937_64 rng(seed);
    BackboneParams backbone = make_backbone(dims, rng);
    PretrainConfig cfg{epochs, lr, seed};
    auto report = pretrain(backbone, pairs, cfg);
    save_backbone(backbone, out_path);
    json info{{"epoch_mse", report.epoch_mse},
              {"pairs", pairs.size()},
              {"dims", {{"sl", sl}, {"fl", fl}, {"patch_len", patch_len}, {"d", d}}},
              {"epochs", epochs},
              {"lr", lr}};
    write_json(out_path + ".json", artifact_header(seed, info));
    std::cout << "pretrained on " << pairs.size() << " pairs; final epoch MSE "
              << report.epoch_mse.back() << " -> " << out_path << "\n";
    return 0;
}

int cmd_train(const std::string& manifest, const std::string& kb_path,
              const std::string& backbone_path, const std::string& config_path,
              const std::string& out_dir, const std::vector<std::string>& exclude_domains,
              double train_frac) {
    TrainConfig cfg = load_train_config(config_path);
    BackboneParams backbone = load_backbone(backbone_path);
    KnowledgeBase kb = load_kb(kb_path);
    auto series = filter_series(load_manifest(manifest), exclude_domains, {});
    SplitSpec split_spec{train_frac, 0.0, 1.0 - train_frac};
    auto pairs =
        collect_pairs(series, split_spec, 0, backbone.dims.sl, backbone.dims.fl,
                      backbone.dims.fl);
    if (pairs.empty()) throw DataError("train: no training pairs");

    std::filesystem::create_directories(out_dir);
    Pipeline pipe = make_pipeline(backbone, cfg);
    TrainingLog log = train(pipe, pairs, kb);
    save_retriever(pipe.retriever, out_dir + "/retriever.tsck");
    save_fusion(pipe.fusion, out_dir + "/fusion.tsck");
    write_training_log_csv(log, out_dir + "/training_log.csv");
    json info = artifact_header(cfg.seed, train_config_to_json(cfg));
    info["epoch_l_pred"] = log.epoch_l_pred;
    info["steps"] = log.steps.size();
    info["skipped"] = log.skipped;
    write_json(out_dir + "/train_info.json", info);
    std::cout << "trained " << log.steps.size() << " steps; final epoch L_Pred "
              << (log.epoch_l_pred.empty() ? 0.0 : log.epoch_l_pred.back()) << " -> "
              << out_dir << "\n";
    return 0;
}

Pipeline load_pipeline(const BackboneParams& backbone, const TrainConfig& cfg,
                       const std::string& retriever_path, const std::string& fusion_path) {
    Pipeline pipe = make_pipeline(backbone, cfg);
    if (!retriever_path.empty()) pipe.retriever = load_retriever(retriever_path);
    if (!fusion_path.empty()) pipe.fusion = load_fusion(fusion_path);
    return pipe;
}

int cmd_eval(const std::string& manifest, const std::string& kb_path,
             const std::string& backbone_path, const std::string& retriever_path,
             const std::string& fusion_path, const std::string& config_path,
             const std::string& out_path, const std::vector<std::string>& only_datasets,
             double test_frac, std::size_t stride) {
    TrainConfig cfg = load_train_config(config_path);
    BackboneParams backbone = load_backbone(backbone_path);
    auto series = filter_series(load_manifest(manifest), {}, only_datasets);
    SplitSpec split_spec{1.0 - test_frac, 0.0, test_frac};
    const std::size_t eval_stride = stride ? stride : backbone.dims.fl;
    auto pairs = collect_pairs(series, split_spec, 2, backbone.dims.sl, backbone.dims.fl,
                               eval_stride);
    if (pairs.empty()) throw DataError("eval: zero windows");

    EvalReport report;
    if (cfg.fusion_policy == FusionPolicy::none || kb_path.empty()) {
        report = evaluate_backbone(backbone, pairs);
    } else {
        KnowledgeBase kb = load_kb(kb_path);
        Pipeline pipe = load_pipeline(backbone, cfg, retriever_path, fusion_path);
        report = evaluate(pipe, pairs, kb);
    }
    json doc = artifact_header(cfg.seed, train_config_to_json(cfg));
    doc["report"] = json::parse(eval_report_to_json(report));
    write_json(out_path, doc);
    std::cout << "mean MSE " << report.mean_mse << " over " << report.n_windows
              << " windows -> " << out_path << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir) {
    const json cfg = read_json(config_path);
    BackboneParams backbone = load_backbone(cfg.at("backbone").get<std::string>());
    KnowledgeBase kb = load_kb(cfg.at("kb").get<std::string>());
    auto series = load_manifest(cfg.at("manifest").get<std::string>());
    TrainConfig base = cfg.contains("train") ? train_config_from_json(cfg.at("train"))
                                             : TrainConfig{};
    std::vector<std::uint64_t> seeds =
        cfg.value("seeds", std::vector<std::uint64_t>{0, 1, 2});

    const auto eval_ids = cfg.value("eval_datasets", std::vector<std::string>{});
    const double train_frac = cfg.value("train_frac", 0.7);
    const double test_frac = cfg.value("test_frac", 0.3);
    SplitSpec train_split{train_frac, 0.0, 1.0 - train_frac};
    SplitSpec eval_split{1.0 - test_frac, 0.0, test_frac};

    std::vector<Series> train_series, eval_series;
    for (const auto& s : series) {
        const bool is_eval =
            std::find(eval_ids.begin(), eval_ids.end(), s.dataset_id) != eval_ids.end();
        (is_eval ? eval_series : train_series).push_back(s);
    }
    auto train_pairs = collect_pairs(train_series, train_split, 0, backbone.dims.sl,
                                     backbone.dims.fl, backbone.dims.fl);
    auto eval_pairs = collect_pairs(eval_series, eval_split, 2, backbone.dims.sl,
                                    backbone.dims.fl, backbone.dims.fl);
    if (eval_pairs.empty()) throw DataError("ablate: zero eval windows");

    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir + "/ablation.csv");
    csv << "axis,cell,mean_mse,skipped,reason\n";
    json rows = json::array();
    auto emit = [&](const std::string& axis, const std::string& cell,
                    const CellOutcome& out) {
        csv << axis << "," << cell << "," << out.mean_mse << "," << (out.skipped ? 1 : 0)
            << "," << out.reason << "\n";
        rows.push_back({{"axis", axis},
                        {"cell", cell},
                        {"mean_mse", out.mean_mse},
                        {"skipped", out.skipped},
                        {"reason", out.reason}});
        std::cout << axis << "/" << cell << ": "
                  << (out.skipped ? "skipped (" + out.reason + ")"
                                  : std::to_string(out.mean_mse))
                  << "\n";
    };

    // w/o-RAF baseline.
    {
        TrainConfig c = base;
        c.fusion_policy = FusionPolicy::none;
        emit("baseline", "wo_raf", run_cell_seeds(backbone, kb, train_pairs, eval_pairs, c, seeds));
    }
    // Retrieval-policy axis.
    for (const auto& pol : cfg.value("retrieval_policies",
                                     std::vector<std::string>{"learned", "cosine", "random"})) {
        TrainConfig c = base;
        c.retrieval_policy = retrieval_policy_from_string(pol);
        emit("retrieval", pol, run_cell_seeds(backbone, kb, train_pairs, eval_pairs, c, seeds));
    }
    // Fusion-policy axis.
    for (const auto& pol :
         cfg.value("fusion_policies",
                   std::vector<std::string>{"channel_prompt", "token_concat", "average"})) {
        TrainConfig c = base;
        c.fusion_policy = fusion_policy_from_string(pol);
        emit("fusion", pol, run_cell_seeds(backbone, kb, train_pairs, eval_pairs, c, seeds));
    }
    // KB-size axis (train once per seed on the full KB, evaluate on fractions).
    for (double frac : cfg.value("kb_fractions",
                                 std::vector<double>{1.0, 0.5, 0.3, 0.1, 0.01})) {
        CellOutcome agg;
        double total = 0.0;
        bool skipped = false;
        std::string reason;
        for (std::uint64_t seed : seeds) {
            TrainConfig c = base;
            c.seed = seed;
            KnowledgeBase sub;
            try {
                sub = subsample(kb, frac, seed + 1000);
            } catch (const ConfigError& e) {
                skipped = true;
                reason = e.what();
                break;
            }
            if (sub.size() < c.k) {
                skipped = true;
                reason = "subsampled KB smaller than k";
                break;
            }
            Pipeline pipe = make_pipeline(backbone, c);
            train(pipe, train_pairs, kb);
            total += evaluate(pipe, eval_pairs, sub).mean_mse;
        }
        agg.skipped = skipped;
        agg.reason = reason;
        if (!skipped) agg.mean_mse = total / static_cast<double>(seeds.size());
        char cell[32];
        std::snprintf(cell, sizeof cell, "kb_%g", frac);
        emit("kb_size", cell, agg);
    }
    json doc = artifact_header(base.seed, cfg);
    doc["cells"] = rows;
    write_json(out_dir + "/ablation.json", doc);
    return 0;
}

int cmd_case_study(const std::string& manifest, const std::string& kb_path,
                   const std::string& backbone_path, const std::string& retriever_path,
                   const std::string& fusion_path, const std::string& config_path,
                   std::size_t query_index, const std::string& out_dir,
                   const std::vector<std::string>& only_datasets, double test_frac) {
    TrainConfig cfg = load_train_config(config_path);
    BackboneParams backbone = load_backbone(backbone_path);
    KnowledgeBase kb = load_kb(kb_path);
    Pipeline pipe = load_pipeline(backbone, cfg, retriever_path, fusion_path);
    auto series = filter_series(load_manifest(manifest), {}, only_datasets);
    SplitSpec split_spec{1.0 - test_frac, 0.0, test_frac};
    auto pairs = collect_pairs(series, split_spec, 2, backbone.dims.sl, backbone.dims.fl,
                               backbone.dims.fl);
    if (query_index >= pairs.size())
        throw ConfigError("case-study: query index out of range (have " +
                          std::to_string(pairs.size()) + " windows)");
    const WindowPair& pair = pairs[query_index];

    std::vector<std::size_t> all(kb.size());
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    Vector scores;
    auto indices = select_candidates(pipe, pair.x, kb, all, rng, &scores);

    const Vector y_raf = predict_raf(pipe, pair.x, kb);
    const Vector y_bare = predict(backbone, pair.x);

    std::filesystem::create_directories(out_dir);
    json dump = artifact_header(cfg.seed, train_config_to_json(cfg));
    dump["query"] = {{"dataset_id", pair.source.dataset_id},
                     {"channel_id", pair.source.channel_id},
                     {"start", pair.source.start},
                     {"x", pair.x},
                     {"y", pair.y}};
    json cands = json::array();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto& e = kb.entries[indices[i]];
        cands.push_back({{"kb_index", indices[i]},
                         {"dataset_id", e.dataset_id},
                         {"domain", e.domain},
                         {"score", scores.empty() ? 0.0 : scores[i]},
                         {"values", e.values}});
    }
    dump["candidates"] = cands;
    dump["y_raf"] = y_raf;
    dump["y_bare"] = y_bare;
    dump["mse_raf"] = mse(y_raf, pair.y);
    dump["mse_bare"] = mse(y_bare, pair.y);
    write_json(out_dir + "/case_study.json", dump);

    std::ofstream csv(out_dir + "/case_study.csv");
    csv << "t,x,y,y_raf,y_bare\n";
    for (std::size_t t = 0; t < pair.x.size(); ++t) csv << t << "," << pair.x[t] << ",,,\n";
    for (std::size_t t = 0; t < pair.y.size(); ++t)
        csv << pair.x.size() + t << ",," << pair.y[t] << "," << y_raf[t] << "," << y_bare[t]
            << "\n";
    std::cout << "case study for window " << query_index << " -> " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"retrieval-augmented zero-shot time-series forecasting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string spec_path, out_dir = "out", manifest, kb_path, backbone_path;
    std::string retriever_path, fusion_path, config_path, out_path, mode = "balanced";
    std::vector<std::string> exclude_domains, only_datasets;
    std::uint64_t seed = 0;
    std::size_t series_per_domain = 0, length = 0;
    std::size_t sl = 512, fl = 96, patch_len = 64, d = 16, epochs = 20, quota = 100;
    std::size_t query_index = 0, stride = 0;
    double lr = 1e-3, train_frac = 0.7, test_frac = 0.3;

    auto* gen = app.add_subcommand("gen-data", "generate synthetic multi-domain CSVs");
    gen->add_option("--spec", spec_path, "synthetic spec JSON (default: built-in)");
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--seed", seed);
    gen->add_option("--series-per-domain", series_per_domain);
    gen->add_option("--length", length);

    auto* bkb = app.add_subcommand("build-kb", "build a knowledge base from a manifest");
    bkb->add_option("--manifest", manifest)->required();
    bkb->add_option("--out", out_path)->required();
    bkb->add_option("--sl", sl);
    bkb->add_option("--quota", quota, "entries per domain (balanced) or total (pooled)");
    bkb->add_option("--seed", seed);
    bkb->add_option("--mode", mode, "balanced|pooled");
    bkb->add_option("--exclude-domain", exclude_domains);
    bkb->add_option("--only-dataset", only_datasets);

    auto* pre = app.add_subcommand("pretrain", "pretrain and freeze the backbone");
    pre->add_option("--manifest", manifest)->required();
    pre->add_option("--out", out_path)->required();
    pre->add_option("--sl", sl);
    pre->add_option("--fl", fl);
    pre->add_option("--patch-len", patch_len);
    pre->add_option("--d", d);
    pre->add_option("--epochs", epochs);
    pre->add_option("--lr", lr);
    pre->add_option("--seed", seed);
    pre->add_option("--exclude-domain", exclude_domains, "domains held out of pretraining");
    pre->add_option("--train-frac", train_frac);

    auto* trn = app.add_subcommand("train", "joint retriever+fusion training");
    trn->add_option("--manifest", manifest)->required();
    trn->add_option("--kb", kb_path)->required();
    trn->add_option("--backbone", backbone_path)->required();
    trn->add_option("--config", config_path, "TrainConfig JSON");
    trn->add_option("--out-dir", out_dir)->required();
    trn->add_option("--exclude-domain", exclude_domains);
    trn->add_option("--train-frac", train_frac);

    auto* ev = app.add_subcommand("eval", "sliding-window MSE evaluation");
    ev->add_option("--manifest", manifest)->required();
    ev->add_option("--kb", kb_path);
    ev->add_option("--backbone", backbone_path)->required();
    ev->add_option("--retriever", retriever_path);
    ev->add_option("--fusion", fusion_path);
    ev->add_option("--config", config_path);
    ev->add_option("--out", out_path)->required();
    ev->add_option("--only-dataset", only_datasets);
    ev->add_option("--test-frac", test_frac);
    ev->add_option("--stride", stride, "evaluation stride (default: fl)");

    auto* abl = app.add_subcommand("ablate", "run the ablation grid");
    abl->add_option("--config", config_path)->required();
    abl->add_option("--out-dir", out_dir)->required();

    auto* cs = app.add_subcommand("case-study", "export one retrieval trace");
    cs->add_option("--manifest", manifest)->required();
    cs->add_option("--kb", kb_path)->required();
    cs->add_option("--backbone", backbone_path)->required();
    cs->add_option("--retriever", retriever_path);
    cs->add_option("--fusion", fusion_path);
    cs->add_option("--config", config_path);
    cs->add_option("--query-index", query_index);
    cs->add_option("--out-dir", out_dir)->required();
    cs->add_option("--only-dataset", only_datasets);
    cs->add_option("--test-frac", test_frac);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_data(spec_path, out_dir, seed, series_per_domain, length);
        if (bkb->parsed())
            return cmd_build_kb(manifest, out_path, sl, quota, seed, mode, exclude_domains,
                                only_datasets);
        if (pre->parsed())
            return cmd_pretrain(manifest, out_path, sl, fl, patch_len, d, epochs, lr, seed,
                                exclude_domains, train_frac);
        if (trn->parsed())
            return cmd_train(manifest, kb_path, backbone_path, config_path, out_dir,
                             exclude_domains, train_frac);
        if (ev->parsed())
            return cmd_eval(manifest, kb_path, backbone_path, retriever_path, fusion_path,
                            config_path, out_path, only_datasets, test_frac, stride);
        if (abl->parsed()) return cmd_ablate(config_path, out_dir);
        if (cs->parsed())
            return cmd_case_study(manifest, kb_path, backbone_path, retriever_path,
                                  fusion_path, config_path, query_index, out_dir,
                                  only_datasets, test_frac);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
