#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include <sys/wait.h>

#include <json.hpp>

#include "test_support.hpp"
#include "timeraf/checkpoint.hpp"
#include "timeraf/harness.hpp"

using namespace timeraf;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    auto dir = fs::temp_directory_path() / "timeraf_cli_test";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

void spit(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TIMERAF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("TSCK round trip with several nets and metadata") {
    std::mt19937_64 rng(1);
    Checkpoint ckpt;
    ckpt.nets["alpha"] = make_mlp({4, 8, 2}, rng);
    ckpt.nets["beta"] = make_mlp({3, 3}, rng, /*final_linear=*/false);
    ckpt.nets["beta"].frozen = true;
    ckpt.meta = {{"kind", "test"}, {"note", "round trip"}};

    const auto path = work_dir() / "multi.tsck";
    save_checkpoint(ckpt, path.string());
    auto loaded = load_checkpoint(path.string());
    REQUIRE(loaded.nets.size() == 2);
    CHECK(param_hash(loaded.nets.at("alpha")) == param_hash(ckpt.nets.at("alpha")));
    CHECK(param_hash(loaded.nets.at("beta")) == param_hash(ckpt.nets.at("beta")));
    CHECK(loaded.nets.at("beta").frozen);
    CHECK_FALSE(loaded.nets.at("beta").final_linear);
    CHECK(loaded.meta.at("note") == "round trip");

    // saving the loaded checkpoint reproduces the file byte for byte
    const auto path2 = work_dir() / "multi2.tsck";
    save_checkpoint(loaded, path2.string());
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("corrupted TSCK files are rejected with distinct codes") {
    std::mt19937_64 rng(2);
    Checkpoint ckpt;
    ckpt.nets["net"] = make_mlp({6, 12, 6}, rng);
    const auto path = work_dir() / "corrupt.tsck";
    save_checkpoint(ckpt, path.string());
    const std::string bytes = slurp(path);

    auto expect_code = [&](const std::string& mutated, FormatError::Code code) {
        const auto p = work_dir() / "mutated.tsck";
        spit(p, mutated);
        try {
            load_checkpoint(p.string());
            FAIL("expected a FormatError");
        } catch (const FormatError& e) {
            CHECK(e.code == code);
        }
    };
    expect_code(bytes.substr(0, bytes.size() - 3), FormatError::Code::truncated);
    {
        std::string flip = bytes;
        flip[flip.size() / 2] ^= 0x10;
        expect_code(flip, FormatError::Code::bad_checksum);
    }
    {
        std::string magic = bytes;
        magic[1] = 'Z';
        expect_code(magic, FormatError::Code::bad_magic);
    }
    {
        std::string ver = bytes;
        ver[4] = 0x7e;
        expect_code(ver, FormatError::Code::bad_version);
    }
    CHECK_THROWS_AS(load_checkpoint("/no/such/file.tsck"), DataError);
}

TEST_CASE("kind tags prevent cross-loading checkpoints") {
    std::mt19937_64 rng(3);
    auto f = make_fusion(2, 2, rng);
    const auto path = work_dir() / "kind.tsck";
    save_fusion(f, path.string());
    CHECK_THROWS_AS(load_retriever(path.string()), DataError);
    CHECK_THROWS_AS(load_backbone(path.string()), DataError);
}

TEST_CASE("TrainConfig JSON round trip and validation") {
    TrainConfig cfg;
    cfg.k = 5;
    cfg.tau_m = 0.2;
    cfg.rho = 0.35;
    cfg.lambda = 0.5;
    cfg.epochs = 3;
    cfg.e = 24;
    cfg.seed = 99;
    cfg.retrieval_policy = RetrievalPolicy::cosine;
    cfg.fusion_policy = FusionPolicy::token_concat;
    auto j = train_config_to_json(cfg);
    auto back = train_config_from_json(j);
    CHECK(back.k == cfg.k);
    CHECK(back.tau_m == cfg.tau_m);
    CHECK(back.rho == cfg.rho);
    CHECK(back.lambda == cfg.lambda);
    CHECK(back.epochs == cfg.epochs);
    CHECK(back.e == cfg.e);
    CHECK(back.seed == cfg.seed);
    CHECK(back.retrieval_policy == cfg.retrieval_policy);
    CHECK(back.fusion_policy == cfg.fusion_policy);

    CHECK_THROWS_AS(train_config_from_json({{"k", 0}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json({{"retrieval_policy", "psychic"}}), ConfigError);
    // defaults survive an empty document
    auto dflt = train_config_from_json(nlohmann::json::object());
    CHECK(dflt.k == 8);
    CHECK(dflt.lambda == 1.0);
}

TEST_CASE("synthetic dataset round-trips through CSV and manifest") {
    SyntheticSpec spec = default_synthetic_spec();
    spec.series_per_domain = 2;
    spec.length = 300;
    auto series = gen_series(spec, 7);
    REQUIRE(series.size() == 6);

    const auto dir = work_dir() / "synth_rt";
    fs::remove_all(dir);
    write_dataset(dir.string(), series);
    auto loaded = load_manifest((dir / "manifest.json").string());
    REQUIRE(loaded.size() == series.size());
    // order by dataset_id for comparison
    std::map<std::string, const Series*> by_id;
    for (const auto& s : loaded) by_id[s.dataset_id] = &s;
    for (const auto& s : series) {
        REQUIRE(by_id.count(s.dataset_id) == 1);
        const Series& l = *by_id.at(s.dataset_id);
        CHECK(l.domain == s.domain);
        REQUIRE(l.values.size() == s.values.size());
        for (std::size_t i = 0; i < s.values.size(); ++i) CHECK(l.values[i] == s.values[i]);
    }
    // determinism of generation
    auto again = gen_series(spec, 7);
    for (std::size_t i = 0; i < series.size(); ++i)
        CHECK(again[i].values == series[i].values);
    CHECK(gen_series(spec, 8)[0].values != series[0].values);
}

TEST_CASE("CLI end-to-end: gen-data, build-kb, pretrain, train, eval") {
    const auto dir = work_dir() / "e2e";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string data = (dir / "data").string();
    const std::string manifest = data + "/manifest.json";

    CHECK(run_cli("gen-data --out " + data +
                  " --seed 1 --series-per-domain 1 --length 400") == 0);
    CHECK(fs::exists(manifest));
    CHECK(fs::exists(data + "/gen_info.json"));

    const std::string kb = (dir / "kb.tskb").string();
    CHECK(run_cli("build-kb --manifest " + manifest + " --out " + kb +
                  " --sl 64 --quota 4 --seed 2") == 0);
    CHECK(fs::exists(kb));
    CHECK(fs::exists(kb + ".json"));

    const std::string backbone = (dir / "backbone.tsck").string();
    CHECK(run_cli("pretrain --manifest " + manifest + " --out " + backbone +
                  " --sl 64 --fl 16 --patch-len 8 --d 8 --epochs 2 --seed 3"
                  " --exclude-domain C") == 0);
    CHECK(fs::exists(backbone));

    const std::string train_cfg = (dir / "train.json").string();
    spit(train_cfg,
         R"({"k": 4, "e": 16, "epochs": 1, "seed": 4, "lr_fusion": 0.0001})");
    const std::string run_dir = (dir / "run").string();
    CHECK(run_cli("train --manifest " + manifest + " --kb " + kb + " --backbone " +
                  backbone + " --config " + train_cfg + " --out-dir " + run_dir) == 0);
    CHECK(fs::exists(run_dir + "/retriever.tsck"));
    CHECK(fs::exists(run_dir + "/fusion.tsck"));
    CHECK(fs::exists(run_dir + "/training_log.csv"));
    CHECK(fs::exists(run_dir + "/train_info.json"));

    const std::string eval_out = (dir / "eval.json").string();
    CHECK(run_cli("eval --manifest " + manifest + " --kb " + kb + " --backbone " +
                  backbone + " --retriever " + run_dir + "/retriever.tsck --fusion " +
                  run_dir + "/fusion.tsck --config " + train_cfg + " --out " + eval_out) == 0);
    REQUIRE(fs::exists(eval_out));
    auto report = nlohmann::json::parse(slurp(eval_out));
    CHECK(report.contains("report"));
    CHECK(report["report"]["n_windows"].get<std::size_t>() > 0);
    CHECK(report["version"] == "0.1.0");

    const std::string cs_dir = (dir / "case").string();
    CHECK(run_cli("case-study --manifest " + manifest + " --kb " + kb + " --backbone " +
                  backbone + " --retriever " + run_dir + "/retriever.tsck --fusion " +
                  run_dir + "/fusion.tsck --config " + train_cfg + " --query-index 0" +
                  " --out-dir " + cs_dir) == 0);
    CHECK(fs::exists(cs_dir + "/case_study.json"));
    CHECK(fs::exists(cs_dir + "/case_study.csv"));
}

TEST_CASE("CLI maps error classes to exit codes") {
    const auto dir = work_dir() / "errors";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string data = (dir / "data").string();
    REQUIRE(run_cli("gen-data --out " + data +
                    " --seed 1 --series-per-domain 1 --length 400") == 0);
    const std::string manifest = data + "/manifest.json";

    // config error: bad mode
    CHECK(run_cli("build-kb --manifest " + manifest + " --out " + (dir / "x.tskb").string() +
                  " --sl 64 --quota 4 --mode bogus") == 1);
    // config error: impossible quota
    CHECK(run_cli("build-kb --manifest " + manifest + " --out " + (dir / "x.tskb").string() +
                  " --sl 64 --quota 100000") == 1);
    // data error: missing manifest
    CHECK(run_cli("build-kb --manifest /no/such/manifest.json --out " +
                  (dir / "x.tskb").string()) == 2);
    // data error: corrupted KB fed to eval
    const std::string kb = (dir / "kb.tskb").string();
    REQUIRE(run_cli("build-kb --manifest " + manifest + " --out " + kb +
                    " --sl 64 --quota 4") == 0);
    std::string bytes = slurp(kb);
    bytes[bytes.size() / 2] ^= 0x01;
    const std::string bad_kb = (dir / "kb_bad.tskb").string();
    spit(bad_kb, bytes);
    const std::string backbone = (dir / "backbone.tsck").string();
    REQUIRE(run_cli("pretrain --manifest " + manifest + " --out " + backbone +
                    " --sl 64 --fl 16 --patch-len 8 --d 8 --epochs 1 --seed 3") == 0);
    CHECK(run_cli("eval --manifest " + manifest + " --kb " + bad_kb + " --backbone " +
                  backbone + " --out " + (dir / "eval.json").string()) == 2);
    // CLI11 usage error: missing required option
    CHECK(run_cli("build-kb --manifest " + manifest) != 0);
}
