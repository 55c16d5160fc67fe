#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "tailforge/config.hpp"
#include "tailforge/errors.hpp"
#include "tailforge/util.hpp"

using namespace tailforge;
using namespace tailforge::runner;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};
}  // namespace

TEST_CASE("an empty document yields the stock configuration") {
    auto cfg = parse_config(json::object());
    CHECK(cfg.dataset.num_classes == 50);
    CHECK(cfg.dataset.max_count == 200);
    CHECK(cfg.dataset.imbalance_ratio == 100.0);
    CHECK(cfg.dataset.noise_rate == 0.2);
    CHECK(cfg.optim.batch_size == 32);
    CHECK(cfg.optim.total_epochs == 24);
    CHECK(cfg.sampler.kind == sampling::Scheme::instance_balanced);
    CHECK(cfg.cleaning.rounds == 3);
    CHECK(cfg.rebalance.tau == 0.6);
    CHECK(cfg.tta.train_res == 0);  // derive from context
    CHECK(cfg.tta.enlarge_factor == 1.25);
    CHECK(cfg.ensemble_k == 10);
    CHECK(cfg.stages == std::vector<Stage>{Stage::train, Stage::eval});
    CHECK(cfg.seed == 0);
    CHECK(cfg.out_dir == "run");
    CHECK(cfg.highres_resolution() == 36);  // round(1.5 * 24)
}

TEST_CASE("known fields are applied from the document") {
    json doc = {
        {"dataset", {{"num_classes", 10}, {"noise_rate", 0.1}, {"base_resolution", 16}}},
        {"optim", {{"batch_size", 64}, {"total_epochs", 12}, {"decay_epochs", {6, 9}}}},
        {"sampler", {{"kind", "CBS"}, {"epoch_size", 500}}},
        {"cleaning", {{"rule", "drop_lowlabelprob"}, {"conf_threshold", 0.02}}},
        {"tta", {{"enlarge_factor", 1.5}}},
        {"ensemble_k", 7},
        {"stages", {"train", "clean", "eval"}},
        {"seed", 99},
        {"out_dir", "/tmp/somewhere"},
    };
    auto cfg = parse_config(doc);
    CHECK(cfg.dataset.num_classes == 10);
    CHECK(cfg.dataset.noise_rate == 0.1);
    CHECK(cfg.optim.batch_size == 64);
    CHECK(cfg.optim.decay_epochs == std::vector<int>{6, 9});
    CHECK(cfg.sampler.kind == sampling::Scheme::class_balanced);
    CHECK(cfg.sampler.epoch_size == 500);
    CHECK(cfg.cleaning.rule == cleanse::Rule::drop_lowlabelprob);
    CHECK(cfg.cleaning.conf_threshold == 0.02);
    CHECK(cfg.tta.enlarge_factor == 1.5);
    CHECK(cfg.ensemble_k == 7);
    CHECK(cfg.stages == std::vector<Stage>{Stage::train, Stage::clean, Stage::eval});
    CHECK(cfg.seed == 99);
    CHECK(cfg.out_dir == "/tmp/somewhere");
    CHECK(cfg.highres_resolution() == 24);  // round(1.5 * 16)
}

TEST_CASE("cleaning's topk follows ensemble_k") {
    auto cfg = parse_config(json{{"ensemble_k", 3}});
    CHECK(cfg.cleaning.topk == 3);
    // topk is derived, not a config key.
    CHECK_THROWS_AS(parse_config(json{{"cleaning", {{"topk", 5}}}}), ConfigError);
}

TEST_CASE("unknown keys are rejected everywhere") {
    CHECK_THROWS_AS(parse_config(json{{"learning_rate", 0.1}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"dataset", {{"classes", 10}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"optim", {{"lr", 0.1}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"tta", {{"ncrops", 10}}}}), ConfigError);
    try {
        parse_config(json{{"dataset", {{"classes", 10}}}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        // The message pinpoints the section and the offending key.
        std::string what = e.what();
        CHECK(what.find("dataset") != std::string::npos);
        CHECK(what.find("classes") != std::string::npos);
    }
}

TEST_CASE("sampler kind accepts only IBS and CBS") {
    CHECK(parse_config(json{{"sampler", {{"kind", "IBS"}}}}).sampler.kind ==
          sampling::Scheme::instance_balanced);
    CHECK_THROWS_AS(parse_config(json{{"sampler", {{"kind", "ibs"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"sampler", {{"kind", "class_balanced"}}}}), ConfigError);
}

TEST_CASE("stage-order rules are enforced") {
    CHECK_THROWS_AS(parse_config(json{{"stages", json::array()}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"stages", {"eval"}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"stages", {"clean", "train", "eval"}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"stages", {"train", "train"}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"stages", {"train", "tau_norm", "clean", "eval"}}}),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_config(json{{"stages", {"train", "tau_norm", "retrain_classifier"}}}),
        ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"stages", {"train", "polish"}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"stages", {"train", 7}}}), ConfigError);
    // The full ladder ordering is legal.
    auto cfg = parse_config(json{
        {"stages",
         {"train", "clean", "highres_finetune", "retrain_classifier", "tau_norm", "tta_eval"}}});
    CHECK(cfg.stages.size() == 6);
    // tau_norm followed by pure evaluation stages is fine.
    parse_config(json{{"stages", {"train", "tau_norm", "eval"}}});
    parse_config(json{{"stages", {"train", "tau_norm", "tta_eval", "eval"}}});
}

TEST_CASE("field-level validation still runs after parsing") {
    CHECK_THROWS_AS(parse_config(json{{"dataset", {{"num_classes", 1}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"ensemble_k", 0}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"optim", {{"batch_size", 1}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"cleaning", {{"conf_threshold", 1.5}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"loss", {{"label_smoothing", 1.0}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"highres", {{"resolution", 4}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"tta", {{"enlarge_factor", 0.5}}}}), ConfigError);
}

TEST_CASE("the resolved form reparses to the same hash") {
    json doc = {
        {"dataset", {{"num_classes", 6}, {"max_count", 30}}},
        {"sampler", {{"kind", "CBS"}}},
        {"stages", {"train", "clean", "retrain_classifier", "tau_norm", "eval"}},
        {"seed", 5},
    };
    auto cfg = parse_config(doc);
    std::string h1 = config_hash(cfg);
    CHECK(h1.size() == 16);  // 64-bit hex

    auto reparsed = parse_config(resolved_config(cfg));
    CHECK(config_hash(reparsed) == h1);
    CHECK(resolved_config(reparsed).dump() == resolved_config(cfg).dump());
}

TEST_CASE("the hash is sensitive to every section") {
    auto base = parse_config(json::object());
    std::string h0 = config_hash(base);
    auto probe = [&](const json& doc) {
        auto cfg = parse_config(doc);
        CHECK(config_hash(cfg) != h0);
    };
    probe(json{{"dataset", {{"num_classes", 10}}}});
    probe(json{{"optim", {{"batch_size", 64}}}});
    probe(json{{"sampler", {{"kind", "CBS"}}}});
    probe(json{{"augment", {{"hflip_prob", 0.25}}}});
    probe(json{{"cleaning", {{"rounds", 4}}}});
    probe(json{{"rebalance", {{"tau", 0.7}}}});
    probe(json{{"tta", {{"enlarge_factor", 1.5}}}});
    probe(json{{"model", {{"d_emb", 32}}}});
    probe(json{{"loss", {{"label_smoothing", 0.2}}}});
    probe(json{{"highres", {{"epochs", 3}}}});
    probe(json{{"ensemble_k", 4}});
    probe(json{{"stages", {"train", "clean", "eval"}}});
    probe(json{{"seed", 1}});
    // out_dir is part of the resolved form too.
    probe(json{{"out_dir", "elsewhere"}});
}

TEST_CASE("load_config maps missing files and bad json to ConfigError") {
    CHECK_THROWS_AS(load_config("/tmp/tf_definitely_missing_config.json"), ConfigError);
    TempDir tmp("tf_test_config_io");
    fs::path bad = tmp.path / "bad.json";
    write_text(bad, "{ not json ]");
    CHECK_THROWS_AS(load_config(bad), ConfigError);
    fs::path good = tmp.path / "good.json";
    write_text(good, "{\"seed\": 7}\n");
    auto cfg = load_config(good);
    CHECK(cfg.seed == 7);
}

TEST_CASE("stage names roundtrip") {
    for (Stage s : {Stage::train, Stage::clean, Stage::retrain_classifier, Stage::subset_finetune,
                    Stage::highres_finetune, Stage::tau_norm, Stage::tta_eval, Stage::eval}) {
        CHECK(stage_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(stage_from_string("finetune"), ConfigError);
}
