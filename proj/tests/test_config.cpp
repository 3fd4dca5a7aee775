#include <doctest.h>

#include <string>

#include "streammem/config.hpp"
#include "streammem/error.hpp"

using namespace streammem;

namespace {

std::string config_error(const std::string& yaml, const std::vector<std::string>& overrides = {}) {
    try {
        load_config_text(yaml, overrides, "exp.yaml");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
        return e.what();
    }
    FAIL("no ConfigError");
    return {};
}

const char* kBase = R"(
name: base
seed: 9
dataset:
  kind: synth
  synth:
    n_facts: 10
    needle_depths: [5, 15]
store:
  backend: inverted_vector
  dimension: 64
operators:
  k: 4
  formulate: keyword
  integrate:
    strategy: multi_tier
    tier_quotas: {short_term: 1, long_term: 3}
checkpoints:
  every_n: 25
)";

}  // namespace

TEST_CASE("a plain config resolves to one run") {
    const auto runs = load_config_text(kBase, {}, "exp.yaml");
    REQUIRE(runs.size() == 1);
    const auto& r = runs[0];
    CHECK(r.grid_label.empty());
    CHECK(r.output_dir == "results/base");
    CHECK(r.experiment.seed == 9);
    CHECK(r.experiment.store.dimension == 64);
    CHECK(r.experiment.ops.K == 4);
    CHECK(r.experiment.ops.psi.strategy == "keyword");
    CHECK(r.experiment.ops.integration.tier_quotas.at(Tier::LongTerm) == 3);
    CHECK(r.experiment.schedule.kind == CheckpointSchedule::Kind::EveryN);
    CHECK(r.experiment.schedule.every_n == 25);
    CHECK(r.dataset.synth.needle_depths == std::vector<std::size_t>{5, 15});
    CHECK(r.experiment.dataset == "synth:seed=9");
    CHECK(r.gateway.backend == "mock");
}

TEST_CASE("ablate expands to the cross product") {
    const std::string yaml = std::string(kBase) + R"(
ablate:
  store.backend: [fifo_queue, summary_vector]
  operators.k: [1, 5, 10]
)";
    const auto runs = load_config_text(yaml, {}, "exp.yaml");
    REQUIRE(runs.size() == 6);
    CHECK(runs[0].grid_label == "store.backend=fifo_queue,operators.k=1");
    CHECK(runs[1].grid_label == "store.backend=fifo_queue,operators.k=5");
    CHECK(runs[5].grid_label == "store.backend=summary_vector,operators.k=10");
    CHECK(runs[5].experiment.store_backend == "summary_vector");
    CHECK(runs[5].experiment.ops.K == 10);
    CHECK(runs[0].output_dir == std::filesystem::path("results/base/store.backend=fifo_queue,operators.k=1"));
    CHECK(runs[0].experiment.name == "base[store.backend=fifo_queue,operators.k=1]");
}

TEST_CASE("overrides replace values and grid axes") {
    const std::string yaml = std::string(kBase) + "ablate:\n  operators.k: [1, 2]\n";
    auto runs = load_config_text(yaml, {"operators.k=7", "operators.consolidate=crud", "name=other"}, "exp.yaml");
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].experiment.ops.K == 7);
    CHECK(runs[0].experiment.ops.theta.strategy == "crud");
    CHECK(runs[0].output_dir == "results/other");

    runs = load_config_text(kBase, {"ablate.store.hybrid_mode=[lexical_only, vector_only]"}, "exp.yaml");
    REQUIRE(runs.size() == 2);
    CHECK(runs[1].experiment.store.hybrid_mode == HybridMode::VectorOnly);

    CHECK(config_error(kBase, {"novalue"}).find("key=value") != std::string::npos);
}

TEST_CASE("config errors name the file and key") {
    auto msg = config_error(std::string(kBase) + "stroe: {}\n");
    CHECK(msg.find("exp.yaml") != std::string::npos);
    CHECK(msg.find("'stroe'") != std::string::npos);
    CHECK(msg.find("unknown key") != std::string::npos);

    msg = config_error(kBase, {"store.lsh_bitz=4"});
    CHECK(msg.find("store.lsh_bitz") != std::string::npos);

    msg = config_error(kBase, {"store.backend=btree"});
    CHECK(msg.find("btree") != std::string::npos);

    msg = config_error(kBase, {"operators.consolidate=heat_migration"});
    CHECK(msg.find("heat_migration") != std::string::npos);

    msg = config_error(kBase, {"gateway.dimension=128"});
    CHECK(msg.find("dimension") != std::string::npos);

    msg = config_error(kBase, {"checkpoints.fraction=0.5"});
    CHECK(msg.find("checkpoints") != std::string::npos);

    msg = config_error(kBase, {"dataset.kind=locomo"});
    CHECK(msg.find("dataset.path") != std::string::npos);

    msg = config_error(kBase, {"dataset.synth.update_rate=2"});
    CHECK(msg.find("dataset.synth") != std::string::npos);

    msg = config_error(kBase, {"gateway.backend=cloud"});
    CHECK(msg.find("gateway.backend") != std::string::npos);

    config_error("name: [unterminated\n");
    config_error("- just\n- a list\n");
}

TEST_CASE("gateway dimension fills in the store dimension") {
    const auto runs = load_config_text("gateway: {dimension: 32}\n", {}, "g.yaml");
    CHECK(runs[0].experiment.store.dimension == 32);
    auto backend = make_backend(runs[0].gateway, runs[0].experiment);
    const std::vector<std::string> texts{"hello"};
    CHECK(backend->embed(texts).at(0).size() == 32);
}

TEST_CASE("missing config file is an io error") {
    try {
        load_config("/nonexistent/config.yaml");
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
}
