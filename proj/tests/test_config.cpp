#include <doctest.h>

#include <filesystem>
#include <string>

#include "ldpnn/config.hpp"
#include "ldpnn/errors.hpp"

using namespace ldpnn;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults") {
  const ExperimentConfig c = parse_config(R"({"experiment": "01a"})");
  CHECK(c.grid.count == 101);
  CHECK(c.network.depth == 2);
  CHECK(c.network.bias_variance == 1.0);
  CHECK(c.network.output_bias_variance == 0.0);
  REQUIRE(c.activations.size() == 1);
  CHECK(c.activations[0].name() == "relu");
  CHECK(c.dataset.preset == "heaviside6");
  CHECK(c.mala.base.n_chains == 10);
}

TEST_CASE("unknown keys are rejected by name") {
  CHECK(error_of(R"({"experiment": "01a", "gird": {}})").find("'gird'") != std::string::npos);
  CHECK(error_of(R"({"experiment": "01a", "grid": {"min": 0, "max": 1, "cnt": 3}})").find("'grid.cnt'") !=
        std::string::npos);
  CHECK(error_of(R"({"experiment": "01a", "optimizer": {"lr": 1}})").find("'optimizer.lr'") != std::string::npos);
  CHECK(error_of(R"({"experiment": "03b", "mala": {"chains": 2}})").find("'mala.chains'") != std::string::npos);
}

TEST_CASE("invalid values") {
  CHECK(error_of(R"({"experiment": "01a", "grid": {"min": 0, "max": 1, "count": 1}})").find("grid.count") !=
        std::string::npos);
  CHECK(error_of(R"({"experiment": "01a", "x_test": "three"})").find("'x_test'") != std::string::npos);
  CHECK(error_of(R"({"experiment": "04"})").find("unknown experiment") != std::string::npos);
  CHECK(error_of(R"({"experiment": "01a", "network": {"activation": "gelu"}})").find("network.activation") !=
        std::string::npos);
  CHECK(error_of(R"({"experiment": "01a", "dataset": "mnist"})").find("mnist") != std::string::npos);
  CHECK(error_of(R"({"experiment": "01a", "dataset": {"train_x": [1, 2], "train_y": [0]}})").find("differ") !=
        std::string::npos);
  CHECK(error_of(R"({"experiment": "01a",)").find("invalid JSON") != std::string::npos);
  CHECK(error_of(R"({"experiment": "03b", "mala": {"regimes": ["hot"]}})").find("hot") != std::string::npos);
}

TEST_CASE("inline dataset and per-layer activations") {
  const ExperimentConfig c = parse_config(R"({
    "experiment": "rate",
    "network": {"depth": 3, "activation": ["relu", "tanh"]},
    "dataset": {"train_x": [0, 1], "train_y": [0.5, -0.5]}
  })");
  CHECK(c.network.activation(2).name() == "tanh");
  const Dataset d = c.dataset.build({3.0});
  CHECK(d.train_size() == 2);
  CHECK(d.x.size() == 3);
  CHECK(d.y_train(1) == -0.5);
}

TEST_CASE("config hash ignores output_dir and tracks the seed") {
  ExperimentConfig a = parse_config(R"({"experiment": "01a"})");
  ExperimentConfig b = a;
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(parse_config(config_json(a)).grid.count == a.grid.count);
}

TEST_CASE("shipped presets parse") {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(LDPNN_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    INFO(e.path().string());
    CHECK_NOTHROW(load_config(e.path().string()));
    ++n;
  }
  CHECK(n >= 10);
}
