/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "oracles.hpp"
#include "xbarmap/checkpoint.hpp"
#include "xbarmap/config.hpp"
#include "xbarmap/errors.hpp"

using namespace xbarmap;

TEST_CASE("config parsing") {
  SUBCASE("defaults from an empty document") {
    const ExperimentConfig config = ExperimentConfig::from_json_text("{}");
    CHECK(config.model.mappings.size() == 4);
    CHECK(config.eval.n_samples == 25);
    CHECK(config.eval.sigmas.size() == 5);
  }
  SUBCASE("unknown keys are rejected by name") {
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_json_text(R"({"trainnig": {}})"),
        doctest::Contains("trainnig"), ConfigError);
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_json_text(
            R"({"device": {"bits": 3, "sigma": 0.1}})"),
        doctest::Contains("sigma"), ConfigError);
  }
  SUBCASE("scalars and lists both work for sweep fields") {
    const ExperimentConfig a = ExperimentConfig::from_json_text(
        R"({"device": {"bits": 3}, "training": {"seed": 5}})");
    CHECK(a.device.bits == std::vector<int>{3});
    CHECK(a.training.seeds == std::vector<std::uint64_t>{5});
    const ExperimentConfig b = ExperimentConfig::from_json_text(
        R"({"device": {"bits": [2,3,4]}, "training": {"seeds": [1,2]}})");
    CHECK(b.device.bits == std::vector<int>{2, 3, 4});
    CHECK(b.training.seeds == std::vector<std::uint64_t>{1, 2});
  }
  SUBCASE("invalid values are rejected") {
    CHECK_THROWS_AS(
        ExperimentConfig::from_json_text(R"({"device": {"bits": 17}})"),
        ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json_text(R"({"model": {"mappings": ["xx"]}})"),
        ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{"), ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json_text(R"({"dataset": {"source": "idx"}})"),
        ConfigError);
  }
  SUBCASE("sweep cross product") {
    const ExperimentConfig config = ExperimentConfig::from_json_text(
        R"({"model": {"mappings": ["de","acm"]},
            "device": {"bits": [2,3], "nonlinearity": [0,3]},
            "training": {"seeds": [1,2,3]}})");
    CHECK(sweep_points(config).size() == 2 * 2 * 2 * 3);
  }
}

TEST_CASE("config-driven dataset construction") {
  const ExperimentConfig config = ExperimentConfig::from_json_text(
      R"({"dataset": {"source": "synthetic-blobs", "n_classes": 3, "dim": 12,
                      "train_per_class": 20, "test_per_class": 10,
                      "train_subset": 30, "seed": 5}})");
  const auto [train_ds, test_ds] = load_dataset(config.dataset);
  CHECK(train_ds.size() == 30);
  CHECK(test_ds.size() == 30);
  CHECK(train_ds.dim() == 12);
  CHECK(train_ds.split == "train");
  CHECK(test_ds.split == "test");
  // Train and test splits come from different generator streams.
  CHECK(train_ds.features.col(0) != test_ds.features.col(0));
}

TEST_CASE("model spec construction from config") {
  ModelConfig mlp;
  mlp.architecture = "mlp";
  mlp.hidden = {16, 8};
  const ModelSpec spec = build_model_spec(mlp, 20, 4);
  REQUIRE(spec.layers.size() == 6); // dense relu dense relu dense softmax
  CHECK(spec.layers[0].in_features == 20);
  CHECK(spec.layers[2].in_features == 16);
  CHECK(spec.layers[4].out_features == 4);

  ModelConfig cnn;
  cnn.architecture = "cnn-small";
  cnn.channels = 4;
  const ModelSpec cnn_spec = build_model_spec(cnn, 784, 10);
  CHECK(cnn_spec.layers[0].kind == LayerSpec::Kind::conv2d);
  CHECK_THROWS_AS(build_model_spec(cnn, 30, 10), ConfigError);
}

TEST_CASE("checkpoint round trips") {
  const std::string path = "/tmp/xbarmap_test_ckpt.json";
  const Dataset ds = synthetic_blobs(3, 10, 15, 5.0, 2);

  SUBCASE("device-backed mapped model") {
    DeviceModel device;
    device.bits = 3;
    device.nonlinearity = 2.0;
    device.activation_bits = 8;
    Model model = initialize_model(mlp_spec({10, 6, 3}), ModelType::acm,
                                   device, 4);
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 4;
    train(model, ds, ds, tc);

    save_checkpoint(model, path);
    Model loaded = load_checkpoint(path);
    CHECK(loaded.type == ModelType::acm);
    CHECK(loaded.device.bits == 3);
    REQUIRE(loaded.layers.size() == model.layers.size());
    auto orig_cores = model.mapped_cores();
    auto back_cores = loaded.mapped_cores();
    REQUIRE(orig_cores.size() == back_cores.size());
    for (std::size_t i = 0; i < orig_cores.size(); ++i) {
      CHECK(back_cores[i]->states() == orig_cores[i]->states());
      CHECK(back_cores[i]->residuals() == orig_cores[i]->residuals());
      CHECK(back_cores[i]->tracker().range == orig_cores[i]->tracker().range);
      CHECK(back_cores[i]->effective_weight() ==
            orig_cores[i]->effective_weight());
    }
    // Same predictions on the whole set.
    CHECK(model.forward(ds.features, false) ==
          loaded.forward(ds.features, false));
  }
  SUBCASE("baseline model with conv layers") {
    DeviceModel device;
    Model model = initialize_model(small_cnn_spec(6, 2, 3),
                                   ModelType::baseline, device, 9);
    save_checkpoint(model, path);
    Model loaded = load_checkpoint(path);
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd x = oracle::random_matrix(36, 2, rng, 0.0, 1.0);
    CHECK(model.forward(x, false) == loaded.forward(x, false));
  }
  SUBCASE("continuous-backed mapped model") {
    DeviceModel device;
    device.activation_bits = 0;
    Model model = initialize_model(mlp_spec({10, 3}), ModelType::bc, device, 6,
                                   Backing::continuous);
    save_checkpoint(model, path);
    Model loaded = load_checkpoint(path);
    CHECK(loaded.mapped_cores()[0]->continuous_matrix() ==
          model.mapped_cores()[0]->continuous_matrix());
  }
  SUBCASE("schema and corruption errors") {
    {
      std::ofstream out(path);
      out << "{\"schema_version\": 99}";
    }
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    {
      std::ofstream out(path);
      out << "not json at all";
    }
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint("/tmp/xbarmap_no_such_ckpt.json"),
                    CheckpointError);
  }
  std::remove(path.c_str());
}
