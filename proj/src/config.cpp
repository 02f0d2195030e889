/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "xbarmap/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "xbarmap/errors.hpp"

namespace xbarmap {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& section) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("config: unknown key '" + key + "' in " + section);
    }
  }
}

// Accepts either a scalar or an array of scalars.
template <typename T>
std::vector<T> scalar_or_list(const json& j, const std::string& what) {
  std::vector<T> values;
  if (j.is_array()) {
    for (const auto& v : j) {
      values.push_back(v.get<T>());
    }
    if (values.empty()) {
      throw ConfigError("config: " + what + " must not be an empty list");
    }
  } else {
    values.push_back(j.get<T>());
  }
  return values;
}

void parse_dataset(const json& j, DatasetConfig& out) {
  reject_unknown_keys(j,
                      {"source", "train_images", "train_labels", "test_images",
                       "test_labels", "n_classes", "dim", "separation",
                       "train_per_class", "test_per_class", "train_subset",
                       "test_subset", "seed"},
                      "dataset");
  if (j.contains("source")) out.source = j["source"].get<std::string>();
  if (out.source != "synthetic-blobs" && out.source != "synthetic-digits" &&
      out.source != "idx") {
    throw ConfigError("config: dataset.source must be synthetic-blobs, "
                      "synthetic-digits or idx");
  }
  if (j.contains("train_images")) out.train_images = j["train_images"];
  if (j.contains("train_labels")) out.train_labels = j["train_labels"];
  if (j.contains("test_images")) out.test_images = j["test_images"];
  if (j.contains("test_labels")) out.test_labels = j["test_labels"];
  if (j.contains("n_classes")) out.n_classes = j["n_classes"];
  if (j.contains("dim")) out.dim = j["dim"];
  if (j.contains("separation")) out.separation = j["separation"];
  if (j.contains("train_per_class")) out.train_per_class = j["train_per_class"];
  if (j.contains("test_per_class")) out.test_per_class = j["test_per_class"];
  if (j.contains("train_subset"))
    out.train_subset = j["train_subset"].get<Eigen::Index>();
  if (j.contains("test_subset"))
    out.test_subset = j["test_subset"].get<Eigen::Index>();
  if (j.contains("seed")) out.seed = j["seed"].get<std::uint64_t>();
  if (out.source == "idx" &&
      (out.train_images.empty() || out.train_labels.empty() ||
       out.test_images.empty() || out.test_labels.empty())) {
    throw ConfigError("config: idx dataset needs train/test image and label "
                      "paths");
  }
}

void parse_model(const json& j, ModelConfig& out) {
  reject_unknown_keys(j, {"architecture", "hidden", "channels", "mappings"},
                      "model");
  if (j.contains("architecture"))
    out.architecture = j["architecture"].get<std::string>();
  if (out.architecture != "mlp" && out.architecture != "cnn-small") {
    throw ConfigError("config: model.architecture must be mlp or cnn-small");
  }
  if (j.contains("hidden")) {
    // An empty list is allowed: a linear softmax classifier.
    if (j["hidden"].is_array() && j["hidden"].empty()) {
      out.hidden.clear();
    } else {
      out.hidden = scalar_or_list<int>(j["hidden"], "model.hidden");
    }
  }
  if (j.contains("channels")) out.channels = j["channels"];
  if (j.contains("mappings")) {
    out.mappings.clear();
    for (const std::string name :
         scalar_or_list<std::string>(j["mappings"], "model.mappings")) {
      const auto type = parse_model_type(name);
      if (!type) {
        throw ConfigError("config: unknown mapping '" + name + "'");
      }
      out.mappings.push_back(*type);
    }
  }
}

void parse_device(const json& j, DeviceConfig& out) {
  reject_unknown_keys(j,
                      {"bits", "nonlinearity", "g_max", "variation_sigma",
                       "activation_bits"},
                      "device");
  if (j.contains("bits")) {
    out.bits = scalar_or_list<int>(j["bits"], "device.bits");
    for (int b : out.bits) {
      if (b < 0 || b > 16) {
        throw ConfigError("config: device.bits entries must be in [0, 16] "
                          "(0 = full precision)");
      }
    }
  }
  if (j.contains("nonlinearity")) {
    out.nonlinearity =
        scalar_or_list<double>(j["nonlinearity"], "device.nonlinearity");
  }
  if (j.contains("g_max")) out.g_max = j["g_max"];
  if (j.contains("variation_sigma")) out.variation_sigma = j["variation_sigma"];
  if (j.contains("activation_bits")) out.activation_bits = j["activation_bits"];
}

void parse_training(const json& j, TrainingConfig& out) {
  reject_unknown_keys(
      j, {"learning_rate", "epochs", "batch_size", "seed", "seeds"},
      "training");
  if (j.contains("learning_rate")) out.learning_rate = j["learning_rate"];
  if (j.contains("epochs")) out.epochs = j["epochs"];
  if (j.contains("batch_size")) out.batch_size = j["batch_size"];
  if (j.contains("seed") && j.contains("seeds")) {
    throw ConfigError("config: give either training.seed or training.seeds");
  }
  if (j.contains("seed")) {
    out.seeds = {j["seed"].get<std::uint64_t>()};
  }
  if (j.contains("seeds")) {
    out.seeds = scalar_or_list<std::uint64_t>(j["seeds"], "training.seeds");
  }
}

void parse_eval(const json& j, EvalConfig& out) {
  reject_unknown_keys(j, {"sigmas", "n_samples"}, "eval");
  if (j.contains("sigmas")) {
    out.sigmas = scalar_or_list<double>(j["sigmas"], "eval.sigmas");
  }
  if (j.contains("n_samples")) out.n_samples = j["n_samples"];
}

void parse_output(const json& j, OutputConfig& out) {
  reject_unknown_keys(j, {"directory", "formats", "checkpoints"}, "output");
  if (j.contains("directory")) out.directory = j["directory"].get<std::string>();
  if (j.contains("formats")) {
    out.formats = scalar_or_list<std::string>(j["formats"], "output.formats");
    for (const std::string& f : out.formats) {
      if (f != "csv" && f != "jsonl") {
        throw ConfigError("config: unknown output format '" + f + "'");
      }
    }
  }
  if (j.contains("checkpoints")) out.checkpoints = j["checkpoints"];
}

} // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  ExperimentConfig config;
  try {
    reject_unknown_keys(
        j, {"dataset", "model", "device", "training", "eval", "output"},
        "top level");
    if (j.contains("dataset")) parse_dataset(j["dataset"], config.dataset);
    if (j.contains("model")) parse_model(j["model"], config.model);
    if (j.contains("device")) parse_device(j["device"], config.device);
    if (j.contains("training")) parse_training(j["training"], config.training);
    if (j.contains("eval")) parse_eval(j["eval"], config.eval);
    if (j.contains("output")) parse_output(j["output"], config.output);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: mistyped value: ") + e.what());
  }
  return config;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config: cannot open " + path);
  }
  return from_json_text(std::string(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()));
}

std::pair<Dataset, Dataset> load_dataset(const DatasetConfig& config) {
  Dataset train_ds, test_ds;
  if (config.source == "idx") {
    train_ds = load_idx(config.train_images, config.train_labels);
    test_ds = load_idx(config.test_images, config.test_labels);
  } else if (config.source == "synthetic-digits") {
    train_ds = synthetic_digits(config.train_per_class, config.seed);
    test_ds = synthetic_digits(config.test_per_class,
                               splitmix64(config.seed) ^ 0x7e57ULL);
  } else {
    train_ds = synthetic_blobs(config.n_classes, config.dim,
                               config.train_per_class, config.separation,
                               config.seed);
    test_ds = synthetic_blobs(config.n_classes, config.dim,
                              config.test_per_class, config.separation,
                              splitmix64(config.seed) ^ 0x7e57ULL);
  }
  train_ds.split = "train";
  test_ds.split = "test";
  if (config.train_subset > 0) {
    train_ds = subset(train_ds, config.train_subset, config.seed);
  }
  if (config.test_subset > 0) {
    test_ds = subset(test_ds, config.test_subset, config.seed + 1);
  }
  return {std::move(train_ds), std::move(test_ds)};
}

ModelSpec build_model_spec(const ModelConfig& config, Eigen::Index input_dim,
                           int n_classes) {
  if (config.architecture == "cnn-small") {
    const int side = static_cast<int>(
        std::lround(std::sqrt(static_cast<double>(input_dim))));
    if (static_cast<Eigen::Index>(side) * side != input_dim) {
      throw ConfigError("config: cnn-small needs square single-channel input");
    }
    return small_cnn_spec(side, config.channels, n_classes);
  }
  std::vector<int> dims;
  dims.push_back(static_cast<int>(input_dim));
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(n_classes);
  return mlp_spec(dims);
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& config) {
  std::vector<SweepPoint> points;
  for (ModelType mapping : config.model.mappings) {
    for (int bits : config.device.bits) {
      for (double nu : config.device.nonlinearity) {
        for (std::uint64_t seed : config.training.seeds) {
          points.push_back(SweepPoint{mapping, bits, nu, seed});
        }
      }
    }
  }
  return points;
}

} // namespace xbarmap
