/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xbarmap/data.hpp"
#include "xbarmap/network.hpp"

namespace xbarmap {

/// Where the data comes from. IDX paths are never downloaded; synthetic
/// sources are generated deterministically from the dataset seed.
struct DatasetConfig {
  std::string source = "synthetic-blobs"; // synthetic-blobs|synthetic-digits|idx
  std::string train_images, train_labels, test_images, test_labels;
  int n_classes = 2;      // synthetic-blobs
  int dim = 64;           // synthetic-blobs
  double separation = 10.0;
  int train_per_class = 250;
  int test_per_class = 100;
  Eigen::Index train_subset = 0; // 0 keeps the full split
  Eigen::Index test_subset = 0;
  std::uint64_t seed = 7;
};

struct ModelConfig {
  std::string architecture = "mlp"; // mlp | cnn-small
  std::vector<int> hidden = {128};  // mlp
  int channels = 8;                 // cnn-small
  std::vector<ModelType> mappings = {ModelType::baseline, ModelType::de,
                                     ModelType::bc, ModelType::acm};
};

/// Device parameters; bits and nonlinearity may hold several sweep values.
/// bits = 0 selects full-precision (continuous) crossbars.
struct DeviceConfig {
  std::vector<int> bits = {4};
  std::vector<double> nonlinearity = {0.0};
  double g_max = 1.0;
  double variation_sigma = 0.0;
  int activation_bits = 8;
};

struct TrainingConfig {
  double learning_rate = 0.1;
  int epochs = 10;
  int batch_size = 32;
  std::vector<std::uint64_t> seeds = {1};
};

struct EvalConfig {
  std::vector<double> sigmas = {0.0, 0.05, 0.10, 0.15, 0.20};
  int n_samples = 25;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats = {"csv", "jsonl"};
  bool checkpoints = true;
};

/// A fully deterministic experiment description. Parsing rejects unknown
/// keys anywhere in the document, naming the offending key.
struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  DeviceConfig device;
  TrainingConfig training;
  EvalConfig eval;
  OutputConfig output;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

/// Materializes the train/test splits described by the config.
std::pair<Dataset, Dataset> load_dataset(const DatasetConfig& config);

/// Builds the architecture for the configured model and dataset shape.
ModelSpec build_model_spec(const ModelConfig& config, Eigen::Index input_dim,
                           int n_classes);

/// One training run of the sweep: the cross product of mappings x bits x
/// nonlinearity x seeds.
struct SweepPoint {
  ModelType mapping;
  int bits;
  double nonlinearity;
  std::uint64_t seed;
};

std::vector<SweepPoint> sweep_points(const ExperimentConfig& config);

} // namespace xbarmap
