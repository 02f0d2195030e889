/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace xbarmap {

/// One observation: a training epoch (epoch_or_sample = epoch index, train
/// fields populated) or a variation Monte Carlo sample (epoch_or_sample =
/// sample index, train fields NaN). The context tuple makes rows
/// self-describing across sweep files.
struct MetricsRecord {
  std::string scheme; // "baseline" | "de" | "bc" | "acm"
  int bits = 0;       // 0 denotes full-precision (continuous) weights
  double nonlinearity = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  int epoch_or_sample = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

inline constexpr std::string_view kMetricsCsvHeader =
    "scheme,bits,nonlinearity,sigma,seed,epoch_or_sample,train_loss,"
    "train_acc,test_acc";

/// Shortest round-trip decimal representation (used for all metric output so
/// reruns are byte-identical).
std::string format_double(double v);

std::string to_csv(const std::vector<MetricsRecord>& records);
std::string to_jsonl(const std::vector<MetricsRecord>& records);
void write_csv(const std::string& path, const std::vector<MetricsRecord>& records);
void write_jsonl(const std::string& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_csv(const std::string& path);

} // namespace xbarmap
