/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <map>
#include <string>
#include <vector>

#include "xbarmap/data.hpp"
#include "xbarmap/metrics.hpp"
#include "xbarmap/network.hpp"

namespace xbarmap {

/// Fraction of argmax-correct predictions. Deterministic; rejects empty
/// datasets.
double evaluate(Model& model, const Dataset& ds);

struct VariationSummary {
  int n_samples = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0; // sample standard deviation (n - 1), 0 for n = 1
  std::vector<double> per_sample;
};

/// Draws n_samples read-variation realizations of the model's conductances
/// (sample s is seeded by seed + s, so any single sample reproduces in
/// isolation), evaluates each, and summarizes. The input model is cloned per
/// sample and never mutated.
VariationSummary variation_monte_carlo(const Model& model, const Dataset& ds,
                                       const DeviceModel& device,
                                       int n_samples, std::uint64_t seed);

/// One (bits, nonlinearity, sigma) cell of a cross-scheme comparison.
struct ComparisonCell {
  int bits = 0;
  double nonlinearity = 0.0;
  double sigma = 0.0;
  std::map<std::string, double> mean_accuracy;      // per scheme
  std::map<std::string, double> pairwise_diff;      // "de-acm", "acm-bc", "de-bc"
  bool ordering_ok = true; // acc(de) >= acc(acm) >= acc(bc) within slack
  std::string violation;   // human-readable reason when ordering_ok is false
};

struct ComparisonReport {
  double slack = 0.0;
  std::vector<ComparisonCell> cells;
  bool all_ok = true;
};

/// Groups records by (bits, nonlinearity, sigma), reduces each run (same
/// scheme and seed) to a single accuracy — the final epoch of a training
/// run, or the sample mean of a variation run (rows with NaN train fields) —
/// and checks the expected ordering with the given slack. Cells with fewer
/// than two schemes raise ComparisonError.
ComparisonReport compare_schemes(const std::vector<MetricsRecord>& records,
                                 double slack);

} // namespace xbarmap
