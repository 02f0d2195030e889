/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "xbarmap/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "xbarmap/errors.hpp"
#include "xbarmap/rng.hpp"

namespace xbarmap {

double evaluate(Model& model, const Dataset& ds) {
  if (ds.size() == 0) {
    throw InputError("evaluate: empty dataset");
  }
  return model_accuracy(model, ds);
}

VariationSummary variation_monte_carlo(const Model& model, const Dataset& ds,
                                       const DeviceModel& device,
                                       int n_samples, std::uint64_t seed) {
  if (n_samples < 1) {
    throw InputError("variation_monte_carlo: n_samples must be >= 1");
  }
  device.validate();

  VariationSummary summary;
  summary.n_samples = n_samples;
  summary.per_sample.reserve(static_cast<std::size_t>(n_samples));
  for (int s = 0; s < n_samples; ++s) {
    Model perturbed = model.clone();
    Rng rng = make_rng(seed + static_cast<std::uint64_t>(s), "variation");
    for (MappedCore* core : perturbed.mapped_cores()) {
      core->perturb(device, rng);
    }
    summary.per_sample.push_back(evaluate(perturbed, ds));
  }

  double sum = 0.0;
  for (double acc : summary.per_sample) sum += acc;
  summary.mean_accuracy = sum / n_samples;
  if (n_samples > 1) {
    double sq = 0.0;
    for (double acc : summary.per_sample) {
      sq += (acc - summary.mean_accuracy) * (acc - summary.mean_accuracy);
    }
    summary.std_accuracy = std::sqrt(sq / (n_samples - 1));
  }
  return summary;
}

namespace {

struct RunKey {
  std::string scheme;
  std::uint64_t seed;
  bool operator<(const RunKey& other) const {
    return std::tie(scheme, seed) < std::tie(other.scheme, other.seed);
  }
};

struct CellKey {
  int bits;
  double nonlinearity;
  double sigma;
  bool operator<(const CellKey& other) const {
    return std::tie(bits, nonlinearity, sigma) <
           std::tie(other.bits, other.nonlinearity, other.sigma);
  }
};

std::string cell_label(const CellKey& key) {
  return "bits=" + std::to_string(key.bits) +
         ", nu=" + format_double(key.nonlinearity) +
         ", sigma=" + format_double(key.sigma);
}

// A training run reduces to its final-epoch test accuracy; a variation run
// (all rows with NaN train fields) to the mean over samples.
double reduce_run(const std::vector<const MetricsRecord*>& rows) {
  const bool variation =
      std::all_of(rows.begin(), rows.end(), [](const MetricsRecord* r) {
        return std::isnan(r->train_loss);
      });
  if (variation) {
    double sum = 0.0;
    for (const MetricsRecord* r : rows) sum += r->test_accuracy;
    return sum / static_cast<double>(rows.size());
  }
  const MetricsRecord* last = rows.front();
  for (const MetricsRecord* r : rows) {
    if (r->epoch_or_sample >= last->epoch_or_sample) last = r;
  }
  return last->test_accuracy;
}

} // namespace

ComparisonReport compare_schemes(const std::vector<MetricsRecord>& records,
                                 double slack) {
  if (records.empty()) {
    throw ComparisonError("compare_schemes: no records");
  }
  std::map<CellKey, std::map<RunKey, std::vector<const MetricsRecord*>>> cells;
  for (const MetricsRecord& r : records) {
    cells[CellKey{r.bits, r.nonlinearity, r.sigma}][RunKey{r.scheme, r.seed}]
        .push_back(&r);
  }

  ComparisonReport report;
  report.slack = slack;
  for (const auto& [cell_key, runs] : cells) {
    std::map<std::string, std::vector<double>> per_scheme;
    for (const auto& [run_key, rows] : runs) {
      per_scheme[run_key.scheme].push_back(reduce_run(rows));
    }
    if (per_scheme.size() < 2) {
      throw ComparisonError("compare_schemes: cell (" + cell_label(cell_key) +
                            ") has " + std::to_string(per_scheme.size()) +
                            " scheme(s); need at least two to compare");
    }

    ComparisonCell cell;
    cell.bits = cell_key.bits;
    cell.nonlinearity = cell_key.nonlinearity;
    cell.sigma = cell_key.sigma;
    for (const auto& [scheme, values] : per_scheme) {
      double sum = 0.0;
      for (double v : values) sum += v;
      cell.mean_accuracy[scheme] = sum / static_cast<double>(values.size());
    }

    auto mean_of = [&](const std::string& scheme) -> const double* {
      const auto it = cell.mean_accuracy.find(scheme);
      return it == cell.mean_accuracy.end() ? nullptr : &it->second;
    };
    const double* de = mean_of("de");
    const double* acm = mean_of("acm");
    const double* bc = mean_of("bc");
    if (de && acm) cell.pairwise_diff["de-acm"] = *de - *acm;
    if (acm && bc) cell.pairwise_diff["acm-bc"] = *acm - *bc;
    if (de && bc) cell.pairwise_diff["de-bc"] = *de - *bc;

    if (de && acm && *de < *acm - slack) {
      cell.ordering_ok = false;
      cell.violation = "de < acm - slack at " + cell_label(cell_key);
    }
    if (acm && bc && *acm < *bc - slack) {
      cell.ordering_ok = false;
      cell.violation += (cell.violation.empty() ? "" : "; ");
      cell.violation += "acm < bc - slack at " + cell_label(cell_key);
    }
    report.all_ok = report.all_ok && cell.ordering_ok;
    report.cells.push_back(std::move(cell));
  }
  return report;
}

} // namespace xbarmap
