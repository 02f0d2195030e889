/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "oracles.hpp"
#include "xbarmap/errors.hpp"
#include "xbarmap/eval.hpp"
#include "xbarmap/metrics.hpp"

using namespace xbarmap;

namespace {

Model make_trained_model(ModelType type, int bits, std::uint64_t seed,
                         const Dataset& train_ds) {
  DeviceModel device;
  device.bits = bits;
  device.activation_bits = 8;
  Model model = initialize_model(
      mlp_spec({static_cast<int>(train_ds.dim()), 12, train_ds.n_classes}),
      type, device, seed);
  TrainConfig config;
  config.epochs = 5;
  config.seed = seed;
  train(model, train_ds, train_ds, config);
  return model;
}

MetricsRecord record(const std::string& scheme, int bits, double nu,
                     double sigma, std::uint64_t seed, int idx, double loss,
                     double train_acc, double test_acc) {
  MetricsRecord r;
  r.scheme = scheme;
  r.bits = bits;
  r.nonlinearity = nu;
  r.sigma = sigma;
  r.seed = seed;
  r.epoch_or_sample = idx;
  r.train_loss = loss;
  r.train_accuracy = train_acc;
  r.test_accuracy = test_acc;
  return r;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

TEST_CASE("evaluate matches a per-example oracle loop") {
  const Dataset ds = synthetic_blobs(3, 8, 30, 6.0, 17);
  Model model = make_trained_model(ModelType::baseline, 8, 17, ds);

  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    Eigen::Index pred;
    model.forward(ds.features.col(i), false).col(0).maxCoeff(&pred);
    if (pred == ds.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  CHECK(evaluate(model, ds) ==
        doctest::Approx(static_cast<double>(correct) / ds.size()));

  Dataset empty;
  empty.features.resize(8, 0);
  empty.n_classes = 3;
  CHECK_THROWS_AS(evaluate(model, empty), InputError);
}

TEST_CASE("evaluate edge values") {
  // A model with zero weights predicts class 0 everywhere: accuracy is the
  // fraction of class-0 examples, 1/n_classes on a balanced set.
  const Dataset ds = synthetic_blobs(10, 16, 10, 5.0, 3);
  DeviceModel device;
  Model model = initialize_model(mlp_spec({16, 10}), ModelType::baseline,
                                 device, 1);
  auto* dense = dynamic_cast<DenseLayer*>(model.layers[0].get());
  dense->set_weight(Eigen::MatrixXd::Zero(10, 16));
  CHECK(evaluate(model, ds) == doctest::Approx(0.1));

  Dataset one;
  one.features = ds.features.col(0);
  one.labels = {0};
  one.n_classes = 10;
  dense->set_weight(Eigen::MatrixXd::Identity(10, 16) * 0.0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(10, 16);
  w.row(0).setConstant(1.0); // class 0 always wins
  dense->set_weight(w);
  CHECK(evaluate(model, one) == doctest::Approx(1.0));
}

TEST_CASE("variation monte carlo") {
  const Dataset ds = synthetic_blobs(2, 8, 40, 2.5, 23);
  Model model = make_trained_model(ModelType::acm, 3, 23, ds);

  SUBCASE("sigma = 0 gives the deterministic accuracy with zero std") {
    DeviceModel noiseless = model.device;
    noiseless.variation_sigma = 0.0;
    const VariationSummary summary =
        variation_monte_carlo(model, ds, noiseless, 5, 9);
    const double base = evaluate(model, ds);
    CHECK(summary.std_accuracy == 0.0);
    for (double acc : summary.per_sample) CHECK(acc == base);
  }
  SUBCASE("the input model is never mutated") {
    DeviceModel noisy = model.device;
    noisy.variation_sigma = 0.2;
    Model snapshot = model.clone();
    const Eigen::MatrixXd w_before =
        snapshot.mapped_cores()[0]->effective_weight();
    variation_monte_carlo(model, ds, noisy, 8, 11);
    CHECK(model.mapped_cores()[0]->effective_weight() == w_before);
  }
  SUBCASE("identical seeds give identical summaries") {
    DeviceModel noisy = model.device;
    noisy.variation_sigma = 0.15;
    const VariationSummary a = variation_monte_carlo(model, ds, noisy, 25, 31);
    const VariationSummary b = variation_monte_carlo(model, ds, noisy, 25, 31);
    CHECK(a.per_sample == b.per_sample);
    CHECK(a.mean_accuracy == b.mean_accuracy);
  }
  SUBCASE("summary statistics are recomputable from the sample list") {
    DeviceModel noisy = model.device;
    noisy.variation_sigma = 0.1;
    const VariationSummary s = variation_monte_carlo(model, ds, noisy, 12, 5);
    double mean = 0.0;
    for (double acc : s.per_sample) mean += acc;
    mean /= s.per_sample.size();
    double var = 0.0;
    for (double acc : s.per_sample) var += (acc - mean) * (acc - mean);
    var /= (s.per_sample.size() - 1);
    CHECK(std::abs(s.mean_accuracy - mean) <= 1e-12);
    CHECK(std::abs(s.std_accuracy - std::sqrt(var)) <= 1e-12);
  }
  SUBCASE("larger sigma does not shrink accuracy spread on average") {
    double spread_small = 0.0, spread_large = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      DeviceModel low = model.device;
      low.variation_sigma = 0.05;
      DeviceModel high = model.device;
      high.variation_sigma = 0.2;
      spread_small +=
          variation_monte_carlo(model, ds, low, 25, seed).std_accuracy;
      spread_large +=
          variation_monte_carlo(model, ds, high, 25, seed).std_accuracy;
    }
    CHECK(spread_large >= spread_small - 0.005);
  }
}

TEST_CASE("compare_schemes") {
  SUBCASE("identical metrics pass at any slack") {
    std::vector<MetricsRecord> records;
    for (const char* scheme : {"de", "bc", "acm"}) {
      records.push_back(record(scheme, 3, 0, 0, 1, 0, 0.5, 0.9, 0.8));
    }
    const ComparisonReport report = compare_schemes(records, 0.0);
    CHECK(report.all_ok);
    REQUIRE(report.cells.size() == 1);
    CHECK(report.cells[0].pairwise_diff.at("de-acm") == doctest::Approx(0.0));
    CHECK(report.cells[0].pairwise_diff.at("acm-bc") == doctest::Approx(0.0));
  }
  SUBCASE("hand-built ordering example") {
    std::vector<MetricsRecord> records;
    records.push_back(record("de", 3, 0, 0, 1, 0, 0.1, 0.95, 0.9));
    records.push_back(record("acm", 3, 0, 0, 1, 0, 0.1, 0.9, 0.85));
    records.push_back(record("bc", 3, 0, 0, 1, 0, 0.2, 0.8, 0.7));
    const ComparisonReport report = compare_schemes(records, 0.01);
    CHECK(report.all_ok);
    CHECK(report.cells[0].pairwise_diff.at("de-acm") == doctest::Approx(0.05));
    CHECK(report.cells[0].pairwise_diff.at("acm-bc") == doctest::Approx(0.15));
  }
  SUBCASE("violations beyond the slack are flagged with the offending cell") {
    std::vector<MetricsRecord> records;
    records.push_back(record("de", 2, 3.0, 0, 1, 0, 0.1, 0.9, 0.70));
    records.push_back(record("acm", 2, 3.0, 0, 1, 0, 0.1, 0.9, 0.80));
    records.push_back(record("bc", 2, 3.0, 0, 1, 0, 0.1, 0.9, 0.75));
    const ComparisonReport report = compare_schemes(records, 0.01);
    CHECK_FALSE(report.all_ok);
    CHECK(report.cells[0].violation.find("bits=2") != std::string::npos);
  }
  SUBCASE("a slack covering the violation passes") {
    std::vector<MetricsRecord> records;
    records.push_back(record("de", 3, 0, 0, 1, 0, 0.1, 0.9, 0.84));
    records.push_back(record("acm", 3, 0, 0, 1, 0, 0.1, 0.9, 0.85));
    CHECK(compare_schemes(records, 0.02).all_ok);
    CHECK_FALSE(compare_schemes(records, 0.001).all_ok);
  }
  SUBCASE("single scheme raises a grouping error") {
    std::vector<MetricsRecord> records;
    records.push_back(record("de", 3, 0, 0, 1, 0, 0.1, 0.9, 0.9));
    records.push_back(record("de", 3, 0, 0, 2, 0, 0.1, 0.9, 0.91));
    CHECK_THROWS_AS(compare_schemes(records, 0.01), ComparisonError);
  }
  SUBCASE("training runs reduce to the final epoch") {
    std::vector<MetricsRecord> records;
    records.push_back(record("de", 3, 0, 0, 1, 0, 0.5, 0.6, 0.6));
    records.push_back(record("de", 3, 0, 0, 1, 1, 0.2, 0.9, 0.9));
    records.push_back(record("acm", 3, 0, 0, 1, 0, 0.5, 0.6, 0.55));
    records.push_back(record("acm", 3, 0, 0, 1, 1, 0.2, 0.9, 0.88));
    const ComparisonReport report = compare_schemes(records, 0.01);
    CHECK(report.cells[0].mean_accuracy.at("de") == doctest::Approx(0.9));
    CHECK(report.cells[0].mean_accuracy.at("acm") == doctest::Approx(0.88));
  }
  SUBCASE("variation runs reduce to the sample mean") {
    std::vector<MetricsRecord> records;
    records.push_back(record("de", 3, 0, 0.15, 1, 0, kNaN, kNaN, 0.8));
    records.push_back(record("de", 3, 0, 0.15, 1, 1, kNaN, kNaN, 0.6));
    records.push_back(record("acm", 3, 0, 0.15, 1, 0, kNaN, kNaN, 0.65));
    const ComparisonReport report = compare_schemes(records, 0.01);
    CHECK(report.cells[0].mean_accuracy.at("de") == doctest::Approx(0.7));
    CHECK(report.cells[0].mean_accuracy.at("acm") == doctest::Approx(0.65));
  }
}

TEST_CASE("metrics csv and jsonl round trips") {
  std::vector<MetricsRecord> records;
  records.push_back(record("acm", 3, 2.0, 0.15, 42, 7, 0.123456789, 0.875, 0.8));
  records.push_back(record("bc", 2, 0.0, 0.0, 1, 0, kNaN, kNaN, 0.5));

  const std::string path = "/tmp/xbarmap_test_metrics.csv";
  write_csv(path, records);
  const std::vector<MetricsRecord> back = read_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].scheme == "acm");
  CHECK(back[0].train_loss == records[0].train_loss); // exact round trip
  CHECK(back[0].seed == 42);
  CHECK(std::isnan(back[1].train_loss));
  CHECK(back[1].test_accuracy == 0.5);

  // Identical content on rewrite.
  const std::string csv_a = to_csv(records);
  const std::string csv_b = to_csv(back);
  CHECK(csv_a == csv_b);

  const std::string jsonl = to_jsonl(records);
  CHECK(jsonl.find("\"train_loss\":null") != std::string::npos);
  CHECK(jsonl.find("\"scheme\":\"acm\"") != std::string::npos);
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_csv("/tmp/xbarmap_missing_metrics.csv"), FormatError);
}
