/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

// Command-line front end: validate | decompose | train | infer-variation |
// compare. Exit codes: 0 success, 1 failed check, 2 usage/config error,
// 3 bad input data, 4 training divergence, 5 checkpoint error,
// 6 comparison grouping error.

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "xbarmap/checkpoint.hpp"
#include "xbarmap/config.hpp"
#include "xbarmap/errors.hpp"
#include "xbarmap/eval.hpp"
#include "xbarmap/matrix_io.hpp"
#include "xbarmap/metrics.hpp"
#include "xbarmap/network.hpp"
#include "xbarmap/periphery.hpp"
#include "xbarmap/rng.hpp"

namespace fs = std::filesystem;
using namespace xbarmap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitBadInput = 3;
constexpr int kExitDiverged = 4;
constexpr int kExitCheckpoint = 5;
constexpr int kExitComparison = 6;

MappingScheme scheme_from_flag(const std::string& name) {
  const auto scheme = parse_scheme(name);
  if (!scheme) {
    throw ConfigError("unknown scheme '" + name + "' (use de, bc or acm)");
  }
  return *scheme;
}

int run_validate(const std::string& scheme_name_str, long long n_out) {
  const PeripheryMatrix s =
      build_periphery(scheme_from_flag(scheme_name_str), n_out);
  const ValidationReport report = validate_periphery(s);
  std::cout << "scheme: " << scheme_name_str << "  n_out: " << s.n_out
            << "  n_dummy: " << s.n_dummy << '\n';
  std::cout << "rank condition (rank == n_out): "
            << (report.rank_ok ? "ok" : "FAIL") << '\n';
  std::cout << "positive null vector (rows sum to zero): "
            << (report.positive_null_ok ? "ok" : "FAIL") << '\n';
  return report.rank_ok && report.positive_null_ok ? kExitOk
                                                   : kExitCheckFailed;
}

int run_decompose(const std::string& input, const std::string& scheme_name_str,
                  double g_max, const std::string& output) {
  const MappingScheme scheme = scheme_from_flag(scheme_name_str);
  const Eigen::MatrixXd w = read_matrix_csv(input);
  const Decomposition d = decompose(w, scheme, g_max);
  const PeripheryMatrix s = build_periphery(scheme, w.rows());
  const double err = (recompose(s, d.m) * d.scale - w).cwiseAbs().maxCoeff();
  const double bar = 1e-9 * (1.0 + w.cwiseAbs().maxCoeff());
  if (err > bar) {
    std::cerr << "decompose: recomposition check failed (|S*M*scale - W| = "
              << err << "), refusing to write output\n";
    return kExitCheckFailed;
  }
  write_matrix_csv(output, d.m);

  nlohmann::ordered_json sidecar;
  sidecar["scale"] = d.scale;
  sidecar["scheme"] = scheme_name_str;
  sidecar["g_max"] = g_max;
  sidecar["dims"] = {{"n_out", w.rows()},
                     {"n_in", w.cols()},
                     {"n_dummy", s.n_dummy}};
  const std::string sidecar_path = output + ".json";
  std::ofstream side(sidecar_path, std::ios::binary);
  if (!side) {
    throw FormatError("decompose: cannot write " + sidecar_path);
  }
  side << sidecar.dump(1) << '\n';

  std::cout << "wrote " << output << " (" << d.m.rows() << "x" << d.m.cols()
            << ") and " << sidecar_path
            << "; scale = " << format_double(d.scale) << '\n';
  return kExitOk;
}

std::string checkpoint_name(const SweepPoint& p) {
  return "checkpoint_" + std::string(model_type_name(p.mapping)) + "_b" +
         std::to_string(p.bits) + "_nu" + format_double(p.nonlinearity) +
         "_s" + std::to_string(p.seed) + ".json";
}

struct PointResult {
  std::vector<MetricsRecord> rows;
  bool diverged = false;
  std::exception_ptr error;
};

int run_train(const std::string& config_path, int jobs) {
  const ExperimentConfig config = ExperimentConfig::from_file(config_path);
  const auto [train_ds, test_ds] = load_dataset(config.dataset);
  fs::create_directories(config.output.directory);
  const ModelSpec spec =
      build_model_spec(config.model, train_ds.dim(), train_ds.n_classes);
  const std::vector<SweepPoint> points = sweep_points(config);
  std::vector<PointResult> results(points.size());

  auto run_point = [&](std::size_t i) {
    const SweepPoint& p = points[i];
    PointResult& r = results[i];
    try {
      DeviceModel device;
      device.bits = p.bits == 0 ? 8 : p.bits; // placeholder under continuous
      device.nonlinearity = p.nonlinearity;
      device.g_max = config.device.g_max;
      device.variation_sigma = config.device.variation_sigma;
      device.activation_bits = config.device.activation_bits;
      const Backing backing =
          p.bits == 0 ? Backing::continuous : Backing::device;

      Model model = initialize_model(spec, p.mapping, device, p.seed, backing);
      TrainConfig tc;
      tc.learning_rate = config.training.learning_rate;
      tc.epochs = config.training.epochs;
      tc.batch_size = config.training.batch_size;
      tc.seed = p.seed;
      const TrainResult tr = train(model, train_ds, test_ds, tc);

      for (const EpochMetrics& em : tr.history) {
        MetricsRecord rec;
        rec.scheme = std::string(model_type_name(p.mapping));
        rec.bits = p.bits;
        rec.nonlinearity = p.nonlinearity;
        rec.sigma = 0.0; // training runs are variation-free
        rec.seed = p.seed;
        rec.epoch_or_sample = em.epoch;
        rec.train_loss = em.train_loss;
        rec.train_accuracy = em.train_accuracy;
        rec.test_accuracy = em.test_accuracy;
        r.rows.push_back(std::move(rec));
      }
      r.diverged = tr.diverged;
      if (!tr.diverged && config.output.checkpoints) {
        save_checkpoint(model, (fs::path(config.output.directory) /
                                checkpoint_name(p))
                                   .string());
      }
    } catch (...) {
      r.error = std::current_exception();
    }
  };

  const int thread_count =
      std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
  if (thread_count <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count));
    for (int t = 0; t < thread_count; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < points.size();) {
          run_point(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  for (const PointResult& r : results) {
    if (r.error) std::rethrow_exception(r.error);
  }

  std::vector<MetricsRecord> all_rows;
  for (const PointResult& r : results) {
    all_rows.insert(all_rows.end(), r.rows.begin(), r.rows.end());
  }
  const fs::path out_dir(config.output.directory);
  for (const std::string& format : config.output.formats) {
    if (format == "csv") {
      write_csv((out_dir / "train_metrics.csv").string(), all_rows);
    } else if (format == "jsonl") {
      write_jsonl((out_dir / "train_metrics.jsonl").string(), all_rows);
    }
  }

  std::printf("%-9s %4s %5s %6s | %10s %9s %9s\n", "scheme", "bits", "nu",
              "seed", "train_loss", "train_acc", "test_acc");
  bool any_diverged = false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const SweepPoint& p = points[i];
    const PointResult& r = results[i];
    if (r.diverged) {
      any_diverged = true;
      std::printf("%-9s %4d %5s %6llu | DIVERGED\n",
                  std::string(model_type_name(p.mapping)).c_str(), p.bits,
                  format_double(p.nonlinearity).c_str(),
                  static_cast<unsigned long long>(p.seed));
      continue;
    }
    if (r.rows.empty()) continue;
    const MetricsRecord& last = r.rows.back();
    std::printf("%-9s %4d %5s %6llu | %10.4f %9.4f %9.4f\n",
                last.scheme.c_str(), last.bits,
                format_double(last.nonlinearity).c_str(),
                static_cast<unsigned long long>(last.seed), last.train_loss,
                last.train_accuracy, last.test_accuracy);
  }
  if (any_diverged) {
    std::cerr << "training diverged for at least one sweep point (see table); "
                 "metrics written for completed epochs\n";
    return kExitDiverged;
  }
  return kExitOk;
}

int run_infer_variation(const std::string& checkpoint_path,
                        const std::string& config_path,
                        const std::string& output_override) {
  const ExperimentConfig config = ExperimentConfig::from_file(config_path);
  Model model = load_checkpoint(checkpoint_path);
  const auto [train_ds, test_ds] = load_dataset(config.dataset);
  (void)train_ds;
  const std::string out_dir_str =
      output_override.empty() ? config.output.directory : output_override;
  fs::create_directories(out_dir_str);
  const fs::path out_dir(out_dir_str);

  const std::uint64_t base_seed = config.training.seeds.front();
  const bool device_backed =
      !model.mapped_cores().empty() && model.backing == Backing::device;
  const int context_bits = device_backed ? model.device.bits : 0;

  std::vector<MetricsRecord> rows;
  nlohmann::ordered_json summary_json = nlohmann::ordered_json::array();
  std::cout << "sigma     mean_acc   std_acc   (n_samples = "
            << config.eval.n_samples << ")\n";
  for (std::size_t si = 0; si < config.eval.sigmas.size(); ++si) {
    const double sigma = config.eval.sigmas[si];
    DeviceModel noise = model.device;
    noise.variation_sigma = sigma;
    const std::uint64_t sweep_seed =
        derive_seed(base_seed, "variation-sweep", si);
    const VariationSummary summary = variation_monte_carlo(
        model, test_ds, noise, config.eval.n_samples, sweep_seed);
    for (int s = 0; s < summary.n_samples; ++s) {
      MetricsRecord rec;
      rec.scheme = std::string(model_type_name(model.type));
      rec.bits = context_bits;
      rec.nonlinearity = model.device.nonlinearity;
      rec.sigma = sigma;
      rec.seed = base_seed;
      rec.epoch_or_sample = s;
      rec.train_loss = std::numeric_limits<double>::quiet_NaN();
      rec.train_accuracy = std::numeric_limits<double>::quiet_NaN();
      rec.test_accuracy = summary.per_sample[static_cast<std::size_t>(s)];
      rows.push_back(std::move(rec));
    }
    nlohmann::ordered_json entry;
    entry["sigma"] = sigma;
    entry["n_samples"] = summary.n_samples;
    entry["mean_accuracy"] = summary.mean_accuracy;
    entry["std_accuracy"] = summary.std_accuracy;
    summary_json.push_back(std::move(entry));
    std::printf("%-8s  %8.4f   %7.4f\n", format_double(sigma).c_str(),
                summary.mean_accuracy, summary.std_accuracy);
  }

  for (const std::string& format : config.output.formats) {
    if (format == "csv") {
      write_csv((out_dir / "variation_metrics.csv").string(), rows);
    } else if (format == "jsonl") {
      write_jsonl((out_dir / "variation_metrics.jsonl").string(), rows);
    }
  }
  std::ofstream summary_out(out_dir / "variation_summary.json",
                            std::ios::binary);
  summary_out << summary_json.dump(1) << '\n';
  return kExitOk;
}

int run_compare(const std::string& metrics_dir, double slack,
                const std::string& output_path) {
  if (!fs::is_directory(metrics_dir)) {
    throw ComparisonError("compare: '" + metrics_dir + "' is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(metrics_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw ComparisonError("compare: no .csv metrics files in " + metrics_dir);
  }
  std::vector<MetricsRecord> records;
  for (const fs::path& file : files) {
    const std::vector<MetricsRecord> part = read_csv(file.string());
    records.insert(records.end(), part.begin(), part.end());
  }
  const ComparisonReport report = compare_schemes(records, slack);

  nlohmann::ordered_json j;
  j["slack"] = report.slack;
  j["all_ok"] = report.all_ok;
  j["cells"] = nlohmann::ordered_json::array();
  for (const ComparisonCell& cell : report.cells) {
    nlohmann::ordered_json cj;
    cj["bits"] = cell.bits;
    cj["nonlinearity"] = cell.nonlinearity;
    cj["sigma"] = cell.sigma;
    cj["mean_accuracy"] = cell.mean_accuracy;
    cj["pairwise_diff"] = cell.pairwise_diff;
    cj["ordering_ok"] = cell.ordering_ok;
    if (!cell.ordering_ok) cj["violation"] = cell.violation;
    j["cells"].push_back(std::move(cj));
  }
  const std::string out_path =
      output_path.empty()
          ? (fs::path(metrics_dir) / "comparison_report.json").string()
          : output_path;
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw FormatError("compare: cannot write " + out_path);
  }
  out << j.dump(1) << '\n';

  for (const ComparisonCell& cell : report.cells) {
    std::cout << "bits=" << cell.bits
              << " nu=" << format_double(cell.nonlinearity)
              << " sigma=" << format_double(cell.sigma) << " :";
    for (const auto& [scheme, acc] : cell.mean_accuracy) {
      std::printf(" %s=%.4f", scheme.c_str(), acc);
    }
    std::cout << (cell.ordering_ok ? "  [ordering ok]" : "  [ORDERING FAIL]")
              << '\n';
    if (!cell.ordering_ok) {
      std::cout << "  " << cell.violation << '\n';
    }
  }
  std::cout << "report: " << out_path << '\n';
  return report.all_ok ? kExitOk : kExitCheckFailed;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"xbarmap: signed matrix-vector multiplication on non-negative "
               "crossbar arrays (de/bc/acm mappings, device non-idealities)"};
  app.require_subcommand(1);

  std::string scheme = "acm";
  long long n_out = 1;
  CLI::App* validate =
      app.add_subcommand("validate", "check periphery matrix conditions");
  validate->add_option("--scheme", scheme, "mapping scheme (de|bc|acm)")
      ->required()
      ->check(CLI::IsMember({"de", "bc", "acm"}));
  validate->add_option("--n-out", n_out, "number of outputs")
      ->required()
      ->check(CLI::Range(1LL, 1000000LL));

  std::string input, output = "m.csv";
  double g_max = 1.0;
  CLI::App* decompose_cmd = app.add_subcommand(
      "decompose", "decompose a signed CSV matrix into a crossbar matrix");
  decompose_cmd->add_option("--input", input, "signed weight matrix (CSV)")
      ->required();
  decompose_cmd->add_option("--scheme", scheme, "mapping scheme (de|bc|acm)")
      ->required()
      ->check(CLI::IsMember({"de", "bc", "acm"}));
  decompose_cmd->add_option("--g-max", g_max, "conductance upper rail")
      ->check(CLI::PositiveNumber);
  decompose_cmd->add_option("--output", output,
                            "output CSV path (sidecar: <output>.json)");

  std::string config_path;
  int jobs = 1;
  CLI::App* train_cmd =
      app.add_subcommand("train", "run the configured training sweep");
  train_cmd->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  train_cmd->add_option("--jobs", jobs, "parallel sweep workers")
      ->check(CLI::Range(1, 256));

  std::string checkpoint_path, output_dir;
  CLI::App* infer_cmd = app.add_subcommand(
      "infer-variation", "variation Monte Carlo on a trained checkpoint");
  infer_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")
      ->required();
  infer_cmd->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  infer_cmd->add_option("--output-dir", output_dir,
                        "override the config output directory");

  std::string metrics_dir, report_path;
  double slack = 0.01;
  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "cross-scheme ordering report from metrics CSV files");
  compare_cmd->add_option("--metrics-dir", metrics_dir, "directory of .csv")
      ->required();
  compare_cmd->add_option("--slack", slack,
                          "allowed ordering slack (accuracy fraction)");
  compare_cmd->add_option("--output", report_path, "report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*validate) return run_validate(scheme, n_out);
    if (*decompose_cmd) return run_decompose(input, scheme, g_max, output);
    if (*train_cmd) return run_train(config_path, jobs);
    if (*infer_cmd)
      return run_infer_variation(checkpoint_path, config_path, output_dir);
    if (*compare_cmd) return run_compare(metrics_dir, slack, report_path);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    std::cerr << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const ComparisonError& e) {
    std::cerr << e.what() << '\n';
    return kExitComparison;
  } catch (const FormatError& e) {
    std::cerr << e.what() << '\n';
    return kExitBadInput;
  } catch (const InputError& e) {
    std::cerr << e.what() << '\n';
    return kExitBadInput;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}
