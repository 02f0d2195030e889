/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "xbarmap/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xbarmap/errors.hpp"

namespace xbarmap {

std::string format_double(double v) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

std::string to_csv(const std::vector<MetricsRecord>& records) {
  std::ostringstream out;
  out << kMetricsCsvHeader << '\n';
  for (const MetricsRecord& r : records) {
    out << r.scheme << ',' << r.bits << ',' << format_double(r.nonlinearity)
        << ',' << format_double(r.sigma) << ',' << r.seed << ','
        << r.epoch_or_sample << ',' << format_double(r.train_loss) << ','
        << format_double(r.train_accuracy) << ','
        << format_double(r.test_accuracy) << '\n';
  }
  return out.str();
}

std::string to_jsonl(const std::vector<MetricsRecord>& records) {
  std::ostringstream out;
  for (const MetricsRecord& r : records) {
    nlohmann::ordered_json j;
    j["scheme"] = r.scheme;
    j["bits"] = r.bits;
    j["nonlinearity"] = r.nonlinearity;
    j["sigma"] = r.sigma;
    j["seed"] = r.seed;
    j["epoch_or_sample"] = r.epoch_or_sample;
    // JSON has no NaN literal; variation rows carry null train fields.
    if (std::isnan(r.train_loss)) {
      j["train_loss"] = nullptr;
      j["train_acc"] = nullptr;
    } else {
      j["train_loss"] = r.train_loss;
      j["train_acc"] = r.train_accuracy;
    }
    j["test_acc"] = r.test_accuracy;
    out << j.dump() << '\n';
  }
  return out.str();
}

void write_csv(const std::string& path,
               const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("metrics: cannot write " + path);
  }
  out << to_csv(records);
}

void write_jsonl(const std::string& path,
                 const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("metrics: cannot write " + path);
  }
  out << to_jsonl(records);
}

std::vector<MetricsRecord> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("metrics: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader) {
    throw FormatError("metrics: bad header in " + path);
  }
  std::vector<MetricsRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) {
      fields.push_back(field);
    }
    if (fields.size() != 9) {
      throw FormatError("metrics: line " + std::to_string(line_no) + " of " +
                        path + " has " + std::to_string(fields.size()) +
                        " fields, expected 9");
    }
    try {
      MetricsRecord r;
      r.scheme = fields[0];
      r.bits = std::stoi(fields[1]);
      r.nonlinearity = std::stod(fields[2]);
      r.sigma = std::stod(fields[3]);
      r.seed = std::stoull(fields[4]);
      r.epoch_or_sample = std::stoi(fields[5]);
      r.train_loss = std::stod(fields[6]);
      r.train_accuracy = std::stod(fields[7]);
      r.test_accuracy = std::stod(fields[8]);
      records.push_back(std::move(r));
    } catch (const std::exception&) {
      throw FormatError("metrics: unparsable line " + std::to_string(line_no) +
                        " in " + path);
    }
  }
  return records;
}

} // namespace xbarmap
