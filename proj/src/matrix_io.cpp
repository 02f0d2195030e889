/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "xbarmap/matrix_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "xbarmap/errors.hpp"
#include "xbarmap/metrics.hpp"

namespace xbarmap {

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("matrix csv: cannot open " + path);
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        while (used < field.size() && std::isspace(static_cast<unsigned char>(
                                          field[used]))) {
          ++used;
        }
        if (used != field.size()) {
          throw std::invalid_argument(field);
        }
        row.push_back(v);
      } catch (const std::exception&) {
        throw FormatError("matrix csv: unparsable field '" + field +
                          "' at line " + std::to_string(line_no) + " of " +
                          path);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError("matrix csv: ragged row at line " +
                        std::to_string(line_no) + " of " + path);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw FormatError("matrix csv: " + path + " is empty");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("matrix csv: cannot write " + path);
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

} // namespace xbarmap
