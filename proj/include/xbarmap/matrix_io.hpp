/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <Eigen/Dense>
#include <string>

namespace xbarmap {

/// Reads a dense matrix from headerless CSV (one row per line). Raises
/// FormatError on ragged rows or unparsable fields.
Eigen::MatrixXd read_matrix_csv(const std::string& path);

/// Writes a dense matrix as headerless CSV with shortest round-trip number
/// formatting.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);

} // namespace xbarmap
