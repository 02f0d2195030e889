/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace xbarmap {

/// An immutable classification dataset. Features live in [0, 1]; one column
/// per example.
struct Dataset {
  Eigen::MatrixXd features; // dim x n
  std::vector<int> labels;  // size n, values in [0, n_classes)
  int n_classes = 0;
  std::string split = "train";

  Eigen::Index size() const { return features.cols(); }
  Eigen::Index dim() const { return features.rows(); }
};

/// Loads an images/labels pair in the big-endian IDX format (magic
/// 0x00000803 for 3-D image files, 0x00000801 for label files). Pixels are
/// scaled by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes a dataset as an IDX pair; features must describe square images
/// (dim = side^2) or a given rows x cols shape. Pixels are rounded to the
/// nearest byte, so the pair round-trips exactly when features already lie
/// on the 1/255 grid.
void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path, int rows = 0, int cols = 0);

/// Gaussian blobs with mutually equidistant class means (pairwise distance =
/// separation) and unit within-class std, clamped to [0, 1]. Requires
/// dim >= n_classes. Deterministic given the seed.
Dataset synthetic_blobs(int n_classes, int dim, int n_per_class,
                        double separation, std::uint64_t seed);

/// Deterministic 28x28 digit images: glyphs rendered with seeded shifts,
/// scale, stroke intensity, blur and pixel noise; features snapped to the
/// 1/255 grid. A download-free stand-in with the same shape as handwritten
/// digit corpora (784 features, 10 classes).
Dataset synthetic_digits(int n_per_class, std::uint64_t seed);

/// Class-stratified seeded sample of size n (per-class counts differ by at
/// most one when classes are balanced).
Dataset subset(const Dataset& ds, Eigen::Index n, std::uint64_t seed);

} // namespace xbarmap
