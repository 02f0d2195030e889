/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "xbarmap/periphery.hpp"

#include <algorithm>
#include <cmath>

#include "xbarmap/errors.hpp"

namespace xbarmap {

namespace {

constexpr double kRankPivotTol = 1e-9;

// Numerical rank by full-pivot Gaussian elimination. A pivot counts while its
// magnitude stays above kRankPivotTol relative to the largest pivot seen.
Eigen::Index numerical_rank(Eigen::MatrixXd a) {
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  Eigen::Index rank = 0;
  double largest_pivot = 0.0;
  for (Eigen::Index step = 0; step < std::min(rows, cols); ++step) {
    Eigen::Index pr = step, pc = step;
    double best = 0.0;
    for (Eigen::Index i = step; i < rows; ++i) {
      for (Eigen::Index j = step; j < cols; ++j) {
        if (std::abs(a(i, j)) > best) {
          best = std::abs(a(i, j));
          pr = i;
          pc = j;
        }
      }
    }
    largest_pivot = std::max(largest_pivot, best);
    if (best <= kRankPivotTol * largest_pivot || best == 0.0) {
      break;
    }
    a.row(step).swap(a.row(pr));
    a.col(step).swap(a.col(pc));
    for (Eigen::Index i = step + 1; i < rows; ++i) {
      const double f = a(i, step) / a(step, step);
      a.row(i).tail(cols - step) -= f * a.row(step).tail(cols - step);
    }
    ++rank;
  }
  return rank;
}

} // namespace

std::string_view scheme_name(MappingScheme scheme) {
  switch (scheme) {
  case MappingScheme::de:
    return "de";
  case MappingScheme::bc:
    return "bc";
  case MappingScheme::acm:
    return "acm";
  }
  return "?";
}

std::optional<MappingScheme> parse_scheme(std::string_view name) {
  if (name == "de") return MappingScheme::de;
  if (name == "bc") return MappingScheme::bc;
  if (name == "acm") return MappingScheme::acm;
  return std::nullopt;
}

Eigen::Index dummy_count(MappingScheme scheme, Eigen::Index n_out) {
  return scheme == MappingScheme::de ? 2 * n_out : n_out + 1;
}

PeripheryMatrix build_periphery(MappingScheme scheme, Eigen::Index n_out) {
  if (n_out < 1) {
    throw DimensionError("build_periphery: n_out must be >= 1");
  }
  const Eigen::Index n_dummy = dummy_count(scheme, n_out);
  Eigen::MatrixXi entries = Eigen::MatrixXi::Zero(n_out, n_dummy);
  for (Eigen::Index j = 0; j < n_out; ++j) {
    switch (scheme) {
    case MappingScheme::de:
      entries(j, 2 * j) = 1;
      entries(j, 2 * j + 1) = -1;
      break;
    case MappingScheme::bc:
      entries(j, j) = 1;
      entries(j, n_out) = -1;
      break;
    case MappingScheme::acm:
      entries(j, j) = 1;
      entries(j, j + 1) = -1;
      break;
    }
  }
  return PeripheryMatrix{scheme, n_out, n_dummy, std::move(entries)};
}

ValidationReport validate_periphery(const Eigen::MatrixXi& entries) {
  ValidationReport report{};
  report.rank_ok = numerical_rank(entries.cast<double>()) == entries.rows();
  report.positive_null_ok = true;
  for (Eigen::Index i = 0; i < entries.rows(); ++i) {
    long sum = 0;
    for (Eigen::Index j = 0; j < entries.cols(); ++j) {
      sum += entries(i, j);
    }
    if (sum != 0) {
      report.positive_null_ok = false;
      break;
    }
  }
  return report;
}

ValidationReport validate_periphery(const PeripheryMatrix& s) {
  return validate_periphery(s.entries);
}

Decomposition decompose(const Eigen::MatrixXd& w, MappingScheme scheme,
                        double g_max) {
  if (!w.allFinite()) {
    throw InputError("decompose: weight matrix has non-finite entries");
  }
  if (g_max <= 0.0) {
    throw InputError("decompose: g_max must be positive");
  }
  const Eigen::Index n_out = w.rows();
  const Eigen::Index n_in = w.cols();
  if (n_out < 1 || n_in < 1) {
    throw DimensionError("decompose: weight matrix must be non-empty");
  }

  // The particular solution is linear in W for every scheme (the bc bias row
  // is constant), so a uniform down-scaling of W scales the solution range
  // exactly. Compute the scale first, then decompose W / scale.
  double scale = 1.0;
  switch (scheme) {
  case MappingScheme::de:
    scale = std::max(1.0, w.cwiseAbs().maxCoeff() / g_max);
    break;
  case MappingScheme::bc:
    scale = std::max(1.0, w.cwiseAbs().maxCoeff() / (g_max / 2.0));
    break;
  case MappingScheme::acm: {
    double max_spread = 0.0;
    for (Eigen::Index k = 0; k < n_in; ++k) {
      double cum = 0.0, lo = 0.0, hi = 0.0;
      for (Eigen::Index j = 0; j < n_out; ++j) {
        cum -= w(j, k);
        lo = std::min(lo, cum);
        hi = std::max(hi, cum);
      }
      max_spread = std::max(max_spread, hi - lo);
    }
    scale = std::max(1.0, max_spread / g_max);
    break;
  }
  }
  const Eigen::MatrixXd ws = w / scale;

  const Eigen::Index n_dummy = dummy_count(scheme, n_out);
  Eigen::MatrixXd m(n_dummy, n_in);
  switch (scheme) {
  case MappingScheme::de:
    for (Eigen::Index j = 0; j < n_out; ++j) {
      m.row(2 * j) = ws.row(j).cwiseMax(0.0);
      m.row(2 * j + 1) = (-ws.row(j)).cwiseMax(0.0);
    }
    break;
  case MappingScheme::bc:
    m.topRows(n_out) = ws.array() + g_max / 2.0;
    m.row(n_out).setConstant(g_max / 2.0);
    break;
  case MappingScheme::acm:
    for (Eigen::Index k = 0; k < n_in; ++k) {
      m(0, k) = 0.0;
      for (Eigen::Index j = 0; j < n_out; ++j) {
        m(j + 1, k) = m(j, k) - ws(j, k);
      }
      const double alpha = -m.col(k).minCoeff();
      m.col(k).array() += alpha;
    }
    break;
  }

  // Rounding can leave entries a hair outside [0, g_max]; snap them back.
  m = m.cwiseMax(0.0).cwiseMin(g_max);
  return Decomposition{std::move(m), scale};
}

Eigen::MatrixXd recompose(const PeripheryMatrix& s, const Eigen::MatrixXd& m) {
  if (m.rows() != s.n_dummy) {
    throw DimensionError("recompose: matrix has " + std::to_string(m.rows()) +
                         " rows, periphery expects " +
                         std::to_string(s.n_dummy));
  }
  return s.dense() * m;
}

WeightRange effective_weight_range(MappingScheme scheme, double g_max) {
  if (g_max <= 0.0) {
    throw InputError("effective_weight_range: g_max must be positive");
  }
  if (scheme == MappingScheme::bc) {
    return WeightRange{-g_max / 2.0, g_max / 2.0};
  }
  return WeightRange{-g_max, g_max};
}

double telescoping_residual(const Eigen::MatrixXd& m) {
  if (m.rows() < 2) {
    throw DimensionError("telescoping_residual: need at least two rows");
  }
  const Eigen::Index n_out = m.rows() - 1;
  const PeripheryMatrix s = build_periphery(MappingScheme::acm, n_out);
  const double total = (s.dense() * m).sum();
  const double endpoints = m.row(0).sum() - m.row(m.rows() - 1).sum();
  return std::abs(total - endpoints);
}

} // namespace xbarmap
