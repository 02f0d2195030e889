/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string_view>

namespace xbarmap {

/// The three ways of combining crossbar column outputs into signed results.
///   de  — double element: two devices per weight, weight = their difference.
///   bc  — bias column: one shared reference column fixed at mid-conductance.
///   acm — adjacent connection matrix: each column referenced against its
///         immediate neighbor with alternating signs.
enum class MappingScheme { de, bc, acm };

std::string_view scheme_name(MappingScheme scheme);
std::optional<MappingScheme> parse_scheme(std::string_view name);

/// Number of crossbar columns (dummy units) a scheme needs for n_out outputs.
Eigen::Index dummy_count(MappingScheme scheme, Eigen::Index n_out);

/// The fixed signed combination matrix of a mapping scheme. Entries are
/// restricted to {-1, 0, +1}; every row has exactly one +1 and one -1, so
/// rows sum to zero and the all-ones vector spans a positive null direction.
struct PeripheryMatrix {
  MappingScheme scheme;
  Eigen::Index n_out;   // rows
  Eigen::Index n_dummy; // columns
  Eigen::MatrixXi entries;

  Eigen::MatrixXd dense() const { return entries.cast<double>(); }
};

/// Canonical construction. Row j (0-based):
///   de  — +1 at column 2j, -1 at column 2j+1 (interleaved pairs)
///   bc  — +1 at column j, -1 at the final bias column n_out
///   acm — +1 at column j, -1 at column j+1
PeripheryMatrix build_periphery(MappingScheme scheme, Eigen::Index n_out);

struct ValidationReport {
  bool rank_ok;          // numerical rank equals the row count
  bool positive_null_ok; // rows sum to zero exactly (witness x_h = 1)
};

/// Checks the two sufficiency conditions for a periphery matrix: full row
/// rank and a strictly positive null-space vector. Accepts raw matrices so
/// that degenerate inputs can be probed in tests.
ValidationReport validate_periphery(const Eigen::MatrixXi& entries);
ValidationReport validate_periphery(const PeripheryMatrix& s);

struct Decomposition {
  Eigen::MatrixXd m; // n_dummy x n_in, entries in [0, g_max]
  double scale;      // >= 1; dense(S) * m * scale reproduces the input
};

/// Decomposes a signed weight matrix W (n_out x n_in) into a non-negative
/// matrix M with S*M*scale = W and M in [0, g_max]. Canonical particular
/// solutions per scheme:
///   de  — positive/negative split, interleaved
///   bc  — each weight shifted by g_max/2; bias row fixed at g_max/2
///   acm — per column, cumulative sums anchored at zero, then the minimal
///         uniform shift that makes all entries non-negative
/// scale is 1 whenever the result already fits [0, g_max]; otherwise it is
/// the smallest uniform down-scaling of W that makes it fit, returned so the
/// caller can fold it into downstream computation.
Decomposition decompose(const Eigen::MatrixXd& w, MappingScheme scheme,
                        double g_max);

/// Dense product dense(S) * m; the signed matrix realized by the crossbar.
Eigen::MatrixXd recompose(const PeripheryMatrix& s, const Eigen::MatrixXd& m);

struct WeightRange {
  double lo;
  double hi;
};

/// Per-weight representable range given device conductances in [0, g_max].
/// For acm this is the range of a single weight; realizing extremes couples
/// neighboring columns, which is not enforced here.
WeightRange effective_weight_range(MappingScheme scheme, double g_max);

/// For an acm-shaped non-negative matrix m (n_dummy = n_out + 1): the total
/// sum of the recomposed signed matrix telescopes to the difference between
/// the first and last dummy-unit sums. Returns the absolute defect
/// |sum(S*m) - (sum(m_first) - sum(m_last))|, which is zero up to rounding.
double telescoping_residual(const Eigen::MatrixXd& m);

} // namespace xbarmap
