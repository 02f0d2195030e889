/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "xbarmap/device.hpp"

#include <algorithm>
#include <cmath>

#include "xbarmap/errors.hpp"

namespace xbarmap {

void DeviceModel::validate() const {
  if (bits < 1 || bits > 16) {
    throw InputError("DeviceModel: bits must be in [1, 16], got " +
                     std::to_string(bits));
  }
  if (nonlinearity < 0.0 || !std::isfinite(nonlinearity)) {
    throw InputError("DeviceModel: nonlinearity must be >= 0");
  }
  if (g_max <= 0.0 || !std::isfinite(g_max)) {
    throw InputError("DeviceModel: g_max must be positive");
  }
  if (variation_sigma < 0.0 || !std::isfinite(variation_sigma)) {
    throw InputError("DeviceModel: variation_sigma must be >= 0");
  }
  if (activation_bits < 0 || activation_bits > 16) {
    throw InputError("DeviceModel: activation_bits must be in [0, 16]");
  }
}

double state_to_conductance(int state, const DeviceModel& model) {
  const int max_state = model.max_state();
  if (state < 0 || state > max_state) {
    throw InputError("state_to_conductance: state " + std::to_string(state) +
                     " outside [0, " + std::to_string(max_state) + "]");
  }
  const double p = static_cast<double>(state) / max_state;
  if (model.nonlinearity == 0.0) {
    return model.g_max * p;
  }
  const double nu = model.nonlinearity;
  return model.g_max * 0.5 * (1.0 + std::tanh(nu * (2.0 * p - 1.0)) / std::tanh(nu));
}

std::vector<double> conductance_levels(const DeviceModel& model) {
  std::vector<double> levels(static_cast<std::size_t>(model.max_state()) + 1);
  for (int n = 0; n <= model.max_state(); ++n) {
    levels[static_cast<std::size_t>(n)] = state_to_conductance(n, model);
  }
  return levels;
}

int quantize_weight(double w, const DeviceModel& model) {
  if (!(w >= 0.0)) {
    throw InputError("quantize_weight: target conductance must be >= 0");
  }
  const int max_state = model.max_state();
  const double wc = std::min(w, model.g_max);

  // Invert the characteristic analytically, then pick the nearest of the
  // bracketing states by conductance distance, ties toward the larger index.
  double n_real;
  if (model.nonlinearity == 0.0) {
    n_real = wc / model.nominal_step();
  } else {
    const double nu = model.nonlinearity;
    const double u = std::clamp(2.0 * wc / model.g_max - 1.0, -1.0, 1.0);
    const double p = 0.5 * (1.0 + std::atanh(u * std::tanh(nu)) / nu);
    n_real = p * max_state;
  }
  const int anchor = static_cast<int>(std::floor(n_real));
  int best = -1;
  double best_dist = 0.0;
  for (int n = anchor - 1; n <= anchor + 2; ++n) {
    const int nc = std::clamp(n, 0, max_state);
    const double dist = std::abs(state_to_conductance(nc, model) - wc);
    if (best < 0 || dist < best_dist || (dist == best_dist && nc > best)) {
      best = nc;
      best_dist = dist;
    }
  }
  return best;
}

void apply_update(DeviceCell& cell, double desired_delta_g,
                  const DeviceModel& model) {
  const double raw_pulses =
      desired_delta_g / model.nominal_step() + cell.pulse_residual;
  const double k = std::trunc(raw_pulses);
  const int max_state = model.max_state();
  cell.state = std::clamp(cell.state + static_cast<int>(k), 0, max_state);
  if ((cell.state == max_state && raw_pulses > 0.0) ||
      (cell.state == 0 && raw_pulses < 0.0)) {
    // Saturated against a rail: drop the accumulated fraction so it cannot
    // wind up while the device is pinned.
    cell.pulse_residual = 0.0;
  } else {
    cell.pulse_residual = raw_pulses - k;
  }
}

Eigen::MatrixXd sample_variation(const Eigen::MatrixXd& conductances,
                                 const DeviceModel& model, Rng& rng) {
  if (model.variation_sigma == 0.0) {
    return conductances;
  }
  std::normal_distribution<double> noise(0.0,
                                         model.variation_sigma * model.g_max);
  Eigen::MatrixXd out(conductances.rows(), conductances.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(i, j) = std::clamp(conductances(i, j) + noise(rng), 0.0, model.g_max);
    }
  }
  return out;
}

double quantize_activation(double x, int bits, double range) {
  if (bits <= 0 || range <= 0.0) {
    return x;
  }
  if (bits == 1) {
    return x >= 0.0 ? range : -range;
  }
  const int half_levels = (1 << (bits - 1)) - 1;
  const double step = range / half_levels;
  const double clamped = std::clamp(x, -range, range);
  const double k = std::floor(clamped / step + 0.5); // ties round up
  return k * step;
}

Eigen::MatrixXd quantize_activations(const Eigen::MatrixXd& x, int bits,
                                     double range) {
  if (bits <= 0 || range <= 0.0) {
    return x;
  }
  return x.unaryExpr(
      [bits, range](double v) { return quantize_activation(v, bits, range); });
}

} // namespace xbarmap
