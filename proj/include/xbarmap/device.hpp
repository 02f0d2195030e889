/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "xbarmap/rng.hpp"

namespace xbarmap {

/// Synapse device parameters. Conductances are normalized so that the lower
/// rail is 0 and the upper rail is g_max.
struct DeviceModel {
  int bits = 4;                  // number of states = 2^bits, bits in [1, 16]
  double nonlinearity = 0.0;     // nu >= 0; 0 is the ideal linear device
  double g_max = 1.0;
  double variation_sigma = 0.0;  // read variation, fraction of g_max
  int activation_bits = 8;       // 0 disables activation quantization

  void validate() const; // throws InputError on out-of-range parameters

  int max_state() const { return (1 << bits) - 1; }
  /// Nominal (linear) conductance step between adjacent states.
  double nominal_step() const { return g_max / max_state(); }
};

/// Conductance of state n under the symmetric saturating characteristic.
/// With p = n / (2^bits - 1):
///   nu = 0:  G = g_max * p
///   nu > 0:  G = g_max/2 * (1 + tanh(nu * (2p - 1)) / tanh(nu))
/// Strictly increasing in n, G(0) = 0, G(max) = g_max, and symmetric about
/// the midpoint: G(n) + G(max - n) = g_max. Larger nu compresses the steps
/// near both rails, so a blind pulse controller realizes less change there
/// than it commands.
double state_to_conductance(int state, const DeviceModel& model);

/// All 2^bits conductance levels as a lookup table.
std::vector<double> conductance_levels(const DeviceModel& model);

/// Nearest representable state for a target conductance w (clamped to
/// [0, g_max]); ties break toward the larger state index. Negative targets
/// are rejected: the crossbar domain is non-negative.
int quantize_weight(double w, const DeviceModel& model);

/// One crossbar cell: discrete state plus the fractional pulse accumulator.
struct DeviceCell {
  int state = 0;
  double pulse_residual = 0.0; // always in (-1, 1)
};

/// Blind pulse-programming step. The controller converts the desired
/// conductance change into pulses using the nominal linear step, unaware of
/// the device's actual characteristic; the mismatch between commanded and
/// realized change is the modeled non-ideality. Fractional pulses accumulate
/// in the residual; the residual resets when an update drives the state into
/// a rail.
void apply_update(DeviceCell& cell, double desired_delta_g,
                  const DeviceModel& model);

/// Adds zero-mean Gaussian read variation with std sigma * g_max to every
/// entry, clamped to [0, g_max]. sigma = 0 returns the input unchanged.
Eigen::MatrixXd sample_variation(const Eigen::MatrixXd& conductances,
                                 const DeviceModel& model, Rng& rng);

/// Uniform symmetric quantization of activations over [-range, range]:
/// 2^bits - 1 levels including zero and both endpoints (bits >= 2), or the
/// two-level sign grid {-range, +range} at bits = 1. Round to nearest, ties
/// up; out-of-range values clamp. bits = 0 or range <= 0 passes through.
double quantize_activation(double x, int bits, double range);
Eigen::MatrixXd quantize_activations(const Eigen::MatrixXd& x, int bits,
                                     double range);

/// Running per-layer activation range: exponential moving average of the
/// batch absolute maximum, updated during training and frozen at inference.
struct ActivationRangeTracker {
  double range = 0.0;
  double momentum = 0.99;
  bool initialized = false;

  void observe(const Eigen::MatrixXd& x) {
    const double batch_max = x.cwiseAbs().maxCoeff();
    if (!initialized) {
      range = batch_max;
      initialized = true;
    } else {
      range = momentum * range + (1.0 - momentum) * batch_max;
    }
  }
};

} // namespace xbarmap
