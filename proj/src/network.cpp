/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "xbarmap/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xbarmap/errors.hpp"
#include "xbarmap/rng.hpp"

namespace xbarmap {

std::string_view model_type_name(ModelType type) {
  switch (type) {
  case ModelType::baseline:
    return "baseline";
  case ModelType::de:
    return "de";
  case ModelType::bc:
    return "bc";
  case ModelType::acm:
    return "acm";
  }
  return "?";
}

std::optional<ModelType> parse_model_type(std::string_view name) {
  if (name == "baseline") return ModelType::baseline;
  if (name == "de") return ModelType::de;
  if (name == "bc") return ModelType::bc;
  if (name == "acm") return ModelType::acm;
  return std::nullopt;
}

std::optional<MappingScheme> mapped_scheme(ModelType type) {
  switch (type) {
  case ModelType::baseline:
    return std::nullopt;
  case ModelType::de:
    return MappingScheme::de;
  case ModelType::bc:
    return MappingScheme::bc;
  case ModelType::acm:
    return MappingScheme::acm;
  }
  return std::nullopt;
}

std::string_view layer_kind_name(LayerSpec::Kind kind) {
  switch (kind) {
  case LayerSpec::Kind::dense:
    return "dense";
  case LayerSpec::Kind::conv2d:
    return "conv2d";
  case LayerSpec::Kind::relu:
    return "relu";
  case LayerSpec::Kind::flatten:
    return "flatten";
  case LayerSpec::Kind::softmax_output:
    return "softmax-output";
  }
  return "?";
}

std::optional<LayerSpec::Kind> parse_layer_kind(std::string_view name) {
  if (name == "dense") return LayerSpec::Kind::dense;
  if (name == "conv2d") return LayerSpec::Kind::conv2d;
  if (name == "relu") return LayerSpec::Kind::relu;
  if (name == "flatten") return LayerSpec::Kind::flatten;
  if (name == "softmax-output") return LayerSpec::Kind::softmax_output;
  return std::nullopt;
}

void ConvGeometry::validate() const {
  if (in_channels < 1 || in_height < 1 || in_width < 1 || kernel < 1 ||
      stride < 1 || padding < 0) {
    throw DimensionError("conv2d: invalid geometry parameters");
  }
  if (in_height + 2 * padding < kernel || in_width + 2 * padding < kernel) {
    throw DimensionError("conv2d: kernel larger than padded input");
  }
}

Eigen::MatrixXd im2col(const Eigen::MatrixXd& x, const ConvGeometry& geo) {
  geo.validate();
  if (x.rows() != geo.input_dim()) {
    throw DimensionError("im2col: input has " + std::to_string(x.rows()) +
                         " rows, geometry expects " +
                         std::to_string(geo.input_dim()));
  }
  const Eigen::Index batch = x.cols();
  const int out_h = geo.out_height();
  const int out_w = geo.out_width();
  const int patches = geo.patches();
  Eigen::MatrixXd cols =
      Eigen::MatrixXd::Zero(geo.patch_dim(), batch * patches);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        const Eigen::Index col = b * patches + oy * out_w + ox;
        for (int c = 0; c < geo.in_channels; ++c) {
          for (int ky = 0; ky < geo.kernel; ++ky) {
            const int iy = oy * geo.stride + ky - geo.padding;
            if (iy < 0 || iy >= geo.in_height) continue;
            for (int kx = 0; kx < geo.kernel; ++kx) {
              const int ix = ox * geo.stride + kx - geo.padding;
              if (ix < 0 || ix >= geo.in_width) continue;
              cols((c * geo.kernel + ky) * geo.kernel + kx, col) =
                  x((static_cast<Eigen::Index>(c) * geo.in_height + iy) *
                            geo.in_width +
                        ix,
                    b);
            }
          }
        }
      }
    }
  }
  return cols;
}

Eigen::MatrixXd col2im(const Eigen::MatrixXd& cols, const ConvGeometry& geo,
                       Eigen::Index batch) {
  const int out_h = geo.out_height();
  const int out_w = geo.out_width();
  const int patches = geo.patches();
  if (cols.rows() != geo.patch_dim() || cols.cols() != batch * patches) {
    throw DimensionError("col2im: patch matrix shape mismatch");
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(geo.input_dim(), batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        const Eigen::Index col = b * patches + oy * out_w + ox;
        for (int c = 0; c < geo.in_channels; ++c) {
          for (int ky = 0; ky < geo.kernel; ++ky) {
            const int iy = oy * geo.stride + ky - geo.padding;
            if (iy < 0 || iy >= geo.in_height) continue;
            for (int kx = 0; kx < geo.kernel; ++kx) {
              const int ix = ox * geo.stride + kx - geo.padding;
              if (ix < 0 || ix >= geo.in_width) continue;
              x((static_cast<Eigen::Index>(c) * geo.in_height + iy) *
                        geo.in_width +
                    ix,
                b) += cols((c * geo.kernel + ky) * geo.kernel + kx, col);
            }
          }
        }
      }
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// MappedCore

MappedCore::MappedCore(MappingScheme scheme, Eigen::Index n_out,
                       Eigen::Index n_in, const DeviceModel& device,
                       Backing backing)
    : periphery_(build_periphery(scheme, n_out)),
      s_dense_(periphery_.dense()),
      n_in_(n_in),
      device_(device),
      backing_(backing),
      fixed_bias_row_(scheme == MappingScheme::bc),
      levels_(conductance_levels(device)) {
  device_.validate();
  if (n_in < 1) {
    throw DimensionError("MappedCore: n_in must be >= 1");
  }
  states_ = Eigen::MatrixXi::Zero(periphery_.n_dummy, n_in_);
  residuals_ = Eigen::MatrixXd::Zero(periphery_.n_dummy, n_in_);
  m_ = Eigen::MatrixXd::Zero(periphery_.n_dummy, n_in_);
  if (fixed_bias_row_) {
    m_.row(periphery_.n_dummy - 1).setConstant(device_.g_max / 2.0);
  }
  refresh_conductances();
}

void MappedCore::load_from_weights(const Eigen::MatrixXd& w) {
  if (w.rows() != periphery_.n_out || w.cols() != n_in_) {
    throw DimensionError("load_from_weights: weight shape mismatch");
  }
  program_matrix(decompose(w, periphery_.scheme, device_.g_max).m);
}

void MappedCore::program_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() != periphery_.n_dummy || m.cols() != n_in_) {
    throw DimensionError("program_matrix: shape mismatch");
  }
  if (backing_ == Backing::device) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        states_(i, j) = quantize_weight(m(i, j), device_);
      }
    }
    residuals_.setZero();
  } else {
    m_ = m;
  }
  refresh_conductances();
}

void MappedCore::refresh_conductances() {
  if (backing_ == Backing::device) {
    g_.resize(states_.rows(), states_.cols());
    for (Eigen::Index i = 0; i < states_.rows(); ++i) {
      for (Eigen::Index j = 0; j < states_.cols(); ++j) {
        g_(i, j) = levels_[static_cast<std::size_t>(states_(i, j))];
      }
    }
    if (fixed_bias_row_) {
      // The reference column is programmed once to mid-range; it is not a
      // discrete trained state.
      g_.row(g_.rows() - 1).setConstant(device_.g_max / 2.0);
    }
  } else {
    g_ = m_;
  }
}

Eigen::MatrixXd MappedCore::forward(const Eigen::MatrixXd& x, bool training) {
  if (x.rows() != n_in_) {
    throw DimensionError("mapped forward: input has " +
                         std::to_string(x.rows()) + " rows, expected " +
                         std::to_string(n_in_));
  }
  if (!x.allFinite()) {
    throw InputError("mapped forward: non-finite input");
  }
  if (training && device_.activation_bits > 0) {
    tracker_.observe(x);
  }
  quantized_input_ = device_.activation_bits > 0 && tracker_.initialized;
  x_raw_ = x;
  x_q_ = quantized_input_
             ? quantize_activations(x, device_.activation_bits, tracker_.range)
             : x;
  has_forward_ = true;
  return s_dense_ * (g_ * x_q_);
}

Eigen::MatrixXd MappedCore::backward(const Eigen::MatrixXd& grad_out) {
  if (!has_forward_) {
    throw StateError("mapped backward: no cached forward pass");
  }
  if (grad_out.rows() != periphery_.n_out || grad_out.cols() != x_q_.cols()) {
    throw DimensionError("mapped backward: gradient shape mismatch");
  }
  grad_m_ = s_dense_.transpose() * grad_out * x_q_.transpose();
  Eigen::MatrixXd grad_x = (s_dense_ * g_).transpose() * grad_out;
  if (quantized_input_) {
    // Straight-through: identity inside the clamp range, zero outside.
    const double range = tracker_.range;
    grad_x = (x_raw_.cwiseAbs().array() <= range)
                 .select(grad_x, Eigen::MatrixXd::Zero(grad_x.rows(),
                                                       grad_x.cols()));
  }
  return grad_x;
}

void MappedCore::step(double lr) {
  if (grad_m_.size() == 0) {
    throw StateError("mapped step: no cached gradient");
  }
  const Eigen::Index rows =
      fixed_bias_row_ ? periphery_.n_dummy - 1 : periphery_.n_dummy;
  if (backing_ == Backing::device) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < n_in_; ++j) {
        DeviceCell cell{states_(i, j), residuals_(i, j)};
        apply_update(cell, -lr * grad_m_(i, j), device_);
        states_(i, j) = cell.state;
        residuals_(i, j) = cell.pulse_residual;
      }
    }
  } else {
    m_.topRows(rows) -= lr * grad_m_.topRows(rows);
    m_ = m_.cwiseMax(0.0).cwiseMin(device_.g_max);
  }
  refresh_conductances();
}

void MappedCore::perturb(const DeviceModel& noise_model, Rng& rng) {
  m_ = sample_variation(g_, noise_model, rng);
  backing_ = Backing::continuous;
  fixed_bias_row_ = false; // the perturbed reference column stays perturbed
  refresh_conductances();
}

void MappedCore::restore_device_state(const Eigen::MatrixXi& states,
                                      const Eigen::MatrixXd& residuals) {
  if (states.rows() != periphery_.n_dummy || states.cols() != n_in_ ||
      residuals.rows() != periphery_.n_dummy || residuals.cols() != n_in_) {
    throw DimensionError("restore_device_state: shape mismatch");
  }
  if (states.minCoeff() < 0 || states.maxCoeff() > device_.max_state()) {
    throw InputError("restore_device_state: state index out of range");
  }
  backing_ = Backing::device;
  states_ = states;
  residuals_ = residuals;
  refresh_conductances();
}

void MappedCore::restore_continuous_state(const Eigen::MatrixXd& m) {
  if (m.rows() != periphery_.n_dummy || m.cols() != n_in_) {
    throw DimensionError("restore_continuous_state: shape mismatch");
  }
  backing_ = Backing::continuous;
  m_ = m;
  refresh_conductances();
}

// ---------------------------------------------------------------------------
// Layers

DenseLayer::DenseLayer(LayerSpec spec, Eigen::MatrixXd weight)
    : spec_(std::move(spec)), weight_(std::move(weight)) {
  if (weight_.rows() != spec_.out_features ||
      weight_.cols() != spec_.in_features) {
    throw DimensionError("DenseLayer: weight shape does not match spec");
  }
}

Eigen::MatrixXd DenseLayer::forward(const Eigen::MatrixXd& x, bool) {
  if (x.rows() != weight_.cols()) {
    throw DimensionError("dense forward: input dimension mismatch");
  }
  x_ = x;
  has_forward_ = true;
  return weight_ * x;
}

Eigen::MatrixXd DenseLayer::backward(const Eigen::MatrixXd& grad_out) {
  if (!has_forward_) {
    throw StateError("dense backward: no cached forward pass");
  }
  grad_w_ = grad_out * x_.transpose();
  return weight_.transpose() * grad_out;
}

void DenseLayer::step(double lr) {
  if (grad_w_.size() == 0) {
    throw StateError("dense step: no cached gradient");
  }
  weight_ -= lr * grad_w_;
}

std::unique_ptr<Layer> DenseLayer::clone() const {
  return std::make_unique<DenseLayer>(*this);
}

MappedDenseLayer::MappedDenseLayer(LayerSpec spec, MappingScheme scheme,
                                   const DeviceModel& device, Backing backing)
    : spec_(std::move(spec)),
      core_(scheme, spec_.out_features, spec_.in_features, device, backing) {}

Eigen::MatrixXd MappedDenseLayer::forward(const Eigen::MatrixXd& x,
                                          bool training) {
  return core_.forward(x, training);
}

Eigen::MatrixXd MappedDenseLayer::backward(const Eigen::MatrixXd& grad_out) {
  return core_.backward(grad_out);
}

void MappedDenseLayer::step(double lr) { core_.step(lr); }

std::unique_ptr<Layer> MappedDenseLayer::clone() const {
  return std::make_unique<MappedDenseLayer>(*this);
}

namespace {

ConvGeometry geometry_from_spec(const LayerSpec& spec) {
  ConvGeometry geo;
  geo.in_channels = spec.in_channels;
  geo.in_height = spec.in_height;
  geo.in_width = spec.in_width;
  geo.kernel = spec.kernel;
  geo.stride = spec.stride;
  geo.padding = spec.padding;
  geo.validate();
  return geo;
}

// (out_c) x (batch * patches) -> (out_c * patches) x batch
Eigen::MatrixXd gather_feature_maps(const Eigen::MatrixXd& y_cols,
                                    Eigen::Index batch, int patches) {
  const Eigen::Index out_c = y_cols.rows();
  Eigen::MatrixXd out(out_c * patches, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index c = 0; c < out_c; ++c) {
      for (int p = 0; p < patches; ++p) {
        out(c * patches + p, b) = y_cols(c, b * patches + p);
      }
    }
  }
  return out;
}

Eigen::MatrixXd scatter_feature_maps(const Eigen::MatrixXd& grad,
                                     Eigen::Index out_c, Eigen::Index batch,
                                     int patches) {
  Eigen::MatrixXd cols(out_c, batch * patches);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index c = 0; c < out_c; ++c) {
      for (int p = 0; p < patches; ++p) {
        cols(c, b * patches + p) = grad(c * patches + p, b);
      }
    }
  }
  return cols;
}

} // namespace

ConvLayer::ConvLayer(LayerSpec spec, Eigen::MatrixXd kernels)
    : spec_(std::move(spec)),
      geo_(geometry_from_spec(spec_)),
      kernels_(std::move(kernels)) {
  if (kernels_.rows() != spec_.out_channels ||
      kernels_.cols() != geo_.patch_dim()) {
    throw DimensionError("ConvLayer: kernel bank shape does not match spec");
  }
}

Eigen::MatrixXd ConvLayer::forward(const Eigen::MatrixXd& x, bool) {
  cols_ = im2col(x, geo_);
  batch_ = x.cols();
  has_forward_ = true;
  return gather_feature_maps(kernels_ * cols_, batch_, geo_.patches());
}

Eigen::MatrixXd ConvLayer::backward(const Eigen::MatrixXd& grad_out) {
  if (!has_forward_) {
    throw StateError("conv backward: no cached forward pass");
  }
  const Eigen::MatrixXd grad_cols =
      scatter_feature_maps(grad_out, spec_.out_channels, batch_, geo_.patches());
  grad_k_ = grad_cols * cols_.transpose();
  return col2im(kernels_.transpose() * grad_cols, geo_, batch_);
}

void ConvLayer::step(double lr) {
  if (grad_k_.size() == 0) {
    throw StateError("conv step: no cached gradient");
  }
  kernels_ -= lr * grad_k_;
}

std::unique_ptr<Layer> ConvLayer::clone() const {
  return std::make_unique<ConvLayer>(*this);
}

MappedConvLayer::MappedConvLayer(LayerSpec spec, MappingScheme scheme,
                                 const DeviceModel& device, Backing backing)
    : spec_(std::move(spec)),
      geo_(geometry_from_spec(spec_)),
      core_(scheme, spec_.out_channels, geo_.patch_dim(), device, backing) {}

Eigen::MatrixXd MappedConvLayer::forward(const Eigen::MatrixXd& x,
                                         bool training) {
  batch_ = x.cols();
  const Eigen::MatrixXd y_cols = core_.forward(im2col(x, geo_), training);
  return gather_feature_maps(y_cols, batch_, geo_.patches());
}

Eigen::MatrixXd MappedConvLayer::backward(const Eigen::MatrixXd& grad_out) {
  const Eigen::MatrixXd grad_cols =
      scatter_feature_maps(grad_out, spec_.out_channels, batch_, geo_.patches());
  return col2im(core_.backward(grad_cols), geo_, batch_);
}

void MappedConvLayer::step(double lr) { core_.step(lr); }

std::unique_ptr<Layer> MappedConvLayer::clone() const {
  return std::make_unique<MappedConvLayer>(*this);
}

Eigen::MatrixXd ReluLayer::forward(const Eigen::MatrixXd& x, bool) {
  mask_ = (x.array() > 0.0).cast<double>();
  has_forward_ = true;
  return x.cwiseMax(0.0);
}

Eigen::MatrixXd ReluLayer::backward(const Eigen::MatrixXd& grad_out) {
  if (!has_forward_) {
    throw StateError("relu backward: no cached forward pass");
  }
  return grad_out.cwiseProduct(mask_);
}

std::unique_ptr<Layer> ReluLayer::clone() const {
  return std::make_unique<ReluLayer>(*this);
}

// ---------------------------------------------------------------------------
// Model

Model Model::clone() const {
  Model copy;
  copy.type = type;
  copy.device = device;
  copy.backing = backing;
  copy.layers.reserve(layers.size());
  for (const auto& layer : layers) {
    copy.layers.push_back(layer->clone());
  }
  return copy;
}

Eigen::MatrixXd Model::forward(const Eigen::MatrixXd& x, bool training) {
  Eigen::MatrixXd h = x;
  for (auto& layer : layers) {
    h = layer->forward(h, training);
  }
  return h;
}

void Model::backward(const Eigen::MatrixXd& grad_logits) {
  Eigen::MatrixXd g = grad_logits;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    g = (*it)->backward(g);
  }
}

void Model::step(double lr) {
  for (auto& layer : layers) {
    layer->step(lr);
  }
}

std::vector<MappedCore*> Model::mapped_cores() {
  std::vector<MappedCore*> cores;
  for (auto& layer : layers) {
    if (MappedCore* core = layer->mapped_core()) {
      cores.push_back(core);
    }
  }
  return cores;
}

ModelSpec mlp_spec(const std::vector<int>& dims) {
  if (dims.size() < 2) {
    throw DimensionError("mlp_spec: need at least input and output dims");
  }
  ModelSpec spec;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    LayerSpec dense;
    dense.kind = LayerSpec::Kind::dense;
    dense.in_features = dims[i];
    dense.out_features = dims[i + 1];
    spec.layers.push_back(dense);
    if (i + 2 < dims.size()) {
      LayerSpec relu;
      relu.kind = LayerSpec::Kind::relu;
      relu.in_features = relu.out_features = dims[i + 1];
      spec.layers.push_back(relu);
    }
  }
  LayerSpec head;
  head.kind = LayerSpec::Kind::softmax_output;
  head.in_features = head.out_features = dims.back();
  spec.layers.push_back(head);
  return spec;
}

ModelSpec small_cnn_spec(int side, int channels, int n_classes) {
  ModelSpec spec;
  LayerSpec c1;
  c1.kind = LayerSpec::Kind::conv2d;
  c1.in_channels = 1;
  c1.out_channels = channels;
  c1.kernel = 3;
  c1.stride = 1;
  c1.padding = 1;
  c1.in_height = c1.in_width = side;
  spec.layers.push_back(c1);

  LayerSpec r1;
  r1.kind = LayerSpec::Kind::relu;
  spec.layers.push_back(r1);

  LayerSpec c2;
  c2.kind = LayerSpec::Kind::conv2d;
  c2.in_channels = channels;
  c2.out_channels = channels;
  c2.kernel = 3;
  c2.stride = 2;
  c2.padding = 1;
  c2.in_height = c2.in_width = side;
  spec.layers.push_back(c2);

  LayerSpec r2;
  r2.kind = LayerSpec::Kind::relu;
  spec.layers.push_back(r2);

  LayerSpec flat;
  flat.kind = LayerSpec::Kind::flatten;
  spec.layers.push_back(flat);

  const int half = (side + 2 * 1 - 3) / 2 + 1;
  LayerSpec head;
  head.kind = LayerSpec::Kind::dense;
  head.in_features = channels * half * half;
  head.out_features = n_classes;
  spec.layers.push_back(head);

  LayerSpec out;
  out.kind = LayerSpec::Kind::softmax_output;
  out.in_features = out.out_features = n_classes;
  spec.layers.push_back(out);
  return spec;
}

namespace {

Eigen::MatrixXd glorot_uniform(Eigen::Index rows, Eigen::Index cols,
                               double fan_in, double fan_out, Rng& rng) {
  const double r = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-r, r);
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      w(i, j) = dist(rng);
    }
  }
  return w;
}

// Training-time crossbar programming. Starts from the canonical decompose
// solution; for de, each device pair is then shifted by a random common
// mode drawn over its feasible range. The shift lies in the null space of
// the pair's +1/-1 periphery row, so the effective weight is untouched,
// while the pair operates at a spread of points on the update
// characteristic instead of hugging the zero rail (de pairs are
// independently programmable; this is the freedom the doubled device count
// buys). bc has no null freedom and acm's single per-column shift stays at
// the canonical minimum.
void program_for_training(MappedCore& core, const Eigen::MatrixXd& w,
                          Rng& rng) {
  const MappingScheme scheme = core.periphery().scheme;
  const double g_max = core.device().g_max;
  Decomposition d = decompose(w, scheme, g_max);
  if (scheme == MappingScheme::de) {
    const std::vector<double> levels = conductance_levels(core.device());
    for (Eigen::Index j = 0; j < core.n_out(); ++j) {
      for (Eigen::Index k = 0; k < core.n_in(); ++k) {
        const double hi = std::max(d.m(2 * j, k), d.m(2 * j + 1, k));
        // Largest representable base level that keeps both cells in range,
        // so the shifted pair still quantizes to the intended difference.
        int s_max = 0;
        while (s_max + 1 < static_cast<int>(levels.size()) &&
               levels[static_cast<std::size_t>(s_max) + 1] <= g_max - hi) {
          ++s_max;
        }
        std::uniform_int_distribution<int> base(0, s_max);
        const double shift = levels[static_cast<std::size_t>(base(rng))];
        d.m(2 * j, k) += shift;
        d.m(2 * j + 1, k) += shift;
      }
    }
  }
  core.program_matrix(d.m);
}

} // namespace

Model initialize_model(const ModelSpec& spec, ModelType type,
                       const DeviceModel& device, std::uint64_t seed,
                       Backing backing) {
  device.validate();
  Model model;
  model.type = type;
  model.device = device;
  model.backing = backing;
  const std::optional<MappingScheme> scheme = mapped_scheme(type);

  std::uint64_t linear_index = 0;
  for (const LayerSpec& layer_spec : spec.layers) {
    switch (layer_spec.kind) {
    case LayerSpec::Kind::dense: {
      Rng rng = make_rng(seed, "init", linear_index++);
      const Eigen::MatrixXd w =
          glorot_uniform(layer_spec.out_features, layer_spec.in_features,
                         layer_spec.in_features, layer_spec.out_features, rng);
      if (scheme) {
        auto layer = std::make_unique<MappedDenseLayer>(layer_spec, *scheme,
                                                        device, backing);
        program_for_training(*layer->mapped_core(), w, rng);
        model.layers.push_back(std::move(layer));
      } else {
        model.layers.push_back(std::make_unique<DenseLayer>(layer_spec, w));
      }
      break;
    }
    case LayerSpec::Kind::conv2d: {
      Rng rng = make_rng(seed, "init", linear_index++);
      const int patch_dim =
          layer_spec.in_channels * layer_spec.kernel * layer_spec.kernel;
      const double fan_in = patch_dim;
      const double fan_out = static_cast<double>(layer_spec.out_channels) *
                             layer_spec.kernel * layer_spec.kernel;
      const Eigen::MatrixXd w = glorot_uniform(layer_spec.out_channels,
                                               patch_dim, fan_in, fan_out, rng);
      if (scheme) {
        auto layer = std::make_unique<MappedConvLayer>(layer_spec, *scheme,
                                                       device, backing);
        program_for_training(*layer->mapped_core(), w, rng);
        model.layers.push_back(std::move(layer));
      } else {
        model.layers.push_back(std::make_unique<ConvLayer>(layer_spec, w));
      }
      break;
    }
    case LayerSpec::Kind::relu:
      model.layers.push_back(std::make_unique<ReluLayer>(layer_spec));
      break;
    case LayerSpec::Kind::flatten:
      model.layers.push_back(std::make_unique<FlattenLayer>(layer_spec));
      break;
    case LayerSpec::Kind::softmax_output:
      model.layers.push_back(std::make_unique<SoftmaxOutputLayer>(layer_spec));
      break;
    }
  }
  return model;
}

LossGrad softmax_cross_entropy(const Eigen::MatrixXd& logits,
                               const std::vector<int>& labels,
                               std::size_t label_offset) {
  const Eigen::Index batch = logits.cols();
  if (label_offset + static_cast<std::size_t>(batch) > labels.size()) {
    throw DimensionError("softmax_cross_entropy: not enough labels");
  }
  LossGrad out{0.0, Eigen::MatrixXd(logits.rows(), batch)};
  for (Eigen::Index c = 0; c < batch; ++c) {
    const int label = labels[label_offset + static_cast<std::size_t>(c)];
    const double max_logit = logits.col(c).maxCoeff();
    const Eigen::ArrayXd shifted = logits.col(c).array() - max_logit;
    const double log_sum = std::log(shifted.exp().sum());
    out.loss += log_sum - shifted(label);
    out.grad.col(c) = (shifted - log_sum).exp().matrix();
    out.grad(label, c) -= 1.0;
  }
  out.loss /= static_cast<double>(batch);
  out.grad /= static_cast<double>(batch);
  return out;
}

double model_accuracy(Model& model, const Dataset& ds) {
  const Eigen::Index chunk = 256;
  Eigen::Index correct = 0;
  for (Eigen::Index start = 0; start < ds.size(); start += chunk) {
    const Eigen::Index n = std::min(chunk, ds.size() - start);
    const Eigen::MatrixXd logits =
        model.forward(ds.features.middleCols(start, n), false);
    for (Eigen::Index c = 0; c < n; ++c) {
      Eigen::Index pred;
      logits.col(c).maxCoeff(&pred);
      if (pred == ds.labels[static_cast<std::size_t>(start + c)]) {
        ++correct;
      }
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainResult train(Model& model, const Dataset& train_ds, const Dataset& test_ds,
                  const TrainConfig& config,
                  const std::function<void(const Model&, int)>& epoch_callback) {
  if (train_ds.size() == 0) {
    throw InputError("train: empty training set");
  }
  if (config.epochs < 0 || config.batch_size < 1 ||
      config.learning_rate <= 0.0) {
    throw InputError("train: invalid config");
  }

  TrainResult result;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train_ds.size()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng = make_rng(config.seed, "shuffle",
                               static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    Eigen::Index correct = 0;
    bool diverged = false;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t n =
          std::min(static_cast<std::size_t>(config.batch_size),
                   order.size() - start);
      Eigen::MatrixXd batch(train_ds.dim(), static_cast<Eigen::Index>(n));
      std::vector<int> batch_labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        batch.col(static_cast<Eigen::Index>(i)) =
            train_ds.features.col(order[start + i]);
        batch_labels[i] =
            train_ds.labels[static_cast<std::size_t>(order[start + i])];
      }

      const Eigen::MatrixXd logits = model.forward(batch, true);
      const LossGrad lg = softmax_cross_entropy(logits, batch_labels);
      if (!std::isfinite(lg.loss)) {
        diverged = true;
        break;
      }
      loss_sum += lg.loss * static_cast<double>(n);
      for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(n); ++c) {
        Eigen::Index pred;
        logits.col(c).maxCoeff(&pred);
        if (pred == batch_labels[static_cast<std::size_t>(c)]) {
          ++correct;
        }
      }
      model.backward(lg.grad);
      model.step(config.learning_rate);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.diverged = diverged;
    if (diverged) {
      metrics.train_loss = std::numeric_limits<double>::quiet_NaN();
      result.history.push_back(metrics);
      result.diverged = true;
      break;
    }
    metrics.train_loss = loss_sum / static_cast<double>(train_ds.size());
    metrics.train_accuracy = static_cast<double>(correct) /
                             static_cast<double>(train_ds.size());
    metrics.test_accuracy =
        test_ds.size() > 0 ? model_accuracy(model, test_ds) : 0.0;
    result.history.push_back(metrics);
    if (epoch_callback) {
      epoch_callback(model, epoch);
    }
  }
  return result;
}

} // namespace xbarmap
