/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "xbarmap/data.hpp"
#include "xbarmap/device.hpp"
#include "xbarmap/periphery.hpp"

namespace xbarmap {

/// The four model types under comparison: a conventional signed-weight
/// network, and the three crossbar mappings.
enum class ModelType { baseline, de, bc, acm };

std::string_view model_type_name(ModelType type);
std::optional<ModelType> parse_model_type(std::string_view name);
std::optional<MappingScheme> mapped_scheme(ModelType type);

/// How a mapped layer stores its non-negative matrix: as discrete device
/// states programmed by pulses, or as a free real-valued matrix (the
/// full-precision limit, also used for gradient checks and for perturbed
/// snapshots).
enum class Backing { device, continuous };

struct LayerSpec {
  enum class Kind { dense, conv2d, relu, flatten, softmax_output };
  Kind kind = Kind::dense;
  int in_features = 0;
  int out_features = 0;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  int in_height = 0;
  int in_width = 0;
};

std::string_view layer_kind_name(LayerSpec::Kind kind);
std::optional<LayerSpec::Kind> parse_layer_kind(std::string_view name);

/// Spatial bookkeeping for the im2col lowering of a convolution.
struct ConvGeometry {
  int in_channels = 0;
  int in_height = 0;
  int in_width = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;

  int out_height() const {
    return (in_height + 2 * padding - kernel) / stride + 1;
  }
  int out_width() const {
    return (in_width + 2 * padding - kernel) / stride + 1;
  }
  int patches() const { return out_height() * out_width(); }
  int patch_dim() const { return in_channels * kernel * kernel; }
  Eigen::Index input_dim() const {
    return static_cast<Eigen::Index>(in_channels) * in_height * in_width;
  }
  void validate() const; // throws DimensionError on impossible shapes
};

/// Lowers an image batch (channel-major flattened columns) to patch columns:
/// output is patch_dim x (batch * patches). Zero padding.
Eigen::MatrixXd im2col(const Eigen::MatrixXd& x, const ConvGeometry& geo);
/// Adjoint of im2col: scatter-adds patch columns back into image layout.
Eigen::MatrixXd col2im(const Eigen::MatrixXd& cols, const ConvGeometry& geo,
                       Eigen::Index batch);

/// A linear transform realized as periphery * crossbar. Shared by the dense
/// and convolution mapped layers. The forward path quantizes incoming
/// activations against the layer's running range, multiplies by the
/// conductance matrix, then applies the fixed signed combination. Updates go
/// through the blind pulse controller (device backing) or plain projected
/// SGD (continuous backing).
class MappedCore {
public:
  MappedCore(MappingScheme scheme, Eigen::Index n_out, Eigen::Index n_in,
             const DeviceModel& device, Backing backing);

  /// Programs the crossbar so the effective weight approximates w (after
  /// decompose and, under device backing, per-cell nearest-state
  /// quantization). Resets pulse residuals.
  void load_from_weights(const Eigen::MatrixXd& w);

  /// Programs the crossbar directly from a non-negative matrix (quantizing
  /// per cell under device backing). Resets pulse residuals.
  void program_matrix(const Eigen::MatrixXd& m);

  Eigen::Index n_out() const { return periphery_.n_out; }
  Eigen::Index n_in() const { return n_in_; }
  const PeripheryMatrix& periphery() const { return periphery_; }
  const DeviceModel& device() const { return device_; }
  Backing backing() const { return backing_; }
  bool has_fixed_bias_row() const { return fixed_bias_row_; }

  const Eigen::MatrixXd& conductances() const { return g_; }
  Eigen::MatrixXd effective_weight() const { return s_dense_ * g_; }
  const Eigen::MatrixXi& states() const { return states_; }
  const Eigen::MatrixXd& residuals() const { return residuals_; }
  const Eigen::MatrixXd& continuous_matrix() const { return m_; }

  ActivationRangeTracker& tracker() { return tracker_; }
  const ActivationRangeTracker& tracker() const { return tracker_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training);
  /// Returns the input gradient; caches the conductance gradient for step().
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out);
  void step(double lr);
  const Eigen::MatrixXd& conductance_gradient() const { return grad_m_; }

  /// Replaces the crossbar with a read-variation sample of its conductances
  /// (the perturbed copy becomes continuous-backed). Used on cloned models.
  void perturb(const DeviceModel& noise_model, Rng& rng);

  /// Restores internal matrices from checkpoint data.
  void restore_device_state(const Eigen::MatrixXi& states,
                            const Eigen::MatrixXd& residuals);
  void restore_continuous_state(const Eigen::MatrixXd& m);

private:
  void refresh_conductances();

  PeripheryMatrix periphery_;
  Eigen::MatrixXd s_dense_;
  Eigen::Index n_in_;
  DeviceModel device_;
  Backing backing_;
  bool fixed_bias_row_;
  std::vector<double> levels_;
  Eigen::MatrixXi states_;    // device backing
  Eigen::MatrixXd residuals_; // device backing
  Eigen::MatrixXd m_;         // continuous backing
  Eigen::MatrixXd g_;         // current conductances (with bias override)
  ActivationRangeTracker tracker_;

  Eigen::MatrixXd x_raw_, x_q_;
  Eigen::MatrixXd grad_m_;
  bool quantized_input_ = false;
  bool has_forward_ = false;
};

class Layer {
public:
  virtual ~Layer() = default;
  virtual Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) = 0;
  virtual Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) = 0;
  virtual void step(double /*lr*/) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual const LayerSpec& spec() const = 0;
  virtual MappedCore* mapped_core() { return nullptr; }
};

/// Full-precision signed dense layer (the baseline model type).
class DenseLayer final : public Layer {
public:
  DenseLayer(LayerSpec spec, Eigen::MatrixXd weight);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;
  void step(double lr) override;
  std::unique_ptr<Layer> clone() const override;
  const LayerSpec& spec() const override { return spec_; }
  const Eigen::MatrixXd& weight() const { return weight_; }
  void set_weight(Eigen::MatrixXd w) { weight_ = std::move(w); }

private:
  LayerSpec spec_;
  Eigen::MatrixXd weight_;
  Eigen::MatrixXd x_, grad_w_;
  bool has_forward_ = false;
};

/// Dense layer executed through a crossbar mapping.
class MappedDenseLayer final : public Layer {
public:
  MappedDenseLayer(LayerSpec spec, MappingScheme scheme,
                   const DeviceModel& device, Backing backing);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;
  void step(double lr) override;
  std::unique_ptr<Layer> clone() const override;
  const LayerSpec& spec() const override { return spec_; }
  MappedCore* mapped_core() override { return &core_; }

private:
  LayerSpec spec_;
  MappedCore core_;
};

/// Full-precision convolution via im2col (baseline model type). The kernel
/// bank is stored as an out_channels x (in_channels * k * k) matrix.
class ConvLayer final : public Layer {
public:
  ConvLayer(LayerSpec spec, Eigen::MatrixXd kernels);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;
  void step(double lr) override;
  std::unique_ptr<Layer> clone() const override;
  const LayerSpec& spec() const override { return spec_; }
  const ConvGeometry& geometry() const { return geo_; }
  const Eigen::MatrixXd& kernels() const { return kernels_; }
  void set_kernels(Eigen::MatrixXd k) { kernels_ = std::move(k); }

private:
  LayerSpec spec_;
  ConvGeometry geo_;
  Eigen::MatrixXd kernels_;
  Eigen::MatrixXd cols_, grad_k_;
  Eigen::Index batch_ = 0;
  bool has_forward_ = false;
};

/// Convolution executed through a crossbar mapping of the kernel bank.
class MappedConvLayer final : public Layer {
public:
  MappedConvLayer(LayerSpec spec, MappingScheme scheme,
                  const DeviceModel& device, Backing backing);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;
  void step(double lr) override;
  std::unique_ptr<Layer> clone() const override;
  const LayerSpec& spec() const override { return spec_; }
  MappedCore* mapped_core() override { return &core_; }
  const ConvGeometry& geometry() const { return geo_; }

private:
  LayerSpec spec_;
  ConvGeometry geo_;
  MappedCore core_;
  Eigen::Index batch_ = 0;
};

class ReluLayer final : public Layer {
public:
  explicit ReluLayer(LayerSpec spec) : spec_(std::move(spec)) {}
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;
  std::unique_ptr<Layer> clone() const override;
  const LayerSpec& spec() const override { return spec_; }

private:
  LayerSpec spec_;
  Eigen::MatrixXd mask_;
  bool has_forward_ = false;
};

/// Shape bookkeeping only; the batch representation is already flat.
class FlattenLayer final : public Layer {
public:
  explicit FlattenLayer(LayerSpec spec) : spec_(std::move(spec)) {}
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool) override { return x; }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& g) override { return g; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<FlattenLayer>(*this);
  }
  const LayerSpec& spec() const override { return spec_; }

private:
  LayerSpec spec_;
};

/// Marker for the classification head; predictions take the argmax of the
/// logits, the training loss applies softmax cross-entropy.
class SoftmaxOutputLayer final : public Layer {
public:
  explicit SoftmaxOutputLayer(LayerSpec spec) : spec_(std::move(spec)) {}
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool) override { return x; }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& g) override { return g; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<SoftmaxOutputLayer>(*this);
  }
  const LayerSpec& spec() const override { return spec_; }

private:
  LayerSpec spec_;
};

struct Model {
  ModelType type = ModelType::baseline;
  DeviceModel device;
  Backing backing = Backing::device;
  std::vector<std::unique_ptr<Layer>> layers;

  Model() = default;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model clone() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training = false);
  void backward(const Eigen::MatrixXd& grad_logits);
  void step(double lr);
  std::vector<MappedCore*> mapped_cores();
};

/// Architecture description plus helpers for the stock networks.
struct ModelSpec {
  std::vector<LayerSpec> layers;
};

/// dims = {in, hidden..., out}; relu between linear layers, softmax head.
ModelSpec mlp_spec(const std::vector<int>& dims);
/// Two 3x3 convolutions (stride 1 then 2) and a dense head, for side x side
/// single-channel images.
ModelSpec small_cnn_spec(int side, int channels, int n_classes);

/// Builds a model with Glorot-uniform initial weights drawn from the "init"
/// sub-stream of seed. Mapped model types decompose the same signed draw and
/// program the crossbar from it, so every type starts from the same
/// effective weights given the same seed (up to state quantization and, for
/// acm, the column-spread scale when a draw exceeds the representable
/// range).
Model initialize_model(const ModelSpec& spec, ModelType type,
                       const DeviceModel& device, std::uint64_t seed,
                       Backing backing = Backing::device);

struct LossGrad {
  double loss;
  Eigen::MatrixXd grad;
};

/// Mean softmax cross-entropy over the batch and its logit gradient.
LossGrad softmax_cross_entropy(const Eigen::MatrixXd& logits,
                               const std::vector<int>& labels,
                               std::size_t label_offset = 0);

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool diverged = false;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  bool diverged = false;
};

/// Plain-prediction accuracy without eval-module error handling; the eval
/// module's evaluate() wraps this with input validation.
double model_accuracy(Model& model, const Dataset& ds);

/// Vanilla SGD training loop: seeded shuffling, forward/backward/step per
/// mini-batch, per-epoch train loss/accuracy and test accuracy. Fully
/// deterministic given the config seed. Aborts with a diverged record when
/// the loss stops being finite.
TrainResult train(Model& model, const Dataset& train_ds, const Dataset& test_ds,
                  const TrainConfig& config,
                  const std::function<void(const Model&, int)>& epoch_callback = {});

} // namespace xbarmap
