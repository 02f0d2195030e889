/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "xbarmap/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "xbarmap/errors.hpp"

namespace xbarmap {

namespace {

using nlohmann::ordered_json;

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json matrix_to_json(const Eigen::MatrixXi& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Mat>
Mat matrix_from_json(const ordered_json& j, Eigen::Index rows,
                     Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw CheckpointError("checkpoint: " + what + " has wrong row count");
  }
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw CheckpointError("checkpoint: " + what + " has wrong column count");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = row[static_cast<std::size_t>(c)].get<typename Mat::Scalar>();
    }
  }
  return m;
}

ordered_json spec_to_json(const LayerSpec& spec) {
  ordered_json j;
  j["kind"] = std::string(layer_kind_name(spec.kind));
  switch (spec.kind) {
  case LayerSpec::Kind::dense:
    j["in_features"] = spec.in_features;
    j["out_features"] = spec.out_features;
    break;
  case LayerSpec::Kind::conv2d:
    j["in_channels"] = spec.in_channels;
    j["out_channels"] = spec.out_channels;
    j["kernel"] = spec.kernel;
    j["stride"] = spec.stride;
    j["padding"] = spec.padding;
    j["in_height"] = spec.in_height;
    j["in_width"] = spec.in_width;
    break;
  default:
    break;
  }
  return j;
}

LayerSpec spec_from_json(const ordered_json& j) {
  LayerSpec spec;
  const auto kind = parse_layer_kind(j.at("kind").get<std::string>());
  if (!kind) {
    throw CheckpointError("checkpoint: unknown layer kind '" +
                          j.at("kind").get<std::string>() + "'");
  }
  spec.kind = *kind;
  switch (spec.kind) {
  case LayerSpec::Kind::dense:
    spec.in_features = j.at("in_features").get<int>();
    spec.out_features = j.at("out_features").get<int>();
    break;
  case LayerSpec::Kind::conv2d:
    spec.in_channels = j.at("in_channels").get<int>();
    spec.out_channels = j.at("out_channels").get<int>();
    spec.kernel = j.at("kernel").get<int>();
    spec.stride = j.at("stride").get<int>();
    spec.padding = j.at("padding").get<int>();
    spec.in_height = j.at("in_height").get<int>();
    spec.in_width = j.at("in_width").get<int>();
    break;
  default:
    break;
  }
  return spec;
}

void core_to_json(const MappedCore& core, ordered_json& j) {
  j["mapping"] = std::string(scheme_name(core.periphery().scheme));
  if (core.backing() == Backing::device) {
    j["backing"] = "device";
    j["states"] = matrix_to_json(core.states());
    j["residuals"] = matrix_to_json(core.residuals());
  } else {
    j["backing"] = "continuous";
    j["matrix"] = matrix_to_json(core.continuous_matrix());
  }
  j["activation_range"] = core.tracker().range;
  j["activation_range_initialized"] = core.tracker().initialized;
}

void core_from_json(MappedCore& core, const ordered_json& j) {
  const std::string backing = j.at("backing").get<std::string>();
  const Eigen::Index n_dummy = core.periphery().n_dummy;
  const Eigen::Index n_in = core.n_in();
  try {
    if (backing == "device") {
      core.restore_device_state(
          matrix_from_json<Eigen::MatrixXi>(j.at("states"), n_dummy, n_in,
                                            "states"),
          matrix_from_json<Eigen::MatrixXd>(j.at("residuals"), n_dummy, n_in,
                                            "residuals"));
    } else if (backing == "continuous") {
      core.restore_continuous_state(matrix_from_json<Eigen::MatrixXd>(
          j.at("matrix"), n_dummy, n_in, "matrix"));
    } else {
      throw CheckpointError("checkpoint: unknown backing '" + backing + "'");
    }
  } catch (const Error& e) {
    throw CheckpointError(e.what());
  }
  core.tracker().range = j.at("activation_range").get<double>();
  core.tracker().initialized =
      j.at("activation_range_initialized").get<bool>();
}

} // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  ordered_json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["model_type"] = std::string(model_type_name(model.type));
  ordered_json device;
  device["bits"] = model.device.bits;
  device["nonlinearity"] = model.device.nonlinearity;
  device["g_max"] = model.device.g_max;
  device["variation_sigma"] = model.device.variation_sigma;
  device["activation_bits"] = model.device.activation_bits;
  j["device"] = std::move(device);

  ordered_json layers = ordered_json::array();
  for (const auto& layer : model.layers) {
    ordered_json lj = spec_to_json(layer->spec());
    if (const auto* dense = dynamic_cast<const DenseLayer*>(layer.get())) {
      lj["weights"] = matrix_to_json(dense->weight());
    } else if (const auto* conv = dynamic_cast<const ConvLayer*>(layer.get())) {
      lj["weights"] = matrix_to_json(conv->kernels());
    } else if (auto* core = const_cast<Layer&>(*layer).mapped_core()) {
      core_to_json(*core, lj);
    }
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CheckpointError("checkpoint: cannot write " + path);
  }
  out << j.dump(1) << '\n';
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("checkpoint: cannot open " + path);
  }
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint: parse error in " + path + ": " +
                          e.what());
  }

  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion) {
      throw CheckpointError("checkpoint: schema_version " +
                            std::to_string(version) + " unsupported (have " +
                            std::to_string(kCheckpointSchemaVersion) + ")");
    }
    const auto type = parse_model_type(j.at("model_type").get<std::string>());
    if (!type) {
      throw CheckpointError("checkpoint: unknown model_type");
    }

    Model model;
    model.type = *type;
    const auto& dj = j.at("device");
    model.device.bits = dj.at("bits").get<int>();
    model.device.nonlinearity = dj.at("nonlinearity").get<double>();
    model.device.g_max = dj.at("g_max").get<double>();
    model.device.variation_sigma = dj.at("variation_sigma").get<double>();
    model.device.activation_bits = dj.at("activation_bits").get<int>();
    model.device.validate();

    const std::optional<MappingScheme> scheme = mapped_scheme(*type);
    for (const auto& lj : j.at("layers")) {
      const LayerSpec spec = spec_from_json(lj);
      switch (spec.kind) {
      case LayerSpec::Kind::dense:
        if (scheme) {
          const Backing backing =
              lj.at("backing").get<std::string>() == "device"
                  ? Backing::device
                  : Backing::continuous;
          auto layer = std::make_unique<MappedDenseLayer>(spec, *scheme,
                                                          model.device,
                                                          backing);
          core_from_json(*layer->mapped_core(), lj);
          model.backing = backing;
          model.layers.push_back(std::move(layer));
        } else {
          model.layers.push_back(std::make_unique<DenseLayer>(
              spec, matrix_from_json<Eigen::MatrixXd>(
                        lj.at("weights"), spec.out_features, spec.in_features,
                        "weights")));
        }
        break;
      case LayerSpec::Kind::conv2d: {
        const int patch_dim = spec.in_channels * spec.kernel * spec.kernel;
        if (scheme) {
          const Backing backing =
              lj.at("backing").get<std::string>() == "device"
                  ? Backing::device
                  : Backing::continuous;
          auto layer = std::make_unique<MappedConvLayer>(spec, *scheme,
                                                         model.device,
                                                         backing);
          core_from_json(*layer->mapped_core(), lj);
          model.backing = backing;
          model.layers.push_back(std::move(layer));
        } else {
          model.layers.push_back(std::make_unique<ConvLayer>(
              spec, matrix_from_json<Eigen::MatrixXd>(
                        lj.at("weights"), spec.out_channels, patch_dim,
                        "weights")));
        }
        break;
      }
      case LayerSpec::Kind::relu:
        model.layers.push_back(std::make_unique<ReluLayer>(spec));
        break;
      case LayerSpec::Kind::flatten:
        model.layers.push_back(std::make_unique<FlattenLayer>(spec));
        break;
      case LayerSpec::Kind::softmax_output:
        model.layers.push_back(std::make_unique<SoftmaxOutputLayer>(spec));
        break;
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint: missing or mistyped field in " + path +
                          ": " + e.what());
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError("checkpoint: " + std::string(e.what()));
  }
}

} // namespace xbarmap
