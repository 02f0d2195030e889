/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <string>

#include "xbarmap/network.hpp"

namespace xbarmap {

inline constexpr int kCheckpointSchemaVersion = 1;

/// Serializes a model to the versioned JSON checkpoint format described in
/// docs/checkpoint_format.md: layer specs, mapping tags, device parameters,
/// row-major state/weight matrices and activation-range trackers.
void save_checkpoint(const Model& model, const std::string& path);

/// Rebuilds a model from a checkpoint. Schema or shape problems raise
/// CheckpointError.
Model load_checkpoint(const std::string& path);

} // namespace xbarmap
