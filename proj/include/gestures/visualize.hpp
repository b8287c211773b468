// Copyright 2026 The ema-gestures Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gestures/checkpoint.hpp"
#include "gestures/data_io.hpp"

namespace gestures {

/// One labelled interval for the heatmap overlay, in seconds.
struct AlignmentSpan {
  double start = 0.0;
  double end = 0.0;
  std::string label;
};

/// Lines of "start end label", '#' comments allowed.
std::vector<AlignmentSpan> read_alignment(const std::filesystem::path& path);

/// D rows by t columns, shortest round-trip decimal form.
void write_heatmap_csv(const std::filesystem::path& path, const Tensor& H);
Tensor read_heatmap_csv(const std::filesystem::path& path);

std::string heatmap_svg(const Tensor& H, double sample_rate, const std::vector<AlignmentSpan>& alignment = {});

/// The k rows with the largest total activation, largest first, lower index on ties.
std::vector<Index> top_gestures(const Tensor& H, Index k);

/// Coil x-y trajectories of gesture d in forward time, drawn from thin to
/// thick strokes. Channels are denormalized with `norm` (mean plus scaled offset).
std::string gesture_svg(const Tensor& W, Index d, const NormStats& norm, double sample_rate);

/// Per-channel overlay of original and resynthesized traces (C x t each).
std::string traces_svg(const Tensor& X, const Tensor& X_hat, double sample_rate);

struct VizOptions {
  Index top_k = 4;
  std::optional<std::filesystem::path> alignment;
};

struct VizFiles {
  std::vector<std::filesystem::path> written;
  std::vector<Index> gestures;  // the top-k selection
};

/// Runs the model on one raw utterance and writes heatmap.csv, heatmap.svg,
/// gesture_<d>.svg for the top-k gestures and traces.svg into out_dir.
VizFiles run_viz(Checkpoint& ckpt, const Utterance& raw, const std::filesystem::path& out_dir,
                 const VizOptions& options = {});

}  // namespace gestures
