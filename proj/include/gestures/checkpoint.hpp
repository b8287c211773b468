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

#include "gestures/config.hpp"
#include "gestures/ctc.hpp"
#include "gestures/data_io.hpp"
#include "gestures/factorization.hpp"
#include "gestures/recognizer.hpp"

namespace gestures {

// Everything needed to rerun inference: the resolved configuration,
// normalization statistics, all parameters and normalization running stats.
struct Checkpoint {
  TrainConfig config;
  NormStats norm;
  GestureModel model;
  std::optional<RecognizerParams> recognizer;
  std::optional<LabelAlphabet> alphabet;
  long step = 0;
  Index epoch = 0;
};

// Text container, version line "gestures-checkpoint v1". Tensor values are
// stored as hexadecimal floating point, so a round trip is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gestures
