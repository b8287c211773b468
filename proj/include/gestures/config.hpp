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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gestures/ctc.hpp"
#include "gestures/factorization.hpp"
#include "gestures/objectives.hpp"
#include "gestures/recognizer.hpp"

namespace gestures {

enum class Task { kResynthesis, kJoint };

std::string to_string(Task task);
Task parse_task(const std::string& s);

// Every hyperparameter of a training run. Serialized as key=value lines with
// dotted sections ("optim.lr = 0.001").
struct TrainConfig {
  Task task = Task::kResynthesis;
  ModelShape model;
  bool renormalize_gestures = false;
  LossWeights loss;

  double lr = 1e-3;
  Index lr_decay_every = 5;  // epochs
  double lr_decay_factor = 5.0;
  double weight_decay = 1e-4;
  bool decoupled_weight_decay = false;

  Index batch_size = 8;
  Index segment_len = 300;  // 0 = full utterances
  Index epochs = 30;
  Index max_steps = 0;      // 0 = no cap
  std::uint64_t seed = 0;
  double train_ratio = 0.8;
  double validation_fraction = 0.1;

  Index kmeans_window = 41;
  Index kmeans_stride = 1;
  Index kmeans_max_iterations = 300;
  double kmeans_tolerance = 1e-6;

  RecognizerShape recognizer;
  std::string alphabet = "cmu39";  // "cmu39" or a comma-separated symbol list
  std::string merge;               // "from:to,from:to" for custom alphabets
  Index beam_width = 50;

  /// Throws ConfigError for non-positive or inconsistent values.
  void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

/// Parses "key = value" lines; '#' starts a comment. Throws ConfigError.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

/// Applies entries onto `config`; unknown keys are rejected.
void apply_key_values(TrainConfig& config, const KeyValues& kv);
KeyValues to_key_values(const TrainConfig& config);
std::string format_config(const TrainConfig& config);
TrainConfig load_config(const std::filesystem::path& path);

LabelAlphabet make_alphabet(const TrainConfig& config);

}  // namespace gestures
