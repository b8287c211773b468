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
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "gestures/checkpoint.hpp"
#include "gestures/config.hpp"
#include "gestures/data_io.hpp"
#include "gestures/objectives.hpp"
#include "gestures/tape.hpp"

namespace gestures {

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

/// One Adam update over `params` using their accumulated grads. Weight decay
/// is added to the gradient (coupled) or subtracted from the parameter after
/// the update (decoupled); parameters with decay == false are exempt.
/// Returns false and leaves everything untouched if any gradient is non-finite.
bool adam_step(const std::vector<Parameter*>& params, AdamState& state, double lr,
               double weight_decay, bool decoupled = false, const AdamOptions& options = {});

/// lr / factor^floor(epoch / every)
double lr_at(Index epoch, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

struct Segment {
  Tensor frames;    // C x len
  Index valid = 0;  // real frames; the rest is zero padding
  Index start = 0;
};

/// A random window of `len` frames, or the utterance right-padded with zeros
/// when it is shorter. len == 0 returns the whole utterance without drawing.
Segment sample_segment(const Utterance& utt, Index len, std::mt19937_64& rng);

struct Batch {
  Tensor X;  // B x C x L
  std::vector<Index> lengths;
  std::vector<std::vector<int>> targets;
};

Batch make_batch(const std::vector<Segment>& segments);

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

struct MetricsRow {
  long step = 0;
  Index epoch = 0;
  double lr = 0.0;
  LossReport loss;
  std::optional<double> val_per;
  std::optional<double> val_per_v;
};

struct ValidationRow {
  Index epoch = 0;
  long step = 0;
  double rec_percent = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double entropy = 0.0;
  std::optional<double> per;
  std::optional<double> per_v;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);
void write_validation_header(std::ostream& os);
void write_validation_row(std::ostream& os, const ValidationRow& row);

struct TrainResult {
  Checkpoint best;
  std::vector<MetricsRow> metrics;
  std::vector<ValidationRow> validation;
  Corpus train;       // raw utterances used for fitting
  Corpus validation_set;
  Corpus test;        // raw held-out split
  Index skipped_utterances = 0;  // CTC-infeasible, joint task only
  bool diverged = false;
  std::string divergence_reason;
};

struct TrainHooks {
  std::ostream* metrics = nullptr;     // streamed metrics CSV (header included)
  std::ostream* validation = nullptr;  // streamed validation CSV
  std::ostream* progress = nullptr;    // human-readable epoch summaries
};

/// Resynthesis training with the sparsity objective on random segments
/// (segment_len == 0 uses whole utterances).
TrainResult train_resynthesis(const TrainConfig& config, const Corpus& corpus,
                              const TrainHooks& hooks = {});

/// Joint resynthesis and CTC recognition on full utterances. Requires labels.
TrainResult train_joint(const TrainConfig& config, const Corpus& corpus, const TrainHooks& hooks = {});

}  // namespace gestures
