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
#include "gestures/ctc.hpp"
#include "gestures/data_io.hpp"
#include "gestures/factorization.hpp"
#include "gestures/recognizer.hpp"

namespace gestures {

struct Inference {
  Tensor H;      // D x t
  Tensor X_hat;  // C x t, normalized units
  std::optional<RowMatrix> log_probs;  // t x classes
};

/// Single-utterance forward pass with normalization layers in inference mode.
/// X is C x t in normalized units.
Inference infer(GestureModel& model, RecognizerParams* recognizer, const Tensor& X);

struct ScoreRow {
  std::string id;
  double rec_percent = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double entropy = 0.0;  // NaN when every row of H is constant and nonzero
};

ScoreRow evaluate_scores(const std::string& id, const Tensor& X, const Tensor& X_hat, const Tensor& H);

struct PerRow {
  std::string id;
  double per = 0.0;
  double per_v = 0.0;
  Index ref_len = 0;
  Index edits = 0;
  Index edits_merged = 0;
};

PerRow per_row(const std::string& id, const PhonemeSequence& ref, const PhonemeSequence& hyp,
               const LabelAlphabet& alphabet);

struct PerSummary {
  double per = 0.0;    // 100 * sum edits / sum ref_len
  double per_v = 0.0;
  Index ref_len = 0;
};

PerSummary summarize(const std::vector<PerRow>& rows);

struct EvalOptions {
  bool greedy = true;
  bool beam = true;
  Index beam_width = 50;
};

struct EvalReport {
  std::vector<ScoreRow> resynthesis;
  std::vector<PerRow> greedy;
  std::vector<PerRow> beam;
  Index unlabeled = 0;  // utterances without labels, excluded from PER

  double mean_rec_percent() const;
  double mean_s1() const;
  double mean_s2() const;
  double mean_entropy() const;
};

/// Evaluates already-normalized utterances.
EvalReport evaluate_normalized(GestureModel& model, RecognizerParams* recognizer,
                               const LabelAlphabet* alphabet, const Corpus& normalized,
                               const EvalOptions& options = {});

/// Normalizes raw utterances with the checkpoint statistics, then evaluates.
EvalReport evaluate(Checkpoint& ckpt, const Corpus& raw, const EvalOptions& options = {});

std::string format_summary(const EvalReport& report);

/// resynthesis.csv, per_greedy.csv, per_beam.csv and summary.txt.
void write_eval_report(const std::filesystem::path& dir, const EvalReport& report);

}  // namespace gestures
