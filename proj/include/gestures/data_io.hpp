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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gestures/tensor.hpp"

namespace gestures {

/// EMA channel order: x then y for upper lip, lower lip, lower incisor,
/// tongue tip, tongue blade, tongue dorsum.
inline constexpr std::array<std::string_view, 12> kEmaChannels = {
    "ULx", "ULy", "LLx", "LLy", "LIx", "LIy", "TTx", "TTy", "TBx", "TBy", "TDx", "TDy"};
inline constexpr Index kEmaChannelCount = 12;
inline constexpr double kEmaSampleRate = 200.0;

using PhonemeSequence = std::vector<std::string>;

struct Utterance {
  std::string id;
  Tensor frames;  // C x t
  double sample_rate = kEmaSampleRate;
  std::optional<PhonemeSequence> labels;

  Index channels() const { return frames.dim(0); }
  Index length() const { return frames.dim(1); }
};

using Corpus = std::vector<Utterance>;

// ---------------------------------------------------------------------------
// Text formats
//
//   ema v1 channels=12 rate=200
//   <12 space-separated values>       one line per frame
//
// Manifest: CSV with header "id,path"; relative paths resolve against the
// manifest's directory. Labels: "<utt-id> <phone> <phone> ..." per line.
// ---------------------------------------------------------------------------

Utterance read_ema(const std::filesystem::path& path, std::string id = {});
/// Values are written in shortest round-trip form, so read_ema(write_ema(u))
/// reproduces every bit.
void write_ema(const std::filesystem::path& path, const Utterance& utt);

std::vector<std::pair<std::string, PhonemeSequence>> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const Corpus& corpus);

/// Loads every manifest entry; when `labels` is given, attaches label lines
/// by utterance id (missing ids are an error).
Corpus load_corpus(const std::filesystem::path& manifest,
                   const std::optional<std::filesystem::path>& labels = std::nullopt);
/// Writes <dir>/<id>.ema, <dir>/manifest.csv and, if any utterance has
/// labels, <dir>/labels.txt.
void save_corpus(const std::filesystem::path& dir, const Corpus& corpus);

struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

/// Per-channel statistics over every frame of `corpus`. Throws DataError for
/// a zero-variance channel.
NormStats compute_norm_stats(const Corpus& corpus);
Corpus normalize(const Corpus& corpus, const NormStats& stats);
Tensor normalize(const Tensor& frames, const NormStats& stats);
Tensor denormalize(const Tensor& frames, const NormStats& stats);

struct Split {
  Corpus train;
  Corpus test;
};

/// Seeded shuffle followed by a prefix split; train gets floor(n * ratio).
Split split_corpus(const Corpus& corpus, double train_ratio, std::uint64_t seed);

}  // namespace gestures
