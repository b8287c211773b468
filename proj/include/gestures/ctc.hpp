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

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gestures/data_io.hpp"
#include "gestures/ops.hpp"
#include "gestures/tape.hpp"
#include "gestures/tensor.hpp"

namespace gestures {

/// Target length exceeds what the frame count can align.
class CtcInfeasibleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kBlank = 0;

// Phone symbols with CTC indices 1..size(); index 0 is the blank. The merge
// map sends each symbol to a class representative that maps to itself.
class LabelAlphabet {
 public:
  LabelAlphabet() = default;
  explicit LabelAlphabet(std::vector<std::string> symbols,
                         std::map<std::string, std::string> merge = {});

  /// The 39 CMU dictionary phones without stress, lower case, with the
  /// articulatory merge (p,b,m) (t,d,n) (ch,jh) (f,v) (sh,zh) (k,g,ng) (s,z) (th,dh).
  static LabelAlphabet cmu39();

  Index size() const { return static_cast<Index>(symbols_.size()); }
  Index classes() const { return size() + 1; }
  const std::vector<std::string>& symbols() const { return symbols_; }
  bool contains(const std::string& symbol) const { return index_.count(symbol) > 0; }
  int index_of(const std::string& symbol) const;
  const std::string& symbol(int index) const;
  const std::string& merged(const std::string& symbol) const;

  std::vector<int> encode(const PhonemeSequence& seq) const;
  PhonemeSequence decode(const std::vector<int>& labels) const;
  PhonemeSequence merge(const PhonemeSequence& seq) const;

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, int> index_;
  std::map<std::string, std::string> merge_;
};

// ---------------------------------------------------------------------------
// CTC loss. log_probs is t x K (frames x classes) with blank at column 0.
// ---------------------------------------------------------------------------

struct CtcResult {
  double loss = 0.0;  // -ln P(target | log_probs)
  RowMatrix grad;     // d loss / d log_probs, t x K
};

/// Minimum frame count for a target: its length plus its adjacent repeats.
Index ctc_min_frames(const std::vector<int>& target);

/// Forward-backward in log space. Rows must be log-softmax normalized.
/// Throws CtcInfeasibleError for a too-short input and std::invalid_argument
/// for non-normalized rows.
CtcResult ctc_loss(const Eigen::Ref<const RowMatrix>& log_probs, const std::vector<int>& target,
                   bool with_grad = true);
/// Same recursion without the normalization check; the gradient treats every
/// entry as an independent variable.
CtcResult ctc_loss_unchecked(const Eigen::Ref<const RowMatrix>& log_probs,
                             const std::vector<int>& target, bool with_grad = true);

/// Batch CTC over B x K x t log-probabilities; mean of per-element losses.
Var ctc_loss(Tape& tape, Var log_probs, const std::vector<std::vector<int>>& targets,
             Lengths lengths = {});

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

/// Per-frame argmax (lowest index on ties), collapse repeats, drop blanks.
std::vector<int> greedy_decode(const Eigen::Ref<const RowMatrix>& log_probs);

struct BeamHypothesis {
  std::vector<int> labels;
  double log_prob = 0.0;  // ln(p_blank_end + p_label_end) of the prefix
};

/// CTC prefix beam search keeping `width` prefixes per frame. No language
/// model. Ties are broken by the lexicographically smaller prefix.
BeamHypothesis beam_search(const Eigen::Ref<const RowMatrix>& log_probs, Index width);
std::vector<int> beam_decode(const Eigen::Ref<const RowMatrix>& log_probs, Index width = 50);

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Levenshtein distance with unit costs.
template <typename Sequence>
Index edit_distance(const Sequence& ref, const Sequence& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<Index> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<Index>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<Index>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const Index sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

struct PerResult {
  double percent = 0.0;
  Index edits = 0;
  Index ref_length = 0;
};

/// 100 * sum edit_distance / sum |ref|. With merge = true (PER-V) both
/// sequences pass through the alphabet's merge map first.
PerResult phoneme_error_rate(const std::vector<PhonemeSequence>& refs,
                             const std::vector<PhonemeSequence>& hyps, const LabelAlphabet& alphabet,
                             bool merge);

}  // namespace gestures
