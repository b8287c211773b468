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

#include "gestures/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "gestures/errors.hpp"
#include "gestures/objectives.hpp"

namespace gestures {
namespace {

Tensor as_batch(const Tensor& m) { return m.reshaped({1, m.dim(0), m.dim(1)}); }

Tensor first(const Tensor& batch) { return batch.reshaped({batch.dim(1), batch.dim(2)}); }

template <typename Row, typename Fn>
double mean_of(const std::vector<Row>& rows, Fn fn) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const auto& r : rows) s += fn(r);
  return s / static_cast<double>(rows.size());
}

void write_per_csv(const std::filesystem::path& path, const std::vector<PerRow>& rows) {
  std::ofstream os(path);
  if (!os) throw DataError(path.string() + ": cannot write");
  os.precision(17);
  os << "utt_id,per,per_v,ref_len,edits,edits_merged\n";
  for (const auto& r : rows)
    os << r.id << ',' << r.per << ',' << r.per_v << ',' << r.ref_len << ',' << r.edits << ','
       << r.edits_merged << '\n';
}

}  // namespace

Inference infer(GestureModel& model, RecognizerParams* recognizer, const Tensor& X) {
  require_rank(X, 2, "infer");
  model.set_mode(NormMode::kInference);
  Inference out;
  const Tensor H = encode(as_batch(X), model.encoder);
  const Tensor X_hat = decode(H, model.decoder.W.value, model.decoder.bias.value);
  out.H = first(H);
  out.X_hat = first(X_hat);
  if (recognizer) {
    recognizer->set_mode(NormMode::kInference);
    const Tensor lp = recognize(H, *recognizer);
    out.log_probs = frame_log_probs(lp, 0, lp.dim(2));
  }
  return out;
}

ScoreRow evaluate_scores(const std::string& id, const Tensor& X, const Tensor& X_hat, const Tensor& H) {
  require_rank(H, 2, "evaluate_scores H");
  ScoreRow r;
  r.id = id;
  r.rec_percent = relative_error_percent(X.matrix(), X_hat.matrix());
  if (H.dim(1) >= 2) r.s1 = time_sparsity(H.matrix());
  if (H.dim(0) >= 2) r.s2 = channel_sparsity(H.matrix());
  try {
    r.entropy = entropy_of_sparseness(H.matrix());
  } catch (const NumericError&) {
    r.entropy = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

PerRow per_row(const std::string& id, const PhonemeSequence& ref, const PhonemeSequence& hyp,
               const LabelAlphabet& alphabet) {
  PerRow r;
  r.id = id;
  r.ref_len = static_cast<Index>(ref.size());
  r.edits = edit_distance(ref, hyp);
  r.edits_merged = edit_distance(alphabet.merge(ref), alphabet.merge(hyp));
  const double n = static_cast<double>(std::max<Index>(r.ref_len, 1));
  r.per = 100.0 * static_cast<double>(r.edits) / n;
  r.per_v = 100.0 * static_cast<double>(r.edits_merged) / n;
  return r;
}

PerSummary summarize(const std::vector<PerRow>& rows) {
  PerSummary s;
  Index edits = 0, merged = 0;
  for (const auto& r : rows) {
    edits += r.edits;
    merged += r.edits_merged;
    s.ref_len += r.ref_len;
  }
  if (s.ref_len == 0) {
    s.per = s.per_v = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.per = 100.0 * static_cast<double>(edits) / static_cast<double>(s.ref_len);
  s.per_v = 100.0 * static_cast<double>(merged) / static_cast<double>(s.ref_len);
  return s;
}

double EvalReport::mean_rec_percent() const {
  return mean_of(resynthesis, [](const ScoreRow& r) { return r.rec_percent; });
}
double EvalReport::mean_s1() const {
  return mean_of(resynthesis, [](const ScoreRow& r) { return r.s1; });
}
double EvalReport::mean_s2() const {
  return mean_of(resynthesis, [](const ScoreRow& r) { return r.s2; });
}
double EvalReport::mean_entropy() const {
  return mean_of(resynthesis, [](const ScoreRow& r) { return r.entropy; });
}

EvalReport evaluate_normalized(GestureModel& model, RecognizerParams* recognizer,
                               const LabelAlphabet* alphabet, const Corpus& normalized,
                               const EvalOptions& options) {
  if (recognizer && !alphabet) throw std::invalid_argument("evaluate: recognizer without alphabet");
  EvalReport report;
  for (const auto& utt : normalized) {
    const Inference inf = infer(model, recognizer, utt.frames);
    report.resynthesis.push_back(evaluate_scores(utt.id, utt.frames, inf.X_hat, inf.H));
    if (!recognizer) continue;
    if (!utt.labels || utt.labels->empty()) {
      ++report.unlabeled;
      continue;
    }
    if (options.greedy)
      report.greedy.push_back(
          per_row(utt.id, *utt.labels, alphabet->decode(greedy_decode(*inf.log_probs)), *alphabet));
    if (options.beam)
      report.beam.push_back(per_row(utt.id, *utt.labels,
                                    alphabet->decode(beam_decode(*inf.log_probs, options.beam_width)),
                                    *alphabet));
  }
  return report;
}

EvalReport evaluate(Checkpoint& ckpt, const Corpus& raw, const EvalOptions& options) {
  for (const auto& utt : raw)
    if (utt.channels() != ckpt.config.model.channels)
      throw DataError(utt.id + ": " + std::to_string(utt.channels()) + " channels, checkpoint expects " +
                      std::to_string(ckpt.config.model.channels));
  const Corpus normalized = normalize(raw, ckpt.norm);
  RecognizerParams* rec = ckpt.recognizer ? &*ckpt.recognizer : nullptr;
  const LabelAlphabet* alphabet = ckpt.alphabet ? &*ckpt.alphabet : nullptr;
  return evaluate_normalized(ckpt.model, rec, alphabet, normalized, options);
}

std::string format_summary(const EvalReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << "utterances " << r.resynthesis.size() << '\n';
  os << "rec_loss_percent " << r.mean_rec_percent() << '\n';
  os << "s1_percent " << 100.0 * r.mean_s1() << '\n';
  os << "s2_percent " << 100.0 * r.mean_s2() << '\n';
  os << "entropy " << r.mean_entropy() << '\n';
  if (!r.greedy.empty()) {
    const PerSummary s = summarize(r.greedy);
    os << "per_greedy " << s.per << "\nper_v_greedy " << s.per_v << '\n';
  }
  if (!r.beam.empty()) {
    const PerSummary s = summarize(r.beam);
    os << "per_beam " << s.per << "\nper_v_beam " << s.per_v << '\n';
  }
  if (!r.greedy.empty() || !r.beam.empty()) {
    os << "recognizer dilated temporal convolutions (kernel 5, dilations 1,2,4,8) in place of Bi-LSTM\n";
    if (r.unlabeled) os << "unlabeled_utterances " << r.unlabeled << '\n';
  }
  return os.str();
}

void write_eval_report(const std::filesystem::path& dir, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "resynthesis.csv");
    if (!os) throw DataError((dir / "resynthesis.csv").string() + ": cannot write");
    os.precision(17);
    os << "utt_id,rec_pct,s1,s2,entropy\n";
    for (const auto& r : report.resynthesis)
      os << r.id << ',' << r.rec_percent << ',' << r.s1 << ',' << r.s2 << ',' << r.entropy << '\n';
  }
  if (!report.greedy.empty()) write_per_csv(dir / "per_greedy.csv", report.greedy);
  if (!report.beam.empty()) write_per_csv(dir / "per_beam.csv", report.beam);
  std::ofstream os(dir / "summary.txt");
  os << format_summary(report);
}

}  // namespace gestures
