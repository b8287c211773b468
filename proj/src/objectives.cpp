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

#include "gestures/objectives.hpp"

#include <memory>
#include <vector>

namespace gestures {
namespace {

Index frames(Lengths lengths, Index b, Index full) {
  return lengths.empty() ? full : lengths[static_cast<std::size_t>(b)];
}

void check_batch(const Tensor& t, Lengths lengths, const char* where) {
  require_rank(t, 3, where);
  if (!lengths.empty() && static_cast<Index>(lengths.size()) != t.dim(0))
    throw ShapeError(std::string(where) + ": lengths size does not match batch");
  for (Index n : lengths)
    if (n < 1 || n > t.dim(2)) throw ShapeError(std::string(where) + ": frame length out of range");
}

using MatrixFn = double (*)(const ConstMatrixRef&, RowMatrix*);

// Batch mean of a per-element matrix statistic of H, as a taped scalar.
Var batch_statistic(Tape& tape, Var H, Lengths lengths, MatrixFn fn, const char* name) {
  const Tensor& h = tape.value(H);
  check_batch(h, lengths, name);
  const Index B = h.dim(0), L = h.dim(2);
  auto grad = std::make_shared<Tensor>(h.shape());
  double total = 0.0;
  RowMatrix g;
  for (Index b = 0; b < B; ++b) {
    const Index n = frames(lengths, b, L);
    total += fn(h.slice(b).leftCols(n), &g);
    grad->slice(b).leftCols(n) = g / static_cast<double>(B);
  }
  return tape.record(name, Tensor({1}, total / static_cast<double>(B)), {H},
                     [grad, H](Tape& t, const Tensor& go) {
                       Tensor gi = *grad;
                       gi.data() *= go[0];
                       t.accumulate(H, gi);
                     });
}

}  // namespace

double LossReport::recompute_total(const LossWeights& w) const {
  double t = rec - w.lambda1 * s1 - w.lambda2 * s2 + w.lambda3 * entropy;
  if (ctc) t += w.lambda4 * *ctc;
  return t;
}

void write_loss_csv_header(std::ostream& os) { os << "step,rec,s1,s2,entropy,ctc,total\n"; }

void write_loss_csv_row(std::ostream& os, long step, const LossReport& r) {
  const auto old = os.precision(17);
  os << step << ',' << r.rec << ',' << r.s1 << ',' << r.s2 << ',' << r.entropy << ',';
  if (r.ctc) os << *r.ctc;
  os << ',' << r.total << '\n';
  os.precision(old);
}

double time_sparsity(const ConstMatrixRef& H, RowMatrix* grad) {
  if (H.rows() < 1) throw ShapeError("time_sparsity: no gestures");
  const double D = static_cast<double>(H.rows());
  double sum = 0.0;
  if (grad) grad->resize(H.rows(), H.cols());
  for (Index i = 0; i < H.rows(); ++i) {
    if (grad) {
      sum += hoyer_sparseness(H.row(i), grad->row(i));
    } else {
      sum += hoyer_sparseness(H.row(i));
    }
  }
  if (grad) *grad /= D;
  return sum / D;
}

double channel_sparsity(const ConstMatrixRef& H, RowMatrix* grad) {
  if (H.cols() < 1) throw ShapeError("channel_sparsity: no frames");
  const double t = static_cast<double>(H.cols());
  double sum = 0.0;
  if (grad) grad->resize(H.rows(), H.cols());
  for (Index j = 0; j < H.cols(); ++j) {
    if (grad) {
      sum += hoyer_sparseness(H.col(j), grad->col(j));
    } else {
      sum += hoyer_sparseness(H.col(j));
    }
  }
  if (grad) *grad /= t;
  return sum / t;
}

double entropy_of_sparseness(const ConstMatrixRef& H, RowMatrix* grad) {
  const Index D = H.rows();
  if (D < 1) throw ShapeError("entropy_of_sparseness: no gestures");
  RowMatrix row_grads(D, H.cols());
  Eigen::VectorXd s(D);
  for (Index i = 0; i < D; ++i) s[i] = hoyer_sparseness(H.row(i), row_grads.row(i));
  const double total = s.sum();
  if (!(total > 0.0))
    throw NumericError("entropy_of_sparseness: every row has zero sparseness (degenerate score)");

  double plogp = 0.0;  // sum_i p_i ln p_i, with 0 ln 0 = 0
  for (Index i = 0; i < D; ++i) {
    const double p = s[i] / total;
    if (p > 0.0) plogp += p * std::log(p);
  }
  const double entropy = -plogp / static_cast<double>(D);
  if (grad) {
    // dE/dS_j = (-ln p_j + sum_i p_i ln p_i) / (D * sum S); zero where p_j = 0
    grad->resize(D, H.cols());
    for (Index j = 0; j < D; ++j) {
      const double p = s[j] / total;
      const double dS = p > 0.0 ? (-std::log(p) + plogp) / (static_cast<double>(D) * total) : 0.0;
      grad->row(j) = dS * row_grads.row(j);
    }
  }
  return entropy;
}

double reconstruction_mse(const ConstMatrixRef& X, const ConstMatrixRef& X_hat) {
  if (X.rows() != X_hat.rows() || X.cols() != X_hat.cols())
    throw ShapeError("reconstruction_loss: shape mismatch");
  return (X - X_hat).squaredNorm() / static_cast<double>(X.size());
}

double relative_error_percent(const ConstMatrixRef& X, const ConstMatrixRef& X_hat) {
  if (X.rows() != X_hat.rows() || X.cols() != X_hat.cols())
    throw ShapeError("reconstruction_loss: shape mismatch");
  const double norm = X.norm();
  if (norm == 0.0) throw NumericError("reconstruction_loss: reference has zero norm");
  return 100.0 * (X - X_hat).norm() / norm;
}

double reconstruction_term(const ConstMatrixRef& X, const ConstMatrixRef& X_hat, RecLoss kind) {
  switch (kind) {
    case RecLoss::kMse: return reconstruction_mse(X, X_hat);
    case RecLoss::kSse: return (X - X_hat).squaredNorm();
    case RecLoss::kNorm: return (X - X_hat).norm();
  }
  throw std::invalid_argument("reconstruction_term: unknown kind");
}

Reconstruction reconstruction_loss(const ConstMatrixRef& X, const ConstMatrixRef& X_hat) {
  return {reconstruction_mse(X, X_hat), relative_error_percent(X, X_hat)};
}

LossReport resynthesis_loss(const Tensor& X, const Tensor& X_hat, const Tensor& H,
                            const LossWeights& w, Lengths lengths) {
  check_batch(X, lengths, "resynthesis_loss");
  require_shape(X_hat, X.shape(), "resynthesis_loss X_hat");
  check_batch(H, lengths, "resynthesis_loss H");
  if (H.dim(0) != X.dim(0) || H.dim(2) != X.dim(2)) throw ShapeError("resynthesis_loss: H shape");
  const Index B = X.dim(0), L = X.dim(2);
  LossReport r;
  for (Index b = 0; b < B; ++b) {
    const Index n = frames(lengths, b, L);
    auto h = H.slice(b).leftCols(n);
    r.rec += reconstruction_term(X.slice(b).leftCols(n), X_hat.slice(b).leftCols(n), w.reconstruction);
    r.s1 += time_sparsity(h);
    r.s2 += channel_sparsity(h);
    r.entropy += entropy_of_sparseness(h);
  }
  const double inv = 1.0 / static_cast<double>(B);
  r.rec *= inv;
  r.s1 *= inv;
  r.s2 *= inv;
  r.entropy *= inv;
  r.total = r.recompute_total(w);
  return r;
}

LossReport joint_loss(const Tensor& X, const Tensor& X_hat, const Tensor& H, double ctc,
                      const LossWeights& w, Lengths lengths) {
  LossReport r = resynthesis_loss(X, X_hat, H, w, lengths);
  r.ctc = ctc;
  r.total = r.recompute_total(w);
  return r;
}

Var masked_reconstruction(Tape& tape, Var X_hat, const Tensor& X, RecLoss kind, Lengths lengths) {
  const Tensor& xh = tape.value(X_hat);
  check_batch(X, lengths, "masked_reconstruction");
  require_shape(xh, X.shape(), "masked_reconstruction X_hat");
  const Index B = X.dim(0), C = X.dim(1), L = X.dim(2);
  const double inv_b = 1.0 / static_cast<double>(B);
  auto grad = std::make_shared<Tensor>(X.shape());
  double total = 0.0;
  for (Index b = 0; b < B; ++b) {
    const Index n = frames(lengths, b, L);
    const RowMatrix diff = xh.slice(b).leftCols(n) - X.slice(b).leftCols(n);
    const double sse = diff.squaredNorm();
    double value = sse, scale = 2.0;
    if (kind == RecLoss::kMse) {
      const double count = static_cast<double>(C * n);
      value = sse / count;
      scale = 2.0 / count;
    } else if (kind == RecLoss::kNorm) {
      value = std::sqrt(sse);
      scale = value > 0.0 ? 1.0 / value : 0.0;
    }
    total += value;
    grad->slice(b).leftCols(n) = (scale * inv_b) * diff;
  }
  return tape.record("reconstruction", Tensor({1}, total * inv_b), {X_hat},
                     [grad, X_hat](Tape& t, const Tensor& go) {
                       Tensor gi = *grad;
                       gi.data() *= go[0];
                       t.accumulate(X_hat, gi);
                     });
}

Var masked_mse(Tape& tape, Var X_hat, const Tensor& X, Lengths lengths) {
  return masked_reconstruction(tape, X_hat, X, RecLoss::kMse, lengths);
}

Var batch_time_sparsity(Tape& tape, Var H, Lengths lengths) {
  return batch_statistic(tape, H, lengths, &time_sparsity, "time_sparsity");
}

Var batch_channel_sparsity(Tape& tape, Var H, Lengths lengths) {
  return batch_statistic(tape, H, lengths, &channel_sparsity, "channel_sparsity");
}

Var batch_entropy(Tape& tape, Var H, Lengths lengths) {
  return batch_statistic(tape, H, lengths, &entropy_of_sparseness, "entropy");
}

LossTerms resynthesis_terms(Tape& tape, Var X_hat, const Tensor& X, Var H, Lengths lengths, RecLoss kind) {
  return {masked_reconstruction(tape, X_hat, X, kind, lengths), batch_time_sparsity(tape, H, lengths),
          batch_channel_sparsity(tape, H, lengths), batch_entropy(tape, H, lengths)};
}

Var resynthesis_objective(Tape& tape, const LossTerms& terms, const LossWeights& w,
                          LossReport* report) {
  Var total = weighted_sum(tape, {terms.rec, terms.s1, terms.s2, terms.entropy},
                           {1.0, -w.lambda1, -w.lambda2, w.lambda3});
  if (report) {
    report->rec = tape.value(terms.rec)[0];
    report->s1 = tape.value(terms.s1)[0];
    report->s2 = tape.value(terms.s2)[0];
    report->entropy = tape.value(terms.entropy)[0];
    report->ctc.reset();
    report->total = tape.value(total)[0];
  }
  return total;
}

Var joint_objective(Tape& tape, const LossTerms& terms, Var ctc, const LossWeights& w,
                    LossReport* report) {
  Var total = weighted_sum(tape, {terms.rec, terms.s1, terms.s2, terms.entropy, ctc},
                           {1.0, -w.lambda1, -w.lambda2, w.lambda3, w.lambda4});
  if (report) {
    report->rec = tape.value(terms.rec)[0];
    report->s1 = tape.value(terms.s1)[0];
    report->s2 = tape.value(terms.s2)[0];
    report->entropy = tape.value(terms.entropy)[0];
    report->ctc = tape.value(ctc)[0];
    report->total = tape.value(total)[0];
  }
  return total;
}

}  // namespace gestures
