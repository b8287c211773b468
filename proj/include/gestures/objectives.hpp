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

#include <cmath>
#include <optional>
#include <ostream>
#include <string>

#include "gestures/ops.hpp"
#include "gestures/tape.hpp"
#include "gestures/tensor.hpp"

namespace gestures {

// Per-utterance reconstruction term: mean squared error per element, sum of
// squared errors, or the Frobenius norm of the residual. The norm is the
// default; with the per-element mean the default sparsity weights make an
// all-zero score cheaper than a good fit.
enum class RecLoss { kMse, kSse, kNorm };

struct LossWeights {
  double lambda1 = 10.0;  // time-dimension sparseness, rewarded
  double lambda2 = 10.0;  // channel-dimension sparseness, rewarded
  double lambda3 = 10.0;  // entropy of sparseness, penalized
  double lambda4 = 1.0;   // CTC
  RecLoss reconstruction = RecLoss::kNorm;
};

/// Mini-batch averages of every objective component.
struct LossReport {
  double rec = 0.0;  // reconstruction term of the chosen kind
  double s1 = 0.0;
  double s2 = 0.0;
  double entropy = 0.0;
  std::optional<double> ctc;
  double total = 0.0;

  /// rec - l1*s1 - l2*s2 + l3*entropy (+ l4*ctc)
  double recompute_total(const LossWeights& w) const;
};

void write_loss_csv_header(std::ostream& os);
void write_loss_csv_row(std::ostream& os, long step, const LossReport& r);

// ---------------------------------------------------------------------------
// Hoyer sparseness: (sqrt(n) - L1/L2) / (sqrt(n) - 1), in [0, 1].
// An all-zero vector is maximally sparse (1) with zero gradient.
// ---------------------------------------------------------------------------

namespace detail {
// a holds |v| / max|v|. L1/L2 = sqrt(L1^2 / sum a^2) is exact for constant
// and one-hot vectors, so those land on 0 and 1 without rounding residue.
template <typename Derived>
double hoyer_value(const Eigen::MatrixBase<Derived>& a, Index n) {
  const double l1 = a.sum();
  const double ratio = std::sqrt(l1 * l1 / a.squaredNorm());
  const double sn = std::sqrt(static_cast<double>(n));
  return (sn - ratio) / (sn - 1.0);
}
}  // namespace detail

template <typename Derived>
double hoyer_sparseness(const Eigen::DenseBase<Derived>& v) {
  const Index n = v.size();
  if (n < 2) throw ShapeError("hoyer_sparseness: vector length must be >= 2");
  const double peak = v.derived().cwiseAbs().maxCoeff();
  if (peak == 0.0) return 1.0;
  return detail::hoyer_value(v.derived().cwiseAbs() / peak, n);
}

/// Sparseness of v and its gradient, written into `grad` (same size as v).
/// The Eigen const-cast idiom lets callers pass row or column blocks.
template <typename Derived, typename GradDerived>
double hoyer_sparseness(const Eigen::DenseBase<Derived>& v, const Eigen::DenseBase<GradDerived>& grad_out) {
  auto& grad = const_cast<Eigen::DenseBase<GradDerived>&>(grad_out);
  const Index n = v.size();
  if (n < 2) throw ShapeError("hoyer_sparseness: vector length must be >= 2");
  const double l1 = v.derived().cwiseAbs().sum();
  const double l2 = v.derived().norm();
  if (l2 == 0.0) {
    grad.setZero();
    return 1.0;
  }
  const double sn = std::sqrt(static_cast<double>(n));
  const double peak = v.derived().cwiseAbs().maxCoeff();
  // d(L1/L2)/dv = sign(v)/L2 - L1 v / L2^3, sign(0) = 0
  const double inv_l2 = 1.0 / l2;
  const double k = l1 * inv_l2 * inv_l2 * inv_l2;
  for (Index i = 0; i < n; ++i) {
    const double x = v.derived().coeff(i);
    const double sign = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    grad.derived().coeffRef(i) = -(sign * inv_l2 - k * x) / (sn - 1.0);
  }
  return detail::hoyer_value(v.derived().cwiseAbs() / peak, n);
}

using ConstMatrixRef = Eigen::Ref<const RowMatrix>;

/// Mean sparseness of the D rows (length t) of a D x t score.
double time_sparsity(const ConstMatrixRef& H, RowMatrix* grad = nullptr);
/// Mean sparseness of the t columns (length D) of a D x t score.
double channel_sparsity(const ConstMatrixRef& H, RowMatrix* grad = nullptr);
/// (1/D) sum_i -p_i ln p_i with p_i the share of row i in the total row
/// sparseness. Throws NumericError when every row has zero sparseness.
double entropy_of_sparseness(const ConstMatrixRef& H, RowMatrix* grad = nullptr);

struct Reconstruction {
  double mse = 0.0;               // training objective
  double relative_percent = 0.0;  // 100 * ||X - X^||_F / ||X||_F
};

double reconstruction_mse(const ConstMatrixRef& X, const ConstMatrixRef& X_hat);
double reconstruction_term(const ConstMatrixRef& X, const ConstMatrixRef& X_hat, RecLoss kind);
/// Throws NumericError when ||X||_F is zero.
double relative_error_percent(const ConstMatrixRef& X, const ConstMatrixRef& X_hat);
Reconstruction reconstruction_loss(const ConstMatrixRef& X, const ConstMatrixRef& X_hat);

// ---------------------------------------------------------------------------
// Batch objectives. X and X_hat are B x C x t, H is B x D x t; only the first
// lengths[b] frames of element b count. Each component is computed per
// element and averaged over the batch.
// ---------------------------------------------------------------------------

LossReport resynthesis_loss(const Tensor& X, const Tensor& X_hat, const Tensor& H,
                            const LossWeights& w, Lengths lengths = {});
LossReport joint_loss(const Tensor& X, const Tensor& X_hat, const Tensor& H, double ctc,
                      const LossWeights& w, Lengths lengths = {});

struct LossTerms {
  Var rec;
  Var s1;
  Var s2;
  Var entropy;
};

Var masked_mse(Tape& tape, Var X_hat, const Tensor& X, Lengths lengths = {});
Var masked_reconstruction(Tape& tape, Var X_hat, const Tensor& X, RecLoss kind, Lengths lengths = {});
Var batch_time_sparsity(Tape& tape, Var H, Lengths lengths = {});
Var batch_channel_sparsity(Tape& tape, Var H, Lengths lengths = {});
Var batch_entropy(Tape& tape, Var H, Lengths lengths = {});

LossTerms resynthesis_terms(Tape& tape, Var X_hat, const Tensor& X, Var H, Lengths lengths = {},
                            RecLoss kind = RecLoss::kNorm);
/// rec - l1*s1 - l2*s2 + l3*entropy; fills `report` from the tape values.
Var resynthesis_objective(Tape& tape, const LossTerms& terms, const LossWeights& w,
                          LossReport* report = nullptr);
/// resynthesis objective + l4 * ctc.
Var joint_objective(Tape& tape, const LossTerms& terms, Var ctc, const LossWeights& w,
                    LossReport* report = nullptr);

}  // namespace gestures
