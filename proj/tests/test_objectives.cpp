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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gestures/gradcheck.hpp"
#include "gestures/objectives.hpp"
#include "oracles.hpp"

using namespace gestures;

namespace {

RowMatrix matrix(Index rows, Index cols, std::initializer_list<double> values) {
  RowMatrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

std::vector<double> row(const RowMatrix& m, Index i) {
  return std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols());
}

RowMatrix positive_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  RowMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

TEST_CASE("hoyer sparseness examples") {
  CHECK(hoyer_sparseness(Eigen::Vector4d(1, 0, 0, 0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(hoyer_sparseness(Eigen::Vector4d(2.5, 2.5, 2.5, 2.5)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(hoyer_sparseness(Eigen::Vector4d(1, 1, 0, 0)) == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(hoyer_sparseness(Eigen::Vector4d(1, 1, 0, 0)) - 0.585786) < 1e-6);
  CHECK(hoyer_sparseness(Eigen::Vector3d::Zero()) == 1.0);
  Eigen::Vector3d g(9, 9, 9);
  CHECK(hoyer_sparseness(Eigen::Vector3d::Zero(), g) == 1.0);
  CHECK(g.isZero());
  CHECK_THROWS_AS(hoyer_sparseness(Eigen::VectorXd::Ones(1)), ShapeError);
}

TEST_CASE("hoyer sparseness: range, scale invariance and oracle agreement") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0), scale(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + trial % 9;
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = u(rng);
    const double s = hoyer_sparseness(v);
    CHECK(s >= -1e-15);
    CHECK(s <= 1.0 + 1e-15);
    CHECK(std::abs(hoyer_sparseness(Eigen::VectorXd(scale(rng) * v)) - s) <= 1e-12);
    CHECK(std::abs(oracle::hoyer(std::vector<double>(v.data(), v.data() + n)) - s) <= 1e-12);
  }
}

TEST_CASE("time and channel sparsity examples") {
  const RowMatrix eye = RowMatrix::Identity(3, 3);
  CHECK(time_sparsity(eye) == doctest::Approx(1.0));
  CHECK(channel_sparsity(eye) == doctest::Approx(1.0));
  const RowMatrix flat = RowMatrix::Constant(3, 5, 0.7);
  CHECK(std::abs(time_sparsity(flat)) < 1e-15);
  CHECK(std::abs(channel_sparsity(flat)) < 1e-15);
  const RowMatrix two = matrix(2, 4, {1, 0, 0, 0, 1, 1, 0, 0});
  CHECK(std::abs(time_sparsity(two) - (1.0 + 2.0 - std::sqrt(2.0)) / 2.0) < 1e-12);
  CHECK(std::abs(time_sparsity(two) - 0.792893) < 1e-6);
  // columns [1,1] -> 0 and [1,0] -> 1
  CHECK(channel_sparsity(matrix(2, 2, {1, 1, 1, 0})) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sparsity measures are permutation invariant") {
  std::mt19937_64 rng(5);
  const RowMatrix H = positive_matrix(5, 9, rng);
  std::vector<Index> rows(5), cols(9);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  std::shuffle(cols.begin(), cols.end(), rng);
  RowMatrix Hr(5, 9), Hc(5, 9);
  for (Index i = 0; i < 5; ++i) Hr.row(i) = H.row(rows[static_cast<std::size_t>(i)]);
  for (Index j = 0; j < 9; ++j) Hc.col(j) = H.col(cols[static_cast<std::size_t>(j)]);
  CHECK(std::abs(time_sparsity(Hr) - time_sparsity(H)) < 1e-12);
  CHECK(std::abs(channel_sparsity(Hc) - channel_sparsity(H)) < 1e-12);
  CHECK(std::abs(entropy_of_sparseness(Hr) - entropy_of_sparseness(H)) < 1e-12);
}

TEST_CASE("entropy of sparseness examples") {
  // equal row sparseness gives the uniform distribution
  const RowMatrix eye = RowMatrix::Identity(4, 4);
  CHECK(entropy_of_sparseness(eye) == doctest::Approx(std::log(4.0) / 4.0).epsilon(1e-12));
  // one sparse row among constant rows
  const RowMatrix point = matrix(3, 4, {0, 0, 1, 0, 1, 1, 1, 1, 2, 2, 2, 2});
  CHECK(std::abs(entropy_of_sparseness(point)) < 1e-15);
  // row sparseness 1 and 1/3 -> shares 0.75 and 0.25
  const RowMatrix split = matrix(2, 4, {1, 0, 0, 0, 1, 1, 0.5, 0});
  const double expect = 0.5 * (0.25 * std::log(4.0) + 0.75 * std::log(4.0 / 3.0));
  CHECK(std::abs(entropy_of_sparseness(split) - expect) < 1e-12);
  CHECK(std::abs(entropy_of_sparseness(split) - 0.28119) < 5e-5);
  CHECK_THROWS_AS(entropy_of_sparseness(RowMatrix::Constant(3, 4, 1.0)), NumericError);
}

TEST_CASE("entropy stays within [0, ln(D)/D]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Index D = 2 + trial % 6;
    RowMatrix H = positive_matrix(D, 12, rng);
    H.row(0).setZero();
    H(0, trial % 12) = 1.0;
    const double e = entropy_of_sparseness(H);
    CHECK(e >= 0.0);
    CHECK(e <= std::log(static_cast<double>(D)) / static_cast<double>(D) + 1e-12);
  }
}

TEST_CASE("reconstruction loss examples") {
  const RowMatrix X = matrix(1, 2, {3, 4});
  const RowMatrix zero = RowMatrix::Zero(1, 2);
  CHECK(reconstruction_mse(X, X) == 0.0);
  CHECK(relative_error_percent(X, X) == 0.0);
  CHECK(reconstruction_mse(X, zero) == doctest::Approx(12.5));
  CHECK(relative_error_percent(X, zero) == doctest::Approx(100.0));
  const Reconstruction r = reconstruction_loss(X, zero);
  CHECK(r.mse == doctest::Approx(12.5));
  CHECK(r.relative_percent == doctest::Approx(100.0));
  CHECK(reconstruction_term(X, zero, RecLoss::kMse) == doctest::Approx(12.5));
  CHECK(reconstruction_term(X, zero, RecLoss::kSse) == doctest::Approx(25.0));
  CHECK(reconstruction_term(X, zero, RecLoss::kNorm) == doctest::Approx(5.0));
  CHECK_THROWS_AS(relative_error_percent(zero, X), NumericError);
  CHECK_THROWS_AS(reconstruction_mse(X, RowMatrix::Zero(2, 1)), ShapeError);
}

TEST_CASE("resynthesis loss composition") {
  const Tensor X({1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor H({1, 2, 4}, {1, 0, 0, 0, 0, 0, 1, 0});
  LossWeights w;
  w.lambda3 = 0.0;
  w.reconstruction = RecLoss::kMse;
  const LossReport perfect = resynthesis_loss(X, X, H, w);
  CHECK(perfect.rec == 0.0);
  CHECK(perfect.total == doctest::Approx(-w.lambda1 - w.lambda2));

  std::mt19937_64 rng(11);
  const Tensor Xb = oracle::random_tensor({2, 3, 6}, rng);
  const Tensor Xh = oracle::random_tensor({2, 3, 6}, rng);
  const Tensor Hb = oracle::random_tensor({2, 4, 6}, rng, 0.05, 1.0);
  LossWeights none{0.0, 0.0, 0.0, 0.0, RecLoss::kMse};
  const LossReport plain = resynthesis_loss(Xb, Xh, Hb, none);
  CHECK(plain.total == plain.rec);

  LossWeights v{1.5, 2.5, 3.5, 0.0, RecLoss::kMse};
  const LossReport rep = resynthesis_loss(Xb, Xh, Hb, v);
  double rec = 0, s1 = 0, s2 = 0, e = 0;
  for (Index b = 0; b < 2; ++b) {
    RowMatrix x(3, 6), xh(3, 6), h(4, 6);
    for (Index c = 0; c < 3; ++c)
      for (Index t = 0; t < 6; ++t) {
        x(c, t) = Xb(b, c, t);
        xh(c, t) = Xh(b, c, t);
      }
    for (Index d = 0; d < 4; ++d)
      for (Index t = 0; t < 6; ++t) h(d, t) = Hb(b, d, t);
    double sq = 0;
    for (Index i = 0; i < x.size(); ++i) sq += (x.data()[i] - xh.data()[i]) * (x.data()[i] - xh.data()[i]);
    rec += sq / 18.0 / 2.0;
    double rows = 0, cols = 0;
    std::vector<double> sr;
    for (Index d = 0; d < 4; ++d) sr.push_back(oracle::hoyer(row(h, d)));
    for (double s : sr) rows += s;
    for (Index t = 0; t < 6; ++t) {
      std::vector<double> colv;
      for (Index d = 0; d < 4; ++d) colv.push_back(h(d, t));
      cols += oracle::hoyer(colv);
    }
    double ent = 0;
    for (double s : sr) {
      const double p = s / rows;
      if (p > 0) ent -= p * std::log(p);
    }
    s1 += rows / 4.0 / 2.0;
    s2 += cols / 6.0 / 2.0;
    e += ent / 4.0 / 2.0;
  }
  CHECK(std::abs(rep.rec - rec) < 1e-12);
  CHECK(std::abs(rep.s1 - s1) < 1e-12);
  CHECK(std::abs(rep.s2 - s2) < 1e-12);
  CHECK(std::abs(rep.entropy - e) < 1e-12);
  CHECK(std::abs(rep.total - (rec - 1.5 * s1 - 2.5 * s2 + 3.5 * e)) < 1e-12);
  CHECK(std::abs(rep.total - rep.recompute_total(v)) < 1e-12);
}

TEST_CASE("joint loss adds the weighted sequence term") {
  std::mt19937_64 rng(12);
  const Tensor X = oracle::random_tensor({2, 3, 6}, rng);
  const Tensor Xh = oracle::random_tensor({2, 3, 6}, rng);
  const Tensor H = oracle::random_tensor({2, 4, 6}, rng, 0.05, 1.0);
  LossWeights w;
  const LossReport res = resynthesis_loss(X, Xh, H, w);
  const LossReport joint = joint_loss(X, Xh, H, 2.75, w);
  CHECK(std::abs(joint.total - (res.total + w.lambda4 * 2.75)) < 1e-12);
  CHECK(std::abs(joint.total - joint.recompute_total(w)) < 1e-12);
  w.lambda4 = 0.0;
  CHECK(std::abs(joint_loss(X, Xh, H, 2.75, w).total - resynthesis_loss(X, Xh, H, w).total) < 1e-12);
}

TEST_CASE("masked losses ignore padding and equal the cropped batch") {
  std::mt19937_64 rng(14);
  const Tensor X = oracle::random_tensor({2, 3, 8}, rng);
  Tensor Xh = oracle::random_tensor({2, 3, 8}, rng);
  Tensor H = oracle::random_tensor({2, 4, 8}, rng, 0.05, 1.0);
  const std::vector<Index> lengths = {8, 5};
  const LossWeights w{1.0, 2.0, 3.0, 0.0, RecLoss::kMse};
  const LossReport full = resynthesis_loss(X, Xh, H, w, lengths);
  for (Index c = 0; c < 3; ++c)
    for (Index t = 5; t < 8; ++t) Xh(1, c, t) = 100.0;
  for (Index d = 0; d < 4; ++d)
    for (Index t = 5; t < 8; ++t) H(1, d, t) = 50.0;
  const LossReport changed = resynthesis_loss(X, Xh, H, w, lengths);
  CHECK(changed.total == full.total);

  auto crop = [](const Tensor& T, Index b, Index len) {
    Tensor out({1, T.dim(1), len});
    for (Index c = 0; c < T.dim(1); ++c)
      for (Index t = 0; t < len; ++t) out(0, c, t) = T(b, c, t);
    return out;
  };
  const LossReport a = resynthesis_loss(crop(X, 0, 8), crop(Xh, 0, 8), crop(H, 0, 8), w);
  const LossReport b = resynthesis_loss(crop(X, 1, 5), crop(Xh, 1, 5), crop(H, 1, 5), w);
  CHECK(std::abs(full.total - 0.5 * (a.total + b.total)) < 1e-12);
}

TEST_CASE("loss gradients match finite differences") {
  std::vector<GradCheckItem> items;
  for (const GradCheckItem& item : standard_gradcheck_items())
    if (item.name.rfind("loss/", 0) == 0) items.push_back(item);
  REQUIRE(items.size() == 6);
  for (const GradCheckRow& r : run_gradcheck(items, 30, 21)) {
    INFO(r.name);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("tape objectives agree with the tensor reports") {
  std::mt19937_64 rng(15);
  const Tensor X = oracle::random_tensor({2, 3, 7}, rng);
  const Tensor Xh = oracle::random_tensor({2, 3, 7}, rng);
  const Tensor H = oracle::random_tensor({2, 4, 7}, rng, 0.05, 1.0);
  const std::vector<Index> lengths = {7, 4};
  for (RecLoss kind : {RecLoss::kMse, RecLoss::kSse, RecLoss::kNorm}) {
    LossWeights w{1.0, 2.0, 0.5, 0.0, kind};
    Tape tape;
    const LossTerms terms = resynthesis_terms(tape, tape.constant(Xh), X, tape.constant(H), lengths, kind);
    LossReport rep;
    const Var total = resynthesis_objective(tape, terms, w, &rep);
    const LossReport direct = resynthesis_loss(X, Xh, H, w, lengths);
    CHECK(std::abs(tape.value(total)[0] - direct.total) < 1e-12);
    CHECK(std::abs(rep.total - direct.total) < 1e-12);
  }
}

TEST_CASE("loss csv row layout") {
  LossReport r;
  r.rec = 1.5;
  r.s1 = 0.25;
  r.ctc = 3.0;
  r.total = 2.0;
  std::ostringstream os;
  write_loss_csv_header(os);
  write_loss_csv_row(os, 7, r);
  CHECK(os.str() == "step,rec,s1,s2,entropy,ctc,total\n7,1.5,0.25,0,0,3,2\n");
}
