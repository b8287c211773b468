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

#include "gestures/factorization.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>

namespace gestures {
namespace {

Index count_distinct_rows(const Eigen::Ref<const RowMatrix>& points, Index enough) {
  std::set<std::vector<double>> seen;
  for (Index i = 0; i < points.rows() && static_cast<Index>(seen.size()) < enough; ++i) {
    std::vector<double> row(points.row(i).data(), points.row(i).data() + points.cols());
    seen.insert(std::move(row));
  }
  return static_cast<Index>(seen.size());
}

// Squared distances of every point to every center: N x K.
RowMatrix squared_distances(const Eigen::Ref<const RowMatrix>& points, const Eigen::VectorXd& point_sq,
                            const RowMatrix& centers) {
  RowMatrix d = -2.0 * points * centers.transpose();
  d.colwise() += point_sq;
  d.rowwise() += centers.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

RowMatrix seed_plus_plus(const Eigen::Ref<const RowMatrix>& points, Index k, std::mt19937_64& rng) {
  const Index n = points.rows();
  RowMatrix centers(k, points.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.row(0) = points.row(first(rng));
  Eigen::VectorXd best = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index c = 1; c < k; ++c) {
    const double total = best.sum();
    Index pick = n - 1;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += best[i];
        if (acc > target && best[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = points.row(pick);
    best = best.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Eigen::Ref<const RowMatrix>& points, const KMeansOptions& options) {
  const Index k = options.clusters;
  if (k < 1) throw std::invalid_argument("kmeans: need at least one cluster");
  if (count_distinct_rows(points, k) < k)
    throw DataError("kmeans: fewer distinct points than clusters (" + std::to_string(k) + ")");

  std::mt19937_64 rng(options.seed);
  KMeansResult r;
  r.centers = seed_plus_plus(points, k, rng);
  r.assignment.assign(static_cast<std::size_t>(points.rows()), 0);
  const Eigen::VectorXd point_sq = points.rowwise().squaredNorm();

  for (Index iter = 0; iter < options.max_iterations; ++iter) {
    const RowMatrix dist = squared_distances(points, point_sq, r.centers);
    double objective = 0.0;
    for (Index i = 0; i < points.rows(); ++i) {
      Index best = 0;
      dist.row(i).minCoeff(&best);
      r.assignment[static_cast<std::size_t>(i)] = best;
      objective += (points.row(i) - r.centers.row(best)).squaredNorm();
    }
    r.objective.push_back(objective);

    RowMatrix sums = RowMatrix::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < points.rows(); ++i) {
      const Index c = r.assignment[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    double shift = 0.0;
    for (Index c = 0; c < k; ++c) {
      const Index n = counts[static_cast<std::size_t>(c)];
      if (n == 0) continue;  // an empty cluster keeps its center
      const Eigen::RowVectorXd updated = sums.row(c) / static_cast<double>(n);
      shift = std::max(shift, (updated - r.centers.row(c)).norm());
      r.centers.row(c) = updated;
    }
    r.iterations = iter + 1;
    if (shift < options.tolerance) {
      r.converged = true;
      break;
    }
  }
  return r;
}

RowMatrix window_supervectors(const Corpus& corpus, Index window, Index stride) {
  if (window < 1 || stride < 1) throw std::invalid_argument("window_supervectors: bad window/stride");
  if (corpus.empty()) throw DataError("window_supervectors: empty corpus");
  const Index C = corpus.front().channels();
  Index rows = 0;
  for (const Utterance& u : corpus) {
    if (u.channels() != C) throw DataError("window_supervectors: channel count differs in " + u.id);
    if (u.length() >= window) rows += (u.length() - window) / stride + 1;
  }
  RowMatrix out(rows, window * C);
  Index r = 0;
  for (const Utterance& u : corpus) {
    if (u.length() < window) continue;
    const auto x = u.frames.matrix();  // C x t
    for (Index s = 0; s + window <= u.length(); s += stride, ++r)
      for (Index j = 0; j < window; ++j) out.row(r).segment(j * C, C) = x.col(s + j).transpose();
  }
  return out;
}

Tensor kmeans_dictionary(const Corpus& corpus, Index gestures, Index window, Index stride,
                         std::uint64_t seed, Index max_iterations, double tolerance) {
  Index total = 0;
  for (const Utterance& u : corpus) total += u.length();
  if (total < gestures * window)
    throw DataError("kmeans_dictionary: corpus has " + std::to_string(total) +
                    " frames, needs at least gestures*window = " + std::to_string(gestures * window));
  const RowMatrix points = window_supervectors(corpus, window, stride);
  KMeansOptions options{gestures, max_iterations, tolerance, seed};
  const KMeansResult km = kmeans(points, options);
  const Index C = corpus.front().channels();
  Tensor W({window, C, gestures});
  for (Index d = 0; d < gestures; ++d)
    for (Index i = 0; i < window; ++i)
      for (Index c = 0; c < C; ++c) W(i, c, d) = km.centers(d, i * C + c);
  return W;
}

}  // namespace gestures
