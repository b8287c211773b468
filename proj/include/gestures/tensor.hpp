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

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "gestures/errors.hpp"

namespace gestures {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;
using Shape = std::vector<Index>;

std::string shape_string(const Shape& shape);
Index shape_size(const Shape& shape);

// Dense row-major array of doubles. Every extent is positive and every value
// finite when a Tensor is built from external data.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, Eigen::VectorXd data);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return shape_.empty(); }

  Eigen::VectorXd& data() { return data_; }
  const Eigen::VectorXd& data() const { return data_; }

  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }

  double& operator()(Index i, Index j) { return data_[i * shape_[1] + j]; }
  double operator()(Index i, Index j) const { return data_[i * shape_[1] + j]; }
  double& operator()(Index i, Index j, Index k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(Index i, Index j, Index k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Rank-2 view of the whole tensor.
  RowMatrixMap matrix();
  ConstRowMatrixMap matrix() const;
  // Rank-2 view of the i-th leading slice of a rank-3 tensor.
  RowMatrixMap slice(Index i);
  ConstRowMatrixMap slice(Index i) const;

  Tensor reshaped(Shape shape) const;
  void set_zero() { data_.setZero(); }
  bool all_finite() const { return data_.allFinite(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  Eigen::VectorXd data_;
};

/// Throws NumericError naming `where` if any value is NaN or infinite.
void ensure_finite(const Tensor& t, const std::string& where);
void require_shape(const Tensor& t, const Shape& expected, const std::string& where);
void require_rank(const Tensor& t, Index rank, const std::string& where);

}  // namespace gestures
