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
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "gestures/tensor.hpp"

namespace gestures {

using ScalarFunction = std::function<double(const std::vector<Tensor>& point)>;

struct FiniteDifferenceOptions {
  double epsilon = 1e-6;
  // Probe at most this many coordinates per tensor (0 = all), chosen by `seed`.
  Index max_coordinates = 0;
  std::uint64_t seed = 0;
};

/// Largest |a-n| / max(1,|a|,|n|) between the analytic gradient and central
/// differences of f over the probed coordinates of `point`.
double finite_difference_check(const ScalarFunction& f, const std::vector<Tensor>& point,
                               const std::vector<Tensor>& analytic,
                               const FiniteDifferenceOptions& options = {});

/// One row of the gradient self-check: evaluates `points` seeded random
/// instances and reports the worst relative error.
struct GradCheckItem {
  std::string name;
  // Returns the max relative error at one random point drawn from rng.
  std::function<double(std::mt19937_64& rng)> run;
};

struct GradCheckRow {
  std::string name;
  double max_relative_error = 0.0;
  int points = 0;
  bool passed = false;
};

/// Every differentiable operator and loss of the library.
std::vector<GradCheckItem> standard_gradcheck_items();

std::vector<GradCheckRow> run_gradcheck(const std::vector<GradCheckItem>& items, int points,
                                        std::uint64_t seed, double tolerance = 1e-4);
void print_gradcheck(std::ostream& os, const std::vector<GradCheckRow>& rows);

}  // namespace gestures
