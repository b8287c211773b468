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

#include "gestures/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace gestures {

double finite_difference_check(const ScalarFunction& f, const std::vector<Tensor>& point,
                               const std::vector<Tensor>& analytic,
                               const FiniteDifferenceOptions& options) {
  if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-4))
    throw std::invalid_argument("finite_difference_check: epsilon must lie in [1e-7, 1e-4]");
  if (point.size() != analytic.size())
    throw ShapeError("finite_difference_check: gradient count does not match point");

  std::mt19937_64 rng(options.seed);
  std::vector<Tensor> probe = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    if (!analytic[i].same_shape(point[i]))
      throw ShapeError("finite_difference_check: gradient shape mismatch");
    std::vector<Index> coords(static_cast<std::size_t>(point[i].size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (options.max_coordinates > 0 && static_cast<Index>(coords.size()) > options.max_coordinates) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(options.max_coordinates));
    }
    for (Index c : coords) {
      const double x = point[i][c];
      probe[i][c] = x + options.epsilon;
      const double up = f(probe);
      probe[i][c] = x - options.epsilon;
      const double down = f(probe);
      probe[i][c] = x;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("finite_difference_check: non-finite value while probing");
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double a = analytic[i][c];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

std::vector<GradCheckRow> run_gradcheck(const std::vector<GradCheckItem>& items, int points,
                                        std::uint64_t seed, double tolerance) {
  std::vector<GradCheckRow> rows;
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::mt19937_64 rng(seed + 7919 * i);
    GradCheckRow row{items[i].name, 0.0, points, true};
    for (int p = 0; p < points; ++p) {
      const double err = items[i].run(rng);
      if (!std::isfinite(err)) {
        row.max_relative_error = err;
        break;
      }
      row.max_relative_error = std::max(row.max_relative_error, err);
    }
    row.passed = std::isfinite(row.max_relative_error) && row.max_relative_error < tolerance;
    rows.push_back(row);
  }
  return rows;
}

void print_gradcheck(std::ostream& os, const std::vector<GradCheckRow>& rows) {
  os << std::left << std::setw(28) << "item" << std::setw(8) << "points" << std::setw(16)
     << "max_rel_err" << "status\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(28) << r.name << std::setw(8) << r.points << std::setw(16)
       << std::scientific << std::setprecision(3) << r.max_relative_error
       << (r.passed ? "PASS" : "FAIL") << '\n';
    os << std::defaultfloat;
  }
}

}  // namespace gestures
