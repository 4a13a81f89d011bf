#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace robust_ut {

/// Axis-aligned box over the (z, w) coordinates.
struct Box {
  std::vector<double> lower, upper;

  Box() = default;
  Box(std::vector<double> lo, std::vector<double> hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

  void validate() const {
    if (lower.size() != upper.size()) throw std::invalid_argument("Box: bound vectors differ in length");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i])) throw std::invalid_argument("Box: lower > upper at coordinate " + std::to_string(i));
  }

  std::size_t dim() const { return lower.size(); }

  std::vector<double> center() const {
    std::vector<double> c(dim());
    for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
    return c;
  }

  double diameter() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) s += (upper[i] - lower[i]) * (upper[i] - lower[i]);
    return std::sqrt(s);
  }

  bool contains(std::span<const double> x, double tol = 0.0) const {
    if (x.size() != dim()) throw std::invalid_argument("Box::contains: dimension mismatch");
    for (std::size_t i = 0; i < dim(); ++i)
      if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
    return true;
  }
};

}  // namespace robust_ut
