#pragma once

#include <cmath>
#include <vector>

namespace hepex::detail {

/// Correctly rounded floating-point summation (Shewchuk's partials method,
/// as used by Python's math.fsum). Order of add() calls does not affect the
/// result.
class ExactSum {
 public:
  void clear() { partials_.clear(); }

  void add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i + 1);
    partials_[i] = x;
  }

  double result() const {
    if (partials_.empty()) return 0.0;
    std::ptrdiff_t n = static_cast<std::ptrdiff_t>(partials_.size()) - 1;
    double hi = partials_[n--];
    double lo = 0.0;
    while (n >= 0) {
      const double x = hi;
      const double y = partials_[n--];
      hi = x + y;
      const double yr = hi - x;
      lo = y - yr;
      if (lo != 0.0) break;
    }
    // Round-half-even fix-up when the remaining partials push past a tie.
    if (n >= 0 && ((lo < 0.0 && partials_[n] < 0.0) || (lo > 0.0 && partials_[n] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
};

}  // namespace hepex::detail
