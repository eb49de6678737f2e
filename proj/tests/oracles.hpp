#pragma once

// Test-only numerical oracles. These deliberately avoid the library's own
// solve paths (and Eigen's decompositions) so they can serve as independent
// cross-checks.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace oracles {

/// Uniform variates built directly from mt19937_64 words, so sequences are
/// identical on every standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double unit() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(unit() * (hi - lo + 1));
  }

 private:
  std::mt19937_64 engine_;
};

/// Rank by plain Gaussian elimination with partial pivoting.
inline int rank(Eigen::MatrixXd m, double tol = 1e-9) {
  int r = 0;
  for (int col = 0; col < m.cols() && r < m.rows(); ++col) {
    int pivot = r;
    for (int i = r + 1; i < m.rows(); ++i) {
      if (std::abs(m(i, col)) > std::abs(m(pivot, col))) pivot = i;
    }
    if (std::abs(m(pivot, col)) <= tol) continue;
    m.row(pivot).swap(m.row(r));
    for (int i = 0; i < m.rows(); ++i) {
      if (i != r) m.row(i) -= m(i, col) / m(r, col) * m.row(r);
    }
    ++r;
  }
  return r;
}

/// Square solve by Gauss-Jordan elimination with partial pivoting.
inline Eigen::VectorXd solve(Eigen::MatrixXd a, Eigen::VectorXd b) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || b.size() != n) {
    throw std::invalid_argument("oracle solve: shape mismatch");
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int i = col + 1; i < n; ++i) {
      if (std::abs(a(i, col)) > std::abs(a(pivot, col))) pivot = i;
    }
    if (a(pivot, col) == 0.0) {
      throw std::invalid_argument("oracle solve: singular matrix");
    }
    a.row(pivot).swap(a.row(col));
    std::swap(b(pivot), b(col));
    const double inv = 1.0 / a(col, col);
    a.row(col) *= inv;
    b(col) *= inv;
    for (int i = 0; i < n; ++i) {
      if (i != col && a(i, col) != 0.0) {
        b(i) -= a(i, col) * b(col);
        a.row(i) -= a(i, col) * a.row(col);
      }
    }
  }
  return b;
}

/// Bisection for a root of an increasing function, expanding the bracket
/// as needed.
inline double bisect_increasing(const std::function<double(double)>& f,
                                double lo, double hi, double tol = 1e-12) {
  double flo = f(lo);
  double fhi = f(hi);
  double width = hi - lo;
  for (int i = 0; i < 200 && fhi < 0.0; ++i) {
    lo = hi;
    flo = fhi;
    hi += width;
    width *= 2.0;
    fhi = f(hi);
  }
  for (int i = 0; i < 200 && flo > 0.0; ++i) {
    hi = lo;
    fhi = flo;
    lo -= width;
    width *= 2.0;
    flo = f(lo);
  }
  for (int i = 0; i < 500; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (std::abs(fm) <= tol) return mid;
    (fm < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Central finite difference.
inline double central_difference(const std::function<double(double)>& f,
                                 double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracles
