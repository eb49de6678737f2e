#pragma once

#include <functional>
#include <memory>

#include "olcsim/errors.hpp"

namespace olcsim {

/// Disutility of shifting a controllable load away from its operating point.
///
/// A cost function is defined on the finite interval [lower(), upper()] and
/// must be strictly convex and twice continuously differentiable there, so
/// that the marginal cost is strictly increasing and invertible.
class CostFunction {
 public:
  virtual ~CostFunction() = default;

  double lower() const { return lower_; }
  double upper() const { return upper_; }

  /// c(d)
  virtual double value(double d) const = 0;
  /// c'(d)
  virtual double marginal(double d) const = 0;
  /// c'^{-1}(y); only consulted on [c'(lower), c'(upper)], clipping covers
  /// the rest of the real line.
  virtual double inverse_marginal(double y) const = 0;

 protected:
  CostFunction(double lower, double upper);

 private:
  double lower_;
  double upper_;
};

using CostPtr = std::shared_ptr<const CostFunction>;

/// c(d) = d^2 / (2 alpha) with alpha > 0, so c'^{-1}(y) = alpha * y.
class QuadraticCost final : public CostFunction {
 public:
  QuadraticCost(double alpha, double lower, double upper);

  double alpha() const { return alpha_; }
  double value(double d) const override { return d * d / (2.0 * alpha_); }
  double marginal(double d) const override { return d / alpha_; }
  double inverse_marginal(double y) const override { return alpha_ * y; }

 private:
  double alpha_;
};

/// Cost supplied as a (c, c', c'^{-1}) triple plus bounds.
///
/// Strict monotonicity of c' is checked by sampling 1000 points across the
/// interval; there is no symbolic analysis.
class CustomCost final : public CostFunction {
 public:
  using Fn = std::function<double(double)>;

  CustomCost(Fn value, Fn marginal, Fn inverse_marginal, double lower,
             double upper);

  double value(double d) const override { return value_(d); }
  double marginal(double d) const override { return marginal_(d); }
  double inverse_marginal(double y) const override {
    return inverse_marginal_(y);
  }

 private:
  Fn value_;
  Fn marginal_;
  Fn inverse_marginal_;
};

/// Load response d(nu): the inverse marginal clipped to the load bounds,
/// max(min(c'^{-1}(nu), upper), lower). Nondecreasing and continuous in nu.
double load_response(const CostFunction& cost, double nu);

/// Per-bus dual objective term
///   Phi(nu) = c(d(nu)) - nu d(nu) - D nu^2 / 2 + nu P_m.
/// Concave in nu.
double phi_term(const CostFunction& cost, double damping, double disturbance,
                double nu);

/// Phi'(nu) = -d(nu) - D nu + P_m; strictly decreasing in nu since D > 0.
double phi_derivative(const CostFunction& cost, double damping,
                      double disturbance, double nu);

}  // namespace olcsim
