#include "olcsim/costs.hpp"

#include <cmath>
#include <utility>

namespace olcsim {

CostFunction::CostFunction(double lower, double upper)
    : lower_(lower), upper_(upper) {
  if (!std::isfinite(lower) || !std::isfinite(upper)) {
    throw ValidationError("cost bounds must be finite");
  }
  if (lower > upper) {
    throw ValidationError("cost bounds must satisfy d_min <= d_max");
  }
}

QuadraticCost::QuadraticCost(double alpha, double lower, double upper)
    : CostFunction(lower, upper), alpha_(alpha) {
  if (!(alpha > 0.0)) {
    throw ValidationError("quadratic cost requires alpha > 0");
  }
}

CustomCost::CustomCost(Fn value, Fn marginal, Fn inverse_marginal,
                       double lower, double upper)
    : CostFunction(lower, upper),
      value_(std::move(value)),
      marginal_(std::move(marginal)),
      inverse_marginal_(std::move(inverse_marginal)) {
  if (!value_ || !marginal_ || !inverse_marginal_) {
    throw ValidationError("custom cost requires all three functions");
  }
  // Strict convexity is semantic; make it testable by sampling the
  // marginal on a 1000-point grid.
  constexpr int kSamples = 1000;
  if (this->upper() > this->lower()) {
    const double span = this->upper() - this->lower();
    double prev = marginal_(this->lower());
    for (int i = 1; i < kSamples; ++i) {
      const double x =
          this->lower() + span * static_cast<double>(i) / (kSamples - 1);
      const double m = marginal_(x);
      if (!(m > prev)) {
        throw ValidationError(
            "custom cost marginal is not strictly increasing on the bounds");
      }
      prev = m;
    }
  }
}

double load_response(const CostFunction& cost, double nu) {
  return std::max(std::min(cost.inverse_marginal(nu), cost.upper()),
                  cost.lower());
}

double phi_term(const CostFunction& cost, double damping, double disturbance,
                double nu) {
  const double d = load_response(cost, nu);
  return cost.value(d) - nu * d - 0.5 * damping * nu * nu + nu * disturbance;
}

double phi_derivative(const CostFunction& cost, double damping,
                      double disturbance, double nu) {
  return -load_response(cost, nu) - damping * nu + disturbance;
}

}  // namespace olcsim
