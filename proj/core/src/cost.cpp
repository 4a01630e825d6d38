#include "dra/cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dra {

CostFunction CostFunction::quadratic(double curvature, double slope, double offset) {
  if (curvature < 0.0) {
    throw std::invalid_argument("quadratic cost requires nonnegative curvature");
  }
  return CostFunction(Kind::quadratic, curvature, slope, offset);
}

CostFunction CostFunction::smooth_deadzone(double halfwidth, double blend) {
  if (halfwidth <= 0.0 || blend <= 0.0) {
    throw std::invalid_argument("smooth dead-zone requires positive halfwidth and blend");
  }
  return CostFunction(Kind::smooth_deadzone, halfwidth, blend, 0.0);
}

double CostFunction::value(double x) const {
  if (kind_ == Kind::quadratic) {
    return p0_ * x * x + p1_ * x + p2_;
  }
  const double c = p0_;
  const double a = p1_;
  const double m = std::abs(x);
  if (m <= c) return 0.0;
  if (m <= c + a) {
    const double d = m - c;
    return d * d / (2.0 * a);
  }
  return m - c - 0.5 * a;
}

double CostFunction::derivative(double x) const {
  if (kind_ == Kind::quadratic) {
    return 2.0 * p0_ * x + p1_;
  }
  const double c = p0_;
  const double a = p1_;
  const double m = std::abs(x);
  double d = 0.0;
  if (m > c + a) {
    d = 1.0;
  } else if (m > c) {
    d = (m - c) / a;
  }
  return x < 0.0 ? -d : d;
}

double CostFunction::derivative_bound(double lo, double hi) const {
  if (lo > hi) throw std::invalid_argument("empty interval in derivative_bound");
  if (kind_ == Kind::quadratic) {
    // Affine derivative: extremes at the endpoints.
    return std::max(std::abs(2.0 * p0_ * lo + p1_), std::abs(2.0 * p0_ * hi + p1_));
  }
  const double c = p0_;
  const double a = p1_;
  const double m = std::max(std::abs(lo), std::abs(hi));
  if (m <= c) return 0.0;
  return std::min(1.0, (m - c) / a);
}

double CostFunction::curvature_bound() const {
  if (kind_ == Kind::quadratic) return 2.0 * p0_;
  return 1.0 / p1_;
}

double CostFunction::quad_curvature() const {
  if (kind_ != Kind::quadratic) throw std::logic_error("not a quadratic cost");
  return p0_;
}
double CostFunction::quad_slope() const {
  if (kind_ != Kind::quadratic) throw std::logic_error("not a quadratic cost");
  return p1_;
}
double CostFunction::quad_offset() const {
  if (kind_ != Kind::quadratic) throw std::logic_error("not a quadratic cost");
  return p2_;
}
double CostFunction::deadzone_halfwidth() const {
  if (kind_ != Kind::smooth_deadzone) throw std::logic_error("not a dead-zone cost");
  return p0_;
}
double CostFunction::deadzone_blend() const {
  if (kind_ != Kind::smooth_deadzone) throw std::logic_error("not a dead-zone cost");
  return p1_;
}

}  // namespace dra
