#pragma once

namespace dra {

/// Scalar convex cost of a single subagent.
///
/// Two families are built in: a quadratic a*x^2 + b*x + c with a >= 0, and a
/// smooth dead-zone that is zero on [-halfwidth, halfwidth], blends
/// quadratically over a band of width `blend`, and grows linearly with unit
/// slope outside. Both are C^1.
class CostFunction {
 public:
  enum class Kind { quadratic, smooth_deadzone };

  static CostFunction quadratic(double curvature, double slope, double offset);
  static CostFunction smooth_deadzone(double halfwidth, double blend);

  Kind kind() const { return kind_; }
  bool is_quadratic() const { return kind_ == Kind::quadratic; }

  double value(double x) const;
  double derivative(double x) const;

  /// max |f'(x)| over [lo, hi]; exact for both families.
  double derivative_bound(double lo, double hi) const;

  /// Largest second derivative the function can attain anywhere. Used for
  /// step-size stability estimates.
  double curvature_bound() const;

  // Quadratic coefficient access; throws for the dead-zone family.
  double quad_curvature() const;
  double quad_slope() const;
  double quad_offset() const;

  double deadzone_halfwidth() const;
  double deadzone_blend() const;

 private:
  CostFunction(Kind kind, double p0, double p1, double p2)
      : kind_(kind), p0_(p0), p1_(p1), p2_(p2) {}

  Kind kind_;
  double p0_, p1_, p2_;  // quadratic: a, b, c; dead-zone: halfwidth, blend, unused
};

}  // namespace dra
