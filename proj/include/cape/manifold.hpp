#pragma once

#include <vector>

namespace cape {

/// Points on the hyperboloid sheet {p : <p,p>_l = -1, p[0] > 0} living in
/// ambient R^{d+1}. All functions take raw coordinate vectors; index 0 is the
/// timelike coordinate.

/// Minkowski (Lorentzian) inner product: -p0*q0 + sum_i pi*qi.
double minkowski_inner(const std::vector<double>& p, const std::vector<double>& q);

/// Geodesic distance on the hyperboloid, arcosh(-<p,q>_l).
double dist_hyperboloid(const std::vector<double>& p, const std::vector<double>& q);

/// Orthogonal projection of an ambient vector onto the tangent space at p.
std::vector<double> project_tangent(const std::vector<double>& p, const std::vector<double>& u);

/// Exponential map of a tangent vector v at p. Returns p when the tangent
/// norm is below 1e-12.
std::vector<double> exp_map(const std::vector<double>& p, const std::vector<double>& v);

/// Convert a Euclidean gradient to the ambient Riemannian representation by
/// flipping the sign of the timelike component (the inverse metric).
std::vector<double> euclid_to_riemannian_grad(const std::vector<double>& g);

/// One Riemannian SGD step: flip metric, project to tangent, exp-map along
/// -lr * grad, renormalize the timelike coordinate.
std::vector<double> rsgd_step(const std::vector<double>& p, const std::vector<double>& euclid_grad,
                              double lr);

/// Diffeomorphism onto the Poincare ball: e = p~ / (p0 + 1).
std::vector<double> to_poincare(const std::vector<double>& p);

/// Inverse map: p = (1 + |e|^2, 2e) / (1 - |e|^2).
std::vector<double> from_poincare(const std::vector<double>& e);

/// Poincare-ball distance, arcosh(1 + 2|e1-e2|^2 / ((1-|e1|^2)(1-|e2|^2))).
double dist_poincare(const std::vector<double>& e1, const std::vector<double>& e2);

/// |<p,p>_l + 1|, how far p is from the sheet.
double hyperboloid_residual(const std::vector<double>& p);

} // namespace cape
