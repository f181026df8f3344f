#pragma once

#include <utility>
#include <vector>

namespace cape {

/// Rotation angles per coordinate pair, phi = (pi/4) * e for a Poincare-ball
/// point e. Vectors of length D = 2d are rotated blockwise: the pair
/// (x[2t], x[2t+1]) turns by phi[t]. The rotation matrix is never formed.

/// phi = (pi/4) * e. Throws if |e| >= 1.
std::vector<double> angles_from_poincare(const std::vector<double>& e);

/// Apply the block rotation R(phi) to x (length 2*phi.size()).
std::vector<double> rotate(const std::vector<double>& phi, const std::vector<double>& x);

/// R(phi) * W * v.
std::vector<double> inject_query(const std::vector<double>& v, const std::vector<double>& phi,
                                 const std::vector<std::vector<double>>& w_q);
std::vector<double> inject_key(const std::vector<double>& v, const std::vector<double>& phi,
                               const std::vector<std::vector<double>>& w_k);

/// q^T R(phi_n - phi_m) k; equals <R(phi_m)q, R(phi_n)k>.
double attention_score(const std::vector<double>& q, const std::vector<double>& k,
                       const std::vector<double>& phi_m, const std::vector<double>& phi_n);

/// Analytic sandwich (A_minus, A_plus) with A_minus = -A_plus:
/// A_plus = d * max_t|alpha_t| * cos(|phi_m - phi_n|_2 / d) + sum_t|beta_t|.
std::pair<double, double> score_bounds(const std::vector<double>& q, const std::vector<double>& k,
                                       const std::vector<double>& phi_m,
                                       const std::vector<double>& phi_n);

/// Limiting bound constant at Poincare distance d_p:
/// C = (cosh(d_p) - 1) / 2, a = d * max|alpha| * cos((pi/(4d)) * sqrt(C/(C+1))) + sum|beta|.
double generality_limit(const std::vector<double>& q, const std::vector<double>& k,
                        double d_p_value);

} // namespace cape
