#include "cape/manifold.hpp"

#include <cmath>
#include <stdexcept>

namespace cape {

namespace {

double sq_norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc;
}

double arcosh_clamped(double x) {
    if (x < 1.0) x = 1.0;
    return std::acosh(x);
}

} // namespace

double minkowski_inner(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size() || p.empty())
        throw std::invalid_argument("minkowski_inner: dimension mismatch");
    double acc = -p[0] * q[0];
    for (std::size_t i = 1; i < p.size(); ++i) acc += p[i] * q[i];
    return acc;
}

double dist_hyperboloid(const std::vector<double>& p, const std::vector<double>& q) {
    return arcosh_clamped(-minkowski_inner(p, q));
}

std::vector<double> project_tangent(const std::vector<double>& p, const std::vector<double>& u) {
    const double ip = minkowski_inner(p, u);
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] + ip * p[i];
    return out;
}

std::vector<double> exp_map(const std::vector<double>& p, const std::vector<double>& v) {
    if (p.size() != v.size()) throw std::invalid_argument("exp_map: dimension mismatch");
    double vv = minkowski_inner(v, v);
    if (vv < 0.0) vv = 0.0; // tangent vectors are spacelike up to rounding
    const double vn = std::sqrt(vv);
    if (vn < 1e-12) return p;
    const double c = std::cosh(vn);
    const double s = std::sinh(vn) / vn;
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = c * p[i] + s * v[i];
    return out;
}

std::vector<double> euclid_to_riemannian_grad(const std::vector<double>& g) {
    std::vector<double> out = g;
    out[0] = -out[0];
    return out;
}

std::vector<double> rsgd_step(const std::vector<double>& p, const std::vector<double>& euclid_grad,
                              double lr) {
    std::vector<double> rg = euclid_to_riemannian_grad(euclid_grad);
    std::vector<double> tg = project_tangent(p, rg);
    for (double& x : tg) x *= -lr;
    std::vector<double> next = exp_map(p, tg);
    // pin the point back onto the sheet; drift is tiny but compounds
    double tail = 0.0;
    for (std::size_t i = 1; i < next.size(); ++i) tail += next[i] * next[i];
    next[0] = std::sqrt(1.0 + tail);
    return next;
}

std::vector<double> to_poincare(const std::vector<double>& p) {
    if (p.size() < 2) throw std::invalid_argument("to_poincare: need ambient dim >= 2");
    std::vector<double> e(p.size() - 1);
    const double denom = p[0] + 1.0;
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = p[i + 1] / denom;
    return e;
}

std::vector<double> from_poincare(const std::vector<double>& e) {
    const double n2 = sq_norm(e);
    if (n2 >= 1.0) throw std::invalid_argument("from_poincare: point outside the open unit ball");
    const double denom = 1.0 - n2;
    std::vector<double> p(e.size() + 1);
    p[0] = (1.0 + n2) / denom;
    for (std::size_t i = 0; i < e.size(); ++i) p[i + 1] = 2.0 * e[i] / denom;
    return p;
}

double dist_poincare(const std::vector<double>& e1, const std::vector<double>& e2) {
    if (e1.size() != e2.size()) throw std::invalid_argument("dist_poincare: dimension mismatch");
    double diff2 = 0.0;
    for (std::size_t i = 0; i < e1.size(); ++i) {
        const double d = e1[i] - e2[i];
        diff2 += d * d;
    }
    const double a = 1.0 - sq_norm(e1);
    const double b = 1.0 - sq_norm(e2);
    return arcosh_clamped(1.0 + 2.0 * diff2 / (a * b));
}

double hyperboloid_residual(const std::vector<double>& p) {
    return std::fabs(minkowski_inner(p, p) + 1.0);
}

} // namespace cape
