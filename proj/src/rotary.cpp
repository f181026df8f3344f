#include "cape/rotary.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cape {

namespace {

void check_even_pairing(std::size_t phi_len, std::size_t vec_len, const char* who) {
    if (vec_len != 2 * phi_len) throw std::invalid_argument(std::string(who) + ": need |x| = 2|phi|");
}

std::vector<double> mat_vec(const std::vector<std::vector<double>>& w,
                            const std::vector<double>& v) {
    std::vector<double> out(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i].size() != v.size()) throw std::invalid_argument("projection: shape mismatch");
        double acc = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) acc += w[i][j] * v[j];
        out[i] = acc;
    }
    return out;
}

// alpha_t = q(2t)k(2t) + q(2t+1)k(2t+1), beta_t = q(2t+1)k(2t) - q(2t)k(2t+1)
void alpha_beta(const std::vector<double>& q, const std::vector<double>& k, double& max_abs_alpha,
                double& sum_abs_beta) {
    max_abs_alpha = 0.0;
    sum_abs_beta = 0.0;
    for (std::size_t t = 0; 2 * t + 1 < q.size(); ++t) {
        const double a = q[2 * t] * k[2 * t] + q[2 * t + 1] * k[2 * t + 1];
        const double b = q[2 * t + 1] * k[2 * t] - q[2 * t] * k[2 * t + 1];
        max_abs_alpha = std::max(max_abs_alpha, std::fabs(a));
        sum_abs_beta += std::fabs(b);
    }
}

} // namespace

std::vector<double> angles_from_poincare(const std::vector<double>& e) {
    double n2 = 0.0;
    for (double x : e) n2 += x * x;
    if (n2 >= 1.0) throw std::invalid_argument("angles_from_poincare: point outside the unit ball");
    std::vector<double> phi(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) phi[i] = (std::numbers::pi / 4.0) * e[i];
    return phi;
}

std::vector<double> rotate(const std::vector<double>& phi, const std::vector<double>& x) {
    check_even_pairing(phi.size(), x.size(), "rotate");
    std::vector<double> out(x.size());
    for (std::size_t t = 0; t < phi.size(); ++t) {
        const double c = std::cos(phi[t]);
        const double s = std::sin(phi[t]);
        const double a = x[2 * t];
        const double b = x[2 * t + 1];
        out[2 * t] = c * a - s * b;
        out[2 * t + 1] = s * a + c * b;
    }
    return out;
}

std::vector<double> inject_query(const std::vector<double>& v, const std::vector<double>& phi,
                                 const std::vector<std::vector<double>>& w_q) {
    return rotate(phi, mat_vec(w_q, v));
}

std::vector<double> inject_key(const std::vector<double>& v, const std::vector<double>& phi,
                               const std::vector<std::vector<double>>& w_k) {
    return rotate(phi, mat_vec(w_k, v));
}

double attention_score(const std::vector<double>& q, const std::vector<double>& k,
                       const std::vector<double>& phi_m, const std::vector<double>& phi_n) {
    if (q.size() != k.size() || phi_m.size() != phi_n.size())
        throw std::invalid_argument("attention_score: shape mismatch");
    check_even_pairing(phi_m.size(), q.size(), "attention_score");
    std::vector<double> rel(phi_m.size());
    for (std::size_t t = 0; t < rel.size(); ++t) rel[t] = phi_n[t] - phi_m[t];
    const std::vector<double> rk = rotate(rel, k);
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) acc += q[i] * rk[i];
    return acc;
}

std::pair<double, double> score_bounds(const std::vector<double>& q, const std::vector<double>& k,
                                       const std::vector<double>& phi_m,
                                       const std::vector<double>& phi_n) {
    if (q.size() != k.size() || phi_m.size() != phi_n.size())
        throw std::invalid_argument("score_bounds: shape mismatch");
    check_even_pairing(phi_m.size(), q.size(), "score_bounds");
    double max_alpha = 0.0, sum_beta = 0.0;
    alpha_beta(q, k, max_alpha, sum_beta);
    double diff2 = 0.0;
    for (std::size_t t = 0; t < phi_m.size(); ++t) {
        const double d = phi_m[t] - phi_n[t];
        diff2 += d * d;
    }
    const double d = static_cast<double>(phi_m.size());
    const double upper = d * max_alpha * std::cos(std::sqrt(diff2) / d) + sum_beta;
    return {-upper, upper};
}

double generality_limit(const std::vector<double>& q, const std::vector<double>& k,
                        double d_p_value) {
    if (d_p_value < 0.0) throw std::invalid_argument("generality_limit: negative distance");
    if (q.size() != k.size() || q.size() % 2 != 0)
        throw std::invalid_argument("generality_limit: need even matching dims");
    double max_alpha = 0.0, sum_beta = 0.0;
    alpha_beta(q, k, max_alpha, sum_beta);
    const double d = static_cast<double>(q.size() / 2);
    const double c_val = 0.5 * (std::cosh(d_p_value) - 1.0);
    const double arg = (std::numbers::pi / (4.0 * d)) * std::sqrt(c_val / (c_val + 1.0));
    return d * max_alpha * std::cos(arg) + sum_beta;
}

} // namespace cape
