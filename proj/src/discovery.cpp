#include "cape/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "cape/rng.hpp"

namespace cape {

namespace {

constexpr double kLogVarClamp = 8.0;

DenseMatrix as_column(const DenseMatrix& m) {
    DenseMatrix c(m.rows() * m.cols(), 1);
    c.data() = m.data();
    return c;
}

DenseMatrix as_shape(const DenseMatrix& col, std::size_t rows, std::size_t cols) {
    DenseMatrix m(rows, cols);
    m.data() = col.data();
    return m;
}

DenseMatrix masked_diag_zero(DenseMatrix a) {
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) = 0.0;
    return a;
}

// Rescale the output layer of a 1-H-1 tanh net so f(x) ~= x near 0. Starting
// the feature maps at the identity exposes cross-feature structure to the
// adjacency from the first epochs; with small random init the net first
// settles into a feature-wise autoencoder and A never leaves zero.
void calibrate_identity(Mlp& net) {
    DenseMatrix& w1 = net.layer_weights().front();
    DenseMatrix& w2 = net.layer_weights().back();
    double s2 = 0.0;
    for (std::size_t j = 0; j < w1.rows(); ++j) s2 += w1(j, 0) * w1(j, 0);
    for (std::size_t j = 0; j < w1.rows(); ++j) w2(0, j) = w1(j, 0) / s2;
}

} // namespace

void SemVae::init(std::size_t M_, std::uint64_t seed, std::size_t hidden, std::size_t rank_) {
    M = M_;
    rank = rank_;
    SeededRng rng(seed);
    enc = Mlp({1, hidden, 1}, Activation::Tanh);
    enc_lv = Mlp({1, hidden, 1}, Activation::Tanh);
    dec = Mlp({1, hidden, 1}, Activation::Tanh);
    enc.init_random(rng);
    enc_lv.init_random(rng);
    dec.init_random(rng);
    calibrate_identity(enc);
    calibrate_identity(dec);
    if (rank > 0) {
        U = DenseMatrix(M, rank);
        V = DenseMatrix(M, rank);
        for (double& v : U.data()) v = rng.normal() * 0.01;
        for (double& v : V.data()) v = rng.normal() * 0.01;
        sync_lowrank();
    } else {
        A = DenseMatrix(M, M);
    }
}

void SemVae::sync_lowrank() {
    A = masked_diag_zero(U * V.transpose());
}

std::size_t SemVae::parameter_count() const {
    const std::size_t adj = (rank > 0) ? 2 * M * rank : M * M;
    return adj + enc.parameter_count() + enc_lv.parameter_count() + dec.parameter_count();
}

void SemVae::flatten_params(std::vector<double>& out) const {
    if (rank > 0) {
        out.insert(out.end(), U.data().begin(), U.data().end());
        out.insert(out.end(), V.data().begin(), V.data().end());
    } else {
        out.insert(out.end(), A.data().begin(), A.data().end());
    }
    enc.flatten_params(out);
    enc_lv.flatten_params(out);
    dec.flatten_params(out);
}

void SemVae::unflatten_params(const std::vector<double>& in) {
    std::size_t off = 0;
    if (rank > 0) {
        for (double& v : U.data()) v = in[off++];
        for (double& v : V.data()) v = in[off++];
        sync_lowrank();
    } else {
        for (double& v : A.data()) v = in[off++];
    }
    off = enc.unflatten_params(in, off);
    off = enc_lv.unflatten_params(in, off);
    off = dec.unflatten_params(in, off);
    if (off != in.size()) throw std::invalid_argument("SemVae::unflatten_params: size mismatch");
}

void encode(const SemVae& model, const DenseMatrix& x, DenseMatrix& mean, DenseMatrix& log_var) {
    if (x.cols() != model.M) throw std::invalid_argument("encode: column count != M");
    if (!x.is_finite()) throw std::invalid_argument("encode: non-finite input");
    const DenseMatrix f = as_shape(model.enc.forward(as_column(x)), x.rows(), x.cols());
    DenseMatrix lv = as_shape(model.enc_lv.forward(as_column(x)), x.rows(), x.cols());
    for (double& v : lv.data()) v = std::clamp(v, -kLogVarClamp, kLogVarClamp);
    const DenseMatrix i_a = DenseMatrix::identity(model.M) - model.A;
    mean = f * i_a;
    log_var = std::move(lv);
}

double elbo_loss_with_noise(SemVae& model, const DenseMatrix& x, const DenseMatrix& noise,
                            std::vector<double>& grad_out) {
    const std::size_t n = x.rows();
    const std::size_t m = model.M;
    if (x.cols() != m || !noise.same_shape(x))
        throw std::invalid_argument("elbo_loss_with_noise: shape mismatch");

    const DenseMatrix ident = DenseMatrix::identity(m);
    const DenseMatrix i_a = ident - model.A;
    const DenseMatrix b = inverse(i_a);

    // per-thread scratch; Mlp::forward reuses the trace buffers across steps
    static thread_local Mlp::Trace tr_enc, tr_lv, tr_dec;
    const DenseMatrix f = as_shape(model.enc.forward(as_column(x), tr_enc), n, m);
    const DenseMatrix lv_raw = as_shape(model.enc_lv.forward(as_column(x), tr_lv), n, m);
    DenseMatrix lv = lv_raw;
    for (double& v : lv.data()) v = std::clamp(v, -kLogVarClamp, kLogVarClamp);

    const DenseMatrix mu = f * i_a;
    DenseMatrix z = mu;
    for (std::size_t k = 0; k < z.data().size(); ++k)
        z.data()[k] += std::exp(0.5 * lv.data()[k]) * noise.data()[k];
    const DenseMatrix u = z * b;
    const DenseMatrix xhat = as_shape(model.dec.forward(as_column(u), tr_dec), n, m);

    const double inv_n = 1.0 / static_cast<double>(n);
    double recon = 0.0, kl = 0.0;
    for (std::size_t k = 0; k < x.data().size(); ++k) {
        const double r = xhat.data()[k] - x.data()[k];
        recon += 0.5 * (r * r + std::log(2.0 * std::numbers::pi));
        const double muk = mu.data()[k];
        const double lvk = lv.data()[k];
        kl += 0.5 * (muk * muk + std::exp(lvk) - lvk - 1.0);
    }
    const double loss = (recon + kl) * inv_n;
    if (!std::isfinite(loss)) throw std::runtime_error("elbo_loss_with_noise: non-finite loss");

    // backward
    DenseMatrix d_xhat(n, m);
    for (std::size_t k = 0; k < d_xhat.data().size(); ++k)
        d_xhat.data()[k] = (xhat.data()[k] - x.data()[k]) * inv_n;

    Mlp::Grads g_dec = model.dec.zero_grads();
    const DenseMatrix d_u = as_shape(model.dec.backward(tr_dec, as_column(d_xhat), g_dec), n, m);

    const DenseMatrix d_z = d_u * b.transpose();
    const DenseMatrix g_inv = z.transpose() * d_u; // M x M
    DenseMatrix d_a = b.transpose() * g_inv * b.transpose();

    DenseMatrix d_lv(n, m);
    DenseMatrix d_mu = d_z;
    for (std::size_t k = 0; k < d_lv.data().size(); ++k) {
        const double lvk = lv.data()[k];
        d_lv.data()[k] = d_z.data()[k] * noise.data()[k] * 0.5 * std::exp(0.5 * lvk) +
                         0.5 * (std::exp(lvk) - 1.0) * inv_n;
        d_mu.data()[k] += mu.data()[k] * inv_n;
    }
    // kill gradient where the clamp is active
    for (std::size_t k = 0; k < d_lv.data().size(); ++k)
        if (std::fabs(lv_raw.data()[k]) > kLogVarClamp) d_lv.data()[k] = 0.0;

    const DenseMatrix d_f = d_mu * i_a.transpose();
    d_a -= f.transpose() * d_mu;

    Mlp::Grads g_enc = model.enc.zero_grads();
    Mlp::Grads g_lv = model.enc_lv.zero_grads();
    model.enc.backward(tr_enc, as_column(d_f), g_enc);
    model.enc_lv.backward(tr_lv, as_column(d_lv), g_lv);

    grad_out.clear();
    grad_out.reserve(model.parameter_count());
    if (model.rank > 0) {
        const DenseMatrix d_a_masked = masked_diag_zero(d_a);
        const DenseMatrix g_u = d_a_masked * model.V;
        const DenseMatrix g_v = d_a_masked.transpose() * model.U;
        grad_out.insert(grad_out.end(), g_u.data().begin(), g_u.data().end());
        grad_out.insert(grad_out.end(), g_v.data().begin(), g_v.data().end());
    } else {
        grad_out.insert(grad_out.end(), d_a.data().begin(), d_a.data().end());
    }
    model.enc.flatten_grads(g_enc, grad_out);
    model.enc_lv.flatten_grads(g_lv, grad_out);
    model.dec.flatten_grads(g_dec, grad_out);
    return loss;
}

double acyclicity(const DenseMatrix& a) {
    if (!a.is_square()) throw std::invalid_argument("acyclicity: non-square matrix");
    return mat_exp(a.hadamard(a)).trace() - static_cast<double>(a.rows());
}

DenseMatrix acyclicity_grad(const DenseMatrix& a) {
    if (!a.is_square()) throw std::invalid_argument("acyclicity_grad: non-square matrix");
    DenseMatrix g = mat_exp(a.hadamard(a)).transpose();
    for (std::size_t k = 0; k < g.data().size(); ++k) g.data()[k] *= 2.0 * a.data()[k];
    return g;
}

namespace {

class AdamW {
public:
    AdamW(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& params, const std::vector<double>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            params[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * params[i]);
        }
    }

private:
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    double weight_decay_ = 0.0;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

void add_structure_grads(const SemVae& model, const DiscoveryConfig& cfg, double rho, double alpha,
                         std::vector<double>& grads, double& penalty_out) {
    // The sparsity weight is calibrated against the dataset ELBO, which sums
    // over samples; the batch loss averages instead, so rescale to match.
    const double lam = cfg.lambda_s / static_cast<double>(cfg.batch_size);
    const double h = acyclicity(model.A);
    penalty_out = lam * model.A.sum_abs() + 0.5 * rho * h * h + alpha * h;
    DenseMatrix g_a = acyclicity_grad(model.A);
    g_a *= (rho * h + alpha);
    for (std::size_t k = 0; k < g_a.data().size(); ++k) {
        const double a = model.A.data()[k];
        g_a.data()[k] += lam * ((a > 0.0) - (a < 0.0));
    }
    if (model.rank > 0) {
        const DenseMatrix g_m = masked_diag_zero(g_a);
        const DenseMatrix g_u = g_m * model.V;
        const DenseMatrix g_v = g_m.transpose() * model.U;
        for (std::size_t k = 0; k < g_u.data().size(); ++k) grads[k] += g_u.data()[k];
        const std::size_t off = g_u.data().size();
        for (std::size_t k = 0; k < g_v.data().size(); ++k) grads[off + k] += g_v.data()[k];
    } else {
        for (std::size_t k = 0; k < g_a.data().size(); ++k) grads[k] += g_a.data()[k];
    }
}

void enforce_zero_diag(SemVae& model) {
    if (model.rank > 0) {
        model.sync_lowrank();
    } else {
        for (std::size_t i = 0; i < model.M; ++i) model.A(i, i) = 0.0;
    }
}

// Node order for the feasibility projection: repeatedly peel the node with
// the least squared incoming weight from the still-unplaced set. Uses only
// the learned magnitudes, so no node-index bias can leak in.
std::vector<std::size_t> peel_order(const DenseMatrix& a) {
    const std::size_t m = a.rows();
    std::vector<bool> placed(m, false);
    std::vector<std::size_t> order;
    order.reserve(m);
    while (order.size() < m) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (placed[j]) continue;
            double in = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                if (!placed[i] && i != j) in += a(i, j) * a(i, j);
            if (in < best) {
                best = in;
                pick = j;
            }
        }
        placed[pick] = true;
        order.push_back(pick);
    }
    return order;
}

// Penalty-phase optimization stalls once h is dominated by small entries that
// stochastic steps keep alive; below this value the edge directions are
// resolved and the remaining cycles are projected away instead.
constexpr double kFeasibilityTol = 1e-2;

} // namespace

DiscoveryResult augmented_lagrangian_fit(const DenseMatrix& x, const DiscoveryConfig& cfg,
                                         std::uint64_t seed) {
    const std::size_t n = x.rows();
    const std::size_t m = x.cols();
    if (m < 2) throw std::invalid_argument("augmented_lagrangian_fit: need M >= 2");
    if (n < cfg.batch_size)
        throw std::invalid_argument("augmented_lagrangian_fit: fewer rows than batch size");

    DiscoveryResult res;
    res.model.init(m, SeededRng::derive(seed, 0), cfg.hidden, cfg.low_rank);
    SeededRng rng(SeededRng::derive(seed, 1));

    std::vector<double> params;
    res.model.flatten_params(params);
    AdamW opt(params.size(), cfg.learning_rate);

    double rho = cfg.rho0;
    double alpha = cfg.alpha0;
    // the growth test compares against the previous subproblem's h; seeding
    // with +inf keeps rho at rho0 until progress actually stalls (A starts at
    // zero, so seeding with h(A_init) = 0 would grow rho every iteration)
    double h_prev = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    // feasibility projection state: once the order is resolved, entries that
    // point against it are pinned to exact zero so h vanishes identically
    std::vector<char> mask(m * m, 1);
    bool projected = false;

    const auto run_epoch = [&](double& last_loss) {
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
        for (std::size_t start = 0; start + cfg.batch_size <= n; start += cfg.batch_size) {
            DenseMatrix batch(cfg.batch_size, m), noise(cfg.batch_size, m);
            for (std::size_t r = 0; r < cfg.batch_size; ++r)
                for (std::size_t j = 0; j < m; ++j) batch(r, j) = x(perm[start + r], j);
            for (double& v : noise.data()) v = rng.normal();

            std::vector<double> grads;
            double loss = elbo_loss_with_noise(res.model, batch, noise, grads);
            double penalty = 0.0;
            add_structure_grads(res.model, cfg, rho, alpha, grads, penalty);
            loss += penalty;
            if (!std::isfinite(loss))
                throw std::runtime_error("augmented_lagrangian_fit: loss became non-finite");

            opt.step(params, grads);
            if (projected)
                for (std::size_t k = 0; k < m * m; ++k)
                    if (!mask[k]) params[k] = 0.0;
            res.model.unflatten_params(params);
            enforce_zero_diag(res.model);
            if (res.model.rank == 0) {
                params.clear();
                res.model.flatten_params(params);
            }
            last_loss = loss;
        }
    };

    for (std::size_t outer = 0; outer < cfg.outer_iterations; ++outer) {
        double last_loss = 0.0;
        for (std::size_t epoch = 0; epoch < cfg.inner_epochs; ++epoch) run_epoch(last_loss);
        const double h_now = acyclicity(res.model.A);
        res.loss_history.push_back(last_loss);
        res.h_history.push_back(h_now);
        alpha += rho * h_now;
        if (h_now > cfg.h_decrease * h_prev) rho = std::min(rho * cfg.rho_growth, cfg.rho_cap);
        h_prev = h_now;
        res.final_h = h_now;
        res.final_loss = last_loss;
        if (h_now < cfg.h_tol) {
            res.converged = true;
            break;
        }
        if (!projected && res.model.rank == 0 && h_now < kFeasibilityTol) {
            const std::vector<std::size_t> order = peel_order(res.model.A);
            std::vector<std::size_t> pos(m);
            for (std::size_t k = 0; k < m; ++k) pos[order[k]] = k;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    mask[i * m + j] = (i != j && pos[i] < pos[j]) ? 1 : 0;
            for (std::size_t k = 0; k < m * m; ++k)
                if (!mask[k]) params[k] = 0.0;
            res.model.unflatten_params(params);
            projected = true;
            // refit the surviving coefficients under the mask; h is exactly
            // zero from here on, so the next outer pass terminates the loop
        }
    }
    return res;
}

std::optional<std::vector<std::size_t>> try_topo_sort(const DenseMatrix& a) {
    const std::size_t m = a.rows();
    std::vector<std::size_t> indeg(m, 0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (a(i, j) != 0.0) ++indeg[j];
    std::vector<std::size_t> order, ready;
    for (std::size_t j = 0; j < m; ++j)
        if (indeg[j] == 0) ready.push_back(j);
    while (!ready.empty()) {
        const std::size_t v = ready.front();
        ready.erase(ready.begin());
        order.push_back(v);
        for (std::size_t j = 0; j < m; ++j) {
            if (a(v, j) == 0.0) continue;
            if (--indeg[j] == 0) ready.push_back(j);
        }
    }
    if (order.size() != m) return std::nullopt;
    return order;
}

namespace {

// find any directed cycle by DFS; only called when one exists
std::vector<std::size_t> find_cycle(const DenseMatrix& a) {
    const std::size_t m = a.rows();
    std::vector<int> color(m, 0); // 0 white, 1 gray, 2 black
    std::vector<std::size_t> stack;
    std::vector<std::size_t> cycle;

    std::function<bool(std::size_t)> dfs = [&](std::size_t v) -> bool {
        color[v] = 1;
        stack.push_back(v);
        for (std::size_t j = 0; j < m; ++j) {
            if (a(v, j) == 0.0) continue;
            if (color[j] == 1) {
                auto it = std::find(stack.begin(), stack.end(), j);
                cycle.assign(it, stack.end());
                cycle.push_back(j);
                return true;
            }
            if (color[j] == 0 && dfs(j)) return true;
        }
        color[v] = 2;
        stack.pop_back();
        return false;
    };
    for (std::size_t v = 0; v < m; ++v)
        if (color[v] == 0 && dfs(v)) break;
    return cycle;
}

} // namespace

CausalGraph threshold_graph(const SemVae& model, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("threshold_graph: tau must be positive");
    CausalGraph g;
    g.M = model.M;
    g.adjacency = DenseMatrix(model.M, model.M);
    for (std::size_t i = 0; i < model.M; ++i)
        for (std::size_t j = 0; j < model.M; ++j)
            if (std::fabs(model.A(i, j)) > tau) g.adjacency(i, j) = model.A(i, j);
    if (!try_topo_sort(g.adjacency)) {
        const std::vector<std::size_t> cyc = find_cycle(g.adjacency);
        std::ostringstream msg;
        msg << "threshold_graph: residual cycle after pruning:";
        for (std::size_t v : cyc) msg << ' ' << v;
        throw std::runtime_error(msg.str());
    }
    for (std::size_t i = 0; i < model.M; ++i)
        for (std::size_t j = 0; j < model.M; ++j)
            if (g.adjacency(i, j) != 0.0) g.edges.push_back({i, j, g.adjacency(i, j)});
    return g;
}

std::size_t shd(const CausalGraph& estimate, const WeightedDag& truth) {
    if (estimate.M != truth.M) throw std::invalid_argument("shd: dimension mismatch");
    const std::size_t m = estimate.M;
    std::size_t dist = 0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const bool e_ij = estimate.adjacency(i, j) != 0.0;
            const bool e_ji = estimate.adjacency(j, i) != 0.0;
            const bool t_ij = truth.adjacency(i, j) != 0.0;
            const bool t_ji = truth.adjacency(j, i) != 0.0;
            if (e_ij == t_ij && e_ji == t_ji) continue;
            ++dist; // insertion, deletion, or reversal, each one operation
        }
    return dist;
}

} // namespace cape
