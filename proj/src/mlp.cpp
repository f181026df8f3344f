#include "cape/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "cape/vecmath.hpp"

namespace cape {

namespace {

void apply_act_inplace(Activation a, double* x, std::size_t n) {
    switch (a) {
        case Activation::Tanh: tanh_inplace(x, n); break;
        case Activation::Sigmoid: sigmoid_inplace(x, n); break;
        case Activation::Identity: break;
    }
}

// derivative expressed through the activation output y
double act_deriv_from_output(Activation a, double y) {
    switch (a) {
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Sigmoid: return y * (1.0 - y);
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

} // namespace

Mlp::Mlp(std::vector<std::size_t> widths, Activation act)
    : widths_(std::move(widths)), act_(act) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least two layer widths");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        weights_.emplace_back(widths_[l + 1], widths_[l]);
        biases_.emplace_back(widths_[l + 1], 0.0);
    }
}

void Mlp::init_random(SeededRng& rng) {
    for (auto& w : weights_) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(w.cols()));
        for (double& v : w.data()) v = rng.normal() * scale;
    }
    for (auto& b : biases_)
        for (double& v : b) v = 0.0;
}

void Mlp::Grads::add_scaled(const Grads& o, double s) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t k = 0; k < weights[l].data().size(); ++k)
            weights[l].data()[k] += s * o.weights[l].data()[k];
        for (std::size_t k = 0; k < biases[l].size(); ++k) biases[l][k] += s * o.biases[l][k];
    }
}

Mlp::Grads Mlp::zero_grads() const {
    Grads g;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        g.weights.emplace_back(widths_[l + 1], widths_[l]);
        g.biases.emplace_back(widths_[l + 1], 0.0);
    }
    return g;
}

DenseMatrix Mlp::forward(const DenseMatrix& x) const {
    Trace t;
    return forward(x, t);
}

DenseMatrix Mlp::forward(const DenseMatrix& x, Trace& trace) const {
    if (x.cols() != input_width()) throw std::invalid_argument("Mlp::forward: shape mismatch");
    trace.input = x;
    trace.post.resize(weights_.size());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const bool last = (l + 1 == weights_.size());
        const DenseMatrix& cur = (l == 0) ? x : trace.post[l - 1];
        DenseMatrix& next = trace.post[l]; // reused across calls when shapes match
        if (next.rows() != cur.rows() || next.cols() != widths_[l + 1])
            next = DenseMatrix(cur.rows(), widths_[l + 1]);
        for (std::size_t i = 0; i < cur.rows(); ++i)
            for (std::size_t o = 0; o < widths_[l + 1]; ++o) {
                double acc = biases_[l][o];
                for (std::size_t k = 0; k < widths_[l]; ++k) acc += weights_[l](o, k) * cur(i, k);
                next(i, o) = acc;
            }
        if (!last) apply_act_inplace(act_, next.data().data(), next.data().size());
    }
    return trace.post.back();
}

DenseMatrix Mlp::backward(const Trace& trace, const DenseMatrix& upstream, Grads& grads) const {
    // per-thread scratch: these buffers are large (batch x hidden) and this
    // runs once per optimizer step, so reuse beats reallocation
    static thread_local DenseMatrix delta, prev;
    delta = upstream; // grad w.r.t. layer output (post-activation)
    for (std::size_t l = weights_.size(); l-- > 0;) {
        const bool last = (l + 1 == weights_.size());
        const DenseMatrix& out = trace.post[l];
        if (!last) {
            for (std::size_t i = 0; i < delta.rows(); ++i)
                for (std::size_t o = 0; o < delta.cols(); ++o)
                    delta(i, o) *= act_deriv_from_output(act_, out(i, o));
        }
        const DenseMatrix& in = (l == 0) ? trace.input : trace.post[l - 1];
        for (std::size_t i = 0; i < delta.rows(); ++i)
            for (std::size_t o = 0; o < delta.cols(); ++o) {
                const double d = delta(i, o);
                grads.biases[l][o] += d;
                for (std::size_t k = 0; k < in.cols(); ++k) grads.weights[l](o, k) += d * in(i, k);
            }
        if (prev.rows() != delta.rows() || prev.cols() != widths_[l])
            prev = DenseMatrix(delta.rows(), widths_[l]);
        for (std::size_t i = 0; i < delta.rows(); ++i)
            for (std::size_t k = 0; k < widths_[l]; ++k) {
                double acc = 0.0;
                for (std::size_t o = 0; o < delta.cols(); ++o)
                    acc += weights_[l](o, k) * delta(i, o);
                prev(i, k) = acc;
            }
        std::swap(delta, prev);
    }
    return delta;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l)
        n += weights_[l].data().size() + biases_[l].size();
    return n;
}

void Mlp::flatten_params(std::vector<double>& out) const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.insert(out.end(), weights_[l].data().begin(), weights_[l].data().end());
        out.insert(out.end(), biases_[l].begin(), biases_[l].end());
    }
}

std::size_t Mlp::unflatten_params(const std::vector<double>& in, std::size_t offset) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (double& v : weights_[l].data()) v = in[offset++];
        for (double& v : biases_[l]) v = in[offset++];
    }
    return offset;
}

void Mlp::flatten_grads(const Grads& g, std::vector<double>& out) const {
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        out.insert(out.end(), g.weights[l].data().begin(), g.weights[l].data().end());
        out.insert(out.end(), g.biases[l].begin(), g.biases[l].end());
    }
}

double fd_gradient_check(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& analytic_grad,
                         const std::vector<double>& x, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("fd_gradient_check: eps must be positive");
    if (analytic_grad.size() != x.size())
        throw std::invalid_argument("fd_gradient_check: gradient/point size mismatch");
    std::vector<double> pt = x;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        pt[i] = x[i] + eps;
        const double fp = f(pt);
        pt[i] = x[i] - eps;
        const double fm = f(pt);
        pt[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("fd_gradient_check: non-finite function value");
        const double fd = (fp - fm) / (2.0 * eps);
        const double rel = std::fabs(analytic_grad[i] - fd) / (1.0 + std::fabs(analytic_grad[i]));
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace cape
