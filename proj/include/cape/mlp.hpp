#pragma once

#include <functional>
#include <vector>

#include "cape/matrix.hpp"
#include "cape/rng.hpp"

namespace cape {

enum class Activation { Tanh, Sigmoid, Identity };

/// Tiny fully-connected network with manual backpropagation.
/// Hidden layers use `act`, the output layer is always linear.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<std::size_t> widths, Activation act);

    /// Gaussian init, std 1/sqrt(fan_in).
    void init_random(SeededRng& rng);

    const std::vector<std::size_t>& widths() const { return widths_; }
    std::size_t input_width() const { return widths_.front(); }
    std::size_t output_width() const { return widths_.back(); }
    Activation activation() const { return act_; }

    std::vector<DenseMatrix>& layer_weights() { return weights_; }
    std::vector<std::vector<double>>& layer_biases() { return biases_; }
    const std::vector<DenseMatrix>& layer_weights() const { return weights_; }
    const std::vector<std::vector<double>>& layer_biases() const { return biases_; }

    /// Cached per-layer activations for the backward pass.
    struct Trace {
        DenseMatrix input;
        std::vector<DenseMatrix> post; // activation outputs per layer
    };

    struct Grads {
        std::vector<DenseMatrix> weights;
        std::vector<std::vector<double>> biases;
        void add_scaled(const Grads& o, double s);
    };
    Grads zero_grads() const;

    /// x: (batch × input_width) -> (batch × output_width)
    DenseMatrix forward(const DenseMatrix& x) const;
    DenseMatrix forward(const DenseMatrix& x, Trace& trace) const;

    /// Accumulates parameter grads into `grads`, returns grad w.r.t. input.
    DenseMatrix backward(const Trace& trace, const DenseMatrix& upstream, Grads& grads) const;

    std::size_t parameter_count() const;
    void flatten_params(std::vector<double>& out) const;
    std::size_t unflatten_params(const std::vector<double>& in, std::size_t offset);
    void flatten_grads(const Grads& g, std::vector<double>& out) const;

private:
    std::vector<std::size_t> widths_;
    Activation act_ = Activation::Tanh;
    std::vector<DenseMatrix> weights_;          // layer l: (widths[l+1] × widths[l])
    std::vector<std::vector<double>> biases_;   // layer l: widths[l+1]
};

/// Max over components of |analytic - central difference| / (1 + |analytic|);
/// the unit offset keeps roundoff noise on near-zero components from blowing
/// up the ratio.
/// Throws if f evaluates to a non-finite value at a perturbed point.
double fd_gradient_check(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& analytic_grad,
                         const std::vector<double>& x, double eps);

} // namespace cape
