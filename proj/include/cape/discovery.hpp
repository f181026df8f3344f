#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cape/matrix.hpp"
#include "cape/mlp.hpp"
#include "cape/synthgen.hpp"

namespace cape {

/// Variational SEM: X is explained through a trainable adjacency A and small
/// per-feature networks. The encoder maps X elementwise through `enc`, mixes
/// by (I - A) to produce the posterior mean, and `enc_lv` supplies a diagonal
/// log-variance. The decoder unmixes by (I - A)^{-1} and maps back through
/// `dec` elementwise.
struct SemVae {
    std::size_t M = 0;
    DenseMatrix A;
    Mlp enc;    // 1-64-1 feature-wise mean path
    Mlp enc_lv; // 1-64-1 feature-wise log-variance head
    Mlp dec;    // 1-64-1 feature-wise reconstruction

    // low-rank factorization A = U V^T when rank > 0; A is then derived
    std::size_t rank = 0;
    DenseMatrix U, V;

    void init(std::size_t M_, std::uint64_t seed, std::size_t hidden = 64, std::size_t rank_ = 0);
    void sync_lowrank(); // refresh A from U V^T with zero diagonal
    std::size_t parameter_count() const;
    void flatten_params(std::vector<double>& out) const;
    void unflatten_params(const std::vector<double>& in);
};

struct DiscoveryConfig {
    double lambda_s = 1.0;
    double tau = 0.2;
    double rho0 = 1.0;
    double alpha0 = 0.0;
    double rho_growth = 10.0;
    double rho_cap = 1e16;
    double h_decrease = 0.25;
    std::size_t outer_iterations = 20;
    std::size_t inner_epochs = 100;
    std::size_t batch_size = 128;
    double learning_rate = 3e-3;
    std::size_t hidden = 64;
    std::size_t low_rank = 0; // 0 = full-rank A
    double h_tol = 1e-8;
};

struct CausalGraph {
    std::size_t M = 0;
    DenseMatrix adjacency;
    struct Edge {
        std::size_t from, to;
        double weight;
    };
    std::vector<Edge> edges;
};

struct DiscoveryResult {
    SemVae model;
    double final_h = 0.0;
    double final_loss = 0.0;
    bool converged = false;
    std::vector<double> loss_history; // one entry per outer iteration
    std::vector<double> h_history;
};

/// Posterior parameters for a batch: mean = enc(X)(I - A), plus the clamped
/// log-variance head evaluated elementwise.
void encode(const SemVae& model, const DenseMatrix& x, DenseMatrix& mean, DenseMatrix& log_var);

/// Negative ELBO with reparameterized sampling noise supplied explicitly so
/// gradients can be checked by finite differences. Accumulates parameter
/// grads into the flat vector (same layout as flatten_params).
double elbo_loss_with_noise(SemVae& model, const DenseMatrix& x, const DenseMatrix& noise,
                            std::vector<double>& grad_out);

/// h(A) = tr(e^{A o A}) - M; zero exactly when A supports a DAG.
double acyclicity(const DenseMatrix& a);

/// Gradient of h: (e^{A o A})^T o 2A.
DenseMatrix acyclicity_grad(const DenseMatrix& a);

/// Augmented Lagrangian fit: inner AdamW epochs on all parameters, outer
/// multiplier and penalty updates until h < h_tol or the budget runs out.
DiscoveryResult augmented_lagrangian_fit(const DenseMatrix& x, const DiscoveryConfig& cfg,
                                         std::uint64_t seed);

/// Mask |A| <= tau and require the survivor to be acyclic. Throws
/// std::runtime_error listing an offending cycle otherwise.
CausalGraph threshold_graph(const SemVae& model, double tau);

/// Structural Hamming distance between edge supports; a reversed edge counts
/// once.
std::size_t shd(const CausalGraph& estimate, const WeightedDag& truth);

/// Topological order of a weighted adjacency, or std::nullopt on a cycle.
std::optional<std::vector<std::size_t>> try_topo_sort(const DenseMatrix& a);

} // namespace cape
