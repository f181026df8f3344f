#pragma once

#include <cstdint>
#include <vector>

#include "cape/matrix.hpp"
#include "cape/mlp.hpp"

namespace cape {

/// Ground-truth weighted DAG. adjacency(i, j) != 0 means an edge i -> j with
/// that causal weight; topo_order lists nodes so that every edge goes from an
/// earlier to a later position.
struct WeightedDag {
    std::size_t M = 0;
    DenseMatrix adjacency;
    std::vector<std::size_t> topo_order;
};

/// Preferential-attachment DAG: each new node attaches to m_attach existing
/// nodes picked proportionally to degree, edges oriented old -> new. Weights
/// are left at 1 until assign_weights runs.
WeightedDag gen_ba_dag(std::size_t M, std::size_t m_attach, std::uint64_t seed);

/// Draw each edge weight uniformly from [-hi, -lo] or [lo, hi], equal odds.
WeightedDag assign_weights(WeightedDag dag, double lo, double hi, std::uint64_t seed);

struct SemOptions {
    std::size_t hidden = 16;
    Activation act = Activation::Tanh;
    bool unit_weights = false; // internal MLP weights all 1 instead of N(0,1)
};

/// Simulate tabular data: each feature in topological order is a per-node MLP
/// of its weight-scaled parents plus unit Gaussian noise; roots are pure
/// noise. Returns N x M.
DenseMatrix simulate_sem(const WeightedDag& dag, std::size_t N, std::uint64_t seed,
                         const SemOptions& opts = {});

} // namespace cape
