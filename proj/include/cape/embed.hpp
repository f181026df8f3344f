#pragma once

#include <cstdint>
#include <vector>

#include "cape/discovery.hpp"

namespace cape {

struct EmbeddingConfig {
    std::size_t d = 3;       // hyperbolic dimension; ambient is d + 1
    double lambda_g = 0.1;   // origin-pull weight
    std::size_t k = 2;       // hop radius for positives
    double w = 0.15;         // restart weight
    double eta = 1e-3;       // learning rate
    std::size_t epochs = 1000;
    std::size_t max_negatives = 0; // 0 = all
    std::uint64_t seed = 0;
};

struct HyperboloidEmbedding {
    std::vector<std::vector<double>> points; // M points, each (d+1) ambient coords
    std::vector<double> loss_history;
    std::vector<double> pi; // stationary vector used for the origin pull
};

/// Nodes connected to m by a directed path of length <= k in either
/// orientation, excluding m itself.
std::vector<std::size_t> khop_positives(const CausalGraph& graph, std::size_t m, std::size_t k);

/// Restart-smoothed stationary vector of the in-degree-normalized walk.
/// Zero-in-degree columns are treated as uniform. Power iteration to an L1
/// residual of 1e-12.
std::vector<double> pagerank(const CausalGraph& graph, double w);

/// Contrastive loss over hyperboloid points plus the origin pull, with
/// ambient Euclidean gradients per point.
double hyperbolic_loss(const std::vector<std::vector<double>>& points, const CausalGraph& graph,
                       const std::vector<std::vector<std::size_t>>& positives,
                       const std::vector<double>& pi, double lambda_g,
                       std::vector<std::vector<double>>& grads_out,
                       std::size_t max_negatives = 0);

HyperboloidEmbedding fit_embeddings(const CausalGraph& graph, const EmbeddingConfig& cfg);

} // namespace cape
