#pragma once

#include <cstdint>
#include <vector>

#include "cape/matrix.hpp"

namespace cape {

/// Value-binning codebook: B half-open intervals plus a reserved slot 0 for
/// zero/missing measurements. table has B + 1 rows of width D.
struct Codebook {
    std::vector<double> edges; // B + 1 ascending boundaries
    DenseMatrix table;         // (B + 1) x D

    std::size_t bins() const { return edges.empty() ? 0 : edges.size() - 1; }
};

struct AttentionConfig {
    std::size_t D = 6;
    std::size_t B = 10;
    bool scale_scores = true; // 1/sqrt(D) before softmax
    bool aggregate_max = false;
};

/// 0 for x <= 0, otherwise the 1-based interval index, clamped to B above the
/// last edge. Throws on non-finite x.
std::size_t bin_value(double x, const std::vector<double>& edges);

/// Quantile edges over the positive part of a data column set.
std::vector<double> quantile_edges(const DenseMatrix& data, std::size_t bins);

/// Frozen random codebook, entries N(0, 1/D).
Codebook make_codebook(const std::vector<double>& edges, std::size_t D, std::uint64_t seed);

/// Row of M measurements -> M embeddings of width D (one table row each).
DenseMatrix contextual_embed(const Codebook& codebook, const std::vector<double>& x_row);

/// Rotary fusion of one embedding with its positional angles.
std::vector<double> fuse(const std::vector<double>& v, const std::vector<double>& phi);

struct AttentionOutput {
    DenseMatrix outputs;   // M x D
    DenseMatrix attention; // M x M row-stochastic
};

/// One softmax attention layer; angles enter queries and keys only.
AttentionOutput attention_layer(const DenseMatrix& embeddings,
                                const std::vector<std::vector<double>>& angles,
                                const DenseMatrix& w_q, const DenseMatrix& w_k,
                                const DenseMatrix& w_v, bool scale_scores = true);

/// Column-wise mean or max over the M output rows.
std::vector<double> aggregate(const DenseMatrix& outputs, bool use_max);

} // namespace cape
