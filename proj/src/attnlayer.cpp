#include "cape/attnlayer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cape/rng.hpp"
#include "cape/rotary.hpp"

namespace cape {

std::size_t bin_value(double x, const std::vector<double>& edges) {
    if (!std::isfinite(x)) throw std::invalid_argument("bin_value: non-finite measurement");
    if (edges.size() < 2) throw std::invalid_argument("bin_value: need at least one interval");
    if (x <= 0.0) return 0;
    const std::size_t b = edges.size() - 1;
    for (std::size_t k = 0; k < b; ++k)
        if (x >= edges[k] && x < edges[k + 1]) return k + 1;
    if (x < edges.front()) return 1;
    return b;
}

std::vector<double> quantile_edges(const DenseMatrix& data, std::size_t bins) {
    if (bins < 1) throw std::invalid_argument("quantile_edges: need bins >= 1");
    std::vector<double> vals;
    for (double v : data.data())
        if (v > 0.0) vals.push_back(v);
    if (vals.empty()) {
        std::vector<double> edges(bins + 1);
        for (std::size_t k = 0; k <= bins; ++k) edges[k] = static_cast<double>(k) / bins;
        return edges;
    }
    std::sort(vals.begin(), vals.end());
    std::vector<double> edges(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k) {
        const double q = static_cast<double>(k) / bins;
        const double idx = q * static_cast<double>(vals.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, vals.size() - 1);
        edges[k] = vals[lo] + (idx - static_cast<double>(lo)) * (vals[hi] - vals[lo]);
    }
    // de-duplicate ties so the edges stay strictly ascending
    for (std::size_t k = 1; k <= bins; ++k)
        if (edges[k] <= edges[k - 1]) edges[k] = edges[k - 1] + 1e-9;
    return edges;
}

Codebook make_codebook(const std::vector<double>& edges, std::size_t D, std::uint64_t seed) {
    if (D % 2 != 0) throw std::invalid_argument("make_codebook: D must be even");
    for (std::size_t k = 1; k < edges.size(); ++k)
        if (edges[k] <= edges[k - 1])
            throw std::invalid_argument("make_codebook: edges must be strictly ascending");
    Codebook cb;
    cb.edges = edges;
    cb.table = DenseMatrix(edges.size(), D);
    SeededRng rng(seed);
    const double scale = 1.0 / static_cast<double>(D);
    for (double& v : cb.table.data()) v = rng.normal() * scale;
    return cb;
}

DenseMatrix contextual_embed(const Codebook& codebook, const std::vector<double>& x_row) {
    const std::size_t d = codebook.table.cols();
    DenseMatrix out(x_row.size(), d);
    for (std::size_t j = 0; j < x_row.size(); ++j) {
        const std::size_t bin = bin_value(x_row[j], codebook.edges);
        for (std::size_t c = 0; c < d; ++c) out(j, c) = codebook.table(bin, c);
    }
    return out;
}

std::vector<double> fuse(const std::vector<double>& v, const std::vector<double>& phi) {
    return rotate(phi, v);
}

namespace {

std::vector<double> project_row(const DenseMatrix& w, const DenseMatrix& rows, std::size_t r) {
    std::vector<double> out(w.rows(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) acc += w(i, j) * rows(r, j);
        out[i] = acc;
    }
    return out;
}

} // namespace

AttentionOutput attention_layer(const DenseMatrix& embeddings,
                                const std::vector<std::vector<double>>& angles,
                                const DenseMatrix& w_q, const DenseMatrix& w_k,
                                const DenseMatrix& w_v, bool scale_scores) {
    const std::size_t m = embeddings.rows();
    const std::size_t d = embeddings.cols();
    if (angles.size() != m) throw std::invalid_argument("attention_layer: angle count != M");
    if (w_q.cols() != d || w_k.cols() != d || w_v.cols() != d)
        throw std::invalid_argument("attention_layer: projection shape mismatch");

    std::vector<std::vector<double>> qs(m), ks(m);
    for (std::size_t r = 0; r < m; ++r) {
        qs[r] = project_row(w_q, embeddings, r);
        ks[r] = project_row(w_k, embeddings, r);
    }

    AttentionOutput out;
    out.attention = DenseMatrix(m, m);
    const double scale = scale_scores ? 1.0 / std::sqrt(static_cast<double>(w_q.rows())) : 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        double row_max = -1e300;
        std::vector<double> scores(m);
        for (std::size_t j = 0; j < m; ++j) {
            scores[j] = scale * attention_score(qs[i], ks[j], angles[i], angles[j]);
            row_max = std::max(row_max, scores[j]);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            scores[j] = std::exp(scores[j] - row_max);
            denom += scores[j];
        }
        for (std::size_t j = 0; j < m; ++j) out.attention(i, j) = scores[j] / denom;
    }
    const DenseMatrix values = embeddings * w_v.transpose();
    out.outputs = out.attention * values;
    return out;
}

std::vector<double> aggregate(const DenseMatrix& outputs, bool use_max) {
    if (outputs.rows() == 0) throw std::invalid_argument("aggregate: empty input");
    std::vector<double> out(outputs.cols());
    for (std::size_t c = 0; c < outputs.cols(); ++c) {
        if (use_max) {
            double v = outputs(0, c);
            for (std::size_t r = 1; r < outputs.rows(); ++r) v = std::max(v, outputs(r, c));
            out[c] = v;
        } else {
            double acc = 0.0;
            for (std::size_t r = 0; r < outputs.rows(); ++r) acc += outputs(r, c);
            out[c] = acc / static_cast<double>(outputs.rows());
        }
    }
    return out;
}

} // namespace cape
