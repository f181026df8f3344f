#include "cape/embed.hpp"

#include <cmath>
#include <stdexcept>

#include "cape/manifold.hpp"
#include "cape/rng.hpp"

namespace cape {

std::vector<std::size_t> khop_positives(const CausalGraph& graph, std::size_t m, std::size_t k) {
    const std::size_t n = graph.M;
    if (m >= n) throw std::invalid_argument("khop_positives: node index out of range");
    std::vector<std::size_t> depth(n, static_cast<std::size_t>(-1));
    std::vector<std::size_t> frontier{m};
    depth[m] = 0;
    for (std::size_t hop = 1; hop <= k && !frontier.empty(); ++hop) {
        std::vector<std::size_t> next;
        for (std::size_t v : frontier)
            for (std::size_t u = 0; u < n; ++u) {
                if (graph.adjacency(v, u) == 0.0 && graph.adjacency(u, v) == 0.0) continue;
                if (depth[u] != static_cast<std::size_t>(-1)) continue;
                depth[u] = hop;
                next.push_back(u);
            }
        frontier = std::move(next);
    }
    std::vector<std::size_t> out;
    for (std::size_t u = 0; u < n; ++u)
        if (u != m && depth[u] != static_cast<std::size_t>(-1)) out.push_back(u);
    return out;
}

std::vector<double> pagerank(const CausalGraph& graph, double w) {
    const std::size_t n = graph.M;
    if (n < 1) throw std::invalid_argument("pagerank: empty graph");
    if (w <= 0.0 || w >= 1.0) throw std::invalid_argument("pagerank: need 0 < w < 1");

    // column-stochastic transition: column j distributes over the in-edges of j
    DenseMatrix p(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double indeg = 0.0;
        for (std::size_t i = 0; i < n; ++i) indeg += std::fabs(graph.adjacency(i, j));
        if (indeg == 0.0) {
            for (std::size_t i = 0; i < n; ++i) p(i, j) = 1.0 / static_cast<double>(n);
        } else {
            for (std::size_t i = 0; i < n; ++i) p(i, j) = std::fabs(graph.adjacency(i, j)) / indeg;
        }
    }

    std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
    const double restart = w / static_cast<double>(n);
    for (std::size_t iter = 0; iter < 100000; ++iter) {
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += p(i, j) * pi[j];
            next[i] = (1.0 - w) * acc + restart;
        }
        for (std::size_t i = 0; i < n; ++i) {
            residual += std::fabs(next[i] - pi[i]);
            pi[i] = next[i];
        }
        if (residual < 1e-12) return pi;
    }
    throw std::runtime_error("pagerank: power iteration did not converge");
}

namespace {

double pair_weight(const CausalGraph& graph, std::size_t m, std::size_t n) {
    return std::max(std::fabs(graph.adjacency(m, n)), std::fabs(graph.adjacency(n, m)));
}

// accumulates c * d(d_l(p_a, p_b))/d(p_a) into grad_a, symmetric for b
void add_dist_grad(const std::vector<double>& pa, const std::vector<double>& pb, double c,
                   std::vector<double>& ga, std::vector<double>& gb) {
    const double x = -minkowski_inner(pa, pb);
    const double denom = std::max(std::sqrt(std::max(x * x - 1.0, 0.0)), 1e-12);
    const double s = c / denom;
    ga[0] += s * pb[0];
    gb[0] += s * pa[0];
    for (std::size_t i = 1; i < pa.size(); ++i) {
        ga[i] -= s * pb[i];
        gb[i] -= s * pa[i];
    }
}

} // namespace

double hyperbolic_loss(const std::vector<std::vector<double>>& points, const CausalGraph& graph,
                       const std::vector<std::vector<std::size_t>>& positives,
                       const std::vector<double>& pi, double lambda_g,
                       std::vector<std::vector<double>>& grads_out, std::size_t max_negatives) {
    const std::size_t n = points.size();
    if (positives.size() != n || pi.size() != n)
        throw std::invalid_argument("hyperbolic_loss: size mismatch");
    const std::size_t dim = points[0].size();
    const double inv_n = 1.0 / static_cast<double>(n);

    grads_out.assign(n, std::vector<double>(dim, 0.0));
    std::vector<double> origin(dim, 0.0);
    origin[0] = 1.0;

    double loss = 0.0;
    std::vector<char> is_pos(n);
    for (std::size_t m = 0; m < n; ++m) {
        std::fill(is_pos.begin(), is_pos.end(), 0);
        for (std::size_t q : positives[m]) is_pos[q] = 1;

        std::vector<std::size_t> negs;
        for (std::size_t q = 0; q < n; ++q)
            if (q != m && !is_pos[q]) negs.push_back(q);
        if (max_negatives > 0 && negs.size() > max_negatives) negs.resize(max_negatives);

        std::vector<double> dist(n, 0.0);
        for (std::size_t q = 0; q < n; ++q)
            if (q != m) dist[q] = dist_hyperboloid(points[m], points[q]);

        double neg_sum = 0.0;
        for (std::size_t q : negs) neg_sum += std::exp(-dist[q]);

        for (std::size_t pos : positives[m]) {
            const double wgt = pair_weight(graph, m, pos);
            if (wgt == 0.0) continue;
            const double e_pos = std::exp(-dist[pos]);
            const double denom = e_pos + neg_sum;
            loss += inv_n * wgt * (dist[pos] + std::log(denom));
            // d(term)/d(d_pos) = wgt (1 - e_pos/denom); d/d(d_neg) = -wgt e_neg/denom
            add_dist_grad(points[m], points[pos], inv_n * wgt * (1.0 - e_pos / denom),
                          grads_out[m], grads_out[pos]);
            for (std::size_t q : negs)
                add_dist_grad(points[m], points[q], -inv_n * wgt * std::exp(-dist[q]) / denom,
                              grads_out[m], grads_out[q]);
        }

        const double d_o = dist_hyperboloid(points[m], origin);
        loss += inv_n * lambda_g * pi[m] * d_o;
        std::vector<double> dump(dim, 0.0);
        add_dist_grad(points[m], origin, inv_n * lambda_g * pi[m], grads_out[m], dump);
    }
    return loss;
}

HyperboloidEmbedding fit_embeddings(const CausalGraph& graph, const EmbeddingConfig& cfg) {
    if (graph.M < 2) throw std::invalid_argument("fit_embeddings: need M >= 2");
    if (cfg.d < 2) throw std::invalid_argument("fit_embeddings: need d >= 2");

    SeededRng rng(cfg.seed);
    HyperboloidEmbedding emb;
    emb.points.assign(graph.M, std::vector<double>(cfg.d + 1, 0.0));
    for (auto& p : emb.points) {
        double tail = 0.0;
        for (std::size_t i = 1; i <= cfg.d; ++i) {
            p[i] = rng.normal() * 0.01;
            tail += p[i] * p[i];
        }
        p[0] = std::sqrt(1.0 + tail);
    }

    std::vector<std::vector<std::size_t>> positives(graph.M);
    for (std::size_t m = 0; m < graph.M; ++m) positives[m] = khop_positives(graph, m, cfg.k);
    emb.pi = pagerank(graph, cfg.w);

    std::vector<std::vector<double>> grads;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double loss = hyperbolic_loss(emb.points, graph, positives, emb.pi, cfg.lambda_g,
                                            grads, cfg.max_negatives);
        if (!std::isfinite(loss)) throw std::runtime_error("fit_embeddings: non-finite loss");
        emb.loss_history.push_back(loss);
        for (std::size_t m = 0; m < graph.M; ++m)
            emb.points[m] = rsgd_step(emb.points[m], grads[m], cfg.eta);
    }
    return emb;
}

} // namespace cape
