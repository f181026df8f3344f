#include "cape/synthgen.hpp"

#include <cmath>
#include <stdexcept>

#include "cape/rng.hpp"

namespace cape {

WeightedDag gen_ba_dag(std::size_t M, std::size_t m_attach, std::uint64_t seed) {
    if (M < 2) throw std::invalid_argument("gen_ba_dag: M must be >= 2");
    if (m_attach < 1 || m_attach >= M)
        throw std::invalid_argument("gen_ba_dag: need 1 <= m_attach < M");

    SeededRng rng(seed);
    WeightedDag dag;
    dag.M = M;
    dag.adjacency = DenseMatrix(M, M);
    dag.topo_order.resize(M);
    for (std::size_t i = 0; i < M; ++i) dag.topo_order[i] = i;

    // one node per edge endpoint; sampling from this list is degree-proportional
    std::vector<std::size_t> endpoints;
    for (std::size_t v = m_attach; v < M; ++v) {
        std::vector<std::size_t> picked;
        while (picked.size() < m_attach) {
            std::size_t u;
            if (endpoints.empty()) {
                u = rng.index(v);
            } else {
                u = endpoints[rng.index(endpoints.size())];
            }
            bool dup = false;
            for (std::size_t p : picked) dup |= (p == u);
            if (!dup) picked.push_back(u);
        }
        for (std::size_t u : picked) {
            dag.adjacency(u, v) = 1.0;
            endpoints.push_back(u);
            endpoints.push_back(v);
        }
    }
    return dag;
}

WeightedDag assign_weights(WeightedDag dag, double lo, double hi, std::uint64_t seed) {
    if (lo <= 0.0 || lo > hi) throw std::invalid_argument("assign_weights: need 0 < lo <= hi");
    SeededRng rng(seed);
    for (std::size_t i = 0; i < dag.M; ++i)
        for (std::size_t j = 0; j < dag.M; ++j) {
            if (dag.adjacency(i, j) == 0.0) continue;
            const double mag = rng.uniform(lo, hi);
            const double sign = (rng.next_double() < 0.5) ? -1.0 : 1.0;
            dag.adjacency(i, j) = sign * mag;
        }
    return dag;
}

namespace {

std::vector<std::size_t> topo_sort_or_throw(const DenseMatrix& a) {
    const std::size_t m = a.rows();
    std::vector<std::size_t> indeg(m, 0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (a(i, j) != 0.0) ++indeg[j];
    std::vector<std::size_t> order;
    std::vector<std::size_t> ready;
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
    if (order.size() != m) throw std::invalid_argument("simulate_sem: input graph has a cycle");
    return order;
}

} // namespace

DenseMatrix simulate_sem(const WeightedDag& dag, std::size_t N, std::uint64_t seed,
                         const SemOptions& opts) {
    if (N < 1) throw std::invalid_argument("simulate_sem: N must be >= 1");
    const std::size_t M = dag.M;
    const std::vector<std::size_t> order = topo_sort_or_throw(dag.adjacency);

    SeededRng rng(seed);
    DenseMatrix x(N, M);
    for (std::size_t j : order) {
        std::vector<std::size_t> parents;
        for (std::size_t i = 0; i < M; ++i)
            if (dag.adjacency(i, j) != 0.0) parents.push_back(i);

        if (parents.empty()) {
            for (std::size_t r = 0; r < N; ++r) x(r, j) = rng.normal();
            continue;
        }

        Mlp net({parents.size(), opts.hidden, 1}, opts.act);
        if (opts.unit_weights) {
            for (auto& w : net.layer_weights())
                for (double& v : w.data()) v = 1.0;
        } else {
            // unit-variance internal weights: the assignment signal must not
            // drown in the additive unit noise
            for (auto& w : net.layer_weights())
                for (double& v : w.data()) v = rng.normal();
        }

        DenseMatrix in(N, parents.size());
        for (std::size_t r = 0; r < N; ++r)
            for (std::size_t p = 0; p < parents.size(); ++p)
                in(r, p) = dag.adjacency(parents[p], j) * x(r, parents[p]);
        DenseMatrix out = net.forward(in);
        for (std::size_t r = 0; r < N; ++r) x(r, j) = out(r, 0) + rng.normal();
    }
    if (!x.is_finite()) throw std::runtime_error("simulate_sem: non-finite sample produced");
    return x;
}

} // namespace cape
