#include "doctest.h"

#include <stdexcept>

#include <cmath>

#include "cape/attnlayer.hpp"
#include "cape/rng.hpp"

using namespace cape;

namespace {

DenseMatrix random_square(SeededRng& rng, std::size_t n) {
    DenseMatrix m(n, n);
    for (double& v : m.data()) v = rng.normal() / std::sqrt(static_cast<double>(n));
    return m;
}

} // namespace

TEST_CASE("binning hand cases") {
    const std::vector<double> edges{0.0, 1.0, 2.0};
    CHECK(bin_value(0.0, edges) == 0);
    CHECK(bin_value(-3.0, edges) == 0);
    CHECK(bin_value(0.5, edges) == 1);
    CHECK(bin_value(1.5, edges) == 2);
    CHECK(bin_value(99.0, edges) == 2);
    CHECK_THROWS_AS(bin_value(std::numeric_limits<double>::quiet_NaN(), edges),
                    std::invalid_argument);
}

TEST_CASE("quantile edges are strictly ascending") {
    SeededRng rng(1);
    DenseMatrix data(100, 5);
    for (double& v : data.data()) v = rng.normal();
    const std::vector<double> edges = quantile_edges(data, 10);
    REQUIRE(edges.size() == 11);
    for (std::size_t k = 1; k < edges.size(); ++k) CHECK(edges[k] > edges[k - 1]);
}

TEST_CASE("codebook lookup is deterministic") {
    const Codebook cb = make_codebook({0.0, 1.0, 2.0}, 4, 42);
    CHECK(cb.bins() == 2);
    const std::vector<double> row{0.0, 0.5, 0.5, 3.0};
    const DenseMatrix e1 = contextual_embed(cb, row);
    const DenseMatrix e2 = contextual_embed(cb, row);
    for (std::size_t k = 0; k < e1.data().size(); ++k) CHECK(e1.data()[k] == e2.data()[k]);
    // equal measurements share an embedding, zero maps to the reserved row
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(e1(1, c) == e1(2, c));
        CHECK(e1(0, c) == cb.table(0, c));
    }
    CHECK_THROWS_AS(make_codebook({1.0, 0.5}, 4, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_codebook({0.0, 1.0}, 3, 0), std::invalid_argument);
}

TEST_CASE("fusion is the block rotation") {
    const std::vector<double> v{1.0, 0.0, 0.5, 0.5};
    const std::vector<double> same = fuse(v, {0.0, 0.0});
    for (std::size_t i = 0; i < 4; ++i) CHECK(same[i] == doctest::Approx(v[i]));
    const std::vector<double> turned = fuse(v, {0.3, -0.2});
    double n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        n1 += v[i] * v[i];
        n2 += turned[i] * turned[i];
    }
    CHECK(std::fabs(n1 - n2) < 1e-12);
    const std::vector<double> back = fuse(turned, {-0.3, 0.2});
    for (std::size_t i = 0; i < 4; ++i) CHECK(back[i] == doctest::Approx(v[i]).epsilon(1e-12));
}

TEST_CASE("single-feature attention is trivial") {
    SeededRng rng(2);
    DenseMatrix emb(1, 4);
    for (double& v : emb.data()) v = rng.normal();
    const DenseMatrix w = random_square(rng, 4);
    const AttentionOutput out =
        attention_layer(emb, {{0.1, -0.2}}, w, w, w, true);
    CHECK(out.attention(0, 0) == doctest::Approx(1.0));
    const DenseMatrix expect = emb * w.transpose();
    for (std::size_t c = 0; c < 4; ++c)
        CHECK(out.outputs(0, c) == doctest::Approx(expect(0, c)).epsilon(1e-12));
}

TEST_CASE("equal angles reproduce the position-free layer exactly") {
    SeededRng rng(3);
    DenseMatrix emb(4, 6);
    for (double& v : emb.data()) v = rng.normal();
    const DenseMatrix w_q = random_square(rng, 6), w_k = random_square(rng, 6),
                      w_v = random_square(rng, 6);
    const std::vector<double> shared{0.4, -0.1, 0.25};
    const AttentionOutput with_pos =
        attention_layer(emb, {shared, shared, shared, shared}, w_q, w_k, w_v, true);
    const std::vector<double> zero(3, 0.0);
    const AttentionOutput no_pos =
        attention_layer(emb, {zero, zero, zero, zero}, w_q, w_k, w_v, true);
    for (std::size_t k = 0; k < with_pos.attention.data().size(); ++k)
        CHECK(with_pos.attention.data()[k] == no_pos.attention.data()[k]);
}

TEST_CASE("softmax rows are stochastic and position alone can differentiate") {
    SeededRng rng(4);
    DenseMatrix emb(3, 6);
    std::vector<double> shared_row(6);
    for (double& v : shared_row) v = rng.normal();
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 6; ++c) emb(r, c) = shared_row[c];

    const DenseMatrix w_q = random_square(rng, 6), w_k = random_square(rng, 6),
                      w_v = random_square(rng, 6);
    std::vector<std::vector<double>> angles(3, std::vector<double>(3));
    for (auto& a : angles)
        for (double& x : a) x = rng.uniform(-0.7, 0.7);

    const AttentionOutput out = attention_layer(emb, angles, w_q, w_k, w_v, true);
    double max_entry = 0.0;
    for (std::size_t r = 0; r < 3; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            sum += out.attention(r, c);
            CHECK(out.attention(r, c) > 0.0);
            CHECK(out.attention(r, c) < 1.0);
            max_entry = std::max(max_entry, out.attention(r, c));
        }
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
    CHECK(max_entry > 1.0 / 3.0 + 1e-3);
}

TEST_CASE("permuting features with their angles permutes the outputs") {
    SeededRng rng(5);
    DenseMatrix emb(3, 4);
    for (double& v : emb.data()) v = rng.normal();
    const DenseMatrix w_q = random_square(rng, 4), w_k = random_square(rng, 4),
                      w_v = random_square(rng, 4);
    std::vector<std::vector<double>> angles(3, std::vector<double>(2));
    for (auto& a : angles)
        for (double& x : a) x = rng.uniform(-0.6, 0.6);

    const AttentionOutput base = attention_layer(emb, angles, w_q, w_k, w_v, true);

    const std::vector<std::size_t> perm{2, 0, 1};
    DenseMatrix emb_p(3, 4);
    std::vector<std::vector<double>> angles_p(3);
    for (std::size_t r = 0; r < 3; ++r) {
        angles_p[r] = angles[perm[r]];
        for (std::size_t c = 0; c < 4; ++c) emb_p(r, c) = emb(perm[r], c);
    }
    const AttentionOutput moved = attention_layer(emb_p, angles_p, w_q, w_k, w_v, true);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(moved.outputs(r, c) == doctest::Approx(base.outputs(perm[r], c)));
}

TEST_CASE("aggregation modes") {
    DenseMatrix rows(2, 3);
    rows(0, 0) = 1.0; rows(0, 1) = -2.0; rows(0, 2) = 0.5;
    rows(1, 0) = -1.0; rows(1, 1) = 2.0; rows(1, 2) = -0.5;
    const std::vector<double> mean = aggregate(rows, false);
    for (double v : mean) CHECK(v == doctest::Approx(0.0));
    const std::vector<double> mx = aggregate(rows, true);
    CHECK(mx[0] == doctest::Approx(1.0));
    CHECK(mx[1] == doctest::Approx(2.0));
    for (std::size_t c = 0; c < 3; ++c) CHECK(mx[c] >= mean[c]);

    DenseMatrix single(1, 3);
    single(0, 1) = 4.0;
    CHECK(aggregate(single, false)[1] == doctest::Approx(4.0));
    CHECK_THROWS_AS(aggregate(DenseMatrix(), false), std::invalid_argument);
}
