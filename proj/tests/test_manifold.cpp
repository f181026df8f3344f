#include "doctest.h"

#include <stdexcept>

#include <cmath>

#include "cape/manifold.hpp"
#include "cape/rng.hpp"

using namespace cape;

namespace {

std::vector<double> random_point(SeededRng& rng, std::size_t d, double scale = 0.8) {
    std::vector<double> p(d + 1, 0.0);
    double tail = 0.0;
    for (std::size_t i = 1; i <= d; ++i) {
        p[i] = rng.normal() * scale;
        tail += p[i] * p[i];
    }
    p[0] = std::sqrt(1.0 + tail);
    return p;
}

std::vector<double> random_tangent(SeededRng& rng, const std::vector<double>& p) {
    std::vector<double> u(p.size());
    for (double& x : u) x = rng.normal();
    std::vector<double> v = project_tangent(p, u);
    // cap the geodesic step: cosh of a long step amplifies roundoff past the
    // tolerances these tests assert
    const double len = std::sqrt(std::max(minkowski_inner(v, v), 0.0));
    if (len > 2.0)
        for (double& x : v) x *= 2.0 / len;
    return v;
}

} // namespace

TEST_CASE("minkowski products on hand examples") {
    CHECK(minkowski_inner({1, 0, 0}, {1, 0, 0}) == doctest::Approx(-1.0));
    CHECK(minkowski_inner({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(minkowski_inner({std::cosh(1.0), std::sinh(1.0)}, {1, 0}) ==
          doctest::Approx(-std::cosh(1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(minkowski_inner({1, 0}, {1, 0, 0}), std::invalid_argument);
}

TEST_CASE("distances along a geodesic through the apex add up") {
    const std::vector<double> origin{1, 0};
    CHECK(dist_hyperboloid(origin, origin) == doctest::Approx(0.0));
    const std::vector<double> p1{std::cosh(1.0), std::sinh(1.0)};
    CHECK(dist_hyperboloid(origin, p1) == doctest::Approx(1.0).epsilon(1e-12));
    const std::vector<double> a{std::cosh(0.5), std::sinh(0.5)};
    const std::vector<double> b{std::cosh(1.5), std::sinh(1.5)};
    CHECK(dist_hyperboloid(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tangent projection zeroes the lorentzian component") {
    const std::vector<double> origin{1, 0, 0};
    const std::vector<double> proj = project_tangent(origin, {3, 2, 1});
    CHECK(proj[0] == doctest::Approx(0.0));
    CHECK(proj[1] == doctest::Approx(2.0));
    CHECK(proj[2] == doctest::Approx(1.0));

    SeededRng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const std::vector<double> p = random_point(rng, 5);
        std::vector<double> u(6);
        for (double& x : u) x = rng.normal();
        const std::vector<double> t = project_tangent(p, u);
        CHECK(std::fabs(minkowski_inner(t, p)) < 1e-9);
        // idempotence on already-tangent vectors
        const std::vector<double> t2 = project_tangent(p, t);
        for (std::size_t i = 0; i < t.size(); ++i)
            CHECK(t2[i] == doctest::Approx(t[i]).epsilon(1e-12));
    }
}

TEST_CASE("exponential map closed form and length identity") {
    const std::vector<double> origin{1, 0, 0};
    const std::vector<double> same = exp_map(origin, {0, 0, 0});
    CHECK(same[0] == doctest::Approx(1.0));

    const std::vector<double> moved = exp_map(origin, {0, 1, 0});
    CHECK(moved[0] == doctest::Approx(std::cosh(1.0)).epsilon(1e-12));
    CHECK(moved[1] == doctest::Approx(std::sinh(1.0)).epsilon(1e-12));

    SeededRng rng(4);
    for (int rep = 0; rep < 100; ++rep) {
        const std::vector<double> p = random_point(rng, 4);
        const std::vector<double> v = random_tangent(rng, p);
        const double len = std::sqrt(std::max(minkowski_inner(v, v), 0.0));
        const std::vector<double> q = exp_map(p, v);
        CHECK(std::fabs(minkowski_inner(q, q) + 1.0) < 1e-8);
        CHECK(dist_hyperboloid(p, q) == doctest::Approx(len).epsilon(1e-8));
    }
}

TEST_CASE("gradient metric flip is an involution") {
    const std::vector<double> g{3, 2, 1};
    const std::vector<double> r = euclid_to_riemannian_grad(g);
    CHECK(r[0] == doctest::Approx(-3.0));
    CHECK(r[1] == doctest::Approx(2.0));
    const std::vector<double> back = euclid_to_riemannian_grad(r);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(back[i] == doctest::Approx(g[i]));
}

TEST_CASE("descent step preserves the sheet and has first-order length") {
    SeededRng rng(5);
    std::vector<double> p = random_point(rng, 4);
    for (int step = 0; step < 1000; ++step) {
        std::vector<double> g(5);
        for (double& x : g) x = rng.normal();
        p = rsgd_step(p, g, 1e-2);
        CHECK(std::fabs(minkowski_inner(p, p) + 1.0) < 1e-9);
    }

    // displacement / eta approaches the projected gradient norm as eta -> 0
    const std::vector<double> q = random_point(rng, 4);
    std::vector<double> g(5);
    for (double& x : g) x = rng.normal();
    const std::vector<double> tangent = project_tangent(q, euclid_to_riemannian_grad(g));
    const double tlen = std::sqrt(std::max(minkowski_inner(tangent, tangent), 0.0));
    const double eta = 1e-6;
    const std::vector<double> moved = rsgd_step(q, g, eta);
    CHECK(dist_hyperboloid(q, moved) / eta == doctest::Approx(tlen).epsilon(1e-4));

    const std::vector<double> still = rsgd_step(q, std::vector<double>(5, 0.0), 0.1);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(still[i] == doctest::Approx(q[i]));
}

TEST_CASE("ball map hand values and round trips") {
    const std::vector<double> origin{1, 0};
    CHECK(to_poincare(origin)[0] == doctest::Approx(0.0));
    const std::vector<double> back = from_poincare({0.0});
    CHECK(back[0] == doctest::Approx(1.0));
    CHECK(back[1] == doctest::Approx(0.0));

    const std::vector<double> p{std::cosh(1.0), std::sinh(1.0)};
    CHECK(to_poincare(p)[0] == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));

    SeededRng rng(6);
    for (int rep = 0; rep < 200; ++rep) {
        const std::vector<double> q = random_point(rng, 3);
        const std::vector<double> rt = from_poincare(to_poincare(q));
        for (std::size_t i = 0; i < q.size(); ++i)
            CHECK(std::fabs(rt[i] - q[i]) < 1e-10);
    }
    CHECK_THROWS_AS(from_poincare({1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("ball distance hand value and isometry with the sheet") {
    CHECK(dist_poincare({0.0, 0.0}, {0.0, 0.0}) == doctest::Approx(0.0));
    // |e| = 0.5 from the center: arcosh(5/3) = ln 3
    CHECK(dist_poincare({0.0, 0.0}, {0.5, 0.0}) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    SeededRng rng(7);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::vector<double> a = random_point(rng, 3);
        const std::vector<double> b = random_point(rng, 3);
        CHECK(std::fabs(dist_poincare(to_poincare(a), to_poincare(b)) -
                        dist_hyperboloid(a, b)) < 1e-9);
    }
}

TEST_CASE("triangle inequality and apex-distance identity") {
    SeededRng rng(8);
    const std::vector<double> origin{1, 0, 0, 0};
    for (int rep = 0; rep < 200; ++rep) {
        const std::vector<double> a = random_point(rng, 3);
        const std::vector<double> b = random_point(rng, 3);
        const std::vector<double> c = random_point(rng, 3);
        CHECK(dist_hyperboloid(a, c) <=
              dist_hyperboloid(a, b) + dist_hyperboloid(b, c) + 1e-9);
        CHECK(std::fabs(dist_hyperboloid(a, origin) - std::acosh(a[0])) < 1e-9);
    }
}
