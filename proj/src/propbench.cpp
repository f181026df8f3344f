#include "cape/propbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

#include "cape/matrix.hpp"
#include "cape/rng.hpp"
#include "cape/rotary.hpp"

namespace cape {

namespace {

constexpr std::size_t kDim = 128;   // query/key width
constexpr std::size_t kHalf = 64;   // encoding dimension

std::vector<double> gauss_vec(SeededRng& rng, std::size_t n, double std_dev = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal() * std_dev;
    return v;
}

double norm2(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

// two random orthonormal directions in R^kHalf
void orthonormal_pair(SeededRng& rng, std::vector<double>& w, std::vector<double>& u) {
    w = gauss_vec(rng, kHalf);
    u = gauss_vec(rng, kHalf);
    double nw = norm2(w);
    for (double& x : w) x /= nw;
    double dot = 0.0;
    for (std::size_t i = 0; i < kHalf; ++i) dot += w[i] * u[i];
    for (std::size_t i = 0; i < kHalf; ++i) u[i] -= dot * w[i];
    double nu = norm2(u);
    for (double& x : u) x /= nu;
}

// chord length between two norm-r points at Poincare distance dp
double chord_for(double dp, double r) {
    return (1.0 - r * r) * std::sqrt(0.5 * (std::cosh(dp) - 1.0));
}

// symmetric placement: e_m/e_n = a*w +/- (s/2)*u
bool place_pair(double dp, double r, const std::vector<double>& w, const std::vector<double>& u,
                std::vector<double>& em, std::vector<double>& en) {
    const double s = chord_for(dp, r);
    if (s > 2.0 * r) return false;
    const double a = std::sqrt(std::max(r * r - 0.25 * s * s, 0.0));
    em.assign(kHalf, 0.0);
    en.assign(kHalf, 0.0);
    for (std::size_t i = 0; i < kHalf; ++i) {
        em[i] = a * w[i] + 0.5 * s * u[i];
        en[i] = a * w[i] - 0.5 * s * u[i];
    }
    return true;
}

std::vector<double> random_ball_point(SeededRng& rng, double lo, double hi) {
    std::vector<double> e = gauss_vec(rng, kHalf);
    const double target = rng.uniform(lo, hi);
    const double n = norm2(e);
    for (double& x : e) x *= target / n;
    return e;
}

bool clamp_ball(std::vector<double>& e) {
    const double n = norm2(e);
    if (n < 1.0 - 1e-6) return false;
    const double f = (1.0 - 1e-6) / n;
    for (double& x : e) x *= f;
    return true;
}

} // namespace

void write_report(const PropertyReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string csv_path = out_dir + "/" + report.name + ".csv";
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write " + csv_path);
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
        if (c) csv << ',';
        csv << report.columns[c];
    }
    csv << '\n';
    for (const auto& row : report.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) csv << ',';
            csv << format_double(row[c]);
        }
        csv << '\n';
    }
    csv.close();

    nlohmann::json verdict;
    verdict["experiment"] = report.name;
    verdict["pass"] = report.pass;
    verdict["rows"] = report.rows.size();
    verdict["notes"] = report.notes;
    std::ofstream js(out_dir + "/" + report.name + "_verdict.json");
    js << verdict.dump(2) << '\n';
}

PropertyReport attenuation_surface(std::uint64_t seed, const std::vector<double>& dp_grid,
                                   const std::vector<double>& norm_grid) {
    if (dp_grid.empty() || norm_grid.empty())
        throw std::invalid_argument("attenuation_surface: empty grid");
    SeededRng rng(seed);
    const std::vector<double> q = gauss_vec(rng, kDim);
    const std::vector<double> k = gauss_vec(rng, kDim);
    std::vector<double> w, u;
    orthonormal_pair(rng, w, u);

    PropertyReport rep;
    rep.name = "attenuation_surface";
    rep.columns = {"poincare_distance", "norm", "chord", "feasible", "upper_bound", "seed"};
    std::size_t skipped = 0;

    // values[r_index][dp_index]; NaN marks infeasible
    std::vector<std::vector<double>> values(norm_grid.size(),
                                            std::vector<double>(dp_grid.size(),
                                                                std::numeric_limits<double>::quiet_NaN()));
    for (std::size_t ri = 0; ri < norm_grid.size(); ++ri)
        for (std::size_t di = 0; di < dp_grid.size(); ++di) {
            const double r = norm_grid[ri];
            const double dp = dp_grid[di];
            std::vector<double> em, en;
            const bool ok = place_pair(dp, r, w, u, em, en);
            double bound = 0.0;
            if (ok) {
                const auto phi_m = angles_from_poincare(em);
                const auto phi_n = angles_from_poincare(en);
                bound = score_bounds(q, k, phi_m, phi_n).second;
                values[ri][di] = bound;
            } else {
                ++skipped;
            }
            rep.rows.push_back({dp, r, chord_for(dp, r), ok ? 1.0 : 0.0, bound,
                                static_cast<double>(seed)});
        }

    bool pass = true;
    for (std::size_t ri = 0; ri < norm_grid.size(); ++ri) {
        double prev = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t di = 0; di < dp_grid.size(); ++di) {
            const double v = values[ri][di];
            if (std::isnan(v)) continue;
            if (!std::isnan(prev) && v > prev + 1e-9) pass = false;
            prev = v;
        }
    }
    // larger norm = lower generality; scanning r upward the bound must not drop
    for (std::size_t di = 0; di < dp_grid.size(); ++di) {
        double prev = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t ri = 0; ri < norm_grid.size(); ++ri) {
            const double v = values[ri][di];
            if (std::isnan(v)) continue;
            if (!std::isnan(prev) && v < prev - 1e-9) pass = false;
            prev = v;
        }
    }
    rep.pass = pass;
    if (skipped > 0)
        rep.notes.push_back("skipped " + std::to_string(skipped) +
                            " infeasible (distance, norm) cells");
    return rep;
}

PropertyReport collinear_monotonicity_check(std::uint64_t seed, double c, std::size_t trials) {
    if (c == 0.0) throw std::invalid_argument("collinear_monotonicity_check: c must be nonzero");
    PropertyReport rep;
    rep.name = std::string("collinear_monotonicity_") + (c > 0.0 ? "pos" : "neg");
    rep.columns = {"trial", "violations", "path_points", "seed"};

    const double sgn = (c > 0.0) ? 1.0 : -1.0;
    std::size_t total_violations = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = SeededRng::derive(seed, t);
        SeededRng rng(trial_seed);
        const std::vector<double> q = gauss_vec(rng, kDim);
        std::vector<double> k = q;
        for (double& x : k) x *= c;
        const double r = rng.uniform(0.5, 0.9);
        std::vector<double> w, u;
        orthonormal_pair(rng, w, u);

        std::vector<double> scores;
        for (int i = 0; i < 10; ++i) {
            const double dp = 1.0 + 4.0 * static_cast<double>(i) / 9.0;
            std::vector<double> em, en;
            if (!place_pair(dp, r, w, u, em, en)) continue;
            scores.push_back(attention_score(q, k, angles_from_poincare(em),
                                             angles_from_poincare(en)));
        }
        std::size_t violations = 0;
        for (std::size_t i = 1; i < scores.size(); ++i)
            if (sgn * (scores[i] - scores[i - 1]) > 1e-9) ++violations;
        total_violations += violations;
        rep.rows.push_back({static_cast<double>(t), static_cast<double>(violations),
                            static_cast<double>(scores.size()), static_cast<double>(trial_seed)});
    }
    rep.pass = (total_violations == 0);
    return rep;
}

RobustnessSamples robustness_trial(std::size_t N, double sigma, std::size_t T,
                                   std::uint64_t seed) {
    if (N < 1 || sigma < 0.0) throw std::invalid_argument("robustness_trial: bad parameters");
    SeededRng pair_rng(SeededRng::derive(seed, 0));
    const std::vector<double> em = random_ball_point(pair_rng, 0.3, 0.7);
    const std::vector<double> en = random_ball_point(pair_rng, 0.3, 0.7);
    const auto phi_m = angles_from_poincare(em);
    const auto phi_n = angles_from_poincare(en);

    RobustnessSamples out;
    out.xi.reserve(T);
    double s_acc = 0.0;
    for (std::size_t rep = 0; rep < T; ++rep) {
        SeededRng rng(SeededRng::derive(seed, rep + 1));
        double xi = 0.0;
        double s_rep = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const std::vector<double> q = gauss_vec(rng, kDim);
            const std::vector<double> k = gauss_vec(rng, kDim);
            std::vector<double> em2 = em, en2 = en;
            for (double& x : em2) x += rng.normal() * sigma;
            for (double& x : en2) x += rng.normal() * sigma;
            if (clamp_ball(em2)) ++out.clamped;
            if (clamp_ball(en2)) ++out.clamped;
            const double base = attention_score(q, k, phi_m, phi_n);
            const double noisy = attention_score(q, k, angles_from_poincare(em2),
                                                 angles_from_poincare(en2));
            xi += noisy - base;
            const double nq = norm2(q) * norm2(k);
            s_rep += nq * nq;
        }
        out.xi.push_back(xi / static_cast<double>(N));
        s_acc += s_rep / static_cast<double>(N);
    }
    out.s_mean = s_acc / static_cast<double>(T);
    return out;
}

namespace {

double sample_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

} // namespace

PropertyReport robustness_report(const std::vector<double>& sigmas, std::uint64_t seed) {
    PropertyReport rep;
    rep.name = "robustness_concentration";
    rep.columns = {"sigma",      "N",          "std_xi",     "exceed_0.5", "bound_0.5",
                   "exceed_1.0", "bound_1.0",  "clamped",    "seed"};
    const std::size_t T = 100;
    const std::vector<std::size_t> n_grid = {1, 5, 20, 100};
    bool pass = true;
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        const double sigma = sigmas[si];
        double std_first = 0.0, std_last = 0.0;
        for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
            const std::size_t n = n_grid[ni];
            const std::uint64_t run_seed = SeededRng::derive(seed, si * 100 + ni);
            const RobustnessSamples s = robustness_trial(n, sigma, T, run_seed);
            const double sd = sample_std(s.xi);
            if (ni == 0) std_first = sd;
            if (ni + 1 == n_grid.size()) std_last = sd;

            double row[2][2] = {{0, 0}, {0, 0}}; // [eps][exceed/bound]
            const double eps_list[2] = {0.5, 1.0};
            for (int e = 0; e < 2; ++e) {
                const double eps = eps_list[e];
                std::size_t exceed = 0;
                for (double x : s.xi)
                    if (std::fabs(x) >= eps) ++exceed;
                row[e][0] = static_cast<double>(exceed) / static_cast<double>(T);
                row[e][1] = std::min(
                    2.0 * std::exp(-eps * eps * static_cast<double>(n) / (8.0 * s.s_mean)), 1.0);
                if (row[e][0] > row[e][1] + 0.02) pass = false;
            }
            rep.rows.push_back({sigma, static_cast<double>(n), sd, row[0][0], row[0][1],
                                row[1][0], row[1][1], static_cast<double>(s.clamped),
                                static_cast<double>(run_seed)});
        }
        if (!(std_last < std_first)) pass = false;
    }
    rep.pass = pass;
    return rep;
}

UnbiasednessResult unbiasedness_check(double sigma_m, double sigma_n, std::size_t trials,
                                      std::uint64_t seed) {
    if (sigma_m < 0.0 || sigma_n < 0.0)
        throw std::invalid_argument("unbiasedness_check: negative std");
    SeededRng rng(seed);
    const std::vector<double> q = gauss_vec(rng, kDim);
    const std::vector<double> k = gauss_vec(rng, kDim);
    const auto phi_m = angles_from_poincare(random_ball_point(rng, 0.3, 0.7));
    const auto phi_n = angles_from_poincare(random_ball_point(rng, 0.3, 0.7));

    // closed form: per-pair damping of both the cos and sin terms
    const double damp = std::exp(-0.5 * (sigma_m * sigma_m + sigma_n * sigma_n));
    double analytic = 0.0;
    for (std::size_t t = 0; t < kHalf; ++t) {
        const double alpha = q[2 * t] * k[2 * t] + q[2 * t + 1] * k[2 * t + 1];
        const double beta = q[2 * t + 1] * k[2 * t] - q[2 * t] * k[2 * t + 1];
        const double delta = phi_n[t] - phi_m[t];
        analytic += damp * (alpha * std::cos(delta) + beta * std::sin(delta));
    }

    double mc = 0.0;
    std::vector<double> pm(kHalf), pn(kHalf);
    for (std::size_t i = 0; i < trials; ++i) {
        for (std::size_t t = 0; t < kHalf; ++t) {
            pm[t] = phi_m[t] + rng.normal() * sigma_m;
            pn[t] = phi_n[t] + rng.normal() * sigma_n;
        }
        mc += attention_score(q, k, pm, pn);
    }
    mc /= static_cast<double>(trials);

    UnbiasednessResult res;
    res.mc_mean = mc;
    res.analytic = analytic;
    res.rel_error = std::fabs(mc - analytic) / std::max(std::fabs(analytic), 1e-12);
    return res;
}

PropertyReport accuracy_surface(const std::vector<double>& sigma_grid) {
    PropertyReport rep;
    rep.name = "accuracy_surface";
    rep.columns = {"sigma_m", "sigma_n", "accuracy"};
    double min_acc = 1.0;
    const double limit = std::numbers::pi / 12.0 + 1e-12;
    for (double sm : sigma_grid)
        for (double sn : sigma_grid) {
            if (sm < 0.0 || sm > limit || sn < 0.0 || sn > limit)
                throw std::invalid_argument("accuracy_surface: sigma outside [0, pi/12]");
            const double acc = std::exp(-0.5 * (sm * sm + sn * sn));
            min_acc = std::min(min_acc, acc);
            rep.rows.push_back({sm, sn, acc});
        }
    rep.pass = true;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "surface minimum %.6f; the commonly quoted 93.8%% floor overstates the "
                  "computed exp(-(pi/12)^2) = 0.933764 by about 0.4 points",
                  min_acc);
    rep.notes.push_back(buf);
    return rep;
}

PropertyReport distinguishability_check(std::size_t trials, double emb_noise_std, double pos_std,
                                        std::uint64_t seed) {
    if (trials < 1000)
        throw std::invalid_argument("distinguishability_check: need at least 1000 trials");
    SeededRng rng(seed);
    const std::vector<double> em = random_ball_point(rng, 0.3, 0.6);
    const std::vector<double> en = random_ball_point(rng, 0.3, 0.6);

    std::vector<double> gaps(trials);
    for (std::size_t i = 0; i < trials; ++i) {
        const std::vector<double> vm = gauss_vec(rng, kDim);
        const std::vector<double> vn = gauss_vec(rng, kDim);
        std::vector<double> vm_noisy = vm;
        for (double& x : vm_noisy) x += rng.normal() * emb_noise_std;

        std::vector<double> em2 = em, en2 = en;
        for (double& x : em2) x += rng.normal() * pos_std;
        for (double& x : en2) x += rng.normal() * pos_std;
        clamp_ball(em2);
        clamp_ball(en2);
        const auto pm = angles_from_poincare(em2);
        const auto pn = angles_from_poincare(en2);
        gaps[i] = attention_score(vm, vm_noisy, pm, pn) - attention_score(vm, vn, pm, pn);
    }

    double mean = 0.0;
    for (double g : gaps) mean += g;
    mean /= static_cast<double>(trials);

    SeededRng boot_rng(SeededRng::derive(seed, 1));
    const std::size_t resamples = 10000;
    std::vector<double> boot_means(resamples);
    for (std::size_t b = 0; b < resamples; ++b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < trials; ++i) acc += gaps[boot_rng.index(trials)];
        boot_means[b] = acc / static_cast<double>(trials);
    }
    std::sort(boot_means.begin(), boot_means.end());
    const double q01 = boot_means[resamples / 100];

    PropertyReport rep;
    rep.name = "distinguishability";
    rep.columns = {"trials", "mean_gap", "bootstrap_q01", "seed"};
    rep.rows.push_back({static_cast<double>(trials), mean, q01, static_cast<double>(seed)});
    rep.pass = (q01 > 0.0);
    return rep;
}

bool run_property_bench(const std::string& out_dir, std::uint64_t seed) {
    std::vector<double> dp_grid(20), norm_grid(20);
    for (std::size_t i = 0; i < 20; ++i) {
        dp_grid[i] = 1.0 + 4.0 * static_cast<double>(i) / 19.0;
        norm_grid[i] = 0.05 + 0.9 * static_cast<double>(i) / 19.0;
    }

    std::vector<PropertyReport> reports;
    reports.push_back(attenuation_surface(SeededRng::derive(seed, 10), dp_grid, norm_grid));
    reports.push_back(collinear_monotonicity_check(SeededRng::derive(seed, 11), 1.0, 50));
    reports.push_back(collinear_monotonicity_check(SeededRng::derive(seed, 12), -1.0, 50));
    reports.push_back(robustness_report({0.1, 0.2, 0.3}, SeededRng::derive(seed, 13)));

    {
        PropertyReport rep;
        rep.name = "unbiasedness";
        rep.columns = {"sigma_m", "sigma_n", "mc_mean", "analytic", "rel_error", "seed"};
        const double pi12 = std::numbers::pi / 12.0;
        const double combos[3][2] = {{0.0, 0.0}, {0.5 * pi12, 0.5 * pi12}, {pi12, pi12}};
        bool pass = true;
        for (const auto& c : combos) {
            const std::uint64_t s = SeededRng::derive(seed, 14);
            const UnbiasednessResult r = unbiasedness_check(c[0], c[1], 100000, s);
            if (r.rel_error >= 0.02) pass = false;
            rep.rows.push_back({c[0], c[1], r.mc_mean, r.analytic, r.rel_error,
                                static_cast<double>(s)});
        }
        rep.pass = pass;
        reports.push_back(rep);
    }

    {
        std::vector<double> sigma_grid(9);
        for (std::size_t i = 0; i < 9; ++i)
            sigma_grid[i] = (std::numbers::pi / 12.0) * static_cast<double>(i) / 8.0;
        reports.push_back(accuracy_surface(sigma_grid));
    }

    reports.push_back(distinguishability_check(10000, 0.1, 0.05, SeededRng::derive(seed, 15)));

    bool all = true;
    for (const auto& rep : reports) {
        write_report(rep, out_dir);
        all = all && rep.pass;
    }
    return all;
}

} // namespace cape
