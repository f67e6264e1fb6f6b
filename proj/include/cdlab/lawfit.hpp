// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

namespace cdlab::lawfit {

/// One (parameters, tokens, loss) observation.
struct DataPoint {
    double n_params = 0.0;
    double tokens = 0.0;
    double loss = 0.0;
};

/// Saturating power law L(N, D) = A N^-alpha + B D^-beta + E.
struct LawParams {
    double A = 0.0;
    double alpha = 0.0;
    double B = 0.0;
    double beta = 0.0;
    double E = 0.0;
};

inline double predict(const LawParams& p, double n_params, double tokens) {
    if (!(n_params > 0.0) || !(tokens > 0.0)) {
        throw std::domain_error("predict: N and D must be positive");
    }
    return p.A * std::pow(n_params, -p.alpha) + p.B * std::pow(tokens, -p.beta) + p.E;
}

struct FitOptions {
    int n_restarts = 40;      // grid starts refined with L-BFGS, best-first
    double huber_delta = 1e-3;
    int max_iters = 500;      // L-BFGS iterations per restart
    double tolerance = 1e-10; // gradient infinity-norm stopping threshold
};

struct FitReport {
    LawParams params;
    double objective = 0.0;
    std::vector<double> residuals; // log L_i - log prediction_i, input order
    int n_restarts_used = 0;
    bool degenerate_span = false; // fewer than 2 distinct N or D values
};

namespace detail {

// Internal parameter vector theta = (a, b, e, alpha, beta) with
// A = exp(a), B = exp(b), E = exp(e), so positivity is structural.
using Theta = std::array<double, 5>;

inline double logsumexp3(double x, double y, double z, double* s = nullptr) {
    const double m = std::max({x, y, z});
    const double ex = std::exp(x - m);
    const double ey = std::exp(y - m);
    const double ez = std::exp(z - m);
    const double sum = ex + ey + ez;
    if (s) {
        s[0] = ex / sum;
        s[1] = ey / sum;
        s[2] = ez / sum;
    }
    return m + std::log(sum);
}

struct Objective {
    std::vector<double> log_n;
    std::vector<double> log_d;
    std::vector<double> log_l;
    double delta = 1e-3;

    double value_grad(const Theta& t, Theta* grad) const {
        double obj = 0.0;
        if (grad) grad->fill(0.0);
        for (std::size_t i = 0; i < log_n.size(); ++i) {
            double s[3];
            const double pred = logsumexp3(t[0] - t[3] * log_n[i], t[1] - t[4] * log_d[i],
                                           t[2], s);
            const double r = log_l[i] - pred;
            const double ar = std::abs(r);
            double dpsi; // d huber / d r
            if (ar <= delta) {
                obj += 0.5 * r * r;
                dpsi = r;
            } else {
                obj += delta * (ar - 0.5 * delta);
                dpsi = r > 0.0 ? delta : -delta;
            }
            if (grad) {
                // d r / d theta = - d pred / d theta
                (*grad)[0] += dpsi * -s[0];
                (*grad)[1] += dpsi * -s[1];
                (*grad)[2] += dpsi * -s[2];
                (*grad)[3] += dpsi * s[0] * log_n[i];
                (*grad)[4] += dpsi * s[1] * log_d[i];
            }
        }
        return obj;
    }
};

inline bool theta_less(const Theta& a, const Theta& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
}

inline double logaddexp(double x, double y) {
    const double m = std::max(x, y);
    return m + std::log1p(std::exp(std::min(x, y) - m));
}

/// Compact L-BFGS with Armijo backtracking. Never accepts an ascent step, so
/// the refined objective is at most the start value.
inline std::pair<Theta, double> lbfgs(const Objective& fn, Theta x, int max_iters, double tol) {
    constexpr int history = 8;
    std::vector<Theta> s_hist, y_hist;
    std::vector<double> rho_hist;
    Theta g{};
    double f = fn.value_grad(x, &g);
    for (int iter = 0; iter < max_iters; ++iter) {
        double gmax = 0.0;
        for (double gi : g) gmax = std::max(gmax, std::abs(gi));
        if (gmax < tol) break;

        // Two-loop recursion for the search direction.
        Theta q = g;
        std::vector<double> alpha_i(s_hist.size());
        for (std::size_t k = s_hist.size(); k-- > 0;) {
            double dot = 0.0;
            for (std::size_t j = 0; j < 5; ++j) dot += s_hist[k][j] * q[j];
            alpha_i[k] = rho_hist[k] * dot;
            for (std::size_t j = 0; j < 5; ++j) q[j] -= alpha_i[k] * y_hist[k][j];
        }
        double gamma = 1.0;
        if (!s_hist.empty()) {
            double sy = 0.0, yy = 0.0;
            for (std::size_t j = 0; j < 5; ++j) {
                sy += s_hist.back()[j] * y_hist.back()[j];
                yy += y_hist.back()[j] * y_hist.back()[j];
            }
            if (yy > 0.0) gamma = sy / yy;
        }
        Theta p;
        for (std::size_t j = 0; j < 5; ++j) p[j] = gamma * q[j];
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            double dot = 0.0;
            for (std::size_t j = 0; j < 5; ++j) dot += y_hist[k][j] * p[j];
            const double beta = rho_hist[k] * dot;
            for (std::size_t j = 0; j < 5; ++j) p[j] += s_hist[k][j] * (alpha_i[k] - beta);
        }
        for (double& pj : p) pj = -pj;

        double gp = 0.0;
        for (std::size_t j = 0; j < 5; ++j) gp += g[j] * p[j];
        if (gp >= 0.0) { // not a descent direction; fall back to steepest descent
            for (std::size_t j = 0; j < 5; ++j) p[j] = -g[j];
            gp = 0.0;
            for (std::size_t j = 0; j < 5; ++j) gp -= g[j] * g[j];
        }

        double step = 1.0;
        Theta x_new{};
        Theta g_new{};
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t j = 0; j < 5; ++j) x_new[j] = x[j] + step * p[j];
            f_new = fn.value_grad(x_new, &g_new);
            if (f_new <= f + 1e-4 * step * gp) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Theta s_vec, y_vec;
        double sy = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            s_vec[j] = x_new[j] - x[j];
            y_vec[j] = g_new[j] - g[j];
            sy += s_vec[j] * y_vec[j];
        }
        if (sy > 1e-14) {
            s_hist.push_back(s_vec);
            y_hist.push_back(y_vec);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > history) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }
        const bool stalled = f - f_new < 1e-16 * (1.0 + std::abs(f));
        x = x_new;
        g = g_new;
        f = f_new;
        if (stalled) break;
    }
    return {x, f};
}

} // namespace detail

/// Fits the law by Huber regression on log-loss with a logsumexp
/// parameterization, refined from a fixed grid of starts. Deterministic:
/// ties between restarts break by objective, then by lexicographically
/// smallest parameter vector.
inline FitReport fit(const std::vector<DataPoint>& points, const FitOptions& options = {}) {
    if (points.size() < 5) {
        throw std::domain_error("fit: need at least 5 points for 5 parameters");
    }
    if (options.n_restarts < 1) throw std::domain_error("fit: n_restarts must be >= 1");
    if (!(options.huber_delta > 0.0)) throw std::domain_error("fit: huber_delta must be > 0");

    detail::Objective fn;
    fn.delta = options.huber_delta;
    std::set<double> distinct_n, distinct_d;
    for (const DataPoint& p : points) {
        if (!(p.n_params > 0.0 && p.tokens > 0.0 && p.loss > 0.0)) {
            throw std::domain_error("fit: all observations must be strictly positive");
        }
        fn.log_n.push_back(std::log(p.n_params));
        fn.log_d.push_back(std::log(p.tokens));
        fn.log_l.push_back(std::log(p.loss));
        distinct_n.insert(p.n_params);
        distinct_d.insert(p.tokens);
    }

    // Fixed multi-start grid in (a, b, e) x (alpha, beta).
    static constexpr std::array<double, 6> kLogCoeffGrid = {0.0, 5.0, 10.0, 15.0, 20.0, 25.0};
    static constexpr std::array<double, 5> kExponentGrid = {0.0, 0.5, 1.0, 1.5, 2.0};
    std::vector<std::pair<double, detail::Theta>> starts;
    starts.reserve(kLogCoeffGrid.size() * kLogCoeffGrid.size() * kLogCoeffGrid.size() *
                   kExponentGrid.size() * kExponentGrid.size());
    for (double a : kLogCoeffGrid)
        for (double b : kLogCoeffGrid)
            for (double e : kLogCoeffGrid)
                for (double alpha : kExponentGrid)
                    for (double beta : kExponentGrid) {
                        detail::Theta t{a, b, e, alpha, beta};
                        starts.emplace_back(fn.value_grad(t, nullptr), t);
                    }
    std::sort(starts.begin(), starts.end(), [](const auto& lhs, const auto& rhs) {
        if (lhs.first != rhs.first) return lhs.first < rhs.first;
        return detail::theta_less(lhs.second, rhs.second);
    });

    const int n_refine = std::min<int>(options.n_restarts, static_cast<int>(starts.size()));
    bool have_best = false;
    detail::Theta best{};
    double best_obj = 0.0;
    for (int k = 0; k < n_refine; ++k) {
        auto [theta, obj] = detail::lbfgs(fn, starts[k].second, options.max_iters,
                                          options.tolerance);
        if (!have_best || obj < best_obj ||
            (obj == best_obj && detail::theta_less(theta, best))) {
            have_best = true;
            best = theta;
            best_obj = obj;
        }
    }

    // Degeneracy rule: a flat power term (exponent ~ 0) is the irreducible
    // level in disguise; fold it into E whenever that leaves the objective
    // intact, so constant data lands on E rather than on A or B.
    auto try_fold = [&](int coeff_idx, int exp_idx) {
        if (std::abs(best[exp_idx]) > 1e-6) return;
        detail::Theta folded = best;
        folded[2] = detail::logaddexp(best[2], best[coeff_idx]);
        folded[coeff_idx] = -746.0; // exp underflows to exactly zero
        folded[exp_idx] = 0.0;
        const double obj = fn.value_grad(folded, nullptr);
        if (obj <= best_obj + 1e-12 * (1.0 + std::abs(best_obj))) {
            best = folded;
            best_obj = obj;
        }
    };
    try_fold(0, 3);
    try_fold(1, 4);

    FitReport report;
    report.params = LawParams{std::exp(best[0]), best[3], std::exp(best[1]), best[4],
                              std::exp(best[2])};
    report.objective = best_obj;
    report.n_restarts_used = n_refine;
    report.degenerate_span = distinct_n.size() < 2 || distinct_d.size() < 2;
    for (std::size_t i = 0; i < fn.log_n.size(); ++i) {
        const double pred = detail::logsumexp3(best[0] - best[3] * fn.log_n[i],
                                               best[1] - best[4] * fn.log_d[i], best[2]);
        report.residuals.push_back(fn.log_l[i] - pred);
    }
    return report;
}

} // namespace cdlab::lawfit
