#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixnl/grid.hpp"
#include "mixnl/linsolve.hpp"
#include "mixnl/operator.hpp"

namespace mixnl {

// ---------------------------------------------------------------------------
// Exponent formula table
// ---------------------------------------------------------------------------

/// Pure formula evaluation of the exponent relations tying summability r,
/// singular exponent gamma and weight exponent zeta together.  Fields that
/// are undefined in a given regime stay empty.
struct ExponentTable {
    int N = 3;
    double r = std::numeric_limits<double>::quiet_NaN();
    double gamma = 0.0;
    double zeta = std::numeric_limits<double>::quiet_NaN();

    std::optional<double> two_star;       // 2N/(N-2)
    std::optional<double> r_sharp;        // (2*/(1-gamma))', gamma < 1
    std::optional<double> q;              // Nr(1+gamma)/(N - r(1-gamma)), r < r_sharp
    std::optional<double> S_r;            // (N(r-1) + gamma r(N-2))/(N-2r), r < N/2
    std::optional<double> sigma_r;        // Nr(1+gamma)/(N-2r), r < N/2
    std::optional<double> lower_bound;    // gamma - 1 + 1/r
    std::optional<double> L_star;         // (gamma+zeta-1)/(2-zeta), zeta != 2
    std::optional<double> kappa;          // (2-zeta)/(gamma+1)
    std::optional<double> beta;           // (2 gamma + zeta)/(gamma+1)

    bool w1q_regime = false;         // r < r_sharp and gamma < 1
    bool limit_case = false;         // r == N/2
    bool strong_case = false;        // r > N/2
    bool zeta_nonexistence = false;  // zeta >= 2
    int zeta_gamma_regime = 0;       // sign of (zeta + gamma - 1)
};

inline ExponentTable exponent_table(int N, double r, double gamma, double zeta) {
    if (N < 2) throw std::domain_error("exponent_table: N must be >= 2");
    if (gamma < 0.0) throw std::domain_error("exponent_table: gamma must be >= 0");
    const bool has_r = std::isfinite(r) || r == std::numeric_limits<double>::infinity();
    if (has_r && r < 1.0) throw std::domain_error("exponent_table: r must be >= 1");
    if (has_r && r == 1.0 && gamma == 0.0)
        throw std::domain_error("exponent_table: (r, gamma) = (1, 0) excluded");

    ExponentTable t;
    t.N = N;
    t.r = r;
    t.gamma = gamma;
    t.zeta = zeta;

    if (N > 2) {
        t.two_star = 2.0 * N / (N - 2.0);
        if (gamma < 1.0) t.r_sharp = 2.0 * N / (2.0 * N - (1.0 - gamma) * (N - 2.0));
    } else if (gamma < 1.0) {
        t.r_sharp = 1.0;  // N = 2 limit of (2*/(1-gamma))'
    }

    if (has_r && std::isfinite(r)) {
        if (t.r_sharp && r < *t.r_sharp && gamma < 1.0)
            t.q = N * r * (1.0 + gamma) / (N - r * (1.0 - gamma));
        if (2.0 * r < N) {
            t.S_r = (N * (r - 1.0) + gamma * r * (N - 2.0)) / (N - 2.0 * r);
            t.sigma_r = N * r * (1.0 + gamma) / (N - 2.0 * r);
        }
        t.lower_bound = gamma - 1.0 + 1.0 / r;
        t.limit_case = (2.0 * r == N);
        t.strong_case = (2.0 * r > N);
    } else if (has_r) {
        t.lower_bound = gamma - 1.0;
        t.strong_case = true;
    }

    if (std::isfinite(zeta)) {
        if (zeta < 0.0) throw std::domain_error("exponent_table: zeta must be >= 0");
        t.zeta_nonexistence = zeta >= 2.0;
        if (zeta != 2.0) t.L_star = (gamma + zeta - 1.0) / (2.0 - zeta);
        t.kappa = (2.0 - zeta) / (gamma + 1.0);
        t.beta = (2.0 * gamma + zeta) / (gamma + 1.0);
        const double zg = zeta + gamma - 1.0;
        t.zeta_gamma_regime = zg < 0.0 ? -1 : (zg > 0.0 ? 1 : 0);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Boundary-behavior fitting
// ---------------------------------------------------------------------------

enum class FitMode { Power, LogCorrected };

struct FitWindow {
    double delta_lo = 0.0;  // 0 = default 5h
    double delta_hi = 0.0;  // 0 = default 0.2 * diameter
};

struct ExponentFit {
    double exponent = 0.0;
    double stderr_ = 0.0;
    double r2 = 0.0;
    double delta_lo = 0.0;
    double delta_hi = 0.0;
    int points = 0;
    FitMode mode = FitMode::Power;
    bool reliable = false;  // r2 >= 0.98
};

/// Node ids along the inward normal ray from an edge (N=2) or face (N=3)
/// midpoint, marching inward while delta strictly increases.  Along this
/// ray delta equals the coordinate normal to that face.
inline std::vector<std::size_t> boundary_fit_ray(const Grid& grid) {
    if (grid.spec.shape != Shape::Box)
        throw std::invalid_argument("boundary_fit_ray: fit ray is defined for box grids");
    const int m = grid.m();
    const int mid = (m - 1) / 2;
    std::vector<std::size_t> ray;
    double last = 0.0;
    for (int j = 0; j < m; ++j) {
        const std::int32_t id =
            grid.dim() == 2 ? grid.node_at(mid, j) : grid.node_at(mid, mid, j);
        if (id < 0) continue;
        if (grid.delta[id] <= last) break;
        last = grid.delta[id];
        ray.push_back(static_cast<std::size_t>(id));
    }
    return ray;
}

namespace detail {

struct LineFit {
    double slope, stderr_slope, r2;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - my - f.slope * (x[i] - mx);
        ss_res += e * e;
    }
    f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
    f.stderr_slope = n > 2 ? std::sqrt(ss_res / (static_cast<double>(n) - 2.0) / sxx) : 0.0;
    return f;
}

}  // namespace detail

/// Fit the boundary exponent of u along the midline ray.
///
/// Power mode regresses log u on log delta.  Log-corrected mode regresses
/// log(u/delta) on log log(D/delta), estimating the exponent of the
/// logarithmic correction.
inline ExponentFit fit_boundary_exponent(const std::vector<double>& u, const Grid& grid,
                                         FitMode mode = FitMode::Power, FitWindow window = {}) {
    const double h = grid.h, D = grid.diameter;
    double lo = window.delta_lo > 0 ? window.delta_lo : 5.0 * h;
    // Default upper end 0.1*diam: beyond that the profile curvature of the
    // bounded domain dominates the asymptotic power and the fit degrades
    // (visible as r2 < 0.98).  Coarse grids extend the window to keep
    // enough sample points.
    double hi = window.delta_hi > 0 ? window.delta_hi
                                    : std::min(std::max(0.1 * D, lo + 9.0 * h), 0.25 * D);
    if (lo < 3.0 * h) throw std::invalid_argument("fit_boundary_exponent: window below 3h");
    if (hi > 0.25 * D) throw std::invalid_argument("fit_boundary_exponent: window above diameter/4");

    std::vector<double> xs, ys;
    for (std::size_t id : boundary_fit_ray(grid)) {
        const double d = grid.delta[id];
        if (d < lo || d > hi) continue;
        if (!(u[id] > 0.0))
            throw std::invalid_argument("fit_boundary_exponent: u must be positive on the ray");
        if (mode == FitMode::Power) {
            xs.push_back(std::log(d));
            ys.push_back(std::log(u[id]));
        } else {
            xs.push_back(std::log(std::log(D / d)));
            ys.push_back(std::log(u[id] / d));
        }
    }
    if (xs.size() < 8)
        throw std::invalid_argument("fit_boundary_exponent: fewer than 8 window points");

    const auto f = detail::least_squares(xs, ys);
    ExponentFit fit;
    fit.exponent = f.slope;
    fit.stderr_ = f.stderr_slope;
    fit.r2 = f.r2;
    fit.delta_lo = lo;
    fit.delta_hi = hi;
    fit.points = static_cast<int>(xs.size());
    fit.mode = mode;
    fit.reliable = f.r2 >= 0.98;
    return fit;
}

// ---------------------------------------------------------------------------
// Discrete norms and energies
// ---------------------------------------------------------------------------

/// Discrete Dirichlet energy  sum |grad_h v|^2 h^N  with forward differences
/// and zero exterior extension; edges crossing the boundary are included, so
/// the value coincides with v^T A_loc v h^N.
inline double dirichlet_energy(const std::vector<double>& v, const Grid& grid) {
    if (v.size() != grid.size()) throw std::invalid_argument("dirichlet_energy: size mismatch");
    const double scale = std::pow(grid.h, grid.dim() - 2);
    double acc = 0.0;
    const int dims = grid.dim();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& z = grid.index[i];
        for (int k = 0; k < dims; ++k) {
            std::array<int, 3> zf = z, zb = z;
            zf[k] += 1;
            zb[k] -= 1;
            const std::int32_t fwd = grid.node_at(zf[0], zf[1], zf[2]);
            const double df = (fwd >= 0 ? v[fwd] : 0.0) - v[i];
            acc += df * df;
            if (grid.node_at(zb[0], zb[1], zb[2]) < 0) acc += v[i] * v[i];
        }
    }
    return acc * scale;
}

/// H1 energy of the power u^alpha:  sum |grad_h(u^alpha)|^2 h^N.
inline double h1_power_norm(const std::vector<double>& u, double alpha, const Grid& grid) {
    if (!(alpha > 0.0)) throw std::invalid_argument("h1_power_norm: alpha must be positive");
    std::vector<double> v(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] < 0.0) throw std::invalid_argument("h1_power_norm: u must be nonnegative");
        v[i] = std::pow(u[i], alpha);
    }
    return dirichlet_energy(v, grid);
}

/// Fractional energy  u^T A_frac u h^N  (interior double sum plus exterior
/// terms), computed through the operator.
inline double gagliardo_seminorm(const MixedOperator& op, const std::vector<double>& u) {
    if (u.size() != op.size()) throw std::invalid_argument("gagliardo_seminorm: size mismatch");
    std::vector<double> Au(u.size());
    op.fractional.apply(u, Au);
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * Au[i];
    return acc * op.cell_volume();
}

inline double gagliardo_seminorm(const std::vector<double>& u, double s, const Grid& grid) {
    return gagliardo_seminorm(assemble_operator(grid, s), u);
}

/// Discrete Lebesgue norm (sum |u|^p h^N)^{1/p}; p = inf gives max |u|.
inline double lebesgue_norm(const std::vector<double>& u, double p, const Grid& grid) {
    if (u.size() != grid.size()) throw std::invalid_argument("lebesgue_norm: size mismatch");
    if (!(p >= 1.0)) throw std::invalid_argument("lebesgue_norm: p must be >= 1");
    if (std::isinf(p)) {
        double mx = 0.0;
        for (double x : u) mx = std::max(mx, std::abs(x));
        return mx;
    }
    double acc = 0.0;
    for (double x : u) acc += std::pow(std::abs(x), p);
    return std::pow(acc * std::pow(grid.h, grid.dim()), 1.0 / p);
}

struct ExpMoment {
    double value = 0.0;
    bool capped = false;  // overflow guard engaged
};

/// Discrete exponential moment  sum exp(beta N u/(N-2)) h^N  (N > 2).
inline ExpMoment exp_moment(const std::vector<double>& u, double beta, const Grid& grid) {
    if (grid.dim() <= 2) throw std::invalid_argument("exp_moment: requires N > 2");
    if (u.size() != grid.size()) throw std::invalid_argument("exp_moment: size mismatch");
    const double factor = beta * grid.dim() / (grid.dim() - 2.0);
    ExpMoment m;
    double acc = 0.0;
    for (double x : u) {
        double a = factor * x;
        if (a > 700.0) {
            a = 700.0;
            m.capped = true;
        }
        acc += std::exp(a);
    }
    m.value = acc * std::pow(grid.h, grid.dim());
    return m;
}

/// Largest beta admissible in the limit-case exponential estimate:
/// beta * max(1, (beta/gamma)^gamma) <= 2 / (S ||f||_{N/2});  gamma = 0
/// reduces to beta = 2 / (S ||f||_{N/2}).
inline double admissible_beta(double gamma, double f_norm_half_N, double sobolev_constant) {
    if (!(f_norm_half_N > 0.0) || !(sobolev_constant > 0.0))
        throw std::invalid_argument("admissible_beta: norms must be positive");
    if (gamma < 0.0 || gamma > 1.0)
        throw std::invalid_argument("admissible_beta: requires 0 <= gamma <= 1");
    const double target = 2.0 / (sobolev_constant * f_norm_half_N);
    if (gamma == 0.0) return target;
    auto g = [gamma](double b) { return b * std::max(1.0, std::pow(b / gamma, gamma)); };
    double lo = 0.0, hi = std::max(1.0, target);
    while (g(hi) < target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) <= target ? lo : hi) = mid;
    }
    return lo;
}

/// Discrete Sobolev constant S with ||v||_{2*}^2 <= S ||grad_h v||_2^2,
/// estimated as the reciprocal square of the smallest Rayleigh quotient
/// ||grad_h v|| / ||v||_{2*} over random trial vectors refined by projected
/// gradient descent.
inline double sobolev_constant_estimate(const Grid& grid, int trials = 50, int steps = 120,
                                        std::uint64_t seed = 2024) {
    if (grid.dim() <= 2)
        throw std::invalid_argument("sobolev_constant_estimate: requires N > 2");
    const double two_star = 2.0 * grid.dim() / (grid.dim() - 2.0);
    const std::size_t n = grid.size();
    const double hN = std::pow(grid.h, grid.dim());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;

    auto p_norm = [&](const std::vector<double>& v) {
        double acc = 0.0;
        for (double x : v) acc += std::pow(std::abs(x), two_star);
        return std::pow(acc * hN, 1.0 / two_star);
    };
    // Gradient of the Dirichlet energy is the graph-Laplacian action.
    auto energy_grad = [&](const std::vector<double>& v, std::vector<double>& g) {
        const double scale = 2.0 * std::pow(grid.h, grid.dim() - 2);
        const int dims = grid.dim();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& z = grid.index[i];
            double acc = 2.0 * dims * v[i];
            for (int k = 0; k < dims; ++k) {
                std::array<int, 3> zf = z, zb = z;
                zf[k] += 1;
                zb[k] -= 1;
                const std::int32_t f = grid.node_at(zf[0], zf[1], zf[2]);
                const std::int32_t b = grid.node_at(zb[0], zb[1], zb[2]);
                if (f >= 0) acc -= v[f];
                if (b >= 0) acc -= v[b];
            }
            g[i] = scale * acc;
        }
    };

    double best_q = std::numeric_limits<double>::infinity();
    std::vector<double> v(n), g(n);
    for (int t = 0; t < trials; ++t) {
        for (auto& x : v) x = gauss(rng);
        double pn = p_norm(v);
        for (auto& x : v) x /= pn;
        double e = dirichlet_energy(v, grid);
        for (int it = 0; it < steps; ++it) {
            energy_grad(v, g);
            double gn = 0.0;
            for (double x : g) gn += x * x;
            gn = std::sqrt(gn);
            if (gn == 0.0) break;
            double step = 0.1 / gn;
            std::vector<double> w(n);
            for (int bt = 0; bt < 20; ++bt) {
                for (std::size_t i = 0; i < n; ++i) w[i] = v[i] - step * g[i];
                const double wn = p_norm(w);
                for (auto& x : w) x /= wn;
                const double ew = dirichlet_energy(w, grid);
                if (ew < e) {
                    v = w;
                    e = ew;
                    break;
                }
                step *= 0.5;
            }
        }
        best_q = std::min(best_q, std::sqrt(e));
    }
    return 1.0 / (best_q * best_q);
}

// ---------------------------------------------------------------------------
// Green distance action
// ---------------------------------------------------------------------------

enum class DistanceActionKind { Power, Log };

struct DistanceActionStats {
    DistanceActionKind kind = DistanceActionKind::Power;
    double param = 0.0;  // beta or Xi
    std::string profile;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    int nodes = 0;
    double spread() const { return max_ratio / min_ratio; }
};

/// Solve A v = delta^{-beta} (or the log-weighted variant) and compare v
/// against the predicted boundary profile over nodes with delta >= 3h.
inline DistanceActionStats green_distance_action(const MixedOperator& op,
                                                 DistanceActionKind kind, double param) {
    const Grid& grid = op.grid;
    if (grid.dim() != 3)
        throw std::invalid_argument("green_distance_action: kernel bound regime requires N = 3");
    const double D = grid.diameter;
    std::vector<double> rhs(grid.size());
    DistanceActionStats stats;
    stats.kind = kind;
    stats.param = param;

    std::vector<double> profile(grid.size());
    if (kind == DistanceActionKind::Power) {
        const double beta = param;
        if (beta >= 2.0)
            throw std::invalid_argument("green_distance_action: beta >= 2 not integrable against delta");
        for (std::size_t i = 0; i < grid.size(); ++i)
            rhs[i] = std::pow(grid.delta[i], -beta);
        if (std::abs(beta - 1.0) < 1e-12) {
            stats.profile = "delta*log(D/delta)";
            for (std::size_t i = 0; i < grid.size(); ++i)
                profile[i] = grid.delta[i] * std::log(D / grid.delta[i]);
        } else if (beta < 1.0) {
            stats.profile = "delta";
            for (std::size_t i = 0; i < grid.size(); ++i) profile[i] = grid.delta[i];
        } else {
            stats.profile = "delta^(2-beta)";
            for (std::size_t i = 0; i < grid.size(); ++i)
                profile[i] = std::pow(grid.delta[i], 2.0 - beta);
        }
    } else {
        const double Xi = param;
        if (!(Xi > 0.0) || !(Xi < 1.0))
            throw std::invalid_argument("green_distance_action: Xi must lie in (0,1)");
        stats.profile = "delta*log^(1-Xi)(D/delta)";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double l = std::log(D / grid.delta[i]);
            rhs[i] = std::pow(l, -Xi) / grid.delta[i];
            profile[i] = grid.delta[i] * std::pow(l, 1.0 - Xi);
        }
    }

    DirichletSolver solver(op, SolveMethod::ConjugateGradient);
    const auto v = solver.solve(rhs, 1e-10, 4000).u;

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.delta[i] < 3.0 * grid.h) continue;
        const double ratio = v[i] / profile[i];
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        ++count;
    }
    stats.min_ratio = lo;
    stats.max_ratio = hi;
    stats.nodes = count;
    return stats;
}

// ---------------------------------------------------------------------------
// Continuity in the datum
// ---------------------------------------------------------------------------

struct ContinuityGap {
    double lhs = 0.0;
    double rhs_base = 0.0;
};

/// lhs = || grad |u-v|^{(S+1)/2} ||_2^2,  rhs_base = ||f-g||_r^{r(N-2)/(N-2r)}.
inline ContinuityGap continuity_gap(const std::vector<double>& u, const std::vector<double>& v,
                                    const std::vector<double>& f, const std::vector<double>& g,
                                    double r, double S, double gamma, const Grid& grid) {
    const int N = grid.dim();
    if (!(r >= 1.0) || !(2.0 * r < N))
        throw std::invalid_argument("continuity_gap: requires 1 <= r < N/2");
    const auto table = exponent_table(N, r, gamma, std::numeric_limits<double>::quiet_NaN());
    if (!(S >= gamma) || !(S <= *table.S_r + 1e-12))
        throw std::invalid_argument("continuity_gap: S outside [gamma, S_r]");
    std::vector<double> w(u.size()), d(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        w[i] = std::abs(u[i] - v[i]);
        d[i] = f[i] - g[i];
    }
    ContinuityGap gap;
    gap.lhs = h1_power_norm(w, 0.5 * (S + 1.0), grid);
    gap.rhs_base = std::pow(lebesgue_norm(d, r, grid), r * (N - 2.0) / (N - 2.0 * r));
    return gap;
}

// ---------------------------------------------------------------------------
// Threshold scan classification
// ---------------------------------------------------------------------------

enum class ThresholdClass { Divergent, Bounded, Inconclusive };

inline const char* to_string(ThresholdClass c) {
    switch (c) {
        case ThresholdClass::Divergent: return "DIVERGENT";
        case ThresholdClass::Bounded: return "BOUNDED";
        default: return "INCONCLUSIVE";
    }
}

/// Classify a sequence of norms over a refinement ladder: DIVERGENT when
/// every refinement grows the norm by >= divergence_factor, BOUNDED when
/// every change stays within stability_band.
inline ThresholdClass classify_refinement(const std::vector<double>& norms,
                                          double divergence_factor = 1.2,
                                          double stability_band = 0.10) {
    if (norms.size() < 2) return ThresholdClass::Inconclusive;
    bool divergent = true, bounded = true;
    for (std::size_t k = 0; k + 1 < norms.size(); ++k) {
        const double ratio = norms[k + 1] / norms[k];
        if (!(ratio >= divergence_factor)) divergent = false;
        if (!(std::abs(ratio - 1.0) < stability_band)) bounded = false;
    }
    if (divergent) return ThresholdClass::Divergent;
    if (bounded) return ThresholdClass::Bounded;
    return ThresholdClass::Inconclusive;
}

}  // namespace mixnl
