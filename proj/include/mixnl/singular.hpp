#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixnl/analysis.hpp"
#include "mixnl/grid.hpp"
#include "mixnl/linsolve.hpp"
#include "mixnl/operator.hpp"

namespace mixnl {

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// The datum f: either a Lebesgue-class grid function with summability r,
/// or the singular power class delta^{-zeta} realized exactly.
struct WeightSpec {
    enum class Kind { Lebesgue, SingularPower };
    Kind kind = Kind::Lebesgue;
    std::vector<double> values;  // Lebesgue only
    double r = std::numeric_limits<double>::infinity();
    double zeta = 0.0;  // SingularPower only

    static WeightSpec lebesgue(std::vector<double> f, double r) {
        for (double x : f)
            if (!(x >= 0.0) || !std::isfinite(x))
                throw std::invalid_argument("WeightSpec: Lebesgue datum must be nonnegative and finite");
        if (!(r >= 1.0)) throw std::invalid_argument("WeightSpec: r must be >= 1");
        WeightSpec w;
        w.kind = Kind::Lebesgue;
        w.values = std::move(f);
        w.r = r;
        return w;
    }

    static WeightSpec delta_power(double zeta) {
        if (zeta < 0.0) throw std::invalid_argument("WeightSpec: zeta must be >= 0");
        WeightSpec w;
        w.kind = Kind::SingularPower;
        w.zeta = zeta;
        return w;
    }

    /// Exact datum values on the grid (delta^{-zeta} for the singular class).
    std::vector<double> evaluate(const Grid& grid) const {
        if (kind == Kind::Lebesgue) {
            if (values.size() != grid.size())
                throw std::invalid_argument("WeightSpec: datum size does not match grid");
            return values;
        }
        std::vector<double> f(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) f[i] = std::pow(grid.delta[i], -zeta);
        return f;
    }
};

/// Regularized datum f_n.
///
/// Lebesgue: f_n = min(f, n).  Singular power with zeta in (0,2):
/// f_n = (delta + (1/n)^{(gamma+1)/(2-zeta)})^{-zeta}, the paper's family
/// with G_1 = G_2 = 1.  zeta >= 2 (nonexistence diagnostics only) uses the
/// shift 1/n, for which f_n increases to delta^{-zeta} on any fixed grid.
inline std::vector<double> regularize_weight(const WeightSpec& weight, int n, double gamma,
                                             const Grid& grid, bool nonexistence_mode = false) {
    if (n < 1) throw std::invalid_argument("regularize_weight: n must be >= 1");
    if (weight.kind == WeightSpec::Kind::Lebesgue) {
        auto f = weight.evaluate(grid);
        for (auto& x : f) x = std::min(x, static_cast<double>(n));
        return f;
    }
    const double zeta = weight.zeta;
    if (zeta == 0.0) return std::vector<double>(grid.size(), 1.0);
    if (zeta >= 2.0) {
        if (!nonexistence_mode)
            throw std::domain_error("regularize_weight: zeta >= 2 allowed only in nonexistence mode");
        std::vector<double> f(grid.size());
        const double shift = 1.0 / n;
        for (std::size_t i = 0; i < grid.size(); ++i)
            f[i] = std::pow(grid.delta[i] + shift, -zeta);
        return f;
    }
    if (!(gamma > 0.0))
        throw std::domain_error("regularize_weight: singular power class requires gamma > 0");
    const double shift = std::pow(1.0 / n, (gamma + 1.0) / (2.0 - zeta));
    std::vector<double> f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        f[i] = std::pow(grid.delta[i] + shift, -zeta);
    return f;
}

// ---------------------------------------------------------------------------
// Problem instance
// ---------------------------------------------------------------------------

inline std::vector<int> default_schedule() { return {1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024}; }

struct SingularProblem {
    double gamma = 0.5;
    double s = 0.5;
    GridSpec grid_spec;
    WeightSpec weight;
    double newton_tol = 1e-11;        // on ||A u - f_n/(u+1/n)^gamma||_inf / ||f_n||_inf
    double continuation_tol = 1e-3;   // relative sup-change between the last two stages
    std::vector<int> schedule = default_schedule();
    bool nonexistence_mode = false;
    bool keep_stage_solutions = false;

    void validate() const {
        grid_spec.validate();
        if (gamma < 0.0) throw std::invalid_argument("SingularProblem: gamma must be >= 0");
        if (!(s > 0.0) || !(s < 1.0)) throw std::invalid_argument("SingularProblem: s must lie in (0,1)");
        if (weight.kind == WeightSpec::Kind::SingularPower) {
            if (weight.zeta > 0.0 && !(gamma > 0.0))
                throw std::invalid_argument("SingularProblem: singular power weight requires gamma > 0");
            if (weight.zeta >= 2.0 && !nonexistence_mode)
                throw std::invalid_argument(
                    "SingularProblem: zeta >= 2 is the nonexistence regime; enable nonexistence mode");
        } else {
            if (weight.r == 1.0 && gamma == 0.0)
                throw std::invalid_argument("SingularProblem: (r, gamma) = (1, 0) excluded");
        }
        if (schedule.size() < 1) throw std::invalid_argument("SingularProblem: empty n-schedule");
        for (std::size_t k = 0; k + 1 < schedule.size(); ++k)
            if (schedule[k + 1] <= schedule[k])
                throw std::invalid_argument("SingularProblem: n-schedule must be strictly increasing");
    }
};

struct RegularizedSolve {
    int n = 0;
    std::vector<double> u;
    int newton_iterations = 0;
    int picard_iterations = 0;
    double residual = 0.0;  // ||A u - f_n/(u+1/n)^gamma||_inf
    double min_u = 0.0;
};

namespace detail {

inline double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// One nonlinear solve of (P_n):  A u = f_n / (u + 1/n)^gamma.
/// Damped Newton on F(u) = A u - f_n/(u+1/n)^gamma with the SPD Jacobian
/// A + diag(gamma f_n (u+1/n)^{-gamma-1}); Picard sweeps as fallback.
inline RegularizedSolve solve_regularized_core(const MixedOperator& op, DirichletSolver& solver,
                                               const std::vector<double>& f_n, int n, double gamma,
                                               double tol, const std::vector<double>& u_init) {
    const std::size_t sz = op.size();
    const double eps = 1.0 / n;
    RegularizedSolve out;
    out.n = n;

    if (gamma == 0.0) {
        solver.set_extra_diagonal(std::vector<double>(sz, 0.0));
        out.u = solver.solve(f_n, 1e-12, 6000).u;
        std::vector<double> Au(sz);
        op.apply(out.u, Au);
        double res = 0.0;
        for (std::size_t i = 0; i < sz; ++i) res = std::max(res, std::abs(Au[i] - f_n[i]));
        out.residual = res;
        out.newton_iterations = 1;
        out.min_u = *std::min_element(out.u.begin(), out.u.end());
        return out;
    }

    std::vector<double> u = u_init;
    for (auto& x : u) x = std::max(x, 0.0);

    const double f_sup = sup_norm(f_n);
    const double target = tol * f_sup;

    std::vector<double> F(sz), Au(sz), d(sz), jd(sz), trial(sz);
    auto residual_inf = [&](const std::vector<double>& w, std::vector<double>& Fout) {
        op.apply(w, Au);
        double r = 0.0;
        for (std::size_t i = 0; i < sz; ++i) {
            Fout[i] = Au[i] - f_n[i] / std::pow(w[i] + eps, gamma);
            r = std::max(r, std::abs(Fout[i]));
        }
        return r;
    };

    double res = residual_inf(u, F);
    const double res0 = res;
    int stall = 0;
    bool polished = false;
    for (int it = 0; it < 80; ++it) {
        if (res <= target && polished) break;
        if (res <= target && !polished) polished = true;  // one extra tight step

        for (std::size_t i = 0; i < sz; ++i)
            jd[i] = gamma * f_n[i] / std::pow(u[i] + eps, gamma + 1.0);
        solver.set_extra_diagonal(jd);
        // Inexact Newton: loose tolerance far from the solution.
        const double rel = res / std::max(res0, 1e-300);
        const double cg_tol = polished || res <= 10.0 * target
                                  ? 1e-13
                                  : std::clamp(0.01 * rel, 1e-13, 1e-4);
        std::vector<double> negF(sz);
        for (std::size_t i = 0; i < sz; ++i) negF[i] = -F[i];
        d = solver.solve(negF, cg_tol, 6000).u;

        double alpha = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            bool positive = true;
            for (std::size_t i = 0; i < sz; ++i) {
                trial[i] = u[i] + alpha * d[i];
                if (trial[i] + eps <= 0.0) {
                    positive = false;
                    break;
                }
            }
            if (positive) {
                std::vector<double> Ft(sz);
                const double rt = residual_inf(trial, Ft);
                if (rt < res * (1.0 - 1e-4 * alpha) || rt <= target) {
                    u.swap(trial);
                    F.swap(Ft);
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        ++out.newton_iterations;
        if (!accepted) {
            ++stall;
            // Picard sweep: u <- A^{-1}[ f_n / (u + eps)^gamma ].
            solver.set_extra_diagonal(std::vector<double>(sz, 0.0));
            std::vector<double> rhs(sz);
            for (std::size_t i = 0; i < sz; ++i)
                rhs[i] = f_n[i] / std::pow(u[i] + eps, gamma);
            u = solver.solve(rhs, 1e-12, 6000).u;
            for (auto& x : u) x = std::max(x, 0.0);
            res = residual_inf(u, F);
            ++out.picard_iterations;
            if (stall > 8)
                throw SolverFailure("solve_regularized: Newton and Picard both stalled at n=" +
                                    std::to_string(n) + " (residual " + std::to_string(res) + ")");
        }
    }
    if (res > target)
        throw SolverFailure("solve_regularized: iteration cap exceeded at n=" + std::to_string(n) +
                            " (residual " + std::to_string(res) + ", target " +
                            std::to_string(target) + ")");
    out.u = std::move(u);
    out.residual = res;
    out.min_u = *std::min_element(out.u.begin(), out.u.end());
    if (!(out.min_u > 0.0))
        throw SolverFailure("solve_regularized: positivity lost at n=" + std::to_string(n));
    return out;
}

}  // namespace detail

/// Solve the approximated problem (P_n) for one n.
inline RegularizedSolve solve_regularized(const SingularProblem& problem, int n,
                                          const std::vector<double>& u_init) {
    problem.validate();
    for (double x : u_init)
        if (x < 0.0) throw std::invalid_argument("solve_regularized: u_init must be >= 0");
    const Grid grid = build_grid(problem.grid_spec);
    const MixedOperator op = assemble_operator(grid, problem.s);
    DirichletSolver solver(op, SolveMethod::ConjugateGradient);
    const auto f_n =
        regularize_weight(problem.weight, n, problem.gamma, grid, problem.nonexistence_mode);
    return detail::solve_regularized_core(op, solver, f_n, n, problem.gamma, problem.newton_tol,
                                          u_init);
}

// ---------------------------------------------------------------------------
// Continuation
// ---------------------------------------------------------------------------

enum class RunFlag { Converged, Diverging, Nonexistent };

inline const char* to_string(RunFlag f) {
    switch (f) {
        case RunFlag::Converged: return "CONVERGED";
        case RunFlag::Diverging: return "DIVERGING";
        default: return "NONEXISTENT";
    }
}

struct StageRecord {
    int n = 0;
    double residual = 0.0;
    double min_u = 0.0;
    double sup_u = 0.0;
    double hopf_margin = 0.0;  // min(u/delta)
    double sup_diff = 0.0;     // sup |u - u_prev|
    double mono_margin = 0.0;  // min (u - u_prev)
    int newton_iterations = 0;
};

struct NormTable {
    double sup = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    double dirichlet = 0.0;  // local energy
    double gagliardo = 0.0;  // fractional energy
};

struct RefinementScanEntry {
    double L = 0.0;
    std::vector<double> norms;  // h1_power_norm of u^{(L+1)/2} per rung
    bool divergent = false;
};

struct SolutionReport {
    GridSpec grid_spec;
    double gamma = 0.0;
    double s = 0.5;
    std::string weight_desc;
    std::vector<StageRecord> stages;
    std::vector<double> u;
    RunFlag flag = RunFlag::Converged;
    double monotonicity_margin = 0.0;  // min over stages of mono_margin
    double hopf_initial = 0.0;
    double hopf_final = 0.0;
    bool hopf_ok = true;  // margins never dip 20% below the initial one
    std::optional<ExponentFit> fit;
    NormTable norms;
    std::vector<RefinementScanEntry> refinement_scan;  // nonexistence ladder
    std::vector<std::vector<double>> stage_solutions;  // kept on request

    nlohmann::json to_json() const;
};

namespace detail {

inline std::string describe(const WeightSpec& w) {
    char buf[64];
    if (w.kind == WeightSpec::Kind::SingularPower) {
        std::snprintf(buf, sizeof buf, "deltapow:%g", w.zeta);
    } else if (std::isinf(w.r)) {
        std::snprintf(buf, sizeof buf, "lebesgue:r=inf");
    } else {
        std::snprintf(buf, sizeof buf, "lebesgue:r=%g", w.r);
    }
    return buf;
}

}  // namespace detail

/// Warm-started monotone continuation over the n-schedule.
///
/// Records per-stage residuals, positivity, Hopf margins min(u_n/delta) and
/// sup-differences; a monotonicity violation beyond 1e-10 fails the run.
inline SolutionReport continuation_solve(const SingularProblem& problem) {
    problem.validate();
    if (problem.schedule.size() < 2)
        throw std::invalid_argument("continuation_solve: schedule needs >= 2 entries");

    const Grid grid = build_grid(problem.grid_spec);
    const MixedOperator op = assemble_operator(grid, problem.s);
    DirichletSolver solver(op, SolveMethod::ConjugateGradient);
    const std::size_t sz = grid.size();

    SolutionReport rep;
    rep.grid_spec = problem.grid_spec;
    rep.gamma = problem.gamma;
    rep.s = problem.s;
    rep.weight_desc = detail::describe(problem.weight);

    // Initial iterate: u0 = A^{-1} f_{n_0}, positive by the maximum principle.
    const int n0 = problem.schedule.front();
    auto f0 = regularize_weight(problem.weight, n0, problem.gamma, grid, problem.nonexistence_mode);
    std::vector<double> u_prev = solver.solve(f0, 1e-12, 6000).u;

    rep.monotonicity_margin = std::numeric_limits<double>::infinity();
    bool first = true;
    std::vector<double> u_before;
    for (int n : problem.schedule) {
        const auto f_n =
            regularize_weight(problem.weight, n, problem.gamma, grid, problem.nonexistence_mode);
        auto stage_solve = detail::solve_regularized_core(op, solver, f_n, n, problem.gamma,
                                                          problem.newton_tol, u_prev);
        StageRecord st;
        st.n = n;
        st.residual = stage_solve.residual;
        st.min_u = stage_solve.min_u;
        st.sup_u = detail::sup_norm(stage_solve.u);
        st.newton_iterations = stage_solve.newton_iterations;
        double hopf = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sz; ++i)
            hopf = std::min(hopf, stage_solve.u[i] / grid.delta[i]);
        st.hopf_margin = hopf;
        if (!first) {
            double sup = 0.0, mono = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < sz; ++i) {
                const double diff = stage_solve.u[i] - u_before[i];
                sup = std::max(sup, std::abs(diff));
                mono = std::min(mono, diff);
            }
            st.sup_diff = sup;
            st.mono_margin = mono;
            rep.monotonicity_margin = std::min(rep.monotonicity_margin, mono);
            if (mono < -1e-10)
                throw SolverFailure("continuation_solve: monotonicity violated at n=" +
                                    std::to_string(n) + " (margin " + std::to_string(mono) + ")");
        } else {
            st.sup_diff = std::numeric_limits<double>::quiet_NaN();
            st.mono_margin = std::numeric_limits<double>::quiet_NaN();
            first = false;
        }
        rep.stages.push_back(st);
        if (problem.keep_stage_solutions) rep.stage_solutions.push_back(stage_solve.u);
        u_before = stage_solve.u;
        u_prev = std::move(stage_solve.u);
    }

    rep.u = u_prev;
    rep.hopf_initial = rep.stages.front().hopf_margin;
    rep.hopf_final = rep.stages.back().hopf_margin;
    for (const auto& st : rep.stages)
        if (st.hopf_margin < 0.8 * rep.hopf_initial) rep.hopf_ok = false;

    const double sup_u = detail::sup_norm(rep.u);
    rep.flag = rep.stages.back().sup_diff <= problem.continuation_tol * sup_u
                   ? RunFlag::Converged
                   : RunFlag::Diverging;

    rep.norms.sup = sup_u;
    rep.norms.l1 = lebesgue_norm(rep.u, 1.0, grid);
    rep.norms.l2 = lebesgue_norm(rep.u, 2.0, grid);
    rep.norms.dirichlet = dirichlet_energy(rep.u, grid);
    rep.norms.gagliardo = gagliardo_seminorm(op, rep.u);

    if (grid.spec.shape == Shape::Box) {
        try {
            FitMode mode = FitMode::Power;
            if (problem.weight.kind == WeightSpec::Kind::SingularPower &&
                std::abs(problem.weight.zeta + problem.gamma - 1.0) < 1e-12)
                mode = FitMode::LogCorrected;
            rep.fit = fit_boundary_exponent(rep.u, grid, mode);
        } catch (const std::invalid_argument&) {
            // grid too coarse for the fit window; leave the fit empty
        }
    }
    return rep;
}

/// Nonexistence diagnostics on a mesh-refinement ladder (m, 2m+1, 4m+3):
/// NONEXISTENT when the H1 norm of u^{(L+1)/2} grows by >= 1.2 per
/// refinement for every L in the scan grid up to L = 6.
inline SolutionReport detect_nonexistence(const SingularProblem& problem) {
    if (problem.weight.kind != WeightSpec::Kind::SingularPower)
        throw std::invalid_argument("detect_nonexistence: requires a singular power weight");
    if (!(problem.gamma > 0.0))
        throw std::invalid_argument("detect_nonexistence: requires gamma > 0");

    SingularProblem p = problem;
    p.nonexistence_mode = true;

    const int m0 = problem.grid_spec.m;
    const std::vector<int> ladder = {m0, 2 * m0 + 1, 4 * m0 + 3};
    std::vector<SolutionReport> runs;
    std::vector<Grid> grids;
    for (int m : ladder) {
        p.grid_spec.m = m;
        grids.push_back(build_grid(p.grid_spec));
        runs.push_back(continuation_solve(p));
    }

    std::vector<double> L_grid;
    for (double L = 0.5; L <= 6.0 + 1e-9; L += 0.5) L_grid.push_back(L);

    SolutionReport rep = runs.back();
    bool all_divergent = true;
    for (double L : L_grid) {
        RefinementScanEntry entry;
        entry.L = L;
        for (std::size_t k = 0; k < runs.size(); ++k)
            entry.norms.push_back(h1_power_norm(runs[k].u, 0.5 * (L + 1.0), grids[k]));
        entry.divergent =
            classify_refinement(entry.norms) == ThresholdClass::Divergent;
        all_divergent = all_divergent && entry.divergent;
        rep.refinement_scan.push_back(entry);
    }
    if (all_divergent) rep.flag = RunFlag::Nonexistent;
    return rep;
}

/// Sobolev-threshold scan: converged continuation at every rung of the
/// ladder, then classification of h1_power_norm(u, (L+1)/2) growth per L.
struct ThresholdScanResult {
    double L = 0.0;
    std::vector<double> norms;
    ThresholdClass cls = ThresholdClass::Inconclusive;
};

inline std::vector<ThresholdScanResult> sobolev_threshold_scan(const SingularProblem& problem,
                                                               const std::vector<double>& L_list,
                                                               const std::vector<int>& m_ladder) {
    if (m_ladder.size() < 3)
        throw std::invalid_argument("sobolev_threshold_scan: ladder needs >= 3 resolutions");
    SingularProblem p = problem;
    std::vector<SolutionReport> runs;
    std::vector<Grid> grids;
    for (int m : m_ladder) {
        p.grid_spec.m = m;
        grids.push_back(build_grid(p.grid_spec));
        runs.push_back(continuation_solve(p));
        if (runs.back().flag != RunFlag::Converged)
            throw SolverFailure("sobolev_threshold_scan: unconverged continuation at m=" +
                                std::to_string(m));
    }
    std::vector<ThresholdScanResult> out;
    for (double L : L_list) {
        ThresholdScanResult r;
        r.L = L;
        for (std::size_t k = 0; k < runs.size(); ++k)
            r.norms.push_back(h1_power_norm(runs[k].u, 0.5 * (L + 1.0), grids[k]));
        r.cls = classify_refinement(r.norms);
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

inline nlohmann::json SolutionReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["grid"] = {{"N", grid_spec.N},
                 {"shape", grid_spec.shape == Shape::Box ? "box" : "ball"},
                 {"m", grid_spec.m}};
    j["gamma"] = gamma;
    j["s"] = s;
    j["weight"] = weight_desc;
    j["flag"] = to_string(flag);
    j["monotonicity_margin"] = monotonicity_margin;
    j["hopf_initial"] = hopf_initial;
    j["hopf_final"] = hopf_final;
    j["hopf_ok"] = hopf_ok;
    nlohmann::json stages_json = nlohmann::json::array();
    for (const auto& st : stages) {
        nlohmann::json sj = {{"n", st.n},
                             {"residual", st.residual},
                             {"min_u", st.min_u},
                             {"sup_u", st.sup_u},
                             {"hopf_margin", st.hopf_margin},
                             {"newton_iterations", st.newton_iterations}};
        if (std::isfinite(st.sup_diff)) {
            sj["sup_diff"] = st.sup_diff;
            sj["mono_margin"] = st.mono_margin;
        }
        stages_json.push_back(sj);
    }
    j["stages"] = stages_json;
    j["norms"] = {{"sup", norms.sup},
                  {"l1", norms.l1},
                  {"l2", norms.l2},
                  {"dirichlet", norms.dirichlet},
                  {"gagliardo", norms.gagliardo}};
    if (fit) {
        j["exponent_fit"] = {{"exponent", fit->exponent},
                             {"stderr", fit->stderr_},
                             {"r2", fit->r2},
                             {"delta_lo", fit->delta_lo},
                             {"delta_hi", fit->delta_hi},
                             {"points", fit->points},
                             {"mode", fit->mode == FitMode::Power ? "power" : "log-corrected"},
                             {"reliable", fit->reliable}};
    }
    if (!refinement_scan.empty()) {
        nlohmann::json scan = nlohmann::json::array();
        for (const auto& e : refinement_scan)
            scan.push_back({{"L", e.L}, {"norms", e.norms}, {"divergent", e.divergent}});
        j["refinement_scan"] = scan;
    }
    return j;
}

}  // namespace mixnl
