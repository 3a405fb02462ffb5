#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "mixnl/analysis.hpp"
#include "mixnl/grid.hpp"
#include "mixnl/linsolve.hpp"
#include "mixnl/operator.hpp"
#include "mixnl/singular.hpp"

namespace mixnl::verify {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

struct Options {
    bool quick = false;  // reduced resolutions, indicative only
    std::uint64_t seed = 2024;
};

namespace detail {

inline std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

}  // namespace detail

/// Acceptance suite: one method per criterion, shared runs cached.
class AcceptanceSuite {
public:
    explicit AcceptanceSuite(Options opt = {}) : opt_(opt) {}

    std::vector<CriterionResult> run_all(std::ostream* progress = nullptr) {
        std::vector<CriterionResult> out;
        for (int id = 1; id <= 13; ++id) {
            out.push_back(run(id));
            if (progress) {
                (*progress) << (out.back().pass ? "[PASS] " : "[FAIL] ") << "criterion " << id
                            << ": " << out.back().name << " -- " << out.back().detail << "\n";
                progress->flush();
            }
        }
        return out;
    }

    CriterionResult run(int id) {
        CriterionResult r;
        r.id = id;
        try {
            switch (id) {
                case 1: return c1_strong_exponent();
                case 2: return c2_weak_exponent();
                case 3: return c3_borderline_log();
                case 4: return c4_threshold_scan();
                case 5: return c5_monotone();
                case 6: return c6_hopf();
                case 7: return c7_green_kernel();
                case 8: return c8_distance_action();
                case 9: return c9_comparison_continuity();
                case 10: return c10_uniform_linf();
                case 11: return c11_exp_moment();
                case 12: return c12_nonexistence();
                case 13: return c13_structural();
                default: throw std::invalid_argument("criterion id must be 1..13");
            }
        } catch (const std::exception& e) {
            r.name = "criterion " + std::to_string(id);
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        return r;
    }

private:
    Options opt_;
    std::map<std::string, SolutionReport> runs_;
    std::unique_ptr<MixedOperator> ball_op_;
    std::unique_ptr<DirichletSolver> ball_solver_;

    int fit_m() const { return opt_.quick ? 95 : 127; }

    const SolutionReport& singular_run(const std::string& key, double gamma, double zeta, int m,
                                       int N = 2, bool keep_stages = false) {
        auto it = runs_.find(key);
        if (it != runs_.end()) return it->second;
        SingularProblem p;
        p.gamma = gamma;
        p.s = 0.5;
        p.grid_spec = {N, Shape::Box, m};
        p.weight = WeightSpec::delta_power(zeta);
        p.keep_stage_solutions = keep_stages;
        return runs_.emplace(key, continuation_solve(p)).first->second;
    }

    const MixedOperator& ball_operator() {
        if (!ball_op_) {
            GridSpec spec{3, Shape::Ball, opt_.quick ? 15 : 25};
            ball_op_ = std::make_unique<MixedOperator>(assemble_operator(build_grid(spec), 0.5));
            ball_solver_ = std::make_unique<DirichletSolver>(*ball_op_, SolveMethod::ConjugateGradient);
        }
        return *ball_op_;
    }

    CriterionResult c1_strong_exponent() {
        CriterionResult r{1, "boundary exponent, strong regime (gamma=1, zeta=1.5)", false, ""};
        const auto& rep = singular_run("strong", 1.0, 1.5, fit_m());
        if (!rep.fit) {
            r.detail = "no fit produced";
            return r;
        }
        const double target = 0.25;
        r.pass = std::abs(rep.fit->exponent - target) <= 0.05;
        r.detail = detail::fmt("fitted %.4f (target %.2f +- 0.05), stderr %.4f, r2 %.4f, m=%d",
                               rep.fit->exponent, target, rep.fit->stderr_, rep.fit->r2, fit_m());
        return r;
    }

    CriterionResult c2_weak_exponent() {
        CriterionResult r{2, "boundary exponent, weak regime (gamma=0.25, zeta=0.25)", false, ""};
        const auto& rep = singular_run("weak", 0.25, 0.25, fit_m());
        if (!rep.fit) {
            r.detail = "no fit produced";
            return r;
        }
        r.pass = std::abs(rep.fit->exponent - 1.0) <= 0.05;
        r.detail = detail::fmt("fitted %.4f (target 1.00 +- 0.05), stderr %.4f, r2 %.4f, m=%d",
                               rep.fit->exponent, rep.fit->stderr_, rep.fit->r2, fit_m());
        return r;
    }

    CriterionResult c3_borderline_log() {
        CriterionResult r{3, "borderline log regime (gamma=0.5, zeta=0.5)", false, ""};
        const auto& rep = singular_run("log", 0.5, 0.5, fit_m());
        if (!rep.fit || rep.fit->mode != FitMode::LogCorrected) {
            r.detail = "no log-corrected fit produced";
            return r;
        }
        const double target = 1.0 / (2.0 - 0.5);
        r.pass = std::abs(rep.fit->exponent - target) <= 0.15;
        r.detail = detail::fmt("log-corrected fit %.4f (target %.3f +- 0.15), r2 %.4f, m=%d",
                               rep.fit->exponent, target, rep.fit->r2, fit_m());
        return r;
    }

    CriterionResult c4_threshold_scan() {
        CriterionResult r{4, "Sobolev threshold scan (gamma=2, zeta=1, L*=2)", false, ""};
        SingularProblem p;
        p.gamma = 2.0;
        p.s = 0.5;
        p.grid_spec = {2, Shape::Box, 31};
        p.weight = WeightSpec::delta_power(1.0);
        const std::vector<int> ladder = opt_.quick ? std::vector<int>{15, 31, 63}
                                                   : std::vector<int>{31, 63, 127};
        const auto scan = sobolev_threshold_scan(p, {1.8, 2.3}, ladder);
        const bool low_div = scan[0].cls == ThresholdClass::Divergent;
        const bool high_bnd = scan[1].cls == ThresholdClass::Bounded;
        r.pass = low_div && high_bnd;
        auto ratios = [](const std::vector<double>& v) {
            return detail::fmt("%.3f,%.3f", v[1] / v[0], v[2] / v[1]);
        };
        r.detail = detail::fmt("L=1.8 -> %s (ratios %s; want DIVERGENT), L=2.3 -> %s (ratios %s; want BOUNDED)",
                               to_string(scan[0].cls), ratios(scan[0].norms).c_str(),
                               to_string(scan[1].cls), ratios(scan[1].norms).c_str());
        return r;
    }

    CriterionResult c5_monotone() {
        CriterionResult r{5, "monotone continuation over n = 1..1024", false, ""};
        singular_run("strong", 1.0, 1.5, fit_m());
        singular_run("weak", 0.25, 0.25, fit_m());
        double worst = std::numeric_limits<double>::infinity();
        std::size_t instances = 0;
        for (const auto& [key, rep] : runs_) {
            worst = std::min(worst, rep.monotonicity_margin);
            ++instances;
        }
        r.pass = worst >= -1e-10;
        r.detail = detail::fmt("worst margin %.3e over %zu instances (tolerance -1e-10)", worst,
                               instances);
        return r;
    }

    CriterionResult c6_hopf() {
        CriterionResult r{6, "Hopf bound min(u_n/delta) >= C0 > 0, drift < 20%", false, ""};
        const auto& rep = singular_run("strong", 1.0, 1.5, fit_m());
        double min_margin = std::numeric_limits<double>::infinity();
        for (const auto& st : rep.stages) min_margin = std::min(min_margin, st.hopf_margin);
        r.pass = rep.hopf_initial > 0.0 && min_margin >= 0.8 * rep.hopf_initial;
        r.detail = detail::fmt("initial C0=%.4f, min over schedule %.4f, final %.4f", rep.hopf_initial,
                               min_margin, rep.hopf_final);
        return r;
    }

    // Green kernel estimate for the mixed operator, N = 3.
    static double kernel_estimate(double dist, double dx, double dy) {
        return (1.0 / dist) * std::min(dx * dy / (dist * dist), 1.0);
    }

    CriterionResult c7_green_kernel() {
        CriterionResult r{7, "Green kernel two-sided bound and symmetry (N=3 ball)", false, ""};
        const MixedOperator& op = ball_operator();
        const Grid& g = op.grid;
        const double h = g.h;

        const std::array<std::array<double, 3>, 5> targets = {{{0.0, 0.0, 0.0},
                                                               {0.4, 0.0, 0.0},
                                                               {0.0, 0.5, 0.2},
                                                               {-0.3, -0.3, 0.3},
                                                               {0.1, -0.2, -0.55}}};
        std::vector<std::size_t> sources;
        for (const auto& t : targets) {
            std::size_t best = 0;
            double bd = 1e30;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double d = std::hypot(g.coord[i][0] - t[0], g.coord[i][1] - t[1],
                                            g.coord[i][2] - t[2]);
                if (d < bd) {
                    bd = d;
                    best = i;
                }
            }
            sources.push_back(best);
        }

        std::vector<std::vector<double>> cols;
        for (std::size_t y : sources) cols.push_back(green_column(*ball_solver_, y));

        double lo = 1e300, hi = 0.0, gmax = 0.0, sym = 0.0;
        for (std::size_t k = 0; k < sources.size(); ++k) {
            const std::size_t y = sources[k];
            for (std::size_t x = 0; x < g.size(); ++x) {
                gmax = std::max(gmax, cols[k][x]);
                if (g.delta[x] < 2.0 * h || g.delta[y] < 2.0 * h) continue;
                const double dist = std::hypot(g.coord[x][0] - g.coord[y][0],
                                               g.coord[x][1] - g.coord[y][1],
                                               g.coord[x][2] - g.coord[y][2]);
                if (dist < 2.0 * h) continue;
                const double ratio = cols[k][x] / kernel_estimate(dist, g.delta[x], g.delta[y]);
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
            for (std::size_t j = 0; j < k; ++j)
                sym = std::max(sym, std::abs(cols[k][sources[j]] - cols[j][sources[k]]));
        }
        const bool bound_ok = hi / lo <= 50.0;
        const bool sym_ok = sym <= 1e-8 * gmax;
        r.pass = bound_ok && sym_ok;
        r.detail = detail::fmt("ratio spread %.2f (<= 50), symmetry defect %.2e (<= %.2e)", hi / lo,
                               sym, 1e-8 * gmax);
        return r;
    }

    CriterionResult c8_distance_action() {
        CriterionResult r{8, "Green distance action profiles (N=3 ball)", false, ""};
        const MixedOperator& op = ball_operator();
        std::string det;
        bool ok = true;
        for (double beta : {0.5, 1.0, 1.5}) {
            const auto st = green_distance_action(op, DistanceActionKind::Power, beta);
            ok = ok && st.spread() <= 50.0;
            det += detail::fmt("beta=%.1f->%s spread %.1f; ", beta, st.profile.c_str(), st.spread());
        }
        const auto stl = green_distance_action(op, DistanceActionKind::Log, 0.5);
        ok = ok && stl.spread() <= 50.0;
        det += detail::fmt("Xi=0.5->%s spread %.1f", stl.profile.c_str(), stl.spread());
        r.pass = ok;
        r.detail = det + " (all <= 50)";
        return r;
    }

    CriterionResult c9_comparison_continuity() {
        CriterionResult r{9, "comparison f<=g => u<=v and continuity constant stability", false, ""};
        const int m = opt_.quick ? 11 : 15;
        GridSpec spec{3, Shape::Box, m};
        Grid grid = build_grid(spec);
        const double gamma = 1.0, rr = 1.2, S = 1.0;
        std::mt19937_64 rng(opt_.seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);

        auto smooth_field = [&](double amp) {
            std::vector<double> f(grid.size());
            const double cx = 0.25 + 0.5 * uni(rng), cy = 0.25 + 0.5 * uni(rng),
                         cz = 0.25 + 0.5 * uni(rng), w = 0.15 + 0.2 * uni(rng);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const auto& x = grid.coord[i];
                const double d2 = (x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy) +
                                  (x[2] - cz) * (x[2] - cz);
                f[i] = amp * std::exp(-d2 / (w * w));
            }
            return f;
        };

        auto run_for = [&](const std::vector<double>& f) {
            SingularProblem p;
            p.gamma = gamma;
            p.s = 0.5;
            p.grid_spec = spec;
            p.weight = WeightSpec::lebesgue(f, rr);
            return continuation_solve(p);
        };

        double cmin = 1e300, cmax = 0.0, comparison_defect = -1e300;
        std::string det;
        for (int pair = 0; pair < 3; ++pair) {
            std::vector<double> f(grid.size(), 1.0);
            auto mod = smooth_field(0.5);
            for (std::size_t i = 0; i < grid.size(); ++i) f[i] += mod[i];
            auto bump = smooth_field(0.8);
            std::vector<double> gvec(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i) gvec[i] = f[i] + bump[i];

            const auto uf = run_for(f), vg = run_for(gvec);
            runs_.emplace("continuity_pair_f" + std::to_string(pair), uf);
            runs_.emplace("continuity_pair_g" + std::to_string(pair), vg);
            for (std::size_t i = 0; i < grid.size(); ++i)
                comparison_defect = std::max(comparison_defect, uf.u[i] - vg.u[i]);
            const auto gap = continuity_gap(uf.u, vg.u, f, gvec, rr, S, gamma, grid);
            const double C = gap.lhs / gap.rhs_base;
            cmin = std::min(cmin, C);
            cmax = std::max(cmax, C);
            det += detail::fmt("C%d=%.4g ", pair, C);
        }
        const bool comp_ok = comparison_defect <= 1e-8;
        const bool const_ok = cmax / cmin < 10.0;
        r.pass = comp_ok && const_ok;
        r.detail = det + detail::fmt("spread %.2fx (< 10x); max(u-v)=%.2e (<= 1e-8)", cmax / cmin,
                                     comparison_defect);
        return r;
    }

    CriterionResult c10_uniform_linf() {
        CriterionResult r{10, "uniform L-inf for r > N/2 (f = delta^-0.3, N=2)", false, ""};
        const int m = opt_.quick ? 31 : 63;
        GridSpec spec{2, Shape::Box, m};
        Grid grid = build_grid(spec);
        std::vector<double> f(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) f[i] = std::pow(grid.delta[i], -0.3);
        SingularProblem p;
        p.gamma = 0.5;
        p.s = 0.5;
        p.grid_spec = spec;
        p.weight = WeightSpec::lebesgue(f, 3.0);
        const auto& rep = runs_.emplace("uniform_linf", continuation_solve(p)).first->second;
        double sup512 = 0.0, sup1024 = 0.0;
        for (const auto& st : rep.stages) {
            if (st.n == 512) sup512 = st.sup_u;
            if (st.n == 1024) sup1024 = st.sup_u;
        }
        const double change = std::abs(sup1024 - sup512) / sup1024;
        r.pass = change < 0.01;
        r.detail = detail::fmt("sup u: n=512 -> %.6f, n=1024 -> %.6f, change %.3f%% (< 1%%)", sup512,
                               sup1024, 100.0 * change);
        return r;
    }

    CriterionResult c11_exp_moment() {
        CriterionResult r{11, "limit-case exponential moment (N=3, f in L^{N/2})", false, ""};
        const int m = opt_.quick ? 11 : 15;
        GridSpec spec{3, Shape::Box, m};
        Grid grid = build_grid(spec);
        std::vector<double> f(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) f[i] = std::pow(grid.delta[i], -0.6);
        const double gamma = 0.5;
        SingularProblem p;
        p.gamma = gamma;
        p.s = 0.5;
        p.grid_spec = spec;
        p.weight = WeightSpec::lebesgue(f, 1.5);
        p.keep_stage_solutions = true;
        const auto& rep = runs_.emplace("exp_moment", continuation_solve(p)).first->second;

        const double S = sobolev_constant_estimate(grid, 20, 80, opt_.seed);
        const double fnorm = lebesgue_norm(f, 1.5, grid);
        const double beta = admissible_beta(gamma, fnorm, S);

        const std::vector<double>*u512 = nullptr, *u1024 = nullptr;
        for (std::size_t k = 0; k < rep.stages.size(); ++k) {
            if (rep.stages[k].n == 512) u512 = &rep.stage_solutions[k];
            if (rep.stages[k].n == 1024) u1024 = &rep.stage_solutions[k];
        }
        const auto m512 = exp_moment(*u512, beta, grid);
        const auto m1024 = exp_moment(*u1024, beta, grid);
        const double change = std::abs(m1024.value - m512.value) / m1024.value;
        r.pass = !m512.capped && !m1024.capped && change < 0.10;
        r.detail = detail::fmt("beta=%.4f (S=%.3f, ||f||_{3/2}=%.3f), moment %.5f -> %.5f, change %.2f%%",
                               beta, S, fnorm, m512.value, m1024.value, 100.0 * change);
        return r;
    }

    CriterionResult c12_nonexistence() {
        CriterionResult r{12, "nonexistence flag (zeta=2.2) with existence control (zeta=1.5)", false,
                          ""};
        const int m = opt_.quick ? 9 : 15;
        SingularProblem p;
        p.gamma = 1.0;
        p.s = 0.5;
        p.grid_spec = {2, Shape::Box, m};
        p.weight = WeightSpec::delta_power(2.2);
        p.nonexistence_mode = true;
        const auto rep = detect_nonexistence(p);
        runs_.emplace("nonexistence", rep);

        SingularProblem ctrl = p;
        ctrl.weight = WeightSpec::delta_power(1.5);
        ctrl.nonexistence_mode = false;
        const auto crep = detect_nonexistence(ctrl);
        runs_.emplace("nonexistence_control", crep);

        const bool flag_ok = rep.flag == RunFlag::Nonexistent;
        const bool ctrl_ok = crep.flag == RunFlag::Converged;
        r.pass = flag_ok && ctrl_ok;
        int divergent_count = 0;
        for (const auto& e : rep.refinement_scan) divergent_count += e.divergent ? 1 : 0;
        r.detail = detail::fmt("zeta=2.2 -> %s (%d/%zu L-values divergent), control zeta=1.5 -> %s",
                               to_string(rep.flag), divergent_count, rep.refinement_scan.size(),
                               to_string(crep.flag));
        return r;
    }

    CriterionResult c13_structural() {
        CriterionResult r{13, "structural suite (operator, constants, eigenvalue, formulas)", false,
                          ""};
        std::string det;
        bool ok = true;

        // Operator structure on a dense instance.
        {
            Grid g = build_grid({2, Shape::Box, 9});
            auto op = assemble_operator(g, 0.5, StorageMode::Dense);
            const std::size_t n = op.size();
            double asym = 0.0;
            bool mmatrix = true, dominance = true;
            for (std::size_t i = 0; i < n; ++i) {
                double offsum = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    asym = std::max(asym, std::abs(op.dense[i * n + j] - op.dense[j * n + i]));
                    if (j != i) {
                        if (op.dense[i * n + j] > 0.0) mmatrix = false;
                        offsum += std::abs(op.dense[i * n + j]);
                    }
                }
                if (!(op.dense[i * n + i] > offsum)) dominance = false;
            }
            std::mt19937_64 rng(opt_.seed);
            std::normal_distribution<double> gauss;
            bool spd = true;
            for (int t = 0; t < 10; ++t) {
                std::vector<double> u(n);
                for (auto& x : u) x = gauss(rng);
                if (!(op.quadratic_form(u) > 0.0)) spd = false;
            }
            ok = ok && asym == 0.0 && mmatrix && dominance && spd;
            det += detail::fmt("symmetry defect %.1e, M-matrix %d, dominance %d, SPD %d; ", asym,
                               mmatrix, dominance, spd);
        }

        // Energy identities.
        {
            Grid g = build_grid({2, Shape::Box, 11});
            auto op = assemble_operator(g, 0.5);
            std::mt19937_64 rng(opt_.seed + 1);
            std::normal_distribution<double> gauss;
            std::vector<double> u(g.size());
            for (auto& x : u) x = gauss(rng);
            std::vector<double> Au(g.size());
            op.local.apply(u, Au);
            double loc_energy = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) loc_energy += u[i] * Au[i];
            loc_energy *= op.cell_volume();
            const double dir = dirichlet_energy(u, g);
            const double err_loc = std::abs(loc_energy - dir) / std::abs(dir);

            // Fractional energy against the explicit double sum + exterior terms.
            double dsum = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                for (std::size_t j = 0; j < g.size(); ++j) {
                    if (i == j) continue;
                    const auto &zi = g.index[i], &zj = g.index[j];
                    dsum += 0.5 * op.fractional.weight(zi[0] - zj[0], zi[1] - zj[1], 0) *
                            (u[i] - u[j]) * (u[i] - u[j]);
                }
                dsum += op.fractional.tail[i] * u[i] * u[i];
            }
            dsum *= op.cell_volume();
            const double gag = gagliardo_seminorm(op, u);
            const double err_frac = std::abs(gag - dsum) / std::abs(dsum);
            ok = ok && err_loc <= 1e-10 && err_frac <= 1e-10;
            det += detail::fmt("energy id rel err: local %.1e, fractional %.1e; ", err_loc, err_frac);
        }

        // Normalizing-constant identity against the Gamma closed form.
        {
            double worst = 0.0;
            for (auto [N, s] : std::vector<std::pair<int, double>>{
                     {1, 0.5}, {2, 0.25}, {2, 0.5}, {2, 0.75}, {3, 0.5}}) {
                const double closed = s * std::pow(4.0, s) * std::tgamma(0.5 * N + s) /
                                      (std::pow(std::numbers::pi, 0.5 * N) * std::tgamma(1.0 - s));
                const double product = normalizing_constant(N, s) / closed;
                worst = std::max(worst, std::abs(product - 1.0));
            }
            ok = ok && worst <= 1e-6;
            det += detail::fmt("C(N,s) identity defect %.1e; ", worst);
        }

        // Principal eigenvalue lower bound on the unit square.
        {
            const double two_pi2 = 2.0 * std::numbers::pi * std::numbers::pi;
            double lmin = 1e300;
            for (double s : {0.25, 0.5, 0.75}) {
                Grid g = build_grid({2, Shape::Box, 31});
                auto op = assemble_operator(g, s);
                const auto pair = principal_eigenpair(op);
                lmin = std::min(lmin, pair.lambda);
            }
            ok = ok && lmin >= two_pi2;
            det += detail::fmt("min lambda1 %.4f (>= 2pi^2 = %.4f); ", lmin, two_pi2);
        }

        // Formula identities on random admissible parameters.
        {
            std::mt19937_64 rng(opt_.seed + 2);
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            double worst = 0.0;
            for (int t = 0; t < 200; ++t) {
                const int N = 3 + 2 * (t % 2);
                const double gamma = 3.0 * uni(rng);
                const double zeta = 1.999 * uni(rng);
                const double rr = 1.0 + (0.5 * N - 1.0) * uni(rng) * 0.999;
                const auto tb = exponent_table(N, rr, gamma, zeta);
                worst = std::max(worst, std::abs(*tb.kappa + *tb.beta - 2.0));
                const double sigma_id = N * (*tb.S_r + 1.0) / (N - 2.0);
                worst = std::max(worst, std::abs(sigma_id - *tb.sigma_r) / *tb.sigma_r);
                if (tb.q) {
                    const double q_id = 2.0 * *tb.sigma_r / (1.0 - *tb.S_r + *tb.sigma_r);
                    worst = std::max(worst, std::abs(q_id - *tb.q) / *tb.q);
                }
                const auto t1 = exponent_table(N, 1.0, std::max(gamma, 0.1), zeta);
                worst = std::max(worst, std::abs(*t1.S_r - std::max(gamma, 0.1)));
            }
            ok = ok && worst <= 1e-12;
            det += detail::fmt("formula identity defect %.1e", worst);
        }

        r.pass = ok;
        r.detail = det;
        return r;
    }
};

inline int exit_code(const std::vector<CriterionResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return 1;
    return 0;
}

}  // namespace mixnl::verify
