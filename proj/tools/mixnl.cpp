// mixnl: mixed local-nonlocal singular elliptic solver and verification CLI.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mixnl/analysis.hpp"
#include "mixnl/grid.hpp"
#include "mixnl/linsolve.hpp"
#include "mixnl/operator.hpp"
#include "mixnl/singular.hpp"
#include "mixnl/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitSolverFailure = 3;

struct CommonOpts {
    int N = 2;
    std::string shape = "box";
    int m = 63;
    double s = 0.5;
};

mixnl::GridSpec grid_spec_of(const CommonOpts& c) {
    mixnl::GridSpec spec;
    spec.N = c.N;
    spec.shape = c.shape == "ball" ? mixnl::Shape::Ball : mixnl::Shape::Box;
    spec.m = c.m;
    spec.validate();
    return spec;
}

/// Weight mini-language: const:<v>, deltapow:<zeta>, file:<path>.
mixnl::WeightSpec parse_weight(const std::string& text, double r, const mixnl::Grid& grid) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--weight", "expected const:<v>, deltapow:<zeta> or file:<path>");
    const std::string kind = text.substr(0, colon), arg = text.substr(colon + 1);
    if (kind == "const") {
        const double v = std::stod(arg);
        if (!(v >= 0.0)) throw CLI::ValidationError("--weight", "const value must be >= 0");
        return mixnl::WeightSpec::lebesgue(std::vector<double>(grid.size(), v), r);
    }
    if (kind == "deltapow") return mixnl::WeightSpec::delta_power(std::stod(arg));
    if (kind == "file") {
        std::ifstream in(arg);
        if (!in) throw CLI::ValidationError("--weight", "cannot open " + arg);
        int N = 0, m = 0;
        char comma = 0;
        in >> N >> comma >> m;
        if (N != grid.dim() || m != grid.m())
            throw CLI::ValidationError("--weight", "file header N,m does not match the grid");
        std::vector<double> f(grid.size());
        for (auto& x : f)
            if (!(in >> x)) throw CLI::ValidationError("--weight", "truncated grid-function file");
        return mixnl::WeightSpec::lebesgue(std::move(f), r);
    }
    throw CLI::ValidationError("--weight", "unknown weight kind '" + kind + "'");
}

std::vector<int> parse_schedule(const std::string& text) {
    if (text.empty()) return mixnl::default_schedule();
    std::vector<int> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

void write_profile_csv(const mixnl::Grid& grid, const std::vector<double>& u,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "delta,u\n";
    char buf[80];
    for (auto id : mixnl::boundary_fit_ray(grid)) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", grid.delta[id], u[id]);
        out << buf;
    }
}

int run_solve(const CommonOpts& common, double gamma, const std::string& weight_text, double r,
              const std::string& schedule_text, double newton_tol, double continuation_tol,
              bool nonexistence, const std::string& out_path, const std::string& profile_path,
              const std::string& matrix_dump) {
    const auto spec = grid_spec_of(common);
    const mixnl::Grid grid = mixnl::build_grid(spec);
    mixnl::SingularProblem problem;
    problem.gamma = gamma;
    problem.s = common.s;
    problem.grid_spec = spec;
    problem.weight = parse_weight(weight_text, r, grid);
    problem.schedule = parse_schedule(schedule_text);
    problem.newton_tol = newton_tol;
    problem.continuation_tol = continuation_tol;

    const bool zeta_high = problem.weight.kind == mixnl::WeightSpec::Kind::SingularPower &&
                           problem.weight.zeta >= 2.0;
    problem.nonexistence_mode = nonexistence || zeta_high;
    problem.validate();

    if (!matrix_dump.empty()) {
        auto op = mixnl::assemble_operator(grid, common.s, mixnl::StorageMode::Dense);
        mixnl::dump_dense(op, matrix_dump);
    }

    const mixnl::SolutionReport report = problem.nonexistence_mode
                                             ? mixnl::detect_nonexistence(problem)
                                             : mixnl::continuation_solve(problem);

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out << report.to_json().dump(2) << "\n";
    if (spec.shape == mixnl::Shape::Box) write_profile_csv(grid, report.u, profile_path);

    std::printf("flag=%s", mixnl::to_string(report.flag));
    if (report.fit) std::printf("  fitted_exponent=%.4f (r2=%.4f)", report.fit->exponent, report.fit->r2);
    std::printf("  report=%s\n", out_path.c_str());
    return kExitOk;
}

int run_sweep(const CommonOpts& common, const std::string& gamma_list,
              const std::string& zeta_list, const std::string& out_path, int workers) {
    const auto spec = grid_spec_of(common);
    const auto gammas = parse_list(gamma_list);
    const auto zetas = parse_list(zeta_list);
    struct Entry {
        double gamma, zeta;
        std::string line;
    };
    std::vector<Entry> entries;
    for (double g : gammas)
        for (double z : zetas) entries.push_back({g, z, ""});

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= entries.size()) return;
            auto& e = entries[k];
            const double kappa_pred = e.zeta + e.gamma > 1.0
                                          ? (2.0 - e.zeta) / (e.gamma + 1.0)
                                          : 1.0;
            char buf[256];
            try {
                mixnl::SingularProblem p;
                p.gamma = e.gamma;
                p.s = common.s;
                p.grid_spec = spec;
                p.weight = mixnl::WeightSpec::delta_power(e.zeta);
                const auto rep = mixnl::continuation_solve(p);
                if (rep.fit)
                    std::snprintf(buf, sizeof buf, "%d,%d,%g,%g,%g,%.6g,%.6g,%.3g,%.6g,%s\n",
                                  spec.N, spec.m, common.s, e.gamma, e.zeta, kappa_pred,
                                  rep.fit->exponent, rep.fit->stderr_, rep.fit->r2,
                                  mixnl::to_string(rep.flag));
                else
                    std::snprintf(buf, sizeof buf, "%d,%d,%g,%g,%g,%.6g,,,,%s\n", spec.N, spec.m,
                                  common.s, e.gamma, e.zeta, kappa_pred,
                                  mixnl::to_string(rep.flag));
            } catch (const std::exception&) {
                std::snprintf(buf, sizeof buf, "%d,%d,%g,%g,%g,%.6g,,,,FAILED\n", spec.N, spec.m,
                              common.s, e.gamma, e.zeta, kappa_pred);
            }
            e.line = buf;
        }
    };
    const int W = std::max(1, std::min<int>(workers, static_cast<int>(entries.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < W; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out << "N,m,s,gamma,zeta_or_r,kappa_pred,kappa_fit,stderr,r2,flag\n";
    for (const auto& e : entries) out << e.line;
    std::printf("sweep: %zu entries -> %s\n", entries.size(), out_path.c_str());
    return kExitOk;
}

int run_green(const CommonOpts& common, int n_sources, std::uint64_t seed,
              const std::string& out_prefix) {
    const auto spec = grid_spec_of(common);
    const mixnl::Grid grid = mixnl::build_grid(spec);
    const auto op = mixnl::assemble_operator(grid, common.s);
    mixnl::DirichletSolver solver(op);

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid.delta[i] >= 2.0 * grid.h) candidates.push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> sources;
    for (int k = 0; k < n_sources; ++k)
        sources.push_back(candidates[rng() % candidates.size()]);

    std::vector<std::vector<double>> cols;
    for (std::size_t k = 0; k < sources.size(); ++k) {
        cols.push_back(mixnl::green_column(solver, sources[k]));
        mixnl::write_node_csv(grid, cols.back(), out_prefix + "_" + std::to_string(k) + ".csv");
    }

    // Two-sided kernel-bound ratio statistics (N = 3 only).
    nlohmann::json stats;
    stats["schema_version"] = 1;
    stats["sources"] = sources;
    if (grid.dim() == 3) {
        double lo = 1e300, hi = 0.0;
        for (std::size_t k = 0; k < sources.size(); ++k) {
            const std::size_t y = sources[k];
            for (std::size_t x = 0; x < grid.size(); ++x) {
                if (grid.delta[x] < 2.0 * grid.h || grid.delta[y] < 2.0 * grid.h) continue;
                const double dist = std::hypot(grid.coord[x][0] - grid.coord[y][0],
                                               grid.coord[x][1] - grid.coord[y][1],
                                               grid.coord[x][2] - grid.coord[y][2]);
                if (dist < 2.0 * grid.h) continue;
                const double est = (1.0 / dist) *
                                   std::min(grid.delta[x] * grid.delta[y] / (dist * dist), 1.0);
                lo = std::min(lo, cols[k][x] / est);
                hi = std::max(hi, cols[k][x] / est);
            }
        }
        stats["kernel_ratio_min"] = lo;
        stats["kernel_ratio_max"] = hi;
        stats["kernel_ratio_spread"] = hi / lo;
    }
    double sym = 0.0, gmax = 0.0;
    for (std::size_t k = 0; k < sources.size(); ++k) {
        for (double v : cols[k]) gmax = std::max(gmax, v);
        for (std::size_t j = 0; j < k; ++j)
            sym = std::max(sym, std::abs(cols[k][sources[j]] - cols[j][sources[k]]));
    }
    stats["symmetry_defect"] = sym;
    stats["green_max"] = gmax;
    std::cout << stats.dump(2) << "\n";
    return kExitOk;
}

int run_eigen(const CommonOpts& common, const std::string& out_path) {
    const auto spec = grid_spec_of(common);
    const mixnl::Grid grid = mixnl::build_grid(spec);
    const auto op = mixnl::assemble_operator(grid, common.s);
    const auto pair = mixnl::principal_eigenpair(op);
    mixnl::write_node_csv(grid, pair.phi, out_path);
    std::printf("lambda1=%.10g  iterations=%d  residual=%.3g", pair.lambda, pair.iterations,
                pair.residual);
    if (spec.shape == mixnl::Shape::Box) {
        const auto fit = mixnl::fit_boundary_exponent(pair.phi, grid);
        std::printf("  boundary_exponent=%.4f (r2=%.4f)", fit.exponent, fit.r2);
    }
    std::printf("  csv=%s\n", out_path.c_str());
    return kExitOk;
}

int run_formulas(int N, double r, double gamma, double zeta) {
    const auto t = mixnl::exponent_table(N, r, gamma, zeta);
    std::printf("N=%d r=%g gamma=%g", t.N, t.r, t.gamma);
    if (std::isfinite(zeta)) std::printf(" zeta=%g", t.zeta);
    std::printf("\n");
    auto show = [](const char* name, const std::optional<double>& v) {
        if (v) std::printf("  %-12s = %.10g\n", name, *v);
    };
    show("q", t.q);
    show("r_sharp", t.r_sharp);
    show("S_r", t.S_r);
    show("sigma_r", t.sigma_r);
    show("lower_bound", t.lower_bound);
    show("two_star", t.two_star);
    show("L_star", t.L_star);
    show("kappa", t.kappa);
    show("beta", t.beta);
    if (t.w1q_regime) std::printf("  regime: W^{1,q} existence (r < r_sharp, gamma < 1)\n");
    if (t.limit_case) std::printf("  regime: limit case r = N/2 (exponential integrability)\n");
    if (t.strong_case) std::printf("  regime: strong case r > N/2 (bounded solutions)\n");
    if (t.zeta_nonexistence) std::printf("  regime: zeta >= 2 (nonexistence)\n");
    if (std::isfinite(zeta))
        std::printf("  regime: zeta+gamma %s 1\n",
                    t.zeta_gamma_regime < 0 ? "<" : (t.zeta_gamma_regime > 0 ? ">" : "="));
    return kExitOk;
}

int run_verify(bool quick, int criterion, std::uint64_t seed) {
    mixnl::verify::Options opt;
    opt.quick = quick;
    opt.seed = seed;
    mixnl::verify::AcceptanceSuite suite(opt);
    if (criterion > 0) {
        const auto r = suite.run(criterion);
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << "criterion " << r.id << ": " << r.name
                  << " -- " << r.detail << "\n";
        return r.pass ? kExitOk : kExitVerifyFailure;
    }
    const auto results = suite.run_all(&std::cout);
    return mixnl::verify::exit_code(results);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixed local-nonlocal singular elliptic solver"};
    app.set_config("--config");
    app.require_subcommand(1);

    CommonOpts common;
    auto add_common = [&common](CLI::App* cmd) {
        cmd->add_option("--N", common.N, "dimension (2 or 3)");
        cmd->add_option("--shape", common.shape, "box or ball")
            ->check(CLI::IsMember({"box", "ball"}));
        cmd->add_option("--m", common.m, "interior nodes per axis");
        cmd->add_option("--s", common.s, "fractional order in (0,1)");
    };

    // solve
    auto* solve = app.add_subcommand("solve", "monotone continuation solve, JSON report + profile");
    add_common(solve);
    double gamma = 0.5, r = std::numeric_limits<double>::infinity();
    std::string weight_text = "const:1", schedule_text, out_path = "solve_report.json",
                profile_path = "profile.csv", matrix_dump;
    double newton_tol = 1e-11, continuation_tol = 1e-3;
    bool nonexistence = false;
    solve->add_option("--gamma", gamma, "singular exponent gamma >= 0");
    solve->add_option("--weight", weight_text, "const:<v> | deltapow:<zeta> | file:<path>");
    solve->add_option("--r", r, "summability label for Lebesgue weights");
    solve->add_option("--schedule", schedule_text, "comma-separated n-schedule (default 1..1024)");
    solve->add_option("--newton-tol", newton_tol, "inner Newton tolerance");
    solve->add_option("--continuation-tol", continuation_tol, "relative sup-change tolerance");
    solve->add_flag("--nonexistence", nonexistence, "run the mesh-refinement nonexistence ladder");
    solve->add_option("--out", out_path, "JSON report path");
    solve->add_option("--profile", profile_path, "radial profile CSV path");
    solve->add_option("--dump-matrix", matrix_dump, "binary dense-operator dump path");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "parameter sweep, CSV output");
    add_common(sweep);
    std::string gamma_list = "0.5,1.0", zeta_list = "0.25,0.75,1.5", sweep_out = "sweep.csv";
    int workers = std::max(1u, mixnl::thread_count() / 2);
    sweep->add_option("--gamma", gamma_list, "comma-separated gamma values");
    sweep->add_option("--zeta", zeta_list, "comma-separated zeta values");
    sweep->add_option("--out", sweep_out, "sweep CSV path");
    sweep->add_option("--workers", workers, "worker pool size");

    // green
    auto* green = app.add_subcommand("green", "Green columns CSV + kernel ratio statistics");
    add_common(green);
    int n_sources = 5;
    std::uint64_t seed = 2024;
    std::string green_prefix = "green";
    green->add_option("--sources", n_sources, "number of source nodes");
    green->add_option("--seed", seed, "source sampling seed");
    green->add_option("--out-prefix", green_prefix, "output CSV prefix");

    // eigen
    auto* eigen = app.add_subcommand("eigen", "principal eigenpair CSV");
    add_common(eigen);
    std::string eigen_out = "eigen.csv";
    eigen->add_option("--out", eigen_out, "eigenfunction CSV path");

    // formulas
    auto* formulas = app.add_subcommand("formulas", "exponent formula table");
    int fN = 3;
    double fr = 1.0, fgamma = 0.5, fzeta = std::numeric_limits<double>::quiet_NaN();
    formulas->add_option("--N", fN, "dimension");
    formulas->add_option("--r", fr, "summability exponent");
    formulas->add_option("--gamma", fgamma, "singular exponent");
    formulas->add_option("--zeta", fzeta, "weight exponent (optional)");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run the acceptance suite");
    bool quick = false;
    int criterion = 0;
    std::uint64_t vseed = 2024;
    verify_cmd->add_flag("--quick", quick, "reduced resolutions (indicative)");
    verify_cmd->add_option("--criterion", criterion, "run a single criterion (1..13)");
    verify_cmd->add_option("--seed", vseed, "seed for randomized checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (*solve)
            return run_solve(common, gamma, weight_text, r, schedule_text, newton_tol,
                             continuation_tol, nonexistence, out_path, profile_path, matrix_dump);
        if (*sweep) return run_sweep(common, gamma_list, zeta_list, sweep_out, workers);
        if (*green) return run_green(common, n_sources, seed, green_prefix);
        if (*eigen) return run_eigen(common, eigen_out);
        if (*formulas) return run_formulas(fN, fr, fgamma, fzeta);
        if (*verify_cmd) return run_verify(quick, criterion, vseed);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::domain_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const mixnl::SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolverFailure;
    }
    return kExitConfigError;
}
