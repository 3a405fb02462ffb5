#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixnl/operator.hpp"

namespace mixnl {

struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SolveMethod { Direct, ConjugateGradient };

struct SolveOptions {
    SolveMethod method = SolveMethod::ConjugateGradient;
    double tol = 1e-8;       // relative residual target
    int max_iterations = 2000;

    static SolveOptions defaults_for(const MixedOperator& op) {
        SolveOptions o;
        if (op.mode == StorageMode::Dense) {
            o.method = SolveMethod::Direct;
            o.tol = 1e-10;
        }
        return o;
    }
};

struct LinearSolveResult {
    std::vector<double> u;
    int iterations = 0;
    double rel_residual = 0.0;
    SolveMethod method = SolveMethod::ConjugateGradient;
};

/// Reusable solver for systems (A + diag(extra)) u = b.
///
/// Direct mode: dense Cholesky of the materialized matrix, with iterative
/// refinement until the residual contract is met.  CG mode: preconditioned
/// conjugate gradients where the preconditioner is an exact sparse Cholesky
/// of the local stencil plus the full diagonal; the fractional off-diagonal
/// block is the only unpreconditioned piece, so iteration counts stay small
/// at every grid size used here.
class DirichletSolver {
public:
    DirichletSolver(const MixedOperator& op, SolveMethod method)
        : op_(&op), method_(method) {
        if (method_ == SolveMethod::Direct && op.mode != StorageMode::Dense)
            throw std::invalid_argument("DirichletSolver: direct method requires dense storage");
        extra_.assign(op.size(), 0.0);
        rebuild();
    }

    explicit DirichletSolver(const MixedOperator& op)
        : DirichletSolver(op, SolveOptions::defaults_for(op).method) {}

    SolveMethod method() const { return method_; }
    const MixedOperator& op() const { return *op_; }

    /// Replace the extra diagonal (Newton shifts); refactors.
    void set_extra_diagonal(const std::vector<double>& extra) {
        if (extra.size() != op_->size())
            throw std::invalid_argument("set_extra_diagonal: size mismatch");
        extra_ = extra;
        rebuild();
    }

    LinearSolveResult solve(const std::vector<double>& rhs, double tol, int max_iterations) const {
        if (rhs.size() != op_->size()) throw std::invalid_argument("solve: rhs size mismatch");
        const double bnorm = norm2(rhs);
        LinearSolveResult res;
        res.method = method_;
        if (bnorm == 0.0) {
            res.u.assign(rhs.size(), 0.0);
            return res;
        }
        if (method_ == SolveMethod::Direct)
            solve_direct(rhs, bnorm, tol, res);
        else
            solve_cg(rhs, bnorm, tol, max_iterations, res);
        return res;
    }

    LinearSolveResult solve(const std::vector<double>& rhs) const {
        const SolveOptions o = SolveOptions::defaults_for(*op_);
        return solve(rhs, o.tol, o.max_iterations);
    }

private:
    void rebuild() {
        const std::size_t n = op_->size();
        if (method_ == SolveMethod::Direct) {
            Eigen::MatrixXd A(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) A(i, j) = op_->dense[i * n + j];
            for (std::size_t i = 0; i < n; ++i) A(i, i) += extra_[i];
            llt_ = std::make_unique<Eigen::LLT<Eigen::MatrixXd>>(A);
            if (llt_->info() != Eigen::Success)
                throw SolverFailure("DirichletSolver: dense Cholesky failed (matrix not SPD?)");
            return;
        }
        // Sparse preconditioner: local stencil + full diagonal.
        const int deg = 2 * op_->grid.dim();
        const double inv_h2 = 1.0 / (op_->grid.h * op_->grid.h);
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(n * (deg + 1));
        const auto diag = op_->diagonal();
        for (std::size_t i = 0; i < n; ++i) {
            trips.emplace_back(i, i, diag[i] + extra_[i]);
            const std::int32_t* nb = &op_->local.neighbors[i * deg];
            for (int k = 0; k < deg; ++k)
                if (nb[k] >= 0) trips.emplace_back(i, nb[k], -inv_h2);
        }
        Eigen::SparseMatrix<double> P(n, n);
        P.setFromTriplets(trips.begin(), trips.end());
        ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
        ldlt_->compute(P);
        if (ldlt_->info() != Eigen::Success)
            throw SolverFailure("DirichletSolver: preconditioner factorization failed");
    }

    void apply_shifted(const std::vector<double>& x, std::vector<double>& out) const {
        op_->apply(x, out);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] += extra_[i] * x[i];
    }

    void solve_direct(const std::vector<double>& rhs, double bnorm, double tol,
                      LinearSolveResult& res) const {
        const std::size_t n = rhs.size();
        Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), n);
        Eigen::VectorXd x = llt_->solve(b);
        res.u.assign(x.data(), x.data() + n);
        std::vector<double> Ax(n);
        // Iterative refinement until the residual contract holds.
        for (int pass = 0; pass < 4; ++pass) {
            apply_shifted(res.u, Ax);
            double rnorm = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double ri = rhs[i] - Ax[i];
                rnorm += ri * ri;
                Ax[i] = ri;
            }
            res.rel_residual = std::sqrt(rnorm) / bnorm;
            if (res.rel_residual <= tol) return;
            Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(Ax.data(), n);
            Eigen::VectorXd dx = llt_->solve(r);
            for (std::size_t i = 0; i < n; ++i) res.u[i] += dx[i];
            ++res.iterations;
        }
        apply_shifted(res.u, Ax);
        double rnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ri = rhs[i] - Ax[i];
            rnorm += ri * ri;
        }
        res.rel_residual = std::sqrt(rnorm) / bnorm;
        if (res.rel_residual > tol)
            throw SolverFailure("direct solve: residual " + std::to_string(res.rel_residual) +
                                " above tolerance after refinement");
    }

    void solve_cg(const std::vector<double>& rhs, double bnorm, double tol, int max_iterations,
                  LinearSolveResult& res) const {
        const std::size_t n = rhs.size();
        std::vector<double> x(n, 0.0), r(rhs), z(n), p(n), Ap(n);
        auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
            Eigen::Map<const Eigen::VectorXd> vin(in.data(), n);
            Eigen::VectorXd vout = ldlt_->solve(vin);
            out.assign(vout.data(), vout.data() + n);
        };
        precond(r, z);
        p = z;
        double rz = dot(r, z);
        double rnorm = norm2(r);
        int it = 0;
        while (rnorm / bnorm > tol && it < max_iterations) {
            apply_shifted(p, Ap);
            const double pAp = dot(p, Ap);
            if (!(pAp > 0.0))
                throw SolverFailure("cg: non-positive curvature (operator not SPD?)");
            const double alpha = rz / pAp;
            for (std::size_t i = 0; i < n; ++i) {
                x[i] += alpha * p[i];
                r[i] -= alpha * Ap[i];
            }
            precond(r, z);
            const double rz_next = dot(r, z);
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
            rnorm = norm2(r);
            ++it;
        }
        res.u = std::move(x);
        res.iterations = it;
        res.rel_residual = rnorm / bnorm;
        if (res.rel_residual > tol)
            throw SolverFailure("cg: no convergence in " + std::to_string(max_iterations) +
                                " iterations (residual " + std::to_string(res.rel_residual) + ")");
    }

    static double dot(const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
        return acc;
    }
    static double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

    const MixedOperator* op_;
    SolveMethod method_;
    std::vector<double> extra_;
    std::unique_ptr<Eigen::LLT<Eigen::MatrixXd>> llt_;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

/// Solve A u = rhs.  For rhs >= 0, rhs != 0 the result is positive at every
/// interior node (discrete strong maximum principle).
inline LinearSolveResult solve_dirichlet(const MixedOperator& op, const std::vector<double>& rhs,
                                         SolveOptions opts) {
    DirichletSolver solver(op, opts.method);
    return solver.solve(rhs, opts.tol, opts.max_iterations);
}

inline LinearSolveResult solve_dirichlet(const MixedOperator& op, const std::vector<double>& rhs) {
    return solve_dirichlet(op, rhs, SolveOptions::defaults_for(op));
}

/// Discrete energy functional  I_h(u) = 1/2 u^T A u h^N - <rhs, u> h^N.
inline double energy_value(const MixedOperator& op, const std::vector<double>& u,
                           const std::vector<double>& rhs) {
    if (u.size() != rhs.size() || u.size() != op.size())
        throw std::invalid_argument("energy_value: size mismatch");
    double inner = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) inner += rhs[i] * u[i];
    return (0.5 * op.quadratic_form(u) - inner) * op.cell_volume();
}

/// Green column G(., y): solution of A g = e_y / h^N.
inline std::vector<double> green_column(const DirichletSolver& solver, std::size_t y) {
    const MixedOperator& op = solver.op();
    if (y >= op.size()) throw std::invalid_argument("green_column: source index out of range");
    std::vector<double> rhs(op.size(), 0.0);
    rhs[y] = 1.0 / op.cell_volume();
    return solver.solve(rhs, 1e-10, 4000).u;
}

inline std::vector<double> green_column(const MixedOperator& op, std::size_t y) {
    DirichletSolver solver(op);
    return green_column(solver, y);
}

struct EigenPair {
    double lambda = 0.0;
    std::vector<double> phi;  // sup-normalized: max phi = 1
    int iterations = 0;
    double residual = 0.0;  // ||A phi - lambda phi|| / (lambda ||phi||)
};

/// Principal eigenpair by inverse power iteration (tolerance 1e-8 on the
/// eigenvalue drift, cap 500 iterations).
inline EigenPair principal_eigenpair(const MixedOperator& op) {
    DirichletSolver solver(op);
    const std::size_t n = op.size();
    std::vector<double> v(op.grid.delta);  // positive start with good overlap
    double lambda_prev = 0.0;
    EigenPair pair;
    for (int it = 1; it <= 500; ++it) {
        auto w = solver.solve(v, 1e-10, 4000).u;
        double wn = 0.0;
        for (double x : w) wn += x * x;
        wn = std::sqrt(wn);
        for (auto& x : w) x /= wn;
        std::vector<double> Aw;
        op.apply(w, Aw);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num += w[i] * Aw[i];
            den += w[i] * w[i];
        }
        const double lambda = num / den;
        v = w;
        pair.iterations = it;
        if (it > 1 && std::abs(lambda - lambda_prev) <= 1e-8 * std::abs(lambda)) {
            double rnorm = 0.0, wnorm = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double ri = Aw[i] - lambda * w[i];
                rnorm += ri * ri;
                wnorm += w[i] * w[i];
            }
            pair.residual = std::sqrt(rnorm) / (lambda * std::sqrt(wnorm));
            if (pair.residual <= 1e-8) {
                pair.lambda = lambda;
                double vmax = 0.0;
                for (double x : w) vmax = std::max(vmax, x);
                pair.phi = std::move(w);
                for (auto& x : pair.phi) x /= vmax;
                return pair;
            }
        }
        lambda_prev = lambda;
    }
    throw SolverFailure("principal_eigenpair: stagnation after 500 iterations");
}

/// CSV rows "x1,x2[,x3],delta,value" for a grid function.
inline void write_node_csv(const Grid& grid, const std::vector<double>& values,
                           const std::string& path) {
    if (values.size() != grid.size()) throw std::invalid_argument("write_node_csv: size mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_node_csv: cannot open " + path);
    out << (grid.dim() == 2 ? "x1,x2,delta,value\n" : "x1,x2,x3,delta,value\n");
    char buf[160];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& x = grid.coord[i];
        if (grid.dim() == 2)
            std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g\n", x[0], x[1], grid.delta[i],
                          values[i]);
        else
            std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g\n", x[0], x[1], x[2],
                          grid.delta[i], values[i]);
        out << buf;
    }
}

}  // namespace mixnl
