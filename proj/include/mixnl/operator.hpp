#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixnl/grid.hpp"
#include "mixnl/parallel.hpp"
#include "mixnl/quadrature.hpp"

namespace mixnl {

/// Normalizing constant C(N, s) of the fractional Laplacian, computed from
/// the defining integral (radial adaptive quadrature).  N = 1 is supported
/// for validation against known closed-form values only.
inline double normalizing_constant(int N, double s) {
    if (N < 1 || N > 3) throw std::domain_error("normalizing_constant: N must be 1, 2 or 3");
    if (!(s > 0.0) || !(s < 1.0)) throw std::domain_error("normalizing_constant: s must lie in (0,1)");
    return 1.0 / fractional_defining_integral(N, s);
}

enum class StorageMode { Dense, MatrixFree };
enum class SelfCellPolicy { Omit };

struct FractionalParams {
    double s = 0.5;
    double constant = 0.0;       // C(N, s)
    double cutoff_radius = 0.0;  // far-field split radius R
    SelfCellPolicy self_cell = SelfCellPolicy::Omit;

    /// Standard parameters: C(N,s) from quadrature, R = 4 * diam(Omega).
    static FractionalParams standard(int N, double s, double domain_diameter) {
        FractionalParams p;
        p.s = s;
        p.constant = normalizing_constant(N, s);
        p.cutoff_radius = 4.0 * domain_diameter;
        return p;
    }
};

/// Discrete Dirichlet Laplacian (2N+1-point stencil, zero exterior).
class LocalPart {
public:
    int N = 2;
    double h = 0.0;
    /// 2N neighbor node ids per node, -1 where the neighbor is exterior.
    std::vector<std::int32_t> neighbors;

    std::size_t size() const { return neighbors.size() / (2 * N); }

    void apply(const std::vector<double>& u, std::vector<double>& out) const {
        const std::size_t n = size();
        const double inv_h2 = 1.0 / (h * h);
        const int deg = 2 * N;
        parallel_for(n, [&](std::size_t i) {
            double acc = 2.0 * N * u[i];
            const std::int32_t* nb = &neighbors[i * deg];
            for (int k = 0; k < deg; ++k)
                if (nb[k] >= 0) acc -= u[nb[k]];
            out[i] = acc * inv_h2;
        });
    }

    std::vector<double> apply(const std::vector<double>& u) const {
        std::vector<double> out(u.size());
        apply(u, out);
        return out;
    }
};

inline LocalPart assemble_local(const Grid& grid) {
    LocalPart part;
    part.N = grid.dim();
    part.h = grid.h;
    const std::size_t n = grid.size();
    const int deg = 2 * grid.dim();
    part.neighbors.assign(n * deg, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& z = grid.index[i];
        std::int32_t* nb = &part.neighbors[i * deg];
        nb[0] = grid.node_at(z[0] - 1, z[1], z[2]);
        nb[1] = grid.node_at(z[0] + 1, z[1], z[2]);
        nb[2] = grid.node_at(z[0], z[1] - 1, z[2]);
        nb[3] = grid.node_at(z[0], z[1] + 1, z[2]);
        if (grid.dim() == 3) {
            nb[4] = grid.node_at(z[0], z[1], z[2] - 1);
            nb[5] = grid.node_at(z[0], z[1], z[2] + 1);
        }
    }
    return part;
}

/// Discrete fractional Laplacian with zero exterior condition.
///
/// Off-diagonal weights w_ij = C(N,s) h^N |x_i - x_j|^{-N-2s} live in a
/// lattice-offset kernel table (they depend on x_i - x_j only).  The
/// diagonal is sum_j w_ij + tail_i, where tail_i accounts for the zero
/// exterior: midpoint quadrature over B_R(x_i) \ Omega at spacing h plus
/// the exact radial integral beyond R.  The self cell is omitted.
class FractionalPart {
public:
    int N = 2;
    int m = 0;
    double h = 0.0;
    double s = 0.5;
    double constant = 0.0;
    double cutoff_radius = 0.0;
    /// Kernel table over offsets dz in [-(m-1), m-1]^N; entry at dz = 0 is 0.
    std::vector<double> kernel;
    std::vector<double> tail;       // exterior deficit per node
    std::vector<double> diag;       // row sum + tail per node
    std::vector<std::array<int, 3>> index;  // lattice index per node
    bool full_lattice = false;      // box grids: nodes fill [0,m)^N

    std::size_t size() const { return diag.size(); }
    int table_width() const { return 2 * m - 1; }

    double weight(int dx, int dy, int dz) const {
        const int W = table_width(), c = m - 1;
        std::size_t idx = static_cast<std::size_t>(dx + c);
        idx = idx * W + (dy + c);
        if (N == 3) idx = idx * W + (dz + c);
        return kernel[idx];
    }

    void apply(const std::vector<double>& u, std::vector<double>& out) const {
        if (full_lattice && N == 2)
            apply_lattice2d(u, out);
        else
            apply_list(u, out);
    }

    std::vector<double> apply(const std::vector<double>& u) const {
        std::vector<double> out(u.size());
        apply(u, out);
        return out;
    }

private:
    void apply_lattice2d(const std::vector<double>& u, std::vector<double>& out) const {
        const int mm = m, W = table_width(), c = m - 1;
        parallel_for(static_cast<std::size_t>(mm), [&](std::size_t a) {
            for (int b = 0; b < mm; ++b) {
                double acc = 0.0;
                for (int cc = 0; cc < mm; ++cc) {
                    const double* trow =
                        &kernel[(static_cast<std::size_t>(static_cast<int>(a) - cc + c)) * W + (b + c)];
                    const double* urow = &u[static_cast<std::size_t>(cc) * mm];
                    for (int d = 0; d < mm; ++d) acc += trow[-d] * urow[d];
                }
                const std::size_t i = a * mm + b;
                out[i] = diag[i] * u[i] - acc;
            }
        });
    }

    void apply_list(const std::vector<double>& u, std::vector<double>& out) const {
        const std::size_t n = size();
        const int W = table_width(), c = m - 1;
        parallel_for(n, [&](std::size_t i) {
            const auto zi = index[i];
            double acc = 0.0;
            if (N == 2) {
                for (std::size_t j = 0; j < n; ++j) {
                    const auto& zj = index[j];
                    acc += kernel[static_cast<std::size_t>(zi[0] - zj[0] + c) * W +
                                  (zi[1] - zj[1] + c)] *
                           u[j];
                }
            } else {
                for (std::size_t j = 0; j < n; ++j) {
                    const auto& zj = index[j];
                    acc += kernel[(static_cast<std::size_t>(zi[0] - zj[0] + c) * W +
                                   (zi[1] - zj[1] + c)) *
                                      W +
                                  (zi[2] - zj[2] + c)] *
                           u[j];
                }
            }
            out[i] = diag[i] * u[i] - acc;
        });
    }
};

namespace detail {

/// Lattice sum  S = sum_{0 < |z| <= rho, z in Z^N} |z|^{-N-2s},
/// by octant symmetry.
inline double lattice_kernel_sum(int N, double s, double rho) {
    const double rho2 = rho * rho;
    const int zmax = static_cast<int>(rho);
    const double expo = -0.5 * (N + 2.0 * s);
    std::vector<double> slice(static_cast<std::size_t>(zmax) + 1, 0.0);
    parallel_for(static_cast<std::size_t>(zmax) + 1, [&](std::size_t zi) {
        const int z1 = static_cast<int>(zi);
        const double w1 = z1 > 0 ? 2.0 : 1.0;
        double acc = 0.0;
        for (int z2 = 0; z2 <= zmax; ++z2) {
            const double w12 = w1 * (z2 > 0 ? 2.0 : 1.0);
            const double d12 = static_cast<double>(z1) * z1 + static_cast<double>(z2) * z2;
            if (d12 > rho2) break;
            if (N == 2) {
                if (z1 != 0 || z2 != 0) acc += w12 * std::pow(d12, expo);
            } else {
                for (int z3 = 0; z3 <= zmax; ++z3) {
                    const double d = d12 + static_cast<double>(z3) * z3;
                    if (d > rho2) break;
                    if (z1 == 0 && z2 == 0 && z3 == 0) continue;
                    acc += w12 * (z3 > 0 ? 2.0 : 1.0) * std::pow(d, expo);
                }
            }
        }
        slice[zi] = acc;
    });
    double total = 0.0;
    for (double v : slice) total += v;
    return total;
}

}  // namespace detail

inline FractionalPart assemble_fractional(const Grid& grid, const FractionalParams& params) {
    if (!(params.s > 0.0) || !(params.s < 1.0))
        throw std::domain_error("assemble_fractional: s must lie in (0,1)");
    if (!(params.constant > 0.0))
        throw std::invalid_argument("assemble_fractional: normalizing constant must be positive");
    if (params.cutoff_radius < 2.0 * grid.diameter)
        throw std::invalid_argument("assemble_fractional: cutoff radius below 2*diam(Omega)");

    FractionalPart part;
    part.N = grid.dim();
    part.m = grid.m();
    part.h = grid.h;
    part.s = params.s;
    part.constant = params.constant;
    part.cutoff_radius = params.cutoff_radius;
    part.index = grid.index;
    part.full_lattice = grid.spec.shape == Shape::Box;

    const int N = part.N, m = part.m;
    const double h = part.h, s = params.s, C = params.constant;
    const double scale = C * std::pow(h, -2.0 * s);

    // Kernel table over lattice offsets.
    const int W = 2 * m - 1, c = m - 1;
    const std::size_t tsize = N == 2 ? static_cast<std::size_t>(W) * W
                                     : static_cast<std::size_t>(W) * W * W;
    part.kernel.assign(tsize, 0.0);
    const double expo = -0.5 * (N + 2.0 * s);
    if (N == 2) {
        for (int a = -c; a <= c; ++a)
            for (int b = -c; b <= c; ++b) {
                if (a == 0 && b == 0) continue;
                const double d2 = static_cast<double>(a) * a + static_cast<double>(b) * b;
                part.kernel[static_cast<std::size_t>(a + c) * W + (b + c)] =
                    scale * std::pow(d2, expo);
            }
    } else {
        for (int a = -c; a <= c; ++a)
            for (int b = -c; b <= c; ++b)
                for (int d = -c; d <= c; ++d) {
                    if (a == 0 && b == 0 && d == 0) continue;
                    const double d2 = static_cast<double>(a) * a + static_cast<double>(b) * b +
                                      static_cast<double>(d) * d;
                    part.kernel[(static_cast<std::size_t>(a + c) * W + (b + c)) * W + (d + c)] =
                        scale * std::pow(d2, expo);
                }
    }

    // Row sums over interior nodes = correlation with the all-ones vector.
    const std::size_t n = grid.size();
    part.diag.assign(n, 0.0);
    part.tail.assign(n, 0.0);
    std::vector<double> ones(n, 1.0), rowsum(n);
    part.apply(ones, rowsum);  // diag is zero, so this yields -rowsum
    for (std::size_t i = 0; i < n; ++i) rowsum[i] = -rowsum[i];

    // All-lattice sum within the cutoff ball and exact far field.
    const double S = detail::lattice_kernel_sum(N, s, params.cutoff_radius / h);
    const double pi = std::numbers::pi;
    const double omega = N == 2 ? 2.0 * pi : 4.0 * pi;
    const double far = C * omega * std::pow(params.cutoff_radius, -2.0 * s) / (2.0 * s);
    const double all = scale * S;

    for (std::size_t i = 0; i < n; ++i) {
        part.tail[i] = (all - rowsum[i]) + far;
        part.diag[i] = rowsum[i] + part.tail[i];
    }
    return part;
}

/// Assembled discrete form of  -Laplace + (-Laplace)^s  with homogeneous
/// Dirichlet exterior condition.  Symmetric positive definite M-matrix.
class MixedOperator {
public:
    Grid grid;
    FractionalParams params;
    StorageMode mode = StorageMode::MatrixFree;
    LocalPart local;
    FractionalPart fractional;
    std::vector<double> dense;  // row-major n x n when mode == Dense

    std::size_t size() const { return grid.size(); }

    void apply(const std::vector<double>& u, std::vector<double>& out) const {
        if (u.size() != size()) throw std::invalid_argument("MixedOperator::apply: size mismatch");
        out.resize(u.size());
        if (mode == StorageMode::Dense) {
            const std::size_t n = size();
            parallel_for(n, [&](std::size_t i) {
                const double* row = &dense[i * n];
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += row[j] * u[j];
                out[i] = acc;
            });
            return;
        }
        apply_matrix_free(u, out);
    }

    std::vector<double> apply(const std::vector<double>& u) const {
        std::vector<double> out;
        apply(u, out);
        return out;
    }

    /// Matrix-free application, available in both storage modes.
    void apply_matrix_free(const std::vector<double>& u, std::vector<double>& out) const {
        out.resize(u.size());
        std::vector<double> tmp(u.size());
        fractional.apply(u, tmp);
        local.apply(u, out);
        for (std::size_t i = 0; i < u.size(); ++i) out[i] += tmp[i];
    }

    double quadratic_form(const std::vector<double>& u) const {
        std::vector<double> Au;
        apply(u, Au);
        double acc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * Au[i];
        return acc;
    }

    /// Diagonal of A (local stencil + fractional diagonal).
    std::vector<double> diagonal() const {
        const double inv_h2 = 1.0 / (grid.h * grid.h);
        std::vector<double> d(size());
        for (std::size_t i = 0; i < size(); ++i)
            d[i] = 2.0 * grid.dim() * inv_h2 + fractional.diag[i];
        return d;
    }

    double cell_volume() const { return std::pow(grid.h, grid.dim()); }
};

inline void materialize_dense(MixedOperator& op) {
    const std::size_t n = op.size();
    op.dense.assign(n * n, 0.0);
    const double inv_h2 = 1.0 / (op.grid.h * op.grid.h);
    const int deg = 2 * op.grid.dim();
    parallel_for(n, [&](std::size_t i) {
        double* row = &op.dense[i * n];
        const auto zi = op.grid.index[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto& zj = op.grid.index[j];
            row[j] = -op.fractional.weight(zi[0] - zj[0], zi[1] - zj[1], zi[2] - zj[2]);
        }
        const std::int32_t* nb = &op.local.neighbors[i * deg];
        for (int k = 0; k < deg; ++k)
            if (nb[k] >= 0) row[nb[k]] -= inv_h2;
        row[i] = 2.0 * op.grid.dim() * inv_h2 + op.fractional.diag[i];
    });
    op.mode = StorageMode::Dense;
}

inline MixedOperator assemble_operator(const Grid& grid, const FractionalParams& params,
                                       StorageMode mode = StorageMode::MatrixFree) {
    MixedOperator op;
    op.grid = grid;
    op.params = params;
    op.local = assemble_local(grid);
    op.fractional = assemble_fractional(grid, params);
    if (mode == StorageMode::Dense) materialize_dense(op);
    return op;
}

inline MixedOperator assemble_operator(const Grid& grid, double s,
                                       StorageMode mode = StorageMode::MatrixFree) {
    return assemble_operator(grid, FractionalParams::standard(grid.dim(), s, grid.diameter), mode);
}

/// apply_operator(op, u) = (A_loc + A_frac) u.
inline std::vector<double> apply_operator(const MixedOperator& op, const std::vector<double>& u) {
    return op.apply(u);
}

/// Discrete weak-formulation residual: max over unit-bump test vectors of
/// |<A u - rhs, psi> h^N|.
inline double weak_residual(const MixedOperator& op, const std::vector<double>& u,
                            const std::vector<double>& rhs) {
    if (u.size() != rhs.size() || u.size() != op.size())
        throw std::invalid_argument("weak_residual: size mismatch");
    std::vector<double> Au;
    op.apply(u, Au);
    double worst = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        worst = std::max(worst, std::abs(Au[i] - rhs[i]));
    return worst * op.cell_volume();
}

/// Binary dump of the dense matrix: header uint32 N, uint32 m, float64 s,
/// then n*n row-major little-endian doubles.
inline void dump_dense(const MixedOperator& op, const std::string& path) {
    if (op.mode != StorageMode::Dense)
        throw std::logic_error("dump_dense: operator not materialized as dense");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("dump_dense: cannot open " + path);
    const std::uint32_t N = static_cast<std::uint32_t>(op.grid.dim());
    const std::uint32_t m = static_cast<std::uint32_t>(op.grid.m());
    const double s = op.params.s;
    out.write(reinterpret_cast<const char*>(&N), sizeof N);
    out.write(reinterpret_cast<const char*>(&m), sizeof m);
    out.write(reinterpret_cast<const char*>(&s), sizeof s);
    out.write(reinterpret_cast<const char*>(op.dense.data()),
              static_cast<std::streamsize>(op.dense.size() * sizeof(double)));
}

}  // namespace mixnl
