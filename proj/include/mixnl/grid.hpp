#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixnl {

enum class Shape { Box, Ball };

/// Uniform Cartesian discretization parameters.
///
/// Box: interior nodes at x_k = (i_k + 1) h, i_k in [0, m), h = 1/(m+1).
/// Ball: lattice x_k = -1 + (i_k + 1) h, h = 2/(m+1); a node is interior
/// iff its center lies strictly inside the unit ball.
struct GridSpec {
    int N = 2;
    Shape shape = Shape::Box;
    int m = 31;

    double spacing() const { return shape == Shape::Box ? 1.0 / (m + 1) : 2.0 / (m + 1); }

    void validate() const {
        if (N != 2 && N != 3) throw std::invalid_argument("GridSpec: N must be 2 or 3");
        if (m < 7) throw std::invalid_argument("GridSpec: m must be >= 7");
    }
};

/// Immutable interior-node set with exact boundary distances.
class Grid {
public:
    GridSpec spec;
    double h = 0.0;
    double diameter = 0.0;
    /// Integer lattice index per node, N entries each in [0, m).
    std::vector<std::array<int, 3>> index;
    /// Physical coordinates, N entries used.
    std::vector<std::array<double, 3>> coord;
    /// Exact distance to the boundary per node.
    std::vector<double> delta;
    /// Lattice index -> node id, or -1 if that lattice point is exterior.
    std::vector<std::int32_t> node_of_cell;

    std::size_t size() const { return coord.size(); }
    int dim() const { return spec.N; }
    int m() const { return spec.m; }

    /// Node id at lattice index (ix, iy, iz), -1 if not an interior node.
    std::int32_t node_at(int ix, int iy, int iz = 0) const {
        if (ix < 0 || iy < 0 || iz < 0) return -1;
        const int mm = spec.m;
        if (ix >= mm || iy >= mm || (spec.N == 3 && iz >= mm)) return -1;
        if (spec.N == 2 && iz != 0) return -1;
        return node_of_cell[flat(ix, iy, iz)];
    }

    std::size_t flat(int ix, int iy, int iz) const {
        const std::size_t mm = static_cast<std::size_t>(spec.m);
        return spec.N == 2 ? static_cast<std::size_t>(iy) * mm + ix
                           : (static_cast<std::size_t>(iz) * mm + iy) * mm + ix;
    }
};

inline Grid build_grid(const GridSpec& spec) {
    spec.validate();
    Grid g;
    g.spec = spec;
    g.h = spec.spacing();
    g.diameter = spec.shape == Shape::Box ? std::sqrt(static_cast<double>(spec.N)) : 2.0;

    const int m = spec.m;
    const std::size_t cells =
        spec.N == 2 ? static_cast<std::size_t>(m) * m : static_cast<std::size_t>(m) * m * m;
    g.node_of_cell.assign(cells, -1);

    auto coord_of = [&](int i) {
        return spec.shape == Shape::Box ? (i + 1) * g.h : -1.0 + (i + 1) * g.h;
    };

    const int zmax = spec.N == 3 ? m : 1;
    for (int iz = 0; iz < zmax; ++iz) {
        for (int iy = 0; iy < m; ++iy) {
            for (int ix = 0; ix < m; ++ix) {
                std::array<double, 3> x{coord_of(ix), coord_of(iy),
                                        spec.N == 3 ? coord_of(iz) : 0.0};
                double d;
                if (spec.shape == Shape::Box) {
                    d = std::min(x[0], 1.0 - x[0]);
                    d = std::min(d, std::min(x[1], 1.0 - x[1]));
                    if (spec.N == 3) d = std::min(d, std::min(x[2], 1.0 - x[2]));
                } else {
                    double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                    double r = std::sqrt(r2);
                    if (r >= 1.0) continue;
                    d = 1.0 - r;
                }
                g.node_of_cell[g.flat(ix, iy, iz)] = static_cast<std::int32_t>(g.size());
                g.index.push_back({ix, iy, iz});
                g.coord.push_back(x);
                g.delta.push_back(d);
            }
        }
    }
    return g;
}

/// Indices of the nodes in the band { delta < eta }.
inline std::vector<std::size_t> boundary_band(const Grid& grid, double eta) {
    if (!(eta > 0.0) || !(eta < grid.diameter / 2.0))
        throw std::invalid_argument("boundary_band: eta must lie in (0, diameter/2)");
    std::vector<std::size_t> band;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid.delta[i] < eta) band.push_back(i);
    return band;
}

}  // namespace mixnl
