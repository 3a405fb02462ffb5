#include <doctest.h>

#include <cmath>
#include <set>

#include "mixnl/grid.hpp"

using namespace mixnl;

TEST_CASE("box grid: node count, spacing, center distance") {
    Grid g = build_grid({2, Shape::Box, 7});
    CHECK(g.size() == 49);
    CHECK(g.h == doctest::Approx(0.125).epsilon(1e-15));
    // center node (0.5, 0.5)
    const auto id = g.node_at(3, 3);
    REQUIRE(id >= 0);
    CHECK(g.delta[id] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.diameter == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("ball grid: center distance is 1") {
    Grid g = build_grid({2, Shape::Ball, 7});
    const auto id = g.node_at(3, 3);
    REQUIRE(id >= 0);
    CHECK(g.coord[id][0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(g.delta[id] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.size() <= 49);
    CHECK(g.diameter == 2.0);
}

TEST_CASE("box N=3 m=15: node count and minimal distance by enumeration") {
    Grid g = build_grid({3, Shape::Box, 15});
    CHECK(g.size() == 3375);
    // independent enumeration oracle for min delta
    const double h = 1.0 / 16.0;
    double min_oracle = 1e300;
    for (int iz = 0; iz < 15; ++iz)
        for (int iy = 0; iy < 15; ++iy)
            for (int ix = 0; ix < 15; ++ix) {
                const double x = (ix + 1) * h, y = (iy + 1) * h, z = (iz + 1) * h;
                double d = std::min({x, 1 - x, y, 1 - y, z, 1 - z});
                min_oracle = std::min(min_oracle, d);
            }
    double min_grid = 1e300;
    for (double d : g.delta) min_grid = std::min(min_grid, d);
    CHECK(min_grid == doctest::Approx(min_oracle).epsilon(1e-15));
    CHECK(min_grid == doctest::Approx(h).epsilon(1e-15));
}

TEST_CASE("grid spec validation") {
    CHECK_THROWS_AS(build_grid({2, Shape::Box, 6}), std::invalid_argument);
    CHECK_THROWS_AS(build_grid({4, Shape::Box, 15}), std::invalid_argument);
    CHECK_THROWS_AS(build_grid({1, Shape::Ball, 15}), std::invalid_argument);
}

TEST_CASE("distance invariants: range and Lipschitz across neighbors") {
    for (Shape shape : {Shape::Box, Shape::Ball}) {
        Grid g = build_grid({2, shape, 13});
        for (std::size_t i = 0; i < g.size(); ++i) {
            CHECK(g.delta[i] > 0.0);
            CHECK(g.delta[i] <= g.diameter / 2.0 + 1e-15);
            const auto& z = g.index[i];
            for (auto [dx, dy] : {std::pair{1, 0}, {0, 1}}) {
                const auto j = g.node_at(z[0] + dx, z[1] + dy);
                if (j < 0) continue;
                CHECK(std::abs(g.delta[i] - g.delta[j]) <= g.h + 1e-15);
            }
        }
    }
}

TEST_CASE("delta is invariant under the symmetry group") {
    Grid g = build_grid({2, Shape::Box, 9});
    const int m = 9;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& z = g.index[i];
        const auto flip_x = g.node_at(m - 1 - z[0], z[1]);
        const auto swap_xy = g.node_at(z[1], z[0]);
        REQUIRE(flip_x >= 0);
        REQUIRE(swap_xy >= 0);
        CHECK(g.delta[i] == g.delta[flip_x]);
        CHECK(g.delta[i] == g.delta[swap_xy]);
    }
    Grid b = build_grid({3, Shape::Ball, 9});
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto& z = b.index[i];
        const auto flip = b.node_at(8 - z[0], z[1], z[2]);
        REQUIRE(flip >= 0);
        CHECK(b.delta[i] == doctest::Approx(b.delta[flip]).epsilon(1e-15));
    }
}

TEST_CASE("refinement consistency: coarse box nodes embed in m_fine = 2m+1") {
    Grid coarse = build_grid({2, Shape::Box, 15});
    Grid fine = build_grid({2, Shape::Box, 31});
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        const auto& z = coarse.index[i];
        const auto j = fine.node_at(2 * z[0] + 1, 2 * z[1] + 1);
        REQUIRE(j >= 0);
        CHECK(fine.coord[j][0] == doctest::Approx(coarse.coord[i][0]).epsilon(1e-14));
        CHECK(fine.delta[j] == doctest::Approx(coarse.delta[i]).epsilon(1e-14));
    }
}

TEST_CASE("boundary band: edge cases and enumeration oracle") {
    Grid g = build_grid({2, Shape::Box, 7});
    CHECK(boundary_band(g, g.h / 2.0).empty());

    const double eta = 0.2;
    std::size_t oracle = 0;
    for (double d : g.delta)
        if (d < eta) ++oracle;
    CHECK(boundary_band(g, eta).size() == oracle);

    // all nodes except those with delta >= D/2 - eps
    const double big = g.diameter / 2.0 - 1e-9;
    std::size_t expect = 0;
    for (double d : g.delta)
        if (d < big) ++expect;
    CHECK(boundary_band(g, big).size() == expect);

    CHECK_THROWS_AS(boundary_band(g, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(boundary_band(g, g.diameter), std::invalid_argument);
}
