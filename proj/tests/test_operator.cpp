#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mixnl/operator.hpp"

using namespace mixnl;

namespace {

// Independent closed form for C(N,s) via Gamma functions.
double gamma_closed_form(int N, double s) {
    return s * std::pow(4.0, s) * std::tgamma(0.5 * N + s) /
           (std::pow(std::numbers::pi, 0.5 * N) * std::tgamma(1.0 - s));
}

// Brute-force exterior tail for one node: midpoint quadrature over the full
// lattice inside B_R minus the interior nodes, plus the exact far field.
double oracle_tail(const Grid& g, std::size_t i, double s, double C, double R) {
    const double h = g.h;
    const int reach = static_cast<int>(R / h) + 1;
    const auto& zi = g.index[i];
    double sum = 0.0;
    for (int a = -reach; a <= reach; ++a)
        for (int b = -reach; b <= reach; ++b) {
            if (a == 0 && b == 0) continue;
            const double d2 = (static_cast<double>(a) * a + static_cast<double>(b) * b) * h * h;
            if (d2 > R * R) continue;
            const int jx = zi[0] + a, jy = zi[1] + b;
            if (g.node_at(jx, jy) >= 0) continue;  // interior pair, not exterior
            sum += C * h * h * std::pow(d2, -0.5 * (2.0 + 2.0 * s));
        }
    const double far = C * 2.0 * std::numbers::pi * std::pow(R, -2.0 * s) / (2.0 * s);
    return sum + far;
}

std::vector<double> random_field(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<double> u(n);
    for (auto& x : u) x = gauss(rng);
    return u;
}

}  // namespace

TEST_CASE("normalizing constant: quadrature vs Gamma closed form") {
    CHECK(normalizing_constant(1, 0.5) ==
          doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-6));
    for (int N : {1, 2, 3})
        for (double s : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const double quad = normalizing_constant(N, s);
            const double closed = gamma_closed_form(N, s);
            CHECK(quad == doctest::Approx(closed).epsilon(1e-6));
        }
    CHECK_THROWS_AS(normalizing_constant(2, 0.0), std::domain_error);
    CHECK_THROWS_AS(normalizing_constant(2, 1.0), std::domain_error);
    CHECK_THROWS_AS(normalizing_constant(4, 0.5), std::domain_error);
}

TEST_CASE("local part: zero, row sums, quadratic consistency") {
    Grid g = build_grid({2, Shape::Box, 15});
    LocalPart loc = assemble_local(g);

    std::vector<double> zero(g.size(), 0.0);
    for (double v : loc.apply(zero)) CHECK(v == 0.0);

    // row sums vanish where the full stencil is interior
    std::vector<double> ones(g.size(), 1.0);
    auto r = loc.apply(ones);
    // quadratic x -> x^2 has exact discrete second difference
    std::vector<double> q(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) q[i] = g.coord[i][0] * g.coord[i][0];
    auto Aq = loc.apply(q);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& z = g.index[i];
        const bool inner = z[0] > 0 && z[0] < 14 && z[1] > 0 && z[1] < 14;
        if (!inner) continue;
        CHECK(r[i] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(Aq[i] == doctest::Approx(-2.0).epsilon(1e-10));
    }
}

TEST_CASE("local part: Dirichlet eigenfunction consistency is O(h^2)") {
    auto err_for = [](int m) {
        Grid g = build_grid({2, Shape::Box, m});
        LocalPart loc = assemble_local(g);
        const double pi = std::numbers::pi;
        std::vector<double> u(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            u[i] = std::sin(pi * g.coord[i][0]) * std::sin(pi * g.coord[i][1]);
        auto Au = loc.apply(u);
        double worst = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            worst = std::max(worst, std::abs(Au[i] - 2.0 * pi * pi * u[i]));
        return worst / (2.0 * pi * pi);
    };
    const double e15 = err_for(15), e31 = err_for(31);
    CHECK(e31 < 2e-3);
    CHECK(e15 / e31 == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("fractional part: tails positive, ones map to tail") {
    Grid g = build_grid({2, Shape::Box, 9});
    auto part = assemble_fractional(g, FractionalParams::standard(2, 0.5, g.diameter));
    std::vector<double> ones(g.size(), 1.0);
    auto r = part.apply(ones);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(part.tail[i] > 0.0);
        CHECK(r[i] == doctest::Approx(part.tail[i]).epsilon(1e-12));
    }
    auto params = FractionalParams::standard(2, 0.5, g.diameter);
    params.cutoff_radius = 1.5 * g.diameter;
    CHECK_THROWS_AS(assemble_fractional(g, params), std::invalid_argument);
}

TEST_CASE("fractional energy matches the independent double-sum oracle (m=15)") {
    const double s = 0.5;
    Grid g = build_grid({2, Shape::Box, 15});
    const auto params = FractionalParams::standard(2, s, g.diameter);
    auto part = assemble_fractional(g, params);
    auto u = random_field(g.size(), 91);

    // oracle: brute-force pair sum with independently computed tails
    const double C = params.constant, h = g.h;
    double energy = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (i == j) continue;
            const double dx = g.coord[i][0] - g.coord[j][0];
            const double dy = g.coord[i][1] - g.coord[j][1];
            const double w = C * h * h * std::pow(dx * dx + dy * dy, -0.5 * (2.0 + 2.0 * s));
            energy += 0.5 * w * (u[i] - u[j]) * (u[i] - u[j]);
        }
        energy += oracle_tail(g, i, s, C, params.cutoff_radius) * u[i] * u[i];
    }
    energy *= h * h;

    std::vector<double> Au(g.size());
    part.apply(u, Au);
    double impl = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) impl += u[i] * Au[i];
    impl *= h * h;

    CHECK(impl == doctest::Approx(energy).epsilon(1e-10));
}

TEST_CASE("fractional energy double sum at the m=31 working size") {
    const double s = 0.5;
    Grid g = build_grid({2, Shape::Box, 31});
    const auto params = FractionalParams::standard(2, s, g.diameter);
    auto part = assemble_fractional(g, params);
    auto u = random_field(g.size(), 17);

    const double C = params.constant, h = g.h;
    double pair_sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (i == j) continue;
            const double dx = g.coord[i][0] - g.coord[j][0];
            const double dy = g.coord[i][1] - g.coord[j][1];
            const double w = C * h * h * std::pow(dx * dx + dy * dy, -0.5 * (2.0 + 2.0 * s));
            pair_sum += 0.5 * w * (u[i] - u[j]) * (u[i] - u[j]);
        }
    double energy = pair_sum;
    for (std::size_t i = 0; i < g.size(); ++i) energy += part.tail[i] * u[i] * u[i];
    energy *= h * h;

    std::vector<double> Au(g.size());
    part.apply(u, Au);
    double impl = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) impl += u[i] * Au[i];
    impl *= h * h;
    CHECK(impl == doctest::Approx(energy).epsilon(1e-10));
}

TEST_CASE("dense and matrix-free applications agree") {
    Grid g = build_grid({2, Shape::Box, 15});
    auto op = assemble_operator(g, 0.5, StorageMode::Dense);
    auto u = random_field(g.size(), 7);
    std::vector<double> dense_out, free_out;
    op.apply(u, dense_out);
    op.apply_matrix_free(u, free_out);
    double scale = 0.0;
    for (double v : dense_out) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(std::abs(dense_out[i] - free_out[i]) <= 1e-12 * scale);
}

TEST_CASE("operator symmetry and M-matrix structure on dense instances") {
    for (GridSpec spec : {GridSpec{2, Shape::Box, 9}, GridSpec{3, Shape::Ball, 9}}) {
        Grid g = build_grid(spec);
        auto op = assemble_operator(g, 0.4, StorageMode::Dense);
        const std::size_t n = op.size();
        for (std::size_t i = 0; i < n; ++i) {
            double off = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(op.dense[i * n + j] == op.dense[j * n + i]);
                if (j != i) {
                    CHECK(op.dense[i * n + j] <= 0.0);
                    off += -op.dense[i * n + j];
                }
            }
            CHECK(op.dense[i * n + i] > off);  // strict dominance via the tail
        }
        auto u = random_field(n, 3);
        CHECK(op.quadratic_form(u) > 0.0);
    }
}

TEST_CASE("apply_operator linearity and size checks") {
    Grid g = build_grid({2, Shape::Box, 9});
    auto op = assemble_operator(g, 0.6);
    auto u = random_field(g.size(), 5), v = random_field(g.size(), 6);
    std::vector<double> uv(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) uv[i] = u[i] + v[i];
    auto a = apply_operator(op, u), b = apply_operator(op, v), ab = apply_operator(op, uv);
    double scale = 0.0;
    for (double x : ab) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(std::abs(ab[i] - a[i] - b[i]) <= 1e-12 * scale);

    std::vector<double> zero(g.size(), 0.0);
    for (double x : apply_operator(op, zero)) CHECK(x == 0.0);
    CHECK_THROWS_AS(op.apply(std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("weak residual: expansion identity and perturbation") {
    Grid g = build_grid({2, Shape::Box, 9});
    auto op = assemble_operator(g, 0.5);
    auto u = random_field(g.size(), 11);
    auto rhs = apply_operator(op, u);
    CHECK(weak_residual(op, u, rhs) <= 1e-12);

    auto v = u;
    v[g.size() / 2] += 1.0;
    CHECK(weak_residual(op, v, rhs) > 0.0);

    // equals h^N max |Au - rhs| by direct expansion
    auto Au = apply_operator(op, v);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(Au[i] - rhs[i]));
    CHECK(weak_residual(op, v, rhs) ==
          doctest::Approx(worst * op.cell_volume()).epsilon(1e-14));
}

TEST_CASE("fractional energy is continuous in s") {
    Grid g = build_grid({2, Shape::Box, 15});
    std::vector<double> u(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        u[i] = std::sin(std::numbers::pi * g.coord[i][0]) *
               std::sin(std::numbers::pi * g.coord[i][1]);
    double prev = -1.0;
    for (double s = 0.2; s <= 0.81; s += 0.01) {
        auto part = assemble_fractional(g, FractionalParams::standard(2, s, g.diameter));
        std::vector<double> Au(g.size());
        part.apply(u, Au);
        double e = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) e += u[i] * Au[i];
        if (prev > 0.0) CHECK(std::abs(e - prev) / prev < 0.10);
        prev = e;
    }
}

TEST_CASE("dense dump carries the header and payload") {
    Grid g = build_grid({2, Shape::Box, 7});
    auto op = assemble_operator(g, 0.5, StorageMode::Dense);
    const std::string path = "/tmp/mixnl_dump_test.bin";
    dump_dense(op, path);
    std::ifstream in(path, std::ios::binary);
    std::uint32_t N = 0, m = 0;
    double s = 0.0;
    in.read(reinterpret_cast<char*>(&N), 4);
    in.read(reinterpret_cast<char*>(&m), 4);
    in.read(reinterpret_cast<char*>(&s), 8);
    CHECK(N == 2);
    CHECK(m == 7);
    CHECK(s == 0.5);
    std::vector<double> first(3);
    in.read(reinterpret_cast<char*>(first.data()), 24);
    CHECK(first[0] == op.dense[0]);
    CHECK(first[1] == op.dense[1]);
    CHECK(first[2] == op.dense[2]);
}
