#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace mixnl {

namespace detail {

// 15-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> kGL15Nodes = {
    0.0,
    0.2011940939974345,
    0.3941513470775634,
    0.5709721726085388,
    0.7244177313601701,
    0.8482065834104272,
    0.9372733924007060,
    0.9879925180204854};
inline constexpr std::array<double, 8> kGL15Weights = {
    0.2025782419255613,
    0.1984314853271116,
    0.1861610000155622,
    0.1662692058169939,
    0.1395706779261543,
    0.1071592204671719,
    0.0703660474881081,
    0.0307532419961173};

// 7-point Gauss-Legendre rule on [-1, 1], used as the error reference.
inline constexpr std::array<double, 4> kGL7Nodes = {
    0.0, 0.4058451513773972, 0.7415311855993945, 0.9491079123427585};
inline constexpr std::array<double, 4> kGL7Weights = {
    0.4179591836734694, 0.3818300505051189, 0.2797053914892767, 0.1294849661688697};

template <typename F>
double gl15(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), r = 0.5 * (b - a);
    double acc = kGL15Weights[0] * f(c);
    for (int k = 1; k < 8; ++k)
        acc += kGL15Weights[k] * (f(c - r * kGL15Nodes[k]) + f(c + r * kGL15Nodes[k]));
    return acc * r;
}

template <typename F>
double gl7(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), r = 0.5 * (b - a);
    double acc = kGL7Weights[0] * f(c);
    for (int k = 1; k < 4; ++k)
        acc += kGL7Weights[k] * (f(c - r * kGL7Nodes[k]) + f(c + r * kGL7Nodes[k]));
    return acc * r;
}

}  // namespace detail

/// Adaptive Gauss-Legendre integration of f over [a, b] to absolute
/// tolerance tol.  Panels where the 7- and 15-point rules disagree are
/// bisected.
template <typename F>
double integrate_adaptive(const F& f, double a, double b, double tol, int max_depth = 40) {
    struct Frame {
        double a, b, tol;
        int depth;
    };
    double total = 0.0;
    std::vector<Frame> stack{{a, b, tol, 0}};
    while (!stack.empty()) {
        Frame fr = stack.back();
        stack.pop_back();
        const double coarse = detail::gl7(f, fr.a, fr.b);
        const double fine = detail::gl15(f, fr.a, fr.b);
        if (std::abs(fine - coarse) <= fr.tol || fr.depth >= max_depth) {
            total += fine;
            continue;
        }
        const double mid = 0.5 * (fr.a + fr.b);
        stack.push_back({fr.a, mid, 0.5 * fr.tol, fr.depth + 1});
        stack.push_back({mid, fr.b, 0.5 * fr.tol, fr.depth + 1});
    }
    return total;
}

/// Value of the defining integral
///   I(N, s) = \int_{R^N} (1 - cos(xi_1)) / |xi|^{N+2s} d(xi),
/// reduced to a radial integral.  The spherical average of cos(rho * w_1)
/// has a closed form per dimension (cos, J_0, sinc), so
///   I = \int_0^inf g_N(rho) rho^{-1-2s} d(rho),
/// with g_N the angular deficiency A_N - angcos_N(rho).
///
/// [0,1] is summed from the alternating power series of g_N; [1, R] is
/// integrated on half-period panels; the far tail uses the exact power
/// integral for the constant part, with the oscillatory remainder removed
/// by iterated averaging of the partial sums.
inline double fractional_defining_integral(int N, double s) {
    if (N < 1 || N > 3) throw std::domain_error("fractional_defining_integral: N must be 1, 2 or 3");
    if (!(s > 0.0) || !(s < 1.0)) throw std::domain_error("fractional_defining_integral: s must lie in (0,1)");

    const double pi = std::numbers::pi;
    // Total angular measure A_N = |S^{N-1}|.
    const double A = (N == 1) ? 2.0 : (N == 2 ? 2.0 * pi : 4.0 * pi);

    // Series head on [0, 1]: g_N(rho) = sum_k c_k rho^{2k}, so each term
    // integrates to c_k / (2k - 2s).
    double head = 0.0;
    {
        double ck;
        double fact2k = 1.0;   // (2k)!
        double factk = 1.0;    // k!
        double pow4 = 1.0;     // 4^k
        double fact2k1 = 1.0;  // (2k+1)!
        double sign = 1.0;
        for (int k = 1; k <= 60; ++k) {
            fact2k *= (2.0 * k - 1.0) * (2.0 * k);
            factk *= k;
            pow4 *= 4.0;
            fact2k1 *= (2.0 * k) * (2.0 * k + 1.0);
            if (N == 1)
                ck = 2.0 * sign / fact2k;
            else if (N == 2)
                ck = 2.0 * pi * sign / (pow4 * factk * factk);
            else
                ck = 4.0 * pi * sign / fact2k1;
            const double term = ck / (2.0 * k - 2.0 * s);
            head += term;
            sign = -sign;
            if (std::abs(term) < 1e-18 * std::abs(head)) break;
        }
    }

    auto integrand = [N, s, A, pi](double rho) {
        double angcos;
        if (N == 1)
            angcos = 2.0 * std::cos(rho);
        else if (N == 2)
            angcos = 2.0 * pi * std::cyl_bessel_j(0.0, rho);
        else
            angcos = 4.0 * pi * std::sin(rho) / rho;
        return (A - angcos) * std::pow(rho, -1.0 - 2.0 * s);
    };

    // Half-period panels on [1, R].  Q_k = head + body_k + exact constant
    // tail from rho_k converges to I with an oscillatory error that
    // alternates panel to panel; averaging levels cancel it.
    const int n_panels = 96;
    std::vector<double> partial;
    partial.reserve(n_panels);
    double body = 0.0;
    double rho = 1.0;
    for (int k = 0; k < n_panels; ++k) {
        const double next = rho + pi;
        body += integrate_adaptive(integrand, rho, next, 1e-13);
        rho = next;
        partial.push_back(head + body + A * std::pow(rho, -2.0 * s) / (2.0 * s));
    }
    const int avg_levels = 6, use = 12;
    std::vector<double> q(partial.end() - use, partial.end());
    for (int level = 0; level < avg_levels; ++level)
        for (std::size_t i = 0; i + 1 < q.size(); ++i) q[i] = 0.5 * (q[i] + q[i + 1]);
    return q[0];
}

}  // namespace mixnl
