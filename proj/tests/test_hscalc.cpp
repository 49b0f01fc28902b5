#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "ctlab/hscalc.hpp"

using namespace ctlab;

namespace {

CMatrix random_hermitian(int n, double spread, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    CMatrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
    CMatrix h = 0.5 * (a + a.adjoint());
    return h * (spread / (2.0 * std::sqrt(static_cast<double>(n))));
}

double op_norm(const CMatrix& m) { return schatten_norm(m, kInf); }

void check_fd(const SmoothFunction& f, double lo, double hi) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(lo, hi);
    const double step = 1e-3;
    for (int r = 1; r <= 4; ++r) {
        double peak = 0.0;
        std::vector<double> us(100);
        for (double& u : us) {
            u = unif(rng);
            peak = std::max(peak, std::abs(f.derivative(r, u)));
        }
        for (double u : us) {
            auto g = [&](double x) { return f.derivative(r - 1, x); };
            // Five-point central stencil, O(step^4).
            const double fd = (g(u - 2 * step) - 8 * g(u - step) + 8 * g(u + step) - g(u + 2 * step)) / (12.0 * step);
            const double exact = f.derivative(r, u);
            CHECK(std::abs(fd - exact) <= 1e-6 * std::max(std::abs(exact), 1e-2 * peak));
        }
    }
}

}  // namespace

TEST_CASE("derivative evaluators match finite differences") {
    check_fd(gaussian(), -4.0, 4.0);
    check_fd(gaussian(0.7, 1.5, 2.0), -4.0, 5.0);
    check_fd(damped_gaussian({1.0, -0.5, 0.25}, 0.3, 1.2), -4.0, 4.0);
    check_fd(bump(0.2, 1.5), -1.2, 1.6);
}

TEST_CASE("closed forms of the descriptors") {
    auto g = gaussian();
    CHECK(g(0.0) == 1.0);
    CHECK(g.derivative(1, 1.0) == doctest::Approx(-2.0 * std::exp(-1.0)).epsilon(1e-14));
    CHECK(g.derivative(2, 0.0) == doctest::Approx(-2.0).epsilon(1e-14));
    auto b = bump(1.0, 2.0);
    CHECK(b(1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(b(3.0) == 0.0);
    CHECK(b.derivative(3, -1.5) == 0.0);
    auto p = damped_gaussian({0.0, 1.0});
    CHECK(p(0.5) == doctest::Approx(0.5 * std::exp(-0.25)).epsilon(1e-14));
    CHECK((g + p)(0.5) == doctest::Approx(std::exp(-0.25) * 1.5).epsilon(1e-14));
    CHECK(g.scaled(3.0).derivative(2, 0.4) == doctest::Approx(3.0 * g.derivative(2, 0.4)).epsilon(1e-14));
    CHECK_THROWS_AS(gaussian(0.0, 1.0, 1.0, 3).derivative(4, 0.0), ValidationError);
    CHECK_THROWS_AS(gaussian(0.0, -1.0), ValidationError);
}

TEST_CASE("Schwartz seminorms are finite") {
    auto g = gaussian();
    CHECK(schwartz_norm(g, 0.0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    // sup (1+x) e^{-x^2} at x = (sqrt(3) - 1) / 2.
    const double xs = (std::sqrt(3.0) - 1.0) / 2.0;
    CHECK(schwartz_norm(g, 1.0, 0) == doctest::Approx((1 + xs) * std::exp(-xs * xs)).epsilon(1e-9));
    for (double n : {0.0, 2.0, 4.0, 8.0})
        for (int r = 0; r <= 4; ++r) {
            CHECK(std::isfinite(schwartz_norm(g, n, r)));
            CHECK(std::isfinite(schwartz_norm(bump(), n, r)));
        }
}

TEST_CASE("cutoff tau") {
    CHECK(cutoff_tau(0.5).value == 1.0);
    CHECK(cutoff_tau(3.0).value == 0.0);
    CHECK(cutoff_tau(-2.0).value == 0.0);
    CHECK(cutoff_tau(1.5).value == doctest::Approx(0.5).epsilon(1e-15));
    for (double u : {1.1, 1.3, 1.5, 1.77, 1.95}) {
        const auto a = cutoff_tau(u), b = cutoff_tau(-u);
        CHECK(a.value > 0.0);
        CHECK(a.value < 1.0);
        CHECK(a.value == b.value);
        CHECK(a.d1 == -b.d1);
        CHECK(a.d1 < 0.0);
        const double e = 1e-5;
        CHECK(std::abs((cutoff_tau(u + e).value - cutoff_tau(u - e).value) / (2 * e) - a.d1) <= 1e-7 * (1 + std::abs(a.d1)));
        CHECK(std::abs((cutoff_tau(u + e).d1 - cutoff_tau(u - e).d1) / (2 * e) - a.d2) <= 1e-6 * (1 + std::abs(a.d2)));
    }
}

TEST_CASE("extension dbar: support, order in v, finite differences") {
    auto f = gaussian();
    CHECK(extension_dbar(f, 2, 0.3, 2.0 * japanese(0.3)) == Complex(0.0));
    CHECK(extension_dbar(f, 2, -1.0, 5.0) == Complex(0.0));
    CHECK_THROWS_AS(extension_dbar(gaussian(0, 1, 1, 2), 2, 0.0, 0.1), ValidationError);

    const double u = 0.4;
    const double a = std::abs(extension_dbar(f, 2, u, 1e-2));
    const double b = std::abs(extension_dbar(f, 2, u, 1e-3));
    const double c = std::abs(extension_dbar(f, 2, u, 1e-4));
    CHECK(b / a == doctest::Approx(1e-2).epsilon(1e-6));
    CHECK(c / b == doctest::Approx(1e-2).epsilon(1e-6));
    // Leading term f'''(u) (iv)^2 / 4.
    CHECK(c == doctest::Approx(std::abs(f.derivative(3, u)) * 1e-8 / 4.0).epsilon(1e-10));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int n : {1, 2, 3}) {
        for (int i = 0; i < 50; ++i) {
            const double x = 3.0 * unif(rng);
            const double y = 2.0 * japanese(x) * unif(rng);
            const double e = 1e-5;
            const Complex du = (extension_value(f, n, x + e, y) - extension_value(f, n, x - e, y)) / (2 * e);
            const Complex dv = (extension_value(f, n, x, y + e) - extension_value(f, n, x, y - e)) / (2 * e);
            const Complex fd = 0.5 * (du + Complex(0, 1) * dv);
            const Complex exact = extension_dbar(f, n, x, y);
            CHECK(std::abs(fd - exact) <= 1e-5 * std::max(std::abs(exact), 1e-3));
        }
    }
}

TEST_CASE("pointwise dbar bound") {
    auto f = gaussian();
    std::vector<DbarSample> inner;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.01, 0.99);
    for (int i = 0; i < 500; ++i) {
        const double u = 6.0 * (unif(rng) - 0.5);
        inner.push_back({u, (i % 2 ? 1.0 : -1.0) * japanese(u) * unif(rng)});
    }
    auto r1 = dbar_bound_check(f, 1, inner);
    CHECK(r1.in_u == 0);
    CHECK(r1.outside_u == 500);
    CHECK(r1.outside_ok);
    CHECK(r1.worst_outside_ratio <= 1.0 + 1e-12);
    CHECK(r1.c == 0.0);

    auto a = dbar_bound_check(f, 2, dbar_samples(10000, 6.0, 1));
    auto b = dbar_bound_check(f, 2, dbar_samples(10000, 6.0, 2));
    CHECK(a.finite);
    CHECK(a.in_u > 1000);
    CHECK(a.outside_ok);
    CHECK(a.c > 0.0);
    CHECK(std::abs(a.c - b.c) <= 0.1 * a.c);
    // The cutoff gives C <= 3/2 sup|tau'|.
    double tmax = 0.0;
    for (int i = 1; i < 10000; ++i) tmax = std::max(tmax, std::abs(cutoff_tau(1.0 + i / 10000.0).d1));
    CHECK(a.c <= 1.5 * tmax * (1 + 1e-9));

    auto s = dbar_bound_check(f.scaled(2.0), 2, dbar_samples(10000, 6.0, 1));
    CHECK(std::abs(s.c - a.c) <= 1e-10 * a.c);
}

TEST_CASE("a-norm") {
    CHECK(a_norm(zero_function(), 3) == 0.0);
    auto g = gaussian();
    const int m = 1000000;
    const double lo = -20.0, step = 40.0 / m;
    double trap = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double u = lo + i * step;
        trap += (i == 0 || i == m ? 0.5 : 1.0) * std::exp(-u * u) / japanese(u);
    }
    trap *= step;
    CHECK(std::abs(a_norm(g, 0) - trap) <= 1e-8 * trap);
    double prev = 0.0;
    for (int n = 0; n <= 6; ++n) {
        const double v = a_norm(g, n);
        CHECK(v >= prev);
        prev = v;
    }
    auto one = user_function("user", 4, [](double, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[0] = 1.0;
    }, false);
    CHECK_THROWS_AS(a_norm(one, 0), NumericalError);
}

TEST_CASE("HS formula on scalars and diagonals") {
    auto f = gaussian();
    CMatrix z = CMatrix::Zero(1, 1);
    auto r = hs_apply(Hamiltonian::from_matrix(z), f);
    CHECK(std::abs(r.value(0, 0) - 1.0) <= 1e-6);

    CMatrix d = CMatrix::Zero(2, 2);
    d(1, 1) = 1.0;
    for (int n : {1, 2, 3}) {
        ExtensionParams p;
        p.n = n;
        auto rd = hs_apply(Hamiltonian::from_matrix(d), f, p);
        CHECK(std::abs(rd.value(0, 0) - 1.0) <= 1e-6);
        CHECK(std::abs(rd.value(1, 1) - std::exp(-1.0)) <= 1e-6);
        CHECK(std::abs(rd.value(0, 1)) <= 1e-12);
    }
    ExtensionParams bad;
    bad.n = 0;
    CHECK_THROWS_AS(hs_apply(Hamiltonian::from_matrix(d), f, bad), ValidationError);
    bad.n = 2;
    bad.tau = "other";
    CHECK_THROWS_AS(hs_apply(Hamiltonian::from_matrix(d), f, bad), ValidationError);
    ExtensionParams tight;
    tight.panel_budget = 10;
    CHECK_THROWS_AS(hs_apply(Hamiltonian::from_matrix(d), f, tight), NumericalError);
}

TEST_CASE("HS formula against the eigendecomposition oracle") {
    auto h = Hamiltonian::from_matrix(random_hermitian(40, 6.0, 77));
    auto f = gaussian(0.3, 1.2);
    auto fe = [&f](double x) { return Complex(f(x)); };
    const CMatrix exact = apply_function_exact(h, fe);
    const double scale = op_norm(exact);

    ExtensionParams p1, p3;
    p1.n = 1;
    p3.n = 3;
    const auto r1 = hs_apply(h, f, p1);
    const auto r2 = hs_apply(h, f);
    const auto r3 = hs_apply(h, f, p3);
    CHECK(op_norm(r2.value - exact) <= 1e-4 * scale);
    CHECK(op_norm(r1.value - exact) <= 1e-4 * scale);
    CHECK(op_norm(r1.value - r3.value) <= 10.0 * p1.tolerance);
    CHECK(max_abs_entry(r2.value - r2.value.adjoint()) == 0.0);

    auto g = damped_gaussian({0.5, 1.0}, -0.4, 0.9);
    const auto rg = hs_apply(h, g);
    const auto rs = hs_apply(h, f + g);
    CHECK(op_norm(rs.value - r2.value - rg.value) <= 10.0 * p1.tolerance);
    CHECK(op_norm(rg.value - apply_function_exact(h, [&g](double x) { return Complex(g(x)); })) <=
          1e-4 * op_norm(rg.value));
}

TEST_CASE("HS operator norm is controlled by the a-norm") {
    // One constant per test set; resampling changes it by less than a factor 2.
    auto constant_for = [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double worst = 0.0;
        for (int trial = 0; trial < 6; ++trial) {
            auto h = Hamiltonian::from_matrix(random_hermitian(12, 2.0 + 6.0 * unif(rng), seed * 100 + trial));
            auto f = trial % 2 ? gaussian(2.0 * unif(rng) - 1.0, 0.6 + unif(rng))
                               : damped_gaussian({1.0, unif(rng)}, 0.0, 0.7 + unif(rng));
            for (int n : {1, 2}) {
                ExtensionParams p;
                p.n = n;
                p.tolerance = 1e-6;
                worst = std::max(worst, op_norm(hs_apply(h, f, p).value) / a_norm(f, n + 1));
            }
        }
        return worst;
    };
    const double a = constant_for(1), b = constant_for(2);
    CHECK(a > 0.0);
    CHECK(std::max(a, b) <= 2.0 * std::min(a, b));
}

TEST_CASE("kernel decay on the free lattice") {
    auto dom = build_domain(2, {14, 14}, 1.0);
    auto h = assemble_hamiltonian(dom, zero_field(dom), zero_potential(dom));
    auto pairs = ray_pairs(dom, {3, 3}, {{1, 0}, {0, 1}, {1, 1}, {2, 1}});
    pairs.push_back({{3, 3}, {3, 3}});
    auto rep = kernel_decay_experiment(h, gaussian(2.0, 2.0), 2.0, {1, 2, 3, 4}, pairs);
    CHECK(rep.excluded_diagonal == 1);
    CHECK(rep.norms.size() == pairs.size() - 1);
    CHECK_FALSE(rep.degenerate);
    REQUIRE(rep.per_k.size() == 4);
    for (const auto& k : rep.per_k) {
        CHECK(k.finite);
        CHECK(k.monotone);
    }
    CHECK(rep.ok());

    auto zero = kernel_decay_experiment(h, zero_function(), 2.0, {4}, pairs);
    CHECK(zero.degenerate);
    CHECK(zero.ok());
    for (const auto& b : zero.norms) CHECK(b.value == 0.0);

    CHECK_THROWS_AS(kernel_decay_experiment(h, gaussian(), 1.0, {4}, pairs), ValidationError);
}

TEST_CASE("kernel decay through the HS quadrature agrees with the exact path") {
    auto dom = build_domain(2, {6, 6}, 1.0);
    auto h = assemble_hamiltonian(dom, symmetric_field(dom, 0.4), zero_potential(dom));
    auto pairs = ray_pairs(dom, {0, 0}, {{1, 0}, {1, 1}});
    KernelDecayOptions hs;
    hs.use_hs = true;
    auto a = kernel_decay_experiment(h, gaussian(2.0, 1.0), 2.0, {2}, pairs);
    auto b = kernel_decay_experiment(h, gaussian(2.0, 1.0), 2.0, {2}, pairs, hs);
    for (std::size_t i = 0; i < a.norms.size(); ++i)
        CHECK(std::abs(a.norms[i].value - b.norms[i].value) <= 1e-6);
}
