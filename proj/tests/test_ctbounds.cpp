#include "doctest.h"

#include <cmath>
#include <random>

#include "ctlab/ctbounds.hpp"

using namespace ctlab;

namespace {

std::span<const double> span_of(const RVector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

struct FreeSetup {
    GridDomain dom;
    Hamiltonian h;
    GroundState gs;
    Complex z;
};

FreeSetup free_setup(int n) {
    auto dom = build_domain(2, {n, n}, 1.0);
    auto h = assemble_hamiltonian(dom, zero_field(dom), zero_potential(dom));
    auto gs = e0_lambda0(zero_potential(dom), dom, 0.0);
    return {dom, h, gs, Complex(gs.e0 - 1.0)};
}

}  // namespace

TEST_CASE("form bound constants") {
    auto dom = build_domain(2, {4, 4}, 1.0);
    auto fb = form_bound_constants(constant_potential(dom, 2.0), 0.001);
    CHECK(fb.theta1 == 0.001);
    CHECK(fb.theta2 == 0.0);

    std::vector<double> vals(16, 1.0);
    vals[5] = -3.0;
    vals[9] = -1.0;
    ScalarPotential v(vals, "explicit");
    fb = form_bound_constants(v, 0.001);
    CHECK(fb.theta2 == 3.0);
    CHECK(form_bound_excess(dom, symmetric_field(dom, 0.4), v, fb, 50, 3) <= 0.0);
    CHECK_THROWS_AS(form_bound_constants(v, 1.5), ValidationError);
}

TEST_CASE("E0 and lambda0") {
    auto dom = build_domain(2, {3, 3}, 1.0);
    auto gs = e0_lambda0(zero_potential(dom), dom, 0.0);
    CHECK(std::abs(gs.e0 - (2.0 - std::sqrt(2.0))) < 1e-12);
    CHECK(gs.lambda0 == doctest::Approx(-1.0));
    auto shifted = e0_lambda0(constant_potential(dom, 0.7), dom, 0.0);
    CHECK(std::abs(shifted.e0 - gs.e0 - 0.7) < 1e-12);
    CHECK(e0_lambda0(zero_potential(dom), dom, 0.0, 2.5).lambda0 == doctest::Approx(-2.5));
}

TEST_CASE("xi constants") {
    auto xi = xi_constants(0.25, 1.0, 0.0, 1.0);
    CHECK(xi.xi1 == doctest::Approx(0.5));
    CHECK(xi.xi2 == doctest::Approx(2.5625));
    auto small = xi_constants(1e-6, 1.0, 0.0, 1.0);
    CHECK(small.xi1 < 1e-5);
    CHECK(small.xi2 > 1e5);
    auto flat = xi_constants(0.3, 0.0, 0.1, 2.0);
    CHECK(flat.xi2 == doctest::Approx(2 * 0.3 * 2.0 / 0.9));
}

TEST_CASE("c_z") {
    std::vector<double> eigs{1.0, 2.0, 3.0};
    CHECK(c_z(eigs, 1.5, 0.0) == doctest::Approx(4.0));
    CHECK(c_z(eigs, -0.0, 0.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(c_z(eigs, 2.0, 0.0), ValidationError);

    // Grid maximisation oracle over a fine lambda grid spanning the spectrum.
    auto s = free_setup(6);
    const double lam0 = s.gs.e0 - 1.0;
    const Complex z = s.gs.e0 - 10.0;
    const auto& ev = s.h.eigen().values;
    const double c = c_z(span_of(ev), z, lam0);
    double grid = 1.0;
    for (int i = 0; i <= 10000; ++i) {
        const double l = ev[0] + (ev[ev.size() - 1] - ev[0]) * i / 10000.0;
        grid = std::max(grid, std::abs((l - lam0) / (l - z)));
    }
    CHECK(c >= 1.0);
    CHECK(c <= grid + 1e-12);
    CHECK(c >= grid - 1e-3);
}

TEST_CASE("branch windows meet at the shared endpoint") {
    const double lam0 = -1.3, th1 = 0.001, th2 = 0.2, e0 = 0.1;
    const double delta = midpoint_delta(lam0, th2, e0);
    CHECK(delta > 0.0);
    CHECK(delta < 1.0);
    for (double s : {0.01, 0.05, 0.1}) {
        auto w1 = a0_squared_window(Branch::Condition1, s, lam0, th1, th2, delta, 1.5);
        auto w2 = a0_squared_window(Branch::Condition2, s, lam0, th1, th2, delta, 1.5);
        CHECK(w1.upper == w2.lower);
        // Nonempty condition-2 window exactly when s is below (1-Theta1)/(4c).
        CHECK((w2.upper > w2.lower) == (s < s_upper(th1, 1.5)));
    }
    // Worked arithmetic: branch 1, Theta1 = Theta2 = 0, lambda0 = -2, s = 0.1.
    auto w = a0_squared_window(Branch::Condition1, 0.1, -2.0, 0.0, 0.0, 0.75, 1.0);
    CHECK(w.upper == doctest::Approx(0.4 / 5.025));
    CHECK(std::sqrt(w.upper) == doctest::Approx(0.28216).epsilon(1e-4));
    CHECK(s_upper(0.001, 2.0) == doctest::Approx(0.124875));
}

TEST_CASE("admissible params satisfy their branch") {
    auto s = free_setup(8);
    const auto& ev = s.h.eigen().values;
    for (Branch b : {Branch::Condition1, Branch::Condition2}) {
        AdmissibleRequest req;
        req.branch = b;
        auto p = admissible_params(span_of(ev), s.z, s.gs.lambda0, 1e-3, 0.0, s.gs.e0, req);
        CHECK(p.branch == b);
        CHECK_FALSE(admissibility_violation(p).has_value());
        CHECK(p.xi1 == doctest::Approx(2 * p.s / (1 - 1e-3)));
        CHECK(p.xi1 < 0.5);
        CHECK(p.s < s_upper(1e-3, p.c_z));
        CHECK(p.delta * p.lambda0 > p.lambda0);
        CHECK(p.delta * p.lambda0 < std::min(0.0, p.e0));
    }
    AdmissibleRequest any;
    auto best = admissible_params(span_of(ev), s.z, s.gs.lambda0, 1e-3, 0.0, s.gs.e0, any);
    CHECK(best.a0 > 0.0);

    AdmissibleRequest fixed;
    fixed.maximize_a0 = false;
    fixed.branch = Branch::Condition1;
    fixed.s = best.s;
    fixed.a0 = 2.0 * best.a0;
    CHECK_THROWS_AS(admissible_params(span_of(ev), s.z, s.gs.lambda0, 1e-3, 0.0, s.gs.e0, fixed), InfeasibleError);
    CHECK_THROWS_AS(admissible_params(span_of(ev), s.z, 0.5, 1e-3, 0.0, s.gs.e0, any), ValidationError);
}

TEST_CASE("simplified window caps C* at 2c") {
    auto s = free_setup(8);
    const auto& ev = s.h.eigen().values;
    auto p = simplified_params(span_of(ev), s.z, s.gs.lambda0, 1e-3, 0.0, s.gs.e0);
    CHECK_FALSE(admissibility_violation(p).has_value());
    CHECK(p.c_star <= 2.0 * p.c_z);
}

TEST_CASE("region bounds on c_z") {
    auto s = free_setup(6);
    const auto& ev = s.h.eigen().values;
    const double lam0 = s.gs.lambda0;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> uu(-5.0, 5.0), frac(0.01, 0.99);
    for (int t = 0; t < 200; ++t) {
        const double u = uu(rng);
        const double br = std::sqrt(1 + u * u);
        const double v = 2.0 * br * frac(rng);
        auto bound = c_z_region_bound(Complex(u, v), lam0);
        REQUIRE(bound.has_value());
        CHECK(c_z(span_of(ev), Complex(u, v), lam0) <= *bound + 1e-12);
    }
    CHECK_FALSE(c_z_region_bound(Complex(0.0, 3.0), lam0).has_value());
}

TEST_CASE("conjugation is a similarity") {
    auto dom = build_domain(2, {4, 4}, 0.5);
    auto h = assemble_hamiltonian(dom, random_field(dom, 1.0, 3), random_potential(dom, 2.0, 5));
    std::vector<double> zero{0.0, 0.0}, a{0.7, -0.4};
    CHECK(max_abs_entry(conjugate(h, zero) - h.matrix()) == 0.0);
    Eigen::ComplexEigenSolver<CMatrix> ces(conjugate(h, a));
    std::vector<double> ev;
    for (int k = 0; k < h.size(); ++k) ev.push_back(ces.eigenvalues()[k].real());
    std::sort(ev.begin(), ev.end());
    for (int k = 0; k < h.size(); ++k) CHECK(std::abs(ev[k] - h.eigen().values[k]) < 1e-8);

    CMatrix diag = CMatrix::Zero(16, 16);
    diag.diagonal().setLinSpaced(16, 0.0, 3.0);
    Hamiltonian hd(dom, diag);
    CHECK(max_abs_entry(conjugate(hd, a) - diag) == 0.0);
    std::vector<double> huge{2000.0, 0.0};
    CHECK_THROWS_AS(conjugate(h, huge), NumericalError);
}

TEST_CASE("B extraction") {
    auto s = free_setup(8);
    const auto& ev = s.h.eigen().values;
    auto p = admissible_params(span_of(ev), s.z, s.gs.lambda0, 1e-3, 0.0, s.gs.e0, {});
    std::vector<double> zero{0.0, 0.0};
    auto b0 = extract_B(s.h, zero, p.xi1, p.xi2);
    CHECK(b0.norm_b == 0.0);
    std::vector<double> a{0.6 * p.a0, 0.8 * p.a0}, minus{-0.6 * p.a0, -0.8 * p.a0};
    auto b1 = extract_B(s.h, a, p.xi1, p.xi2);
    auto b2 = extract_B(s.h, minus, p.xi1, p.xi2);
    CHECK(b1.norm_b <= 2 * p.xi1 + 1e-8);
    CHECK(std::abs(b1.norm_b - b2.norm_b) <= 1e-10);
    CHECK_THROWS_AS(extract_B(s.h, a, 1.0, -10.0), ValidationError);
}

TEST_CASE("U+V inverse bound") {
    auto s = free_setup(8);
    const auto& ev = s.h.eigen().values;
    for (Branch b : {Branch::Condition1, Branch::Condition2}) {
        AdmissibleRequest req;
        req.branch = b;
        auto p = admissible_params(span_of(ev), s.z, s.gs.lambda0, 1e-3, 0.0, s.gs.e0, req);
        std::vector<double> a{p.a0, 0.0};
        auto rep = verify_uv_inverse(s.h, a, s.z, p);
        CHECK(rep.ok());
        CHECK(rep.factorization_residual <= 1e-8);

        std::vector<double> zero{0.0, 0.0};
        auto r0 = verify_uv_inverse(s.h, zero, s.z, p);
        CHECK(r0.v_norm == 0.0);
        CHECK(r0.inverse_norm <= p.c_z * (1 + 1e-12));
    }
    auto p = admissible_params(span_of(ev), s.z, s.gs.lambda0, 1e-3, 0.0, s.gs.e0, {});
    auto bad = p;
    bad.a0 *= 2.0;
    bad.xi2 = xi_constants(bad.s, bad.a0, bad.theta1, bad.theta2).xi2;
    bad.c_star = c_star(bad);
    std::vector<double> a{bad.a0, 0.0};
    auto rep = verify_uv_inverse(s.h, a, s.z, bad);
    CHECK_FALSE(rep.premise_ok);
    CHECK_FALSE(rep.premise_message.empty());
    CHECK_FALSE(rep.ok());
}

TEST_CASE("fit_exponential") {
    std::vector<std::pair<double, double>> pts;
    for (int r = 0; r <= 10; ++r) pts.emplace_back(r, 3.0 * std::exp(-0.7 * r));
    auto fit = fit_exponential(pts);
    REQUIRE(fit.valid);
    CHECK(std::abs(fit.rate - 0.7) < 1e-9);
    CHECK(fit.log_prefactor == doctest::Approx(std::log(3.0)));
    CHECK(fit.samples == 9);
    CHECK(fit.r2 == doctest::Approx(1.0));

    std::vector<std::pair<double, double>> low{{2, 1e-15}, {3, 1e-16}, {4, 0.0}};
    auto none = fit_exponential(low);
    CHECK_FALSE(none.valid);
    CHECK(none.censored == 3);

    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    std::vector<std::pair<double, double>> noisy;
    for (int r = 2; r <= 20; ++r) noisy.emplace_back(r, std::exp(-0.7 * r) + 1e-15 * g(rng));
    CHECK(std::abs(fit_exponential(noisy).rate - 0.7) < 1e-3);
}

TEST_CASE("lattice sums and the convolution inequality") {
    auto c = exponential_lattice_sum(1.0, 2, 30);
    CHECK(c.tail < 1e-6);
    // Brute force over a larger box agrees with truncated + tail.
    auto big = exponential_lattice_sum(1.0, 2, 60);
    CHECK(big.truncated <= c.truncated + c.tail);
    CHECK(big.truncated >= c.truncated);

    CHECK(convolution_constant(2.0, 0.5, 2).truncated < convolution_constant(1.0, 0.5, 2).truncated);

    std::vector<CubePair> origin{{{0, 0}, {0, 0}}};
    auto rep0 = convolution_sum_check(1.0, 0.5, 2, 40, origin);
    CHECK(rep0.holds);
    auto lhs_direct = exponential_lattice_sum(2.0, 2, 40).truncated;
    CHECK(rep0.pairs[0].lhs == doctest::Approx(lhs_direct));

    auto pairs = random_cube_pairs(2, 20, 10.0, 17);
    for (const auto& p : pairs) CHECK(cube_distance(p.beta, p.gamma) <= 10.0);
    auto rep = convolution_sum_check(1.0, 0.5, 2, 40, pairs);
    CHECK(rep.holds);
    CHECK(rep.min_slack >= 0.0);
    CHECK_THROWS_AS(convolution_sum_check(0.1, 0.5, 2, 3, pairs), ValidationError);
}

TEST_CASE("Combes-Thomas decay experiment") {
    auto s = free_setup(10);
    const auto& ev = s.h.eigen().values;
    auto p = admissible_params(span_of(ev), s.z, s.gs.lambda0, 1e-3, 0.0, s.gs.e0, {});
    auto pairs = reference_pairs(s.dom, {{2, 2}, {5, 4}}, 8.0);
    auto res = ct_decay_experiment(s.h, s.z, 1, 2.0, pairs, p);
    CHECK(res.fit.valid);
    CHECK(res.rate_ok);
    CHECK(res.bound_ok);
    CHECK(res.prefactor_min >= res.prefactor);
    for (const auto& b : res.norms)
        if (b.distance == 0.0) CHECK(b.value > 0.0);

    CtDecayOptions opt;
    opt.delta0 = 0.9;
    auto res2 = ct_decay_experiment(s.h, s.z, 2, 2.0, pairs, p, opt);
    CHECK(res2.bound_ok);
    CHECK(res2.chain_ok);
    CHECK(res2.rate_ok);

    CHECK_THROWS_AS(ct_decay_experiment(s.h, s.z, 1, 1.0, pairs, p), ValidationError);
    CHECK_THROWS_AS(ct_decay_experiment(s.h, s.z, 2, 0.5, pairs, p, opt), ValidationError);
}

TEST_CASE("Hilbert-Schmidt product bound") {
    for (double h : {1.0, 0.5}) {
        auto dom = build_domain(2, {6, 6}, h);
        auto ham = assemble_hamiltonian(dom, symmetric_field(dom, 0.5), random_potential(dom, 1.0, 3));
        const double lam0 = ham.eigen().values[0] - 1.0;
        std::mt19937_64 rng(12);
        std::normal_distribution<double> g;
        for (int t = 0; t < 5; ++t) {
            CVector gv(ham.size());
            for (int k = 0; k < ham.size(); ++k) gv[k] = Complex(g(rng), g(rng));
            auto chk = hilbert_schmidt_product_check(ham, gv, lam0);
            CHECK(chk.holds);
            CHECK(chk.lhs > 0.0);
        }
        CVector ones = CVector::Ones(ham.size());
        CHECK(trace_ideal_ratio(ham, ones, lam0, 1.0, 2.0) > 0.0);
    }
}
