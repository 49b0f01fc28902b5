#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "ctlab/fk.hpp"
#include "ctlab/parallel.hpp"
#include "ctlab/schatten.hpp"

using namespace ctlab;

namespace {

// Closed-form heat flow of the Gaussian exp(-|y - c|^2 / (2 s^2)) under e^{t Laplacian / 2}.
double gaussian_heat(std::span<const double> x, std::span<const double> c, double s, double t) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) r2 += (x[j] - c[j]) * (x[j] - c[j]);
    const double w = s * s + t;
    return std::pow(s * s / w, 0.5 * x.size()) * std::exp(-r2 / (2.0 * w));
}

PhiFunction gaussian_phi(std::vector<double> c, double s) {
    return [c, s](std::span<const double> x) {
        double r2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) r2 += (x[j] - c[j]) * (x[j] - c[j]);
        return Complex(std::exp(-r2 / (2.0 * s * s)));
    };
}

}  // namespace

TEST_CASE("path increments and alive flags") {
    auto dom = build_domain(2, {10, 10}, 1.0);
    const std::vector<double> x0{4.5, 4.5};
    const int count = 100000;
    const double dt = 0.04;
    auto e = sample_paths(x0, dt, dt, count, 9, dom);
    CHECK(e.steps == 1);
    for (int axis = 0; axis < 2; ++axis) {
        double s = 0.0, s2 = 0.0;
        for (int p = 0; p < count; ++p) {
            const double inc = e.position(p, 1)[axis] - x0[axis];
            s += inc;
            s2 += inc * inc;
        }
        const double mean = s / count;
        const double var = (s2 - count * mean * mean) / (count - 1);
        CHECK(std::abs(mean) <= 3.0 * std::sqrt(dt / count));
        CHECK(std::abs(var - dt) <= 3.0 * std::sqrt(2.0 / count) * dt);
    }

    auto long_run = sample_paths(std::vector<double>{0.0, 0.0}, 2.0, 0.05, 200, 3, dom);
    int died = 0;
    for (int p = 0; p < 200; ++p) {
        for (int j = 1; j <= long_run.steps; ++j)
            if (long_run.alive(p, j)) CHECK(long_run.alive(p, j - 1));
        died += long_run.survived(p) ? 0 : 1;
    }
    CHECK(died > 0);

    auto outside = sample_paths(std::vector<double>{-5.0, 2.0}, 0.1, 0.01, 50, 1, dom);
    for (int p = 0; p < 50; ++p) CHECK_FALSE(outside.alive(p, 0));

    auto again = sample_paths(x0, 0.5, 0.05, 300, 9, dom);
    set_thread_count(1);
    auto serial = sample_paths(x0, 0.5, 0.05, 300, 9, dom);
    set_thread_count(0);
    CHECK(again.positions == serial.positions);
    CHECK(again.exit_step == serial.exit_step);

    CHECK_THROWS_AS(sample_paths(x0, 0.1, 0.2, 10, 1, dom), ValidationError);
    CHECK_THROWS_AS(sample_paths(x0, 0.1, 0.01, 0, 1, dom), ValidationError);
}

TEST_CASE("path action") {
    auto dom = build_domain(2, {10, 10}, 1.0);
    auto e = sample_paths(std::vector<double>{4.0, 5.0}, 1.0, 0.01, 50, 4, dom);
    auto zero_a = zero_field(dom);
    const double c = 0.7;
    auto vc = constant_potential(dom, c);
    const std::vector<double> a_const{0.3, -1.1};
    auto ac = constant_field(dom, a_const);
    auto sym = symmetric_field(dom, 1.3);
    auto harm = harmonic_potential(dom, 0.8, std::vector<double>{4.5, 4.5});
    for (int p = 0; p < 50; ++p) {
        const auto path = e.path(p);
        const Complex s1 = fk_action(path, 2, e.dt, zero_a, vc);
        CHECK(std::abs(s1 - Complex(c * 1.0)) <= 1e-12);

        const Complex s2 = fk_action(path, 2, e.dt, ac, zero_potential(dom));
        const auto end = e.position(p, e.steps), start = e.position(p, 0);
        const double tele = a_const[0] * (end[0] - start[0]) + a_const[1] * (end[1] - start[1]);
        CHECK(s2.real() == 0.0);
        CHECK(std::abs(s2.imag() - tele) <= 1e-12);

        const Complex s3 = fk_action(path, 2, e.dt, sym, zero_potential(dom));
        CHECK(std::abs(std::abs(std::exp(-s3)) - 1.0) <= 1e-12);

        const Complex s4 = fk_action(path, 2, e.dt, sym, harm);
        const Complex s5 = fk_action(path, 2, e.dt, zero_a, harm);
        CHECK(std::abs(std::abs(std::exp(-s4)) - std::exp(-s5.real())) <= 1e-12);
    }
    CHECK_THROWS_AS(fk_action(e.path(0), 2, e.dt, random_field(dom, 1.0, 2), zero_potential(dom)), ValidationError);
    CHECK_THROWS_AS(fk_action(e.path(0), 2, e.dt, zero_a, random_potential(dom, 1.0, 2)), ValidationError);
}

TEST_CASE("semigroup estimate near t = 0 and against the heat kernel") {
    auto dom = build_domain(2, {20, 20}, 1.0);
    const std::vector<double> c{9.3, 9.7};
    const double s = 1.5;
    auto phi = gaussian_phi(c, s);
    std::vector<int> sites;
    for (int k : {9 * 20 + 9, 8 * 20 + 11, 10 * 20 + 7, 12 * 20 + 12, 6 * 20 + 9}) sites.push_back(k);

    McSpec tiny{2000, 1e-6, 5};
    auto e0 = fk_semigroup_apply(dom, zero_field(dom), zero_potential(dom), 1e-6, phi, tiny, sites);
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const RVector x = dom.position(sites[i]);
        CHECK(std::abs(e0.estimate[i] - phi(std::span<const double>(x.data(), 2))) <= 3.0 * e0.std_error[i] + 1e-12);
    }

    McSpec mc{100000, 0.02, 11};
    const double t = 0.8;
    auto est = fk_semigroup_apply(dom, zero_field(dom), zero_potential(dom), t, phi, mc, sites);
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const RVector x = dom.position(sites[i]);
        const double exact = gaussian_heat(std::span<const double>(x.data(), 2), c, s, t);
        CHECK(std::abs(est.estimate[i] - exact) <= 3.0 * est.std_error[i]);
        CHECK(est.estimate[i].imag() == 0.0);
    }
    CHECK_THROWS_AS(fk_semigroup_apply(dom, zero_field(dom), random_potential(dom, 1.0, 1), t, phi, mc, sites),
                    ValidationError);
}

TEST_CASE("semigroup estimate against the lattice heat flow") {
    auto dom = build_domain(2, {24, 24}, 0.25);
    const std::vector<double> c{2.4, 2.6};
    auto phi_fn = gaussian_phi(c, 0.8);
    CVector phi(dom.interior_count());
    for (int k = 0; k < dom.interior_count(); ++k) {
        const RVector x = dom.position(k);
        phi[k] = phi_fn(std::span<const double>(x.data(), 2));
    }
    auto h = assemble_hamiltonian(dom, zero_field(dom), zero_potential(dom));
    const double t = 0.3;
    const CVector exact = heat_action(h, t, phi);
    CHECK(max_abs_entry(exact - free_box_heat_action(dom, t, phi)) <= 1e-12);

    std::vector<int> sites{dom.interior_index(dom.box_index(std::vector<int>{11, 11})),
                           dom.interior_index(dom.box_index(std::vector<int>{5, 12})),
                           dom.interior_index(dom.box_index(std::vector<int>{20, 3}))};
    auto est = fk_semigroup_apply(dom, zero_field(dom), zero_potential(dom), t, phi, McSpec{20000, 0.01, 3}, sites);
    for (std::size_t i = 0; i < sites.size(); ++i)
        CHECK(std::abs(est.estimate[i] - exact[sites[i]]) <= std::max(3.0 * est.std_error[i], 0.02));
}

TEST_CASE("axis-by-axis heat flow equals the dense exponential") {
    auto dom = build_domain(3, {4, 3, 5}, 0.5);
    auto h = assemble_hamiltonian(dom, zero_field(dom), zero_potential(dom));
    auto phi = random_vectors(dom.interior_count(), 1, 8)[0];
    CHECK(max_abs_entry(heat_action(h, 0.7, phi) - free_box_heat_action(dom, 0.7, phi)) <= 1e-12);
    CHECK(max_abs_entry(heat_matrix(h, 0.7) * phi - heat_action(h, 0.7, phi)) <= 1e-12);
    auto masked = build_domain(2, {4, 4}, 1.0, box_mask(std::vector<int>{4, 4}, std::vector<int>{1, 1},
                                                         std::vector<int>{4, 4}));
    CHECK_THROWS_AS(free_box_heat_action(masked, 0.1, CVector::Ones(9)), ValidationError);
}

TEST_CASE("diamagnetic inequality on the lattice") {
    auto dom = build_domain(2, {6, 6}, 1.0);
    auto v = random_potential(dom, 2.0, 4);

    std::vector<CVector> pos;
    for (const auto& x : random_vectors(36, 10, 3)) pos.push_back(x.cwiseAbs().cast<Complex>());
    auto same = diamagnetic_check(dom, zero_field(dom), v, 0.5, pos);
    CHECK(same.holds());
    CHECK(same.worst_excess <= 1e-12);
    CHECK(same.max_gap <= 1e-12);

    std::vector<CVector> deltas;
    for (int k : {0, 14, 35}) {
        CVector d = CVector::Zero(36);
        d[k] = 1.0;
        deltas.push_back(d);
    }
    auto strict = diamagnetic_check(dom, random_field(dom, 2.0, 6), v, 0.5, deltas);
    CHECK(strict.holds());
    CHECK(strict.max_gap > 1e-4);

    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto rep = diamagnetic_check(dom, random_field(dom, 3.0, seed), v, 0.3 * seed, random_vectors(36, 50, seed));
        CHECK(rep.trials == 50);
        CHECK(rep.holds());
    }
    auto sym = diamagnetic_check(dom, symmetric_field(dom, 0.9), v, 1.0, random_vectors(36, 50, 77));
    CHECK(sym.holds());
}

TEST_CASE("domain monotonicity") {
    const std::vector<int> ext{8, 8};
    auto outer = build_domain(2, ext, 1.0);
    auto inner = build_domain(2, ext, 1.0, box_mask(ext, std::vector<int>{2, 2}, std::vector<int>{6, 6}));
    auto v0 = zero_potential(outer);

    auto eq = monotonicity_check(outer, outer, v0, 0.5, RVector::Ones(64));
    CHECK(eq.holds());
    CHECK(eq.max_gap <= 1e-12);
    CHECK(eq.worst_excess <= 1e-12);

    RVector phi = RVector::Zero(64);
    for (int k = 0; k < inner.interior_count(); ++k) phi[inner.box_index(k)] = 1.0;
    auto rep = monotonicity_check(inner, outer, v0, 0.5, phi);
    CHECK(rep.holds());
    CHECK(rep.max_gap > 1e-3);

    auto zero = monotonicity_check(inner, outer, v0, 0.5, RVector::Zero(64));
    CHECK(zero.max_gap == 0.0);
    CHECK(zero.worst_excess == 0.0);

    auto six = build_domain(2, ext, 1.0, box_mask(ext, std::vector<int>{1, 1}, std::vector<int>{7, 7}));
    auto vr = random_potential(outer, 3.0, 12);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        RVector f(64);
        for (auto& x : f) x = unif(rng);
        CHECK(monotonicity_check(six, outer, vr, 0.2 + trial, f).holds());
    }

    auto other = build_domain(2, ext, 1.0, box_mask(ext, std::vector<int>{0, 0}, std::vector<int>{3, 3}));
    CHECK_THROWS_AS(monotonicity_check(other, inner, v0, 0.5, phi), ValidationError);
    CHECK_THROWS_AS(monotonicity_check(inner, outer, v0, 0.5, -phi), ValidationError);
}

TEST_CASE("smoothing chain and envelope") {
    auto dom = build_domain(2, {6, 6}, 1.0);
    auto v = random_potential(dom, 2.0, 8);
    auto a = symmetric_field(dom, 0.8);
    std::vector<double> grid;
    for (int i = 0; i < 20; ++i) grid.push_back(0.05 * std::pow(1.35, i));

    auto r22 = smoothing_check(dom, a, v, grid, 2.0, 2.0);
    CHECK(r22.gamma == 0.0);
    CHECK(r22.chain_ok);
    CHECK(r22.envelope_ok);
    for (const auto& row : r22.rows) CHECK(std::abs(row.norm_0v - std::exp(-row.t * r22.e0)) <= 1e-12);
    CHECK(std::abs(r22.e + r22.e0) <= 1e-9);

    auto r1i = smoothing_check(dom, a, v, grid, 1.0, kInf);
    CHECK(r1i.gamma == 1.0);
    CHECK(r1i.chain_ok);
    CHECK(r1i.envelope_ok);
    CHECK(r1i.e_ok);

    auto free_dom = build_domain(2, {5, 5}, 1.0);
    auto rf = smoothing_check(free_dom, zero_field(free_dom), zero_potential(free_dom), grid, 1.0, 2.0);
    CHECK(rf.e < 0.0);
    CHECK(rf.ok());
    CHECK(rf.rows.back().norm_0v < rf.rows.front().norm_0v);

    CHECK_THROWS_AS(smoothing_check(dom, a, v, grid, 3.0, 3.0), ValidationError);
    CHECK_THROWS_AS(smoothing_check(dom, a, v, {}, 2.0, 2.0), ValidationError);
}

TEST_CASE("Monte Carlo error shrinks like count^{-1/2}") {
    auto dom = build_domain(2, {16, 16}, 1.0);
    const std::vector<double> c{7.5, 7.5};
    auto phi = gaussian_phi(c, 1.5);
    const double t = 0.5;
    std::vector<int> sites;
    for (int i = 5; i <= 9; ++i)
        for (int j = 5; j <= 9; ++j) sites.push_back(i * 16 + j);
    std::vector<double> lx, ly;
    for (int count : {1000, 10000, 100000}) {
        auto est = fk_semigroup_apply(dom, zero_field(dom), zero_potential(dom), t, phi, McSpec{count, 0.05, 21}, sites);
        double ms = 0.0;
        for (std::size_t i = 0; i < sites.size(); ++i) {
            const RVector x = dom.position(sites[i]);
            ms += std::norm(est.estimate[i] - gaussian_heat(std::span<const double>(x.data(), 2), c, 1.5, t));
        }
        lx.push_back(std::log(static_cast<double>(count)));
        ly.push_back(0.5 * std::log(ms / sites.size()));
    }
    const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = sxy / sxx;
    CHECK(std::abs(slope + 0.5) <= 0.15);
}
