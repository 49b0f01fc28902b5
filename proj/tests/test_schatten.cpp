#include "doctest.h"

#include <cmath>
#include <random>

#include "ctlab/schatten.hpp"

using namespace ctlab;

namespace {

CMatrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
    std::normal_distribution<double> g;
    CMatrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = Complex(g(rng), g(rng));
    return m;
}

CMatrix random_unitary(std::mt19937_64& rng, int n) {
    Eigen::HouseholderQR<CMatrix> qr(random_matrix(rng, n, n));
    return qr.householderQ() * CMatrix::Identity(n, n);
}

}  // namespace

TEST_CASE("singular values of simple matrices") {
    auto s = singular_values(CMatrix::Identity(3, 3));
    CHECK(s.size() == 3);
    CHECK((s.array() - 1.0).abs().maxCoeff() < 1e-14);

    CVector u(3), v(2);
    u << 1.0, 2.0, Complex(0, 2);
    v << 3.0, Complex(0, 4);
    auto r = singular_values(u * v.adjoint());
    CHECK(r.size() == 2);
    CHECK(std::abs(r[0] - 15.0) < 1e-12);
    CHECK(std::abs(r[1]) < 1e-12);
}

TEST_CASE("singular values agree with eigenvalues of M^dagger M") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        CMatrix m = random_matrix(rng, 4, 4);
        auto s = singular_values(m);
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(m.adjoint() * m);
        for (int k = 0; k < 4; ++k) CHECK(std::abs(s[k] - std::sqrt(std::max(0.0, eig.eigenvalues()[3 - k]))) < 1e-10);
        for (int k = 1; k < 4; ++k) CHECK(s[k - 1] >= s[k]);
    }
    CHECK(singular_values(random_matrix(rng, 5, 3)).size() == 3);
}

TEST_CASE("schatten norms of explicit matrices") {
    CHECK(schatten_norm(CMatrix::Identity(5, 5), 2.0) == doctest::Approx(std::sqrt(5.0)));
    CHECK(schatten_norm(CMatrix::Identity(3, 3), kInf) == doctest::Approx(1.0));
    CMatrix d = CMatrix::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 4.0;
    CHECK(schatten_norm(d, 1.0) == doctest::Approx(7.0));
    CHECK(schatten_norm(d, 2.0) == doctest::Approx(5.0));
    CHECK(schatten_norm(d, kInf) == doctest::Approx(4.0));
    CHECK_THROWS_AS(schatten_norm(d, 0.5), ValidationError);
    CHECK(schatten_norm(CMatrix(0, 0), 2.0) == 0.0);
}

TEST_CASE("mixed norms") {
    CMatrix m(2, 2);
    m << 1.0, 2.0, 3.0, 4.0;
    CHECK(mixed_norm(m, 1.0, kInf, 1.0, 2) == doctest::Approx(4.0));
    CHECK(mixed_norm(m, 2.0, kInf, 1.0, 2) == doctest::Approx(5.0));
    CHECK_THROWS_AS(mixed_norm(m, 2.0, 1.0, 1.0, 2), ValidationError);

    // Brute force over the extreme points of the L^1 ball for (1, inf).
    double brute = 0.0;
    for (int j = 0; j < 2; ++j) brute = std::max(brute, m.col(j).cwiseAbs().maxCoeff());
    CHECK(mixed_norm(m, 1.0, kInf, 1.0, 2) == doctest::Approx(brute));

    // (2, inf) by maximization over random unit vectors never exceeds the formula.
    std::mt19937_64 rng(1);
    double best = 0.0;
    for (int t = 0; t < 20000; ++t) {
        CVector phi = random_matrix(rng, 2, 1);
        phi /= phi.norm();
        best = std::max(best, (m * phi).cwiseAbs().maxCoeff());
    }
    CHECK(best <= 5.0 + 1e-12);
    CHECK(best >= 5.0 - 1e-2);

    const CMatrix id = CMatrix::Identity(4, 4);
    for (auto [p, q] : {std::pair{1.0, 1.0}, {1.0, 2.0}, {1.0, kInf}, {2.0, 2.0}, {2.0, kInf}, {kInf, kInf}})
        CHECK(mixed_norm(id, p, q, 1.0, 2) == doctest::Approx(1.0));
}

TEST_CASE("mixed norm weights follow the discrete measure") {
    // Operator of the continuum heat-kernel type: check the ratio definition directly.
    std::mt19937_64 rng(3);
    CMatrix m = random_matrix(rng, 6, 6);
    const double h = 0.5;
    const int d = 2;
    // (1,2): attained at phi = e_j / h^d.
    double best = 0.0;
    for (int j = 0; j < 6; ++j) {
        CVector phi = CVector::Zero(6);
        phi[j] = 1.0 / std::pow(h, d);
        best = std::max(best, weighted_lp_norm(m * phi, 2.0, h, d) / weighted_lp_norm(phi, 1.0, h, d));
    }
    CHECK(mixed_norm(m, 1.0, 2.0, h, d) == doctest::Approx(best));
    // (2,2) is scale free.
    CHECK(mixed_norm(m, 2.0, 2.0, h, d) == doctest::Approx(schatten_norm(m, kInf)));
    // (2,inf) at the optimiser phi = conj(row) / |row|.
    int r;
    m.rowwise().norm().maxCoeff(&r);
    CVector phi = m.row(r).adjoint();
    const double ratio = (m * phi).cwiseAbs().maxCoeff() / weighted_lp_norm(phi, 2.0, h, d);
    CHECK(kernel_row_norm(m, h, d) == doctest::Approx(ratio));
}

TEST_CASE("block extraction") {
    auto dom = build_domain(2, {4, 4}, 0.5);
    const int n = dom.interior_count();
    const CMatrix id = CMatrix::Identity(n, n);
    std::vector<int> b{0, 0}, g{1, 0};
    CHECK(max_abs_entry(block(id, dom, b, b) - CMatrix::Identity(4, 4)) == 0.0);
    CHECK(block(id, dom, b, g).cwiseAbs().sum() == 0.0);
    CHECK(block(id, dom, b, std::vector<int>{7, 7}).size() == 0);

    std::mt19937_64 rng(5);
    CMatrix m = random_matrix(rng, n, n);
    m = (m + m.adjoint()).eval();
    for (const auto& beta : covering_cubes(dom))
        for (const auto& gamma : covering_cubes(dom)) {
            const CMatrix full = indicator(dom, beta).asDiagonal() * m * indicator(dom, gamma).asDiagonal();
            CHECK(std::abs(schatten_norm(block(m, dom, beta, gamma), 2.0) - full.norm()) <= 1e-12);
        }
}

TEST_CASE("block_norms keeps input order and distances") {
    auto dom = build_domain(2, {3, 3}, 1.0);
    std::mt19937_64 rng(6);
    CMatrix m = random_matrix(rng, 9, 9);
    std::vector<CubePair> pairs{{{0, 0}, {2, 2}}, {{1, 1}, {1, 1}}, {{0, 2}, {2, 0}}};
    auto norms = block_norms(m, dom, pairs, 2.0, 1);
    REQUIRE(norms.size() == 3);
    CHECK(norms[0].distance == doctest::Approx(std::sqrt(8.0)));
    CHECK(norms[1].distance == 0.0);
    CHECK(norms[1].value == doctest::Approx(std::abs(m(4, 4))));
    CHECK(norms[2].value == doctest::Approx(std::abs(m(dom.interior_index(dom.box_index(std::vector<int>{0, 2})),
                                                       dom.interior_index(dom.box_index(std::vector<int>{2, 0}))))));
}

TEST_CASE("schatten properties on random matrices") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> size(1, 12);
    const double ps[] = {1.0, 1.5, 2.0, 3.0, 4.0, kInf};
    for (int trial = 0; trial < 20; ++trial) {
        const int n = size(rng);
        CMatrix a = random_matrix(rng, n, n), b = random_matrix(rng, n, n);
        for (std::size_t i = 0; i + 1 < std::size(ps); ++i)
            CHECK(schatten_norm(a, ps[i + 1]) <= schatten_norm(a, ps[i]) + 1e-10);
        for (double p : {1.0, 2.0, 3.0}) {
            CHECK(schatten_norm(a * b, p) <= schatten_norm(a, 2 * p) * schatten_norm(b, 2 * p) + 1e-10);
            CHECK(mixed_norm(a, 2.0, 2.0, 1.0, 2) <= schatten_norm(a, p) + 1e-10);
        }
        const CMatrix u = random_unitary(rng, n), w = random_unitary(rng, n);
        CHECK(std::abs(schatten_norm(u * a * w, 3.0) - schatten_norm(a, 3.0)) <= 1e-10 * schatten_norm(a, 3.0));
    }
}
