#include "ctlab/schatten.hpp"

#include <cmath>
#include <string>

#include "ctlab/parallel.hpp"

namespace ctlab {

namespace {

void check_index(double p, const char* what) {
    if (!(p >= 1.0)) throw ValidationError(std::string(what) + " must be >= 1 (got " + std::to_string(p) + ")");
}

// ||v||_p on plain l^p without weights.
template <typename Vec>
double lp(const Vec& v, double p) {
    if (v.size() == 0) return 0.0;
    if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
    if (p == 1.0) return v.cwiseAbs().sum();
    if (p == 2.0) return v.norm();
    const double scale = v.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    return scale * std::pow((v.cwiseAbs() / scale).array().pow(p).sum(), 1.0 / p);
}

double conjugate_index(double p) {
    if (p == 1.0) return kInf;
    if (std::isinf(p)) return 1.0;
    return p / (p - 1.0);
}

}  // namespace

double cube_distance(std::span<const int> beta, std::span<const int> gamma) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) {
        const double diff = beta[j] - gamma[j];
        r2 += diff * diff;
    }
    return std::sqrt(r2);
}

RVector singular_values(const CMatrix& m) {
    if (m.size() == 0) return RVector(0);
    Eigen::BDCSVD<CMatrix> svd(m);
    return svd.singularValues();
}

double schatten_norm_from_singular(const RVector& sigma, double p) {
    check_index(p, "Schatten index p");
    return lp(sigma, p);
}

double schatten_norm(const CMatrix& m, double p) {
    check_index(p, "Schatten index p");
    return lp(singular_values(m), p);
}

double mixed_norm(const CMatrix& m, double p, double q, double h, int d) {
    check_index(p, "mixed norm index p");
    check_index(q, "mixed norm index q");
    if (m.size() == 0) return 0.0;
    const double vol = std::pow(h, d);
    if (p == 1.0) {
        double best = 0.0;
        for (Eigen::Index c = 0; c < m.cols(); ++c) best = std::max(best, lp(m.col(c), q));
        const double weight = std::isinf(q) ? 1.0 / vol : std::pow(vol, 1.0 / q - 1.0);
        return weight * best;
    }
    if (std::isinf(q)) {
        const double pc = conjugate_index(p);
        double best = 0.0;
        for (Eigen::Index r = 0; r < m.rows(); ++r) best = std::max(best, lp(m.row(r).transpose(), pc));
        const double weight = std::isinf(p) ? 1.0 : std::pow(vol, -1.0 / p);
        return weight * best;
    }
    if (p == 2.0 && q == 2.0) return singular_values(m)[0];
    throw ValidationError("mixed norm (" + std::to_string(p) + ", " + std::to_string(q) +
                          ") is not exactly computable");
}

double weighted_lp_norm(const CVector& g, double p, double h, int d) {
    check_index(p, "norm index p");
    if (std::isinf(p)) return lp(g, p);
    return std::pow(std::pow(h, d), 1.0 / p) * lp(g, p);
}

double kernel_row_norm(const CMatrix& m, double h, int d) { return mixed_norm(m, 2.0, kInf, h, d); }

CMatrix block(const CMatrix& m, const GridDomain& dom, std::span<const int> beta, std::span<const int> gamma) {
    if (m.rows() != dom.interior_count() || m.cols() != dom.interior_count())
        throw ValidationError("matrix does not match the domain interior");
    const auto rows = cube_sites(dom, beta);
    const auto cols = cube_sites(dom, gamma);
    CMatrix out(rows.size(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < rows.size(); ++i) out(i, j) = m(rows[i], cols[j]);
    return out;
}

BlockNorm block_norm(const CMatrix& m, const GridDomain& dom, const CubePair& pair, double p, int n) {
    BlockNorm out;
    out.beta = pair.beta;
    out.gamma = pair.gamma;
    out.distance = cube_distance(pair.beta, pair.gamma);
    out.p = p;
    out.n = n;
    out.value = schatten_norm(block(m, dom, pair.beta, pair.gamma), p);
    return out;
}

std::vector<BlockNorm> block_norms(const CMatrix& m, const GridDomain& dom, const std::vector<CubePair>& pairs,
                                   double p, int n) {
    check_index(p, "Schatten index p");
    std::vector<BlockNorm> out(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) { out[i] = block_norm(m, dom, pairs[i], p, n); });
    return out;
}

}  // namespace ctlab
