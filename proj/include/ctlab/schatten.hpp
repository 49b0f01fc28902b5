#pragma once

#include <span>
#include <vector>

#include "ctlab/lattice.hpp"

namespace ctlab {

/// Ordered pair of unit-cube centres.
struct CubePair {
    std::vector<int> beta;
    std::vector<int> gamma;
};

double cube_distance(std::span<const int> beta, std::span<const int> gamma);

struct BlockNorm {
    std::vector<int> beta;
    std::vector<int> gamma;
    double distance = 0.0;
    double p = 2.0;
    int n = 1;
    double value = 0.0;
};

/// Descending singular values, min(rows, cols) of them.
RVector singular_values(const CMatrix& m);

/// (sum sigma_k^p)^{1/p}; p = kInf gives the largest singular value.
double schatten_norm(const CMatrix& m, double p);
double schatten_norm_from_singular(const RVector& sigma, double p);

/// Discrete L^p -> L^q operator norm with site weight h^d. Exactly computable
/// for p = 1 (any q), q = inf (any p) and p = q = 2; other pairs throw.
double mixed_norm(const CMatrix& m, double p, double q, double h, int d);

/// Weighted L^p norm (h^d sum |g|^p)^{1/p} of site values.
double weighted_lp_norm(const CVector& g, double p, double h, int d);

/// sup_x ||k(x, .)||_{L^2} for the integral kernel k = M / h^d; this is the
/// L^2 -> L^inf norm of M.
double kernel_row_norm(const CMatrix& m, double h, int d);

/// Rows restricted to the sites of cube beta, columns to cube gamma.
CMatrix block(const CMatrix& m, const GridDomain& dom, std::span<const int> beta, std::span<const int> gamma);

BlockNorm block_norm(const CMatrix& m, const GridDomain& dom, const CubePair& pair, double p, int n = 1);

/// Norms for many pairs; evaluated in parallel, returned in input order.
std::vector<BlockNorm> block_norms(const CMatrix& m, const GridDomain& dom, const std::vector<CubePair>& pairs,
                                   double p, int n = 1);

}  // namespace ctlab
