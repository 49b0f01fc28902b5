#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ctlab/lattice.hpp"

namespace ctlab {

/// Brownian paths (generator (1/2) Laplacian) started at a common point,
/// stored as (steps + 1) positions per path. A path is alive at step j when
/// every position up to j lies in the domain.
struct PathEnsemble {
    int count = 0;
    int dim = 0;
    int steps = 0;
    double t = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> positions;  // [path][step][axis]
    std::vector<int> exit_step;     // first step outside the domain, steps + 1 if none

    std::span<const double> path(int p) const {
        return {positions.data() + static_cast<std::size_t>(p) * (steps + 1) * dim,
                static_cast<std::size_t>(steps + 1) * dim};
    }
    std::span<const double> position(int p, int step) const { return path(p).subspan(step * dim, dim); }
    bool alive(int p, int step) const { return step < exit_step[p]; }
    bool survived(int p) const { return exit_step[p] > steps; }
};

/// Steps per path: t / dt rounded, with dt adjusted so steps * dt = t exactly.
int step_count(double t, double dt);

PathEnsemble sample_paths(std::span<const double> x0, double t, double dt, int count, std::uint64_t seed,
                          const GridDomain& dom);

/// S = i sum_j A(w_j) . (w_{j+1} - w_j) + (i/2) sum_j (div A)(m_j) dt + sum_j V(m_j) dt
/// with m_j the segment midpoints. A path of n + 1 points in d dimensions.
Complex fk_action(std::span<const double> path, int dim, double dt, const VectorPotential& a,
                  const ScalarPotential& v);

struct McSpec {
    int count = 10000;
    double dt = 0.01;
    std::uint64_t seed = 1;
};

struct FkEstimate {
    std::vector<int> sites;  // interior indices
    CVector estimate;
    RVector std_error;
};

using PhiFunction = std::function<Complex(std::span<const double> x)>;

/// Monte Carlo mean of e^{-S} [alive] phi(w(t)) started from each listed
/// interior site (all sites when `sites` is empty).
FkEstimate fk_semigroup_apply(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v, double t,
                              const PhiFunction& phi, const McSpec& mc, std::vector<int> sites = {});

/// Site values (per interior site) extended by zero and interpolated multilinearly.
FkEstimate fk_semigroup_apply(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v, double t,
                              const CVector& phi, const McSpec& mc, std::vector<int> sites = {});

/// Multilinear interpolation of interior-site values, zero outside the interior.
Complex interpolate_sites(const GridDomain& dom, const CVector& values, std::span<const double> x);

/// expm(-t H) from the eigendecomposition.
CMatrix heat_matrix(const Hamiltonian& h, double t);
CVector heat_action(const Hamiltonian& h, double t, const CVector& phi);

/// expm(-t H(0,0)) phi on a full box, applied axis by axis. Exact for the
/// Kronecker structure of the free Dirichlet Laplacian, so fine boxes stay cheap.
CVector free_box_heat_action(const GridDomain& dom, double t, const CVector& phi);

struct DiamagneticReport {
    int trials = 0;
    int violations = 0;
    double worst_excess = 0.0;  // max over trials and sites of |e^{-tH_A} phi| - e^{-tH_0}|phi|
    double max_gap = 0.0;       // largest strict margin seen
    bool holds() const { return violations == 0; }
};

/// Entrywise |expm(-tH(A,V)) phi| <= expm(-tH(0,V)) |phi| + tol for each phi.
DiamagneticReport diamagnetic_check(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v,
                                    double t, const std::vector<CVector>& phis, double tol = 1e-10);

/// Complex Gaussian vectors of length n.
std::vector<CVector> random_vectors(int n, int count, std::uint64_t seed);

struct MonotonicityReport {
    int violations = 0;
    double worst_excess = 0.0;  // max of inner - outer
    double max_gap = 0.0;       // max of outer - inner
    bool holds() const { return violations == 0; }
};

/// zero-extended expm(-tH_inner(0,V)) chi phi <= expm(-tH_outer(0,V)) phi entrywise for
/// phi >= 0 given per box site of the shared box. The masks must be nested.
MonotonicityReport monotonicity_check(const GridDomain& inner, const GridDomain& outer, const ScalarPotential& v,
                                      double t, const RVector& phi_box, double tol = 1e-10);

struct SmoothingRow {
    double t;
    double norm_av;
    double norm_0v;
    double envelope;
};

struct SmoothingReport {
    double p = 2.0;
    double q = 2.0;
    double gamma = 0.0;  // (d/2)(1/p - 1/q)
    std::vector<SmoothingRow> rows;
    double c = 0.0;
    double e = 0.0;
    double e0 = 0.0;  // bottom of the spectrum of H(0,V) on the domain
    bool chain_ok = false;
    bool envelope_ok = false;
    bool e_ok = false;  // -E < E0
    bool ok() const { return chain_ok && envelope_ok && e_ok; }
};

/// ||expm(-tH(A,V))||_{p,q} <= ||expm(-tH(0,V))||_{p,q} on a t grid, with the
/// envelope C t^{-gamma} e^{E t} fitted to the second norm.
SmoothingReport smoothing_check(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v,
                                const std::vector<double>& t_grid, double p, double q, double tol = 1e-10);

}  // namespace ctlab
