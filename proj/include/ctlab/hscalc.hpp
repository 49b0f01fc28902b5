#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctlab/lattice.hpp"
#include "ctlab/schatten.hpp"
#include "ctlab/smooth_function.hpp"

namespace ctlab {

/// tau(u) = 1 on |u| <= 1, 0 on |u| >= 2, and the logistic of
/// 1/t - 1/(1-t), t = |u| - 1, in between. This equals the mollifier ratio
/// g(1-t) / (g(1-t) + g(t)) with g(x) = exp(-1/x).
struct CutoffValue {
    double value;
    double d1;
    double d2;
};
CutoffValue cutoff_tau(double u);

/// Only one cutoff is implemented; the name is carried into outputs.
inline constexpr const char* kCutoffName = "exp-mollifier";

struct ExtensionParams {
    int n = 2;
    std::string tau = kCutoffName;
    /// Half-width of the u range; 0 picks it from the decay of f.
    double u_truncation = 0.0;
    /// Target absolute error per eigenvalue, relative to max |f| over the spectrum.
    double tolerance = 1e-8;
    int panel_budget = 40000;
};

void validate(const ExtensionParams& p, const SmoothFunction& f);

/// f~_n(u + iv) = sigma(u,v) sum_{r<=n} f^{(r)}(u) (iv)^r / r!, sigma = tau(v / <u>).
Complex extension_value(const SmoothFunction& f, int n, double u, double v);

/// Closed-form 1/2 (d_u + i d_v) f~_n.
Complex extension_dbar(const SmoothFunction& f, int n, double u, double v);

struct DbarSample {
    double u;
    double v;
};

/// u uniform on [-u_max, u_max], v uniform on the strip 0 < |v| < 2<u>.
std::vector<DbarSample> dbar_samples(int count, double u_max, std::uint64_t seed);

struct DbarBoundReport {
    /// Smallest C for which the pointwise bound holds on every sample.
    double c = 0.0;
    bool finite = false;
    int samples = 0;
    int in_u = 0;       // samples in <u> < |v| < 2<u>
    int outside_u = 0;  // samples in V but not U, where only the C-free term applies
    /// Max over samples outside U of lhs / (second term); at most 1 when the bound holds.
    double worst_outside_ratio = 0.0;
    bool outside_ok = true;
};

DbarBoundReport dbar_bound_check(const SmoothFunction& f, int n, const std::vector<DbarSample>& samples);

/// u beyond which <u>^{n+2} max_{r<=n+1} |f^{(r)}(u)| < 1e-14 on both sides.
double auto_truncation(const SmoothFunction& f, int n);

struct ScalarHs {
    Complex value;
    double error_estimate;
    int panels;
};

/// (1/pi) int dbar f~_n(z) / (lambda - z) du dv for one real lambda.
ScalarHs hs_scalar(const SmoothFunction& f, double lambda, const ExtensionParams& params, double abs_tol,
                   double u_truncation);

struct HsResult {
    CMatrix value;
    double error_estimate = 0.0;  // max over eigenvalues
    int panels = 0;               // total
    double u_truncation = 0.0;
};

/// f(H) through the Helffer-Sjoestrand integral, evaluated on the spectral
/// representation of H and hermitian-symmetrized. Throws NumericalError when
/// an eigenvalue integral misses its tolerance within the panel budget.
HsResult hs_apply(const Hamiltonian& h, const SmoothFunction& f, const ExtensionParams& params = {});

struct KernelDecayOptions {
    bool use_hs = false;
    ExtensionParams hs;
    double floor = 1e-13;
    double min_distance = 2.0;  // smallest distance entering the sup
    double knee = 4.0;          // monotonicity is checked beyond this distance
};

struct KernelDecayRow {
    BlockNorm norm;
    int k;
    double product;  // norm * distance^k
};

struct KernelDecayPerK {
    int k;
    double sup;
    bool finite;
    bool monotone;
    int monotone_violations;
};

struct KernelDecayReport {
    std::vector<BlockNorm> norms;  // beta = gamma pairs removed
    std::vector<KernelDecayRow> rows;
    std::vector<KernelDecayPerK> per_k;
    int excluded_diagonal = 0;
    /// Every norm sits at or below the noise floor.
    bool degenerate = false;
    bool ok() const;
};

/// Block norms ||chi_b f(H) chi_g||_{J_p} and the polynomial-weighted sups.
/// Pairs sharing beta and a primitive direction form a ray; along each ray
/// norm * distance^k must not increase past the knee.
KernelDecayReport kernel_decay_experiment(const Hamiltonian& h, const SmoothFunction& f, double p,
                                          const std::vector<int>& k_list, const std::vector<CubePair>& pairs,
                                          const KernelDecayOptions& opt = {});

/// (beta, beta + t * dir) for t = 1.. while the target cube stays in the domain.
std::vector<CubePair> ray_pairs(const GridDomain& dom, const std::vector<int>& beta,
                                const std::vector<std::vector<int>>& directions);

}  // namespace ctlab
