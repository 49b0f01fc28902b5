#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctlab/lattice.hpp"
#include "ctlab/schatten.hpp"

namespace ctlab {

enum class Branch { Condition1 = 1, Condition2 = 2 };

std::string branch_name(Branch b);

struct AdmissibleParams {
    double theta1 = 1e-3;
    double theta2 = 0.0;
    double s = 0.0;
    double a0 = 0.0;
    double lambda0 = -1.0;
    double e0 = 0.0;
    double delta = 0.5;
    double xi1 = 0.0;
    double xi2 = 0.0;
    double c_z = 1.0;
    double c_star = 0.0;
    Branch branch = Branch::Condition1;
};

struct DecayFit {
    double rate = 0.0;
    double log_prefactor = 0.0;
    double r2 = 0.0;
    int samples = 0;
    int censored = 0;
    bool valid = false;
};

struct FormBound {
    double theta1;
    double theta2;
};

/// Theta2 = sup V_-; a bounded negative part satisfies the form bound with any Theta1.
FormBound form_bound_constants(const ScalarPotential& v, double theta1);

/// max over random phi of <phi, V_- phi> - Theta1 <phi, H(A,0) phi> - Theta2 |phi|^2;
/// nonpositive when the form bound holds on the sampled vectors.
double form_bound_excess(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v,
                         const FormBound& fb, int trials, std::uint64_t seed);

struct GroundState {
    double e0;
    double lambda0;
};

/// E0 = min spectrum of H(0,V) on `reference`; lambda0 = min(-Theta2, E0) - offset.
GroundState e0_lambda0(const ScalarPotential& v, const GridDomain& reference, double theta2, double offset = 1.0);

struct XiConstants {
    double xi1;
    double xi2;
};

XiConstants xi_constants(double s, double a0, double theta1, double theta2);

/// max(1, max_k |(lambda_k - lambda0)/(lambda_k - z)|).
double c_z(std::span<const double> spectrum, Complex z, double lambda0);

/// delta with delta * lambda0 = (lambda0 + min(-Theta2, E0)) / 2.
double midpoint_delta(double lambda0, double theta2, double e0);

/// Closed interval (condition 1) or half-open window (condition 2) for a0^2 at a given s.
struct A0Window {
    double lower;
    double upper;
    bool upper_strict;
};
A0Window a0_squared_window(Branch b, double s, double lambda0, double theta1, double theta2, double delta, double cz);

/// Upper end (1 - Theta1)/(4 c) of the admissible s interval, shared by both branches.
double s_upper(double theta1, double cz);

double c_star(const AdmissibleParams& p);

struct AdmissibleRequest {
    /// Empty selects whichever branch yields the larger a0.
    std::optional<Branch> branch;
    bool maximize_a0 = true;
    double s = 0.0;   // used when maximize_a0 is false
    double a0 = 0.0;  // used when maximize_a0 is false
    /// Fractional distance kept from strict inequalities when maximizing.
    double margin = 1e-2;
    int scan_points = 64;
};

AdmissibleParams admissible_params(std::span<const double> spectrum, Complex z, double lambda0, double theta1,
                                   double theta2, double e0, const AdmissibleRequest& req);

/// Empty when p satisfies every inequality of its branch, else the name of
/// the violated condition.
std::optional<std::string> admissibility_violation(const AdmissibleParams& p);

/// The stricter window that caps C* at 2 c: s fixed at a quarter of
/// (1-Theta1)/(4c) (1-delta)/(2-delta) and a0^2 at the top of its range.
AdmissibleParams simplified_params(std::span<const double> spectrum, Complex z, double lambda0, double theta1,
                                   double theta2, double e0);

/// Region-wise explicit bounds on c_z for z = u + iv: 1 - lambda0 + sqrt(2)|v| on
/// <u> < |v| < 2<u>, (5<u> - lambda0)/|v| on 0 < |v| < 2<u>. Empty elsewhere.
std::optional<double> c_z_region_bound(Complex z, double lambda0);

/// D H D^{-1} with D = diag(e^{a . x}).
CMatrix conjugate(const Hamiltonian& h, std::span<const double> a);

struct BExtraction {
    CMatrix b;
    double norm_b;
    double shift;  // Xi2 / Xi1
};

BExtraction extract_B(const Hamiltonian& h, std::span<const double> a, double xi1, double xi2);

struct UVReport {
    bool premise_ok = false;
    std::string premise_message;
    double norm_b = 0.0;
    double norm_b_bound = 0.0;  // 2 Xi1
    double factorization_residual = 0.0;  // relative, operator norm
    double u_inverse_norm = 0.0;
    double v_norm = 0.0;
    double inverse_norm = 0.0;  // ||(U+V)^{-1}||
    double c_star = 0.0;
    bool invertible = false;
    bool b_bound_ok = false;
    bool residual_ok = false;
    bool inverse_bound_ok = false;
    bool ok() const { return premise_ok && invertible && b_bound_ok && residual_ok && inverse_bound_ok; }
};

UVReport verify_uv_inverse(const Hamiltonian& h, std::span<const double> a, Complex z, const AdmissibleParams& p);

/// Least-squares fit of log(value) against distance over points with
/// value > floor and min_distance <= distance <= max_distance.
DecayFit fit_exponential(std::span<const std::pair<double, double>> points, double floor = 1e-13,
                         double min_distance = 2.0, double max_distance = kInf);

/// sum over Z^d of e^{-kappa |alpha|} with a rigorous shell tail bound.
struct LatticeSum {
    double truncated;
    double tail;
    int radius;
};
LatticeSum exponential_lattice_sum(double kappa, int d, int radius);

struct ConvolutionPair {
    std::vector<int> beta;
    std::vector<int> gamma;
    double lhs;
    double lhs_tail;
    double rhs;
    double slack;  // rhs - (lhs + lhs_tail)
};

struct ConvolutionReport {
    double c_delta;  // truncated value of c_{delta0,a0}, a lower estimate
    double c_tail;
    int c_radius;
    std::vector<ConvolutionPair> pairs;
    double min_slack;
    bool holds;
};

/// c_{delta0,a0} for the chain bound; the radius grows until the tail is
/// at most 1% of the sum.
LatticeSum convolution_constant(double a0, double delta0, int d);

ConvolutionReport convolution_sum_check(double a0, double delta0, int d, int radius,
                                        const std::vector<CubePair>& pairs);

/// `count` seeded pairs with |beta - gamma| <= max_distance inside [-10, 10]^d.
std::vector<CubePair> random_cube_pairs(int d, int count, double max_distance, std::uint64_t seed);

struct CtDecayOptions {
    double delta0 = 1.0;  // forced to 1 for n = 1
    double fit_slack = 0.05;
    double floor = 1e-13;
    double fit_min_distance = 2.0;
    double fit_max_distance = kInf;
    double calibration_distance = 2.0;
};

struct CtDecayResult {
    std::vector<BlockNorm> norms;
    std::vector<double> predicted;
    DecayFit fit;
    double expected_rate = 0.0;  // delta0 * a0
    bool rate_ok = false;
    /// n = 1: C_{p,lambda0} calibrated on pairs closer than calibration_distance.
    /// n >= 2: the sup constant K of the J_{np} one-step bound.
    double prefactor = 0.0;
    double prefactor_min = 0.0;  // smallest constant valid at every sampled pair
    double c_delta = 0.0;
    bool bound_ok = false;
    int bound_violations = 0;
    /// n = 2: the Hoelder chain sum_alpha ||R_{beta alpha}||_{2p} ||R_{alpha gamma}||_{2p}
    /// must dominate each norm.
    bool chain_ok = true;
    double worst_chain_ratio = 0.0;
};

CtDecayResult ct_decay_experiment(const Hamiltonian& h, Complex z, int n, double p,
                                  const std::vector<CubePair>& pairs, const AdmissibleParams& params,
                                  const CtDecayOptions& opt = {});

/// All ordered pairs (beta, gamma) of covering cubes with |beta - gamma| <= max_distance.
std::vector<CubePair> all_cube_pairs(const GridDomain& dom, double max_distance);
/// Pairs (ref, gamma) for each ref and every covering cube gamma within max_distance.
std::vector<CubePair> reference_pairs(const GridDomain& dom, const std::vector<std::vector<int>>& refs,
                                      double max_distance);

/// (H - z)^{-n} from the cached eigendecomposition.
CMatrix resolvent_power(const Hamiltonian& h, Complex z, int n);

struct HilbertSchmidtCheck {
    double lhs;  // ||g f(H)||_{J_2}
    double rhs;  // ||g||_2 * sup_x ||k(x, .)||_2
    bool holds;
};

/// Product bound for a multiplication operator g times f(H) with f(l) = (l - lambda0)^{-1}.
HilbertSchmidtCheck hilbert_schmidt_product_check(const Hamiltonian& h, const CVector& g, double lambda0);

/// ||g f(H)||_{J_p} / ||g||_p for f(l) = (l - lambda0)^{-alpha}, for which
/// ||(H - lambda0)^alpha f(H)|| = 1. An empirical look at the general-p
/// product bound.
double trace_ideal_ratio(const Hamiltonian& h, const CVector& g, double lambda0, double alpha, double p);

}  // namespace ctlab
