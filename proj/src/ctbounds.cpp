#include "ctlab/ctbounds.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "ctlab/parallel.hpp"

namespace ctlab {

namespace {

// 1/(2s) + s/4, the coefficient of a0^2 in Xi2.
double q_of(double s) { return 1.0 / (2.0 * s) + s / 4.0; }

double spectral_norm(const CMatrix& m) { return m.size() == 0 ? 0.0 : singular_values(m)[0]; }

CMatrix diag_function(const EigenPairs& eig, const CVector& w) {
    return eig.vectors * w.asDiagonal() * eig.vectors.adjoint();
}

template <typename F>
CMatrix spectral_map(const EigenPairs& eig, F f) {
    CVector w(eig.values.size());
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = f(eig.values[k]);
    return diag_function(eig, w);
}

void check_distinct_from_spectrum(std::span<const double> spectrum, Complex z) {
    double scale = 1.0;
    for (double l : spectrum) scale = std::max(scale, std::abs(l));
    for (double l : spectrum)
        if (std::abs(l - z) <= 1e-14 * scale)
            throw ValidationError("z lies on the spectrum; the resolvent is undefined there");
}

// Maximizes f over [lo, hi] by a log-spaced scan followed by golden-section
// refinement around the best scan point.
template <typename F>
double maximize_log_scan(F f, double lo, double hi, int points) {
    std::vector<double> grid(points);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < points; ++i) grid[i] = std::exp(llo + (lhi - llo) * i / (points - 1));
    grid.back() = hi;
    int best = 0;
    double best_val = -kInf;
    for (int i = 0; i < points; ++i) {
        const double v = f(grid[i]);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = grid[std::max(best - 1, 0)];
    double b = grid[std::min(best + 1, points - 1)];
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-15 * b; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    const double refined = f1 > f2 ? x1 : x2;
    return std::max(f1, f2) > best_val ? refined : grid[best];
}

double shell_count(int k, int d) {
    if (k == 0) return 1.0;
    return std::pow(2.0 * k + 1.0, d) - std::pow(2.0 * k - 1.0, d);
}

// Bound on sum_{k > radius} N_k e^{-kappa k}.
double shell_tail(double kappa, int d, int radius) {
    double acc = 0.0;
    const double peak = d / kappa;
    for (int k = radius + 1;; ++k) {
        const double term = shell_count(k, d) * std::exp(-kappa * k);
        acc += term;
        if (k > peak && (term <= 1e-17 * acc || term < 1e-300)) {
            const double next = shell_count(k + 1, d) * std::exp(-kappa * (k + 1));
            const double ratio = next / term;
            if (ratio < 1.0) acc += term * ratio / (1.0 - ratio);
            break;
        }
        if (k > radius + 10000000) throw NumericalError("lattice tail sum failed to converge");
    }
    return acc;
}

// Visits every alpha in [-r, r]^d.
template <typename F>
void for_each_in_cube(int d, int r, F f) {
    std::vector<int> alpha(d, -r);
    while (true) {
        f(alpha);
        int j = 0;
        while (j < d && ++alpha[j] > r) {
            alpha[j] = -r;
            ++j;
        }
        if (j == d) break;
    }
}

double norm2(std::span<const int> a) {
    double s = 0.0;
    for (int v : a) s += double(v) * v;
    return std::sqrt(s);
}

}  // namespace

std::string branch_name(Branch b) { return b == Branch::Condition1 ? "condition-1" : "condition-2"; }

FormBound form_bound_constants(const ScalarPotential& v, double theta1) {
    if (!(theta1 > 0.0 && theta1 < 1.0)) throw ValidationError("Theta1 must lie in (0, 1)");
    double theta2 = 0.0;
    for (std::size_t s = 0; s < v.values().size(); ++s) theta2 = std::max(theta2, v.negative_part(static_cast<int>(s)));
    return {theta1, theta2};
}

double form_bound_excess(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v,
                         const FormBound& fb, int trials, std::uint64_t seed) {
    const Hamiltonian h0 = assemble_hamiltonian(dom, a, zero_potential(dom));
    const int n = dom.interior_count();
    RVector vminus(n);
    for (int k = 0; k < n; ++k) vminus[k] = v.negative_part(dom.box_index(k));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    double worst = -kInf;
    for (int t = 0; t < trials; ++t) {
        CVector phi(n);
        for (int k = 0; k < n; ++k) phi[k] = Complex(g(rng), g(rng));
        const double lhs = (phi.adjoint() * vminus.asDiagonal() * phi)(0, 0).real();
        const double form = (phi.adjoint() * h0.matrix() * phi)(0, 0).real();
        worst = std::max(worst, lhs - fb.theta1 * form - fb.theta2 * phi.squaredNorm());
    }
    return worst;
}

GroundState e0_lambda0(const ScalarPotential& v, const GridDomain& reference, double theta2, double offset) {
    if (!(offset > 0.0)) throw ValidationError("lambda0 offset must be positive");
    const Hamiltonian h = assemble_hamiltonian(reference, zero_field(reference), v);
    const double e0 = h.eigen().values[0];
    return {e0, std::min(-theta2, e0) - offset};
}

XiConstants xi_constants(double s, double a0, double theta1, double theta2) {
    if (!(s > 0.0)) throw ValidationError("s must be positive");
    if (!(a0 >= 0.0)) throw ValidationError("a0 must be nonnegative");
    if (!(theta1 > 0.0 && theta1 < 1.0) && theta1 != 0.0) throw ValidationError("Theta1 must lie in [0, 1)");
    return {2.0 * s / (1.0 - theta1), 2.0 * s * theta2 / (1.0 - theta1) + q_of(s) * a0 * a0};
}

double c_z(std::span<const double> spectrum, Complex z, double lambda0) {
    check_distinct_from_spectrum(spectrum, z);
    double c = 1.0;
    for (double l : spectrum) c = std::max(c, std::abs((l - lambda0) / (l - z)));
    return c;
}

double midpoint_delta(double lambda0, double theta2, double e0) {
    const double m = std::min(-theta2, e0);
    if (!(lambda0 < m)) throw ValidationError("lambda0 < min{-Theta2, E0} violated");
    return 0.5 * (lambda0 + m) / lambda0;
}

double s_upper(double theta1, double cz) { return (1.0 - theta1) / (4.0 * cz); }

A0Window a0_squared_window(Branch b, double s, double lambda0, double theta1, double theta2, double delta,
                           double cz) {
    const double q = q_of(s);
    const double split = 2.0 * s * (lambda0 + theta2) / (theta1 - 1.0) / q;
    if (b == Branch::Condition1) return {0.0, split, false};
    const double upper =
        ((delta - 1.0) * lambda0 / (2.0 * cz) + 2.0 * s * (delta * lambda0 + theta2) / (theta1 - 1.0)) / q;
    return {split, upper, true};
}

double c_star(const AdmissibleParams& p) {
    const double c = p.c_z;
    if (p.branch == Branch::Condition1) return c * (1.0 - p.theta1) / (1.0 - p.theta1 - 4.0 * p.s * c);
    const double num = (p.delta - 1.0) * p.lambda0;
    return num * c / (num - 2.0 * (p.delta * p.lambda0 * p.xi1 + p.xi2) * c);
}

std::optional<std::string> admissibility_violation(const AdmissibleParams& p) {
    constexpr double rel = 1e-12;
    if (!(p.theta1 > 0.0 && p.theta1 < 1.0)) return "Theta1 in (0, 1)";
    if (!(p.theta2 >= 0.0)) return "Theta2 >= 0";
    const double m = std::min(-p.theta2, p.e0);
    if (!(p.lambda0 < m)) return "lambda0 < min{-Theta2, E0}";
    if (!(p.delta > 0.0 && p.delta < 1.0 && p.delta * p.lambda0 > p.lambda0 && p.delta * p.lambda0 < m))
        return "delta lambda0 in (lambda0, min{-Theta2, E0})";
    if (!(p.c_z >= 1.0)) return "c_{z,lambda0} >= 1";
    if (!(p.s > 0.0)) return "s > 0";
    if (!(p.a0 > 0.0)) return "a0 > 0";
    if (!(p.s < s_upper(p.theta1, p.c_z))) return "s < (1-Theta1)/(4 c_{z,lambda0})";
    const auto w = a0_squared_window(p.branch, p.s, p.lambda0, p.theta1, p.theta2, p.delta, p.c_z);
    const double a2 = p.a0 * p.a0;
    if (p.branch == Branch::Condition1) {
        if (!(a2 <= w.upper * (1.0 + rel))) return "a0^2 <= 2s(lambda0+Theta2)/(Theta1-1) (1/(2s)+s/4)^{-1}";
    } else {
        if (!(a2 >= w.lower * (1.0 - rel))) return "a0^2 >= 2s(lambda0+Theta2)/(Theta1-1) (1/(2s)+s/4)^{-1}";
        if (!(a2 < w.upper))
            return "a0^2 < ((delta-1)lambda0/(2c) + 2s(delta lambda0+Theta2)/(Theta1-1)) (1/(2s)+s/4)^{-1}";
    }
    const auto xi = xi_constants(p.s, p.a0, p.theta1, p.theta2);
    if (std::abs(xi.xi1 - p.xi1) > rel * xi.xi1 || std::abs(xi.xi2 - p.xi2) > rel * std::max(xi.xi2, 1e-300))
        return "Xi constants consistent with (s, a0)";
    const double cs = c_star(p);
    if (!(cs > 0.0) || std::abs(cs - p.c_star) > rel * cs) return "C* consistent with its branch formula";
    return std::nullopt;
}

namespace {

AdmissibleParams fill(double theta1, double theta2, double lambda0, double e0, double delta, double cz, double s,
                      double a0, Branch b) {
    AdmissibleParams p;
    p.theta1 = theta1;
    p.theta2 = theta2;
    p.lambda0 = lambda0;
    p.e0 = e0;
    p.delta = delta;
    p.c_z = cz;
    p.s = s;
    p.a0 = a0;
    p.branch = b;
    const auto xi = xi_constants(s, a0, theta1, theta2);
    p.xi1 = xi.xi1;
    p.xi2 = xi.xi2;
    p.c_star = c_star(p);
    return p;
}

}  // namespace

AdmissibleParams admissible_params(std::span<const double> spectrum, Complex z, double lambda0, double theta1,
                                   double theta2, double e0, const AdmissibleRequest& req) {
    if (!(theta1 > 0.0 && theta1 < 1.0)) throw ValidationError("Theta1 must lie in (0, 1)");
    if (!(theta2 >= 0.0)) throw ValidationError("Theta2 must be nonnegative");
    if (!(req.margin > 0.0 && req.margin < 1.0)) throw ValidationError("admissibility margin must lie in (0, 1)");
    if (req.scan_points < 3) throw ValidationError("scan needs at least 3 points");
    const double delta = midpoint_delta(lambda0, theta2, e0);
    const double cz = c_z(spectrum, z, lambda0);

    auto build = [&](Branch b) -> AdmissibleParams {
        if (!req.maximize_a0) return fill(theta1, theta2, lambda0, e0, delta, cz, req.s, req.a0, b);
        const double s_hi = s_upper(theta1, cz) * (1.0 - req.margin);
        auto objective = [&](double s) {
            const auto w = a0_squared_window(b, s, lambda0, theta1, theta2, delta, cz);
            return w.upper_strict ? w.upper - req.margin * (w.upper - w.lower) : w.upper;
        };
        const double s = maximize_log_scan(objective, s_hi * 1e-4, s_hi, req.scan_points);
        const double a2 = objective(s);
        if (!(a2 > 0.0))
            throw InfeasibleError("no admissible a0 for " + branch_name(b) + " (z too close to the spectrum?)");
        return fill(theta1, theta2, lambda0, e0, delta, cz, s, std::sqrt(a2), b);
    };

    AdmissibleParams out;
    if (req.branch) {
        out = build(*req.branch);
    } else {
        const auto p1 = build(Branch::Condition1);
        const auto p2 = build(Branch::Condition2);
        out = p2.a0 > p1.a0 ? p2 : p1;
    }
    if (auto why = admissibility_violation(out)) {
        if (!req.maximize_a0)
            throw InfeasibleError(branch_name(out.branch) + " admissibility condition violated: " + *why);
        throw NumericalError("maximized parameters fail their own check: " + *why);
    }
    return out;
}

AdmissibleParams simplified_params(std::span<const double> spectrum, Complex z, double lambda0, double theta1,
                                   double theta2, double e0) {
    const double delta = midpoint_delta(lambda0, theta2, e0);
    const double cz = c_z(spectrum, z, lambda0);
    const double s = 0.25 * (1.0 - theta1) / (4.0 * cz) * (1.0 - delta) / (2.0 - delta);
    const double a2 = 2.0 * s * (2.0 * lambda0 + theta2) / (theta1 - 1.0) / q_of(s);
    return fill(theta1, theta2, lambda0, e0, delta, cz, s, std::sqrt(a2), Branch::Condition2);
}

std::optional<double> c_z_region_bound(Complex z, double lambda0) {
    const double u = z.real(), v = std::abs(z.imag());
    const double bracket = std::sqrt(1.0 + u * u);
    if (!(v > 0.0 && v < 2.0 * bracket)) return std::nullopt;
    double bound = (5.0 * bracket - lambda0) / v;
    if (v > bracket) bound = std::min(bound, 1.0 - lambda0 + std::sqrt(2.0) * v);
    return bound;
}

CMatrix conjugate(const Hamiltonian& h, std::span<const double> a) {
    const GridDomain& dom = h.domain();
    if (static_cast<int>(a.size()) != dom.dim()) throw ValidationError("conjugation vector needs d components");
    const int n = h.size();
    RVector phase(n);
    for (int k = 0; k < n; ++k) {
        const RVector x = dom.position(k);
        double ax = 0.0;
        for (int j = 0; j < dom.dim(); ++j) ax += a[j] * x[j];
        phase[k] = ax;
    }
    CMatrix out = h.matrix();
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) {
            if (out(r, c) == Complex(0.0)) continue;
            const double e = phase[r] - phase[c];
            if (std::abs(e) > 700.0) throw NumericalError("conjugation weight e^{a.(x-y)} exceeds double range");
            out(r, c) *= std::exp(e);
        }
    return out;
}

BExtraction extract_B(const Hamiltonian& h, std::span<const double> a, double xi1, double xi2) {
    if (!(xi1 > 0.0)) throw ValidationError("Xi1 must be positive");
    const double shift = xi2 / xi1;
    const auto& eig = h.eigen();
    if (!(eig.values[0] + shift > 1e-10))
        throw ValidationError("premise 'H~ = H + Xi2/Xi1 nonnegative' violated (not positive definite)");
    const CMatrix w = spectral_map(eig, [shift](double l) { return Complex(1.0 / std::sqrt(l + shift)); });
    const CMatrix diff = conjugate(h, a) - h.matrix();
    CMatrix b = w * diff * w;
    const double nb = spectral_norm(b);
    return {std::move(b), nb, shift};
}

UVReport verify_uv_inverse(const Hamiltonian& h, std::span<const double> a, Complex z, const AdmissibleParams& p) {
    UVReport rep;
    const auto& eig = h.eigen();
    check_distinct_from_spectrum(std::span<const double>(eig.values.data(), eig.values.size()), z);
    if (!(eig.values[0] > p.lambda0)) throw ValidationError("lambda0 must lie below the spectrum");
    if (auto why = admissibility_violation(p)) {
        rep.premise_message = *why;
    } else {
        rep.premise_ok = true;
    }
    rep.c_star = p.c_star;
    rep.norm_b_bound = 2.0 * p.xi1;

    const auto ext = extract_B(h, a, p.xi1, p.xi2);
    rep.norm_b = ext.norm_b;
    rep.b_bound_ok = ext.norm_b <= 2.0 * p.xi1 + 1e-8;

    const double lam0 = p.lambda0, shift = ext.shift;
    const int n = h.size();
    const CMatrix u = spectral_map(eig, [&](double l) { return (l - z) / (l - lam0); });
    const CMatrix rm = spectral_map(eig, [&](double l) { return Complex(1.0 / std::sqrt(l - lam0)); });
    const CMatrix rp = spectral_map(eig, [&](double l) { return Complex(std::sqrt(l - lam0)); });
    const CMatrix tp = spectral_map(eig, [&](double l) { return Complex(std::sqrt(l + shift)); });
    const CMatrix v = rm * tp * ext.b * tp * rm;
    const CMatrix uv = u + v;

    const CMatrix target = conjugate(h, a) - z * CMatrix::Identity(n, n);
    rep.factorization_residual = spectral_norm(rp * uv * rp - target) / spectral_norm(target);
    rep.residual_ok = rep.factorization_residual <= 1e-8;

    double uinv = 0.0;
    for (Eigen::Index k = 0; k < eig.values.size(); ++k)
        uinv = std::max(uinv, std::abs((eig.values[k] - lam0) / (eig.values[k] - z)));
    rep.u_inverse_norm = uinv;
    rep.v_norm = spectral_norm(v);

    const RVector sv = singular_values(uv);
    rep.invertible = sv[sv.size() - 1] > 1e-13 * sv[0];
    if (rep.invertible) {
        const CMatrix inv = uv.partialPivLu().inverse();
        rep.inverse_norm = spectral_norm(inv);
        rep.inverse_bound_ok = rep.inverse_norm <= p.c_star * (1.0 + 1e-6);
    } else {
        rep.inverse_norm = kInf;
    }
    return rep;
}

DecayFit fit_exponential(std::span<const std::pair<double, double>> points, double floor, double min_distance,
                         double max_distance) {
    DecayFit fit;
    std::vector<double> xs, ys;
    for (const auto& [r, v] : points) {
        if (r < min_distance || r > max_distance) continue;
        if (!(v > floor)) {
            ++fit.censored;
            continue;
        }
        xs.push_back(r);
        ys.push_back(std::log(v));
    }
    fit.samples = static_cast<int>(xs.size());
    if (fit.samples < 3) return fit;
    const double n = fit.samples;
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0.0) return fit;  // all points at one distance
    const double slope = sxy / sxx;
    fit.rate = -slope;
    fit.log_prefactor = my - slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (fit.log_prefactor + slope * xs[i]);
        ssr += e * e;
    }
    fit.r2 = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
    fit.valid = true;
    return fit;
}

LatticeSum exponential_lattice_sum(double kappa, int d, int radius) {
    if (!(kappa > 0.0)) throw ValidationError("lattice sum needs a positive decay rate");
    if (radius < 0) throw ValidationError("radius must be nonnegative");
    // Nonnegative orthant with multiplicity 2^{#nonzero}.
    double total = 0.0;
    std::vector<int> alpha(d, 0);
    while (true) {
        double r2 = 0.0;
        int nonzero = 0;
        for (int v : alpha) {
            r2 += double(v) * v;
            nonzero += v != 0;
        }
        total += std::ldexp(std::exp(-kappa * std::sqrt(r2)), nonzero);
        int j = 0;
        while (j < d && ++alpha[j] > radius) {
            alpha[j] = 0;
            ++j;
        }
        if (j == d) break;
    }
    return {total, shell_tail(kappa, d, radius), radius};
}

LatticeSum convolution_constant(double a0, double delta0, int d) {
    if (!(a0 > 0.0)) throw ValidationError("a0 must be positive");
    if (!(delta0 > 0.0 && delta0 < 1.0)) throw ValidationError("delta0 must lie in (0, 1)");
    const double kappa = (1.0 - delta0) * a0;
    int radius = std::max(8, static_cast<int>(std::ceil(4.0 / kappa)));
    while (true) {
        if (std::pow(radius + 1.0, d) > 5e7)
            throw ValidationError("radius too small: lattice-sum tail exceeds 1% within the work limit");
        auto s = exponential_lattice_sum(kappa, d, radius);
        if (s.tail <= 0.01 * s.truncated) return s;
        radius *= 2;
    }
}

ConvolutionReport convolution_sum_check(double a0, double delta0, int d, int radius,
                                        const std::vector<CubePair>& pairs) {
    if (radius < 1) throw ValidationError("radius must be positive");
    ConvolutionReport rep{};
    const auto c = convolution_constant(a0, delta0, d);
    rep.c_delta = c.truncated;
    rep.c_tail = c.tail;
    rep.c_radius = c.radius;
    const double lhs_tail_unit = shell_tail(2.0 * a0, d, radius);
    rep.pairs.resize(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        const auto& pr = pairs[i];
        if (static_cast<int>(pr.beta.size()) != d || static_cast<int>(pr.gamma.size()) != d)
            throw ValidationError("pair dimension does not match d");
        double lhs = 0.0;
        std::vector<int> db(d), dg(d);
        for_each_in_cube(d, radius, [&](const std::vector<int>& alpha) {
            for (int j = 0; j < d; ++j) {
                db[j] = pr.beta[j] - alpha[j];
                dg[j] = alpha[j] - pr.gamma[j];
            }
            lhs += std::exp(-a0 * (norm2(db) + norm2(dg)));
        });
        ConvolutionPair out{pr.beta, pr.gamma, lhs, 0.0, 0.0, 0.0};
        out.lhs_tail = std::exp(a0 * (norm2(pr.beta) + norm2(pr.gamma))) * lhs_tail_unit;
        if (out.lhs_tail > 0.01 * lhs) throw ValidationError("radius too small: convolution tail exceeds 1% of the sum");
        out.rhs = rep.c_delta * std::exp(-delta0 * a0 * cube_distance(pr.beta, pr.gamma));
        out.slack = out.rhs - (out.lhs + out.lhs_tail);
        rep.pairs[i] = std::move(out);
    });
    rep.min_slack = kInf;
    for (const auto& pr : rep.pairs) rep.min_slack = std::min(rep.min_slack, pr.slack);
    rep.holds = rep.min_slack >= 0.0;
    return rep;
}

std::vector<CubePair> random_cube_pairs(int d, int count, double max_distance, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pos(-10, 10);
    const int span = static_cast<int>(std::floor(max_distance));
    std::uniform_int_distribution<int> off(-span, span);
    std::vector<CubePair> out;
    while (static_cast<int>(out.size()) < count) {
        CubePair p{std::vector<int>(d), std::vector<int>(d)};
        for (int j = 0; j < d; ++j) {
            p.beta[j] = pos(rng);
            p.gamma[j] = p.beta[j] + off(rng);
        }
        if (cube_distance(p.beta, p.gamma) <= max_distance) out.push_back(std::move(p));
    }
    return out;
}

std::vector<CubePair> all_cube_pairs(const GridDomain& dom, double max_distance) {
    const auto cubes = covering_cubes(dom);
    std::vector<CubePair> out;
    for (const auto& b : cubes)
        for (const auto& g : cubes)
            if (cube_distance(b, g) <= max_distance) out.push_back({b, g});
    return out;
}

std::vector<CubePair> reference_pairs(const GridDomain& dom, const std::vector<std::vector<int>>& refs,
                                      double max_distance) {
    const auto cubes = covering_cubes(dom);
    std::vector<CubePair> out;
    for (const auto& b : refs)
        for (const auto& g : cubes)
            if (cube_distance(b, g) <= max_distance) out.push_back({b, g});
    return out;
}

CMatrix resolvent_power(const Hamiltonian& h, Complex z, int n) {
    if (n < 1) throw ValidationError("resolvent power n must be >= 1");
    const auto& eig = h.eigen();
    check_distinct_from_spectrum(std::span<const double>(eig.values.data(), eig.values.size()), z);
    return spectral_map(eig, [&](double l) { return std::pow(1.0 / (l - z), n); });
}

CtDecayResult ct_decay_experiment(const Hamiltonian& h, Complex z, int n, double p,
                                  const std::vector<CubePair>& pairs, const AdmissibleParams& params,
                                  const CtDecayOptions& opt) {
    const GridDomain& dom = h.domain();
    const int d = dom.dim();
    if (n < 1) throw ValidationError("resolvent power n must be >= 1");
    if (!(p > d / (2.0 * n))) throw ValidationError("p > d/(2n) violated");
    const double delta0 = n == 1 ? 1.0 : opt.delta0;
    if (n > 1 && !(delta0 > 0.0 && delta0 < 1.0)) throw ValidationError("delta0 must lie in (0, 1)");
    if (auto why = admissibility_violation(params)) throw InfeasibleError("admissibility condition violated: " + *why);

    CtDecayResult res;
    const double a0 = params.a0;
    const CMatrix r = resolvent_power(h, z, n);
    res.norms = block_norms(r, dom, pairs, p, n);

    std::vector<std::pair<double, double>> pts;
    for (const auto& b : res.norms) pts.emplace_back(b.distance, b.value);
    res.fit = fit_exponential(pts, opt.floor, opt.fit_min_distance, opt.fit_max_distance);
    res.expected_rate = delta0 * a0;
    res.rate_ok = res.fit.valid && res.fit.rate >= (1.0 - opt.fit_slack) * res.expected_rate;

    res.predicted.resize(res.norms.size());
    if (n == 1) {
        const double base0 = params.c_star * std::exp(std::sqrt(double(d)) * a0);
        double calib = 0.0, all = 0.0;
        bool any = false;
        for (const auto& b : res.norms) {
            const double ratio = b.value / (base0 * std::exp(-a0 * b.distance));
            all = std::max(all, ratio);
            if (b.distance < opt.calibration_distance) {
                calib = std::max(calib, ratio);
                any = true;
            }
        }
        if (!any) throw ValidationError("prefactor calibration needs a pair closer than the calibration distance");
        res.prefactor = calib;
        res.prefactor_min = all;
        for (std::size_t i = 0; i < res.norms.size(); ++i)
            res.predicted[i] = calib * base0 * std::exp(-a0 * res.norms[i].distance);
    } else {
        // One-step constant K in J_{np} over every pair of covering cubes.
        const auto cubes = covering_cubes(dom);
        const std::size_t nc = cubes.size();
        const CMatrix r1 = resolvent_power(h, z, 1);
        std::vector<double> table(nc * nc);
        parallel_for(nc * nc, [&](std::size_t idx) {
            const auto& x = cubes[idx / nc];
            const auto& y = cubes[idx % nc];
            table[idx] = schatten_norm(block(r1, dom, x, y), n * p);
        });
        double k = 0.0;
        for (std::size_t idx = 0; idx < nc * nc; ++idx)
            k = std::max(k, table[idx] * std::exp(a0 * cube_distance(cubes[idx / nc], cubes[idx % nc])));
        const auto c = convolution_constant(a0, delta0, d);
        res.c_delta = c.truncated + c.tail;
        res.prefactor = k;
        double all = 0.0;
        for (std::size_t i = 0; i < res.norms.size(); ++i) {
            const double shape = std::pow(res.c_delta, n - 1) * std::exp(-delta0 * a0 * res.norms[i].distance);
            res.predicted[i] = std::pow(k, n) * shape;
            all = std::max(all, res.norms[i].value / shape);
        }
        res.prefactor_min = all;

        if (n == 2) {
            std::map<std::vector<int>, std::size_t> index;
            for (std::size_t i = 0; i < nc; ++i) index[cubes[i]] = i;
            for (const auto& b : res.norms) {
                const auto ib = index.find(b.beta), ig = index.find(b.gamma);
                if (ib == index.end() || ig == index.end()) continue;  // block is empty
                double chain = 0.0;
                for (std::size_t a = 0; a < nc; ++a) chain += table[ib->second * nc + a] * table[a * nc + ig->second];
                if (chain > 0.0) res.worst_chain_ratio = std::max(res.worst_chain_ratio, b.value / chain);
                if (b.value > chain * (1.0 + 1e-10) + 1e-14) res.chain_ok = false;
            }
        }
    }
    for (std::size_t i = 0; i < res.norms.size(); ++i)
        if (res.norms[i].value > res.predicted[i] * (1.0 + 1e-9)) ++res.bound_violations;
    res.bound_ok = res.bound_violations == 0;
    return res;
}

HilbertSchmidtCheck hilbert_schmidt_product_check(const Hamiltonian& h, const CVector& g, double lambda0) {
    const GridDomain& dom = h.domain();
    if (g.size() != h.size()) throw ValidationError("g must have one value per interior site");
    const auto& eig = h.eigen();
    if (!(eig.values[0] > lambda0)) throw ValidationError("lambda0 must lie below the spectrum");
    const CMatrix f = spectral_map(eig, [lambda0](double l) { return Complex(1.0 / (l - lambda0)); });
    HilbertSchmidtCheck out;
    out.lhs = schatten_norm(g.asDiagonal() * f, 2.0);
    out.rhs = weighted_lp_norm(g, 2.0, dom.spacing(), dom.dim()) * kernel_row_norm(f, dom.spacing(), dom.dim());
    out.holds = out.lhs <= out.rhs + 1e-10;
    return out;
}

double trace_ideal_ratio(const Hamiltonian& h, const CVector& g, double lambda0, double alpha, double p) {
    const GridDomain& dom = h.domain();
    if (g.size() != h.size()) throw ValidationError("g must have one value per interior site");
    const auto& eig = h.eigen();
    if (!(eig.values[0] > lambda0)) throw ValidationError("lambda0 must lie below the spectrum");
    const CMatrix f = spectral_map(eig, [&](double l) { return Complex(std::pow(l - lambda0, -alpha)); });
    const double gp = weighted_lp_norm(g, p, dom.spacing(), dom.dim());
    return gp > 0.0 ? schatten_norm(g.asDiagonal() * f, p) / gp : 0.0;
}

}  // namespace ctlab
