#include "ctlab/fk.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "ctlab/parallel.hpp"
#include "ctlab/schatten.hpp"

namespace ctlab {

namespace {

constexpr int kChunk = 1024;

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent stream per (seed, start site, path) so results do not depend
// on how paths are scheduled.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix(splitmix(seed ^ splitmix(stream)) + index);
}

// Fills `out` with steps + 1 positions; returns the exit step.
int generate_path(std::span<const double> x0, int steps, double dt, std::uint64_t seed, const GridDomain& dom,
                  std::span<double> out, bool stop_at_exit) {
    const int d = dom.dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    std::copy(x0.begin(), x0.end(), out.begin());
    if (!dom.contains(x0)) return 0;
    for (int j = 1; j <= steps; ++j) {
        double* cur = out.data() + j * d;
        const double* prev = cur - d;
        for (int k = 0; k < d; ++k) cur[k] = prev[k] + normal(rng);
        if (!dom.contains(std::span<const double>(cur, d))) {
            if (stop_at_exit) return j;
            // Keep generating so stored ensembles hold full paths.
            for (int jj = j + 1; jj <= steps; ++jj)
                for (int k = 0; k < d; ++k) out[jj * d + k] = out[(jj - 1) * d + k] + normal(rng);
            return j;
        }
    }
    return steps + 1;
}

void check_mc(double t, double dt, int count) {
    if (!(t > 0.0)) throw ValidationError("t must be > 0");
    if (!(dt > 0.0) || dt > t * (1.0 + 1e-12)) throw ValidationError("dt must satisfy 0 < dt <= t");
    if (count < 1) throw ValidationError("path count must be >= 1");
}

bool needs_field(const VectorPotential& a) { return a.kind() != FieldKind::Zero; }
bool needs_potential(const ScalarPotential& v) { return v.kind() != "zero"; }

void check_continuum(const VectorPotential& a, const ScalarPotential& v) {
    if (needs_field(a) && !a.continuum())
        throw ValidationError("the path integral needs a continuum vector potential; this field is lattice-only");
    if (needs_potential(v) && !v.continuum())
        throw ValidationError("the path integral needs a continuum potential; kind '" + v.kind() + "' is lattice-only");
}

}  // namespace

int step_count(double t, double dt) { return std::max(1, static_cast<int>(std::lround(t / dt))); }

PathEnsemble sample_paths(std::span<const double> x0, double t, double dt, int count, std::uint64_t seed,
                          const GridDomain& dom) {
    check_mc(t, dt, count);
    if (static_cast<int>(x0.size()) != dom.dim()) throw ValidationError("start point has the wrong dimension");
    PathEnsemble e;
    e.count = count;
    e.dim = dom.dim();
    e.steps = step_count(t, dt);
    e.t = t;
    e.dt = t / e.steps;
    e.seed = seed;
    const std::size_t stride = static_cast<std::size_t>(e.steps + 1) * e.dim;
    e.positions.assign(stride * count, 0.0);
    e.exit_step.assign(count, 0);
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t p) {
        e.exit_step[p] = generate_path(x0, e.steps, e.dt, path_seed(seed, 0, p), dom,
                                       std::span<double>(e.positions.data() + p * stride, stride), false);
    });
    return e;
}

Complex fk_action(std::span<const double> path, int dim, double dt, const VectorPotential& a,
                  const ScalarPotential& v) {
    check_continuum(a, v);
    const int steps = static_cast<int>(path.size()) / dim - 1;
    const bool with_a = needs_field(a), with_v = needs_potential(v);
    std::array<double, 8> mid{}, av{};
    double ito = 0.0, div = 0.0, pot = 0.0;
    for (int j = 0; j < steps; ++j) {
        const double* x = path.data() + j * dim;
        const double* y = x + dim;
        for (int k = 0; k < dim; ++k) mid[k] = 0.5 * (x[k] + y[k]);
        const std::span<const double> m(mid.data(), dim);
        if (with_a) {
            a.continuum()->value(std::span<const double>(x, dim), std::span<double>(av.data(), dim));
            for (int k = 0; k < dim; ++k) ito += av[k] * (y[k] - x[k]);
            div += a.continuum()->divergence(m);
        }
        if (with_v) pot += v.continuum()(m);
    }
    return Complex(pot * dt, ito + 0.5 * div * dt);
}

Complex interpolate_sites(const GridDomain& dom, const CVector& values, std::span<const double> x) {
    const int d = dom.dim();
    const double h = dom.spacing();
    std::array<int, 8> base{};
    std::array<double, 8> frac{};
    for (int j = 0; j < d; ++j) {
        const double u = (x[j] + 0.5) / h - 0.5;
        base[j] = static_cast<int>(std::floor(u));
        frac[j] = u - base[j];
    }
    Complex acc = 0.0;
    std::array<int, 8> idx{};
    for (int c = 0; c < (1 << d); ++c) {
        double w = 1.0;
        bool inside = true;
        for (int j = 0; j < d; ++j) {
            const int bit = (c >> j) & 1;
            idx[j] = base[j] + bit;
            w *= bit ? frac[j] : 1.0 - frac[j];
            if (idx[j] < 0 || idx[j] >= dom.extents()[j]) inside = false;
        }
        if (!inside || w == 0.0) continue;
        const int k = dom.interior_index(dom.box_index(std::span<const int>(idx.data(), d)));
        if (k >= 0) acc += w * values[k];
    }
    return acc;
}

FkEstimate fk_semigroup_apply(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v, double t,
                              const PhiFunction& phi, const McSpec& mc, std::vector<int> sites) {
    check_mc(t, mc.dt, mc.count);
    check_continuum(a, v);
    if (sites.empty()) {
        sites.resize(dom.interior_count());
        for (int k = 0; k < dom.interior_count(); ++k) sites[k] = k;
    }
    for (int s : sites)
        if (s < 0 || s >= dom.interior_count()) throw ValidationError("site index out of range");

    const int steps = step_count(t, mc.dt);
    const double dt = t / steps;
    const int d = dom.dim();
    const std::size_t chunks = (mc.count + kChunk - 1) / kChunk;
    std::vector<Complex> sum(sites.size() * chunks);
    std::vector<double> sum_sq(sites.size() * chunks);

    parallel_for(sites.size() * chunks, [&](std::size_t item) {
        const std::size_t si = item / chunks, ci = item % chunks;
        const int site = sites[si];
        const RVector x0 = dom.position(site);
        std::vector<double> buf(static_cast<std::size_t>(steps + 1) * d);
        Complex s = 0.0;
        double s2 = 0.0;
        const int lo = static_cast<int>(ci) * kChunk, hi = std::min(mc.count, lo + kChunk);
        for (int p = lo; p < hi; ++p) {
            const int exit = generate_path(std::span<const double>(x0.data(), d), steps, dt,
                                           path_seed(mc.seed, dom.box_index(site) + 1, p), dom, buf, true);
            if (exit <= steps) continue;
            const Complex action = fk_action(buf, d, dt, a, v);
            const Complex val = std::exp(-action) * phi(std::span<const double>(buf.data() + steps * d, d));
            s += val;
            s2 += std::norm(val);
        }
        sum[item] = s;
        sum_sq[item] = s2;
    });

    FkEstimate out;
    out.sites = sites;
    out.estimate.resize(sites.size());
    out.std_error.resize(sites.size());
    const double n = mc.count;
    for (std::size_t si = 0; si < sites.size(); ++si) {
        Complex s = 0.0;
        double s2 = 0.0;
        for (std::size_t ci = 0; ci < chunks; ++ci) {
            s += sum[si * chunks + ci];
            s2 += sum_sq[si * chunks + ci];
        }
        const Complex mean = s / n;
        const double var = mc.count > 1 ? std::max(0.0, (s2 - n * std::norm(mean)) / (n - 1.0)) : 0.0;
        out.estimate[si] = mean;
        out.std_error[si] = std::sqrt(var / n);
    }
    return out;
}

FkEstimate fk_semigroup_apply(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v, double t,
                              const CVector& phi, const McSpec& mc, std::vector<int> sites) {
    if (phi.size() != dom.interior_count()) throw ValidationError("phi needs one value per interior site");
    return fk_semigroup_apply(
        dom, a, v, t, [&](std::span<const double> x) { return interpolate_sites(dom, phi, x); }, mc,
        std::move(sites));
}

CMatrix heat_matrix(const Hamiltonian& h, double t) {
    return apply_function_exact(h, [t](double x) { return Complex(std::exp(-t * x)); });
}

CVector heat_action(const Hamiltonian& h, double t, const CVector& phi) {
    const auto& eig = h.eigen();
    const CVector coef = eig.vectors.adjoint() * phi;
    return eig.vectors * (coef.array() * (-t * eig.values.array()).exp().cast<Complex>()).matrix();
}

CVector free_box_heat_action(const GridDomain& dom, double t, const CVector& phi) {
    if (dom.interior_count() != dom.box_size())
        throw ValidationError("the axis-by-axis heat action needs a full box without mask");
    if (phi.size() != dom.box_size()) throw ValidationError("phi needs one value per site");
    const double h = dom.spacing();
    CVector cur = phi;
    int stride = 1;
    for (int axis = 0; axis < dom.dim(); ++axis) {
        const int n = dom.extents()[axis];
        RMatrix m = RMatrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            m(i, i) = 1.0 / (h * h);
            if (i + 1 < n) m(i, i + 1) = m(i + 1, i) = -0.5 / (h * h);
        }
        Eigen::SelfAdjointEigenSolver<RMatrix> es(m);
        const RMatrix prop = es.eigenvectors() * (-t * es.eigenvalues().array()).exp().matrix().asDiagonal() *
                             es.eigenvectors().transpose();
        CVector next = CVector::Zero(cur.size());
        const int block = stride * n;
        for (int outer = 0; outer < cur.size(); outer += block)
            for (int inner = 0; inner < stride; ++inner)
                for (int i = 0; i < n; ++i) {
                    Complex acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += prop(i, j) * cur[outer + j * stride + inner];
                    next[outer + i * stride + inner] = acc;
                }
        cur = std::move(next);
        stride = block;
    }
    return cur;
}

std::vector<CVector> random_vectors(int n, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<CVector> out(count, CVector(n));
    for (auto& v : out)
        for (int i = 0; i < n; ++i) v[i] = Complex(g(rng), g(rng));
    return out;
}

DiamagneticReport diamagnetic_check(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v,
                                    double t, const std::vector<CVector>& phis, double tol) {
    if (!(t > 0.0)) throw ValidationError("t must be > 0");
    const auto ha = assemble_hamiltonian(dom, a, v);
    const auto h0 = assemble_hamiltonian(dom, zero_field(dom), v);
    DiamagneticReport rep;
    rep.worst_excess = -kInf;
    for (const auto& phi : phis) {
        if (phi.size() != dom.interior_count()) throw ValidationError("phi needs one value per interior site");
        ++rep.trials;
        const RVector lhs = heat_action(ha, t, phi).cwiseAbs();
        const RVector rhs = heat_action(h0, t, phi.cwiseAbs().cast<Complex>()).real();
        for (Eigen::Index i = 0; i < lhs.size(); ++i) {
            const double excess = lhs[i] - rhs[i];
            rep.worst_excess = std::max(rep.worst_excess, excess);
            rep.max_gap = std::max(rep.max_gap, -excess);
            if (excess > tol) ++rep.violations;
        }
    }
    return rep;
}

MonotonicityReport monotonicity_check(const GridDomain& inner, const GridDomain& outer, const ScalarPotential& v,
                                      double t, const RVector& phi_box, double tol) {
    if (!(t > 0.0)) throw ValidationError("t must be > 0");
    if (inner.dim() != outer.dim() || inner.extents() != outer.extents() || inner.spacing() != outer.spacing())
        throw ValidationError("monotonicity needs both domains on the same box and spacing");
    for (int s = 0; s < outer.box_size(); ++s)
        if (inner.mask()[s] && !outer.mask()[s]) throw ValidationError("domains are not nested");
    if (phi_box.size() != outer.box_size()) throw ValidationError("phi needs one value per box site");
    if ((phi_box.array() < 0.0).any()) throw ValidationError("monotonicity needs phi >= 0");

    auto restricted = [&](const GridDomain& dom) {
        CVector out(dom.interior_count());
        for (int k = 0; k < dom.interior_count(); ++k) out[k] = phi_box[dom.box_index(k)];
        return out;
    };
    const auto hi = assemble_hamiltonian(inner, zero_field(inner), v);
    const auto ho = assemble_hamiltonian(outer, zero_field(outer), v);
    const CVector ui = heat_action(hi, t, restricted(inner));
    const CVector uo = heat_action(ho, t, restricted(outer));

    MonotonicityReport rep;
    rep.worst_excess = -kInf;
    for (int k = 0; k < outer.interior_count(); ++k) {
        const int s = outer.box_index(k);
        const int ki = inner.interior_index(s);
        const double a = ki >= 0 ? ui[ki].real() : 0.0;
        const double excess = a - uo[k].real();
        rep.worst_excess = std::max(rep.worst_excess, excess);
        rep.max_gap = std::max(rep.max_gap, -excess);
        if (excess > tol) ++rep.violations;
    }
    return rep;
}

SmoothingReport smoothing_check(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v,
                                const std::vector<double>& t_grid, double p, double q, double tol) {
    if (t_grid.empty()) throw ValidationError("t_grid must not be empty");
    for (double t : t_grid)
        if (!(t > 0.0)) throw ValidationError("t_grid entries must be > 0");
    const auto ha = assemble_hamiltonian(dom, a, v);
    const auto h0 = assemble_hamiltonian(dom, zero_field(dom), v);
    const int d = dom.dim();
    const double h = dom.spacing();
    // Fails early for pairs that are not exactly computable.
    mixed_norm(CMatrix::Identity(1, 1), p, q, h, d);

    SmoothingReport rep;
    rep.p = p;
    rep.q = q;
    rep.gamma = 0.5 * d * ((std::isinf(p) ? 0.0 : 1.0 / p) - (std::isinf(q) ? 0.0 : 1.0 / q));
    rep.e0 = h0.eigen().values[0];
    rep.chain_ok = true;
    std::vector<double> at;
    for (double t : t_grid) {
        SmoothingRow row{t, mixed_norm(heat_matrix(ha, t), p, q, h, d), mixed_norm(heat_matrix(h0, t), p, q, h, d),
                         0.0};
        if (row.norm_av > row.norm_0v + tol) rep.chain_ok = false;
        at.push_back(std::log(row.norm_0v) + rep.gamma * std::log(t));
        rep.rows.push_back(row);
    }

    // log C(E) = max_t (a_t - E t) makes sum_t log(envelope) convex and
    // piecewise linear in E, so its minimum sits at a pairwise slope.
    const std::size_t n = t_grid.size();
    double tsum = 0.0;
    for (double t : t_grid) tsum += t;
    auto log_c = [&](double e) {
        double m = -kInf;
        for (std::size_t i = 0; i < n; ++i) m = std::max(m, at[i] - e * t_grid[i]);
        return m;
    };
    auto objective = [&](double e) { return n * log_c(e) + e * tsum; };
    double best_e = 0.0, best = objective(0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (t_grid[i] == t_grid[j]) continue;
            const double e = (at[j] - at[i]) / (t_grid[j] - t_grid[i]);
            const double val = objective(e);
            if (val < best) {
                best = val;
                best_e = e;
            }
        }
    rep.e = best_e;
    // Relative slack of a few ulps keeps the touching points on the right side.
    rep.c = std::exp(log_c(best_e)) * (1.0 + 1e-13);
    rep.envelope_ok = true;
    for (auto& row : rep.rows) {
        row.envelope = rep.c * std::pow(row.t, -rep.gamma) * std::exp(rep.e * row.t);
        if (row.norm_0v > row.envelope) rep.envelope_ok = false;
    }
    rep.e_ok = -rep.e < rep.e0;
    return rep;
}

}  // namespace ctlab
