#include "ctlab/hscalc.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "ctlab/parallel.hpp"

namespace ctlab {

namespace {

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

CutoffValue cutoff_tau(double u) {
    const double a = std::abs(u);
    if (a <= 1.0) return {1.0, 0.0, 0.0};
    if (a >= 2.0) return {0.0, 0.0, 0.0};
    const double t = a - 1.0, s = 1.0 - t;
    const double x = 1.0 / t - 1.0 / s;
    if (x > 700.0) return {1.0, 0.0, 0.0};
    if (x < -700.0) return {0.0, 0.0, 0.0};
    const double l = logistic(x);
    const double l1 = l * logistic(-x);
    const double l2 = l1 * (1.0 - 2.0 * l);
    const double x1 = -1.0 / (t * t) - 1.0 / (s * s);
    const double x2 = 2.0 / (t * t * t) - 2.0 / (s * s * s);
    const double sign = u < 0.0 ? -1.0 : 1.0;
    return {l, sign * l1 * x1, l2 * x1 * x1 + l1 * x2};
}

void validate(const ExtensionParams& p, const SmoothFunction& f) {
    if (p.n < 1) throw ValidationError("extension order n must be >= 1 (got " + std::to_string(p.n) + ")");
    if (!(p.tolerance > 0.0)) throw ValidationError("quadrature tolerance must be > 0");
    if (p.tau != kCutoffName) throw ValidationError("unknown cutoff '" + p.tau + "' (available: " + kCutoffName + ")");
    if (p.u_truncation < 0.0) throw ValidationError("u_truncation must be >= 0");
    if (p.panel_budget < 1) throw ValidationError("panel_budget must be >= 1");
    if (p.n + 1 > f.r_max())
        throw ValidationError("extension order n = " + std::to_string(p.n) + " needs derivatives up to " +
                              std::to_string(p.n + 1) + " but '" + f.tag() + "' has r_max " +
                              std::to_string(f.r_max()));
}

namespace {

void check_order(const SmoothFunction& f, int n) {
    if (n < 1) throw ValidationError("extension order n must be >= 1");
    if (n + 1 > f.r_max())
        throw ValidationError("insufficient derivative order: n + 1 = " + std::to_string(n + 1) + " > r_max " +
                              std::to_string(f.r_max()) + " of '" + f.tag() + "'");
}

// Taylor part sum_{r<=n} d[r] (iv)^r / r!.
Complex taylor(std::span<const double> d, int n, double v) {
    Complex acc = 0.0, pw = 1.0;
    for (int r = 0; r <= n; ++r) {
        acc += d[r] * pw;
        pw *= Complex(0.0, v) / static_cast<double>(r + 1);
    }
    return acc;
}

// (iv)^n / n!.
Complex ivn_over_fact(int n, double v) {
    Complex pw = 1.0;
    for (int r = 1; r <= n; ++r) pw *= Complex(0.0, v) / static_cast<double>(r);
    return pw;
}

Complex dbar_from(std::span<const double> d, int n, double u, double v) {
    const double ju = japanese(u);
    if (std::abs(v) >= 2.0 * ju) return 0.0;
    const auto tau = cutoff_tau(v / ju);
    const double su = -tau.d1 * v * u / (ju * ju * ju);
    const double sv = tau.d1 / ju;
    Complex out = tau.value * d[n + 1] * ivn_over_fact(n, v);
    if (su != 0.0 || sv != 0.0) out += taylor(d, n, v) * Complex(su, sv);
    return 0.5 * out;
}

}  // namespace

Complex extension_value(const SmoothFunction& f, int n, double u, double v) {
    if (n < 0 || n > f.r_max()) throw ValidationError("extension order out of range");
    std::vector<double> d(n + 1);
    f.derivatives(u, d);
    return cutoff_tau(v / japanese(u)).value * taylor(d, n, v);
}

Complex extension_dbar(const SmoothFunction& f, int n, double u, double v) {
    check_order(f, n);
    std::vector<double> d(n + 2);
    f.derivatives(u, d);
    return dbar_from(d, n, u, v);
}

std::vector<DbarSample> dbar_samples(int count, double u_max, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<DbarSample> out;
    out.reserve(count);
    while (static_cast<int>(out.size()) < count) {
        const double u = u_max * unif(rng);
        const double v = 2.0 * japanese(u) * unif(rng);
        if (v != 0.0) out.push_back({u, v});
    }
    return out;
}

DbarBoundReport dbar_bound_check(const SmoothFunction& f, int n, const std::vector<DbarSample>& samples) {
    check_order(f, n);
    DbarBoundReport rep;
    rep.samples = static_cast<int>(samples.size());
    std::vector<double> d(n + 2);
    double nfact = 1.0;
    for (int r = 2; r <= n; ++r) nfact *= r;
    for (const auto& s : samples) {
        f.derivatives(s.u, d);
        const double ju = japanese(s.u), av = std::abs(s.v);
        const double lhs = std::abs(dbar_from(d, n, s.u, s.v));
        const bool in_v = av > 0.0 && av < 2.0 * ju;
        const bool in_u = av > ju && av < 2.0 * ju;
        const double second = in_v ? std::abs(d[n + 1]) * std::pow(av, n) / (2.0 * nfact) : 0.0;
        if (in_u) {
            ++rep.in_u;
            double first = 0.0, fact = 1.0;
            for (int r = 0; r <= n; ++r) {
                if (r > 0) fact *= r;
                first += std::abs(d[r]) * std::pow(av, r) / fact;
            }
            first /= ju;
            if (lhs > second) {
                if (first > 0.0)
                    rep.c = std::max(rep.c, (lhs - second) / first);
                else
                    rep.c = kInf;
            }
        } else {
            if (in_v) ++rep.outside_u;
            if (lhs > 0.0) {
                const double ratio = second > 0.0 ? lhs / second : kInf;
                rep.worst_outside_ratio = std::max(rep.worst_outside_ratio, ratio);
                if (ratio > 1.0 + 1e-12) rep.outside_ok = false;
            }
        }
    }
    rep.finite = std::isfinite(rep.c);
    return rep;
}

double auto_truncation(const SmoothFunction& f, int n) {
    check_order(f, n);
    std::vector<double> d(n + 2);
    auto crit = [&](double u) {
        f.derivatives(u, d);
        double m = 0.0;
        for (double x : d) m = std::max(m, std::abs(x));
        return std::pow(japanese(u), n + 2) * m;
    };
    constexpr double kStep = 0.125, kLimit = 1e4;
    double last_fail = 0.0;
    for (double sign : {1.0, -1.0}) {
        double fail = 0.0;
        for (double u = 0.0; u <= 2.0 * fail + 10.0; u += kStep) {
            if (u > kLimit)
                throw NumericalError("f (" + f.tag() + ") decays too slowly to truncate the u range below " +
                                     std::to_string(kLimit));
            if (!(crit(sign * u) < 1e-14)) fail = u;
        }
        last_fail = std::max(last_fail, fail);
    }
    return last_fail + kStep;
}

namespace {

struct Rule {
    std::vector<double> x;  // on [-1, 1]
    std::vector<double> w;
};

template <unsigned N>
Rule make_rule() {
    using G = boost::math::quadrature::gauss<double, N>;
    Rule r;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) {
            r.x.push_back(0.0);
            r.w.push_back(w[i]);
            continue;
        }
        r.x.push_back(a[i]);
        r.w.push_back(w[i]);
        r.x.push_back(-a[i]);
        r.w.push_back(w[i]);
    }
    return r;
}

const Rule& rule8() {
    static const Rule r = make_rule<8>();
    return r;
}
const Rule& rule6() {
    static const Rule r = make_rule<6>();
    return r;
}

struct Rect {
    double u0, u1, t0, t1;
    Complex value;
    double error;
};

// Integrand in (u, t) with v = 2<u> t, including the Jacobian and 1/pi.
class Integrand {
public:
    Integrand(const SmoothFunction& f, int n, double lambda) : f_(f), n_(n), lambda_(lambda), d_(n + 2) {}

    Complex operator()(double u, double t) {
        const double ju = japanese(u);
        const double v = 2.0 * ju * t;
        if (u != cached_u_) {
            f_.derivatives(u, d_);
            cached_u_ = u;
        }
        const Complex db = dbar_from(d_, n_, u, v);
        if (db == 0.0) return 0.0;
        return db / Complex(lambda_ - u, -v) * (2.0 * ju / std::numbers::pi);
    }

private:
    const SmoothFunction& f_;
    int n_;
    double lambda_;
    std::vector<double> d_;
    double cached_u_ = std::numeric_limits<double>::quiet_NaN();
};

Complex tensor(Integrand& g, const Rule& r, double u0, double u1, double t0, double t1) {
    const double hu = 0.5 * (u1 - u0), cu = 0.5 * (u1 + u0);
    const double ht = 0.5 * (t1 - t0), ct = 0.5 * (t1 + t0);
    Complex acc = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        const double u = cu + hu * r.x[i];
        Complex row = 0.0;
        for (std::size_t j = 0; j < r.x.size(); ++j) row += r.w[j] * g(u, ct + ht * r.x[j]);
        acc += r.w[i] * row;
    }
    return acc * (hu * ht);
}

void evaluate(Integrand& g, Rect& r) {
    r.value = tensor(g, rule8(), r.u0, r.u1, r.t0, r.t1);
    r.error = std::abs(r.value - tensor(g, rule6(), r.u0, r.u1, r.t0, r.t1));
}

std::vector<double> sorted_unique(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (double x : v)
        if (out.empty() || x - out.back() > 1e-13) out.push_back(x);
    return out;
}

constexpr int kGradeLevels = 12;

}  // namespace

ScalarHs hs_scalar(const SmoothFunction& f, double lambda, const ExtensionParams& params, double abs_tol,
                   double u_truncation) {
    validate(params, f);
    const double big_u = u_truncation;

    std::vector<double> ub;
    const int cells = std::max(2, static_cast<int>(std::ceil(2.0 * big_u / 0.5)));
    for (int i = 0; i <= cells; ++i) ub.push_back(-big_u + 2.0 * big_u * i / cells);
    if (lambda > -big_u && lambda < big_u) {
        ub.push_back(lambda);
        for (int k = 1; k <= kGradeLevels; ++k) {
            const double off = 0.5 * std::ldexp(1.0, -k);
            for (double x : {lambda - off, lambda + off})
                if (x > -big_u && x < big_u) ub.push_back(x);
        }
    }
    ub = sorted_unique(ub);

    std::vector<double> tb{0.0, 0.625, 0.75, 0.875, 1.0};
    for (int k = 1; k <= kGradeLevels; ++k) tb.push_back(std::ldexp(1.0, -k));
    const std::size_t half = tb.size();
    for (std::size_t i = 0; i < half; ++i) tb.push_back(-tb[i]);
    tb = sorted_unique(tb);

    Integrand g(f, params.n, lambda);
    std::vector<Rect> rects;
    for (std::size_t i = 0; i + 1 < ub.size(); ++i)
        for (std::size_t j = 0; j + 1 < tb.size(); ++j) {
            Rect r{ub[i], ub[i + 1], tb[j], tb[j + 1], 0.0, 0.0};
            evaluate(g, r);
            rects.push_back(r);
        }

    // Worst rectangle first; ties broken by index for a reproducible order.
    auto worse = [&](std::size_t a, std::size_t b) {
        if (rects[a].error != rects[b].error) return rects[a].error < rects[b].error;
        return a > b;
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(worse)> heap(worse);
    double total_err = 0.0;
    for (std::size_t i = 0; i < rects.size(); ++i) {
        heap.push(i);
        total_err += rects[i].error;
    }
    std::vector<bool> retired(rects.size(), false);
    while (total_err > abs_tol && static_cast<int>(rects.size()) < params.panel_budget) {
        const std::size_t w = heap.top();
        heap.pop();
        const Rect parent = rects[w];
        retired[w] = true;
        const double um = 0.5 * (parent.u0 + parent.u1), tm = 0.5 * (parent.t0 + parent.t1);
        const std::array<Rect, 4> kids{Rect{parent.u0, um, parent.t0, tm, 0.0, 0.0},
                                       Rect{um, parent.u1, parent.t0, tm, 0.0, 0.0},
                                       Rect{parent.u0, um, tm, parent.t1, 0.0, 0.0},
                                       Rect{um, parent.u1, tm, parent.t1, 0.0, 0.0}};
        total_err -= parent.error;
        for (Rect k : kids) {
            evaluate(g, k);
            total_err += k.error;
            rects.push_back(k);
            retired.push_back(false);
            heap.push(rects.size() - 1);
        }
    }
    // Recompute the error sum from scratch to shed accumulated rounding.
    Complex value = 0.0;
    double err = 0.0;
    int live = 0;
    for (std::size_t i = 0; i < rects.size(); ++i) {
        if (retired[i]) continue;
        value += rects[i].value;
        err += rects[i].error;
        ++live;
    }
    if (err > abs_tol) {
        std::ostringstream os;
        os << "HS quadrature did not converge at lambda = " << lambda << ": error estimate " << err
           << " exceeds " << abs_tol << " after " << rects.size() << " panels (budget " << params.panel_budget << ")";
        throw NumericalError(os.str());
    }
    return {value, err, live};
}

HsResult hs_apply(const Hamiltonian& h, const SmoothFunction& f, const ExtensionParams& params) {
    validate(params, f);
    const auto& eig = h.eigen();
    const double big_u = params.u_truncation > 0.0 ? params.u_truncation : auto_truncation(f, params.n);

    double scale = 0.0;
    for (Eigen::Index k = 0; k < eig.values.size(); ++k) scale = std::max(scale, std::abs(f(eig.values[k])));
    for (int i = 0; i <= 1000; ++i) scale = std::max(scale, std::abs(f(-big_u + 2.0 * big_u * i / 1000)));
    const double abs_tol = params.tolerance * std::max(scale, std::numeric_limits<double>::min());

    const auto m = static_cast<std::size_t>(eig.values.size());
    std::vector<ScalarHs> g(m);
    parallel_for(m, [&](std::size_t k) { g[k] = hs_scalar(f, eig.values[k], params, abs_tol, big_u); });

    CVector diag(m);
    HsResult out;
    out.u_truncation = big_u;
    for (std::size_t k = 0; k < m; ++k) {
        diag[k] = g[k].value;
        out.error_estimate = std::max(out.error_estimate, g[k].error_estimate);
        out.panels += g[k].panels;
    }
    const CMatrix raw = eig.vectors * diag.asDiagonal() * eig.vectors.adjoint();
    out.value = 0.5 * (raw + raw.adjoint());
    return out;
}

bool KernelDecayReport::ok() const {
    return std::all_of(per_k.begin(), per_k.end(), [](const KernelDecayPerK& k) { return k.finite && k.monotone; });
}

KernelDecayReport kernel_decay_experiment(const Hamiltonian& h, const SmoothFunction& f, double p,
                                          const std::vector<int>& k_list, const std::vector<CubePair>& pairs,
                                          const KernelDecayOptions& opt) {
    if (!h.has_domain()) throw ValidationError("kernel decay needs a Hamiltonian built on a grid domain");
    const auto& dom = h.domain();
    if (!(p > dom.dim() / 2.0))
        throw ValidationError("p > d/2 violated: p = " + std::to_string(p) + ", d = " + std::to_string(dom.dim()));
    for (int k : k_list)
        if (k < 0) throw ValidationError("k must be >= 0");

    const CMatrix fh = opt.use_hs ? hs_apply(h, f, opt.hs).value
                                  : apply_function_exact(h, [&f](double x) { return Complex(f(x)); });

    KernelDecayReport rep;
    std::vector<CubePair> kept;
    for (const auto& pr : pairs) {
        if (pr.beta == pr.gamma)
            ++rep.excluded_diagonal;
        else
            kept.push_back(pr);
    }
    rep.norms = block_norms(fh, dom, kept, p);
    rep.degenerate = std::all_of(rep.norms.begin(), rep.norms.end(),
                                 [&](const BlockNorm& b) { return b.value <= opt.floor; });

    // Rays: same beta and the same primitive direction.
    std::map<std::vector<int>, std::vector<std::size_t>> rays;
    for (std::size_t i = 0; i < rep.norms.size(); ++i) {
        const auto& b = rep.norms[i];
        std::vector<int> dir(b.beta.size());
        int g = 0;
        for (std::size_t j = 0; j < dir.size(); ++j) {
            dir[j] = b.gamma[j] - b.beta[j];
            g = std::gcd(g, std::abs(dir[j]));
        }
        std::vector<int> key = b.beta;
        for (int x : dir) key.push_back(x / g);
        rays[key].push_back(i);
    }
    for (auto& [key, idx] : rays)
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return rep.norms[a].distance < rep.norms[b].distance; });

    for (int k : k_list) {
        KernelDecayPerK pk{k, 0.0, true, true, 0};
        std::vector<double> prod(rep.norms.size());
        for (std::size_t i = 0; i < rep.norms.size(); ++i) {
            const auto& b = rep.norms[i];
            prod[i] = b.value * std::pow(b.distance, k);
            rep.rows.push_back({b, k, prod[i]});
            if (b.distance >= opt.min_distance) pk.sup = std::max(pk.sup, prod[i]);
        }
        pk.finite = std::isfinite(pk.sup);
        for (const auto& [key, idx] : rays) {
            // Censored entries drop out; the remaining tail is compared in order.
            std::vector<std::size_t> tail;
            for (std::size_t i : idx)
                if (rep.norms[i].distance >= opt.knee && rep.norms[i].value > opt.floor) tail.push_back(i);
            for (std::size_t a = 0; a + 1 < tail.size(); ++a) {
                if (prod[tail[a + 1]] > prod[tail[a]] * (1.0 + 1e-12)) {
                    pk.monotone = false;
                    ++pk.monotone_violations;
                }
            }
        }
        rep.per_k.push_back(pk);
    }
    return rep;
}

std::vector<CubePair> ray_pairs(const GridDomain& dom, const std::vector<int>& beta,
                                const std::vector<std::vector<int>>& directions) {
    const auto cubes = covering_cubes(dom);
    const std::set<std::vector<int>> present(cubes.begin(), cubes.end());
    if (!present.count(beta)) throw ValidationError("ray origin is not a covering cube of the domain");
    std::vector<CubePair> out;
    for (const auto& dir : directions) {
        if (dir.size() != beta.size()) throw ValidationError("ray direction has the wrong dimension");
        if (std::all_of(dir.begin(), dir.end(), [](int x) { return x == 0; }))
            throw ValidationError("ray direction must be nonzero");
        for (int t = 1;; ++t) {
            std::vector<int> g(beta.size());
            for (std::size_t j = 0; j < g.size(); ++j) g[j] = beta[j] + t * dir[j];
            if (!present.count(g)) break;
            out.push_back({beta, g});
        }
    }
    return out;
}

}  // namespace ctlab
