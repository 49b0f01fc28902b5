#include "ctlab/smooth_function.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <string>

#include "ctlab/types.hpp"

namespace ctlab {

SmoothFunction::SmoothFunction(std::string tag, int r_max, Jet jet, bool schwartz)
    : tag_(std::move(tag)), r_max_(r_max), jet_(std::make_shared<const Jet>(std::move(jet))), schwartz_(schwartz) {
    if (r_max < 0) throw ValidationError("r_max must be >= 0");
    if (!*jet_) throw ValidationError("function '" + tag_ + "' has no derivative evaluator");
}

double SmoothFunction::derivative(int r, double u) const {
    if (r < 0 || r > r_max_)
        throw ValidationError("derivative order " + std::to_string(r) + " exceeds r_max " + std::to_string(r_max_) +
                              " of '" + tag_ + "'");
    std::vector<double> out(r + 1);
    (*jet_)(u, out);
    return out[r];
}

void SmoothFunction::derivatives(double u, std::span<double> out) const {
    if (static_cast<int>(out.size()) > r_max_ + 1)
        throw ValidationError("requested " + std::to_string(out.size() - 1) + " derivatives of '" + tag_ +
                              "' but r_max is " + std::to_string(r_max_));
    (*jet_)(u, out);
}

SmoothFunction SmoothFunction::scaled(double c) const {
    auto inner = jet_;
    return SmoothFunction(tag_, r_max_, [inner, c](double u, std::span<double> out) {
        (*inner)(u, out);
        for (double& x : out) x *= c;
    }, schwartz_);
}

SmoothFunction operator+(const SmoothFunction& f, const SmoothFunction& g) {
    auto a = f.jet_;
    auto b = g.jet_;
    const std::string tag = f.tag_ == g.tag_ ? f.tag_ : "user";
    return SmoothFunction(tag, std::min(f.r_max_, g.r_max_), [a, b](double u, std::span<double> out) {
        std::vector<double> tmp(out.size());
        (*a)(u, out);
        (*b)(u, tmp);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += tmp[i];
    }, f.schwartz_ && g.schwartz_);
}

namespace {

// d^r/du^r e^{-y^2}, y = (u - c)/w, equals (-1/w)^r H_r(y) e^{-y^2} with
// physicists' Hermite polynomials.
void gaussian_jet(double u, double c, double w, double amp, std::span<double> out) {
    const double y = (u - c) / w;
    const double g = amp * std::exp(-y * y);
    double hm1 = 0.0, hr = 1.0, scale = 1.0;
    for (std::size_t r = 0; r < out.size(); ++r) {
        out[r] = scale * hr * g;
        const double next = 2.0 * y * hr - 2.0 * static_cast<double>(r) * hm1;
        hm1 = hr;
        hr = next;
        scale *= -1.0 / w;
    }
}

void check_width(double w) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("width must be positive and finite");
}

}  // namespace

SmoothFunction gaussian(double center, double width, double amplitude, int r_max) {
    check_width(width);
    return SmoothFunction("gaussian", r_max, [=](double u, std::span<double> out) {
        gaussian_jet(u, center, width, amplitude, out);
    });
}

SmoothFunction damped_gaussian(std::vector<double> poly, double center, double width, int r_max) {
    check_width(width);
    if (poly.empty()) poly.push_back(0.0);
    return SmoothFunction("polynomial-damped gaussian", r_max, [=](double u, std::span<double> out) {
        const std::size_t m = out.size();
        std::vector<double> g(m);
        gaussian_jet(u, center, width, 1.0, g);
        // P^{(k)}(u) by repeated differentiation of the coefficient list.
        std::vector<double> coef = poly, pk(m, 0.0);
        for (std::size_t k = 0; k < m && !coef.empty(); ++k) {
            double acc = 0.0;
            for (std::size_t i = coef.size(); i-- > 0;) acc = acc * u + coef[i];
            pk[k] = acc;
            std::vector<double> next;
            for (std::size_t i = 1; i < coef.size(); ++i) next.push_back(coef[i] * static_cast<double>(i));
            coef = std::move(next);
        }
        for (std::size_t r = 0; r < m; ++r) {
            double binom = 1.0, acc = 0.0;
            for (std::size_t k = 0; k <= r; ++k) {
                acc += binom * pk[k] * g[r - k];
                binom = binom * static_cast<double>(r - k) / static_cast<double>(k + 1);
            }
            out[r] = acc;
        }
    });
}

SmoothFunction bump(double center, double radius, int r_max) {
    check_width(radius);
    return SmoothFunction("bump", r_max, [=](double u, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const double x = (u - center) / radius;
        const double t0 = 1.0 - x * x;
        if (!(t0 > 0.0) || 1.0 / t0 > 700.0) return;
        // Taylor jets in the offset e: t(x+e) = t0 - 2x e - e^2, then 1/t, then exp(-1/t).
        const std::size_t m = out.size();
        std::vector<double> t(m, 0.0), inv(m, 0.0), e(m, 0.0);
        t[0] = t0;
        if (m > 1) t[1] = -2.0 * x;
        if (m > 2) t[2] = -1.0;
        inv[0] = 1.0 / t0;
        for (std::size_t k = 1; k < m; ++k) {
            double acc = 0.0;
            for (std::size_t j = 1; j <= std::min<std::size_t>(k, 2); ++j) acc += t[j] * inv[k - j];
            inv[k] = -acc / t0;
        }
        e[0] = std::exp(-inv[0]);
        for (std::size_t k = 1; k < m; ++k) {
            double acc = 0.0;
            for (std::size_t j = 1; j <= k; ++j) acc += static_cast<double>(j) * (-inv[j]) * e[k - j];
            e[k] = acc / static_cast<double>(k);
        }
        double fact = 1.0, scale = 1.0;
        for (std::size_t r = 0; r < m; ++r) {
            if (r > 0) {
                fact *= static_cast<double>(r);
                scale /= radius;
            }
            out[r] = fact * scale * e[r];
        }
    });
}

SmoothFunction zero_function(int r_max) {
    return SmoothFunction("zero", r_max, [](double, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    });
}

SmoothFunction user_function(std::string tag, int r_max, SmoothFunction::Jet jet, bool schwartz) {
    return SmoothFunction(std::move(tag), r_max, std::move(jet), schwartz);
}

double schwartz_norm(const SmoothFunction& f, double n_weight, int r) {
    if (r < 0 || r > f.r_max()) throw ValidationError("derivative order out of range for the Schwartz norm");
    std::vector<double> buf(r + 1);
    auto weighted = [&](double x) {
        f.derivatives(x, buf);
        return std::pow(1.0 + std::abs(x), n_weight) * std::abs(buf[r]);
    };
    constexpr int kGrid = 20000;
    double best = 0.0, best_x = 0.0, step = 0.0;
    for (double half = 16.0; half <= 1.1e6; half *= 2.0) {
        step = 2.0 * half / kGrid;
        double outer = 0.0;
        best = 0.0;
        for (int i = 0; i <= kGrid; ++i) {
            const double x = -half + i * step;
            const double w = weighted(x);
            if (w > best) {
                best = w;
                best_x = x;
            }
            if (std::abs(x) >= 0.5 * half) outer = std::max(outer, w);
        }
        if (outer <= 1e-3 * best || best == 0.0) break;
        if (half * 2.0 > 1.1e6) return kInf;
    }
    if (best == 0.0) return 0.0;
    auto res = boost::math::tools::brent_find_minima([&](double x) { return -weighted(x); }, best_x - step,
                                                     best_x + step, 40);
    return std::max(best, -res.second);
}

double a_norm(const SmoothFunction& f, int n) {
    if (n < 0) throw ValidationError("a_norm order must be >= 0");
    if (n > f.r_max()) throw ValidationError("a_norm order exceeds r_max of '" + f.tag() + "'");
    using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
    double total = 0.0;
    for (int r = 0; r <= n; ++r) {
        std::vector<double> buf(r + 1);
        auto signed_d = [&](double u) {
            f.derivatives(u, buf);
            return buf[r];
        };
        auto g = [&](double u) { return std::abs(signed_d(u)) * std::pow(japanese(u), r - 1); };
        // Split at sign changes of f^{(r)} so every quadrature panel is smooth.
        auto piece = [&](double a, double b) {
            constexpr int kScan = 256;
            std::vector<double> cuts{a};
            double prev = signed_d(a);
            for (int i = 1; i <= kScan; ++i) {
                const double x = a + (b - a) * i / kScan;
                const double cur = signed_d(x);
                if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
                    auto root = boost::math::tools::bisect(
                        signed_d, cuts.back() > x - (b - a) / kScan ? cuts.back() : x - (b - a) / kScan, x,
                        [](double lo, double hi) { return std::abs(hi - lo) <= 1e-15 * std::max(1.0, std::abs(lo)); });
                    cuts.push_back(0.5 * (root.first + root.second));
                }
                prev = cur;
            }
            cuts.push_back(b);
            double s = 0.0;
            for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
                if (cuts[i + 1] > cuts[i]) s += Quad::integrate(g, cuts[i], cuts[i + 1], 15, 1e-11);
            return s;
        };
        double acc = piece(-1.0, 1.0);
        int quiet = 0;
        bool converged = false;
        for (int k = 0; k < 62; ++k) {
            const double lo = std::ldexp(1.0, k), hi = std::ldexp(1.0, k + 1);
            const double c = piece(lo, hi) + piece(-hi, -lo);
            acc += c;
            quiet = c <= 1e-12 * acc ? quiet + 1 : 0;
            if (k >= 6 && quiet >= 2) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw NumericalError("a_norm: integral of |f^(" + std::to_string(r) + ")| <u>^" + std::to_string(r - 1) +
                                 " diverges for '" + f.tag() + "'");
        total += acc;
    }
    return total;
}

}  // namespace ctlab
