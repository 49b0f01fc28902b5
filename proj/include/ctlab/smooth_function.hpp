#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ctlab {

/// Real function on R with exact derivatives f^{(r)}, r = 0..r_max.
class SmoothFunction {
public:
    /// Writes f^{(0)}(u), ..., f^{(out.size()-1)}(u) into out.
    using Jet = std::function<void(double u, std::span<double> out)>;

    SmoothFunction(std::string tag, int r_max, Jet jet, bool schwartz = true);

    const std::string& tag() const { return tag_; }
    int r_max() const { return r_max_; }
    /// Rapid decay of every derivative; false for general members of the wider class.
    bool schwartz() const { return schwartz_; }

    double operator()(double u) const { return derivative(0, u); }
    double derivative(int r, double u) const;
    /// Orders 0..out.size()-1; throws if out.size() > r_max + 1.
    void derivatives(double u, std::span<double> out) const;

    SmoothFunction scaled(double c) const;
    friend SmoothFunction operator+(const SmoothFunction& f, const SmoothFunction& g);

private:
    std::string tag_;
    int r_max_;
    std::shared_ptr<const Jet> jet_;
    bool schwartz_;
};

/// amplitude * exp(-((u - center)/width)^2).
SmoothFunction gaussian(double center = 0.0, double width = 1.0, double amplitude = 1.0, int r_max = 16);
/// P(u) exp(-((u - center)/width)^2) with P given by ascending coefficients.
SmoothFunction damped_gaussian(std::vector<double> poly, double center = 0.0, double width = 1.0, int r_max = 16);
/// exp(-1/(1 - x^2)) for |x| < 1, x = (u - center)/radius; zero outside.
SmoothFunction bump(double center = 0.0, double radius = 1.0, int r_max = 16);
SmoothFunction zero_function(int r_max = 16);
SmoothFunction user_function(std::string tag, int r_max, SmoothFunction::Jet jet, bool schwartz = true);

/// sup_x (1 + |x|)^N |f^{(r)}(x)| by grid search with local refinement.
double schwartz_norm(const SmoothFunction& f, double n_weight, int r);

/// sum_{r=0}^{n} int |f^{(r)}(u)| <u>^{r-1} du, each integral to relative 1e-8.
/// Throws NumericalError when an integral fails to converge.
double a_norm(const SmoothFunction& f, int n);

/// <u> = sqrt(1 + u^2).
inline double japanese(double u) { return std::sqrt(1.0 + u * u); }

}  // namespace ctlab
