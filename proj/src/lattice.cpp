#include "ctlab/lattice.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

namespace ctlab {

namespace {

constexpr int kMaxDim = 8;

int product(std::span<const int> v) {
    long long p = 1;
    for (int e : v) p *= e;
    if (p > (1LL << 30)) throw ValidationError("lattice box too large");
    return static_cast<int>(p);
}

}  // namespace

GridDomain build_domain(int d, std::vector<int> extents, double h, std::optional<std::vector<bool>> mask) {
    if (d < 2) throw ValidationError("dimension d >= 2 required (got d = " + std::to_string(d) + ")");
    if (d > kMaxDim) throw ValidationError("dimension d <= 8 supported");
    if (static_cast<int>(extents.size()) != d)
        throw ValidationError("extents must list one entry per axis");
    for (int e : extents)
        if (e <= 0) throw ValidationError("extents must be positive");
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("spacing h must be positive");
    const double inv = 1.0 / h;
    const long m = std::lround(inv);
    if (m < 1 || std::abs(inv - static_cast<double>(m)) > 1e-9 * static_cast<double>(m))
        throw ValidationError("spacing h must equal 1/m for an integer m >= 1");

    GridDomain dom;
    dom.dim_ = d;
    dom.extents_ = std::move(extents);
    dom.cells_per_unit_ = static_cast<int>(m);
    dom.spacing_ = 1.0 / static_cast<double>(m);
    const int n = product(dom.extents_);
    if (mask) {
        if (static_cast<int>(mask->size()) != n) throw ValidationError("mask size does not match the box");
        dom.mask_ = std::move(*mask);
    } else {
        dom.mask_.assign(n, true);
    }
    dom.box_to_interior_.assign(n, -1);
    for (int s = 0; s < n; ++s) {
        if (dom.mask_[s]) {
            dom.box_to_interior_[s] = static_cast<int>(dom.interior_.size());
            dom.interior_.push_back(s);
        }
    }
    if (dom.interior_.empty()) throw ValidationError("domain has no interior sites");
    return dom;
}

std::vector<bool> box_mask(std::span<const int> extents, std::span<const int> lo, std::span<const int> hi) {
    const int d = static_cast<int>(extents.size());
    if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d)
        throw ValidationError("sub-box bounds must list one entry per axis");
    const int n = product(extents);
    std::vector<bool> mask(n, false);
    std::vector<int> idx(d, 0);
    for (int s = 0; s < n; ++s) {
        int rem = s;
        bool inside = true;
        for (int j = 0; j < d; ++j) {
            idx[j] = rem % extents[j];
            rem /= extents[j];
            inside = inside && idx[j] >= lo[j] && idx[j] < hi[j];
        }
        mask[s] = inside;
    }
    return mask;
}

int GridDomain::box_index(std::span<const int> multi) const {
    int s = 0;
    for (int j = dim_ - 1; j >= 0; --j) s = s * extents_[j] + multi[j];
    return s;
}

std::vector<int> GridDomain::multi_index(int box_site) const {
    std::vector<int> idx(dim_);
    for (int j = 0; j < dim_; ++j) {
        idx[j] = box_site % extents_[j];
        box_site /= extents_[j];
    }
    return idx;
}

RVector GridDomain::position(int interior_site) const {
    const auto idx = multi_index(interior_[interior_site]);
    RVector x(dim_);
    for (int j = 0; j < dim_; ++j) x[j] = coordinate(idx[j]);
    return x;
}

std::vector<int> GridDomain::cube_of(int interior_site) const {
    auto idx = multi_index(interior_[interior_site]);
    for (int& i : idx) i /= cells_per_unit_;
    return idx;
}

bool GridDomain::contains(std::span<const double> x) const {
    // Candidate sites per axis: the two nearest lattice indices.
    std::array<int, kMaxDim> base{};
    for (int j = 0; j < dim_; ++j) {
        const double u = (x[j] + 0.5) / spacing_ - 0.5;  // fractional index
        base[j] = static_cast<int>(std::floor(u));
    }
    const int corners = 1 << dim_;
    std::array<int, kMaxDim> idx{};
    for (int c = 0; c < corners; ++c) {
        bool ok = true;
        for (int j = 0; j < dim_ && ok; ++j) {
            idx[j] = base[j] + ((c >> j) & 1);
            if (idx[j] < 0 || idx[j] >= extents_[j]) ok = false;
            else if (std::abs(x[j] - coordinate(idx[j])) >= spacing_) ok = false;
        }
        if (ok && mask_[box_index(std::span<const int>(idx.data(), dim_))]) return true;
    }
    return false;
}

VectorPotential::VectorPotential(int dim, std::vector<double> forward_links, FieldKind kind,
                                 std::optional<FieldFunction> continuum)
    : dim_(dim), links_(std::move(forward_links)), kind_(kind), continuum_(std::move(continuum)) {}

VectorPotential sampled_field(const GridDomain& dom, FieldFunction field, FieldKind kind) {
    const int d = dom.dim();
    std::vector<double> links(static_cast<std::size_t>(dom.box_size()) * d, 0.0);
    std::array<double, kMaxDim> mid{};
    std::array<double, kMaxDim> a{};
    for (int s = 0; s < dom.box_size(); ++s) {
        const auto idx = dom.multi_index(s);
        for (int j = 0; j < d; ++j) {
            for (int k = 0; k < d; ++k) mid[k] = dom.coordinate(idx[k]);
            mid[j] += 0.5 * dom.spacing();
            field.value(std::span<const double>(mid.data(), d), std::span<double>(a.data(), d));
            links[static_cast<std::size_t>(s) * d + j] = a[j];
        }
    }
    return VectorPotential(d, std::move(links), kind, std::move(field));
}

VectorPotential zero_field(const GridDomain& dom) {
    const int d = dom.dim();
    FieldFunction f{[](std::span<const double>, std::span<double> a) { std::fill(a.begin(), a.end(), 0.0); },
                    [](std::span<const double>) { return 0.0; }};
    return VectorPotential(d, std::vector<double>(static_cast<std::size_t>(dom.box_size()) * d, 0.0),
                           FieldKind::Zero, std::move(f));
}

VectorPotential constant_field(const GridDomain& dom, std::span<const double> a) {
    if (static_cast<int>(a.size()) != dom.dim()) throw ValidationError("constant field needs one component per axis");
    std::vector<double> value(a.begin(), a.end());
    FieldFunction f{[value](std::span<const double>, std::span<double> out) {
                        std::copy(value.begin(), value.end(), out.begin());
                    },
                    [](std::span<const double>) { return 0.0; }};
    return sampled_field(dom, std::move(f), FieldKind::Constant);
}

VectorPotential landau_field(const GridDomain& dom, double b) {
    FieldFunction f{[b](std::span<const double> x, std::span<double> out) {
                        std::fill(out.begin(), out.end(), 0.0);
                        out[1] = b * x[0];
                    },
                    [](std::span<const double>) { return 0.0; }};
    return sampled_field(dom, std::move(f), FieldKind::Landau);
}

VectorPotential symmetric_field(const GridDomain& dom, double b) {
    FieldFunction f{[b](std::span<const double> x, std::span<double> out) {
                        std::fill(out.begin(), out.end(), 0.0);
                        out[0] = -0.5 * b * x[1];
                        out[1] = 0.5 * b * x[0];
                    },
                    [](std::span<const double>) { return 0.0; }};
    return sampled_field(dom, std::move(f), FieldKind::Symmetric);
}

VectorPotential random_field(const GridDomain& dom, double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-amplitude, amplitude);
    std::vector<double> links(static_cast<std::size_t>(dom.box_size()) * dom.dim());
    for (double& l : links) l = unif(rng);
    return VectorPotential(dom.dim(), std::move(links), FieldKind::Random);
}

ScalarPotential::ScalarPotential(std::vector<double> values, std::string kind,
                                 std::function<double(std::span<const double>)> continuum,
                                 std::optional<double> cap)
    : values_(std::move(values)), kind_(std::move(kind)), continuum_(std::move(continuum)), cap_(cap) {}

namespace {

ScalarPotential sample_potential(const GridDomain& dom, std::function<double(std::span<const double>)> v,
                                 std::string kind, std::optional<double> cap = std::nullopt) {
    std::vector<double> values(dom.box_size());
    std::array<double, kMaxDim> x{};
    for (int s = 0; s < dom.box_size(); ++s) {
        const auto idx = dom.multi_index(s);
        for (int j = 0; j < dom.dim(); ++j) x[j] = dom.coordinate(idx[j]);
        values[s] = v(std::span<const double>(x.data(), dom.dim()));
    }
    return ScalarPotential(std::move(values), std::move(kind), std::move(v), cap);
}

std::vector<double> checked_center(const GridDomain& dom, std::span<const double> center) {
    if (static_cast<int>(center.size()) != dom.dim()) throw ValidationError("potential centre needs d components");
    return {center.begin(), center.end()};
}

double dist2(std::span<const double> x, const std::vector<double>& c) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) r2 += (x[j] - c[j]) * (x[j] - c[j]);
    return r2;
}

}  // namespace

ScalarPotential zero_potential(const GridDomain& dom) {
    return ScalarPotential(std::vector<double>(dom.box_size(), 0.0), "zero",
                           [](std::span<const double>) { return 0.0; });
}

ScalarPotential constant_potential(const GridDomain& dom, double value) {
    return sample_potential(dom, [value](std::span<const double>) { return value; }, "constant");
}

ScalarPotential harmonic_potential(const GridDomain& dom, double omega, std::span<const double> center) {
    auto c = checked_center(dom, center);
    return sample_potential(
        dom, [omega, c](std::span<const double> x) { return 0.5 * omega * omega * dist2(x, c); }, "harmonic");
}

ScalarPotential well_potential(const GridDomain& dom, double depth, double radius, std::span<const double> center) {
    auto c = checked_center(dom, center);
    const double r2 = radius * radius;
    return sample_potential(
        dom, [depth, r2, c](std::span<const double> x) { return dist2(x, c) < r2 ? -depth : 0.0; }, "well");
}

ScalarPotential coulomb_potential(const GridDomain& dom, double charge, double cap, std::span<const double> center) {
    if (!(cap > 0.0)) throw ValidationError("coulomb potential needs a positive cap");
    auto c = checked_center(dom, center);
    return sample_potential(
        dom,
        [charge, cap, c](std::span<const double> x) {
            const double r = std::sqrt(dist2(x, c));
            return r > 0.0 ? std::max(-charge / r, -cap) : -cap;
        },
        "coulomb", cap);
}

ScalarPotential random_potential(const GridDomain& dom, double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-0.5 * amplitude, 0.5 * amplitude);
    std::vector<double> values(dom.box_size());
    for (double& v : values) v = unif(rng);
    return ScalarPotential(std::move(values), "random");
}

Hamiltonian::Hamiltonian(std::optional<GridDomain> dom, CMatrix matrix)
    : domain_(std::move(dom)), matrix_(std::move(matrix)), cache_(std::make_shared<Cache>()) {
    if (matrix_.rows() != matrix_.cols()) throw ValidationError("Hamiltonian matrix must be square");
    if (domain_ && domain_->interior_count() != matrix_.rows())
        throw ValidationError("Hamiltonian size does not match the domain interior");
}

const GridDomain& Hamiltonian::domain() const {
    if (!domain_) throw ValidationError("Hamiltonian carries no lattice domain");
    return *domain_;
}

const EigenPairs& Hamiltonian::eigen() const {
    std::call_once(cache_->once, [this] { cache_->pairs = hermitian_eigen(matrix_); });
    return cache_->pairs;
}

EigenPairs hermitian_eigen(const CMatrix& m) {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(m);
    if (solver.info() != Eigen::Success) throw NumericalError("hermitian eigensolver failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

Hamiltonian assemble_hamiltonian(const GridDomain& dom, const VectorPotential& a, const ScalarPotential& v) {
    const int d = dom.dim();
    if (a.dim() != d || static_cast<int>(a.links().size()) != dom.box_size() * d)
        throw ValidationError("vector potential does not match the domain");
    if (static_cast<int>(v.values().size()) != dom.box_size())
        throw ValidationError("scalar potential does not match the domain");
    const int n = dom.interior_count();
    const double h = dom.spacing();
    const double diag = d / (h * h);
    const double hop = -0.5 / (h * h);
    CMatrix m = CMatrix::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const int s = dom.box_index(k);
        m(k, k) = diag + v[s];
        auto idx = dom.multi_index(s);
        for (int j = 0; j < d; ++j) {
            if (idx[j] + 1 >= dom.extents()[j]) continue;
            ++idx[j];
            const int t = dom.box_index(idx);
            --idx[j];
            const int l = dom.interior_index(t);
            if (l < 0) continue;
            const Complex phase = std::polar(1.0, -h * a.forward(s, j));
            m(k, l) = hop * phase;
            m(l, k) = std::conj(m(k, l));
        }
    }
    return Hamiltonian(dom, std::move(m));
}

Hamiltonian gauge_transform(const Hamiltonian& h, std::span<const double> chi) {
    if (static_cast<int>(chi.size()) != h.size()) throw ValidationError("gauge field must cover every interior site");
    CMatrix m = h.matrix();
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r)
            if (m(r, c) != Complex(0.0)) m(r, c) *= std::polar(1.0, chi[r] - chi[c]);
    return Hamiltonian(h.has_domain() ? std::optional<GridDomain>(h.domain()) : std::nullopt, std::move(m));
}

VectorPotential gauge_shift(const GridDomain& dom, const VectorPotential& a, std::span<const double> chi) {
    if (static_cast<int>(chi.size()) != dom.box_size()) throw ValidationError("gauge field must cover the box");
    const int d = dom.dim();
    std::vector<double> links = a.links();
    for (int s = 0; s < dom.box_size(); ++s) {
        auto idx = dom.multi_index(s);
        for (int j = 0; j < d; ++j) {
            if (idx[j] + 1 >= dom.extents()[j]) continue;
            ++idx[j];
            const int t = dom.box_index(idx);
            --idx[j];
            links[static_cast<std::size_t>(s) * d + j] += (chi[t] - chi[s]) / dom.spacing();
        }
    }
    return VectorPotential(d, std::move(links), FieldKind::Explicit);
}

const EigenPairs& spectrum(const Hamiltonian& h) { return h.eigen(); }

CMatrix apply_function_exact(const EigenPairs& eig, const std::function<Complex(double)>& f) {
    const auto n = eig.values.size();
    CVector w(n);
    for (Eigen::Index k = 0; k < n; ++k) w[k] = f(eig.values[k]);
    return eig.vectors * w.asDiagonal() * eig.vectors.adjoint();
}

CMatrix apply_function_exact(const Hamiltonian& h, const std::function<Complex(double)>& f) {
    return apply_function_exact(h.eigen(), f);
}

std::vector<int> cube_sites(const GridDomain& dom, std::span<const int> beta) {
    if (static_cast<int>(beta.size()) != dom.dim()) throw ValidationError("cube centre needs d components");
    const int m = dom.cells_per_unit();
    std::vector<int> lo(dom.dim()), hi(dom.dim());
    for (int j = 0; j < dom.dim(); ++j) {
        lo[j] = std::max(0, beta[j] * m);
        hi[j] = std::min(dom.extents()[j], (beta[j] + 1) * m);
        if (lo[j] >= hi[j]) return {};
    }
    std::vector<int> sites;
    std::vector<int> idx = lo;
    while (true) {
        const int k = dom.interior_index(dom.box_index(idx));
        if (k >= 0) sites.push_back(k);
        int j = 0;
        while (j < dom.dim() && ++idx[j] == hi[j]) {
            idx[j] = lo[j];
            ++j;
        }
        if (j == dom.dim()) break;
    }
    std::sort(sites.begin(), sites.end());
    return sites;
}

RVector indicator(const GridDomain& dom, std::span<const int> beta) {
    RVector diag = RVector::Zero(dom.interior_count());
    for (int k : cube_sites(dom, beta)) diag[k] = 1.0;
    return diag;
}

std::vector<std::vector<int>> covering_cubes(const GridDomain& dom) {
    std::map<std::vector<int>, bool> seen;
    for (int k = 0; k < dom.interior_count(); ++k) seen[dom.cube_of(k)] = true;
    std::vector<std::vector<int>> cubes;
    cubes.reserve(seen.size());
    for (const auto& [c, _] : seen) cubes.push_back(c);
    return cubes;
}

double max_abs_entry(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace ctlab
