#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctlab/types.hpp"

namespace ctlab {

/// Finite box of lattice sites with spacing h = 1/m and an interior mask.
///
/// Site i along an axis sits at coordinate (i + 1/2) h - 1/2, so the
/// half-open unit cube [b - 1/2, b + 1/2) centred at the integer b holds
/// exactly the sites i with i / m == b. For h = 1 the sites are the
/// integers 0, 1, ..., extent - 1.
class GridDomain {
public:
    int dim() const { return dim_; }
    const std::vector<int>& extents() const { return extents_; }
    double spacing() const { return spacing_; }
    int cells_per_unit() const { return cells_per_unit_; }
    const std::vector<bool>& mask() const { return mask_; }

    int box_size() const { return static_cast<int>(mask_.size()); }
    int interior_count() const { return static_cast<int>(interior_.size()); }

    /// Box index of the k-th interior site.
    int box_index(int interior_site) const { return interior_[interior_site]; }
    /// Interior index of a box site, or -1 for exterior sites.
    int interior_index(int box_site) const { return box_to_interior_[box_site]; }

    int box_index(std::span<const int> multi) const;
    std::vector<int> multi_index(int box_site) const;

    double coordinate(int axis_index) const { return (axis_index + 0.5) * spacing_ - 0.5; }
    /// Physical position of an interior site.
    RVector position(int interior_site) const;
    /// Integer centre of the unit cube containing an interior site.
    std::vector<int> cube_of(int interior_site) const;

    /// True when x lies in the continuum region represented by the mask:
    /// the union of the open cubes of half-width h around interior sites.
    /// For a full box this is the Dirichlet interval (x_0 - h, x_last + h)
    /// per axis.
    bool contains(std::span<const double> x) const;

    friend GridDomain build_domain(int d, std::vector<int> extents, double h,
                                   std::optional<std::vector<bool>> mask);

private:
    int dim_ = 0;
    std::vector<int> extents_;
    double spacing_ = 1.0;
    int cells_per_unit_ = 1;
    std::vector<bool> mask_;
    std::vector<int> interior_;
    std::vector<int> box_to_interior_;
};

/// Validated constructor. An omitted mask means the whole box is interior.
GridDomain build_domain(int d, std::vector<int> extents, double h,
                        std::optional<std::vector<bool>> mask = std::nullopt);

/// Mask selecting the sub-box lo <= i < hi (per axis) of `extents`.
std::vector<bool> box_mask(std::span<const int> extents, std::span<const int> lo,
                           std::span<const int> hi);

/// A continuum vector potential with its divergence, used by the path
/// integral and for sampling link values.
struct FieldFunction {
    std::function<void(std::span<const double> x, std::span<double> a)> value;
    std::function<double(std::span<const double> x)> divergence;
};

enum class FieldKind { Zero, Constant, Landau, Symmetric, Random, Explicit };

/// Link values A_{x -> x + h e_j} (A . e_j at the link midpoint) for every box
/// site and axis. The reverse link carries the negated value.
class VectorPotential {
public:
    VectorPotential() = default;
    VectorPotential(int dim, std::vector<double> forward_links, FieldKind kind,
                    std::optional<FieldFunction> continuum = std::nullopt);

    FieldKind kind() const { return kind_; }
    int dim() const { return dim_; }
    double forward(int box_site, int axis) const { return links_[box_site * dim_ + axis]; }
    const std::vector<double>& links() const { return links_; }
    const std::optional<FieldFunction>& continuum() const { return continuum_; }

private:
    int dim_ = 0;
    std::vector<double> links_;
    FieldKind kind_ = FieldKind::Zero;
    std::optional<FieldFunction> continuum_;
};

VectorPotential zero_field(const GridDomain& dom);
VectorPotential constant_field(const GridDomain& dom, std::span<const double> a);
/// A = (0, B x_0, 0, ...): uniform field B in the (0,1) plane.
VectorPotential landau_field(const GridDomain& dom, double b);
/// A = (B/2)(-x_1, x_0, 0, ...).
VectorPotential symmetric_field(const GridDomain& dom, double b);
/// Independent uniform link values in [-amplitude, amplitude]; lattice only.
VectorPotential random_field(const GridDomain& dom, double amplitude, std::uint64_t seed);
/// Sample an arbitrary continuum field at link midpoints.
VectorPotential sampled_field(const GridDomain& dom, FieldFunction field, FieldKind kind);

/// Per-site potential samples on the whole box. Unbounded continuum wells
/// are stored capped; the cap is kept as metadata.
class ScalarPotential {
public:
    ScalarPotential() = default;
    ScalarPotential(std::vector<double> values, std::string kind,
                    std::function<double(std::span<const double>)> continuum = {},
                    std::optional<double> cap = std::nullopt);

    double operator[](int box_site) const { return values_[box_site]; }
    double positive_part(int box_site) const { return std::max(values_[box_site], 0.0); }
    double negative_part(int box_site) const { return std::max(-values_[box_site], 0.0); }
    const std::vector<double>& values() const { return values_; }
    const std::string& kind() const { return kind_; }
    std::optional<double> cap() const { return cap_; }
    /// Continuum evaluator when one exists, else empty.
    const std::function<double(std::span<const double>)>& continuum() const { return continuum_; }

private:
    std::vector<double> values_;
    std::string kind_ = "zero";
    std::function<double(std::span<const double>)> continuum_;
    std::optional<double> cap_;
};

ScalarPotential zero_potential(const GridDomain& dom);
ScalarPotential constant_potential(const GridDomain& dom, double value);
/// V = (omega^2 / 2) |x - c|^2.
ScalarPotential harmonic_potential(const GridDomain& dom, double omega, std::span<const double> center);
/// V = -depth inside the ball |x - c| < radius, 0 outside.
ScalarPotential well_potential(const GridDomain& dom, double depth, double radius,
                               std::span<const double> center);
/// V = -charge / |x - c|, floored at -cap.
ScalarPotential coulomb_potential(const GridDomain& dom, double charge, double cap,
                                  std::span<const double> center);
/// Anderson-type i.i.d. uniform values in [-amplitude/2, amplitude/2].
ScalarPotential random_potential(const GridDomain& dom, double amplitude, std::uint64_t seed);

struct EigenPairs {
    RVector values;   // ascending
    CMatrix vectors;  // orthonormal columns
};

/// Hermitian matrix realisation of the magnetic Schroedinger operator.
/// Immutable; the eigendecomposition is computed once on first use and
/// shared by copies.
class Hamiltonian {
public:
    Hamiltonian(std::optional<GridDomain> dom, CMatrix matrix);
    static Hamiltonian from_matrix(CMatrix matrix) { return Hamiltonian(std::nullopt, std::move(matrix)); }

    const CMatrix& matrix() const { return matrix_; }
    int size() const { return static_cast<int>(matrix_.rows()); }
    bool has_domain() const { return domain_.has_value(); }
    const GridDomain& domain() const;
    const EigenPairs& eigen() const;

private:
    struct Cache {
        std::once_flag once;
        EigenPairs pairs;
    };
    std::optional<GridDomain> domain_;
    CMatrix matrix_;
    std::shared_ptr<Cache> cache_;
};

Hamiltonian assemble_hamiltonian(const GridDomain& dom, const VectorPotential& a,
                                 const ScalarPotential& v);

/// e^{i chi} H e^{-i chi}; chi is given per interior site.
Hamiltonian gauge_transform(const Hamiltonian& h, std::span<const double> chi);

/// Link values A + (chi(y) - chi(x)) / h; chi is given per box site.
VectorPotential gauge_shift(const GridDomain& dom, const VectorPotential& a,
                            std::span<const double> chi);

const EigenPairs& spectrum(const Hamiltonian& h);
EigenPairs hermitian_eigen(const CMatrix& m);

/// sum_k f(lambda_k) v_k v_k^dagger.
CMatrix apply_function_exact(const Hamiltonian& h, const std::function<Complex(double)>& f);
CMatrix apply_function_exact(const EigenPairs& eig, const std::function<Complex(double)>& f);

/// Interior sites inside the half-open unit cube centred at beta.
std::vector<int> cube_sites(const GridDomain& dom, std::span<const int> beta);
/// Diagonal of the 0/1 projection chi_beta chi_Lambda.
RVector indicator(const GridDomain& dom, std::span<const int> beta);
/// Every cube centre whose cube meets the interior, in lexicographic order.
std::vector<std::vector<int>> covering_cubes(const GridDomain& dom);

double max_abs_entry(const CMatrix& m);

}  // namespace ctlab
