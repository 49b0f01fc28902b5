#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ctlab/ctbounds.hpp"
#include "ctlab/fk.hpp"
#include "ctlab/hscalc.hpp"
#include "ctlab/lattice.hpp"

namespace ctlab {

struct DomainSpec {
    int d = 2;
    std::vector<int> extents;
    double h = 1.0;
    /// Optional sub-box mask lo <= i < hi.
    std::optional<std::vector<int>> mask_lo;
    std::optional<std::vector<int>> mask_hi;
};

struct PotentialSpec {
    std::string kind = "zero";  // zero | constant | harmonic | well | coulomb | random
    double value = 0.0;
    double omega = 1.0;
    double depth = 1.0;
    double radius = 1.0;
    double charge = 1.0;
    double cap = 10.0;
    double amplitude = 1.0;
    std::vector<double> center;  // empty: box centre
    std::optional<std::uint64_t> seed;
};

struct FieldSpec {
    std::string kind = "zero";  // zero | constant | landau | symmetric | random
    std::vector<double> a;      // constant
    double b = 0.0;             // landau, symmetric
    double amplitude = 0.0;     // random
    std::optional<std::uint64_t> seed;
};

struct FunctionSpec {
    std::string kind = "gaussian";  // gaussian | damped-gaussian | bump | zero
    double center = 0.0;
    double width = 1.0;
    double amplitude = 1.0;
    double radius = 1.0;
    std::vector<double> poly{1.0};
};

struct PairsSpec {
    std::string kind = "all";  // all | reference | rays
    double max_distance = 8.0;
    std::vector<std::vector<int>> refs;
    std::vector<int> origin;
    std::vector<std::vector<int>> directions;
};

/// Spectral parameter: either absolute, or E0 + shift (+ i im).
struct ZSpec {
    bool relative = true;
    double shift = -1.0;
    double re = 0.0;
    double im = 0.0;
};

struct AdmissibleSpec {
    ZSpec z;
    double theta1 = 1e-3;
    double lambda0_offset = 1.0;
    std::optional<double> lambda0;  // overrides the offset when given
    std::optional<Branch> branch;
    bool maximize_a0 = true;
    double s = 0.0;
    double a0 = 0.0;
    double margin = 1e-2;
};

struct ConstantsParams {
    AdmissibleSpec admissible;
};

struct CtDecayParams {
    AdmissibleSpec admissible;
    int n = 1;
    double p = 2.0;
    PairsSpec pairs;
    double delta0 = 0.9;  // forced to 1 for n = 1
    double fit_min_distance = 2.0;
    double fit_max_distance = 8.0;
    double calibration_distance = 2.0;
};

struct KernelDecayParams {
    FunctionSpec f;
    double p = 2.0;
    std::vector<int> k_list{1, 2, 3, 4};
    PairsSpec pairs;
    bool use_hs = false;
    ExtensionParams hs;
    double min_distance = 2.0;
    double knee = 4.0;
};

struct HsApplyParams {
    FunctionSpec f;
    std::vector<int> n_list{1, 2, 3};
    ExtensionParams hs;
    bool write_matrix = false;
};

struct PhiSpec {
    std::string kind = "gaussian";  // gaussian | ones | site
    std::vector<double> center;     // empty: box centre
    double width = 0.25;
    std::vector<int> site;  // multi-index for kind = site
};

struct FkParams {
    double t = 0.1;
    McSpec mc;
    PhiSpec phi;
    std::vector<std::vector<int>> sites;  // empty: all interior sites
    bool reference = true;                // also write the expm reference
};

struct SmoothingParams {
    std::vector<double> t_grid;
    double p = 1.0;
    double q = kInf;
    double tol = 1e-10;
};

enum class ExperimentKind { Build, Spectrum, Constants, CtDecay, KernelDecay, HsApply, FkSemigroup, Smoothing };

std::string kind_name(ExperimentKind k);
std::optional<ExperimentKind> parse_kind(const std::string& name);

using ExperimentParams = std::variant<std::monostate, ConstantsParams, CtDecayParams, KernelDecayParams,
                                      HsApplyParams, FkParams, SmoothingParams>;

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Build;
    DomainSpec domain;
    PotentialSpec potential;
    FieldSpec field;
    ExperimentParams params;
    std::string output;  // empty: the --out flag must supply it
    std::uint64_t seed = 0;
};

/// Parses and validates a JSON config. Every field is checked before any
/// numerical work; errors name the offending key path. When the document
/// omits "experiment", `fallback` supplies it.
ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> fallback = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<ExperimentKind> fallback = std::nullopt);

/// Canonical JSON echo with every number printed in shortest round-trip form.
std::string canonical_json(const ExperimentConfig& cfg);

/// Seed for a named random component, derived from the global seed.
std::uint64_t derived_seed(std::uint64_t seed, const std::string& component);

GridDomain make_domain(const DomainSpec& spec);
ScalarPotential make_potential(const GridDomain& dom, const PotentialSpec& spec, std::uint64_t seed);
VectorPotential make_field(const GridDomain& dom, const FieldSpec& spec, std::uint64_t seed);
SmoothFunction make_function(const FunctionSpec& spec);
std::vector<CubePair> make_pairs(const GridDomain& dom, const PairsSpec& spec);

}  // namespace ctlab
