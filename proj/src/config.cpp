#include "ctlab/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ctlab {

using nlohmann::json;

std::string kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Build: return "build";
        case ExperimentKind::Spectrum: return "spectrum";
        case ExperimentKind::Constants: return "constants";
        case ExperimentKind::CtDecay: return "ct-decay";
        case ExperimentKind::KernelDecay: return "kernel-decay";
        case ExperimentKind::HsApply: return "hs-apply";
        case ExperimentKind::FkSemigroup: return "fk-semigroup";
        case ExperimentKind::Smoothing: return "smoothing";
    }
    return "unknown";
}

std::optional<ExperimentKind> parse_kind(const std::string& name) {
    for (auto k : {ExperimentKind::Build, ExperimentKind::Spectrum, ExperimentKind::Constants,
                   ExperimentKind::CtDecay, ExperimentKind::KernelDecay, ExperimentKind::HsApply,
                   ExperimentKind::FkSemigroup, ExperimentKind::Smoothing})
        if (kind_name(k) == name) return k;
    return std::nullopt;
}

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ValidationError(path + ": " + what); }

/// A JSON object with a fixed set of allowed keys and typed getters that
/// report the full key path on error.
class Obj {
public:
    Obj(const json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!ok.count(it.key())) fail(path_.empty() ? "config" : path_, "unknown key '" + it.key() + "'");
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& raw(const char* key) const { return j_.at(key); }
    std::string at(const char* key) const { return join(path_, key); }

    double number(const char* key, double def, bool allow_inf = false) const {
        if (!has(key)) return def;
        return to_number(raw(key), at(key), allow_inf);
    }

    int integer(const char* key, int def) const {
        if (!has(key)) return def;
        return to_int(raw(key), at(key));
    }

    bool boolean(const char* key, bool def) const {
        if (!has(key)) return def;
        if (!raw(key).is_boolean()) fail(at(key), "expected true or false");
        return raw(key).get<bool>();
    }

    std::string string(const char* key, std::string def) const {
        if (!has(key)) return def;
        if (!raw(key).is_string()) fail(at(key), "expected a string");
        return raw(key).get<std::string>();
    }

    std::uint64_t u64(const char* key) const {
        const json& v = raw(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            fail(at(key), "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    std::vector<double> numbers(const char* key) const {
        const json& v = raw(key);
        if (!v.is_array()) fail(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_number(v[i], at(key) + "[" + std::to_string(i) + "]", false));
        return out;
    }

    std::vector<int> ints(const char* key) const { return int_array(raw(key), at(key)); }

    std::vector<std::vector<int>> int_lists(const char* key) const {
        const json& v = raw(key);
        if (!v.is_array()) fail(at(key), "expected an array of integer arrays");
        std::vector<std::vector<int>> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(int_array(v[i], at(key) + "[" + std::to_string(i) + "]"));
        return out;
    }

    static double to_number(const json& v, const std::string& path, bool allow_inf) {
        if (allow_inf && v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity"))
            return kInf;
        if (!v.is_number()) fail(path, allow_inf ? "expected a number or \"inf\"" : "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(path, "expected a finite number");
        return x;
    }

    static int to_int(const json& v, const std::string& path) {
        if (!v.is_number_integer()) fail(path, "expected an integer");
        const auto x = v.get<std::int64_t>();
        if (x < -1000000000 || x > 1000000000) fail(path, "integer out of range");
        return static_cast<int>(x);
    }

    static std::vector<int> int_array(const json& v, const std::string& path) {
        if (!v.is_array()) fail(path, "expected an array of integers");
        std::vector<int> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_int(v[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }

private:
    const json& j_;
    std::string path_;
};

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) fail(path, what);
}

DomainSpec parse_domain(const json& j) {
    Obj o(j, "domain", {"d", "extents", "h", "mask"});
    DomainSpec s;
    require(o.has("d"), "domain.d", "missing");
    s.d = o.integer("d", 2);
    require(s.d >= 2, "domain.d", "dimension d ≥ 2 required (got " + std::to_string(s.d) + ")");
    require(s.d <= 8, "domain.d", "dimension d ≤ 8 supported");
    require(o.has("extents"), "domain.extents", "missing");
    s.extents = o.ints("extents");
    require(static_cast<int>(s.extents.size()) == s.d, "domain.extents", "needs d = " + std::to_string(s.d) + " entries");
    for (int e : s.extents) require(e >= 1, "domain.extents", "entries must be >= 1");
    s.h = o.number("h", 1.0);
    require(s.h > 0.0 && s.h <= 1.0, "domain.h", "spacing must lie in (0, 1]");
    const double m = std::round(1.0 / s.h);
    require(std::abs(m * s.h - 1.0) <= 1e-12, "domain.h", "spacing must equal 1/m for an integer m");
    if (o.has("mask")) {
        Obj mk(o.raw("mask"), "domain.mask", {"lo", "hi"});
        require(mk.has("lo") && mk.has("hi"), "domain.mask", "needs both lo and hi");
        s.mask_lo = mk.ints("lo");
        s.mask_hi = mk.ints("hi");
        require(static_cast<int>(s.mask_lo->size()) == s.d, "domain.mask.lo", "needs d entries");
        require(static_cast<int>(s.mask_hi->size()) == s.d, "domain.mask.hi", "needs d entries");
        for (int i = 0; i < s.d; ++i)
            require(0 <= (*s.mask_lo)[i] && (*s.mask_lo)[i] < (*s.mask_hi)[i] && (*s.mask_hi)[i] <= s.extents[i],
                    "domain.mask", "needs 0 <= lo < hi <= extent on every axis");
    }
    return s;
}

std::vector<double> parse_center(const Obj& o, int d) {
    if (!o.has("center")) return {};
    auto c = o.numbers("center");
    require(static_cast<int>(c.size()) == d, o.at("center"), "needs d entries");
    return c;
}

PotentialSpec parse_potential(const json& j, int d) {
    PotentialSpec s;
    if (!j.is_object() || !j.contains("kind")) fail("potential", "needs a 'kind'");
    if (!j.at("kind").is_string()) fail("potential.kind", "expected a string");
    s.kind = j.at("kind").get<std::string>();
    if (s.kind == "zero") {
        Obj o(j, "potential", {"kind"});
    } else if (s.kind == "constant") {
        Obj o(j, "potential", {"kind", "value"});
        s.value = o.number("value", 0.0);
    } else if (s.kind == "harmonic") {
        Obj o(j, "potential", {"kind", "omega", "center"});
        s.omega = o.number("omega", 1.0);
        require(s.omega > 0.0, "potential.omega", "must be > 0");
        s.center = parse_center(o, d);
    } else if (s.kind == "well") {
        Obj o(j, "potential", {"kind", "depth", "radius", "center"});
        s.depth = o.number("depth", 1.0);
        s.radius = o.number("radius", 1.0);
        require(s.radius > 0.0, "potential.radius", "must be > 0");
        s.center = parse_center(o, d);
    } else if (s.kind == "coulomb") {
        Obj o(j, "potential", {"kind", "charge", "cap", "center"});
        s.charge = o.number("charge", 1.0);
        s.cap = o.number("cap", 10.0);
        require(s.cap > 0.0, "potential.cap", "must be > 0");
        s.center = parse_center(o, d);
    } else if (s.kind == "random") {
        Obj o(j, "potential", {"kind", "amplitude", "seed"});
        s.amplitude = o.number("amplitude", 1.0);
        require(s.amplitude >= 0.0, "potential.amplitude", "must be >= 0");
        if (o.has("seed")) s.seed = o.u64("seed");
    } else {
        fail("potential.kind", "unknown kind '" + s.kind + "' (zero, constant, harmonic, well, coulomb, random)");
    }
    return s;
}

FieldSpec parse_field(const json& j, int d) {
    FieldSpec s;
    if (!j.is_object() || !j.contains("kind")) fail("field", "needs a 'kind'");
    if (!j.at("kind").is_string()) fail("field.kind", "expected a string");
    s.kind = j.at("kind").get<std::string>();
    if (s.kind == "zero") {
        Obj o(j, "field", {"kind"});
    } else if (s.kind == "constant") {
        Obj o(j, "field", {"kind", "a"});
        require(o.has("a"), "field.a", "missing");
        s.a = o.numbers("a");
        require(static_cast<int>(s.a.size()) == d, "field.a", "needs d entries");
    } else if (s.kind == "landau" || s.kind == "symmetric") {
        Obj o(j, "field", {"kind", "b"});
        s.b = o.number("b", 0.0);
    } else if (s.kind == "random") {
        Obj o(j, "field", {"kind", "amplitude", "seed"});
        s.amplitude = o.number("amplitude", 0.0);
        require(s.amplitude >= 0.0, "field.amplitude", "must be >= 0");
        if (o.has("seed")) s.seed = o.u64("seed");
    } else {
        fail("field.kind", "unknown kind '" + s.kind + "' (zero, constant, landau, symmetric, random)");
    }
    return s;
}

FunctionSpec parse_function(const json& j, const std::string& path) {
    FunctionSpec s;
    if (!j.is_object() || !j.contains("kind")) fail(path, "needs a 'kind'");
    if (!j.at("kind").is_string()) fail(path + ".kind", "expected a string");
    s.kind = j.at("kind").get<std::string>();
    if (s.kind == "gaussian") {
        Obj o(j, path, {"kind", "center", "width", "amplitude"});
        s.center = o.number("center", 0.0);
        s.width = o.number("width", 1.0);
        s.amplitude = o.number("amplitude", 1.0);
        require(s.width > 0.0, o.at("width"), "must be > 0");
    } else if (s.kind == "damped-gaussian") {
        Obj o(j, path, {"kind", "poly", "center", "width"});
        if (o.has("poly")) s.poly = o.numbers("poly");
        require(!s.poly.empty(), o.at("poly"), "needs at least one coefficient");
        s.center = o.number("center", 0.0);
        s.width = o.number("width", 1.0);
        require(s.width > 0.0, o.at("width"), "must be > 0");
    } else if (s.kind == "bump") {
        Obj o(j, path, {"kind", "center", "radius"});
        s.center = o.number("center", 0.0);
        s.radius = o.number("radius", 1.0);
        require(s.radius > 0.0, o.at("radius"), "must be > 0");
    } else if (s.kind == "zero") {
        Obj o(j, path, {"kind"});
    } else {
        fail(path + ".kind", "unknown kind '" + s.kind + "' (gaussian, damped-gaussian, bump, zero)");
    }
    return s;
}

PairsSpec parse_pairs(const json& j, const std::string& path, const DomainSpec& dom) {
    PairsSpec s;
    if (!j.is_object() || !j.contains("kind")) fail(path, "needs a 'kind'");
    if (!j.at("kind").is_string()) fail(path + ".kind", "expected a string");
    s.kind = j.at("kind").get<std::string>();
    auto check_dim = [&](const std::vector<int>& v, const std::string& where) {
        require(static_cast<int>(v.size()) == dom.d, where, "needs d entries");
    };
    if (s.kind == "all") {
        Obj o(j, path, {"kind", "max_distance"});
        s.max_distance = o.number("max_distance", 8.0);
    } else if (s.kind == "reference") {
        Obj o(j, path, {"kind", "refs", "max_distance"});
        require(o.has("refs"), o.at("refs"), "missing");
        s.refs = o.int_lists("refs");
        require(!s.refs.empty(), o.at("refs"), "must not be empty");
        for (const auto& r : s.refs) check_dim(r, o.at("refs"));
        s.max_distance = o.number("max_distance", 8.0);
    } else if (s.kind == "rays") {
        Obj o(j, path, {"kind", "origin", "directions"});
        require(o.has("origin") && o.has("directions"), path, "rays need origin and directions");
        s.origin = o.ints("origin");
        check_dim(s.origin, o.at("origin"));
        s.directions = o.int_lists("directions");
        require(!s.directions.empty(), o.at("directions"), "must not be empty");
        for (const auto& dir : s.directions) {
            check_dim(dir, o.at("directions"));
            bool nonzero = false;
            for (int x : dir) nonzero |= x != 0;
            require(nonzero, o.at("directions"), "directions must be nonzero");
        }
    } else {
        fail(path + ".kind", "unknown kind '" + s.kind + "' (all, reference, rays)");
    }
    if (s.kind != "rays") require(s.max_distance >= 1.0, path + ".max_distance", "must be >= 1");
    return s;
}

ZSpec parse_z(const json& j, const std::string& path) {
    Obj o(j, path, {"shift", "re", "im"});
    ZSpec z;
    require(!(o.has("shift") && o.has("re")), path, "give either shift (relative to E0) or re, not both");
    if (o.has("re")) {
        z.relative = false;
        z.re = o.number("re", 0.0);
    } else {
        z.shift = o.number("shift", -1.0);
    }
    z.im = o.number("im", 0.0);
    return z;
}

#define CTLAB_ADMISSIBLE_KEYS "z", "theta1", "lambda0_offset", "lambda0", "branch", "maximize_a0", "s", "a0", "margin"

AdmissibleSpec parse_admissible(const Obj& o) {
    AdmissibleSpec a;
    if (o.has("z")) a.z = parse_z(o.raw("z"), o.at("z"));
    a.theta1 = o.number("theta1", 1e-3);
    require(a.theta1 > 0.0 && a.theta1 < 1.0, o.at("theta1"), "Theta1 must lie in (0, 1)");
    a.lambda0_offset = o.number("lambda0_offset", 1.0);
    require(a.lambda0_offset > 0.0, o.at("lambda0_offset"), "must be > 0 so that lambda0 < min{-Theta2, E0}");
    if (o.has("lambda0")) a.lambda0 = o.number("lambda0", 0.0);
    const std::string b = o.string("branch", "auto");
    if (b == "condition-1") a.branch = Branch::Condition1;
    else if (b == "condition-2") a.branch = Branch::Condition2;
    else require(b == "auto", o.at("branch"), "expected condition-1, condition-2 or auto");
    a.maximize_a0 = o.boolean("maximize_a0", true);
    if (!a.maximize_a0) {
        require(o.has("s") && o.has("a0"), o.at("maximize_a0"), "false requires explicit s and a0");
        require(a.branch.has_value(), o.at("branch"), "explicit s and a0 need a named branch");
    } else {
        require(!o.has("s") && !o.has("a0"), o.at("maximize_a0"), "s and a0 are only read when maximize_a0 is false");
    }
    a.s = o.number("s", 0.0);
    a.a0 = o.number("a0", 0.0);
    if (!a.maximize_a0) {
        require(a.s > 0.0, o.at("s"), "must be > 0");
        require(a.a0 > 0.0, o.at("a0"), "must be > 0");
    }
    a.margin = o.number("margin", 1e-2);
    require(a.margin > 0.0 && a.margin < 1.0, o.at("margin"), "must lie in (0, 1)");
    return a;
}

ExtensionParams parse_hs(const Obj& o, int default_n) {
    ExtensionParams e;
    e.n = o.integer("n", default_n);
    e.tau = o.string("tau", kCutoffName);
    require(e.tau == kCutoffName, o.at("tau"), std::string("unknown cutoff (available: ") + kCutoffName + ")");
    e.u_truncation = o.number("u_truncation", 0.0);
    require(e.u_truncation >= 0.0, o.at("u_truncation"), "must be >= 0 (0 selects it automatically)");
    e.tolerance = o.number("tolerance", 1e-8);
    require(e.tolerance > 0.0, o.at("tolerance"), "must be > 0");
    e.panel_budget = o.integer("panel_budget", 40000);
    require(e.panel_budget >= 1, o.at("panel_budget"), "must be >= 1");
    return e;
}

void check_order(const ExtensionParams& e, const std::string& path) {
    require(e.n >= 1, path, "extension order n must be >= 1");
    require(e.n + 1 <= 16, path, "extension order n needs n + 1 <= 16 derivatives");
}

ExperimentParams parse_params(ExperimentKind kind, const json& j, const DomainSpec& dom) {
    const int d = dom.d;
    switch (kind) {
        case ExperimentKind::Build:
        case ExperimentKind::Spectrum: {
            Obj o(j, "params", {});
            return std::monostate{};
        }
        case ExperimentKind::Constants: {
            Obj o(j, "params", {CTLAB_ADMISSIBLE_KEYS});
            return ConstantsParams{parse_admissible(o)};
        }
        case ExperimentKind::CtDecay: {
            Obj o(j, "params", {CTLAB_ADMISSIBLE_KEYS, "n", "p", "pairs", "delta0", "fit_min_distance",
                                "fit_max_distance", "calibration_distance"});
            CtDecayParams c;
            c.admissible = parse_admissible(o);
            c.n = o.integer("n", 1);
            require(c.n >= 1, o.at("n"), "resolvent power n must be >= 1");
            c.p = o.number("p", 2.0);
            require(c.p >= 1.0, o.at("p"), "must be >= 1");
            require(c.p > d / (2.0 * c.n), o.at("p"),
                    "p > d/(2n) required (got p = " + std::to_string(c.p) + ", d = " + std::to_string(d) +
                        ", n = " + std::to_string(c.n) + ")");
            if (o.has("pairs")) c.pairs = parse_pairs(o.raw("pairs"), o.at("pairs"), dom);
            c.delta0 = o.number("delta0", c.n == 1 ? 1.0 : 0.9);
            if (c.n == 1) require(c.delta0 == 1.0, o.at("delta0"), "is fixed to 1 for n = 1");
            else require(c.delta0 > 0.0 && c.delta0 < 1.0, o.at("delta0"), "must lie in (0, 1) for n >= 2");
            c.fit_min_distance = o.number("fit_min_distance", 2.0);
            c.fit_max_distance = o.number("fit_max_distance", 8.0, true);
            require(c.fit_min_distance >= 0.0 && c.fit_max_distance > c.fit_min_distance, o.at("fit_max_distance"),
                    "fit range must satisfy 0 <= fit_min_distance < fit_max_distance");
            c.calibration_distance = o.number("calibration_distance", 2.0);
            require(c.calibration_distance > 0.0, o.at("calibration_distance"), "must be > 0");
            return c;
        }
        case ExperimentKind::KernelDecay: {
            Obj o(j, "params", {"f", "p", "k_list", "pairs", "use_hs", "hs", "min_distance", "knee"});
            KernelDecayParams k;
            if (o.has("f")) k.f = parse_function(o.raw("f"), o.at("f"));
            k.p = o.number("p", 2.0);
            require(k.p >= 1.0, o.at("p"), "must be >= 1");
            require(k.p > d / 2.0, o.at("p"),
                    "p > d/2 required (got p = " + std::to_string(k.p) + ", d = " + std::to_string(d) + ")");
            if (o.has("k_list")) k.k_list = o.ints("k_list");
            require(!k.k_list.empty(), o.at("k_list"), "must not be empty");
            for (int x : k.k_list) require(x >= 0, o.at("k_list"), "entries must be >= 0");
            if (o.has("pairs")) k.pairs = parse_pairs(o.raw("pairs"), o.at("pairs"), dom);
            k.use_hs = o.boolean("use_hs", false);
            if (o.has("hs")) {
                Obj hs(o.raw("hs"), o.at("hs"), {"n", "tau", "u_truncation", "tolerance", "panel_budget"});
                k.hs = parse_hs(hs, 2);
            }
            check_order(k.hs, o.at("hs") + ".n");
            k.min_distance = o.number("min_distance", 2.0);
            require(k.min_distance >= 1.0, o.at("min_distance"), "must be >= 1 (beta = gamma pairs carry no weight)");
            k.knee = o.number("knee", 4.0);
            require(k.knee >= k.min_distance, o.at("knee"), "must be >= min_distance");
            return k;
        }
        case ExperimentKind::HsApply: {
            Obj o(j, "params", {"f", "n_list", "tau", "u_truncation", "tolerance", "panel_budget", "write_matrix"});
            HsApplyParams h;
            if (o.has("f")) h.f = parse_function(o.raw("f"), o.at("f"));
            if (o.has("n_list")) h.n_list = o.ints("n_list");
            require(!h.n_list.empty(), o.at("n_list"), "must not be empty");
            h.hs = parse_hs(o, 2);
            for (int n : h.n_list) {
                ExtensionParams e = h.hs;
                e.n = n;
                check_order(e, o.at("n_list"));
            }
            h.write_matrix = o.boolean("write_matrix", false);
            return h;
        }
        case ExperimentKind::FkSemigroup: {
            Obj o(j, "params", {"t", "count", "dt", "phi", "sites", "reference"});
            FkParams f;
            f.t = o.number("t", 0.1);
            require(f.t > 0.0, o.at("t"), "must be > 0");
            f.mc.count = o.integer("count", 10000);
            require(f.mc.count >= 1, o.at("count"), "must be >= 1");
            f.mc.dt = o.number("dt", 0.01);
            require(f.mc.dt > 0.0 && f.mc.dt <= f.t, o.at("dt"), "must satisfy 0 < dt <= t");
            if (o.has("phi")) {
                const json& pj = o.raw("phi");
                if (!pj.is_object() || !pj.contains("kind") || !pj.at("kind").is_string())
                    fail(o.at("phi"), "needs a string 'kind'");
                f.phi.kind = pj.at("kind").get<std::string>();
                if (f.phi.kind == "gaussian") {
                    Obj po(pj, o.at("phi"), {"kind", "center", "width"});
                    f.phi.center = parse_center(po, d);
                    f.phi.width = po.number("width", 0.25);
                    require(f.phi.width > 0.0, po.at("width"), "must be > 0");
                } else if (f.phi.kind == "ones") {
                    Obj po(pj, o.at("phi"), {"kind"});
                } else if (f.phi.kind == "site") {
                    Obj po(pj, o.at("phi"), {"kind", "site"});
                    require(po.has("site"), po.at("site"), "missing");
                    f.phi.site = po.ints("site");
                    require(static_cast<int>(f.phi.site.size()) == d, po.at("site"), "needs d entries");
                } else {
                    fail(o.at("phi") + ".kind", "unknown kind '" + f.phi.kind + "' (gaussian, ones, site)");
                }
            }
            if (o.has("sites")) {
                f.sites = o.int_lists("sites");
                for (const auto& s : f.sites) {
                    require(static_cast<int>(s.size()) == d, o.at("sites"), "each site needs d entries");
                    for (int i = 0; i < d; ++i)
                        require(0 <= s[i] && s[i] < dom.extents[i], o.at("sites"), "site outside the box");
                }
            }
            f.reference = o.boolean("reference", true);
            return f;
        }
        case ExperimentKind::Smoothing: {
            Obj o(j, "params", {"t_grid", "p", "q", "tol"});
            SmoothingParams s;
            require(o.has("t_grid"), o.at("t_grid"), "missing");
            const json& tg = o.raw("t_grid");
            if (tg.is_array()) {
                s.t_grid = o.numbers("t_grid");
            } else {
                Obj g(tg, o.at("t_grid"), {"t_min", "t_max", "count"});
                const double lo = g.number("t_min", 0.05), hi = g.number("t_max", 2.0);
                const int n = g.integer("count", 20);
                require(lo > 0.0 && hi > lo, o.at("t_grid"), "needs 0 < t_min < t_max");
                require(n >= 2, g.at("count"), "must be >= 2");
                for (int i = 0; i < n; ++i) s.t_grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
            }
            require(!s.t_grid.empty(), o.at("t_grid"), "must not be empty");
            for (double t : s.t_grid) require(t > 0.0, o.at("t_grid"), "entries must be > 0");
            s.p = o.number("p", 1.0, true);
            s.q = o.number("q", kInf, true);
            require(s.p >= 1.0 && s.q >= 1.0, o.at("p"), "p and q must be >= 1");
            require(s.p == 1.0 || s.q == kInf || (s.p == 2.0 && s.q == 2.0), o.at("q"),
                    "only (1, q), (p, inf) and (2, 2) norms are exactly computable");
            s.tol = o.number("tol", 1e-10);
            require(s.tol >= 0.0, o.at("tol"), "must be >= 0");
            return s;
        }
    }
    return std::monostate{};
}

json number_json(double x) { return std::isinf(x) ? json(x > 0 ? "inf" : "-inf") : json(x); }

json domain_json(const DomainSpec& s) {
    json j{{"d", s.d}, {"extents", s.extents}, {"h", s.h}};
    if (s.mask_lo) j["mask"] = {{"lo", *s.mask_lo}, {"hi", *s.mask_hi}};
    return j;
}

json potential_json(const PotentialSpec& s) {
    json j{{"kind", s.kind}};
    if (s.kind == "constant") j["value"] = s.value;
    if (s.kind == "harmonic") j["omega"] = s.omega;
    if (s.kind == "well") {
        j["depth"] = s.depth;
        j["radius"] = s.radius;
    }
    if (s.kind == "coulomb") {
        j["charge"] = s.charge;
        j["cap"] = s.cap;
    }
    if (s.kind == "harmonic" || s.kind == "well" || s.kind == "coulomb") j["center"] = s.center;
    if (s.kind == "random") {
        j["amplitude"] = s.amplitude;
        if (s.seed) j["seed"] = *s.seed;
    }
    return j;
}

json field_json(const FieldSpec& s) {
    json j{{"kind", s.kind}};
    if (s.kind == "constant") j["a"] = s.a;
    if (s.kind == "landau" || s.kind == "symmetric") j["b"] = s.b;
    if (s.kind == "random") {
        j["amplitude"] = s.amplitude;
        if (s.seed) j["seed"] = *s.seed;
    }
    return j;
}

json function_json(const FunctionSpec& s) {
    json j{{"kind", s.kind}};
    if (s.kind == "gaussian") j.update({{"center", s.center}, {"width", s.width}, {"amplitude", s.amplitude}});
    if (s.kind == "damped-gaussian") j.update({{"poly", s.poly}, {"center", s.center}, {"width", s.width}});
    if (s.kind == "bump") j.update({{"center", s.center}, {"radius", s.radius}});
    return j;
}

json pairs_json(const PairsSpec& s) {
    json j{{"kind", s.kind}};
    if (s.kind == "rays") {
        j["origin"] = s.origin;
        j["directions"] = s.directions;
    } else {
        j["max_distance"] = s.max_distance;
        if (s.kind == "reference") j["refs"] = s.refs;
    }
    return j;
}

void admissible_json(json& j, const AdmissibleSpec& a) {
    j["z"] = a.z.relative ? json{{"shift", a.z.shift}, {"im", a.z.im}} : json{{"re", a.z.re}, {"im", a.z.im}};
    j["theta1"] = a.theta1;
    j["lambda0_offset"] = a.lambda0_offset;
    if (a.lambda0) j["lambda0"] = *a.lambda0;
    j["branch"] = a.branch ? branch_name(*a.branch) : "auto";
    j["maximize_a0"] = a.maximize_a0;
    if (!a.maximize_a0) {
        j["s"] = a.s;
        j["a0"] = a.a0;
    }
    j["margin"] = a.margin;
}

json hs_json(const ExtensionParams& e) {
    return {{"n", e.n}, {"tau", e.tau}, {"u_truncation", e.u_truncation}, {"tolerance", e.tolerance},
            {"panel_budget", e.panel_budget}};
}

struct ParamsJson {
    json operator()(const std::monostate&) const { return json::object(); }
    json operator()(const ConstantsParams& c) const {
        json j;
        admissible_json(j, c.admissible);
        return j;
    }
    json operator()(const CtDecayParams& c) const {
        json j;
        admissible_json(j, c.admissible);
        j.update({{"n", c.n}, {"p", c.p}, {"pairs", pairs_json(c.pairs)}, {"delta0", c.delta0},
                  {"fit_min_distance", c.fit_min_distance}, {"fit_max_distance", number_json(c.fit_max_distance)},
                  {"calibration_distance", c.calibration_distance}});
        return j;
    }
    json operator()(const KernelDecayParams& k) const {
        return {{"f", function_json(k.f)}, {"p", k.p}, {"k_list", k.k_list}, {"pairs", pairs_json(k.pairs)},
                {"use_hs", k.use_hs}, {"hs", hs_json(k.hs)}, {"min_distance", k.min_distance}, {"knee", k.knee}};
    }
    json operator()(const HsApplyParams& h) const {
        json j = hs_json(h.hs);
        j.erase("n");
        j.update({{"f", function_json(h.f)}, {"n_list", h.n_list}, {"write_matrix", h.write_matrix}});
        return j;
    }
    json operator()(const FkParams& f) const {
        json phi{{"kind", f.phi.kind}};
        if (f.phi.kind == "gaussian") {
            phi["center"] = f.phi.center;
            phi["width"] = f.phi.width;
        }
        if (f.phi.kind == "site") phi["site"] = f.phi.site;
        return {{"t", f.t}, {"count", f.mc.count}, {"dt", f.mc.dt}, {"phi", phi}, {"sites", f.sites},
                {"reference", f.reference}};
    }
    json operator()(const SmoothingParams& s) const {
        return {{"t_grid", s.t_grid}, {"p", number_json(s.p)}, {"q", number_json(s.q)}, {"tol", s.tol}};
    }
};

// splitmix64 finaliser.
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> fallback) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: malformed JSON: ") + e.what());
    }
    Obj top(j, "", {"experiment", "domain", "potential", "field", "params", "output", "seed"});
    ExperimentConfig cfg;
    if (top.has("experiment")) {
        const std::string name = top.string("experiment", "");
        auto k = parse_kind(name);
        if (!k)
            fail("experiment", "unknown experiment '" + name +
                                   "' (build, spectrum, constants, ct-decay, kernel-decay, hs-apply, fk-semigroup, "
                                   "smoothing)");
        cfg.kind = *k;
    } else if (fallback) {
        cfg.kind = *fallback;
    } else {
        fail("experiment", "missing");
    }
    if (!top.has("domain")) fail("domain", "missing");
    cfg.domain = parse_domain(top.raw("domain"));
    if (top.has("potential")) cfg.potential = parse_potential(top.raw("potential"), cfg.domain.d);
    if (top.has("field")) cfg.field = parse_field(top.raw("field"), cfg.domain.d);
    cfg.params = parse_params(cfg.kind, top.has("params") ? top.raw("params") : json::object(), cfg.domain);
    cfg.output = top.string("output", "");
    if (top.has("seed")) cfg.seed = top.u64("seed");

    if (cfg.field.kind == "landau" || cfg.field.kind == "symmetric")
        require(cfg.domain.d >= 2, "field.kind", "needs d >= 2");
    if (cfg.kind == ExperimentKind::FkSemigroup) {
        require(cfg.field.kind != "random", "field.kind",
                "the path integral needs a continuum vector potential; 'random' is lattice-only");
        require(cfg.potential.kind != "random", "potential.kind",
                "the path integral needs a continuum potential; 'random' is lattice-only");
        const auto& f = std::get<FkParams>(cfg.params);
        if (f.phi.kind == "site")
            for (int i = 0; i < cfg.domain.d; ++i)
                require(0 <= f.phi.site[i] && f.phi.site[i] < cfg.domain.extents[i], "params.phi.site",
                        "site outside the box");
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<ExperimentKind> fallback) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config: cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), fallback);
}

std::string canonical_json(const ExperimentConfig& cfg) {
    json j{{"experiment", kind_name(cfg.kind)},
           {"domain", domain_json(cfg.domain)},
           {"potential", potential_json(cfg.potential)},
           {"field", field_json(cfg.field)},
           {"params", std::visit(ParamsJson{}, cfg.params)},
           {"seed", cfg.seed}};
    if (!cfg.output.empty()) j["output"] = cfg.output;
    return j.dump(2);
}

std::uint64_t derived_seed(std::uint64_t seed, const std::string& component) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the component name
    for (unsigned char c : component) h = (h ^ c) * 0x100000001b3ULL;
    return mix(mix(seed) ^ h);
}

GridDomain make_domain(const DomainSpec& spec) {
    std::optional<std::vector<bool>> mask;
    if (spec.mask_lo) mask = box_mask(spec.extents, *spec.mask_lo, *spec.mask_hi);
    return build_domain(spec.d, spec.extents, spec.h, std::move(mask));
}

namespace {

std::vector<double> center_or_mid(const GridDomain& dom, const std::vector<double>& c) {
    if (!c.empty()) return c;
    std::vector<double> mid;
    for (int e : dom.extents()) mid.push_back(0.5 * (dom.coordinate(0) + dom.coordinate(e - 1)));
    return mid;
}

}  // namespace

ScalarPotential make_potential(const GridDomain& dom, const PotentialSpec& s, std::uint64_t seed) {
    if (s.kind == "zero") return zero_potential(dom);
    if (s.kind == "constant") return constant_potential(dom, s.value);
    const auto c = center_or_mid(dom, s.center);
    if (s.kind == "harmonic") return harmonic_potential(dom, s.omega, c);
    if (s.kind == "well") return well_potential(dom, s.depth, s.radius, c);
    if (s.kind == "coulomb") return coulomb_potential(dom, s.charge, s.cap, c);
    if (s.kind == "random") return random_potential(dom, s.amplitude, s.seed.value_or(derived_seed(seed, "potential")));
    throw ValidationError("potential.kind: unknown kind '" + s.kind + "'");
}

VectorPotential make_field(const GridDomain& dom, const FieldSpec& s, std::uint64_t seed) {
    if (s.kind == "zero") return zero_field(dom);
    if (s.kind == "constant") return constant_field(dom, s.a);
    if (s.kind == "landau") return landau_field(dom, s.b);
    if (s.kind == "symmetric") return symmetric_field(dom, s.b);
    if (s.kind == "random") return random_field(dom, s.amplitude, s.seed.value_or(derived_seed(seed, "field")));
    throw ValidationError("field.kind: unknown kind '" + s.kind + "'");
}

SmoothFunction make_function(const FunctionSpec& s) {
    if (s.kind == "gaussian") return gaussian(s.center, s.width, s.amplitude);
    if (s.kind == "damped-gaussian") return damped_gaussian(s.poly, s.center, s.width);
    if (s.kind == "bump") return bump(s.center, s.radius);
    if (s.kind == "zero") return zero_function();
    throw ValidationError("f.kind: unknown kind '" + s.kind + "'");
}

std::vector<CubePair> make_pairs(const GridDomain& dom, const PairsSpec& s) {
    if (s.kind == "all") return all_cube_pairs(dom, s.max_distance);
    if (s.kind == "reference") return reference_pairs(dom, s.refs, s.max_distance);
    if (s.kind == "rays") return ray_pairs(dom, s.origin, s.directions);
    throw ValidationError("pairs.kind: unknown kind '" + s.kind + "'");
}

}  // namespace ctlab
