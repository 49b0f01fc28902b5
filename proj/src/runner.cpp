#include "ctlab/runner.hpp"

#include <ostream>

#include "ctlab/output.hpp"

namespace ctlab {

namespace {

std::string yes(bool b) { return b ? "true" : "false"; }

class KeyValue {
public:
    void add(const std::string& k, const std::string& v) { t_.add({k, v}); }
    void add(const std::string& k, double v) { add(k, format_number(v)); }
    void add(const std::string& k, int v) { add(k, std::to_string(v)); }
    void add(const std::string& k, bool v) { add(k, yes(v)); }
    const CsvTable& table() const { return t_; }

private:
    CsvTable t_{{"key", "value"}, {}};
};

struct Context {
    const ExperimentConfig& cfg;
    std::uint64_t seed;
    std::filesystem::path dir;
    std::ostream* log;
    std::vector<std::filesystem::path> files;

    void note(const std::string& s) const {
        if (log) *log << "[" << kind_name(cfg.kind) << "] " << s << std::endl;
    }
    void save(const CsvTable& t, const std::string& name) {
        t.write(dir / name);
        files.push_back(dir / name);
        note("wrote " + name + " (" + std::to_string(t.rows.size()) + " rows)");
    }
};

struct System {
    GridDomain dom;
    VectorPotential a;
    ScalarPotential v;
    Hamiltonian h;
};

System build_system(const Context& ctx) {
    GridDomain dom = make_domain(ctx.cfg.domain);
    VectorPotential a = make_field(dom, ctx.cfg.field, ctx.seed);
    ScalarPotential v = make_potential(dom, ctx.cfg.potential, ctx.seed);
    Hamiltonian h = assemble_hamiltonian(dom, a, v);
    ctx.note(std::to_string(dom.interior_count()) + " interior sites, field " + ctx.cfg.field.kind + ", potential " +
             ctx.cfg.potential.kind);
    return {std::move(dom), std::move(a), std::move(v), std::move(h)};
}

struct Admissible {
    AdmissibleParams params;
    Complex z;
};

Admissible resolve_admissible(const System& s, const AdmissibleSpec& spec) {
    const FormBound fb = form_bound_constants(s.v, spec.theta1);
    const GroundState gs = e0_lambda0(s.v, s.dom, fb.theta2, spec.lambda0_offset);
    double lambda0 = gs.lambda0;
    if (spec.lambda0) {
        const double m = std::min(-fb.theta2, gs.e0);
        if (!(*spec.lambda0 < m))
            throw ValidationError("params.lambda0: lambda0 < min{-Theta2, E0} violated (lambda0 = " +
                                  format_number(*spec.lambda0) + ", min{-Theta2, E0} = " + format_number(m) + ")");
        lambda0 = *spec.lambda0;
    }
    const Complex z = spec.z.relative ? Complex(gs.e0 + spec.z.shift, spec.z.im) : Complex(spec.z.re, spec.z.im);
    AdmissibleRequest req;
    req.branch = spec.branch;
    req.maximize_a0 = spec.maximize_a0;
    req.s = spec.s;
    req.a0 = spec.a0;
    req.margin = spec.margin;
    const auto& ev = s.h.eigen().values;
    return {admissible_params({ev.data(), static_cast<std::size_t>(ev.size())}, z, lambda0, spec.theta1, fb.theta2,
                              gs.e0, req),
            z};
}

void admissible_rows(KeyValue& kv, const Admissible& ad) {
    const auto& p = ad.params;
    kv.add("z_re", ad.z.real());
    kv.add("z_im", ad.z.imag());
    kv.add("e0", p.e0);
    kv.add("theta1", p.theta1);
    kv.add("theta2", p.theta2);
    kv.add("lambda0", p.lambda0);
    kv.add("delta", p.delta);
    kv.add("c_z", p.c_z);
    kv.add("branch", branch_name(p.branch));
    kv.add("s", p.s);
    kv.add("a0", p.a0);
    kv.add("xi1", p.xi1);
    kv.add("xi2", p.xi2);
    kv.add("c_star", p.c_star);
}

void run_build(Context& ctx, const System& s) {
    KeyValue kv;
    const CMatrix& m = s.h.matrix();
    kv.add("d", s.dom.dim());
    kv.add("h", s.dom.spacing());
    kv.add("box_sites", s.dom.box_size());
    kv.add("interior_sites", s.dom.interior_count());
    kv.add("field", ctx.cfg.field.kind);
    kv.add("potential", ctx.cfg.potential.kind);
    double vmin = kInf, vmax = -kInf;
    for (int i = 0; i < s.dom.interior_count(); ++i) {
        vmin = std::min(vmin, s.v[s.dom.box_index(i)]);
        vmax = std::max(vmax, s.v[s.dom.box_index(i)]);
    }
    kv.add("v_min", vmin);
    kv.add("v_max", vmax);
    int nonzeros = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) nonzeros += m(i, j) != Complex(0.0);
    kv.add("nonzeros", nonzeros);
    kv.add("hermiticity_residual", max_abs_entry(m - m.adjoint()));
    kv.add("diagonal_min", m.diagonal().real().minCoeff());
    kv.add("diagonal_max", m.diagonal().real().maxCoeff());
    ctx.save(kv.table(), "build.csv");
}

void run_spectrum(Context& ctx, const System& s) {
    CsvTable t{{"index", "eigenvalue"}, {}};
    const auto& ev = s.h.eigen().values;
    for (Eigen::Index i = 0; i < ev.size(); ++i) t.add({std::to_string(i), format_number(ev[i])});
    ctx.save(t, "spectrum.csv");
}

void run_constants(Context& ctx, const System& s, const ConstantsParams& cp) {
    const Admissible ad = resolve_admissible(s, cp.admissible);
    const auto& p = ad.params;
    ctx.note("branch " + branch_name(p.branch) + ", a0 = " + format_number(p.a0));
    KeyValue kv;
    admissible_rows(kv, ad);
    kv.add("s_upper", s_upper(p.theta1, p.c_z));
    const A0Window w = a0_squared_window(p.branch, p.s, p.lambda0, p.theta1, p.theta2, p.delta, p.c_z);
    kv.add("a0_squared_lower", w.lower);
    kv.add("a0_squared_upper", w.upper);
    kv.add("a0_squared_upper_strict", w.upper_strict);
    if (auto bound = c_z_region_bound(ad.z, p.lambda0)) kv.add("c_z_region_bound", *bound);
    std::vector<double> a(s.dom.dim(), 0.0);
    a[0] = p.a0;
    const UVReport uv = verify_uv_inverse(s.h, a, ad.z, p);
    kv.add("uv_premise_ok", uv.premise_ok);
    kv.add("norm_b", uv.norm_b);
    kv.add("norm_b_bound", uv.norm_b_bound);
    kv.add("factorization_residual", uv.factorization_residual);
    kv.add("u_inverse_norm", uv.u_inverse_norm);
    kv.add("v_norm", uv.v_norm);
    kv.add("inverse_norm", uv.inverse_norm);
    kv.add("uv_ok", uv.ok());
    ctx.save(kv.table(), "constants.csv");
}

void run_ct_decay(Context& ctx, const System& s, const CtDecayParams& cp) {
    const Admissible ad = resolve_admissible(s, cp.admissible);
    const auto& p = ad.params;
    const auto pairs = make_pairs(s.dom, cp.pairs);
    ctx.note(std::to_string(pairs.size()) + " cube pairs, n = " + std::to_string(cp.n) + ", a0 = " +
             format_number(p.a0));
    CtDecayOptions opt;
    opt.delta0 = cp.delta0;
    opt.fit_min_distance = cp.fit_min_distance;
    opt.fit_max_distance = cp.fit_max_distance;
    opt.calibration_distance = cp.calibration_distance;
    const CtDecayResult res = ct_decay_experiment(s.h, ad.z, cp.n, cp.p, pairs, p, opt);

    CsvTable t{{"beta", "gamma", "distance", "p", "n", "norm", "predicted_bound", "branch", "a0", "s", "c_star"}, {}};
    const std::string branch = branch_name(p.branch);
    for (std::size_t i = 0; i < res.norms.size(); ++i) {
        const auto& b = res.norms[i];
        t.add({format_index(b.beta), format_index(b.gamma), format_number(b.distance), format_number(b.p),
               std::to_string(b.n), format_number(b.value), format_number(res.predicted[i]), branch,
               format_number(p.a0), format_number(p.s), format_number(p.c_star)});
    }
    // Fit summary: norm holds the fitted rate, predicted_bound the expected rate delta0 * a0.
    t.add({"fit", "", "", format_number(cp.p), std::to_string(cp.n), format_number(res.fit.rate),
           format_number(res.expected_rate), branch, format_number(p.a0), format_number(p.s),
           format_number(p.c_star)});
    ctx.save(t, "ct_decay.csv");

    KeyValue kv;
    admissible_rows(kv, ad);
    kv.add("pairs", static_cast<int>(res.norms.size()));
    kv.add("fit_rate", res.fit.rate);
    kv.add("fit_log_prefactor", res.fit.log_prefactor);
    kv.add("fit_r2", res.fit.r2);
    kv.add("fit_samples", res.fit.samples);
    kv.add("fit_censored", res.fit.censored);
    kv.add("expected_rate", res.expected_rate);
    kv.add("rate_ok", res.rate_ok);
    kv.add("prefactor", res.prefactor);
    kv.add("prefactor_min", res.prefactor_min);
    kv.add("c_delta", res.c_delta);
    kv.add("bound_ok", res.bound_ok);
    kv.add("bound_violations", res.bound_violations);
    kv.add("chain_ok", res.chain_ok);
    kv.add("worst_chain_ratio", res.worst_chain_ratio);
    ctx.save(kv.table(), "ct_decay_summary.csv");
}

void run_kernel_decay(Context& ctx, const System& s, const KernelDecayParams& kp) {
    const SmoothFunction f = make_function(kp.f);
    const auto pairs = make_pairs(s.dom, kp.pairs);
    ctx.note(std::to_string(pairs.size()) + " cube pairs, f = " + f.tag());
    KernelDecayOptions opt;
    opt.use_hs = kp.use_hs;
    opt.hs = kp.hs;
    opt.min_distance = kp.min_distance;
    opt.knee = kp.knee;
    const KernelDecayReport rep = kernel_decay_experiment(s.h, f, kp.p, kp.k_list, pairs, opt);

    CsvTable t{{"beta", "gamma", "distance", "p", "k", "norm", "norm_times_distance_pow_k"}, {}};
    for (const auto& r : rep.rows)
        t.add({format_index(r.norm.beta), format_index(r.norm.gamma), format_number(r.norm.distance),
               format_number(r.norm.p), std::to_string(r.k), format_number(r.norm.value), format_number(r.product)});
    ctx.save(t, "kernel_decay.csv");

    CsvTable sum{{"k", "sup", "finite", "monotone", "monotone_violations"}, {}};
    for (const auto& k : rep.per_k)
        sum.add({std::to_string(k.k), format_number(k.sup), yes(k.finite), yes(k.monotone),
                 std::to_string(k.monotone_violations)});
    ctx.save(sum, "kernel_decay_summary.csv");
}

void run_hs_apply(Context& ctx, const System& s, const HsApplyParams& hp) {
    const SmoothFunction f = make_function(hp.f);
    const CMatrix exact = apply_function_exact(s.h, [&](double l) { return Complex(f(l)); });
    const double exact_norm = schatten_norm(exact, kInf);
    CsvTable t{{"n", "tau", "tolerance", "u_truncation", "panels", "error_estimate", "abs_error", "rel_error"}, {}};
    bool first = true;
    for (int n : hp.n_list) {
        ExtensionParams e = hp.hs;
        e.n = n;
        const HsResult r = hs_apply(s.h, f, e);
        const double err = schatten_norm(r.value - exact, kInf);
        ctx.note("n = " + std::to_string(n) + ": " + std::to_string(r.panels) + " panels, error " +
                 format_number(err));
        t.add({std::to_string(n), e.tau, format_number(e.tolerance), format_number(r.u_truncation),
               std::to_string(r.panels), format_number(r.error_estimate), format_number(err),
               format_number(exact_norm > 0.0 ? err / exact_norm : err)});
        if (hp.write_matrix && first) {
            CsvTable m{{"row", "col", "re", "im"}, {}};
            for (Eigen::Index i = 0; i < r.value.rows(); ++i)
                for (Eigen::Index j = 0; j < r.value.cols(); ++j)
                    m.add({std::to_string(i), std::to_string(j), format_number(r.value(i, j).real()),
                           format_number(r.value(i, j).imag())});
            ctx.save(m, "hs_matrix.csv");
        }
        first = false;
    }
    ctx.save(t, "hs_apply.csv");
}

int interior_site(const GridDomain& dom, const std::vector<int>& multi, const std::string& where) {
    const int i = dom.interior_index(dom.box_index(multi));
    if (i < 0) throw ValidationError(where + ": site " + format_index(multi) + " lies outside the interior mask");
    return i;
}

void run_fk(Context& ctx, const System& s, const FkParams& fp) {
    std::vector<int> sites;
    for (const auto& m : fp.sites) sites.push_back(interior_site(s.dom, m, "params.sites"));
    if (sites.empty())
        for (int i = 0; i < s.dom.interior_count(); ++i) sites.push_back(i);

    McSpec mc = fp.mc;
    mc.seed = derived_seed(ctx.seed, "mc");
    CVector phi_sites(s.dom.interior_count());
    FkEstimate est;
    if (fp.phi.kind == "site") {
        phi_sites.setZero();
        phi_sites[interior_site(s.dom, fp.phi.site, "params.phi.site")] = 1.0;
        ctx.note(std::to_string(sites.size()) + " sites, " + std::to_string(mc.count) + " paths each");
        est = fk_semigroup_apply(s.dom, s.a, s.v, fp.t, phi_sites, mc, sites);
    } else {
        PhiFunction phi;
        if (fp.phi.kind == "ones") {
            phi = [](std::span<const double>) { return Complex(1.0); };
        } else {
            std::vector<double> c = fp.phi.center;
            if (c.empty())
                for (int e : s.dom.extents()) c.push_back(0.5 * (s.dom.coordinate(0) + s.dom.coordinate(e - 1)));
            const double w2 = 2.0 * fp.phi.width * fp.phi.width;
            phi = [c, w2](std::span<const double> x) {
                double r2 = 0.0;
                for (std::size_t i = 0; i < c.size(); ++i) r2 += (x[i] - c[i]) * (x[i] - c[i]);
                return Complex(std::exp(-r2 / w2));
            };
        }
        for (int i = 0; i < s.dom.interior_count(); ++i) {
            const RVector x = s.dom.position(i);
            phi_sites[i] = phi({x.data(), static_cast<std::size_t>(x.size())});
        }
        ctx.note(std::to_string(sites.size()) + " sites, " + std::to_string(mc.count) + " paths each");
        est = fk_semigroup_apply(s.dom, s.a, s.v, fp.t, phi, mc, sites);
    }

    CsvTable t{{"site", "estimate_re", "estimate_im", "stderr"}, {}};
    for (std::size_t k = 0; k < est.sites.size(); ++k) {
        const auto multi = s.dom.multi_index(s.dom.box_index(est.sites[k]));
        t.add({format_index(multi), format_number(est.estimate[k].real()), format_number(est.estimate[k].imag()),
               format_number(est.std_error[k])});
    }
    ctx.save(t, "fk_semigroup.csv");

    if (fp.reference) {
        const CVector ref = heat_action(s.h, fp.t, phi_sites);
        CsvTable r{{"site", "expm_re", "expm_im"}, {}};
        for (int site : est.sites)
            r.add({format_index(s.dom.multi_index(s.dom.box_index(site))), format_number(ref[site].real()),
                   format_number(ref[site].imag())});
        ctx.save(r, "fk_reference.csv");
    }
}

void run_smoothing(Context& ctx, const System& s, const SmoothingParams& sp) {
    ctx.note(std::to_string(sp.t_grid.size()) + " times, (p, q) = (" + format_number(sp.p) + ", " +
             format_number(sp.q) + ")");
    const SmoothingReport rep = smoothing_check(s.dom, s.a, s.v, sp.t_grid, sp.p, sp.q, sp.tol);
    CsvTable t{{"t", "p", "q", "norm_AV", "norm_0V", "envelope"}, {}};
    for (const auto& r : rep.rows)
        t.add({format_number(r.t), format_number(rep.p), format_number(rep.q), format_number(r.norm_av),
               format_number(r.norm_0v), format_number(r.envelope)});
    ctx.save(t, "smoothing.csv");
    KeyValue kv;
    kv.add("gamma", rep.gamma);
    kv.add("c", rep.c);
    kv.add("e", rep.e);
    kv.add("e0", rep.e0);
    kv.add("chain_ok", rep.chain_ok);
    kv.add("envelope_ok", rep.envelope_ok);
    kv.add("e_ok", rep.e_ok);
    ctx.save(kv.table(), "smoothing_fit.csv");
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, ExperimentKind kind, const RunOptions& opt) {
    const bool generic = kind == ExperimentKind::Build || kind == ExperimentKind::Spectrum;
    if (!generic && cfg.kind != kind)
        throw ValidationError("experiment: config describes '" + kind_name(cfg.kind) + "' but '" + kind_name(kind) +
                              "' was requested");
    std::filesystem::path dir = opt.out.empty() ? std::filesystem::path(cfg.output) : opt.out;
    if (dir.empty()) throw ValidationError("output: no output directory (set \"output\" or pass --out)");

    ExperimentConfig effective = cfg;
    if (opt.seed) effective.seed = *opt.seed;
    if (generic) {
        effective.kind = kind;
        effective.params = std::monostate{};
    }
    std::filesystem::create_directories(dir);
    Context ctx{effective, effective.seed, dir, opt.log, {}};
    const System sys = build_system(ctx);

    switch (kind) {
        case ExperimentKind::Build: run_build(ctx, sys); break;
        case ExperimentKind::Spectrum: run_spectrum(ctx, sys); break;
        case ExperimentKind::Constants: run_constants(ctx, sys, std::get<ConstantsParams>(cfg.params)); break;
        case ExperimentKind::CtDecay: run_ct_decay(ctx, sys, std::get<CtDecayParams>(cfg.params)); break;
        case ExperimentKind::KernelDecay: run_kernel_decay(ctx, sys, std::get<KernelDecayParams>(cfg.params)); break;
        case ExperimentKind::HsApply: run_hs_apply(ctx, sys, std::get<HsApplyParams>(cfg.params)); break;
        case ExperimentKind::FkSemigroup: run_fk(ctx, sys, std::get<FkParams>(cfg.params)); break;
        case ExperimentKind::Smoothing: run_smoothing(ctx, sys, std::get<SmoothingParams>(cfg.params)); break;
    }
    write_manifest(dir, kind_name(kind), canonical_json(effective), ctx.files);
    ctx.note("wrote manifest.json");
    return {dir, ctx.files};
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return 2;
    if (dynamic_cast<const InfeasibleError*>(&e)) return 3;
    if (dynamic_cast<const NumericalError*>(&e)) return 4;
    return 1;
}

}  // namespace ctlab
