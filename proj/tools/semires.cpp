// Experiment driver: reproducible sweeps, CSV emission, fits, gluing and
// wavefront diagnostics.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semires/harness.hpp"

namespace {

using namespace semires;

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& kvs) {
    for (const auto& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("override must be key=value: " + kv);
        apply_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
}

NormCurve read_norm_curve(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    NormCurve curve;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string tok;
        NormSample s;
        std::getline(ss, tok, ','); s.h = std::stod(tok);
        std::getline(ss, tok, ','); double lre = std::stod(tok);
        std::getline(ss, tok, ','); s.lambda = {lre, std::stod(tok)};
        std::getline(ss, s.which_operator, ',');
        std::getline(ss, tok, ','); s.norm = std::stod(tok);
        std::getline(ss, tok, ','); s.iters = std::stoi(tok);
        std::getline(ss, tok, ','); s.converged = tok == "1";
        curve.samples.push_back(s);
    }
    return curve;
}

int cmd_run(const ExperimentConfig& cfg) {
    const RunReport rep = run_experiment(cfg);
    std::printf("config hash: %016llx\n", static_cast<unsigned long long>(rep.hash));
    if (!rep.a_curve.samples.empty()) {
        std::printf("a(h): fitted exponent %.4f, prefactor %.4g, residual RMS %.4g\n",
                    rep.a_curve.fit.exponent, rep.a_curve.fit.prefactor,
                    rep.a_curve.fit.residual_rms);
        std::printf("curve class: %s\n", rep.curve_class.c_str());
    }
    for (const auto& t : rep.timings)
        std::printf("stage %-18s %-40s %.2f s\n", t.stage.c_str(), t.status.c_str(),
                    t.seconds);
    int failures = 0;
    for (const auto& c : rep.claims) {
        std::printf("%s  %-55s value=%.6g tol=%.3g\n", c.pass ? "[pass]" : "[FAIL]",
                    c.claim.c_str(), c.value, c.tolerance);
        if (!c.pass) ++failures;
    }
    std::printf("artifacts written to %s\n", cfg.out_dir.c_str());
    return failures == 0 ? 0 : 1;
}

int cmd_fit(const std::string& in_dir, double max_exponent) {
    NormCurve curve = read_norm_curve(in_dir + "/norms.csv");
    const auto rows = fit_report({{"a(h)", curve}}, max_exponent);
    for (const auto& r : rows)
        std::printf("%-10s exponent=%.4f prefactor=%.4g rms=%.4g curvature=%.4g "
                    "log_excess=%d class=%s\n",
                    r.name.c_str(), r.fit.exponent, r.fit.prefactor, r.fit.residual_rms,
                    r.fit.curvature, r.fit.log_excess ? 1 : 0, r.cls.c_str());
    return 0;
}

int cmd_gluing(const ExperimentConfig& cfg, const std::string& mode_str, bool sweep) {
    const GluingMode mode = mode_str == "fromCAP" ? GluingMode::fromCAP : GluingMode::toCAP;
    const PotentialSpec V = cfg.potential_spec();
    const cdouble shift = mode == GluingMode::toCAP ? cdouble{cfg.E, 0.0}
                                                    : cdouble{cfg.E, -0.01};
    GridPtr oracle = make_grid(cfg.L, 2.0 * cfg.L / 372.0);
    GluingSystem sys = build_gluing(mode, oracle, V, 0.5, shift, cfg.layout, cfg.stencil);
    const auto nil = check_nilpotency(sys);
    std::printf("mode %s (dense oracle, n=%d)\n", mode_str.c_str(), oracle->n);
    std::printf("  identity residual        %.3e\n", residual_gluing_identity(sys));
    std::printf("  ||A_K^2||/||A_K||        %.3e\n", nil.first);
    std::printf("  ||A_inf^2||/||A_inf||    %.3e\n", nil.second);
    std::printf("  factorization residual   %.3e\n", check_factor_identity(sys));
    std::printf("  ||A_inf A_K||            %.3e\n", error_product_norm(sys));
    if (sweep) {
        const DecaySweep ds =
            decay_sweep(mode, cfg.h_list, V, shift, cfg.layout, cfg.L, cfg.stencil);
        std::filesystem::create_directories(cfg.out_dir);
        write_decay_sweep_csv(ds, cfg.out_dir + "/gluing_" + mode_str + ".csv");
        std::printf("  sweep fitted decay order %.3f (superpolynomial: %s)\n",
                    ds.fitted_order, ds.superpolynomial ? "yes" : "no");
    }
    return 0;
}

int cmd_wavefront(const ExperimentConfig& cfg, double h, double x0, double xi0,
                  double tau) {
    const PotentialSpec V = cfg.potential_spec();
    const double dx = h / cfg.dx_factor;
    GridPtr grid = make_grid(cfg.L, dx);
    DiscreteOperator p = assemble_p(grid, V, h, cfg.stencil);
    const CutoffProfile wout = make_absorber(cfg.layout, *grid);
    auto fact = std::make_shared<Factorization>(attach_absorber(p, wout),
                                                cdouble{cfg.E, 0.0});
    const cvector f = coherent_state(*grid, h, x0, xi0);
    const cvector u = fact->solve(f);
    const AmplitudeField field =
        fbi_transform(u, *grid, h, default_phase_grid(*grid, h, std::sqrt(cfg.E) + 2.0));
    const WavefrontMask mask = wavefront_mask(field, tau);
    std::filesystem::create_directories(cfg.out_dir);
    write_amplitude_csv(field, cfg.out_dir + "/wavefront.csv");
    std::printf("max amplitude %.6g, mask cells %zu, dump: %s/wavefront.csv\n",
                field.max_amp(), mask.points().size(), cfg.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semires: semiclassical cutoff-resolvent laboratory"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir, h_list_str, potential;
    double E = -1.0;
    std::vector<std::string> overrides;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key=value config file");
        sub->add_option("--preset", preset, "nontrap | barrier-top | well | free");
        sub->add_option("--h-list", h_list_str, "comma-separated decreasing h values");
        sub->add_option("--potential", potential, "potential family");
        sub->add_option("--E", E, "energy");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--set", overrides, "extra key=value overrides")->take_all();
    };

    auto* run = app.add_subcommand("run", "full experiment pipeline");
    add_common(run);

    auto* fit = app.add_subcommand("fit", "fit and classify a measured curve");
    std::string fit_in;
    double fit_max_exp = 8.0;
    fit->add_option("--in", fit_in, "directory holding norms.csv")->required();
    fit->add_option("--max-exponent", fit_max_exp, "polynomial hypothesis bound N");

    auto* gluing = app.add_subcommand("gluing", "parametrix identity checks");
    std::string mode = "toCAP";
    bool sweep = false;
    gluing->add_option("--mode", mode, "toCAP | fromCAP");
    gluing->add_flag("--sweep", sweep, "also run the h-sweep of ||A_inf A_K||");
    add_common(gluing);

    auto* wavefront = app.add_subcommand("wavefront", "FBI amplitude dump");
    // --h would clash with the default -h,--help short name
    wavefront->set_help_flag("--help", "print help");
    double wf_h = 0.05, wf_x0 = 4.5, wf_xi0 = 1.0, wf_tau = 1e-3;
    wavefront->add_option("--h", wf_h, "semiclassical parameter");
    wavefront->add_option("--x0", wf_x0);
    wavefront->add_option("--xi0", wf_xi0);
    wavefront->add_option("--tau", wf_tau);
    add_common(wavefront);

    CLI11_PARSE(app, argc, argv);

    try {
        semires::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = semires::load_config(config_path);
        if (!preset.empty()) cfg = semires::make_preset(preset);
        // flags win over file values
        if (!potential.empty()) semires::apply_config_kv(cfg, "potential", potential);
        if (!h_list_str.empty()) semires::apply_config_kv(cfg, "h_list", h_list_str);
        if (E > 0.0) semires::apply_config_kv(cfg, "E", std::to_string(E));
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        apply_overrides(cfg, overrides);

        if (run->parsed()) return cmd_run(cfg);
        if (fit->parsed()) return cmd_fit(fit_in, fit_max_exp);
        if (gluing->parsed()) return cmd_gluing(cfg, mode, sweep);
        if (wavefront->parsed()) return cmd_wavefront(cfg, wf_h, wf_x0, wf_xi0, wf_tau);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
