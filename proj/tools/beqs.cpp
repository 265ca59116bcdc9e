#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beqs/analysis.hpp"
#include "beqs/bounds.hpp"
#include "beqs/io.hpp"
#include "beqs/learner.hpp"
#include "beqs/shadows.hpp"
#include "beqs/uncertainty.hpp"

namespace {

using namespace beqs;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

ModelSpec hidden_model_from_config(const RunConfig& cfg) {
    if (!cfg.model_file.empty()) return load_model(cfg.model_file);
    return make_scenario_model(cfg.preset, cfg.ansatz_family());
}

int cmd_simulate(const std::string& config_path) {
    RunConfig cfg = load_run_config(config_path);
    ModelSpec hidden = hidden_model_from_config(cfg);
    std::filesystem::create_directories(cfg.output_dir);

    ShotDataset ds;
    if (cfg.method == "integral") {
        IntegralProtocolConfig pc;
        // Two globally rotated product states, as in the integral acquisition.
        int n = hidden.n_sites();
        RotationPrep ry{M_PI / 2.0, {0.0, 1.0, 0.0}};
        RotationPrep rx{M_PI / 2.0, {1.0, 0.0, 0.0}};
        pc.states = {ProductStateSpec::global_rotation(n, ry.theta, ry.axis),
                     ProductStateSpec::global_rotation(n, rx.theta, rx.axis)};
        pc.rotations = {ry, rx};
        pc.times = cfg.times;
        pc.n_u = cfg.n_u;
        pc.n_m = cfg.n_m;
        pc.noise = cfg.noise;
        pc.seed = derive_seed(cfg.master_seed, 1);
        ds = generate_integral_protocol(hidden, pc);
    } else {
        DifferentialProtocolConfig dc;
        dc.n_u = cfg.n_u;
        dc.n_m = cfg.n_m;
        dc.n_t = cfg.n_t;
        dc.t_max = cfg.t_max;
        dc.noise = cfg.noise;
        dc.seed = derive_seed(cfg.master_seed, 1);
        ds = generate_differential_protocol(hidden, dc);
    }
    std::string out = cfg.output_dir + "/dataset.json";
    save_dataset(ds, out);
    json sidecar{{"schema_version", kSchemaVersion},
                 {"config_fingerprint", cfg.fingerprint()},
                 {"config", cfg.raw},
                 {"total_shots", ds.total_shots()}};
    std::ofstream side(cfg.output_dir + "/dataset.provenance.json");
    side << sidecar.dump(2) << "\n";
    std::printf("wrote %s (%zu shots)\n", out.c_str(), ds.total_shots());
    return 0;
}

int cmd_learn(const std::string& method, const std::string& dataset_path,
              const std::string& out_path, const std::string& config_path,
              bool sweep) {
    ShotDataset ds = load_dataset(dataset_path);
    ShadowEstimator est(ds);

    AnsatzFamily family;
    DissipatorSpec dis = DissipatorSpec::general_gamma();
    bool psd = true;
    std::string resampler = "bootstrap";
    int n_resamples = 300;
    uint64_t seed = 0;
    double beta = 0.0;
    std::vector<double> tau_grid, alpha_grid;
    if (!config_path.empty()) {
        RunConfig cfg = load_run_config(config_path);
        cfg.n_sites = ds.n_sites;
        family = cfg.ansatz_family();
        dis = cfg.dissipator_spec();
        psd = cfg.psd_constrained;
        resampler = cfg.resampler;
        n_resamples = cfg.n_resamples;
        seed = cfg.master_seed;
        beta = cfg.beta;
        tau_grid = cfg.regularizer_tau_grid;
        alpha_grid = cfg.regularizer_alpha_grid;
    } else {
        family.kind = AnsatzKind::XYWithField;
        family.n_sites = ds.n_sites;
    }

    std::optional<RegularizerSpec> reg;
    if (beta > 0.0)
        reg = make_decay_regularizer(family, beta, tau_grid, alpha_grid);

    auto build = [&](const std::vector<int>* weights) {
        if (method == "integral") {
            IntegralBuildOptions opts;
            opts.weights = weights;
            return build_integral_system(est, family, dis, opts);
        }
        DifferentialBuildOptions opts;
        opts.weights = weights;
        return build_differential_system(est, family, dis, opts);
    };
    auto solve = [&](const LinearSystem& sys) {
        return psd ? solve_psd_constrained(sys, reg)
                   : solve_least_squares(sys, reg);
    };

    RefitFn refit = [&](const std::vector<int>& weights) {
        return solve(build(&weights)).coeffs;
    };
    LearnedEnsemble ens;
    if (resampler == "jackknife") {
        ens = jackknife_covariance(refit, ds.n_settings);
    } else {
        BootstrapOptions bopts;
        bopts.n_resamples = n_resamples;
        bopts.seed = derive_seed(seed, 2);
        ens = bootstrap_covariance(refit, setting_groups(ds), bopts);
    }
    // Center the ensemble on the full-data point estimate.
    ens.mean = solve(build(nullptr)).coeffs;
    ens.family = family;
    ens.dissipator = dis;
    save_ensemble(ens, out_path);
    std::printf("wrote %s (%d parameters, %zu replicas)\n", out_path.c_str(),
                ens.parameter_count(), ens.replicas.size());

    if (sweep && method == "integral") {
        std::vector<int> budgets;
        for (int b = 25; b <= 200; b *= 2) budgets.push_back(b);
        SweepAnsatz sa{to_string(family.kind), family, dis};
        SweepResult sw =
            residual_scaling_sweep(est, {sa}, budgets, IntegralBuildOptions{});
        save_sweep_csv(sw, out_path + ".sweep.csv");
    }
    return 0;
}

PauliString parse_observable(const std::string& text, int n_sites) {
    if (text.find('*') == std::string::npos)
        return PauliString::parse("1 * " + text, n_sites);
    return PauliString::parse(text, n_sites);
}

int cmd_certify(const std::string& ensemble_path, const std::string& obs_path,
                const std::string& out_dir, bool bounds_only, double p,
                double eta, int n_samples) {
    LearnedEnsemble ens = load_ensemble(ensemble_path);
    json obs_spec = json::parse(std::ifstream(obs_path));
    const int n = ens.family.n_sites;

    std::vector<double> times = obs_spec.at("times").get<std::vector<double>>();
    std::vector<PauliString> observables;
    for (const auto& o : obs_spec.at("observables"))
        observables.push_back(
            parse_observable(o.at("pauli").get<std::string>(), n));

    ProductStateSpec rho0 = [&]() {
        if (obs_spec.contains("initial_state") &&
            obs_spec.at("initial_state").contains("eigs")) {
            std::vector<PauliEig> eigs;
            for (const auto& e : obs_spec.at("initial_state").at("eigs"))
                eigs.push_back(pauli_eig_from_string(e.get<std::string>()));
            return ProductStateSpec::from_eigs(eigs);
        }
        return ProductStateSpec::from_eigs(
            std::vector<PauliEig>(n, PauliEig::Zm));
    }();

    std::filesystem::create_directories(out_dir);
    const int m = ens.parameter_count();
    double delta = std::sqrt(
        std::max(ens.covariance.trace(), 0.0) / double(std::max(m, 1)));
    ModelSpec mean_model = ens.mean_model();
    auto basis = build_basis(ens.family);
    OperatorSum hamiltonian = mean_model.hamiltonian();

    std::vector<BoundReportRow> rows;
    bool pure_product = !rho0.has_mixed_site();
    FidelityData fid;
    if (pure_product) fid = fidelity_data_from_state(basis, rho0);
    // One report row per time, using the first observable for the
    // short-time envelope. The quadratic form only needs the parameters
    // whose support touches the observable (light-cone restriction).
    std::vector<PauliString> cone;
    for (const auto& h : basis)
        if (h.support_mask() & observables.front().support_mask())
            cone.push_back(h);
    ShortTimeData st = shorttime_data_from_state(
        cone, hamiltonian, rho0, OperatorSum(n, {observables.front()}));
    for (double t : times) {
        BoundInputs in;
        in.t = t;
        in.delta = delta;
        in.m_eff = m;
        in.op_norm = 1.0;
        in.confidence = Confidence::from_p(p);
        in.sigma = ens.covariance;
        BoundReportRow row;
        row.t = t;
        row.bias_bound = long_time_bias_bound(in);
        auto conc = long_time_concentration_bound(in);
        row.concentration_bound = conc.bound;
        row.p = conc.p;
        row.hw_envelope = hanson_wright_envelope(st, t, delta, eta);
        row.eta = eta;
        row.fidelity_lower =
            pure_product ? fidelity_bounds(fid, t, delta, eta).lower : 1.0;
        rows.push_back(row);
    }
    save_bound_report_json(rows, ensemble_to_json(ens)["family"],
                           out_dir + "/bound_report.json");
    save_bound_report_csv(rows, out_dir + "/bound_report.csv");

    if (!bounds_only) {
        if (n > 12)
            throw CapacityError(
                "certify: N > 12 needs --bounds-only (bounds do not "
                "propagate states)");
        std::vector<OperatorSum> obs_sums;
        for (const auto& o : observables) obs_sums.push_back(OperatorSum(n, {o}));
        auto bands = propagate_ensemble(ens, DensityState::from_product(rho0),
                                        obs_sums, times, n_samples, 0.95,
                                        derive_seed(0, 3));
        for (std::size_t k = 0; k < bands.size(); ++k) {
            save_prediction_band_csv(
                bands[k], out_dir + "/band_" + std::to_string(k) + ".csv");
            save_time_trace_csv(
                expected_error_estimate(bands[k]),
                out_dir + "/expected_error_" + std::to_string(k) + ".csv");
        }
    }
    std::printf("wrote %s/bound_report.json\n", out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bounded-error quantum simulation toolkit"};
    app.require_subcommand(1);

    std::string config_path, dataset_path, out_path = "ensemble.json";
    std::string method = "integral";
    std::string ensemble_path, obs_path, out_dir = "certify_out";
    bool bounds_only = false, sweep = false;
    double p = 0.95, eta = 0.05;
    int n_samples = 60;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
    sim->add_option("--config", config_path, "run configuration JSON")
        ->required();

    auto* learn = app.add_subcommand("learn", "fit a generator to a dataset");
    learn->add_option("--method", method, "integral|differential")
        ->check(CLI::IsMember({"integral", "differential"}));
    learn->add_option("--dataset", dataset_path, "dataset file")->required();
    learn->add_option("--out", out_path, "ensemble output file");
    learn->add_option("--config", config_path, "run configuration JSON");
    learn->add_flag("--sweep", sweep, "write a residual-scaling sweep CSV");

    auto* certify = app.add_subcommand("certify", "bounds and prediction bands");
    certify->add_option("--ensemble", ensemble_path, "ensemble file")
        ->required();
    certify->add_option("--observables", obs_path, "observables JSON")
        ->required();
    certify->add_option("--out", out_dir, "output directory");
    certify->add_flag("--bounds-only", bounds_only,
                      "skip state propagation (any N)");
    certify->add_option("--p", p, "concentration confidence");
    certify->add_option("--eta", eta, "short-time failure budget");
    certify->add_option("--samples", n_samples, "ensemble propagation draws");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(config_path);
        if (learn->parsed())
            return cmd_learn(method, dataset_path, out_path, config_path,
                             sweep);
        return cmd_certify(ensemble_path, obs_path, out_dir, bounds_only, p,
                           eta, n_samples);
    } catch (const beqs::DimensionError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    }
}
