#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "beqs/analysis.hpp"
#include "beqs/io.hpp"

using namespace beqs;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("beqs_test_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

ModelSpec sample_model() {
    ModelSpec m;
    m.ansatz = AnsatzFamily{AnsatzKind::XYWithField, 4, 0, {}};
    m.coeffs.resize(m.ansatz.hamiltonian_parameter_count());
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (long i = 0; i < m.coeffs.size(); ++i) m.coeffs[i] = 137.0 * g(rng);
    Eigen::MatrixXd a(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a(i, j) = g(rng);
    m.dephasing = DephasingSpec(5.0 * (a * a.transpose()));
    return m;
}

}  // namespace

TEST_CASE("decay fits recover exact profiles") {
    std::vector<double> d, j_pow, j_exp, sig;
    for (int k = 1; k <= 5; ++k) {
        d.push_back(k);
        j_pow.push_back(576.0 * std::pow(double(k), -1.19));
        j_exp.push_back(130.2 * std::exp(-0.28 * k));
        sig.push_back(1e-6);  // noiseless: the log-bias correction vanishes
    }
    DecayFit p = fit_decay(d, j_pow, sig, DecayModel::Power);
    CHECK(p.amplitude == doctest::Approx(576.0).epsilon(1e-8));
    CHECK(p.exponent == doctest::Approx(1.19).epsilon(1e-8));
    CHECK(p.evaluate(3.0) == doctest::Approx(j_pow[2]).epsilon(1e-8));
    DecayFit e = fit_decay(d, j_exp, sig, DecayModel::Exponential);
    CHECK(e.amplitude == doctest::Approx(130.2).epsilon(1e-8));
    CHECK(e.exponent == doctest::Approx(0.28).epsilon(1e-8));
    CHECK(e.r2_weighted == doctest::Approx(1.0));

    // Scale equivariance: rescaling J rescales only the amplitude.
    std::vector<double> scaled = j_pow;
    for (double& v : scaled) v *= 2.5;
    DecayFit p2 = fit_decay(d, scaled, sig, DecayModel::Power);
    CHECK(p2.amplitude == doctest::Approx(2.5 * 576.0).epsilon(1e-8));
    CHECK(p2.exponent == doctest::Approx(1.19).epsilon(1e-8));

    // Nonpositive couplings are excluded, not log-crashed.
    std::vector<double> dirty = j_pow;
    dirty[3] = -0.1;
    DecayFit pd = fit_decay(d, dirty, sig, DecayModel::Power);
    REQUIRE(pd.excluded_points.size() == 1);
    CHECK(pd.excluded_points[0] == 3);
}

TEST_CASE("averaged couplings of a preset model reproduce the profile") {
    AnsatzFamily fam{AnsatzKind::XYWithField, 6, 0, {}};
    ModelSpec model = make_scenario_model("exponential_51ion", fam);
    std::vector<double> d, j;
    averaged_couplings(model, d, j);
    REQUIRE(d.size() == 5);
    const ScenarioPreset& preset = find_preset("exponential_51ion");
    for (std::size_t k = 0; k < d.size(); ++k)
        CHECK(j[k] == doctest::Approx(preset.amplitude *
                                      std::exp(-preset.exponent * d[k])));
}

TEST_CASE("dephasing decomposition: collective structure and reconstruction") {
    int n = 5;
    // Rank-1 collective gamma: one jump, uniform vector.
    DephasingSpec coll(3.0 * Eigen::MatrixXd::Ones(n, n));
    JumpDecomposition jd = decompose_dephasing(coll);
    CHECK(jd.rates[0] == doctest::Approx(3.0 * n));
    for (long i = 1; i < jd.rates.size(); ++i)
        CHECK(std::abs(jd.rates[i]) < 1e-10);
    double overlap = std::abs(jd.vectors.col(0).sum()) / std::sqrt(double(n));
    CHECK(overlap == doctest::Approx(1.0));

    // Diagonal gamma: rates are the diagonal, descending.
    Eigen::VectorXd diag(n);
    diag << 1.0, 7.0, 3.0, 5.0, 2.0;
    JumpDecomposition jdd =
        decompose_dephasing(DephasingSpec(diag.asDiagonal()));
    CHECK(jdd.rates[0] == doctest::Approx(7.0));
    CHECK(jdd.rates[n - 1] == doctest::Approx(1.0));

    // General symmetric PSD gamma reconstructs exactly.
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    DephasingSpec gen(a * a.transpose());
    CHECK((decompose_dephasing(gen).reconstruct() - gen.gamma)
              .cwiseAbs()
              .maxCoeff() < 1e-8);
}

TEST_CASE("prediction bands collapse for a zero-covariance ensemble") {
    ModelSpec m = sample_model();
    LearnedEnsemble ens;
    ens.family = m.ansatz;
    ens.dissipator = DissipatorSpec::general_gamma();
    ens.mean = flatten_coefficients(m);
    ens.covariance =
        Eigen::MatrixXd::Zero(ens.mean.size(), ens.mean.size());
    DensityState rho0 = DensityState::from_product(ProductStateSpec::from_eigs(
        {PauliEig::Xp, PauliEig::Zp, PauliEig::Yp, PauliEig::Zm}));
    std::vector<OperatorSum> obs{
        OperatorSum(4, {PauliString::single(4, 0, Axis::Z)}),
        OperatorSum(4, {PauliString::single(4, 2, Axis::X)})};
    std::vector<double> times{0.0, 2e-4, 5e-4};
    auto bands = propagate_ensemble(ens, rho0, obs, times, 24, 0.95, 3);
    REQUIRE(bands.size() == 2);
    for (const auto& band : bands) {
        REQUIRE(band.times.size() == times.size());
        CHECK(band.n_samples == 24);
        for (std::size_t k = 0; k < times.size(); ++k) {
            CHECK(band.upper[k] - band.lower[k] < 1e-8);
            CHECK(band.mean_model[k] ==
                  doctest::Approx(band.ensemble_mean[k]).epsilon(1e-6));
        }
        TimeTrace err = expected_error_estimate(band);
        CHECK(err.values[1] < 1e-8);
    }

    // With spread the bands open up, contain the mean, and stay deterministic.
    ens.covariance = 25.0 * Eigen::MatrixXd::Identity(ens.mean.size(),
                                                      ens.mean.size());
    auto wide = propagate_ensemble(ens, rho0, obs, times, 24, 0.95, 3);
    auto wide2 = propagate_ensemble(ens, rho0, obs, times, 24, 0.95, 3);
    for (std::size_t k = 0; k < times.size(); ++k) {
        CHECK(wide[0].upper[k] == wide2[0].upper[k]);
        CHECK(wide[0].lower[k] <= wide[0].ensemble_mean[k]);
        CHECK(wide[0].upper[k] >= wide[0].ensemble_mean[k]);
    }
    CHECK(wide[0].upper[1] - wide[0].lower[1] > 1e-4);
}

TEST_CASE("base64 round trips byte blobs") {
    std::vector<uint8_t> bytes;
    for (int k = 0; k < 300; ++k) bytes.push_back(uint8_t(k * 37));
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
    for (std::size_t cut : {0u, 1u, 2u, 3u}) {
        std::vector<uint8_t> part(bytes.begin(), bytes.begin() + 10 + cut);
        CHECK(base64_decode(base64_encode(part)) == part);
    }
    CHECK(base64_encode({}).empty());
    CHECK_THROWS_AS(base64_decode("a"), std::invalid_argument);
}

TEST_CASE("model json round trip is bit exact") {
    TempDir dir;
    ModelSpec m = sample_model();
    save_model(m, dir.file("model.json"));
    ModelSpec back = load_model(dir.file("model.json"));
    CHECK(back.ansatz.kind == m.ansatz.kind);
    CHECK(back.ansatz.n_sites == 4);
    REQUIRE(back.coeffs.size() == m.coeffs.size());
    for (long i = 0; i < m.coeffs.size(); ++i)
        CHECK(back.coeffs[i] == m.coeffs[i]);
    REQUIRE(back.dephasing.has_value());
    CHECK((back.dephasing->gamma.array() == m.dephasing->gamma.array()).all());

    json j = model_to_json(m);
    CHECK(j["schema_version"] == kSchemaVersion);
    j["schema_version"] = 99;
    CHECK_THROWS_AS(model_from_json(j), std::invalid_argument);
}

TEST_CASE("dataset json round trip is bit exact") {
    TempDir dir;
    ModelSpec m;
    m.ansatz = AnsatzFamily{AnsatzKind::TwoBodyFull, 2, 0, {}};
    m.coeffs = Eigen::VectorXd::Zero(m.ansatz.hamiltonian_parameter_count());
    m.coeffs[6] = 321.0;
    IntegralProtocolConfig cfg;
    cfg.states = {ProductStateSpec::from_eigs({PauliEig::Xp, PauliEig::Zm}),
                  ProductStateSpec::mixed_except(2, {{1, PauliEig::Yp}})};
    cfg.rotations.assign(2, std::nullopt);
    cfg.times = {0.0, 4e-4};
    cfg.n_u = 5;
    cfg.n_m = 70;  // forces multi-word bit packing per record
    cfg.seed = 33;
    ShotDataset ds = generate_integral_protocol(m, cfg);
    save_dataset(ds, dir.file("ds.json"));
    ShotDataset back = load_dataset(dir.file("ds.json"));
    CHECK(back.n_sites == ds.n_sites);
    CHECK(back.protocol == ds.protocol);
    CHECK(back.n_settings == ds.n_settings);
    REQUIRE(back.records.size() == ds.records.size());
    for (std::size_t r = 0; r < ds.records.size(); ++r) {
        CHECK(back.records[r].setting_id == ds.records[r].setting_id);
        CHECK(back.records[r].init_index == ds.records[r].init_index);
        CHECK(back.records[r].basis == ds.records[r].basis);
        CHECK(back.records[r].time == ds.records[r].time);
        CHECK(back.records[r].bits == ds.records[r].bits);
    }
    REQUIRE(back.inits.size() == 2);
    CHECK(back.inits[1].site(0).mixed);
    CHECK(back.inits[0].site(0).bloch[0] == ds.inits[0].site(0).bloch[0]);
    back.validate();
}

TEST_CASE("ensemble json round trip is bit exact") {
    TempDir dir;
    LearnedEnsemble ens;
    ens.family = AnsatzFamily{AnsatzKind::Ising, 3, 0, {}};
    ens.dissipator = DissipatorSpec::general_gamma();
    std::mt19937_64 rng(41);
    std::normal_distribution<double> g(0.0, 1.0);
    int np = ens.family.parameter_count_with_dephasing();
    ens.mean.resize(np);
    for (long i = 0; i < np; ++i) ens.mean[i] = g(rng);
    Eigen::MatrixXd a(np, np);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < np; ++j) a(i, j) = g(rng);
    ens.covariance = a * a.transpose();
    for (int r = 0; r < 4; ++r) {
        Eigen::VectorXd rep(np);
        for (long i = 0; i < np; ++i) rep[i] = g(rng);
        ens.replicas.push_back(rep);
    }
    ens.method = "bootstrap";
    ens.n_failures = 2;
    save_ensemble(ens, dir.file("ens.json"));
    LearnedEnsemble back = load_ensemble(dir.file("ens.json"));
    CHECK(back.method == "bootstrap");
    CHECK(back.n_failures == 2);
    CHECK(back.family.kind == AnsatzKind::Ising);
    CHECK((back.mean.array() == ens.mean.array()).all());
    CHECK((back.covariance.array() == ens.covariance.array()).all());
    REQUIRE(back.replicas.size() == 4);
    CHECK((back.replicas[2].array() == ens.replicas[2].array()).all());
}

TEST_CASE("csv writers emit headers and full precision") {
    TempDir dir;
    TimeTrace tr{OperatorSum(1, {PauliString::single(1, 0, Axis::Z)})};
    tr.times = {0.0, 1e-4};
    tr.values = {1.0 / 3.0, -2.0 / 7.0};
    tr.std_errors = {0.01, 0.02};
    save_time_trace_csv(tr, dir.file("trace.csv"));
    std::ifstream in(dir.file("trace.csv"));
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "time_s,value,std_error");
    std::getline(in, line);
    double t, v, s;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &v, &s) == 3);
    CHECK(v == 1.0 / 3.0);  // %.17g survives the round trip

    std::vector<BoundReportRow> rows(2);
    rows[1].t = 1e-3;
    rows[1].bias_bound = 0.0123;
    save_bound_report_csv(rows, dir.file("bounds.csv"));
    save_bound_report_json(rows, json{{"x", 1}}, dir.file("bounds.json"));
    std::ifstream jin(dir.file("bounds.json"));
    json report = json::parse(jin);
    CHECK(report["schema_version"] == kSchemaVersion);
    CHECK(report["rows"].size() == 2);
    CHECK(report["config_fingerprint"] ==
          config_fingerprint(json{{"x", 1}}));
}

TEST_CASE("config fingerprints track content, not formatting") {
    json a = {{"alpha", 1}, {"beta", {1, 2, 3}}};
    json b = json::parse("{\"beta\": [1,2,3], \"alpha\": 1}");
    CHECK(config_fingerprint(a) == config_fingerprint(b));
    json c = a;
    c["alpha"] = 2;
    CHECK(config_fingerprint(a) != config_fingerprint(c));
}

TEST_CASE("run config defaults and validation") {
    json j = {{"scenario", {{"preset", "power_law_10ion"}, {"n_sites", 6}}}};
    RunConfig cfg = run_config_from_json(j);
    CHECK(cfg.preset == "power_law_10ion");
    CHECK(cfg.n_sites == 6);
    CHECK(cfg.method == "integral");
    CHECK(cfg.n_u == 200);
    CHECK(cfg.dissipator == "general_gamma");
    CHECK(cfg.psd_constrained);
    CHECK(cfg.ansatz_family().kind == AnsatzKind::XYWithField);
    CHECK(cfg.dissipator_spec().model == DissipatorModel::GeneralGamma);
    CHECK_FALSE(cfg.fingerprint().empty());

    json bad = j;
    bad["acquisition"] = {{"method", "sideways"}};
    CHECK_THROWS_AS(run_config_from_json(bad), std::invalid_argument);
    json noscenario = {{"learning", {{"ansatz", "ising"}}}};
    CHECK_THROWS_AS(run_config_from_json(noscenario), std::invalid_argument);
}
