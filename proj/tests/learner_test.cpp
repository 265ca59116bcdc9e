#include <doctest.h>

#include <cmath>
#include <random>

#include "beqs/lab.hpp"
#include "beqs/learner.hpp"

using namespace beqs;

namespace {

ProductStateSpec random_pure_state(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<int> pick(0, 5);
    std::vector<PauliEig> eigs(n);
    for (int i = 0; i < n; ++i) eigs[i] = PauliEig(pick(rng));
    return ProductStateSpec::from_eigs(eigs);
}

std::vector<DifferentialRow> analytic_rows(
    const ModelSpec& hidden, const std::vector<ProductStateSpec>& states,
    const std::vector<PauliString>& observables) {
    std::vector<DifferentialRow> rows;
    for (const auto& st : states)
        for (const auto& p : observables) {
            OperatorSum deriv = adjoint_generator_action(
                hidden, OperatorSum(p.n_sites(), {p}));
            rows.push_back({p, st, expectation_product_state(deriv, st), 1e-3});
        }
    return rows;
}

LinearSystem identity_system(const Eigen::VectorXd& target, int n_ham,
                             int gamma_sites) {
    LinearSystem sys;
    long n = target.size();
    sys.matrix = Eigen::SparseMatrix<double>(n, n);
    sys.matrix.setIdentity();
    sys.target = target;
    sys.row_meta.resize(std::size_t(n));
    sys.col_meta.resize(std::size_t(n));
    sys.n_hamiltonian_cols = n_ham;
    sys.gamma_block_start = n_ham;
    sys.gamma_n_sites = gamma_sites;
    return sys;
}

}  // namespace

TEST_CASE("noiseless differential rows recover the hidden model exactly") {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> g(0.0, 1.0);
    int n = 3;
    AnsatzFamily fam{AnsatzKind::TwoBodyFull, n, 0, {}};
    ModelSpec hidden;
    hidden.ansatz = fam;
    hidden.coeffs.resize(fam.hamiltonian_parameter_count());
    for (long i = 0; i < hidden.coeffs.size(); ++i)
        hidden.coeffs[i] = 300.0 * g(rng);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    hidden.dephasing = DephasingSpec(10.0 * (a * a.transpose()));

    std::vector<ProductStateSpec> states;
    for (int s = 0; s < 6; ++s) states.push_back(random_pure_state(rng, n));
    LinearSystem sys = build_differential_system_from_rows(
        analytic_rows(hidden, states, build_basis(fam)), fam,
        DissipatorSpec::general_gamma());
    CHECK(sys.rows() == 6 * 36);
    CHECK(sys.cols() == 36 + 9);
    CHECK(int(sys.col_meta.size()) == sys.cols());

    LearnResult res = solve_least_squares(sys);
    Eigen::VectorXd truth = flatten_coefficients(hidden);
    REQUIRE(res.coeffs.size() == truth.size());
    CHECK((res.coeffs - truth).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(res.residual_norm < 1e-6);

    ModelSpec back = res.to_model(fam, DissipatorSpec::general_gamma());
    REQUIRE(back.dephasing.has_value());
    CHECK((back.dephasing->gamma - hidden.dephasing->gamma).cwiseAbs().maxCoeff() <
          1e-6);
}

TEST_CASE("differential matrices are sparse and match the dense oracle") {
    int n = 5;
    AnsatzFamily fam{AnsatzKind::TwoBodyFull, n, 0, {}};
    auto basis = build_basis(fam);
    // Matched differential states: pure only on the observable's support.
    std::vector<DifferentialRow> rows;
    for (const auto& p : basis) {
        std::vector<std::pair<int, PauliEig>> pure;
        for (int i = 0; i < n; ++i)
            if ((p.support_mask() >> i) & 1) pure.emplace_back(i, PauliEig::Xp);
        rows.push_back({p, ProductStateSpec::mixed_except(n, pure), 0.0, 1e-3});
    }
    LinearSystem sys = build_differential_system_from_rows(
        rows, fam, DissipatorSpec::general_gamma());
    CHECK(sys.rows() == 105);
    CHECK(sys.cols() == 105 + 25);
    CHECK(sys.sparsity() > 0.9);

    // Entry oracle: column value is the adjoint action traced on the state.
    Eigen::MatrixXd dense = sys.dense();
    for (int r = 0; r < 105; r += 17)
        for (int m = 0; m < 105; m += 13) {
            double oracle = expectation_product_state(
                adjoint_hamiltonian_column(basis[std::size_t(m)],
                                           rows[std::size_t(r)].observable),
                rows[std::size_t(r)].state);
            CHECK(dense(r, m) == doctest::Approx(oracle).epsilon(1e-10));
        }
}

TEST_CASE("integral method recovers a two-site model from shot data") {
    ModelSpec hidden;
    hidden.ansatz = AnsatzFamily{AnsatzKind::TwoBodyFull, 2, 0, {}};
    hidden.coeffs =
        Eigen::VectorXd::Zero(hidden.ansatz.hamiltonian_parameter_count());
    hidden.coeffs[2] = 250.0;  // Z field on site 0
    hidden.coeffs[6] = 400.0;  // X X coupling
    Eigen::MatrixXd gamma(2, 2);
    gamma << 60.0, 15.0, 15.0, 60.0;
    hidden.dephasing = DephasingSpec(gamma);

    IntegralProtocolConfig cfg;
    cfg.states = {ProductStateSpec::from_eigs({PauliEig::Xp, PauliEig::Zp}),
                  ProductStateSpec::from_eigs({PauliEig::Yp, PauliEig::Xm}),
                  ProductStateSpec::from_eigs({PauliEig::Zm, PauliEig::Yp}),
                  ProductStateSpec::from_eigs({PauliEig::Xm, PauliEig::Ym}),
                  ProductStateSpec::from_eigs({PauliEig::Zp, PauliEig::Xp}),
                  ProductStateSpec::from_eigs({PauliEig::Ym, PauliEig::Zm})};
    cfg.rotations.assign(6, std::nullopt);
    for (int k = 0; k <= 12; ++k) cfg.times.push_back(5e-5 * k);
    cfg.n_u = 150;
    cfg.n_m = 300;
    cfg.seed = 21;
    ShotDataset ds = generate_integral_protocol(hidden, cfg);
    ShadowEstimator est(ds);

    IntegralBuildOptions opts;
    opts.times = cfg.times;
    LinearSystem sys = build_integral_system(
        est, hidden.ansatz, DissipatorSpec::general_gamma(), opts);
    CHECK(sys.rows() == 6 * 15);
    CHECK(sys.dropped_rows == 0);
    LearnResult res = solve_psd_constrained(sys);
    Eigen::VectorXd truth = flatten_coefficients(hidden);
    CHECK((res.coeffs - truth).norm() < 0.25 * truth.norm());
    CHECK(res.psd_gap < 1e-7);

    // An estimation time missing from the dataset drops every row.
    IntegralBuildOptions bogus;
    bogus.times = {0.0, 0.123};
    LinearSystem empty = build_integral_system(
        est, hidden.ansatz, DissipatorSpec::general_gamma(), bogus);
    CHECK(empty.rows() == 0);
    CHECK(empty.dropped_rows == 90);
    CHECK_THROWS_AS(solve_least_squares(empty), std::invalid_argument);
}

TEST_CASE("psd solver projects the gamma block and matches ls when feasible") {
    Eigen::VectorXd feasible(6);
    feasible << 1.5, -0.7, 1.0, 0.2, 0.2, 1.0;
    LinearSystem sys = identity_system(feasible, 2, 2);
    LearnResult ls = solve_least_squares(sys);
    LearnResult psd = solve_psd_constrained(sys);
    CHECK((ls.coeffs - feasible).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((psd.coeffs - feasible).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(psd.method == "psd_constrained");

    Eigen::VectorXd infeasible(6);
    infeasible << 1.5, -0.7, -1.0, 0.2, 0.2, -1.0;
    LearnResult proj = solve_psd_constrained(identity_system(infeasible, 2, 2));
    // Both eigenvalues of the gamma block are negative: projection is zero.
    CHECK(proj.coeffs.head(2).isApprox(infeasible.head(2), 1e-6));
    CHECK(proj.coeffs.tail(4).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(proj.psd_gap < 1e-8);
    CHECK(proj.iterations > 0);
}

TEST_CASE("decay regularizer pulls underdetermined fits onto the profile") {
    int n = 5;
    AnsatzFamily fam{AnsatzKind::XYWithField, n, 0, {}};
    auto basis = build_basis(fam);
    RegularizerSpec reg = make_decay_regularizer(fam, 50.0, {0.3, 0.8}, {1.1});
    CHECK(reg.structure.rows() == long(basis.size()));
    Eigen::MatrixXd q = reg.orthonormal_structure();
    CHECK((q.transpose() * q -
           Eigen::MatrixXd::Identity(q.cols(), q.cols()))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    CHECK(reg.structure_condition() >= 1.0);

    // Hidden couplings on the tau = 0.3 profile, fields uniform.
    ModelSpec hidden;
    hidden.ansatz = fam;
    hidden.coeffs.resize(fam.hamiltonian_parameter_count());
    for (std::size_t m = 0; m < basis.size(); ++m) {
        if (basis[m].support_size() == 1) {
            hidden.coeffs[long(m)] = 120.0;
        } else {
            uint64_t mask = basis[m].support_mask();
            int d = 63 - std::countl_zero(mask) - std::countr_zero(mask);
            hidden.coeffs[long(m)] = 500.0 * std::exp(-0.3 * d);
        }
    }
    std::mt19937_64 rng(83);
    std::vector<ProductStateSpec> states{random_pure_state(rng, n)};
    std::vector<PauliString> obs(basis.begin(), basis.begin() + 14);
    LinearSystem sys = build_differential_system_from_rows(
        analytic_rows(hidden, states, obs), fam, DissipatorSpec::none());
    REQUIRE(sys.rows() < sys.cols());  // underdetermined on purpose

    double err_plain =
        (solve_least_squares(sys).coeffs - hidden.coeffs).norm();
    double err_reg =
        (solve_least_squares(sys, reg).coeffs - hidden.coeffs).norm();
    CHECK(err_reg < err_plain);
}

TEST_CASE("standard rate families and their model reconstruction") {
    DissipatorSpec dis = DissipatorSpec::standard_families(4);
    REQUIRE(dis.families.size() == 3);
    CHECK(dis.families[0].label == "local_dephasing");
    CHECK(dis.families[0].jumps.size() == 4);
    CHECK(dis.families[1].jumps.size() == 1);
    CHECK(dis.families[2].jumps.size() == 4);

    AnsatzFamily fam{AnsatzKind::XYWithField, 4, 0, {}};
    LearnResult res;
    res.coeffs = Eigen::VectorXd::Zero(fam.hamiltonian_parameter_count() + 3);
    res.coeffs.tail(3) << 2.0, 0.5, 1.25;
    ModelSpec model = res.to_model(fam, dis);
    REQUIRE(model.dephasing.has_value());
    // Gamma = local * I + collective * ones.
    CHECK(model.dephasing->gamma(0, 0) == doctest::Approx(2.5));
    CHECK(model.dephasing->gamma(0, 1) == doctest::Approx(0.5));
    CHECK(model.extra_jumps.size() == 4);
    CHECK(model.extra_jumps[0].second == doctest::Approx(1.25));
}

TEST_CASE("residual sweep shapes and budget accounting") {
    ModelSpec hidden;
    hidden.ansatz = AnsatzFamily{AnsatzKind::TwoBodyFull, 2, 0, {}};
    hidden.coeffs =
        Eigen::VectorXd::Zero(hidden.ansatz.hamiltonian_parameter_count());
    hidden.coeffs[6] = 500.0;
    IntegralProtocolConfig cfg;
    cfg.states = {ProductStateSpec::from_eigs({PauliEig::Xp, PauliEig::Zp}),
                  ProductStateSpec::from_eigs({PauliEig::Zp, PauliEig::Yp})};
    cfg.rotations.assign(2, std::nullopt);
    cfg.times = {0.0, 2e-4, 4e-4};
    cfg.n_u = 54;
    cfg.n_m = 40;
    cfg.seed = 4;
    ShotDataset ds = generate_integral_protocol(hidden, cfg);
    ShadowEstimator est(ds);

    std::vector<SweepAnsatz> ansatze{
        {"full", hidden.ansatz, DissipatorSpec::none()},
        {"ising", AnsatzFamily{AnsatzKind::Ising, 2, 0, {}},
         DissipatorSpec::none()}};
    IntegralBuildOptions opts;
    opts.times = cfg.times;
    SweepResult sweep = residual_scaling_sweep(est, ansatze, {18, 36, 54}, opts);
    REQUIRE(sweep.labels.size() == 2);
    REQUIRE(sweep.slopes.size() == 2);
    REQUIRE(sweep.plateau_flags.size() == 2);
    REQUIRE(sweep.entries.size() == 6);
    for (const auto& e : sweep.entries) {
        CHECK(e.residual >= 0.0);
        CHECK(e.n_shots > 0.0);
    }
    // Entries come per budget, both labels sharing one nested selection.
    CHECK(sweep.entries[0].n_shots == sweep.entries[1].n_shots);
    CHECK(sweep.entries[0].n_shots < sweep.entries[2].n_shots);
    CHECK(sweep.entries[2].n_shots < sweep.entries[4].n_shots);
}
