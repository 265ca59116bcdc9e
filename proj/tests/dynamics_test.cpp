#include <doctest.h>

#include <cmath>
#include <random>

#include "beqs/dynamics.hpp"

using namespace beqs;

namespace {

ModelSpec random_model(std::mt19937_64& rng, int n, bool dissipative) {
    std::normal_distribution<double> g(0.0, 1.0);
    ModelSpec m;
    m.ansatz = AnsatzFamily{AnsatzKind::TwoBodyFull, n, 0, {}};
    m.coeffs.resize(m.ansatz.hamiltonian_parameter_count());
    for (long i = 0; i < m.coeffs.size(); ++i) m.coeffs[i] = 200.0 * g(rng);
    if (dissipative) {
        Eigen::MatrixXd a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = g(rng);
        // a a^T is PSD, so the model is a valid Lindbladian.
        m.dephasing = DephasingSpec(20.0 * (a * a.transpose()));
        OperatorSum sm(n);
        sm.add(PauliString::single(n, 0, Axis::X, 0.5));
        sm.add(PauliString::single(n, 0, Axis::Y, 0.5).phase_shifted(3));
        m.extra_jumps.emplace_back(sm, 15.0);
    }
    return m;
}

DensityState random_state(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<int> pick(0, 5);
    std::vector<PauliEig> eigs(n);
    for (int i = 0; i < n; ++i) eigs[i] = PauliEig(pick(rng));
    return DensityState::from_product(ProductStateSpec::from_eigs(eigs));
}

}  // namespace

TEST_CASE("adaptive propagation agrees with the matrix exponential oracle") {
    std::mt19937_64 rng(5);
    std::vector<double> times{0.0, 2e-4, 7e-4, 1.5e-3};
    for (int trial = 0; trial < 6; ++trial) {
        int n = 2 + trial % 2;
        ModelSpec m = random_model(rng, n, trial % 2 == 0);
        DensityState rho0 = random_state(rng, n);
        auto fast = propagate(m, rho0, times);
        auto oracle = propagate_expm(m, rho0, times);
        REQUIRE(fast.size() == oracle.size());
        for (std::size_t k = 0; k < fast.size(); ++k) {
            CHECK((fast[k].matrix - oracle[k].matrix).cwiseAbs().maxCoeff() <
                  1e-8);
            CHECK(fast[k].check_invariants());
        }
    }
}

TEST_CASE("single-site dephasing decays coherences as exp(-2 Gamma t)") {
    double gamma = 730.0;
    ModelSpec m;
    m.ansatz = AnsatzFamily{AnsatzKind::TwoBodyFull, 1, 0, {}};
    m.coeffs = Eigen::VectorXd::Zero(3);
    m.dephasing = DephasingSpec(gamma * Eigen::MatrixXd::Identity(1, 1));
    DensityState rho0 =
        DensityState::from_product(ProductStateSpec::from_eigs({PauliEig::Xp}));
    std::vector<double> times{0.0, 1e-4, 3e-4, 1e-3, 2e-3};
    OperatorSum x(1, {PauliString::single(1, 0, Axis::X)});
    TimeTrace trace = expectation_trace(m, rho0, x, times);
    for (std::size_t k = 0; k < times.size(); ++k)
        CHECK(std::abs(trace.values[k] - std::exp(-2.0 * gamma * times[k])) <
              1e-6);
}

TEST_CASE("xx coupling oscillates <Z1> as cos(2Jt)") {
    double j = 2500.0;
    ModelSpec m;
    m.ansatz = AnsatzFamily{AnsatzKind::TwoBodyFull, 2, 0, {}};
    m.coeffs = Eigen::VectorXd::Zero(m.ansatz.hamiltonian_parameter_count());
    m.coeffs[6] = j;  // first pair block entry: X X
    DensityState rho0 = DensityState::from_product(
        ProductStateSpec::from_eigs({PauliEig::Zp, PauliEig::Zp}));
    std::vector<double> times{0.0, 1e-4, 2.5e-4, 6e-4, 1e-3};
    OperatorSum z1(2, {PauliString::single(2, 0, Axis::Z)});
    TimeTrace trace = expectation_trace(m, rho0, z1, times);
    for (std::size_t k = 0; k < times.size(); ++k)
        CHECK(trace.values[k] ==
              doctest::Approx(std::cos(2.0 * j * times[k])).epsilon(1e-7));
}

TEST_CASE("unitary fast path matches full propagation") {
    std::mt19937_64 rng(19);
    ModelSpec m = random_model(rng, 3, false);
    DensityState rho0 = random_state(rng, 3);
    std::vector<double> times{0.0, 1e-4, 5e-4, 9e-4};
    MatrixXcd h = m.hamiltonian().dense();
    OperatorSum obs(3, {PauliString::single(3, 1, Axis::Y)});
    std::vector<double> fast =
        hamiltonian_expectations(h, rho0.matrix, obs.dense(), times);
    TimeTrace ref = expectation_trace(m, rho0, obs, times);
    REQUIRE(fast.size() == times.size());
    for (std::size_t k = 0; k < times.size(); ++k)
        CHECK(fast[k] == doctest::Approx(ref.values[k]).epsilon(1e-8));
}

TEST_CASE("shared propagation sweep matches per-observable traces") {
    std::mt19937_64 rng(29);
    ModelSpec m = random_model(rng, 2, true);
    DensityState rho0 = random_state(rng, 2);
    std::vector<double> times{0.0, 3e-4, 8e-4};
    std::vector<OperatorSum> obs{
        OperatorSum(2, {PauliString::single(2, 0, Axis::Z)}),
        OperatorSum(2, {multiply(PauliString::single(2, 0, Axis::X),
                                 PauliString::single(2, 1, Axis::X))})};
    auto shared = expectation_traces(m, rho0, obs, times);
    REQUIRE(shared.size() == 2);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        TimeTrace solo = expectation_trace(m, rho0, obs[i], times);
        for (std::size_t k = 0; k < times.size(); ++k)
            CHECK(shared[i].values[k] ==
                  doctest::Approx(solo.values[k]).epsilon(1e-10));
    }
}

TEST_CASE("density state invariants flag broken matrices") {
    DensityState good = DensityState::from_product(
        ProductStateSpec::from_eigs({PauliEig::Zp}));
    CHECK(good.check_invariants());
    MatrixXcd bad = good.matrix;
    bad(0, 1) = Complex(0.3, 0.1);  // not Hermitian
    CHECK_FALSE(DensityState::from_matrix(1, bad).check_invariants());
    CHECK_FALSE(
        DensityState::from_matrix(1, 2.0 * good.matrix).check_invariants());
}

TEST_CASE("propagation guards") {
    ModelSpec m;
    m.ansatz = AnsatzFamily{AnsatzKind::TwoBodyFull, 1, 0, {}};
    m.coeffs = Eigen::VectorXd::Zero(3);
    DensityState rho0 = DensityState::from_product(
        ProductStateSpec::from_eigs({PauliEig::Zp, PauliEig::Zp}));
    CHECK_THROWS_AS(propagate(m, rho0, {0.0}), DimensionError);
    CHECK_THROWS_AS(propagate(m,
                              DensityState::from_product(
                                  ProductStateSpec::from_eigs({PauliEig::Zp})),
                              {1e-3, 5e-4}),
                    std::invalid_argument);
}
