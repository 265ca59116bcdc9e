#include <doctest.h>

#include <random>

#include "beqs/model.hpp"
#include "beqs/states.hpp"

using namespace beqs;

namespace {

double dense_diff(const MatrixXcd& a, const MatrixXcd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

ProductStateSpec random_pure_state(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<int> pick(0, 5);
    std::vector<PauliEig> eigs(n);
    for (int i = 0; i < n; ++i) eigs[i] = PauliEig(pick(rng));
    return ProductStateSpec::from_eigs(eigs);
}

}  // namespace

TEST_CASE("site states: labels, bloch vectors, dense form") {
    SiteState xp = SiteState::from_eig(PauliEig::Xp);
    CHECK(xp.bloch[0] == doctest::Approx(1.0));
    CHECK(xp.bloch[1] == doctest::Approx(0.0));
    MatrixXcd m = xp.dense();
    CHECK(m(0, 1).real() == doctest::Approx(0.5));
    CHECK(std::abs(m.trace() - Complex(1, 0)) < 1e-14);
    SiteState mixed = SiteState::maximally_mixed();
    CHECK(dense_diff(mixed.dense(), 0.5 * MatrixXcd::Identity(2, 2)) < 1e-15);
}

TEST_CASE("expectation on product states matches the dense trace") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> axis_pick(0, 3);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + int(rng() % 3);
        ProductStateSpec st = random_pure_state(rng, n);
        std::vector<Axis> axes(n);
        for (int i = 0; i < n; ++i) axes[i] = Axis(axis_pick(rng));
        PauliString p = PauliString::from_axes(axes, 1.7, int(rng() % 4) * 2);
        Complex tr = (st.dense() * p.dense()).trace();
        CHECK(expectation_product_state(p, st) ==
              doctest::Approx(tr.real()).epsilon(1e-10));
    }
}

TEST_CASE("mixed sites zero out any operator supported there") {
    ProductStateSpec st = ProductStateSpec::mixed_except(
        3, {{1, PauliEig::Zp}});
    CHECK(expectation_product_state(PauliString::single(3, 0, Axis::Z), st) ==
          0.0);
    CHECK(expectation_product_state(PauliString::single(3, 1, Axis::Z), st) ==
          doctest::Approx(1.0));
    // Dense cross-check of the partial trace structure.
    MatrixXcd rho = st.dense();
    CHECK(std::abs(rho.trace() - Complex(1, 0)) < 1e-12);
    CHECK((rho * PauliString::single(3, 2, Axis::X).dense()).trace().real() ==
          doctest::Approx(0.0));
}

TEST_CASE("global rotation of |1...1>") {
    // theta = pi about y maps |1> to |0> up to phase.
    ProductStateSpec st =
        ProductStateSpec::global_rotation(2, M_PI, {0.0, 1.0, 0.0});
    CHECK(st.site(0).bloch[2] == doctest::Approx(1.0));
    // theta = pi/2 about y gives Bloch vector along -x.
    ProductStateSpec half =
        ProductStateSpec::global_rotation(1, M_PI / 2, {0.0, 1.0, 0.0});
    CHECK(half.site(0).bloch[0] == doctest::Approx(-1.0));
    CHECK(std::abs(half.site(0).bloch[2]) < 1e-12);
    // Per-site angle scaling moves only the scaled site.
    ProductStateSpec scaled = ProductStateSpec::global_rotation(
        2, M_PI, {0.0, 1.0, 0.0}, {1.0, 0.95});
    CHECK(scaled.site(0).bloch[2] == doctest::Approx(1.0));
    CHECK(scaled.site(1).bloch[2] < 1.0);
}

TEST_CASE("ansatz basis counts and ordering") {
    AnsatzFamily xyf{AnsatzKind::XYWithField, 6, 0, {}};
    auto basis = build_basis(xyf);
    CHECK(basis.size() == 6 + 2 * 15);
    CHECK(xyf.hamiltonian_parameter_count() == 36);
    // Singles first, all axes Z for the field family.
    for (int i = 0; i < 6; ++i) CHECK(basis[i].support_size() == 1);

    AnsatzFamily ising{AnsatzKind::Ising, 4, 0, {}};
    CHECK(build_basis(ising).size() == 4 + 6);

    AnsatzFamily full{AnsatzKind::TwoBodyFull, 3, 0, {}};
    CHECK(build_basis(full).size() == 9 + 27);

    AnsatzFamily banded{AnsatzKind::XYWithField, 5, 2, {}};
    CHECK(build_basis(banded).size() == 5 + 2 * 4);

    // The 51-ion learning problem size.
    AnsatzFamily big{AnsatzKind::TwoBodyFull, 51, 0, {}};
    CHECK(big.parameter_count_with_dephasing() == 14229);
}

TEST_CASE("flat coefficient round trip with dephasing") {
    AnsatzFamily fam{AnsatzKind::XYWithField, 4, 0, {}};
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd flat(fam.parameter_count_with_dephasing());
    for (long i = 0; i < flat.size(); ++i) flat[i] = g(rng);
    // Symmetrize the gamma block so the round trip is exact.
    int nh = fam.hamiltonian_parameter_count();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j) {
            double s = 0.5 * (flat[nh + 4 * i + j] + flat[nh + 4 * j + i]);
            flat[nh + 4 * i + j] = flat[nh + 4 * j + i] = s;
        }
    ModelSpec model = model_from_flat(fam, flat, true);
    Eigen::VectorXd back = flatten_coefficients(model);
    REQUIRE(back.size() == flat.size());
    CHECK((back - flat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adjoint generator action matches the dense oracle") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 2 + int(trial % 2);
        AnsatzFamily fam{AnsatzKind::TwoBodyFull, n, 0, {}};
        ModelSpec model;
        model.ansatz = fam;
        model.coeffs.resize(fam.hamiltonian_parameter_count());
        for (long i = 0; i < model.coeffs.size(); ++i) model.coeffs[i] = g(rng);
        Eigen::MatrixXd gamma(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j)
                gamma(i, j) = gamma(j, i) = 0.3 * g(rng);
        model.dephasing = DephasingSpec(gamma);
        OperatorSum jump(n);
        jump.add(PauliString::single(n, 0, Axis::X, 0.5));
        jump.add(PauliString::single(n, 0, Axis::Y, 0.5).phase_shifted(3));
        model.extra_jumps.emplace_back(jump, 0.7);

        PauliString p = PauliString::single(n, int(rng() % n),
                                            Axis(1 + int(rng() % 3)));
        OperatorSum out = adjoint_generator_action(model, OperatorSum(n, {p}));

        MatrixXcd h = model.hamiltonian().dense();
        MatrixXcd pd = p.dense();
        MatrixXcd oracle = Complex(0, 1) * (h * pd - pd * h);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                MatrixXcd zi = PauliString::single(n, i, Axis::Z).dense();
                MatrixXcd zj = PauliString::single(n, j, Axis::Z).dense();
                oracle += gamma(i, j) *
                          (zj * pd * zi - 0.5 * (zj * zi * pd + pd * zj * zi));
            }
        MatrixXcd l = jump.dense();
        MatrixXcd ld = l.adjoint();
        oracle += 0.7 * (ld * pd * l - 0.5 * (ld * l * pd + pd * ld * l));
        CHECK(dense_diff(out.dense(), oracle) < 1e-10);
    }
}

TEST_CASE("dephasing spec guards") {
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 0.5, 0.2, 1.0;
    CHECK_THROWS_AS(DephasingSpec{bad}, std::invalid_argument);
    Eigen::MatrixXd ok = Eigen::MatrixXd::Identity(2, 2);
    CHECK(DephasingSpec(ok).is_physical());
    Eigen::MatrixXd indef(2, 2);
    indef << 1.0, 2.0, 2.0, 1.0;
    CHECK_FALSE(DephasingSpec(indef).is_physical());
}

TEST_CASE("scenario presets") {
    const ScenarioPreset& ten = find_preset("power_law_10ion");
    CHECK(ten.amplitude == doctest::Approx(576.0));
    CHECK(ten.exponent == doctest::Approx(1.19));
    Eigen::MatrixXd j = preset_couplings("power_law_10ion", 10);
    CHECK(j(0, 1) == doctest::Approx(576.0));
    CHECK(j(0, 2) == doctest::Approx(576.0 * std::pow(2.0, -1.19)));
    CHECK((j - j.transpose()).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd b = preset_field(find_preset("power_law_51ion"), 51);
    CHECK(b.minCoeff() == doctest::Approx(-200.0));
    CHECK(b.maxCoeff() == doctest::Approx(250.0));

    AnsatzFamily fam{AnsatzKind::XYWithField, 6, 0, {}};
    ModelSpec model = make_scenario_model("power_law_10ion", fam);
    REQUIRE(model.dephasing.has_value());
    // Constant gamma: rank-1 collective structure, total rate preserved.
    CHECK(model.dephasing->gamma(0, 0) ==
          doctest::Approx(ten.collective_dephasing / 6.0));
    CHECK(model.dephasing->is_physical());
    // xx and yy blocks carry J/2.
    auto basis = build_basis(fam);
    for (std::size_t m = 0; m < basis.size(); ++m) {
        if (basis[m].support_size() != 2) continue;
        CHECK(std::abs(model.coeffs[long(m)]) > 0.0);
    }
    CHECK_THROWS_AS(find_preset("nope"), std::invalid_argument);
}
