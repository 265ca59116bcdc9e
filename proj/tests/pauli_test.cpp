#include <doctest.h>

#include <random>

#include "beqs/pauli.hpp"

using namespace beqs;

namespace {

PauliString random_string(std::mt19937_64& rng, int n, bool unit_weight = false) {
    std::uniform_int_distribution<int> axis_pick(0, 3);
    std::uniform_int_distribution<int> phase_pick(0, 3);
    std::uniform_real_distribution<double> coeff_pick(-2.0, 2.0);
    std::vector<Axis> axes(n);
    for (int i = 0; i < n; ++i) axes[i] = Axis(axis_pick(rng));
    if (unit_weight) return PauliString::from_axes(axes);
    return PauliString::from_axes(axes, coeff_pick(rng), phase_pick(rng));
}

double dense_diff(const MatrixXcd& a, const MatrixXcd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("single-site dense matrices and bit ordering") {
    // Basis index bit i addresses site i: Z on site 0 alternates fastest.
    MatrixXcd z0 = PauliString::single(2, 0, Axis::Z).dense();
    CHECK(z0(0, 0) == Complex(1, 0));
    CHECK(z0(1, 1) == Complex(-1, 0));
    CHECK(z0(2, 2) == Complex(1, 0));
    CHECK(z0(3, 3) == Complex(-1, 0));
    MatrixXcd z1 = PauliString::single(2, 1, Axis::Z).dense();
    CHECK(z1(0, 0) == Complex(1, 0));
    CHECK(z1(1, 1) == Complex(1, 0));
    CHECK(z1(2, 2) == Complex(-1, 0));
    CHECK(z1(3, 3) == Complex(-1, 0));
    // X on site 0 swaps within pairs.
    MatrixXcd x0 = PauliString::single(2, 0, Axis::X).dense();
    CHECK(x0(0, 1) == Complex(1, 0));
    CHECK(x0(2, 3) == Complex(1, 0));
}

TEST_CASE("products match the dense oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        int n = 1 + int(rng() % 4);
        PauliString p = random_string(rng, n);
        PauliString q = random_string(rng, n);
        PauliString pq = multiply(p, q);
        CHECK(dense_diff(pq.dense(), p.dense() * q.dense()) < 1e-12);
    }
}

TEST_CASE("product closure is exact for unit-weight strings") {
    // i^k bookkeeping has no floating-point phase: products of unit-weight
    // strings stay unit-weight with integer quarter phases.
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        int n = 1 + int(rng() % 4);
        PauliString p = random_string(rng, n, true);
        PauliString q = random_string(rng, n, true);
        PauliString pq = multiply(p, q);
        CHECK(pq.coeff() == 1.0);
        CHECK(pq.phase_pow() >= 0);
        CHECK(pq.phase_pow() <= 3);
    }
}

TEST_CASE("commutator matches the dense oracle and the symplectic check") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        int n = 1 + int(rng() % 4);
        PauliString p = random_string(rng, n);
        PauliString q = random_string(rng, n);
        OperatorSum c = commutator(p, q);
        MatrixXcd oracle = p.dense() * q.dense() - q.dense() * p.dense();
        CHECK(dense_diff(c.dense(), oracle) < 1e-12);
        CHECK(p.commutes_with(q) == (oracle.cwiseAbs().maxCoeff() < 1e-12));
        if (!c.empty()) CHECK(c.size() == 1);
    }
}

TEST_CASE("anticommutator matches the dense oracle") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + int(rng() % 3);
        PauliString p = random_string(rng, n);
        PauliString q = random_string(rng, n);
        MatrixXcd oracle = p.dense() * q.dense() + q.dense() * p.dense();
        CHECK(dense_diff(anticommutator(p, q).dense(), oracle) < 1e-12);
    }
}

TEST_CASE("operator sums canonicalize: merge, sort, drop zeros") {
    PauliString x1 = PauliString::single(2, 0, Axis::X, 0.5);
    PauliString z2 = PauliString::single(2, 1, Axis::Z, 1.5);
    OperatorSum s(2);
    s.add(z2);
    s.add(x1);
    s.add(x1);
    s.add(z2.scaled(-1.0));
    REQUIRE(s.size() == 1);
    CHECK(s.terms()[0].same_axes(x1));
    CHECK(s.terms()[0].weight() == Complex(1.0, 0.0));
}

TEST_CASE("operator sum algebra matches dense") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + int(rng() % 2);
        OperatorSum a(n), b(n);
        for (int k = 0; k < 4; ++k) {
            a.add(random_string(rng, n));
            b.add(random_string(rng, n));
        }
        CHECK(dense_diff(multiply(a, b).dense(), a.dense() * b.dense()) < 1e-11);
        CHECK(dense_diff(add(a, b).dense(), a.dense() + b.dense()) < 1e-12);
        CHECK(dense_diff(commutator(a, b).dense(),
                         a.dense() * b.dense() - b.dense() * a.dense()) <
              1e-11);
    }
}

TEST_CASE("text round trip") {
    std::mt19937_64 rng(57);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + int(rng() % 6);
        PauliString p = random_string(rng, n);
        PauliString q = PauliString::parse(p.to_string(), n);
        CHECK(q.same_axes(p));
        CHECK(std::abs(q.weight() - p.weight()) < 1e-12 * (1 + std::abs(p.weight())));
    }
    CHECK_THROWS_AS(PauliString::parse("1 * X9", 4), DimensionError);
    CHECK_THROWS_AS(PauliString::parse("no star", 4), std::invalid_argument);
}

TEST_CASE("dimension and capacity guards") {
    PauliString a = PauliString::single(2, 0, Axis::X);
    PauliString b = PauliString::single(3, 0, Axis::X);
    CHECK_THROWS_AS(multiply(a, b), DimensionError);
    CHECK_THROWS_AS(PauliString::identity(20).dense(), CapacityError);
}
