#include "beqs/model.hpp"

#include <Eigen/Eigenvalues>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace beqs {

std::string to_string(AnsatzKind k) {
    switch (k) {
        case AnsatzKind::Ising: return "ising";
        case AnsatzKind::XY: return "xy";
        case AnsatzKind::XYWithField: return "xy_with_field";
        case AnsatzKind::TwoBodyFull: return "two_body_full";
        default: return "custom";
    }
}

AnsatzKind ansatz_kind_from_string(const std::string& s) {
    if (s == "ising") return AnsatzKind::Ising;
    if (s == "xy") return AnsatzKind::XY;
    if (s == "xy_with_field") return AnsatzKind::XYWithField;
    if (s == "two_body_full") return AnsatzKind::TwoBodyFull;
    if (s == "custom") return AnsatzKind::Custom;
    throw std::invalid_argument("unknown ansatz kind: " + s);
}

namespace {

struct FamilyShape {
    std::vector<Axis> single_axes;
    std::vector<std::pair<Axis, Axis>> pair_axes;
    int max_distance;  // pairs restricted to |i-j| < max_distance; 0 = none
};

FamilyShape family_shape(const AnsatzFamily& f) {
    const int N = f.n_sites;
    switch (f.kind) {
        case AnsatzKind::Ising:
            return {{Axis::Z}, {{Axis::X, Axis::X}}, N};
        case AnsatzKind::XY:
            return {{}, {{Axis::X, Axis::X}, {Axis::Y, Axis::Y}}, N};
        case AnsatzKind::XYWithField: {
            int k = f.k > 0 ? f.k : N;
            if (k < 2 || k > N)
                throw std::invalid_argument(
                    "xy_with_field: k must be in [2, N]");
            return {{Axis::Z}, {{Axis::X, Axis::X}, {Axis::Y, Axis::Y}}, k};
        }
        case AnsatzKind::TwoBodyFull: {
            std::vector<std::pair<Axis, Axis>> pairs;
            for (Axis a : {Axis::X, Axis::Y, Axis::Z})
                for (Axis b : {Axis::X, Axis::Y, Axis::Z})
                    pairs.emplace_back(a, b);
            return {{Axis::X, Axis::Y, Axis::Z}, pairs, N};
        }
        default:
            return {{}, {}, 0};
    }
}

}  // namespace

std::vector<PauliString> build_basis(const AnsatzFamily& family) {
    if (family.kind == AnsatzKind::Custom) return family.custom_basis;
    const int N = family.n_sites;
    if (N < 1) throw std::invalid_argument("build_basis: n_sites < 1");
    FamilyShape shape = family_shape(family);
    std::vector<PauliString> basis;
    for (int i = 0; i < N; ++i)
        for (Axis a : shape.single_axes)
            basis.push_back(PauliString::single(N, i, a));
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) {
            if (j - i >= shape.max_distance) continue;
            for (auto [a, b] : shape.pair_axes) {
                PauliString p = multiply(PauliString::single(N, i, a),
                                         PauliString::single(N, j, b));
                basis.push_back(p);
            }
        }
    return basis;
}

int AnsatzFamily::hamiltonian_parameter_count() const {
    return int(build_basis(*this).size());
}

int AnsatzFamily::parameter_count_with_dephasing() const {
    return hamiltonian_parameter_count() + n_sites * n_sites;
}

DephasingSpec::DephasingSpec(Eigen::MatrixXd g) : gamma(std::move(g)) {
    if (gamma.rows() != gamma.cols())
        throw std::invalid_argument("dephasing matrix must be square");
    if ((gamma - gamma.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * std::max(1.0, gamma.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("dephasing matrix must be symmetric");
    gamma = 0.5 * (gamma + gamma.transpose().eval());
}

double DephasingSpec::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma);
    return es.eigenvalues().minCoeff();
}

double DephasingSpec::op_norm() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool DephasingSpec::is_physical() const {
    return min_eigenvalue() >= -1e-8 * std::max(op_norm(), 1e-300);
}

OperatorSum ModelSpec::hamiltonian() const {
    auto basis = build_basis(ansatz);
    if (int(basis.size()) != coeffs.size())
        throw std::invalid_argument("coeffs length != basis size");
    std::vector<PauliString> terms;
    terms.reserve(basis.size());
    for (std::size_t m = 0; m < basis.size(); ++m) {
        if (coeffs[long(m)] == 0.0) continue;
        terms.push_back(basis[m].scaled(coeffs[long(m)]));
    }
    return OperatorSum(ansatz.n_sites, std::move(terms));
}

bool ModelSpec::has_dissipation() const {
    if (dephasing && dephasing->gamma.cwiseAbs().maxCoeff() > 0) return true;
    for (const auto& [op, rate] : extra_jumps)
        if (rate != 0.0) return true;
    return false;
}

void ModelSpec::validate() const {
    if (int(build_basis(ansatz).size()) != coeffs.size())
        throw std::invalid_argument("coeffs length != ansatz parameter count");
    if (dephasing && dephasing->n_sites() != ansatz.n_sites)
        throw DimensionError("dephasing matrix size != n_sites");
    for (const auto& [op, rate] : extra_jumps)
        if (op.n_sites() != ansatz.n_sites)
            throw DimensionError("jump operator size != n_sites");
}

OperatorSum adjoint_hamiltonian_column(const PauliString& h,
                                       const PauliString& p) {
    return commutator(h, p).phase_shifted(1);
}

OperatorSum adjoint_dephasing_column(int i, int j, const PauliString& p) {
    const int N = p.n_sites();
    PauliString zi = PauliString::single(N, i, Axis::Z);
    PauliString zj = PauliString::single(N, j, Axis::Z);
    OperatorSum out(N);
    out.add(multiply(multiply(zj, p), zi));
    PauliString zz = multiply(zj, zi);
    out.add(multiply(zz, p).scaled(-0.5));
    out.add(multiply(p, zz).scaled(-0.5));
    return out;
}

OperatorSum adjoint_jump_action(const OperatorSum& jump, double rate,
                                const PauliString& p) {
    const int N = p.n_sites();
    // L^dag built term-wise: conjugate of weight i^k is i^{-k} for real coeff.
    std::vector<PauliString> dag_terms;
    for (const auto& t : jump.terms())
        dag_terms.push_back(t.phase_shifted(-2 * t.phase_pow()));
    OperatorSum ldag(N, std::move(dag_terms));
    OperatorSum pcopy(N, {p});
    OperatorSum sandwich = multiply(multiply(ldag, pcopy), jump);
    OperatorSum ldl = multiply(ldag, jump);
    OperatorSum out = sandwich;
    out.add(multiply(ldl, pcopy).scaled(-0.5));
    out.add(multiply(pcopy, ldl).scaled(-0.5));
    return out.scaled(rate);
}

OperatorSum adjoint_generator_action(const ModelSpec& model,
                                     const OperatorSum& observable) {
    if (observable.n_sites() != model.n_sites())
        throw DimensionError("adjoint action: site-count mismatch");
    const int N = model.n_sites();
    OperatorSum out(N);
    OperatorSum h = model.hamiltonian();
    out.add(commutator(h, observable).phase_shifted(1));
    for (const auto& p : observable.terms()) {
        if (model.dephasing) {
            const auto& g = model.dephasing->gamma;
            // Only Z columns overlapping the support can contribute; terms
            // with a dangling sigma^z cancel identically but skipping them
            // keeps assembly cheap.
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) {
                    if (g(i, j) == 0.0) continue;
                    out.add(adjoint_dephasing_column(i, j, p).scaled(g(i, j)));
                }
        }
        for (const auto& [jump, rate] : model.extra_jumps) {
            if (rate == 0.0) continue;
            out.add(adjoint_jump_action(jump, rate, p));
        }
    }
    return out;
}

const std::vector<ScenarioPreset>& preset_catalogue() {
    static const std::vector<ScenarioPreset> presets = {
        // 10-ion chain: power-law couplings, collective dephasing at
        // ~0.15 J0, triangular field profile.
        {"power_law_10ion", false, 576.0, 1.19, 0.15 * 576.0, -50.0, 80.0},
        // 51-ion chain couplings from the power-law approximation.
        {"power_law_51ion", false, 185.0, 0.97, 364.5, -200.0, 250.0},
        // 51-ion exponential decay law.
        {"exponential_51ion", true, 130.2, 0.28, 364.5, -200.0, 250.0},
    };
    return presets;
}

const ScenarioPreset& find_preset(const std::string& name) {
    for (const auto& p : preset_catalogue())
        if (p.name == name) return p;
    throw std::invalid_argument("unknown preset: " + name);
}

Eigen::MatrixXd coupling_matrix(const ScenarioPreset& p, int n_sites) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n_sites, n_sites);
    for (int i = 0; i < n_sites; ++i)
        for (int j = 0; j < n_sites; ++j) {
            if (i == j) continue;
            double d = std::abs(i - j);
            J(i, j) = p.exponential ? p.amplitude * std::exp(-p.exponent * d)
                                    : p.amplitude / std::pow(d, p.exponent);
        }
    return J;
}

Eigen::MatrixXd preset_couplings(const std::string& name, int n_sites) {
    return coupling_matrix(find_preset(name), n_sites);
}

Eigen::VectorXd preset_field(const ScenarioPreset& p, int n_sites) {
    Eigen::VectorXd B(n_sites);
    double mid = 0.5 * (n_sites - 1);
    for (int i = 0; i < n_sites; ++i) {
        double frac = mid > 0 ? 1.0 - std::abs(i - mid) / mid : 1.0;
        B[i] = p.field_min + (p.field_peak - p.field_min) * frac;
    }
    return B;
}

ModelSpec make_scenario_model(const std::string& preset_name,
                              const AnsatzFamily& family) {
    const ScenarioPreset& preset = find_preset(preset_name);
    const int N = family.n_sites;
    Eigen::MatrixXd J = coupling_matrix(preset, N);
    Eigen::VectorXd B = preset_field(preset, N);
    auto basis = build_basis(family);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(long(basis.size()));
    for (std::size_t m = 0; m < basis.size(); ++m) {
        const PauliString& h = basis[m];
        if (h.support_size() == 1) {
            int site = std::countr_zero(h.support_mask());
            if (h.axis(site) == Axis::Z) c[long(m)] = B[site];
        } else if (h.support_size() == 2) {
            uint64_t mask = h.support_mask();
            int i = std::countr_zero(mask);
            int j = std::countr_zero(mask & (mask - 1));
            Axis a = h.axis(i), b = h.axis(j);
            // XY model: J/2 on both xx and yy.
            if ((a == Axis::X && b == Axis::X) || (a == Axis::Y && b == Axis::Y))
                c[long(m)] = 0.5 * J(i, j);
        }
    }
    ModelSpec model{family, c, std::nullopt, {}};
    if (preset.collective_dephasing != 0.0) {
        Eigen::MatrixXd gamma = Eigen::MatrixXd::Constant(
            N, N, preset.collective_dephasing / N);
        model.dephasing = DephasingSpec(gamma);
    }
    return model;
}

Eigen::VectorXd flatten_coefficients(const ModelSpec& model) {
    const int N = model.n_sites();
    long m = model.coeffs.size();
    long total = m + (model.dephasing ? long(N) * N : 0);
    Eigen::VectorXd flat(total);
    flat.head(m) = model.coeffs;
    if (model.dephasing) {
        const auto& g = model.dephasing->gamma;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) flat[m + long(i) * N + j] = g(i, j);
    }
    return flat;
}

ModelSpec model_from_flat(const AnsatzFamily& family, const Eigen::VectorXd& flat,
                          bool with_dephasing) {
    const int N = family.n_sites;
    long m = family.hamiltonian_parameter_count();
    long expected = m + (with_dephasing ? long(N) * N : 0);
    if (flat.size() != expected)
        throw std::invalid_argument("model_from_flat: bad vector length");
    ModelSpec model{family, flat.head(m), std::nullopt, {}};
    if (with_dephasing) {
        Eigen::MatrixXd g(N, N);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) g(i, j) = flat[m + long(i) * N + j];
        // Row-major Gamma block; symmetrize to absorb least-squares noise
        // split across the redundant (i,j)/(j,i) parameters.
        model.dephasing = DephasingSpec(0.5 * (g + g.transpose().eval()));
    }
    return model;
}

}  // namespace beqs
