#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beqs/pauli.hpp"
#include "beqs/states.hpp"

namespace beqs {

enum class AnsatzKind { Ising, XY, XYWithField, TwoBodyFull, Custom };

std::string to_string(AnsatzKind k);
AnsatzKind ansatz_kind_from_string(const std::string& s);

/// An operator basis {h_m} of unit-weight Hermitian Pauli strings.
///
/// Frozen coefficient ordering: single-site terms first (site-major, axes
/// X,Y,Z restricted by family), then two-site terms (i<j lexicographic,
/// axis pairs xx,xy,...,zz restricted by family). Dephasing parameters, when
/// present, follow the Hamiltonian block as the full N x N matrix row-major.
struct AnsatzFamily {
    AnsatzKind kind = AnsatzKind::XYWithField;
    int n_sites = 0;
    int k = 0;  // max interaction distance for XYWithField; 0 means all-to-all
    std::vector<PauliString> custom_basis;

    int hamiltonian_parameter_count() const;
    /// Hamiltonian + general-dephasing parameter count (adds N^2).
    int parameter_count_with_dephasing() const;
};

std::vector<PauliString> build_basis(const AnsatzFamily& family);

/// Symmetric dephasing matrix Gamma (rad/s) of Eq.-style sigma^z jumps.
struct DephasingSpec {
    Eigen::MatrixXd gamma;

    explicit DephasingSpec(Eigen::MatrixXd g);
    int n_sites() const { return int(gamma.rows()); }
    /// Smallest eigenvalue >= -1e-8 * ||gamma||_op.
    bool is_physical() const;
    double min_eigenvalue() const;
    double op_norm() const;
};

/// A concrete generator: Hamiltonian coefficients over an ansatz basis plus
/// optional dephasing matrix and extra jump operators.
struct ModelSpec {
    AnsatzFamily ansatz;
    Eigen::VectorXd coeffs;  // rad/s, ordering fixed by build_basis
    std::optional<DephasingSpec> dephasing;
    std::vector<std::pair<OperatorSum, double>> extra_jumps;  // (L_m, rate)

    int n_sites() const { return ansatz.n_sites; }
    OperatorSum hamiltonian() const;
    bool has_dissipation() const;

    void validate() const;
};

/// L^dag(P) for the full model, as a canonical OperatorSum.
OperatorSum adjoint_generator_action(const ModelSpec& model,
                                     const OperatorSum& observable);

/// Per-column building blocks used by the constraint-matrix assembler.
/// i [h, P].
OperatorSum adjoint_hamiltonian_column(const PauliString& h, const PauliString& p);
/// sigma^z_j P sigma^z_i - 1/2 {sigma^z_j sigma^z_i, P}  (unit Gamma_ij).
OperatorSum adjoint_dephasing_column(int i, int j, const PauliString& p);
/// rate * (L^dag P L - 1/2 {L^dag L, P}).
OperatorSum adjoint_jump_action(const OperatorSum& jump, double rate,
                                const PauliString& p);

/// Named coupling presets reproducing the experimental scenarios.
struct ScenarioPreset {
    std::string name;
    bool exponential = false;  // false: J0/d^alpha, true: J0' e^{-tau d}
    double amplitude = 0.0;    // J0 or J0', rad/s
    double exponent = 0.0;     // alpha or tau
    double collective_dephasing = 0.0;  // rad/s
    double field_min = 0.0;    // triangular B_i profile endpoints, rad/s
    double field_peak = 0.0;
};

const std::vector<ScenarioPreset>& preset_catalogue();
const ScenarioPreset& find_preset(const std::string& name);

/// Symmetric, zero-diagonal, strictly positive coupling matrix.
Eigen::MatrixXd preset_couplings(const std::string& name, int n_sites);
Eigen::MatrixXd coupling_matrix(const ScenarioPreset& p, int n_sites);

/// Triangular field profile peaking mid-chain.
Eigen::VectorXd preset_field(const ScenarioPreset& p, int n_sites);

/// Full hidden model for a preset: XY couplings + field + collective
/// dephasing, expressed over the given ansatz family.
ModelSpec make_scenario_model(const std::string& preset_name,
                              const AnsatzFamily& family);

/// Coefficient extraction (round-trip inverse of assembling a ModelSpec from
/// the flat vector: Hamiltonian block then row-major Gamma when present).
Eigen::VectorXd flatten_coefficients(const ModelSpec& model);
ModelSpec model_from_flat(const AnsatzFamily& family, const Eigen::VectorXd& flat,
                          bool with_dephasing);

}  // namespace beqs
