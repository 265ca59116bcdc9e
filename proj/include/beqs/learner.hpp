#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "beqs/model.hpp"
#include "beqs/shadows.hpp"

namespace beqs {

/// Dissipative column structure of a learning ansatz.
struct RateFamily {
    std::string label;
    std::vector<OperatorSum> jumps;  // one shared rate for all listed jumps
};

enum class DissipatorModel { None, GeneralGamma, RateFamilies };

struct DissipatorSpec {
    DissipatorModel model = DissipatorModel::None;
    std::vector<RateFamily> families;  // used for RateFamilies

    static DissipatorSpec none() { return {}; }
    static DissipatorSpec general_gamma() {
        return {DissipatorModel::GeneralGamma, {}};
    }
    /// Local dephasing, collective dephasing and spontaneous emission as
    /// three scalar-rate families (the ten-ion ansatz).
    static DissipatorSpec standard_families(int n_sites);
};

struct RowMeta {
    PauliString observable{1, 0, 0};
    int init_index = -1;
    std::string method;
};

/// The constraint system b = M c whose least-squares solution is the
/// learned generator.
struct LinearSystem {
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd target;
    std::vector<RowMeta> row_meta;
    std::vector<std::string> col_meta;
    int n_hamiltonian_cols = 0;
    int gamma_block_start = -1;  // -1 when no general-gamma block
    int gamma_n_sites = 0;
    int dropped_rows = 0;

    long rows() const { return matrix.rows(); }
    long cols() const { return matrix.cols(); }
    double sparsity() const;  // fraction of zero entries
    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix); }
};

struct RegularizerSpec {
    double beta = 0.0;
    Eigen::MatrixXd structure;  // columns spanning the favored subspace (G)

    /// Orthonormalized G and the condition number of the raw G^T G.
    Eigen::MatrixXd orthonormal_structure() const;
    double structure_condition() const;
};

/// Distance-decay profile columns e^{-tau d} (and optionally d^{-alpha}) over
/// a parameter grid, acting on the two-site coupling block of the ansatz.
RegularizerSpec make_decay_regularizer(const AnsatzFamily& family, double beta,
                                       const std::vector<double>& tau_grid,
                                       const std::vector<double>& alpha_grid = {});

struct LearnResult {
    Eigen::VectorXd coeffs;
    double residual_norm = 0.0;
    std::string method;
    int iterations = 0;
    double psd_gap = 0.0;  // -min eig(Gamma)/||Gamma||, 0 when inactive
    long rank = -1;

    ModelSpec to_model(const AnsatzFamily& family, const DissipatorSpec& dis) const;
};

struct IntegralBuildOptions {
    std::vector<double> times;          // estimation grid (subset of dataset)
    std::vector<int> init_indices;      // states to use; empty = all
    const std::vector<int>* weights = nullptr;  // per-setting resample counts
};

/// Integral-method system: b_k = <P_k>_T - <P_k>_0, Hamiltonian columns are
/// trapezoid integrals of commutator traces, dissipative columns use the
/// adjoint-dissipator form. Rows with unestimable entries are dropped.
LinearSystem build_integral_system(const ShadowEstimator& est,
                                   const AnsatzFamily& ansatz,
                                   const DissipatorSpec& dis,
                                   const IntegralBuildOptions& opts);

struct DifferentialBuildOptions {
    int fit_degree = 2;
    const std::vector<int>* weights = nullptr;
};

/// Differential-method system: targets are t=0 derivatives from polynomial
/// fits of matched-setting traces, matrix entries computed analytically on
/// the partially mixed states. Sparse by construction.
LinearSystem build_differential_system(const ShadowEstimator& est,
                                       const AnsatzFamily& ansatz,
                                       const DissipatorSpec& dis,
                                       const DifferentialBuildOptions& opts = {});

/// One differential row given directly (oracle tests, scalability checks).
struct DifferentialRow {
    PauliString observable;
    ProductStateSpec state;
    double derivative = 0.0;
    double std_error = 0.0;
};

LinearSystem build_differential_system_from_rows(
    const std::vector<DifferentialRow>& rows, const AnsatzFamily& ansatz,
    const DissipatorSpec& dis);

/// Minimizer of ||Mc - b||^2 + beta ||(I - GG^T) c||^2; minimum-norm on rank
/// deficiency.
LearnResult solve_least_squares(const LinearSystem& sys,
                                const std::optional<RegularizerSpec>& reg = {});

struct PsdSolveOptions {
    double tolerance = 1e-8;
    int max_iterations = 5000;
    double admm_rho = 0.0;  // 0 = auto
};

/// Same objective subject to Gamma(c) >= 0, via ADMM with eigenvalue
/// projection of the dephasing block.
LearnResult solve_psd_constrained(const LinearSystem& sys,
                                  const std::optional<RegularizerSpec>& reg = {},
                                  const PsdSolveOptions& opts = {});

struct SweepEntry {
    std::string ansatz_label;
    double n_shots = 0.0;
    double residual = 0.0;
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    std::vector<std::string> labels;
    std::vector<double> slopes;        // log-log fit per label
    std::vector<bool> plateau_flags;   // final-decade slope > -0.2
};

struct SweepAnsatz {
    std::string label;
    AnsatzFamily family;
    DissipatorSpec dissipator;
};

/// Residual norm versus measurement budget over nested subsamples of one
/// integral acquisition. Budgets are per-(state, time) setting counts.
SweepResult residual_scaling_sweep(const ShadowEstimator& est,
                                   const std::vector<SweepAnsatz>& ansatze,
                                   const std::vector<int>& settings_budgets,
                                   const IntegralBuildOptions& opts);

}  // namespace beqs
