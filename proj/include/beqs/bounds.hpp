#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "beqs/model.hpp"
#include "beqs/states.hpp"

namespace beqs {

/// One confidence level under the three conventions in use: tail parameter z,
/// success probability p = 1 - 2 e^{-z^2/2}, failure budget eta = 1 - p.
struct Confidence {
    double z = 0.0;
    double p = 0.0;

    static Confidence from_z(double z);      // rejects z with p <= 0
    static Confidence from_p(double p);      // p in (0, 1)
    static Confidence from_eta(double eta);  // eta in (0, 1)
    double eta() const { return 1.0 - p; }
};

struct BoundConstants {
    double c_subg = 0.5;
    double kappa = 0.125;
};

/// Ensemble-spread description for the long-time bounds: a uniform delta with
/// parameter count, optionally refined by per-parameter deltas or a full
/// coefficient covariance.
struct BoundInputs {
    double t = 0.0;                 // seconds
    double delta = 0.0;             // rad/s, uniform spread
    int m_eff = 0;                  // parameter count (light-cone-restricted)
    double op_norm = 1.0;
    Confidence confidence = Confidence::from_p(0.95);
    std::optional<Eigen::VectorXd> per_parameter_delta;
    std::optional<Eigen::MatrixXd> sigma;  // full coefficient covariance
    BoundConstants constants;

    void validate() const;
    /// sqrt(sum delta_i^2): delta*sqrt(M) uniform, ||Sigma^{1/2}||_F general.
    double effective_spread() const;
};

/// (e^{2 t^2 s^2} - 1) ||O|| with s the effective spread.
double long_time_bias_bound(const BoundInputs& in);

struct ConcentrationBound {
    double bound = 0.0;
    double p = 0.0;
};

/// 2 t s z ||O|| holding with probability p = 1 - 2 e^{-z^2/2}.
ConcentrationBound long_time_concentration_bound(const BoundInputs& in);

struct TruncationSpec {
    int observable_site = 0;
    int radius = 0;
    std::vector<int> dropped_indices;
};

struct TruncatedBound {
    double in_cone = 0.0;
    /// Conservative surrogate: 2t ||O|| (sum |c_i| + spread of dropped terms).
    double truncation_contribution = 0.0;
    double total = 0.0;
};

TruncatedBound truncated_bounds(const BoundInputs& in,
                                const TruncationSpec& trunc,
                                const Eigen::VectorXd& tail_delta,
                                const Eigen::VectorXd& tail_coeffs);

/// First- and second-order response of <O> to coefficient perturbations.
struct ShortTimeData {
    Eigen::VectorXd b_vec;  // b_i = i Tr(rho0 [V_i, O])
    Eigen::VectorXd s_vec;  // s_j = Tr(rho0 [[H, V_j], O])
    Eigen::MatrixXd d_mat;  // D_ij = Tr(rho0 [V_i, [V_j, O]])

    Eigen::VectorXd b_t(double t) const { return b_vec - 0.5 * t * s_vec; }
};

/// t delta ||b_t|| sqrt(L) + (t^2/2) delta^2 mu_HW at failure budget eta.
double hanson_wright_envelope(const ShortTimeData& data, double t, double delta,
                              double eta, const BoundConstants& cst = {});

/// max(||A||_HS sqrt(ln(4/eta)/kappa), ||A||_op ln(4/eta)/kappa).
double hanson_wright_mu(const Eigen::MatrixXd& a, double eta, double kappa);

struct FidelityData {
    Eigen::MatrixXd c_mat;  // C_ij = Re <psi0| V_i V_j |psi0>

    void validate() const;  // symmetric PSD within tolerance
};

struct FidelityBounds {
    double lower = 0.0;
    double upper = 1.0;
};

/// 1 - t^2 delta^2 [Tr(C) +- mu_HW] at failure budget eta.
FidelityBounds fidelity_bounds(const FidelityData& fd, double t, double delta,
                               double eta, double kappa = 0.125);

/// b, s, D via commutator algebra on a product state; no dense realization.
ShortTimeData shorttime_data_from_state(const std::vector<PauliString>& basis,
                                        const OperatorSum& hamiltonian,
                                        const ProductStateSpec& rho0,
                                        const OperatorSum& observable);

/// C_ij on a pure product state (fidelity Gram matrix).
FidelityData fidelity_data_from_state(const std::vector<PauliString>& basis,
                                      const ProductStateSpec& psi0);

}  // namespace beqs
