#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beqs/dynamics.hpp"
#include "beqs/uncertainty.hpp"

namespace beqs {

/// Worker count for sample-parallel loops; capped by the BEQS_THREADS
/// environment variable when set.
int beqs_thread_count();

enum class DecayModel { Power, Exponential };

std::string to_string(DecayModel m);

/// Weighted fit of distance-averaged couplings to J0/d^alpha or
/// J0' e^{-tau d}.
///
/// Fits are log-linearized with the first-order bias correction
/// E[ln J_hat] ~ ln J - sigma^2/(2 J^2). Conventions: chi2_reduced is the
/// linear-space weighted residual over (n_fit - 2) dof; r2_weighted is
/// 1 - sum w (J - fit)^2 / sum w (J - mean_w)^2 with w = 1/sigma^2.
struct DecayFit {
    DecayModel model = DecayModel::Power;
    double amplitude = 0.0;      // J0 or J0', rad/s
    double amplitude_err = 0.0;
    double exponent = 0.0;       // alpha or tau
    double exponent_err = 0.0;
    double r2_weighted = 0.0;
    double chi2_reduced = 0.0;
    std::vector<int> excluded_points;            // nonpositive couplings
    std::vector<double> extrapolation_residuals; // (J - fit)/sigma outside range

    double evaluate(double d) const;
};

/// Distance-averaged couplings J_bar(d) = (N-d)^{-1} sum_i J_{i,i+d} of an
/// XY-family model.
void averaged_couplings(const ModelSpec& model, std::vector<double>& distances,
                        std::vector<double>& couplings);

DecayFit fit_decay(const std::vector<double>& distances,
                   const std::vector<double>& couplings,
                   const std::vector<double>& std_errors, DecayModel kind,
                   int fit_d_max = 5);

/// Spectral decomposition of Gamma into jump operators L_m = sum_i a_i^m Z_i.
struct JumpDecomposition {
    Eigen::VectorXd rates;    // descending, rad/s
    Eigen::MatrixXd vectors;  // column m is the unit vector a^(m)

    Eigen::MatrixXd reconstruct() const;
};

JumpDecomposition decompose_dephasing(const DephasingSpec& gamma);

struct PredictionBand {
    OperatorSum observable;
    std::vector<double> times;
    std::vector<double> mean_model;     // trajectory of the point estimate
    std::vector<double> ensemble_mean;
    std::vector<double> lower;
    std::vector<double> upper;
    int n_samples = 0;
    double percentile = 0.95;

    PredictionBand() : observable(1) {}
};

/// Empirical percentile bands over ensemble-propagated trajectories;
/// deterministic under the seed and parallel over samples.
std::vector<PredictionBand> propagate_ensemble(
    const LearnedEnsemble& ens, const DensityState& rho0,
    const std::vector<OperatorSum>& observables,
    const std::vector<double>& times, int n_samples, double percentile = 0.95,
    uint64_t seed = 0, const PropagateOptions& opts = {});

/// |mean-model trajectory - ensemble mean| per time (the expected-error
/// proxy).
TimeTrace expected_error_estimate(const PredictionBand& band);

}  // namespace beqs
