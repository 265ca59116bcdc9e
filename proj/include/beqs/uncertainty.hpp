#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beqs/lab.hpp"
#include "beqs/learner.hpp"

namespace beqs {

/// A learned coefficient vector with its uncertainty model: the resampling
/// replicas and the covariance estimated from them.
struct LearnedEnsemble {
    AnsatzFamily family;
    DissipatorSpec dissipator;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    std::vector<Eigen::VectorXd> replicas;
    std::string method;  // "bootstrap" or "jackknife"
    int n_failures = 0;

    int parameter_count() const { return int(mean.size()); }
    ModelSpec mean_model() const;
};

struct CorrelationMatrix {
    std::vector<std::string> labels;
    Eigen::MatrixXd covariance;

    Eigen::MatrixXd correlation() const;
};

/// Refit callback: maps per-setting resample multiplicities to a coefficient
/// vector. Throws on solver failure.
using RefitFn = std::function<Eigen::VectorXd(const std::vector<int>& weights)>;

/// Group id per setting. Integral settings are only exchangeable within
/// their (state, time) acquisition cell; differential settings form a single
/// iid pool.
std::vector<int> setting_groups(const ShotDataset& dataset);

struct BootstrapOptions {
    int n_resamples = 300;
    uint64_t seed = 0;
    double max_failure_fraction = 0.1;
};

/// Nonparametric bootstrap over measurement settings, resampled with
/// replacement within each group. Aborts when too many refits fail.
LearnedEnsemble bootstrap_covariance(const RefitFn& refit,
                                     const std::vector<int>& groups,
                                     const BootstrapOptions& opts = {});

/// Leave-one-setting-out jackknife with the (n-1)-fold variance inflation.
LearnedEnsemble jackknife_covariance(const RefitFn& refit, int n_settings);

/// Gaussian coefficient draws from (mean, covariance); the covariance gets a
/// spectral floor of 1e-12 * trace / dim before factorization.
std::vector<Eigen::VectorXd> sample_coefficients(const LearnedEnsemble& ens,
                                                 int n_draws, uint64_t seed);

std::vector<ModelSpec> sample_models(const LearnedEnsemble& ens, int n_draws,
                                     uint64_t seed);

CorrelationMatrix parameter_correlations(const LearnedEnsemble& ens,
                                         const std::vector<std::string>& labels);

/// Marginal-shape diagnostics of the replica cloud; a parameter is flagged
/// when |skewness| > 0.5 or |excess kurtosis| > 1.
struct NormalityReport {
    Eigen::VectorXd skewness;
    Eigen::VectorXd excess_kurtosis;
    std::vector<int> flagged;

    bool gaussian_ok() const { return flagged.empty(); }
};

NormalityReport normality_check(const LearnedEnsemble& ens);

}  // namespace beqs
