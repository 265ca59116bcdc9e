#include "beqs/uncertainty.hpp"

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace beqs {

namespace {

Eigen::MatrixXd replica_covariance(const std::vector<Eigen::VectorXd>& reps,
                                   const Eigen::VectorXd& mean, double scale) {
    const long m = mean.size();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
    for (const auto& r : reps) {
        Eigen::VectorXd d = r - mean;
        cov += d * d.transpose();
    }
    return scale * cov;
}

Eigen::VectorXd replica_mean(const std::vector<Eigen::VectorXd>& reps) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(reps.front().size());
    for (const auto& r : reps) mean += r;
    return mean / double(reps.size());
}

}  // namespace

ModelSpec LearnedEnsemble::mean_model() const {
    LearnResult res;
    res.coeffs = mean;
    return res.to_model(family, dissipator);
}

Eigen::MatrixXd CorrelationMatrix::correlation() const {
    const long m = covariance.rows();
    Eigen::VectorXd s = covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(m, m);
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < m; ++j) {
            double denom = s[i] * s[j];
            corr(i, j) = denom > 0 ? covariance(i, j) / denom
                                   : (i == j ? 1.0 : 0.0);
        }
    return corr;
}

std::vector<int> setting_groups(const ShotDataset& dataset) {
    // Differential settings each prepare their own random state, so every
    // setting is an iid draw from one exchangeable pool; keying on the init
    // would put each setting in a singleton group and freeze the bootstrap.
    if (dataset.protocol == "differential")
        return std::vector<int>(dataset.n_settings, 0);
    std::vector<int> groups(dataset.n_settings, -1);
    std::map<std::pair<int, long long>, int> ids;
    for (const auto& rec : dataset.records) {
        if (groups[rec.setting_id] >= 0) continue;
        auto key = std::make_pair(rec.init_index, llround(rec.time * 1e12));
        auto [it, fresh] = ids.emplace(key, int(ids.size()));
        groups[rec.setting_id] = it->second;
    }
    return groups;
}

LearnedEnsemble bootstrap_covariance(const RefitFn& refit,
                                     const std::vector<int>& groups,
                                     const BootstrapOptions& opts) {
    const int n_settings = int(groups.size());
    if (n_settings == 0)
        throw std::invalid_argument("bootstrap: no settings");
    std::map<int, std::vector<int>> members;
    for (int s = 0; s < n_settings; ++s) members[groups[s]].push_back(s);

    LearnedEnsemble ens;
    ens.method = "bootstrap";
    std::mt19937_64 rng(derive_seed(opts.seed, 0x626f6f74));
    for (int b = 0; b < opts.n_resamples; ++b) {
        std::vector<int> weights(n_settings, 0);
        for (const auto& [g, ids] : members) {
            std::uniform_int_distribution<int> pick(0, int(ids.size()) - 1);
            for (std::size_t k = 0; k < ids.size(); ++k)
                ++weights[ids[pick(rng)]];
        }
        try {
            ens.replicas.push_back(refit(weights));
        } catch (const std::exception&) {
            ++ens.n_failures;
        }
    }
    if (ens.replicas.empty() ||
        double(ens.n_failures) >
            opts.max_failure_fraction * double(opts.n_resamples))
        throw std::runtime_error("bootstrap: too many resample failures (" +
                                 std::to_string(ens.n_failures) + "/" +
                                 std::to_string(opts.n_resamples) + ")");
    ens.mean = replica_mean(ens.replicas);
    ens.covariance = replica_covariance(
        ens.replicas, ens.mean, 1.0 / double(ens.replicas.size() - 1));
    return ens;
}

LearnedEnsemble jackknife_covariance(const RefitFn& refit, int n_settings) {
    if (n_settings < 2)
        throw std::invalid_argument("jackknife: need >= 2 settings");
    LearnedEnsemble ens;
    ens.method = "jackknife";
    for (int leave = 0; leave < n_settings; ++leave) {
        std::vector<int> weights(n_settings, 1);
        weights[leave] = 0;
        ens.replicas.push_back(refit(weights));
    }
    ens.mean = replica_mean(ens.replicas);
    ens.covariance = replica_covariance(
        ens.replicas, ens.mean,
        double(n_settings - 1) / double(n_settings));
    return ens;
}

std::vector<Eigen::VectorXd> sample_coefficients(const LearnedEnsemble& ens,
                                                 int n_draws, uint64_t seed) {
    const long m = ens.mean.size();
    Eigen::MatrixXd cov = 0.5 * (ens.covariance + ens.covariance.transpose());
    double floor = 1e-12 * std::max(cov.trace(), 0.0) / double(std::max(m, 1L));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
    Eigen::MatrixXd root =
        es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
    std::mt19937_64 rng(derive_seed(seed, 0x64726177));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::VectorXd> draws;
    draws.reserve(n_draws);
    for (int d = 0; d < n_draws; ++d) {
        Eigen::VectorXd g(m);
        for (long i = 0; i < m; ++i) g[i] = gauss(rng);
        draws.push_back(ens.mean + root * g);
    }
    return draws;
}

std::vector<ModelSpec> sample_models(const LearnedEnsemble& ens, int n_draws,
                                     uint64_t seed) {
    std::vector<ModelSpec> models;
    models.reserve(n_draws);
    for (const auto& c : sample_coefficients(ens, n_draws, seed)) {
        LearnResult res;
        res.coeffs = c;
        models.push_back(res.to_model(ens.family, ens.dissipator));
    }
    return models;
}

CorrelationMatrix parameter_correlations(
    const LearnedEnsemble& ens, const std::vector<std::string>& labels) {
    if (!labels.empty() && long(labels.size()) != ens.mean.size())
        throw std::invalid_argument("correlations: label count mismatch");
    return CorrelationMatrix{labels, ens.covariance};
}

NormalityReport normality_check(const LearnedEnsemble& ens) {
    const long m = ens.mean.size();
    const double n = double(ens.replicas.size());
    NormalityReport rep;
    rep.skewness = Eigen::VectorXd::Zero(m);
    rep.excess_kurtosis = Eigen::VectorXd::Zero(m);
    if (n < 4) return rep;
    for (long i = 0; i < m; ++i) {
        double mu = 0.0;
        for (const auto& r : ens.replicas) mu += r[i];
        mu /= n;
        double m2 = 0, m3 = 0, m4 = 0;
        for (const auto& r : ens.replicas) {
            double d = r[i] - mu;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
        }
        m2 /= n; m3 /= n; m4 /= n;
        if (m2 <= 0) continue;
        rep.skewness[i] = m3 / std::pow(m2, 1.5);
        rep.excess_kurtosis[i] = m4 / (m2 * m2) - 3.0;
        if (std::abs(rep.skewness[i]) > 0.5 ||
            std::abs(rep.excess_kurtosis[i]) > 1.0)
            rep.flagged.push_back(int(i));
    }
    return rep;
}

}  // namespace beqs
