#include "beqs/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace beqs {

int beqs_thread_count() {
    int hw = int(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("BEQS_THREADS")) {
        int cap = std::atoi(env);
        if (cap > 0) hw = std::min(hw, cap);
    }
    return hw;
}

std::string to_string(DecayModel m) {
    return m == DecayModel::Power ? "power" : "exponential";
}

double DecayFit::evaluate(double d) const {
    return model == DecayModel::Power ? amplitude * std::pow(d, -exponent)
                                      : amplitude * std::exp(-exponent * d);
}

void averaged_couplings(const ModelSpec& model, std::vector<double>& distances,
                        std::vector<double>& couplings) {
    auto basis = build_basis(model.ansatz);
    std::map<int, std::pair<double, int>> by_distance;  // d -> (sum J, count)
    for (std::size_t m = 0; m < basis.size(); ++m) {
        const PauliString& h = basis[m];
        if (h.support_size() != 2) continue;
        uint64_t mask = h.support_mask();
        int i = std::countr_zero(mask);
        int j = 63 - std::countl_zero(mask);
        if (h.axis(i) != Axis::X || h.axis(j) != Axis::X) continue;
        // XY convention: H = sum J_ij/2 (XX + YY) + fields
        by_distance[j - i].first += 2.0 * model.coeffs[long(m)];
        ++by_distance[j - i].second;
    }
    distances.clear();
    couplings.clear();
    for (auto& [d, acc] : by_distance) {
        distances.push_back(double(d));
        couplings.push_back(acc.first / double(acc.second));
    }
}

DecayFit fit_decay(const std::vector<double>& distances,
                   const std::vector<double>& couplings,
                   const std::vector<double>& std_errors, DecayModel kind,
                   int fit_d_max) {
    if (distances.size() != couplings.size() ||
        (!std_errors.empty() && std_errors.size() != couplings.size()))
        throw std::invalid_argument("fit_decay: length mismatch");

    DecayFit fit;
    fit.model = kind;
    // Weighted linear fit of y = ln J against x = ln d (power) or d (exp).
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    std::vector<int> used;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (distances[i] > fit_d_max + 1e-9) continue;
        if (couplings[i] <= 0.0) {
            fit.excluded_points.push_back(int(i));
            continue;
        }
        double sigma = std_errors.empty() ? 0.0 : std_errors[i];
        double y = std::log(couplings[i]) +
                   0.5 * sigma * sigma / (couplings[i] * couplings[i]);
        double x = kind == DecayModel::Power ? std::log(distances[i])
                                             : distances[i];
        double sy = sigma > 0 ? sigma / couplings[i] : 1.0;
        double w = 1.0 / (sy * sy);
        sw += w; swx += w * x; swy += w * y;
        swxx += w * x * x; swxy += w * x * y;
        used.push_back(int(i));
    }
    if (used.size() < 2)
        throw std::invalid_argument("fit_decay: need >= 2 usable points");
    double denom = sw * swxx - swx * swx;
    if (std::abs(denom) < 1e-30)
        throw std::invalid_argument("fit_decay: degenerate abscissae");
    double slope = (sw * swxy - swx * swy) / denom;
    double intercept = (swy - slope * swx) / sw;
    double var_slope = sw / denom;
    double var_intercept = swxx / denom;

    fit.amplitude = std::exp(intercept);
    fit.amplitude_err = fit.amplitude * std::sqrt(std::max(var_intercept, 0.0));
    fit.exponent = -slope;
    fit.exponent_err = std::sqrt(std::max(var_slope, 0.0));

    double chi2 = 0.0, ss_res = 0.0, ss_tot = 0.0;
    double wsum = 0.0, wmean = 0.0;
    for (int i : used) {
        double sigma = std_errors.empty() ? 1.0 : std::max(std_errors[i], 1e-30);
        double w = 1.0 / (sigma * sigma);
        wsum += w;
        wmean += w * couplings[i];
    }
    wmean /= wsum;
    for (int i : used) {
        double sigma = std_errors.empty() ? 1.0 : std::max(std_errors[i], 1e-30);
        double w = 1.0 / (sigma * sigma);
        double r = couplings[i] - fit.evaluate(distances[i]);
        chi2 += r * r / (sigma * sigma);
        ss_res += w * r * r;
        ss_tot += w * (couplings[i] - wmean) * (couplings[i] - wmean);
    }
    double dof = double(used.size()) - 2.0;
    fit.chi2_reduced = dof > 0 ? chi2 / dof : 0.0;
    fit.r2_weighted = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;

    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (distances[i] <= fit_d_max + 1e-9) continue;
        double sigma = std_errors.empty() ? 1.0 : std::max(std_errors[i], 1e-30);
        fit.extrapolation_residuals.push_back(
            (couplings[i] - fit.evaluate(distances[i])) / sigma);
    }
    return fit;
}

Eigen::MatrixXd JumpDecomposition::reconstruct() const {
    Eigen::MatrixXd g =
        Eigen::MatrixXd::Zero(vectors.rows(), vectors.rows());
    for (long m = 0; m < rates.size(); ++m)
        g += rates[m] * vectors.col(m) * vectors.col(m).transpose();
    return g;
}

JumpDecomposition decompose_dephasing(const DephasingSpec& gamma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma.gamma);
    const long n = gamma.gamma.rows();
    JumpDecomposition dec;
    dec.rates.resize(n);
    dec.vectors.resize(n, n);
    for (long m = 0; m < n; ++m) {  // solver sorts ascending; flip
        dec.rates[m] = es.eigenvalues()[n - 1 - m];
        dec.vectors.col(m) = es.eigenvectors().col(n - 1 - m);
    }
    return dec;
}

namespace {

double percentile_of_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * double(sorted.size() - 1);
    long lo = long(std::floor(pos));
    long hi = std::min(lo + 1, long(sorted.size()) - 1);
    double frac = pos - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::vector<PredictionBand> propagate_ensemble(
    const LearnedEnsemble& ens, const DensityState& rho0,
    const std::vector<OperatorSum>& observables,
    const std::vector<double>& times, int n_samples, double percentile,
    uint64_t seed, const PropagateOptions& opts) {
    if (n_samples < 20)
        throw std::invalid_argument("propagate_ensemble: n_samples >= 20");
    if (percentile <= 0.0 || percentile >= 1.0)
        throw std::invalid_argument("propagate_ensemble: percentile in (0,1)");

    ModelSpec mean_model = ens.mean_model();
    std::vector<TimeTrace> mean_traces =
        expectation_traces(mean_model, rho0, observables, times, opts);

    std::vector<ModelSpec> draws = sample_models(ens, n_samples, seed);
    // values[sample][obs][time]
    std::vector<std::vector<std::vector<double>>> values(n_samples);
    int n_threads = std::min(beqs_thread_count(), n_samples);
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex fail_mutex;
    for (int w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int s = w; s < n_samples; s += n_threads) {
                    auto traces = expectation_traces(draws[s], rho0,
                                                     observables, times, opts);
                    values[s].resize(observables.size());
                    for (std::size_t o = 0; o < observables.size(); ++o)
                        values[s][o] = traces[o].values;
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(fail_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<PredictionBand> bands(observables.size());
    double q_lo = 0.5 * (1.0 - percentile);
    double q_hi = 1.0 - q_lo;
    for (std::size_t o = 0; o < observables.size(); ++o) {
        PredictionBand& band = bands[o];
        band.observable = observables[o];
        band.times = times;
        band.mean_model = mean_traces[o].values;
        band.n_samples = n_samples;
        band.percentile = percentile;
        for (std::size_t t = 0; t < times.size(); ++t) {
            std::vector<double> col(n_samples);
            double mean = 0.0;
            for (int s = 0; s < n_samples; ++s) {
                col[s] = values[s][o][t];
                mean += col[s];
            }
            mean /= double(n_samples);
            std::sort(col.begin(), col.end());
            double lo = percentile_of_sorted(col, q_lo);
            double hi = percentile_of_sorted(col, q_hi);
            band.ensemble_mean.push_back(mean);
            band.lower.push_back(std::min(lo, mean));
            band.upper.push_back(std::max(hi, mean));
        }
    }
    return bands;
}

TimeTrace expected_error_estimate(const PredictionBand& band) {
    TimeTrace trace{band.observable};
    trace.times = band.times;
    for (std::size_t t = 0; t < band.times.size(); ++t)
        trace.values.push_back(
            std::abs(band.mean_model[t] - band.ensemble_mean[t]));
    return trace;
}

}  // namespace beqs
