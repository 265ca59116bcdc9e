#include "beqs/shadows.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include <Eigen/Dense>

namespace beqs {

namespace {

constexpr double kTimeTol = 1e-12;

bool basis_matches(const ShotRecord& rec, const PauliString& obs) {
    for (uint64_t m = obs.support_mask(); m; m &= m - 1) {
        int site = std::countr_zero(m);
        if (rec.basis[site] != obs.axis(site)) return false;
    }
    return true;
}

bool state_matches_on_support(const ProductStateSpec& prepared,
                              const ProductStateSpec& target,
                              uint64_t support) {
    for (uint64_t m = support; m; m &= m - 1) {
        int site = std::countr_zero(m);
        const SiteState& a = prepared.site(site);
        const SiteState& b = target.site(site);
        if (a.mixed || b.mixed) return false;
        if (a.label && b.label) {
            if (*a.label != *b.label) return false;
        } else {
            for (int c = 0; c < 3; ++c)
                if (std::abs(a.bloch[c] - b.bloch[c]) > 1e-9) return false;
        }
    }
    return true;
}

struct SettingAccumulator {
    // Two-stage mean over settings; a setting may span several records.
    std::vector<double> sums;     // per setting, sum of parities
    std::vector<long> counts;     // per setting, number of shots
    std::vector<int> order;       // settings in first-seen order

    void add(int setting, double parity_sum, long n) {
        if (setting >= int(sums.size())) {
            sums.resize(setting + 1, 0.0);
            counts.resize(setting + 1, 0);
        }
        if (counts[setting] == 0) order.push_back(setting);
        sums[setting] += parity_sum;
        counts[setting] += n;
    }
};

CorrelatorEstimate finish(const PauliString& obs, double time,
                          const SettingAccumulator& acc,
                          const std::vector<int>* weights) {
    std::vector<double> means;
    std::vector<long> shots;
    std::vector<int> mult;
    for (int s : acc.order) {
        int w = weights ? (*weights)[s] : 1;
        if (w <= 0) continue;
        means.push_back(acc.sums[s] / double(acc.counts[s]));
        shots.push_back(acc.counts[s]);
        mult.push_back(w);
    }
    if (means.empty())
        throw NotMeasurableError("no matching setting for " + obs.to_string());
    double wsum = 0.0, vsum = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) {
        wsum += mult[i];
        vsum += mult[i] * means[i];
    }
    double value = vsum / wsum;
    CorrelatorEstimate est;
    est.observable = obs;
    est.time = time;
    est.value = value;
    est.n_contributing_settings = int(means.size());
    if (means.size() >= 5) {
        double var = 0.0;
        for (std::size_t i = 0; i < means.size(); ++i)
            var += mult[i] * (means[i] - value) * (means[i] - value);
        var /= (wsum - 1.0);
        est.std_error = std::sqrt(std::max(var, 0.0) / wsum);
    } else {
        // Small-sample fallback: binomial within-setting bound.
        long total = 0;
        for (std::size_t i = 0; i < shots.size(); ++i) total += mult[i] * shots[i];
        est.std_error =
            std::sqrt(std::max(1.0 - value * value, 0.0) / double(total));
    }
    return est;
}

}  // namespace

ShadowEstimator::ShadowEstimator(const ShotDataset& dataset) : ds_(dataset) {
    ds_.validate();
    std::set<double> ts;
    for (const auto& r : ds_.records) ts.insert(r.time);
    times_.assign(ts.begin(), ts.end());
    records_by_init_time_.assign(
        ds_.inits.size(), std::vector<std::vector<int>>(times_.size()));
    for (std::size_t r = 0; r < ds_.records.size(); ++r) {
        int tb = time_bucket(ds_.records[r].time);
        records_by_init_time_[ds_.records[r].init_index][tb].push_back(int(r));
    }
}

int ShadowEstimator::time_bucket(double time) const {
    auto it = std::lower_bound(times_.begin(), times_.end(), time - kTimeTol);
    if (it == times_.end() || std::abs(*it - time) > kTimeTol) return -1;
    return int(it - times_.begin());
}

double ShadowEstimator::record_parity_mean(const PauliString& obs,
                                           int record_index) const {
    ParityKey key{obs.axes_key_x(), obs.axes_key_z(), record_index};
    auto it = parity_cache_.find(key);
    if (it != parity_cache_.end()) return it->second;
    const ShotRecord& rec = ds_.records[record_index];
    uint64_t mask = obs.support_mask();
    long sum = 0;
    for (uint64_t word : rec.bits)
        sum += (std::popcount(word & mask) & 1) ? -1 : 1;
    double mean = double(sum) / double(rec.bits.size());
    parity_cache_.emplace(key, mean);
    return mean;
}

CorrelatorEstimate ShadowEstimator::estimate_pauli(
    const PauliString& obs, double time, std::optional<int> init_index,
    const std::vector<int>* weights) const {
    if (obs.n_sites() != ds_.n_sites)
        throw DimensionError("observable size != dataset size");
    SettingAccumulator acc;
    int tb = time_bucket(time);
    if (tb < 0) throw NotMeasurableError("time not in dataset");
    for (std::size_t s = 0; s < ds_.inits.size(); ++s) {
        if (init_index && int(s) != *init_index) continue;
        for (int r : records_by_init_time_[s][tb]) {
            const ShotRecord& rec = ds_.records[r];
            if (!basis_matches(rec, obs)) continue;
            double m = record_parity_mean(obs, r);
            acc.add(rec.setting_id, m * double(rec.bits.size()),
                    long(rec.bits.size()));
        }
    }
    return finish(obs, time, acc, weights);
}

CorrelatorEstimate ShadowEstimator::estimate_pauli_mixed(
    const PauliString& obs, const ProductStateSpec& mixed_state, double time,
    const std::vector<int>* weights) const {
    if (obs.n_sites() != ds_.n_sites)
        throw DimensionError("observable size != dataset size");
    uint64_t support = obs.support_mask();
    SettingAccumulator acc;
    int tb = time_bucket(time);
    if (tb < 0) throw NotMeasurableError("time not in dataset");
    for (std::size_t s = 0; s < ds_.inits.size(); ++s) {
        if (!state_matches_on_support(ds_.inits[s], mixed_state, support))
            continue;
        for (int r : records_by_init_time_[s][tb]) {
            const ShotRecord& rec = ds_.records[r];
            if (!basis_matches(rec, obs)) continue;
            double m = record_parity_mean(obs, r);
            acc.add(rec.setting_id, m * double(rec.bits.size()),
                    long(rec.bits.size()));
        }
    }
    return finish(obs, time, acc, weights);
}

std::vector<double> ShadowEstimator::times() const { return times_; }

std::pair<double, double> trapezoid_integral(const TimeTrace& trace) {
    const auto& t = trace.times;
    const auto& v = trace.values;
    if (t.size() < 2) throw std::invalid_argument("trapezoid: need >= 2 points");
    if (!std::is_sorted(t.begin(), t.end()))
        throw std::invalid_argument("trapezoid: unsorted times");
    double value = 0.0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i)
        value += 0.5 * (v[i] + v[i + 1]) * (t[i + 1] - t[i]);
    double var = 0.0;
    if (!trace.std_errors.empty()) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            double w;
            if (i == 0) w = 0.5 * (t[1] - t[0]);
            else if (i + 1 == t.size()) w = 0.5 * (t[i] - t[i - 1]);
            else w = 0.5 * (t[i + 1] - t[i - 1]);
            var += w * w * trace.std_errors[i] * trace.std_errors[i];
        }
    }
    return {value, std::sqrt(var)};
}

DerivativeEstimate fit_derivative(const TimeTrace& trace, int degree) {
    const long n = long(trace.times.size());
    const long p = degree + 1;
    if (n <= degree)
        throw std::invalid_argument("fit_derivative: underdetermined fit");
    // Scale times to O(1) for conditioning; the linear coefficient rescales.
    double tmax = *std::max_element(trace.times.begin(), trace.times.end());
    double tscale = tmax > 0 ? tmax : 1.0;
    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd y(n), w(n);
    bool weighted = !trace.std_errors.empty();
    for (long i = 0; i < n; ++i) {
        double tau = trace.times[i] / tscale;
        double pow_t = 1.0;
        for (long j = 0; j < p; ++j) {
            design(i, j) = pow_t;
            pow_t *= tau;
        }
        y[i] = trace.values[i];
        double s = weighted ? trace.std_errors[i] : 1.0;
        w[i] = 1.0 / std::max(s * s, 1e-30);
    }
    Eigen::MatrixXd xtw = design.transpose() * w.asDiagonal();
    Eigen::MatrixXd normal = xtw * design;
    Eigen::VectorXd beta = normal.ldlt().solve(xtw * y);
    Eigen::MatrixXd cov = normal.inverse();
    if (!weighted) {
        double rss = (y - design * beta).squaredNorm();
        double dof = double(n - p);
        cov *= dof > 0 ? rss / dof : 0.0;
    }
    DerivativeEstimate est;
    est.observable = trace.observable.terms().empty()
                         ? PauliString::identity(trace.observable.n_sites())
                         : trace.observable.terms().front();
    est.value = beta[1] / tscale;
    est.std_error = std::sqrt(std::max(cov(1, 1), 0.0)) / tscale;
    return est;
}

}  // namespace beqs
