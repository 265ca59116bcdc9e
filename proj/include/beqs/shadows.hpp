#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include "beqs/dynamics.hpp"
#include "beqs/lab.hpp"
#include "beqs/pauli.hpp"

namespace beqs {

/// Raised when no measurement setting can estimate the requested quantity;
/// callers drop the corresponding constraint row.
struct NotMeasurableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorrelatorEstimate {
    PauliString observable{1, 0, 0};
    double time = 0.0;
    double value = 0.0;
    int n_contributing_settings = 0;
    double std_error = 0.0;
};

struct DerivativeEstimate {
    PauliString observable{1, 0, 0};
    int initial_state_key = -1;  // init_index of the matched mixed state
    double value = 0.0;          // d/dt <P> at t=0, 1/s
    double std_error = 0.0;
};

/// Pauli-correlator estimation over one dataset, with per-(observable,
/// record) parity means cached so resampling reruns are cheap.
///
/// Estimates are two-stage means: the empirical parity mean within each
/// matching setting, then the mean over matching settings. `weights`, when
/// given, holds a per-setting resample multiplicity (bootstrap counts or
/// jackknife 0/1 masks) of length n_settings.
class ShadowEstimator {
  public:
    explicit ShadowEstimator(const ShotDataset& dataset);

    CorrelatorEstimate estimate_pauli(
        const PauliString& observable, double time,
        std::optional<int> init_index = std::nullopt,
        const std::vector<int>* weights = nullptr) const;

    /// Matched-setting estimator for partially mixed initial states: averages
    /// only over settings whose prepared state agrees with `mixed_state` on
    /// the observable's support sites.
    CorrelatorEstimate estimate_pauli_mixed(
        const PauliString& observable, const ProductStateSpec& mixed_state,
        double time, const std::vector<int>* weights = nullptr) const;

    const ShotDataset& dataset() const { return ds_; }

    /// Distinct times present in the dataset, sorted.
    std::vector<double> times() const;

  private:
    struct ParityKey {
        uint64_t x, z;
        int record;
        bool operator==(const ParityKey&) const = default;
    };
    struct ParityKeyHash {
        std::size_t operator()(const ParityKey& k) const {
            uint64_t h = k.x * 0x9e3779b97f4a7c15ULL;
            h ^= k.z * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2);
            h ^= uint64_t(k.record) + 0x165667b19e3779f9ULL + (h << 6);
            return std::size_t(h);
        }
    };

    double record_parity_mean(const PauliString& obs, int record_index) const;
    int time_bucket(double time) const;  // -1 when absent

    const ShotDataset& ds_;
    std::vector<double> times_;
    // record indices bucketed by [init][time] to keep estimate scans local
    std::vector<std::vector<std::vector<int>>> records_by_init_time_;
    mutable std::unordered_map<ParityKey, double, ParityKeyHash> parity_cache_;
};

/// Trapezoid value and propagated std error of a sampled trace.
std::pair<double, double> trapezoid_integral(const TimeTrace& trace);

/// Weighted least-squares polynomial fit; returns the degree-1 coefficient.
DerivativeEstimate fit_derivative(const TimeTrace& trace, int degree = 2);

}  // namespace beqs
