#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "beqs/dynamics.hpp"
#include "beqs/model.hpp"
#include "beqs/states.hpp"

namespace beqs {

/// Deterministic seed derivation: one master seed fans out to per-setting
/// streams so settings can be generated independently.
uint64_t derive_seed(uint64_t master, uint64_t index);

struct NoiseConfig {
    double readout_flip_p = 0.0;   // 0 -> 1 never; 0 bits flip to 1 with p
    double miscalibration = 0.0;   // max fractional angle error at chain ends
};

/// One acquisition record: a prepared product state, a per-site Pauli
/// measurement basis, an evolution time, and the packed bitstrings.
/// Bit i of each word is the outcome at site i (0 = +1 eigenvalue).
struct ShotRecord {
    int setting_id = 0;   // resampling unit
    int init_index = 0;   // into ShotDataset::inits
    std::vector<Axis> basis;
    double time = 0.0;
    std::vector<uint64_t> bits;
};

struct ShotDataset {
    int n_sites = 0;
    std::string protocol;  // "integral" or "differential"
    uint64_t rng_seed = 0;
    NoiseConfig noise;
    std::vector<ProductStateSpec> inits;
    std::vector<ShotRecord> records;
    int n_settings = 0;

    std::size_t total_shots() const;
    void validate() const;
};

/// Global-rotation preparation parameters, kept so miscalibration can rescale
/// the rotation angle per site.
struct RotationPrep {
    double theta = 0.0;
    std::array<double, 3> axis{0.0, 0.0, 1.0};
};

struct IntegralProtocolConfig {
    std::vector<ProductStateSpec> states;
    /// Optional per-state rotation preps (parallel to `states`; empty if the
    /// states are not rotation-prepared).
    std::vector<std::optional<RotationPrep>> rotations;
    std::vector<double> times;  // seconds
    int n_u = 200;
    int n_m = 200;
    NoiseConfig noise;
    uint64_t seed = 0;
};

struct DifferentialProtocolConfig {
    int n_u = 200;
    int n_m = 200;
    int n_t = 11;
    double t_max = 1e-3;  // seconds
    NoiseConfig noise;
    uint64_t seed = 0;
};

/// For each (state, time): N_U uniformly random per-site Pauli bases, each
/// sampled N_M times from the exactly propagated state. One setting per
/// (state, time, basis) triple.
ShotDataset generate_integral_protocol(const ModelSpec& hidden,
                                       const IntegralProtocolConfig& cfg);

/// N_U settings, each pairing a random product of Pauli eigenstates with a
/// random basis, measured at N_t equally spaced times in [0, t_max]; the
/// (state, basis) pair is fixed across the times of a setting.
ShotDataset generate_differential_protocol(const ModelSpec& hidden,
                                           const DifferentialProtocolConfig& cfg);

/// Asymmetric readout channel: each 0 bit flips to 1 with probability p_flip.
void inject_readout_error(std::vector<ShotRecord>& records, int n_sites,
                          double p_flip, std::mt19937_64& rng);

/// Linear angle-scale profile: 1 at the chain center, 1 - amplitude at the
/// outermost sites.
std::vector<double> miscalibration_profile(int n_sites, double amplitude);

/// Pauli eigenstate preparation by a (possibly miscalibrated) rotation
/// from |1>.
SiteState prepare_eigenstate(PauliEig target, double angle_scale);

/// Outcome probabilities of measuring `rho` in the given per-site basis.
Eigen::VectorXd basis_probabilities(const MatrixXcd& rho,
                                    const std::vector<Axis>& basis);

}  // namespace beqs
