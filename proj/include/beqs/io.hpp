#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "beqs/analysis.hpp"
#include "beqs/bounds.hpp"
#include "beqs/lab.hpp"
#include "beqs/uncertainty.hpp"

namespace beqs {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// FNV-1a hash of the canonical dump, embedded in every output file.
std::string config_fingerprint(const json& config);

std::string base64_encode(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> base64_decode(const std::string& text);

json model_to_json(const ModelSpec& model);
ModelSpec model_from_json(const json& j);
void save_model(const ModelSpec& model, const std::string& path);
ModelSpec load_model(const std::string& path);

json dataset_to_json(const ShotDataset& ds);
ShotDataset dataset_from_json(const json& j);
void save_dataset(const ShotDataset& ds, const std::string& path);
ShotDataset load_dataset(const std::string& path);

json ensemble_to_json(const LearnedEnsemble& ens);
LearnedEnsemble ensemble_from_json(const json& j);
void save_ensemble(const LearnedEnsemble& ens, const std::string& path);
LearnedEnsemble load_ensemble(const std::string& path);

void save_time_trace_csv(const TimeTrace& trace, const std::string& path);
void save_prediction_band_csv(const PredictionBand& band,
                              const std::string& path);
void save_sweep_csv(const SweepResult& sweep, const std::string& path);

struct BoundReportRow {
    double t = 0.0;
    double bias_bound = 0.0;
    double concentration_bound = 0.0;
    double p = 0.0;
    double hw_envelope = 0.0;
    double eta = 0.0;
    double fidelity_lower = 1.0;
};

void save_bound_report_json(const std::vector<BoundReportRow>& rows,
                            const json& config, const std::string& path);
void save_bound_report_csv(const std::vector<BoundReportRow>& rows,
                           const std::string& path);

/// The versioned pipeline configuration; every field except the scenario has
/// a default.
struct RunConfig {
    // scenario: exactly one of preset/model_file is set
    std::string preset;
    std::string model_file;
    int n_sites = 0;  // required with preset

    // acquisition
    std::string method = "integral";  // or "differential"
    int n_u = 200;
    int n_m = 200;
    int n_t = 11;
    std::vector<double> times{0.0, 0.5e-3, 1.0e-3, 1.5e-3};
    double t_max = 1e-3;
    NoiseConfig noise;

    // learning
    std::string ansatz = "xy_with_field";
    int ansatz_k = 0;
    std::string dissipator = "general_gamma";  // none|general_gamma|families
    double beta = 0.0;
    std::vector<double> regularizer_tau_grid;
    std::vector<double> regularizer_alpha_grid;
    bool psd_constrained = true;

    // uncertainty
    int n_resamples = 300;
    std::string resampler = "bootstrap";  // or "jackknife"

    // bounds
    double eta = 0.05;
    double p = 0.95;
    BoundConstants constants;
    int truncation_radius = -1;  // -1 = no truncation

    std::string output_dir = ".";
    uint64_t master_seed = 0;

    json raw;  // parsed source, for fingerprinting

    AnsatzFamily ansatz_family() const;
    DissipatorSpec dissipator_spec() const;
    std::string fingerprint() const { return config_fingerprint(raw); }
};

RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace beqs
