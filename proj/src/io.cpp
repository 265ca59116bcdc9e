#include "beqs/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace beqs {

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

void check_schema(const json& j, const char* what) {
    if (!j.contains("schema_version") ||
        j.at("schema_version").get<int>() != kSchemaVersion)
        throw std::invalid_argument(std::string(what) +
                                 ": unsupported or missing schema_version");
}

json write_file_header() {
    return json{{"schema_version", kSchemaVersion}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json_file(const std::string& path) {
    return json::parse(read_text(path));
}

char axis_char(Axis a) {
    switch (a) {
        case Axis::I: return 'I';
        case Axis::X: return 'X';
        case Axis::Y: return 'Y';
        case Axis::Z: return 'Z';
    }
    return '?';
}

Axis axis_from_char(char c) {
    switch (c) {
        case 'I': return Axis::I;
        case 'X': return Axis::X;
        case 'Y': return Axis::Y;
        case 'Z': return Axis::Z;
    }
    throw std::invalid_argument(std::string("bad axis character: ") + c);
}

json pauli_to_json(const PauliString& p) {
    return json{{"x", p.x_bits()},
                {"z", p.z_bits()},
                {"coeff", p.coeff()},
                {"phase", p.phase_pow()}};
}

PauliString pauli_from_json(const json& j, int n_sites) {
    return PauliString(n_sites, j.at("x").get<uint64_t>(),
                       j.at("z").get<uint64_t>(), j.at("coeff").get<double>(),
                       j.at("phase").get<int>());
}

json opsum_to_json(const OperatorSum& op) {
    json terms = json::array();
    for (const auto& t : op.terms()) terms.push_back(pauli_to_json(t));
    return json{{"n_sites", op.n_sites()}, {"terms", terms}};
}

OperatorSum opsum_from_json(const json& j) {
    int n = j.at("n_sites").get<int>();
    std::vector<PauliString> terms;
    for (const auto& t : j.at("terms")) terms.push_back(pauli_from_json(t, n));
    return OperatorSum(n, std::move(terms));
}

json family_to_json(const AnsatzFamily& f) {
    json j{{"kind", to_string(f.kind)}, {"n_sites", f.n_sites}, {"k", f.k}};
    if (f.kind == AnsatzKind::Custom) {
        json basis = json::array();
        for (const auto& p : f.custom_basis) basis.push_back(pauli_to_json(p));
        j["custom_basis"] = basis;
    }
    return j;
}

AnsatzFamily family_from_json(const json& j) {
    AnsatzFamily f;
    f.kind = ansatz_kind_from_string(j.at("kind").get<std::string>());
    f.n_sites = j.at("n_sites").get<int>();
    f.k = j.value("k", 0);
    if (j.contains("custom_basis"))
        for (const auto& p : j.at("custom_basis"))
            f.custom_basis.push_back(pauli_from_json(p, f.n_sites));
    return f;
}

json dissipator_to_json(const DissipatorSpec& d) {
    json j;
    switch (d.model) {
        case DissipatorModel::None: j["model"] = "none"; break;
        case DissipatorModel::GeneralGamma: j["model"] = "general_gamma"; break;
        case DissipatorModel::RateFamilies: j["model"] = "rate_families"; break;
    }
    if (d.model == DissipatorModel::RateFamilies) {
        json fams = json::array();
        for (const auto& f : d.families) {
            json jumps = json::array();
            for (const auto& l : f.jumps) jumps.push_back(opsum_to_json(l));
            fams.push_back(json{{"label", f.label}, {"jumps", jumps}});
        }
        j["families"] = fams;
    }
    return j;
}

DissipatorSpec dissipator_from_json(const json& j) {
    DissipatorSpec d;
    std::string model = j.at("model").get<std::string>();
    if (model == "none") {
        d.model = DissipatorModel::None;
    } else if (model == "general_gamma") {
        d.model = DissipatorModel::GeneralGamma;
    } else if (model == "rate_families") {
        d.model = DissipatorModel::RateFamilies;
        for (const auto& f : j.at("families")) {
            RateFamily fam;
            fam.label = f.at("label").get<std::string>();
            for (const auto& l : f.at("jumps"))
                fam.jumps.push_back(opsum_from_json(l));
            d.families.push_back(std::move(fam));
        }
    } else {
        throw std::invalid_argument("unknown dissipator model: " + model);
    }
    return d;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (long i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    long rows = long(j.size());
    long cols = rows > 0 ? long(j.at(0).size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(long(j.size()));
    for (long i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
    return v;
}

json site_to_json(const SiteState& s) {
    json j{{"mixed", s.mixed},
           {"bloch", {s.bloch[0], s.bloch[1], s.bloch[2]}}};
    if (s.label) j["label"] = to_string(*s.label);
    return j;
}

SiteState site_from_json(const json& j) {
    SiteState s;
    s.mixed = j.at("mixed").get<bool>();
    for (int c = 0; c < 3; ++c) s.bloch[c] = j.at("bloch").at(c).get<double>();
    if (j.contains("label"))
        s.label = pauli_eig_from_string(j.at("label").get<std::string>());
    return s;
}

json state_to_json(const ProductStateSpec& st) {
    json arr = json::array();
    for (int i = 0; i < st.n_sites(); ++i) arr.push_back(site_to_json(st.site(i)));
    return arr;
}

ProductStateSpec state_from_json(const json& j) {
    std::vector<SiteState> sites;
    for (const auto& s : j) sites.push_back(site_from_json(s));
    return ProductStateSpec(std::move(sites));
}

json noise_to_json(const NoiseConfig& n) {
    return json{{"readout_flip_p", n.readout_flip_p},
                {"miscalibration", n.miscalibration}};
}

NoiseConfig noise_from_json(const json& j) {
    NoiseConfig n;
    n.readout_flip_p = j.value("readout_flip_p", 0.0);
    n.miscalibration = j.value("miscalibration", 0.0);
    return n;
}

}  // namespace

std::string config_fingerprint(const json& config) {
    std::string dump = config.dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
    return buf;
}

std::string base64_encode(const std::vector<uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        uint32_t v = uint32_t(bytes[i]) << 16;
        int rem = int(bytes.size() - i);
        if (rem > 1) v |= uint32_t(bytes[i + 1]) << 8;
        if (rem > 2) v |= uint32_t(bytes[i + 2]);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(rem > 1 ? kB64Alphabet[(v >> 6) & 63] : '=');
        out.push_back(rem > 2 ? kB64Alphabet[v & 63] : '=');
    }
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw std::invalid_argument("base64: bad character");
    };
    if (text.size() % 4 != 0) throw std::invalid_argument("base64: bad length");
    std::vector<uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int a = value_of(text[i]), b = value_of(text[i + 1]);
        int c = value_of(text[i + 2]), d = value_of(text[i + 3]);
        if (a < 0 || b < 0) throw std::invalid_argument("base64: bad padding");
        uint32_t v = uint32_t(a) << 18 | uint32_t(b) << 12;
        if (c >= 0) v |= uint32_t(c) << 6;
        if (d >= 0) v |= uint32_t(d);
        out.push_back(uint8_t(v >> 16));
        if (c >= 0) out.push_back(uint8_t(v >> 8));
        if (d >= 0) out.push_back(uint8_t(v));
    }
    return out;
}

json model_to_json(const ModelSpec& model) {
    json j = write_file_header();
    j["n_sites"] = model.n_sites();
    j["family"] = family_to_json(model.ansatz);
    j["coeff_order_version"] = 1;
    j["coeffs"] = vector_to_json(model.coeffs);
    j["gamma"] = model.dephasing ? matrix_to_json(model.dephasing->gamma)
                                 : json(nullptr);
    json jumps = json::array();
    for (const auto& [op, rate] : model.extra_jumps)
        jumps.push_back(json{{"op", opsum_to_json(op)}, {"rate", rate}});
    j["jumps"] = jumps;
    return j;
}

ModelSpec model_from_json(const json& j) {
    check_schema(j, "model");
    if (j.value("coeff_order_version", 0) != 1)
        throw std::invalid_argument("model: unknown coeff_order_version");
    ModelSpec model;
    model.ansatz = family_from_json(j.at("family"));
    if (model.ansatz.n_sites != j.at("n_sites").get<int>())
        throw std::invalid_argument("model: n_sites mismatch");
    model.coeffs = vector_from_json(j.at("coeffs"));
    if (!j.at("gamma").is_null())
        model.dephasing = DephasingSpec(matrix_from_json(j.at("gamma")));
    for (const auto& jj : j.at("jumps"))
        model.extra_jumps.emplace_back(opsum_from_json(jj.at("op")),
                                       jj.at("rate").get<double>());
    model.validate();
    return model;
}

void save_model(const ModelSpec& model, const std::string& path) {
    write_text(path, model_to_json(model).dump(2) + "\n");
}

ModelSpec load_model(const std::string& path) {
    return model_from_json(load_json_file(path));
}

json dataset_to_json(const ShotDataset& ds) {
    json j = write_file_header();
    j["n_sites"] = ds.n_sites;
    j["protocol"] = ds.protocol;
    j["rng_seed"] = ds.rng_seed;
    j["noise"] = noise_to_json(ds.noise);
    j["n_settings"] = ds.n_settings;
    json inits = json::array();
    for (const auto& st : ds.inits) inits.push_back(state_to_json(st));
    j["inits"] = inits;
    json records = json::array();
    for (const auto& rec : ds.records) {
        std::string basis;
        for (Axis a : rec.basis) basis.push_back(axis_char(a));
        std::vector<uint8_t> bytes;
        bytes.reserve(rec.bits.size() * 8);
        for (uint64_t w : rec.bits)
            for (int b = 0; b < 8; ++b) bytes.push_back(uint8_t(w >> (8 * b)));
        records.push_back(json{{"setting_id", rec.setting_id},
                               {"init_index", rec.init_index},
                               {"basis", basis},
                               {"time", rec.time},
                               {"n_shots", rec.bits.size()},
                               {"bits", base64_encode(bytes)}});
    }
    j["records"] = records;
    return j;
}

ShotDataset dataset_from_json(const json& j) {
    check_schema(j, "dataset");
    ShotDataset ds;
    ds.n_sites = j.at("n_sites").get<int>();
    ds.protocol = j.at("protocol").get<std::string>();
    ds.rng_seed = j.at("rng_seed").get<uint64_t>();
    ds.noise = noise_from_json(j.at("noise"));
    ds.n_settings = j.at("n_settings").get<int>();
    for (const auto& st : j.at("inits")) ds.inits.push_back(state_from_json(st));
    for (const auto& r : j.at("records")) {
        ShotRecord rec;
        rec.setting_id = r.at("setting_id").get<int>();
        rec.init_index = r.at("init_index").get<int>();
        for (char c : r.at("basis").get<std::string>())
            rec.basis.push_back(axis_from_char(c));
        rec.time = r.at("time").get<double>();
        std::size_t n_shots = r.at("n_shots").get<std::size_t>();
        std::vector<uint8_t> bytes =
            base64_decode(r.at("bits").get<std::string>());
        if (bytes.size() != n_shots * 8)
            throw std::invalid_argument("dataset: bitstring payload size mismatch");
        rec.bits.resize(n_shots);
        for (std::size_t s = 0; s < n_shots; ++s) {
            uint64_t w = 0;
            for (int b = 0; b < 8; ++b)
                w |= uint64_t(bytes[s * 8 + b]) << (8 * b);
            rec.bits[s] = w;
        }
        ds.records.push_back(std::move(rec));
    }
    ds.validate();
    return ds;
}

void save_dataset(const ShotDataset& ds, const std::string& path) {
    write_text(path, dataset_to_json(ds).dump() + "\n");
}

ShotDataset load_dataset(const std::string& path) {
    return dataset_from_json(load_json_file(path));
}

json ensemble_to_json(const LearnedEnsemble& ens) {
    json j = write_file_header();
    j["family"] = family_to_json(ens.family);
    j["dissipator"] = dissipator_to_json(ens.dissipator);
    j["mean"] = vector_to_json(ens.mean);
    j["covariance"] = matrix_to_json(ens.covariance);
    json reps = json::array();
    for (const auto& r : ens.replicas) reps.push_back(vector_to_json(r));
    j["replicas"] = reps;
    j["method"] = ens.method;
    j["n_failures"] = ens.n_failures;
    return j;
}

LearnedEnsemble ensemble_from_json(const json& j) {
    check_schema(j, "ensemble");
    LearnedEnsemble ens;
    ens.family = family_from_json(j.at("family"));
    ens.dissipator = dissipator_from_json(j.at("dissipator"));
    ens.mean = vector_from_json(j.at("mean"));
    ens.covariance = matrix_from_json(j.at("covariance"));
    for (const auto& r : j.at("replicas"))
        ens.replicas.push_back(vector_from_json(r));
    ens.method = j.at("method").get<std::string>();
    ens.n_failures = j.at("n_failures").get<int>();
    return ens;
}

void save_ensemble(const LearnedEnsemble& ens, const std::string& path) {
    write_text(path, ensemble_to_json(ens).dump() + "\n");
}

LearnedEnsemble load_ensemble(const std::string& path) {
    return ensemble_from_json(load_json_file(path));
}

namespace {

std::string format_double(double v) {
    char buf[32];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_time_trace_csv(const TimeTrace& trace, const std::string& path) {
    std::ostringstream out;
    out << "time_s,value,std_error\n";
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        double err = i < trace.std_errors.size() ? trace.std_errors[i] : 0.0;
        out << format_double(trace.times[i]) << ","
            << format_double(trace.values[i]) << "," << format_double(err)
            << "\n";
    }
    write_text(path, out.str());
}

void save_prediction_band_csv(const PredictionBand& band,
                              const std::string& path) {
    std::ostringstream out;
    out << "time,mean_model,ensemble_mean,lower,upper\n";
    for (std::size_t i = 0; i < band.times.size(); ++i)
        out << format_double(band.times[i]) << ","
            << format_double(band.mean_model[i]) << ","
            << format_double(band.ensemble_mean[i]) << ","
            << format_double(band.lower[i]) << ","
            << format_double(band.upper[i]) << "\n";
    write_text(path, out.str());
}

void save_sweep_csv(const SweepResult& sweep, const std::string& path) {
    std::ostringstream out;
    out << "ansatz,n_shots,residual\n";
    for (const auto& e : sweep.entries)
        out << e.ansatz_label << "," << format_double(e.n_shots) << ","
            << format_double(e.residual) << "\n";
    write_text(path, out.str());
}

void save_bound_report_json(const std::vector<BoundReportRow>& rows,
                            const json& config, const std::string& path) {
    json j = write_file_header();
    j["config_fingerprint"] = config_fingerprint(config);
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back(json{{"t", r.t},
                           {"bias_bound", r.bias_bound},
                           {"concentration_bound", r.concentration_bound},
                           {"p", r.p},
                           {"hw_envelope", r.hw_envelope},
                           {"eta", r.eta},
                           {"fidelity_lower", r.fidelity_lower}});
    j["rows"] = arr;
    write_text(path, j.dump(2) + "\n");
}

void save_bound_report_csv(const std::vector<BoundReportRow>& rows,
                           const std::string& path) {
    std::ostringstream out;
    out << "t,bias_bound,concentration_bound,p,hw_envelope,eta,fidelity_lower\n";
    for (const auto& r : rows)
        out << format_double(r.t) << "," << format_double(r.bias_bound) << ","
            << format_double(r.concentration_bound) << "," << format_double(r.p)
            << "," << format_double(r.hw_envelope) << ","
            << format_double(r.eta) << "," << format_double(r.fidelity_lower)
            << "\n";
    write_text(path, out.str());
}

AnsatzFamily RunConfig::ansatz_family() const {
    AnsatzFamily f;
    f.kind = ansatz_kind_from_string(ansatz);
    f.n_sites = n_sites;
    f.k = ansatz_k;
    return f;
}

DissipatorSpec RunConfig::dissipator_spec() const {
    if (dissipator == "none") return DissipatorSpec::none();
    if (dissipator == "general_gamma") return DissipatorSpec::general_gamma();
    if (dissipator == "families")
        return DissipatorSpec::standard_families(n_sites);
    throw std::invalid_argument("config: unknown dissipator: " + dissipator);
}

RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    cfg.raw = j;
    if (j.contains("scenario")) {
        const json& s = j.at("scenario");
        cfg.preset = s.value("preset", "");
        cfg.model_file = s.value("model_file", "");
        cfg.n_sites = s.value("n_sites", 0);
    }
    if (cfg.preset.empty() == cfg.model_file.empty())
        throw std::invalid_argument(
            "config: scenario needs exactly one of preset/model_file");
    if (!cfg.preset.empty() && cfg.n_sites <= 0)
        throw std::invalid_argument("config: preset scenario needs n_sites");
    if (j.contains("acquisition")) {
        const json& a = j.at("acquisition");
        cfg.method = a.value("method", cfg.method);
        cfg.n_u = a.value("n_u", cfg.n_u);
        cfg.n_m = a.value("n_m", cfg.n_m);
        cfg.n_t = a.value("n_t", cfg.n_t);
        if (a.contains("times"))
            cfg.times = a.at("times").get<std::vector<double>>();
        cfg.t_max = a.value("t_max", cfg.t_max);
        if (a.contains("noise")) cfg.noise = noise_from_json(a.at("noise"));
    }
    if (cfg.method != "integral" && cfg.method != "differential")
        throw std::invalid_argument("config: unknown method: " + cfg.method);
    if (j.contains("learning")) {
        const json& l = j.at("learning");
        cfg.ansatz = l.value("ansatz", cfg.ansatz);
        cfg.ansatz_k = l.value("k", cfg.ansatz_k);
        cfg.dissipator = l.value("dissipator", cfg.dissipator);
        cfg.beta = l.value("beta", cfg.beta);
        if (l.contains("tau_grid"))
            cfg.regularizer_tau_grid =
                l.at("tau_grid").get<std::vector<double>>();
        if (l.contains("alpha_grid"))
            cfg.regularizer_alpha_grid =
                l.at("alpha_grid").get<std::vector<double>>();
        cfg.psd_constrained = l.value("psd", cfg.psd_constrained);
    }
    if (j.contains("uncertainty")) {
        const json& u = j.at("uncertainty");
        cfg.n_resamples = u.value("n_resamples", cfg.n_resamples);
        cfg.resampler = u.value("resampler", cfg.resampler);
    }
    if (cfg.resampler != "bootstrap" && cfg.resampler != "jackknife")
        throw std::invalid_argument("config: unknown resampler: " + cfg.resampler);
    if (j.contains("bounds")) {
        const json& b = j.at("bounds");
        cfg.eta = b.value("eta", cfg.eta);
        cfg.p = b.value("p", cfg.p);
        cfg.constants.c_subg = b.value("c_subg", cfg.constants.c_subg);
        cfg.constants.kappa = b.value("kappa", cfg.constants.kappa);
        cfg.truncation_radius = b.value("truncation_radius", -1);
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(load_json_file(path));
}

}  // namespace beqs
