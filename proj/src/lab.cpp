#include "beqs/lab.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace beqs {

namespace {

// splitmix64 finalizer.
uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<Axis> random_basis(int n_sites, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 2);
    std::vector<Axis> basis(n_sites);
    for (int i = 0; i < n_sites; ++i)
        basis[i] = static_cast<Axis>(pick(rng) + 1);
    return basis;
}

// rho -> u_site rho u_site^dag for a 2x2 u acting on one site.
void apply_single_qubit(MatrixXcd& rho, int n_sites, int site,
                        const Eigen::Matrix2cd& u) {
    const long dim = rho.rows();
    const long bit = 1L << site;
    // Rows.
    for (long a = 0; a < dim; ++a) {
        if (a & bit) continue;
        for (long b = 0; b < dim; ++b) {
            Complex r0 = rho(a, b), r1 = rho(a | bit, b);
            rho(a, b) = u(0, 0) * r0 + u(0, 1) * r1;
            rho(a | bit, b) = u(1, 0) * r0 + u(1, 1) * r1;
        }
    }
    // Columns.
    for (long b = 0; b < dim; ++b) {
        if (b & bit) continue;
        for (long a = 0; a < dim; ++a) {
            Complex c0 = rho(a, b), c1 = rho(a, b | bit);
            rho(a, b) = c0 * std::conj(u(0, 0)) + c1 * std::conj(u(0, 1));
            rho(a, b | bit) = c0 * std::conj(u(1, 0)) + c1 * std::conj(u(1, 1));
        }
    }
    (void)n_sites;
}

Eigen::Matrix2cd basis_unitary(Axis a) {
    const double s = 1.0 / std::sqrt(2.0);
    const Complex I_(0, 1);
    Eigen::Matrix2cd u;
    switch (a) {
        case Axis::X: u << s, s, s, -s; break;
        case Axis::Y: u << s, -I_ * s, s, I_ * s; break;
        default: u.setIdentity(); break;  // Z
    }
    return u;
}

std::vector<uint64_t> sample_bitstrings(const Eigen::VectorXd& probs, int n_shots,
                                        std::mt19937_64& rng) {
    const long dim = probs.size();
    Eigen::VectorXd cdf(dim);
    double acc = 0.0;
    for (long a = 0; a < dim; ++a) {
        acc += std::max(probs[a], 0.0);
        cdf[a] = acc;
    }
    std::uniform_real_distribution<double> unif(0.0, acc);
    std::vector<uint64_t> out(n_shots);
    for (int s = 0; s < n_shots; ++s) {
        double r = unif(rng);
        long lo = 0, hi = dim - 1;
        while (lo < hi) {
            long mid = (lo + hi) / 2;
            if (cdf[mid] < r) lo = mid + 1; else hi = mid;
        }
        out[s] = uint64_t(lo);
    }
    return out;
}

}  // namespace

uint64_t derive_seed(uint64_t master, uint64_t index) {
    return mix64(mix64(master) ^ mix64(index + 0x51ed2701ULL));
}

std::size_t ShotDataset::total_shots() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.bits.size();
    return n;
}

void ShotDataset::validate() const {
    uint64_t mask = n_sites < 64 ? (uint64_t(1) << n_sites) - 1 : ~uint64_t(0);
    for (const auto& r : records) {
        if (int(r.basis.size()) != n_sites)
            throw DimensionError("record basis length != n_sites");
        if (r.init_index < 0 || r.init_index >= int(inits.size()))
            throw std::invalid_argument("record init_index out of range");
        if (r.setting_id < 0 || r.setting_id >= n_settings)
            throw std::invalid_argument("record setting_id out of range");
        for (uint64_t b : r.bits)
            if (b & ~mask)
                throw std::invalid_argument("bitstring has bits beyond n_sites");
    }
}

std::vector<double> miscalibration_profile(int n_sites, double amplitude) {
    std::vector<double> scale(n_sites, 1.0);
    if (amplitude == 0.0 || n_sites == 1) return scale;
    double mid = 0.5 * (n_sites - 1);
    for (int i = 0; i < n_sites; ++i)
        scale[i] = 1.0 - amplitude * std::abs(i - mid) / mid;
    return scale;
}

SiteState prepare_eigenstate(PauliEig target, double angle_scale) {
    if (angle_scale == 1.0) return SiteState::from_eig(target);
    // Rotation from |1> (Bloch (0,0,-1)) to the target axis, with the angle
    // rescaled by the calibration factor.
    std::array<double, 3> r0{0, 0, -1};
    std::array<double, 3> rt = SiteState::from_eig(target).bloch;
    double dot = r0[0] * rt[0] + r0[1] * rt[1] + r0[2] * rt[2];
    double theta = std::acos(std::clamp(dot, -1.0, 1.0)) * angle_scale;
    std::array<double, 3> axis{r0[1] * rt[2] - r0[2] * rt[1],
                               r0[2] * rt[0] - r0[0] * rt[2],
                               r0[0] * rt[1] - r0[1] * rt[0]};
    double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] +
                            axis[2] * axis[2]);
    if (norm < 1e-12) axis = {0, 1, 0};  // antipodal (+Z) or already there (-Z)
    else for (auto& a : axis) a /= norm;
    double c = std::cos(theta), s = std::sin(theta);
    double ndotr = axis[0] * r0[0] + axis[1] * r0[1] + axis[2] * r0[2];
    std::array<double, 3> cross{axis[1] * r0[2] - axis[2] * r0[1],
                                axis[2] * r0[0] - axis[0] * r0[2],
                                axis[0] * r0[1] - axis[1] * r0[0]};
    SiteState st;
    st.label = target;  // nominal preparation label
    for (int a = 0; a < 3; ++a)
        st.bloch[a] = r0[a] * c + cross[a] * s + axis[a] * ndotr * (1 - c);
    return st;
}

Eigen::VectorXd basis_probabilities(const MatrixXcd& rho,
                                    const std::vector<Axis>& basis) {
    MatrixXcd rotated = rho;
    const int n = int(basis.size());
    for (int i = 0; i < n; ++i) {
        if (basis[i] == Axis::Z) continue;
        apply_single_qubit(rotated, n, i, basis_unitary(basis[i]));
    }
    return rotated.diagonal().real();
}

void inject_readout_error(std::vector<ShotRecord>& records, int n_sites,
                          double p_flip, std::mt19937_64& rng) {
    if (p_flip < 0.0 || p_flip > 1.0)
        throw std::invalid_argument("p_flip must be in [0, 1]");
    if (p_flip == 0.0) return;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (auto& r : records)
        for (auto& word : r.bits)
            for (int i = 0; i < n_sites; ++i) {
                uint64_t bit = uint64_t(1) << i;
                if (!(word & bit) && unif(rng) < p_flip) word |= bit;
            }
}

ShotDataset generate_integral_protocol(const ModelSpec& hidden,
                                       const IntegralProtocolConfig& cfg) {
    const int N = hidden.n_sites();
    if (N > 12) throw CapacityError("shot generation capped at 12 sites");
    if (cfg.states.empty() || cfg.times.empty())
        throw std::invalid_argument("integral protocol needs states and times");
    ShotDataset ds;
    ds.n_sites = N;
    ds.protocol = "integral";
    ds.rng_seed = cfg.seed;
    ds.noise = cfg.noise;
    ds.inits = cfg.states;

    auto scale = miscalibration_profile(N, cfg.noise.miscalibration);
    int setting = 0;
    for (std::size_t si = 0; si < cfg.states.size(); ++si) {
        // Miscalibration reshapes the actually prepared state; the nominal
        // spec recorded in `inits` is what the estimators assume.
        ProductStateSpec actual = cfg.states[si];
        if (cfg.noise.miscalibration > 0.0) {
            if (si < cfg.rotations.size() && cfg.rotations[si]) {
                const RotationPrep& rp = *cfg.rotations[si];
                actual = ProductStateSpec::global_rotation(N, rp.theta, rp.axis,
                                                           scale);
            } else {
                std::vector<SiteState> sites;
                for (int i = 0; i < N; ++i) {
                    const SiteState& s = cfg.states[si].site(i);
                    if (s.label)
                        sites.push_back(prepare_eigenstate(*s.label, scale[i]));
                    else
                        sites.push_back(s);
                }
                actual = ProductStateSpec(std::move(sites));
            }
        }
        auto rhos = propagate(hidden, DensityState::from_product(actual),
                              cfg.times);
        for (std::size_t ti = 0; ti < cfg.times.size(); ++ti) {
            for (int u = 0; u < cfg.n_u; ++u, ++setting) {
                std::mt19937_64 rng(derive_seed(cfg.seed, uint64_t(setting)));
                ShotRecord rec;
                rec.setting_id = setting;
                rec.init_index = int(si);
                rec.basis = random_basis(N, rng);
                rec.time = cfg.times[ti];
                auto probs = basis_probabilities(rhos[ti].matrix, rec.basis);
                rec.bits = sample_bitstrings(probs, cfg.n_m, rng);
                if (cfg.noise.readout_flip_p > 0.0) {
                    std::vector<ShotRecord> one{std::move(rec)};
                    inject_readout_error(one, N, cfg.noise.readout_flip_p, rng);
                    rec = std::move(one.front());
                }
                ds.records.push_back(std::move(rec));
            }
        }
    }
    ds.n_settings = setting;
    return ds;
}

ShotDataset generate_differential_protocol(const ModelSpec& hidden,
                                           const DifferentialProtocolConfig& cfg) {
    const int N = hidden.n_sites();
    if (N > 12) throw CapacityError("shot generation capped at 12 sites");
    if (cfg.n_t < 1) throw std::invalid_argument("n_t must be >= 1");
    ShotDataset ds;
    ds.n_sites = N;
    ds.protocol = "differential";
    ds.rng_seed = cfg.seed;
    ds.noise = cfg.noise;

    std::vector<double> times(cfg.n_t);
    for (int r = 0; r < cfg.n_t; ++r)
        times[r] = cfg.n_t == 1 ? 0.0 : cfg.t_max * r / (cfg.n_t - 1);

    auto scale = miscalibration_profile(N, cfg.noise.miscalibration);
    std::uniform_int_distribution<int> pick6(0, 5);
    for (int u = 0; u < cfg.n_u; ++u) {
        std::mt19937_64 rng(derive_seed(cfg.seed, uint64_t(u)));
        std::vector<PauliEig> labels(N);
        std::vector<SiteState> actual_sites(N);
        for (int i = 0; i < N; ++i) {
            labels[i] = static_cast<PauliEig>(pick6(rng));
            actual_sites[i] = prepare_eigenstate(labels[i], scale[i]);
        }
        ds.inits.push_back(ProductStateSpec::from_eigs(labels));
        std::vector<Axis> basis = random_basis(N, rng);
        auto rhos = propagate(
            hidden, DensityState::from_product(ProductStateSpec(actual_sites)),
            times);
        for (int ti = 0; ti < cfg.n_t; ++ti) {
            ShotRecord rec;
            rec.setting_id = u;
            rec.init_index = u;
            rec.basis = basis;
            rec.time = times[ti];
            auto probs = basis_probabilities(rhos[ti].matrix, basis);
            rec.bits = sample_bitstrings(probs, cfg.n_m, rng);
            ds.records.push_back(std::move(rec));
        }
        if (cfg.noise.readout_flip_p > 0.0) {
            std::vector<ShotRecord> mine(ds.records.end() - cfg.n_t,
                                         ds.records.end());
            inject_readout_error(mine, N, cfg.noise.readout_flip_p, rng);
            std::copy(mine.begin(), mine.end(), ds.records.end() - cfg.n_t);
        }
    }
    ds.n_settings = cfg.n_u;
    return ds;
}

}  // namespace beqs
