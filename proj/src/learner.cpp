#include "beqs/learner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace beqs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<PauliString> low_weight_observables(int n) {
    std::vector<PauliString> obs;
    for (int i = 0; i < n; ++i)
        for (Axis a : {Axis::X, Axis::Y, Axis::Z})
            obs.push_back(PauliString::single(n, i, a));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (Axis a : {Axis::X, Axis::Y, Axis::Z})
                for (Axis b : {Axis::X, Axis::Y, Axis::Z}) {
                    PauliString p = PauliString::single(n, i, a);
                    PauliString q = PauliString::single(n, j, b);
                    obs.push_back(multiply(p, q));
                }
    return obs;
}

// Hermitian-part semantics: a lone A_ij dephasing column carries an
// anti-Hermitian (imaginary-weight) component that the symmetric Gamma
// pairing cancels; taking the real part per column is the symmetrized half.
double real_weight(const PauliString& term) { return term.weight().real(); }

struct AxesKey {
    uint64_t x, z;
    bool operator==(const AxesKey&) const = default;
};
struct AxesKeyHash {
    std::size_t operator()(const AxesKey& k) const {
        uint64_t h = k.x * 0x9e3779b97f4a7c15ULL;
        h ^= k.z * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2);
        return std::size_t(h);
    }
};

struct TraceKey {
    uint64_t x, z;
    int init, t;
    bool operator==(const TraceKey&) const = default;
};
struct TraceKeyHash {
    std::size_t operator()(const TraceKey& k) const {
        uint64_t h = k.x * 0x9e3779b97f4a7c15ULL;
        h ^= k.z * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2);
        h ^= (uint64_t(uint32_t(k.init)) << 32 | uint32_t(k.t)) +
             0x165667b19e3779f9ULL + (h << 6);
        return std::size_t(h);
    }
};

double trapezoid(const std::vector<double>& t, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i)
        s += 0.5 * (v[i] + v[i + 1]) * (t[i + 1] - t[i]);
    return s;
}

std::vector<std::string> dissipative_col_meta(const DissipatorSpec& dis, int n) {
    std::vector<std::string> meta;
    if (dis.model == DissipatorModel::GeneralGamma) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                meta.push_back("gamma_" + std::to_string(i + 1) + "_" +
                               std::to_string(j + 1));
    } else if (dis.model == DissipatorModel::RateFamilies) {
        for (const auto& f : dis.families) meta.push_back("rate_" + f.label);
    }
    return meta;
}

OperatorSum family_column(const RateFamily& fam, const PauliString& p) {
    OperatorSum out(p.n_sites());
    for (const auto& jump : fam.jumps)
        out.add(adjoint_jump_action(jump, 1.0, p));
    return out;
}

/// Sparse column assembly for one analytically evaluated differential row.
void append_analytic_row(const PauliString& p, const ProductStateSpec& state,
                         const std::vector<PauliString>& basis,
                         const std::unordered_map<AxesKey, int, AxesKeyHash>& colmap,
                         const DissipatorSpec& dis, int n_ham, int row,
                         std::vector<Eigen::Triplet<double>>& triplets) {
    const int n = p.n_sites();
    uint64_t u_mask = p.support_mask();
    for (int i = 0; i < n; ++i)
        if (!state.site(i).mixed) u_mask |= uint64_t(1) << i;
    std::vector<int> u_sites;
    for (uint64_t m = u_mask; m; m &= m - 1)
        u_sites.push_back(std::countr_zero(m));

    auto try_column = [&](const PauliString& h) {
        auto it = colmap.find({h.axes_key_x(), h.axes_key_z()});
        if (it == colmap.end()) return;
        double val =
            expectation_product_state(adjoint_hamiltonian_column(h, p), state);
        if (val != 0.0) triplets.emplace_back(row, it->second, val);
    };

    if (u_sites.size() <= 12) {
        for (int a : u_sites)
            for (Axis ax : {Axis::X, Axis::Y, Axis::Z})
                try_column(PauliString::single(n, a, ax));
        for (std::size_t ia = 0; ia < u_sites.size(); ++ia)
            for (std::size_t ib = ia + 1; ib < u_sites.size(); ++ib)
                for (Axis ax : {Axis::X, Axis::Y, Axis::Z})
                    for (Axis bx : {Axis::X, Axis::Y, Axis::Z})
                        try_column(multiply(
                            PauliString::single(n, u_sites[ia], ax),
                            PauliString::single(n, u_sites[ib], bx)));
    } else {
        for (const auto& h : basis) try_column(h);
    }

    if (dis.model == DissipatorModel::GeneralGamma) {
        for (int i : u_sites)
            for (int j : u_sites) {
                double val = expectation_product_state(
                    adjoint_dephasing_column(i, j, p), state);
                if (val != 0.0)
                    triplets.emplace_back(row, n_ham + i * n + j, val);
            }
    } else if (dis.model == DissipatorModel::RateFamilies) {
        for (std::size_t f = 0; f < dis.families.size(); ++f) {
            double val = expectation_product_state(
                family_column(dis.families[f], p), state);
            if (val != 0.0)
                triplets.emplace_back(row, n_ham + int(f), val);
        }
    }
}

double fit_loglog_slope(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long n = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] <= 0 || ys[i] <= 0) continue;
        double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        ++n;
    }
    double denom = n * sxx - sx * sx;
    if (n < 2 || std::abs(denom) < 1e-30) return 0.0;
    return (n * sxy - sx * sy) / denom;
}

}  // namespace

DissipatorSpec DissipatorSpec::standard_families(int n_sites) {
    DissipatorSpec dis;
    dis.model = DissipatorModel::RateFamilies;
    RateFamily local{"local_dephasing", {}};
    for (int i = 0; i < n_sites; ++i)
        local.jumps.emplace_back(
            n_sites, std::vector<PauliString>{
                         PauliString::single(n_sites, i, Axis::Z)});
    RateFamily coll{"collective_dephasing", {}};
    {
        OperatorSum l(n_sites);
        for (int i = 0; i < n_sites; ++i)
            l.add(PauliString::single(n_sites, i, Axis::Z));
        coll.jumps.push_back(std::move(l));
    }
    RateFamily em{"spontaneous_emission", {}};
    for (int i = 0; i < n_sites; ++i) {
        // sigma^- = (X - iY)/2
        OperatorSum l(n_sites);
        l.add(PauliString::single(n_sites, i, Axis::X, 0.5));
        l.add(PauliString::single(n_sites, i, Axis::Y, 0.5).phase_shifted(3));
        em.jumps.push_back(std::move(l));
    }
    dis.families = {std::move(local), std::move(coll), std::move(em)};
    return dis;
}

double LinearSystem::sparsity() const {
    double total = double(matrix.rows()) * double(matrix.cols());
    if (total == 0) return 0.0;
    long nz = 0;
    for (int k = 0; k < matrix.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, k); it; ++it)
            if (it.value() != 0.0) ++nz;
    return 1.0 - double(nz) / total;
}

Eigen::MatrixXd RegularizerSpec::orthonormal_structure() const {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(structure);
    long r = qr.rank();
    Eigen::MatrixXd q =
        qr.householderQ() *
        Eigen::MatrixXd::Identity(structure.rows(), r);
    return q;
}

double RegularizerSpec::structure_condition() const {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(structure);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[s.size() - 1] <= 0)
        return std::numeric_limits<double>::infinity();
    double c = s[0] / s[s.size() - 1];
    return c * c;  // condition of G^T G
}

RegularizerSpec make_decay_regularizer(const AnsatzFamily& family, double beta,
                                       const std::vector<double>& tau_grid,
                                       const std::vector<double>& alpha_grid) {
    auto basis = build_basis(family);
    const int n_ham = int(basis.size());
    std::vector<int> single_cols;
    std::vector<std::pair<int, int>> pair_cols;  // (col, distance)
    for (int m = 0; m < n_ham; ++m) {
        if (basis[m].support_size() == 1) {
            single_cols.push_back(m);
        } else {
            uint64_t mask = basis[m].support_mask();
            int i = std::countr_zero(mask);
            int j = 63 - std::countl_zero(mask);
            pair_cols.emplace_back(m, j - i);
        }
    }
    RegularizerSpec spec;
    spec.beta = beta;
    long ncols = long(single_cols.size()) + long(tau_grid.size()) +
                 long(alpha_grid.size());
    spec.structure = Eigen::MatrixXd::Zero(n_ham, ncols);
    long c = 0;
    for (int m : single_cols) spec.structure(m, c++) = 1.0;
    for (double tau : tau_grid) {
        for (auto [m, d] : pair_cols)
            spec.structure(m, c) = std::exp(-tau * d);
        ++c;
    }
    for (double alpha : alpha_grid) {
        for (auto [m, d] : pair_cols)
            spec.structure(m, c) = std::pow(double(d), -alpha);
        ++c;
    }
    return spec;
}

LinearSystem build_integral_system(const ShadowEstimator& est,
                                   const AnsatzFamily& ansatz,
                                   const DissipatorSpec& dis,
                                   const IntegralBuildOptions& opts) {
    const ShotDataset& ds = est.dataset();
    const int n = ansatz.n_sites;
    if (n != ds.n_sites)
        throw DimensionError("ansatz size != dataset size");
    auto basis = build_basis(ansatz);
    const int n_ham = int(basis.size());
    auto observables = low_weight_observables(n);

    std::vector<double> times = opts.times.empty() ? est.times() : opts.times;
    if (times.size() < 2 || !std::is_sorted(times.begin(), times.end()))
        throw std::invalid_argument("integral build: need sorted times");
    std::vector<int> inits = opts.init_indices;
    if (inits.empty())
        for (std::size_t s = 0; s < ds.inits.size(); ++s)
            inits.push_back(int(s));

    LinearSystem sys;
    for (const auto& h : basis) sys.col_meta.push_back(h.to_string());
    for (const auto& m : dissipative_col_meta(dis, n))
        sys.col_meta.push_back(m);
    sys.n_hamiltonian_cols = n_ham;
    if (dis.model == DissipatorModel::GeneralGamma) {
        sys.gamma_block_start = n_ham;
        sys.gamma_n_sites = n;
    }
    const int n_cols = int(sys.col_meta.size());

    // Lazily estimated correlator traces shared between rows.
    std::unordered_map<TraceKey, double, TraceKeyHash> trace_cache;
    auto trace_of = [&](uint64_t x, uint64_t z, int init, int t) -> double {
        if ((x | z) == 0) return 1.0;
        TraceKey key{x, z, init, t};
        auto it = trace_cache.find(key);
        if (it != trace_cache.end()) return it->second;
        double v;
        try {
            v = est.estimate_pauli(PauliString(n, x, z), times[t], init,
                                   opts.weights)
                    .value;
        } catch (const NotMeasurableError&) {
            v = kNaN;
        }
        trace_cache.emplace(key, v);
        return v;
    };
    auto integrated_trace = [&](const OperatorSum& op, int init) -> double {
        if (op.empty()) return 0.0;
        std::vector<double> vals(times.size(), 0.0);
        for (const auto& term : op.terms()) {
            double w = real_weight(term);
            for (std::size_t t = 0; t < times.size(); ++t) {
                double v = trace_of(term.axes_key_x(), term.axes_key_z(), init,
                                    int(t));
                if (std::isnan(v)) return kNaN;
                vals[t] += w * v;
            }
        }
        return trapezoid(times, vals);
    };

    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> targets;
    const int t_last = int(times.size()) - 1;
    for (int init : inits) {
        for (const auto& p : observables) {
            double b = trace_of(p.axes_key_x(), p.axes_key_z(), init, t_last) -
                       trace_of(p.axes_key_x(), p.axes_key_z(), init, 0);
            bool ok = !std::isnan(b);
            std::vector<std::pair<int, double>> entries;
            for (int m = 0; ok && m < n_ham; ++m) {
                double v = integrated_trace(
                    adjoint_hamiltonian_column(basis[m], p), init);
                if (std::isnan(v)) { ok = false; break; }
                if (v != 0.0) entries.emplace_back(m, v);
            }
            if (ok && dis.model == DissipatorModel::GeneralGamma) {
                for (int i = 0; ok && i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        double v = integrated_trace(
                            adjoint_dephasing_column(i, j, p), init);
                        if (std::isnan(v)) { ok = false; break; }
                        if (v != 0.0)
                            entries.emplace_back(n_ham + i * n + j, v);
                    }
            } else if (ok && dis.model == DissipatorModel::RateFamilies) {
                for (std::size_t f = 0; ok && f < dis.families.size(); ++f) {
                    double v = integrated_trace(
                        family_column(dis.families[f], p), init);
                    if (std::isnan(v)) { ok = false; break; }
                    if (v != 0.0) entries.emplace_back(n_ham + int(f), v);
                }
            }
            if (!ok) {
                ++sys.dropped_rows;
                continue;
            }
            int row = int(targets.size());
            for (auto [c, v] : entries) triplets.emplace_back(row, c, v);
            targets.push_back(b);
            sys.row_meta.push_back({p, init, "integral"});
        }
    }

    sys.matrix.resize(long(targets.size()), n_cols);
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    sys.target = Eigen::Map<Eigen::VectorXd>(targets.data(),
                                             long(targets.size()));
    return sys;
}

namespace {

LinearSystem assemble_differential(
    const std::vector<DifferentialRow>& rows, const AnsatzFamily& ansatz,
    const DissipatorSpec& dis,
    const std::vector<int>* init_keys) {
    const int n = ansatz.n_sites;
    auto basis = build_basis(ansatz);
    const int n_ham = int(basis.size());

    std::unordered_map<AxesKey, int, AxesKeyHash> colmap;
    for (int m = 0; m < n_ham; ++m)
        colmap.emplace(AxesKey{basis[m].axes_key_x(), basis[m].axes_key_z()}, m);

    LinearSystem sys;
    for (const auto& h : basis) sys.col_meta.push_back(h.to_string());
    for (const auto& m : dissipative_col_meta(dis, n))
        sys.col_meta.push_back(m);
    sys.n_hamiltonian_cols = n_ham;
    if (dis.model == DissipatorModel::GeneralGamma) {
        sys.gamma_block_start = n_ham;
        sys.gamma_n_sites = n;
    }

    std::vector<Eigen::Triplet<double>> triplets;
    sys.target.resize(long(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        append_analytic_row(rows[r].observable, rows[r].state, basis, colmap,
                            dis, n_ham, int(r), triplets);
        sys.target[long(r)] = rows[r].derivative;
        sys.row_meta.push_back({rows[r].observable,
                                init_keys ? (*init_keys)[r] : -1,
                                "differential"});
    }
    sys.matrix.resize(long(rows.size()), long(sys.col_meta.size()));
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    return sys;
}

}  // namespace

LinearSystem build_differential_system_from_rows(
    const std::vector<DifferentialRow>& rows, const AnsatzFamily& ansatz,
    const DissipatorSpec& dis) {
    return assemble_differential(rows, ansatz, dis, nullptr);
}

LinearSystem build_differential_system(const ShadowEstimator& est,
                                       const AnsatzFamily& ansatz,
                                       const DissipatorSpec& dis,
                                       const DifferentialBuildOptions& opts) {
    const ShotDataset& ds = est.dataset();
    const int n = ansatz.n_sites;
    if (n != ds.n_sites)
        throw DimensionError("ansatz size != dataset size");
    if (ds.protocol != "differential")
        throw std::invalid_argument("differential build needs a differential "
                                    "protocol dataset");
    auto observables = low_weight_observables(n);
    std::vector<double> times = est.times();

    // Per-init measurement basis (fixed across the times of a setting).
    std::vector<std::vector<Axis>> init_basis(ds.inits.size());
    for (const auto& rec : ds.records)
        if (init_basis[rec.init_index].empty())
            init_basis[rec.init_index] = rec.basis;

    std::vector<DifferentialRow> rows;
    std::vector<int> init_keys;
    int dropped = 0;
    for (const auto& p : observables) {
        std::vector<int> support;
        for (uint64_t m = p.support_mask(); m; m &= m - 1)
            support.push_back(std::countr_zero(m));
        std::set<std::vector<PauliEig>> seen;
        for (std::size_t u = 0; u < ds.inits.size(); ++u) {
            bool usable = true;
            std::vector<PauliEig> combo;
            std::vector<std::pair<int, PauliEig>> pure;
            for (int s : support) {
                if (init_basis[u].empty() || init_basis[u][s] != p.axis(s)) {
                    usable = false;
                    break;
                }
                const SiteState& st = ds.inits[u].site(s);
                if (st.mixed || !st.label) { usable = false; break; }
                combo.push_back(*st.label);
                pure.emplace_back(s, *st.label);
            }
            if (!usable || !seen.insert(combo).second) continue;
            ProductStateSpec mixed = ProductStateSpec::mixed_except(n, pure);
            TimeTrace trace{OperatorSum(n, {p})};
            bool ok = true;
            for (double t : times) {
                try {
                    auto e = est.estimate_pauli_mixed(p, mixed, t,
                                                      opts.weights);
                    trace.times.push_back(t);
                    trace.values.push_back(e.value);
                    trace.std_errors.push_back(
                        std::max(e.std_error, 1e-12));
                } catch (const NotMeasurableError&) {
                    ok = false;
                    break;
                }
            }
            if (!ok || long(trace.times.size()) <= opts.fit_degree) {
                ++dropped;
                continue;
            }
            DerivativeEstimate d = fit_derivative(trace, opts.fit_degree);
            rows.push_back({p, mixed, d.value, d.std_error});
            init_keys.push_back(int(u));
        }
    }
    LinearSystem sys = assemble_differential(rows, ansatz, dis, &init_keys);
    sys.dropped_rows = dropped;
    return sys;
}

namespace {

Eigen::MatrixXd regularizer_rows(const RegularizerSpec& reg, long n_cols) {
    Eigen::MatrixXd q = reg.orthonormal_structure();
    long gr = q.rows();
    if (gr > n_cols)
        throw std::invalid_argument("regularizer structure taller than system");
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(gr, n_cols);
    r.block(0, 0, gr, gr) =
        Eigen::MatrixXd::Identity(gr, gr) - q * q.transpose();
    return r;
}

}  // namespace

LearnResult solve_least_squares(const LinearSystem& sys,
                                const std::optional<RegularizerSpec>& reg) {
    if (sys.rows() == 0)
        throw std::invalid_argument("least squares: no usable rows");
    Eigen::MatrixXd a = sys.dense();
    const long n_cols = a.cols();
    Eigen::MatrixXd stacked = a;
    Eigen::VectorXd rhs = sys.target;
    if (reg && reg->beta > 0.0) {
        Eigen::MatrixXd r = regularizer_rows(*reg, n_cols);
        stacked.conservativeResize(a.rows() + r.rows(), Eigen::NoChange);
        stacked.bottomRows(r.rows()) = std::sqrt(reg->beta) * r;
        rhs.conservativeResize(stacked.rows());
        rhs.tail(r.rows()).setZero();
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    LearnResult res;
    res.coeffs = svd.solve(rhs);
    res.residual_norm = (a * res.coeffs - sys.target).norm();
    res.method = "least_squares";
    res.rank = svd.rank();
    return res;
}

LearnResult solve_psd_constrained(const LinearSystem& sys,
                                  const std::optional<RegularizerSpec>& reg,
                                  const PsdSolveOptions& opts) {
    if (sys.rows() == 0)
        throw std::invalid_argument("psd solve: no usable rows");
    const long n_cols = sys.cols();
    const long n_ham = sys.n_hamiltonian_cols;
    const long n_dis = n_cols - n_ham;
    if (n_dis <= 0) return solve_least_squares(sys, reg);

    Eigen::MatrixXd a = sys.dense();
    Eigen::MatrixXd h = 2.0 * a.transpose() * a;
    if (reg && reg->beta > 0.0) {
        Eigen::MatrixXd r = regularizer_rows(*reg, n_cols);
        h += 2.0 * reg->beta * r.transpose() * r;
    }
    double rho = opts.admm_rho > 0.0
                     ? opts.admm_rho
                     : std::max(h.trace() / double(n_cols), 1e-12);
    for (long i = n_ham; i < n_cols; ++i) h(i, i) += rho;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    Eigen::VectorXd rhs0 = 2.0 * a.transpose() * sys.target;

    const int gn = sys.gamma_n_sites;
    auto project = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        Eigen::VectorXd z = d;
        if (sys.gamma_block_start >= 0) {
            long gs = sys.gamma_block_start - n_ham;
            Eigen::MatrixXd g(gn, gn);
            for (int i = 0; i < gn; ++i)
                for (int j = 0; j < gn; ++j)
                    g(i, j) = d[gs + i * gn + j];
            g = 0.5 * (g + g.transpose()).eval();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
            Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
            g = es.eigenvectors() * ev.asDiagonal() *
                es.eigenvectors().transpose();
            for (int i = 0; i < gn; ++i)
                for (int j = 0; j < gn; ++j)
                    z[gs + i * gn + j] = g(i, j);
        } else {
            z = z.cwiseMax(0.0);  // scalar rates
        }
        return z;
    };

    Eigen::VectorXd z = Eigen::VectorXd::Zero(n_dis);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n_dis);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n_cols);
    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        Eigen::VectorXd rhs = rhs0;
        rhs.tail(n_dis) += rho * (z - u);
        c = ldlt.solve(rhs);
        Eigen::VectorXd d = c.tail(n_dis);
        Eigen::VectorXd z_prev = z;
        z = project(d + u);
        u += d - z;
        double scale = opts.tolerance * std::max(1.0, d.norm());
        if ((d - z).norm() <= scale && rho * (z - z_prev).norm() <= scale)
            break;
    }
    c.tail(n_dis) = z;  // feasible by construction

    LearnResult res;
    res.coeffs = c;
    res.residual_norm = (a * c - sys.target).norm();
    res.method = "psd_constrained";
    res.iterations = iter + 1;
    if (sys.gamma_block_start >= 0) {
        Eigen::MatrixXd g(gn, gn);
        for (int i = 0; i < gn; ++i)
            for (int j = 0; j < gn; ++j)
                g(i, j) = c[sys.gamma_block_start + i * gn + j];
        g = 0.5 * (g + g.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
        double lo = es.eigenvalues().minCoeff();
        double hi = es.eigenvalues().cwiseAbs().maxCoeff();
        res.psd_gap = hi > 0 ? std::max(0.0, -lo / hi) : 0.0;
    }
    return res;
}

ModelSpec LearnResult::to_model(const AnsatzFamily& family,
                                const DissipatorSpec& dis) const {
    const int n_ham = family.hamiltonian_parameter_count();
    const int n = family.n_sites;
    ModelSpec model = model_from_flat(family, coeffs.head(n_ham), false);
    if (dis.model == DissipatorModel::GeneralGamma) {
        Eigen::MatrixXd g(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                g(i, j) = coeffs[n_ham + i * n + j];
        g = 0.5 * (g + g.transpose()).eval();
        model.dephasing = DephasingSpec(g);
    } else if (dis.model == DissipatorModel::RateFamilies) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
        bool any_gamma = false;
        for (std::size_t f = 0; f < dis.families.size(); ++f) {
            double rate = coeffs[n_ham + long(f)];
            const RateFamily& fam = dis.families[f];
            if (fam.label == "local_dephasing") {
                g += rate * Eigen::MatrixXd::Identity(n, n);
                any_gamma = true;
            } else if (fam.label == "collective_dephasing") {
                g += rate * Eigen::MatrixXd::Ones(n, n);
                any_gamma = true;
            } else {
                for (const auto& jump : fam.jumps)
                    model.extra_jumps.emplace_back(jump, rate);
            }
        }
        if (any_gamma) model.dephasing = DephasingSpec(g);
    }
    return model;
}

SweepResult residual_scaling_sweep(const ShadowEstimator& est,
                                   const std::vector<SweepAnsatz>& ansatze,
                                   const std::vector<int>& settings_budgets,
                                   const IntegralBuildOptions& opts) {
    const ShotDataset& ds = est.dataset();
    if (ds.protocol != "integral")
        throw std::invalid_argument("residual sweep needs an integral dataset");

    // Settings grouped by (state, time), kept in acquisition order so
    // budgets select nested prefixes.
    std::map<std::pair<int, long long>, std::vector<int>> groups;
    std::vector<long> setting_shots(ds.n_settings, 0);
    std::vector<char> seen(ds.n_settings, 0);
    for (const auto& rec : ds.records) {
        setting_shots[rec.setting_id] += long(rec.bits.size());
        if (!seen[rec.setting_id]) {
            seen[rec.setting_id] = 1;
            groups[{rec.init_index, llround(rec.time * 1e12)}].push_back(
                rec.setting_id);
        }
    }
    for (auto& [key, ids] : groups) std::sort(ids.begin(), ids.end());

    SweepResult out;
    for (const auto& a : ansatze) out.labels.push_back(a.label);
    for (int budget : settings_budgets) {
        std::vector<int> weights(ds.n_settings, 0);
        double shots = 0.0;
        for (const auto& [key, ids] : groups)
            for (int k = 0; k < budget && k < int(ids.size()); ++k) {
                weights[ids[k]] = 1;
                shots += double(setting_shots[ids[k]]);
            }
        IntegralBuildOptions bopts = opts;
        bopts.weights = &weights;
        for (const auto& a : ansatze) {
            LinearSystem sys =
                build_integral_system(est, a.family, a.dissipator, bopts);
            if (sys.rows() == 0) continue;  // budget too thin to estimate
            LearnResult res = solve_least_squares(sys);
            double rms = res.residual_norm /
                         std::sqrt(double(std::max<long>(sys.rows(), 1)));
            out.entries.push_back({a.label, shots, rms});
        }
    }

    double max_shots = 0.0;
    for (const auto& e : out.entries) max_shots = std::max(max_shots, e.n_shots);
    for (const auto& label : out.labels) {
        std::vector<double> xs, ys, xs_tail, ys_tail;
        for (const auto& e : out.entries) {
            if (e.ansatz_label != label) continue;
            xs.push_back(e.n_shots);
            ys.push_back(e.residual);
            if (e.n_shots >= max_shots / 10.0) {
                xs_tail.push_back(e.n_shots);
                ys_tail.push_back(e.residual);
            }
        }
        if (xs_tail.size() < 2 && xs.size() >= 2) {
            xs_tail.assign(xs.end() - 2, xs.end());
            ys_tail.assign(ys.end() - 2, ys.end());
        }
        out.slopes.push_back(fit_loglog_slope(xs, ys));
        out.plateau_flags.push_back(fit_loglog_slope(xs_tail, ys_tail) > -0.2);
    }
    return out;
}

}  // namespace beqs
