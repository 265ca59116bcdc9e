#include "beqs/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace beqs {

namespace {

constexpr int kDenseCap = 12;
constexpr int kSuperopCap = 5;

void check_times(const std::vector<double>& times) {
    if (times.empty()) throw std::invalid_argument("empty time grid");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0) throw std::invalid_argument("negative time");
        if (i && times[i] < times[i - 1])
            throw std::invalid_argument("times must be sorted");
    }
}

// Precomputed dense pieces of the generator.
struct LindbladApplier {
    MatrixXcd h;                     // Hamiltonian
    bool has_dephasing = false;
    Eigen::MatrixXd dephasing_w;     // rho -> rho .* W elementwise
    std::vector<std::pair<MatrixXcd, MatrixXcd>> jumps;  // (sqrt(rate)L, L^dag L * rate)

    explicit LindbladApplier(const ModelSpec& model) {
        const int N = model.n_sites();
        if (N > kDenseCap) throw CapacityError("propagation capped at 12 sites");
        const long dim = 1L << N;
        h = model.hamiltonian().dense();
        if (model.dephasing &&
            model.dephasing->gamma.cwiseAbs().maxCoeff() > 0) {
            has_dephasing = true;
            // z_i(a) = +-1 for basis state a; index bit i corresponds to
            // site i (see PauliString::dense).
            Eigen::MatrixXd v(dim, N);
            for (long a = 0; a < dim; ++a)
                for (int i = 0; i < N; ++i)
                    v(a, i) = ((a >> i) & 1) ? -1.0 : 1.0;
            Eigen::MatrixXd q = v * model.dephasing->gamma * v.transpose();
            dephasing_w.resize(dim, dim);
            for (long a = 0; a < dim; ++a)
                for (long b = 0; b < dim; ++b)
                    dephasing_w(a, b) = q(a, b) - 0.5 * (q(a, a) + q(b, b));
        }
        for (const auto& [op, rate] : model.extra_jumps) {
            if (rate == 0.0) continue;
            MatrixXcd l = op.dense();
            jumps.emplace_back(std::sqrt(rate) * l, rate * (l.adjoint() * l));
        }
    }

    MatrixXcd apply(const MatrixXcd& rho) const {
        const Complex I_(0, 1);
        MatrixXcd out = -I_ * (h * rho - rho * h);
        if (has_dephasing)
            out += dephasing_w.cast<Complex>().cwiseProduct(rho);
        for (const auto& [l, ldl] : jumps) {
            out += l * rho * l.adjoint();
            out -= 0.5 * (ldl * rho + rho * ldl);
        }
        return out;
    }
};

// Embedded Dormand-Prince RK45 with PI step-size control on matrices.
class Rk45 {
  public:
    Rk45(const LindbladApplier& gen, const PropagateOptions& opts)
        : gen_(gen), opts_(opts) {}

    // Advance rho in place from t to t_target.
    void advance(MatrixXcd& rho, double& t, double t_target) {
        double dt = std::min(opts_.initial_step, t_target - t);
        if (last_dt_ > 0) dt = std::min(last_dt_, t_target - t);
        long steps = 0;
        while (t < t_target) {
            if (++steps > opts_.max_steps)
                throw std::runtime_error(
                    "propagate: step limit exceeded at t=" + std::to_string(t) +
                    " (dt=" + std::to_string(dt) + ")");
            dt = std::min(dt, t_target - t);
            MatrixXcd rho5, rho4;
            step(rho, dt, rho5, rho4);
            double scale = opts_.abs_tol +
                           opts_.rel_tol * std::max(rho.cwiseAbs().maxCoeff(),
                                                    rho5.cwiseAbs().maxCoeff());
            double err = (rho5 - rho4).cwiseAbs().maxCoeff() / scale;
            if (err <= 1.0) {
                t += dt;
                rho = std::move(rho5);
                last_dt_ = dt;
            }
            double factor = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
            dt *= std::clamp(factor, 0.2, 5.0);
            if (dt <= 0.0 || !std::isfinite(dt))
                throw std::runtime_error("propagate: step size underflow");
        }
    }

  private:
    void step(const MatrixXcd& y, double h, MatrixXcd& y5, MatrixXcd& y4) {
        const MatrixXcd k1 = gen_.apply(y);
        const MatrixXcd k2 = gen_.apply(y + h * (0.2 * k1));
        const MatrixXcd k3 = gen_.apply(y + h * (3.0 / 40 * k1 + 9.0 / 40 * k2));
        const MatrixXcd k4 = gen_.apply(
            y + h * (44.0 / 45 * k1 - 56.0 / 15 * k2 + 32.0 / 9 * k3));
        const MatrixXcd k5 = gen_.apply(
            y + h * (19372.0 / 6561 * k1 - 25360.0 / 2187 * k2 +
                     64448.0 / 6561 * k3 - 212.0 / 729 * k4));
        const MatrixXcd k6 = gen_.apply(
            y + h * (9017.0 / 3168 * k1 - 355.0 / 33 * k2 + 46732.0 / 5247 * k3 +
                     49.0 / 176 * k4 - 5103.0 / 18656 * k5));
        y5 = y + h * (35.0 / 384 * k1 + 500.0 / 1113 * k3 + 125.0 / 192 * k4 -
                      2187.0 / 6784 * k5 + 11.0 / 84 * k6);
        const MatrixXcd k7 = gen_.apply(y5);
        y4 = y + h * (5179.0 / 57600 * k1 + 7571.0 / 16695 * k3 +
                      393.0 / 640 * k4 - 92097.0 / 339200 * k5 +
                      187.0 / 2100 * k6 + 1.0 / 40 * k7);
    }

    const LindbladApplier& gen_;
    const PropagateOptions& opts_;
    double last_dt_ = -1;
};

}  // namespace

DensityState DensityState::from_product(const ProductStateSpec& state) {
    return DensityState{state.n_sites(), state.dense()};
}

DensityState DensityState::from_matrix(int n_sites, MatrixXcd m) {
    if (m.rows() != (1L << n_sites) || m.cols() != (1L << n_sites))
        throw DimensionError("density matrix dimension mismatch");
    return DensityState{n_sites, std::move(m)};
}

double DensityState::trace_error() const {
    return std::abs(matrix.trace() - Complex(1.0, 0.0));
}

double DensityState::hermiticity_error() const {
    return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
}

double DensityState::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(
        MatrixXcd(0.5 * (matrix + matrix.adjoint())));
    return es.eigenvalues().minCoeff();
}

bool DensityState::check_invariants(double trace_tol, double herm_tol,
                                    double eig_tol) const {
    return trace_error() <= trace_tol && hermiticity_error() <= herm_tol &&
           min_eigenvalue() >= -eig_tol;
}

std::vector<DensityState> propagate(const ModelSpec& model,
                                    const DensityState& rho0,
                                    const std::vector<double>& times,
                                    const PropagateOptions& opts) {
    check_times(times);
    if (rho0.n_sites != model.n_sites())
        throw DimensionError("propagate: state/model size mismatch");
    LindbladApplier gen(model);
    Rk45 integrator(gen, opts);
    std::vector<DensityState> out;
    out.reserve(times.size());
    MatrixXcd rho = rho0.matrix;
    double t = 0.0;
    for (double target : times) {
        if (target > t) integrator.advance(rho, t, target);
        out.push_back(DensityState{rho0.n_sites, rho});
    }
    return out;
}

TimeTrace expectation_trace(const ModelSpec& model, const DensityState& rho0,
                            const OperatorSum& observable,
                            const std::vector<double>& times,
                            const PropagateOptions& opts) {
    auto traces = expectation_traces(model, rho0, {observable}, times, opts);
    return traces.front();
}

std::vector<TimeTrace> expectation_traces(
    const ModelSpec& model, const DensityState& rho0,
    const std::vector<OperatorSum>& observables, const std::vector<double>& times,
    const PropagateOptions& opts) {
    check_times(times);
    LindbladApplier gen(model);
    Rk45 integrator(gen, opts);
    std::vector<MatrixXcd> obs_dense;
    obs_dense.reserve(observables.size());
    for (const auto& o : observables) obs_dense.push_back(o.dense());
    std::vector<TimeTrace> out;
    out.reserve(observables.size());
    for (const auto& o : observables) {
        TimeTrace tr(o);
        tr.times = times;
        out.push_back(std::move(tr));
    }
    MatrixXcd rho = rho0.matrix;
    double t = 0.0;
    for (double target : times) {
        if (target > t) integrator.advance(rho, t, target);
        for (std::size_t k = 0; k < observables.size(); ++k)
            out[k].values.push_back((obs_dense[k] * rho).trace().real());
    }
    return out;
}

MatrixXcd dense_superoperator(const ModelSpec& model) {
    const int N = model.n_sites();
    if (N > kSuperopCap)
        throw CapacityError("dense superoperator capped at 5 sites");
    const long dim = 1L << N;
    const long sdim = dim * dim;
    const Complex I_(0, 1);
    auto kron = [&](const MatrixXcd& a, const MatrixXcd& b) {
        MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
        for (long r = 0; r < a.rows(); ++r)
            for (long c = 0; c < a.cols(); ++c)
                out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) =
                    a(r, c) * b;
        return out;
    };
    MatrixXcd id = MatrixXcd::Identity(dim, dim);
    MatrixXcd h = model.hamiltonian().dense();
    // vec(A rho B) = (B^T kron A) vec(rho), column-major.
    MatrixXcd sup = -I_ * (kron(id, h) - kron(h.transpose(), id));
    if (model.dephasing) {
        const auto& g = model.dephasing->gamma;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                if (g(i, j) == 0.0) continue;
                MatrixXcd zi = PauliString::single(N, i, Axis::Z).dense();
                MatrixXcd zj = PauliString::single(N, j, Axis::Z).dense();
                MatrixXcd zz = zj * zi;
                sup += g(i, j) * (kron(zj.transpose(), zi) -
                                  0.5 * kron(id, zz) - 0.5 * kron(zz.transpose(), id));
            }
    }
    for (const auto& [op, rate] : model.extra_jumps) {
        if (rate == 0.0) continue;
        MatrixXcd l = op.dense();
        MatrixXcd ldl = l.adjoint() * l;
        sup += rate * (kron(l.conjugate(), l) - 0.5 * kron(id, ldl) -
                       0.5 * kron(ldl.transpose(), id));
    }
    (void)sdim;
    return sup;
}

std::vector<DensityState> propagate_expm(const ModelSpec& model,
                                         const DensityState& rho0,
                                         const std::vector<double>& times) {
    check_times(times);
    const int N = model.n_sites();
    const long dim = 1L << N;
    MatrixXcd sup = dense_superoperator(model);
    Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(rho0.matrix.data(),
                                                            dim * dim);
    std::vector<DensityState> out;
    out.reserve(times.size());
    for (double t : times) {
        MatrixXcd prop = (sup * t).exp();
        Eigen::VectorXcd vt = prop * v;
        MatrixXcd rho = Eigen::Map<MatrixXcd>(vt.data(), dim, dim);
        out.push_back(DensityState{N, rho});
    }
    return out;
}

std::vector<double> hamiltonian_expectations(const MatrixXcd& hamiltonian,
                                             const MatrixXcd& rho0,
                                             const MatrixXcd& observable,
                                             const std::vector<double>& times) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(hamiltonian);
    const MatrixXcd& u = es.eigenvectors();
    Eigen::VectorXd e = es.eigenvalues();
    MatrixXcd rho_e = u.adjoint() * rho0 * u;
    MatrixXcd obs_e = u.adjoint() * observable * u;
    const long dim = hamiltonian.rows();
    std::vector<double> out;
    out.reserve(times.size());
    const Complex I_(0, 1);
    for (double t : times) {
        Eigen::VectorXcd phase(dim);
        for (long a = 0; a < dim; ++a) phase[a] = std::exp(-I_ * e[a] * t);
        // rho_t = U D rho_e D^dag U^dag; Tr(O rho_t) in the eigenbasis.
        Complex val = 0;
        for (long a = 0; a < dim; ++a)
            for (long b = 0; b < dim; ++b)
                val += obs_e(b, a) * phase[a] * rho_e(a, b) * std::conj(phase[b]);
        out.push_back(val.real());
    }
    return out;
}

}  // namespace beqs
