#pragma once

#include <vector>

#include <Eigen/Dense>

#include "beqs/model.hpp"
#include "beqs/pauli.hpp"
#include "beqs/states.hpp"

namespace beqs {

/// Dense N-qubit density matrix (N <= 12); basis index bit i addresses site i.
struct DensityState {
    int n_sites = 0;
    MatrixXcd matrix;

    static DensityState from_product(const ProductStateSpec& state);
    static DensityState from_matrix(int n_sites, MatrixXcd m);

    double trace_error() const;
    double hermiticity_error() const;
    double min_eigenvalue() const;
    /// Hermitian within 1e-10, unit trace within 1e-10, eigenvalues >= -1e-8.
    bool check_invariants(double trace_tol = 1e-10, double herm_tol = 1e-10,
                          double eig_tol = 1e-8) const;
};

/// A time series of expectation values of one observable.
struct TimeTrace {
    OperatorSum observable;
    std::vector<double> times;   // seconds, increasing
    std::vector<double> values;
    std::vector<double> std_errors;  // empty when exact

    TimeTrace() : observable(1) {}
    explicit TimeTrace(OperatorSum obs) : observable(std::move(obs)) {}
};

/// Integrator controls for the adaptive RK45 propagation.
struct PropagateOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    double initial_step = 1e-6;  // seconds
    long max_steps = 50'000'000;
};

/// e^{Lt} rho0 at each requested time (sorted, nonnegative, N <= 12).
std::vector<DensityState> propagate(const ModelSpec& model,
                                    const DensityState& rho0,
                                    const std::vector<double>& times,
                                    const PropagateOptions& opts = {});

TimeTrace expectation_trace(const ModelSpec& model, const DensityState& rho0,
                            const OperatorSum& observable,
                            const std::vector<double>& times,
                            const PropagateOptions& opts = {});

/// Several observables sharing one propagation sweep.
std::vector<TimeTrace> expectation_traces(const ModelSpec& model,
                                          const DensityState& rho0,
                                          const std::vector<OperatorSum>& observables,
                                          const std::vector<double>& times,
                                          const PropagateOptions& opts = {});

/// Dense 4^N x 4^N generator acting on column-major vec(rho); N <= 5 oracle.
MatrixXcd dense_superoperator(const ModelSpec& model);

/// Matrix-exponential propagation through the dense superoperator (oracle).
std::vector<DensityState> propagate_expm(const ModelSpec& model,
                                         const DensityState& rho0,
                                         const std::vector<double>& times);

/// Unitary-only fast path: Tr(O e^{-iHt} rho e^{iHt}) via eigendecomposition
/// of H, reused across all times. Requires a dissipation-free model.
std::vector<double> hamiltonian_expectations(const MatrixXcd& hamiltonian,
                                             const MatrixXcd& rho0,
                                             const MatrixXcd& observable,
                                             const std::vector<double>& times);

}  // namespace beqs
