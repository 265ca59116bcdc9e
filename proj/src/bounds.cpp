#include "beqs/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace beqs {

Confidence Confidence::from_z(double z) {
    double p = 1.0 - 2.0 * std::exp(-0.5 * z * z);
    if (p <= 0.0)
        throw std::invalid_argument(
            "confidence: z = " + std::to_string(z) +
            " gives p <= 0; need z > sqrt(2 ln 2) ~ 1.177");
    return {z, p};
}

Confidence Confidence::from_p(double p) {
    if (p <= 0.0 || p >= 1.0)
        throw std::invalid_argument("confidence: p must lie in (0, 1)");
    return {std::sqrt(2.0 * std::log(2.0 / (1.0 - p))), p};
}

Confidence Confidence::from_eta(double eta) {
    if (eta <= 0.0 || eta >= 1.0)
        throw std::invalid_argument("confidence: eta must lie in (0, 1)");
    return from_p(1.0 - eta);
}

void BoundInputs::validate() const {
    if (t < 0.0) throw std::invalid_argument("bound inputs: t < 0");
    if (delta < 0.0) throw std::invalid_argument("bound inputs: delta < 0");
    if (op_norm <= 0.0) throw std::invalid_argument("bound inputs: op_norm <= 0");
    if (m_eff < 0) throw std::invalid_argument("bound inputs: m_eff < 0");
    if (per_parameter_delta && per_parameter_delta->size() != m_eff)
        throw std::invalid_argument("bound inputs: delta vector size != m_eff");
    if (sigma && (sigma->rows() != m_eff || sigma->cols() != m_eff))
        throw std::invalid_argument("bound inputs: sigma shape != m_eff");
}

double BoundInputs::effective_spread() const {
    if (sigma) {
        // ||Sigma^{1/2}||_F = sqrt(tr Sigma); equals delta sqrt(M) for
        // Sigma = delta^2 I.
        return std::sqrt(std::max(sigma->trace(), 0.0));
    }
    if (per_parameter_delta) return per_parameter_delta->norm();
    return delta * std::sqrt(double(m_eff));
}

double long_time_bias_bound(const BoundInputs& in) {
    in.validate();
    double s = in.effective_spread();
    return std::expm1(2.0 * in.t * in.t * s * s) * in.op_norm;
}

ConcentrationBound long_time_concentration_bound(const BoundInputs& in) {
    in.validate();
    double s = in.effective_spread();
    return {2.0 * in.t * s * in.confidence.z * in.op_norm, in.confidence.p};
}

TruncatedBound truncated_bounds(const BoundInputs& in,
                                const TruncationSpec& trunc,
                                const Eigen::VectorXd& tail_delta,
                                const Eigen::VectorXd& tail_coeffs) {
    in.validate();
    if (tail_delta.size() != long(trunc.dropped_indices.size()) ||
        tail_coeffs.size() != long(trunc.dropped_indices.size()))
        throw std::invalid_argument("truncated bound: tail size mismatch");
    BoundInputs cone = in;
    cone.m_eff = in.m_eff - int(trunc.dropped_indices.size());
    if (cone.m_eff < 0)
        throw std::invalid_argument("truncated bound: dropping more than m_eff");
    cone.per_parameter_delta.reset();
    cone.sigma.reset();
    if (in.per_parameter_delta) {
        Eigen::VectorXd kept(cone.m_eff);
        std::vector<bool> dropped(in.m_eff, false);
        for (int i : trunc.dropped_indices) dropped[i] = true;
        long k = 0;
        for (long i = 0; i < in.m_eff; ++i)
            if (!dropped[i]) kept[k++] = (*in.per_parameter_delta)[i];
        cone.per_parameter_delta = kept;
    }
    TruncatedBound out;
    out.in_cone = long_time_concentration_bound(cone).bound;
    double dropped_norm =
        tail_coeffs.cwiseAbs().sum() + tail_delta.cwiseAbs().sum();
    out.truncation_contribution = 2.0 * in.t * in.op_norm * dropped_norm;
    out.total = out.in_cone + out.truncation_contribution;
    return out;
}

double hanson_wright_mu(const Eigen::MatrixXd& a, double eta, double kappa) {
    if (eta <= 0.0 || eta >= 1.0)
        throw std::invalid_argument("hanson-wright: eta must lie in (0, 1)");
    double log_term = std::log(4.0 / eta) / kappa;
    double hs = a.norm();  // Frobenius
    double op = a.rows() > 0
                    ? Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                          0.5 * (a + a.transpose()))
                          .eigenvalues()
                          .cwiseAbs()
                          .maxCoeff()
                    : 0.0;
    return std::max(hs * std::sqrt(log_term), op * log_term);
}

double hanson_wright_envelope(const ShortTimeData& data, double t, double delta,
                              double eta, const BoundConstants& cst) {
    if (eta <= 0.0 || eta >= 1.0)
        throw std::invalid_argument("hanson-wright: eta must lie in (0, 1)");
    double l = std::log(4.0 / eta) / cst.c_subg;
    double linear = t * delta * data.b_t(t).norm() * std::sqrt(l);
    double quad = 0.5 * t * t * delta * delta *
                  hanson_wright_mu(data.d_mat, eta, cst.kappa);
    return linear + quad;
}

void FidelityData::validate() const {
    if ((c_mat - c_mat.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("fidelity data: C not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c_mat);
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, c_mat.norm()))
        throw std::invalid_argument("fidelity data: C not PSD");
}

FidelityBounds fidelity_bounds(const FidelityData& fd, double t, double delta,
                               double eta, double kappa) {
    double mu = hanson_wright_mu(fd.c_mat, eta, kappa);
    double trc = fd.c_mat.trace();
    FidelityBounds out;
    out.lower = 1.0 - t * t * delta * delta * (trc + mu);
    out.upper = std::min(1.0, 1.0 - t * t * delta * delta * (trc - mu));
    return out;
}

ShortTimeData shorttime_data_from_state(const std::vector<PauliString>& basis,
                                        const OperatorSum& hamiltonian,
                                        const ProductStateSpec& rho0,
                                        const OperatorSum& observable) {
    const long m = long(basis.size());
    ShortTimeData data;
    data.b_vec.resize(m);
    data.s_vec.resize(m);
    data.d_mat.resize(m, m);
    std::vector<OperatorSum> inner;
    inner.reserve(m);
    for (long j = 0; j < m; ++j) {
        OperatorSum vj(basis[j].n_sites(), {basis[j]});
        OperatorSum com_vj_o = commutator(vj, observable);
        data.b_vec[j] =
            expectation_product_state(com_vj_o.phase_shifted(1), rho0);
        data.s_vec[j] = expectation_product_state(
            commutator(commutator(hamiltonian, vj), observable), rho0);
        inner.push_back(std::move(com_vj_o));
    }
    for (long i = 0; i < m; ++i) {
        OperatorSum vi(basis[i].n_sites(), {basis[i]});
        for (long j = 0; j < m; ++j)
            data.d_mat(i, j) =
                expectation_product_state(commutator(vi, inner[j]), rho0);
    }
    data.d_mat = 0.5 * (data.d_mat + data.d_mat.transpose()).eval();
    return data;
}

FidelityData fidelity_data_from_state(const std::vector<PauliString>& basis,
                                      const ProductStateSpec& psi0) {
    const long m = long(basis.size());
    FidelityData fd;
    fd.c_mat.resize(m, m);
    for (long i = 0; i < m; ++i)
        for (long j = i; j < m; ++j) {
            double v = expectation_product_state(multiply(basis[i], basis[j]),
                                                 psi0);
            fd.c_mat(i, j) = v;
            fd.c_mat(j, i) = v;
        }
    return fd;
}

}  // namespace beqs
