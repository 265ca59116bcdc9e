#include "beqs/states.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace beqs {

PauliEig pauli_eig_from_string(const std::string& s) {
    if (s == "+X") return PauliEig::Xp;
    if (s == "-X") return PauliEig::Xm;
    if (s == "+Y") return PauliEig::Yp;
    if (s == "-Y") return PauliEig::Ym;
    if (s == "+Z") return PauliEig::Zp;
    if (s == "-Z") return PauliEig::Zm;
    throw std::invalid_argument("bad Pauli eigenstate label: " + s);
}

std::string to_string(PauliEig e) {
    switch (e) {
        case PauliEig::Xp: return "+X";
        case PauliEig::Xm: return "-X";
        case PauliEig::Yp: return "+Y";
        case PauliEig::Ym: return "-Y";
        case PauliEig::Zp: return "+Z";
        default: return "-Z";
    }
}

SiteState SiteState::from_eig(PauliEig e) {
    SiteState s;
    s.label = e;
    switch (e) {
        case PauliEig::Xp: s.bloch = {1, 0, 0}; break;
        case PauliEig::Xm: s.bloch = {-1, 0, 0}; break;
        case PauliEig::Yp: s.bloch = {0, 1, 0}; break;
        case PauliEig::Ym: s.bloch = {0, -1, 0}; break;
        case PauliEig::Zp: s.bloch = {0, 0, 1}; break;
        case PauliEig::Zm: s.bloch = {0, 0, -1}; break;
    }
    return s;
}

MatrixXcd SiteState::dense() const {
    MatrixXcd m(2, 2);
    const Complex I_(0, 1);
    double rx = bloch[0], ry = bloch[1], rz = bloch[2];
    m << 0.5 * (1 + rz), 0.5 * (rx - I_ * ry),
         0.5 * (rx + I_ * ry), 0.5 * (1 - rz);
    return m;
}

ProductStateSpec ProductStateSpec::from_eigs(const std::vector<PauliEig>& labels) {
    std::vector<SiteState> sites;
    sites.reserve(labels.size());
    for (auto e : labels) sites.push_back(SiteState::from_eig(e));
    return ProductStateSpec(std::move(sites));
}

ProductStateSpec ProductStateSpec::global_rotation(
    int n_sites, double theta, const std::array<double, 3>& axis,
    const std::vector<double>& angle_scale) {
    double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] +
                            axis[2] * axis[2]);
    if (norm == 0.0) throw std::invalid_argument("zero rotation axis");
    std::array<double, 3> n{axis[0] / norm, axis[1] / norm, axis[2] / norm};
    std::vector<SiteState> sites;
    sites.reserve(n_sites);
    for (int i = 0; i < n_sites; ++i) {
        double th = theta;
        if (!angle_scale.empty()) th *= angle_scale.at(i);
        // Rodrigues rotation of the |1> Bloch vector r0 = (0,0,-1) by th
        // about n (the unitary e^{-i th/2 n.sigma} rotates Bloch vectors
        // by th around n).
        std::array<double, 3> r0{0, 0, -1};
        double c = std::cos(th), s = std::sin(th);
        double ndotr = n[0] * r0[0] + n[1] * r0[1] + n[2] * r0[2];
        std::array<double, 3> cross{n[1] * r0[2] - n[2] * r0[1],
                                    n[2] * r0[0] - n[0] * r0[2],
                                    n[0] * r0[1] - n[1] * r0[0]};
        SiteState st;
        for (int a = 0; a < 3; ++a)
            st.bloch[a] = r0[a] * c + cross[a] * s + n[a] * ndotr * (1 - c);
        sites.push_back(st);
    }
    return ProductStateSpec(std::move(sites));
}

ProductStateSpec ProductStateSpec::mixed_except(
    int n_sites, const std::vector<std::pair<int, PauliEig>>& pure_sites) {
    std::vector<SiteState> sites(n_sites, SiteState::maximally_mixed());
    for (const auto& [site, eig] : pure_sites) {
        if (site < 0 || site >= n_sites)
            throw DimensionError("mixed_except: site out of range");
        sites[site] = SiteState::from_eig(eig);
    }
    return ProductStateSpec(std::move(sites));
}

bool ProductStateSpec::has_mixed_site() const {
    for (const auto& s : sites_)
        if (s.mixed) return true;
    return false;
}

MatrixXcd ProductStateSpec::dense() const {
    if (n_sites() > 12) throw CapacityError("dense state capped at 12 sites");
    MatrixXcd out = MatrixXcd::Identity(1, 1);
    for (const auto& s : sites_) {
        MatrixXcd factor = s.mixed ? MatrixXcd(0.5 * MatrixXcd::Identity(2, 2))
                                   : s.dense();
        MatrixXcd kron(out.rows() * 2, out.cols() * 2);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                kron.block(r * out.rows(), c * out.cols(), out.rows(),
                           out.cols()) = factor(r, c) * out;
        out = std::move(kron);
    }
    return out;
}

double expectation_product_state(const PauliString& p,
                                 const ProductStateSpec& state) {
    if (p.n_sites() != state.n_sites())
        throw DimensionError("expectation: site-count mismatch");
    double prod = 1.0;
    for (uint64_t m = p.support_mask(); m; m &= m - 1) {
        int site = std::countr_zero(m);
        const SiteState& s = state.site(site);
        if (s.mixed) return 0.0;
        prod *= s.bloch[int(p.axis(site)) - 1];  // Axis::X..Z -> 0..2
        if (prod == 0.0) return 0.0;
    }
    Complex w = p.weight();
    // Hermitian inputs give real expectations; the imaginary part of the
    // weight contributes nothing to Tr(rho O) for O = sum of such terms.
    return w.real() * prod;
}

double expectation_product_state(const OperatorSum& op,
                                 const ProductStateSpec& state) {
    double sum = 0.0;
    for (const auto& t : op.terms()) sum += expectation_product_state(t, state);
    return sum;
}

}  // namespace beqs
