#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "beqs/pauli.hpp"

namespace beqs {

/// Pauli eigenstate labels for product-state preparation.
enum class PauliEig : uint8_t { Xp, Xm, Yp, Ym, Zp, Zm };

PauliEig pauli_eig_from_string(const std::string& s);  // "+X", "-Z", ...
std::string to_string(PauliEig e);

/// One site of a product state: either a pure state given by its Bloch
/// vector, or the maximally mixed marker used by the matched estimator.
struct SiteState {
    bool mixed = false;
    std::array<double, 3> bloch{0.0, 0.0, 0.0};
    std::optional<PauliEig> label;  // set when prepared from a Pauli eigenstate

    static SiteState from_eig(PauliEig e);
    static SiteState maximally_mixed() { return SiteState{true, {0, 0, 0}, {}}; }

    /// 2x2 density matrix (I + r.sigma)/2.
    MatrixXcd dense() const;
};

/// A product state over N sites, possibly with mixed-site markers.
class ProductStateSpec {
  public:
    explicit ProductStateSpec(std::vector<SiteState> sites)
        : sites_(std::move(sites)) {}

    static ProductStateSpec from_eigs(const std::vector<PauliEig>& labels);
    /// e^{-i theta/2 (n.sigma)} applied to |1> at every site; `angle_scale`
    /// optionally rescales theta per site (readout-beam miscalibration).
    static ProductStateSpec global_rotation(int n_sites, double theta,
                                            const std::array<double, 3>& axis,
                                            const std::vector<double>& angle_scale = {});
    /// All sites maximally mixed except the listed (site, eigenstate) pairs.
    static ProductStateSpec mixed_except(
        int n_sites, const std::vector<std::pair<int, PauliEig>>& pure_sites);

    int n_sites() const { return int(sites_.size()); }
    const SiteState& site(int i) const { return sites_[i]; }
    bool has_mixed_site() const;

    /// Dense density matrix, basis index bit i addressing site i (<= 12 sites).
    MatrixXcd dense() const;

  private:
    std::vector<SiteState> sites_;
};

/// Tr(rho0 * op) evaluated factor-wise, no dense realization.
double expectation_product_state(const OperatorSum& op,
                                 const ProductStateSpec& state);
double expectation_product_state(const PauliString& p,
                                 const ProductStateSpec& state);

}  // namespace beqs
