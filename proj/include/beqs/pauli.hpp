#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace beqs {

using Complex = std::complex<double>;
using MatrixXcd = Eigen::MatrixXcd;

/// Thrown when two operators live on different numbers of sites.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a dense realization would exceed the supported size.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Axis : uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

/// A weighted tensor product of single-site Pauli operators.
///
/// Axes are stored in symplectic form: bit i of `x` / `z` encodes site i
/// (I=00, X=10, Y=11, Z=01 as (x,z) pairs), so products and commutation
/// checks are bitwise operations. The weight is kept as an exact quarter
/// phase i^k times a real coefficient, which keeps long commutator chains
/// free of floating-point phase drift.
class PauliString {
  public:
    PauliString(int n_sites, uint64_t x, uint64_t z, double coeff = 1.0,
                int phase_pow = 0);

    /// Identity string with the given weight.
    static PauliString identity(int n_sites, double coeff = 1.0);

    /// Single nontrivial axis at `site` (0-based).
    static PauliString single(int n_sites, int site, Axis a, double coeff = 1.0);

    /// Build from an explicit per-site axis list.
    static PauliString from_axes(const std::vector<Axis>& axes, double coeff = 1.0,
                                 int phase_pow = 0);

    int n_sites() const { return n_sites_; }
    uint64_t x_bits() const { return x_; }
    uint64_t z_bits() const { return z_; }
    double coeff() const { return coeff_; }
    int phase_pow() const { return phase_; }
    Complex weight() const;

    Axis axis(int site) const;
    std::vector<Axis> axes() const;

    /// Sites with a non-identity axis.
    uint64_t support_mask() const { return x_ | z_; }
    int support_size() const;
    bool is_identity_axes() const { return (x_ | z_) == 0; }

    /// Key identifying the axes pattern, ignoring the weight.
    uint64_t axes_key_x() const { return x_; }
    uint64_t axes_key_z() const { return z_; }

    PauliString with_coeff(double c, int phase_pow) const;
    PauliString scaled(double s) const;
    /// Multiply the weight by i^k.
    PauliString phase_shifted(int k) const;

    bool commutes_with(const PauliString& other) const;
    bool same_axes(const PauliString& other) const;

    /// Compact text form, e.g. "(1+0i) * X1 Z3" with 1-based sites.
    std::string to_string() const;
    /// Parse the format produced by to_string (weight may be "a" or "a+bi").
    static PauliString parse(const std::string& text, int n_sites);

    /// Dense 2^n x 2^n realization (n_sites <= 12).
    MatrixXcd dense() const;

  private:
    int n_sites_;
    uint64_t x_;
    uint64_t z_;
    double coeff_;
    int phase_;  // weight = coeff * i^phase, phase in {0,1,2,3}
};

/// Product with exact phase bookkeeping.
PauliString multiply(const PauliString& p, const PauliString& q);

/// A canonicalized sum of Pauli strings on a common number of sites.
///
/// Canonical form: terms sorted lexicographically by axes, no zero-weight
/// terms, and per axes pattern at most one real-weighted term (phase 0)
/// followed by at most one imaginary-weighted term (phase 1).
class OperatorSum {
  public:
    explicit OperatorSum(int n_sites) : n_sites_(n_sites) {}
    OperatorSum(int n_sites, std::vector<PauliString> terms);

    int n_sites() const { return n_sites_; }
    const std::vector<PauliString>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    void add(const PauliString& p);
    void add(const OperatorSum& other);
    OperatorSum scaled(double s) const;
    OperatorSum phase_shifted(int k) const;

    MatrixXcd dense() const;
    std::string to_string() const;

  private:
    void canonicalize();

    int n_sites_;
    std::vector<PauliString> terms_;
};

/// [p, q] = pq - qp as a canonical sum; empty iff the strings commute.
OperatorSum commutator(const PauliString& p, const PauliString& q);
OperatorSum commutator(const OperatorSum& a, const OperatorSum& b);
OperatorSum anticommutator(const PauliString& p, const PauliString& q);

OperatorSum multiply(const OperatorSum& a, const OperatorSum& b);
OperatorSum add(const OperatorSum& a, const OperatorSum& b);

}  // namespace beqs
