#include "beqs/pauli.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace beqs {

namespace {

constexpr int kMaxSites = 64;
constexpr int kDenseCap = 12;

// i-exponent of sigma_a * sigma_b for 2-bit codes a,b in (x | z<<1) layout.
// Codes: I=0, X=1, Z=2, Y=3.
constexpr int kPhaseTable[4][4] = {
    // b:  I  X  Z  Y
    {0, 0, 0, 0},  // a = I
    {0, 0, 3, 1},  // a = X   (XZ=-iY, XY=iZ)
    {0, 1, 0, 3},  // a = Z   (ZX=iY, ZY=-iX)
    {0, 3, 1, 0},  // a = Y   (YX=-iZ, YZ=iX)
};

int code_at(uint64_t x, uint64_t z, int site) {
    return int((x >> site) & 1u) | (int((z >> site) & 1u) << 1);
}

void check_sites(int n) {
    if (n <= 0 || n > kMaxSites)
        throw DimensionError("n_sites must be in [1, 64]");
}

}  // namespace

PauliString::PauliString(int n_sites, uint64_t x, uint64_t z, double coeff,
                         int phase_pow)
    : n_sites_(n_sites), x_(x), z_(z), coeff_(coeff),
      phase_(((phase_pow % 4) + 4) % 4) {
    check_sites(n_sites);
    if (n_sites < 64) {
        uint64_t mask = (uint64_t(1) << n_sites) - 1;
        if ((x & ~mask) || (z & ~mask))
            throw DimensionError("axis bits outside n_sites");
    }
}

PauliString PauliString::identity(int n_sites, double coeff) {
    return PauliString(n_sites, 0, 0, coeff, 0);
}

PauliString PauliString::single(int n_sites, int site, Axis a, double coeff) {
    check_sites(n_sites);
    if (site < 0 || site >= n_sites)
        throw DimensionError("site index out of range");
    uint64_t x = 0, z = 0;
    if (a == Axis::X || a == Axis::Y) x = uint64_t(1) << site;
    if (a == Axis::Z || a == Axis::Y) z = uint64_t(1) << site;
    return PauliString(n_sites, x, z, coeff, 0);
}

PauliString PauliString::from_axes(const std::vector<Axis>& axes, double coeff,
                                   int phase_pow) {
    int n = int(axes.size());
    check_sites(n);
    uint64_t x = 0, z = 0;
    for (int i = 0; i < n; ++i) {
        if (axes[i] == Axis::X || axes[i] == Axis::Y) x |= uint64_t(1) << i;
        if (axes[i] == Axis::Z || axes[i] == Axis::Y) z |= uint64_t(1) << i;
    }
    return PauliString(n, x, z, coeff, phase_pow);
}

Complex PauliString::weight() const {
    switch (phase_) {
        case 0: return {coeff_, 0.0};
        case 1: return {0.0, coeff_};
        case 2: return {-coeff_, 0.0};
        default: return {0.0, -coeff_};
    }
}

Axis PauliString::axis(int site) const {
    bool xb = (x_ >> site) & 1u;
    bool zb = (z_ >> site) & 1u;
    if (xb && zb) return Axis::Y;
    if (xb) return Axis::X;
    if (zb) return Axis::Z;
    return Axis::I;
}

std::vector<Axis> PauliString::axes() const {
    std::vector<Axis> out(n_sites_);
    for (int i = 0; i < n_sites_; ++i) out[i] = axis(i);
    return out;
}

int PauliString::support_size() const { return std::popcount(x_ | z_); }

PauliString PauliString::with_coeff(double c, int phase_pow) const {
    return PauliString(n_sites_, x_, z_, c, phase_pow);
}

PauliString PauliString::scaled(double s) const {
    return PauliString(n_sites_, x_, z_, coeff_ * s, phase_);
}

PauliString PauliString::phase_shifted(int k) const {
    return PauliString(n_sites_, x_, z_, coeff_, phase_ + k);
}

bool PauliString::commutes_with(const PauliString& other) const {
    // Symplectic form: parity of sites where the strings anticommute.
    int anti = std::popcount(x_ & other.z_) + std::popcount(z_ & other.x_);
    return (anti % 2) == 0;
}

bool PauliString::same_axes(const PauliString& other) const {
    return n_sites_ == other.n_sites_ && x_ == other.x_ && z_ == other.z_;
}

std::string PauliString::to_string() const {
    std::ostringstream os;
    os.precision(17);
    Complex w = weight();
    os << w.real();
    if (w.imag() != 0.0) {
        os << (w.imag() > 0 ? "+" : "-") << std::abs(w.imag()) << "i";
    }
    os << " *";
    if (is_identity_axes()) {
        os << " I";
    } else {
        static const char* names[] = {"I", "X", "Y", "Z"};
        for (int i = 0; i < n_sites_; ++i) {
            Axis a = axis(i);
            if (a != Axis::I) os << " " << names[int(a)] << (i + 1);
        }
    }
    return os.str();
}

PauliString PauliString::parse(const std::string& text, int n_sites) {
    auto star = text.find('*');
    if (star == std::string::npos)
        throw std::invalid_argument("PauliString::parse: missing '*'");
    std::string wtxt = text.substr(0, star);
    // Weight: "a" or "a+bi" / "a-bi".
    double re = 0.0, im = 0.0;
    {
        std::istringstream ws(wtxt);
        ws >> re;
        char sign = 0;
        if (ws >> sign && (sign == '+' || sign == '-')) {
            double mag = 0.0;
            ws >> mag;
            im = (sign == '-') ? -mag : mag;
        }
    }
    std::vector<Axis> axes(n_sites, Axis::I);
    std::istringstream ts(text.substr(star + 1));
    std::string tok;
    while (ts >> tok) {
        if (tok == "I") continue;
        Axis a;
        switch (tok[0]) {
            case 'X': a = Axis::X; break;
            case 'Y': a = Axis::Y; break;
            case 'Z': a = Axis::Z; break;
            default: throw std::invalid_argument("bad axis token: " + tok);
        }
        int site = std::stoi(tok.substr(1));
        if (site < 1 || site > n_sites)
            throw DimensionError("site index out of range in: " + tok);
        axes[site - 1] = a;
    }
    // Split the complex weight back into coeff * i^k exactly when possible.
    if (im == 0.0) return from_axes(axes, re, 0);
    if (re == 0.0) return from_axes(axes, im, 1);
    throw std::invalid_argument("PauliString::parse: general complex weights "
                                "are not representable");
}

MatrixXcd PauliString::dense() const {
    if (n_sites_ > kDenseCap)
        throw CapacityError("dense realization capped at 12 sites");
    static const Complex I_(0, 1);
    auto mat2 = [&](Axis a) {
        MatrixXcd m(2, 2);
        switch (a) {
            case Axis::I: m << 1, 0, 0, 1; break;
            case Axis::X: m << 0, 1, 1, 0; break;
            case Axis::Y: m << 0, -I_, I_, 0; break;
            case Axis::Z: m << 1, 0, 0, -1; break;
        }
        return m;
    };
    MatrixXcd out = MatrixXcd::Identity(1, 1);
    // out = mat(site n-1) kron ... kron mat(site 0), so bit i of a basis
    // index addresses site i.
    for (int i = 0; i < n_sites_; ++i) {
        MatrixXcd next = mat2(axis(i));
        MatrixXcd kron(out.rows() * 2, out.cols() * 2);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                kron.block(r * out.rows(), c * out.cols(), out.rows(),
                           out.cols()) = next(r, c) * out;
        out = std::move(kron);
    }
    return weight() * out;
}

PauliString multiply(const PauliString& p, const PauliString& q) {
    if (p.n_sites() != q.n_sites())
        throw DimensionError("PauliString product: site-count mismatch");
    int phase = p.phase_pow() + q.phase_pow();
    for (uint64_t both = (p.support_mask() & q.support_mask()); both;
         both &= both - 1) {
        int site = std::countr_zero(both);
        phase += kPhaseTable[code_at(p.x_bits(), p.z_bits(), site)]
                            [code_at(q.x_bits(), q.z_bits(), site)];
    }
    return PauliString(p.n_sites(), p.x_bits() ^ q.x_bits(),
                       p.z_bits() ^ q.z_bits(), p.coeff() * q.coeff(), phase);
}

OperatorSum::OperatorSum(int n_sites, std::vector<PauliString> terms)
    : n_sites_(n_sites), terms_(std::move(terms)) {
    for (const auto& t : terms_)
        if (t.n_sites() != n_sites_)
            throw DimensionError("OperatorSum: mixed site counts");
    canonicalize();
}

void OperatorSum::add(const PauliString& p) {
    if (p.n_sites() != n_sites_)
        throw DimensionError("OperatorSum::add: site-count mismatch");
    terms_.push_back(p);
    canonicalize();
}

void OperatorSum::add(const OperatorSum& other) {
    if (other.n_sites() != n_sites_)
        throw DimensionError("OperatorSum::add: site-count mismatch");
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    canonicalize();
}

OperatorSum OperatorSum::scaled(double s) const {
    std::vector<PauliString> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) out.push_back(t.scaled(s));
    return OperatorSum(n_sites_, std::move(out));
}

OperatorSum OperatorSum::phase_shifted(int k) const {
    std::vector<PauliString> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) out.push_back(t.phase_shifted(k));
    return OperatorSum(n_sites_, std::move(out));
}

void OperatorSum::canonicalize() {
    std::sort(terms_.begin(), terms_.end(),
              [](const PauliString& a, const PauliString& b) {
                  if (a.axes_key_z() != b.axes_key_z())
                      return a.axes_key_z() < b.axes_key_z();
                  return a.axes_key_x() < b.axes_key_x();
              });
    std::vector<PauliString> merged;
    merged.reserve(terms_.size());
    std::size_t i = 0;
    while (i < terms_.size()) {
        Complex w = terms_[i].weight();
        std::size_t j = i + 1;
        while (j < terms_.size() && terms_[j].same_axes(terms_[i])) {
            w += terms_[j].weight();
            ++j;
        }
        // A mixed weight is stored as two exact components: the real part
        // (phase 0) followed by the imaginary part (phase 1).
        if (w.real() != 0.0)
            merged.push_back(terms_[i].with_coeff(w.real(), 0));
        if (w.imag() != 0.0)
            merged.push_back(terms_[i].with_coeff(w.imag(), 1));
        i = j;
    }
    terms_ = std::move(merged);
}

MatrixXcd OperatorSum::dense() const {
    if (n_sites_ > kDenseCap)
        throw CapacityError("dense realization capped at 12 sites");
    long dim = 1L << n_sites_;
    MatrixXcd out = MatrixXcd::Zero(dim, dim);
    for (const auto& t : terms_) out += t.dense();
    return out;
}

std::string OperatorSum::to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        if (i) os << " + ";
        os << terms_[i].to_string();
    }
    return os.str();
}

OperatorSum commutator(const PauliString& p, const PauliString& q) {
    if (p.n_sites() != q.n_sites())
        throw DimensionError("commutator: site-count mismatch");
    OperatorSum out(p.n_sites());
    if (p.commutes_with(q)) return out;
    // For anticommuting strings, [p,q] = 2 pq.
    out.add(multiply(p, q).scaled(2.0));
    return out;
}

OperatorSum commutator(const OperatorSum& a, const OperatorSum& b) {
    if (a.n_sites() != b.n_sites())
        throw DimensionError("commutator: site-count mismatch");
    std::vector<PauliString> terms;
    for (const auto& p : a.terms())
        for (const auto& q : b.terms())
            if (!p.commutes_with(q)) terms.push_back(multiply(p, q).scaled(2.0));
    return OperatorSum(a.n_sites(), std::move(terms));
}

OperatorSum anticommutator(const PauliString& p, const PauliString& q) {
    if (p.n_sites() != q.n_sites())
        throw DimensionError("anticommutator: site-count mismatch");
    OperatorSum out(p.n_sites());
    if (!p.commutes_with(q)) return out;
    out.add(multiply(p, q).scaled(2.0));
    return out;
}

OperatorSum multiply(const OperatorSum& a, const OperatorSum& b) {
    if (a.n_sites() != b.n_sites())
        throw DimensionError("product: site-count mismatch");
    std::vector<PauliString> terms;
    terms.reserve(a.size() * b.size());
    for (const auto& p : a.terms())
        for (const auto& q : b.terms()) terms.push_back(multiply(p, q));
    return OperatorSum(a.n_sites(), std::move(terms));
}

OperatorSum add(const OperatorSum& a, const OperatorSum& b) {
    OperatorSum out = a;
    out.add(b);
    return out;
}

}  // namespace beqs
