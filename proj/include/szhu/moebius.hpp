#ifndef SZHU_MOEBIUS_HPP
#define SZHU_MOEBIUS_HPP

#include <cmath>
#include <complex>

#include "szhu/errors.hpp"

namespace szhu {

using cplx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
inline const cplx kI{0.0, 1.0};
inline const cplx kTwoPiI{0.0, 2.0 * kPi};

// A point on the Riemann sphere: either a finite complex number or the
// explicit point at infinity.  Infinity is a tagged value, never an
// encoded float.
struct ExtComplex {
  cplx z{};
  bool infinite = false;

  ExtComplex() = default;
  ExtComplex(cplx value) : z(value) {}  // NOLINT: implicit by design
  static ExtComplex infinity() { return ExtComplex{cplx{}, true}; }

 private:
  ExtComplex(cplx value, bool inf) : z(value), infinite(inf) {}
};

// Element of SL(2,C) acting on the Riemann sphere, normalised so that
// ad - bc = 1 on construction.
class MoebiusMap {
 public:
  MoebiusMap() : a_(1), b_(0), c_(0), d_(1) {}

  MoebiusMap(cplx a, cplx b, cplx c, cplx d) : a_(a), b_(b), c_(c), d_(d) {
    const cplx det = a_ * d_ - b_ * c_;
    if (std::abs(det) < 1e-300) throw Error("MoebiusMap: singular matrix");
    const cplx s = std::sqrt(det);
    a_ /= s; b_ /= s; c_ /= s; d_ /= s;
  }

  static MoebiusMap identity() { return MoebiusMap(); }

  cplx a() const { return a_; }
  cplx b() const { return b_; }
  cplx c() const { return c_; }
  cplx d() const { return d_; }

  // Composition: (m1 * m2)(z) = m1(m2(z)).  The product of two det-1
  // matrices has det 1 exactly, so no renormalisation is applied; for long
  // words the entries grow and recomputing ad - bc would cancel
  // catastrophically, while the action itself stays well conditioned.
  friend MoebiusMap operator*(const MoebiusMap& m1, const MoebiusMap& m2) {
    MoebiusMap r;
    r.a_ = m1.a_ * m2.a_ + m1.b_ * m2.c_;
    r.b_ = m1.a_ * m2.b_ + m1.b_ * m2.d_;
    r.c_ = m1.c_ * m2.a_ + m1.d_ * m2.c_;
    r.d_ = m1.c_ * m2.b_ + m1.d_ * m2.d_;
    return r;
  }

  MoebiusMap inverse() const { return MoebiusMap(d_, -b_, -c_, a_); }

  // Total on the extended plane: infinity maps to a/c, the pole -d/c to
  // infinity.
  ExtComplex apply(ExtComplex p) const {
    if (p.infinite) {
      if (std::abs(c_) == 0.0) return ExtComplex::infinity();
      return ExtComplex(a_ / c_);
    }
    const cplx den = c_ * p.z + d_;
    if (den == cplx(0.0)) return ExtComplex::infinity();
    return ExtComplex((a_ * p.z + b_) / den);
  }

  // Convenience overload for callers that know the image is finite.
  cplx operator()(cplx z) const {
    const ExtComplex w = apply(ExtComplex(z));
    if (w.infinite) throw Error("MoebiusMap: image at infinity");
    return w.z;
  }

  // d(gamma z)/dz = 1/(cz+d)^2 for the det-1 normalisation.
  cplx derivative(cplx z) const {
    const cplx den = c_ * z + d_;
    return 1.0 / (den * den);
  }

  double distance(const MoebiusMap& other) const {
    // Maps are projective: compare up to the residual +-1 ambiguity.
    auto diff = [&](double sign) {
      return std::abs(a_ - sign * other.a_) + std::abs(b_ - sign * other.b_) +
             std::abs(c_ - sign * other.c_) + std::abs(d_ - sign * other.d_);
    };
    return std::min(diff(1.0), diff(-1.0));
  }

 private:
  cplx a_, b_, c_, d_;
};

}  // namespace szhu

#endif
