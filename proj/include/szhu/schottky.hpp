#ifndef SZHU_SCHOTTKY_HPP
#define SZHU_SCHOTTKY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <tuple>
#include <vector>

#include "szhu/moebius.hpp"

namespace szhu {

// One handle of the Schottky group in both coordinate systems:
// fixed points / multiplier (W_{-a}, W_{+a}, q_a) and canonical centres /
// sewing parameter (w_{-a}, w_{+a}, rho_a).  The identification map is
//   (z' - w_{-a})(z - w_{+a}) = rho_a,   gamma_a z = w_{-a} + rho_a/(z - w_{+a}).
struct SchottkyGenerator {
  cplx W_minus{};   // attracting fixed point
  cplx W_plus{};    // repelling fixed point
  cplx q{};         // multiplier, 0 < |q| < 1
  cplx w_minus{};   // centre of disc Delta_{-a}
  cplx w_plus{};    // centre of disc Delta_{+a}
  cplx rho{};       // sewing parameter
  cplx sqrt_rho{};  // fixed square root of rho, shared by all half-powers

  double radius() const { return std::sqrt(std::abs(rho)); }

  MoebiusMap map() const {
    // gamma_a = sigma^{-1} diag(q^{1/2}, q^{-1/2}) sigma with
    // sigma = (W_{-a}-W_{+a})^{-1/2} [[1, -W_{-a}], [1, -W_{+a}]].
    const MoebiusMap sigma(1.0, -W_minus, 1.0, -W_plus);
    const cplx sq = std::sqrt(q);
    const MoebiusMap dil(sq, 0.0, 0.0, 1.0 / sq);
    return sigma.inverse() * dil * sigma;
  }
};

inline SchottkyGenerator make_generator(cplx W_minus, cplx W_plus, cplx q) {
  if (W_minus == W_plus)
    throw DegenerateFixedPoints("fixed points coincide");
  const double aq = std::abs(q);
  if (!(aq > 0.0) || !(aq < 1.0))
    throw MultiplierOutOfRange("|q| must lie in (0,1), got " + std::to_string(aq));
  SchottkyGenerator g;
  g.W_minus = W_minus;
  g.W_plus = W_plus;
  g.q = q;
  g.w_plus = (W_plus - q * W_minus) / (1.0 - q);
  g.w_minus = (W_minus - q * W_plus) / (1.0 - q);
  const cplx W = W_minus - W_plus;
  g.sqrt_rho = std::sqrt(-q * W * W / ((1.0 - q) * (1.0 - q)));
  g.rho = g.sqrt_rho * g.sqrt_rho;  // exact square of the stored root
  return g;
}

// Inverse coordinate change (w_{-a}, w_{+a}, rho_a) -> (W_{-a}, W_{+a}, q_a).
// The quadratic -q (w_- - w_+)^2 = rho (1+q)^2 has roots q and 1/q; the root
// with |q| < 1 is selected.
inline std::tuple<cplx, cplx, cplx> canonical_to_multiplier(cplx w_minus, cplx w_plus,
                                                            cplx rho) {
  if (w_minus == w_plus)
    throw DegenerateFixedPoints("canonical centres coincide");
  const cplx s = (w_minus - w_plus) * (w_minus - w_plus);
  // rho q^2 + (2 rho + s) q + rho = 0, with root product exactly 1: compute
  // the large root without cancellation and take its reciprocal.
  if (rho == cplx(0.0)) return {w_minus, w_plus, cplx(0.0)};
  const cplx b = 2.0 * rho + s;
  const cplx disc = std::sqrt(b * b - 4.0 * rho * rho);
  const cplx n1 = -b + disc, n2 = -b - disc;
  const cplx q_big = (std::abs(n1) > std::abs(n2) ? n1 : n2) / (2.0 * rho);
  const cplx q = 1.0 / q_big;
  if (!(std::abs(q) < 1.0))
    throw NoAdmissibleRoot("both roots have |q| >= 1");
  const cplx W_plus = (w_plus + q * w_minus) / (1.0 + q);
  const cplx W_minus = (w_minus + q * w_plus) / (1.0 + q);
  return {W_minus, W_plus, q};
}

inline SchottkyGenerator make_generator_canonical(cplx w_minus, cplx w_plus, cplx rho) {
  auto [Wm, Wp, q] = canonical_to_multiplier(w_minus, w_plus, rho);
  if (q == cplx(0.0)) {
    SchottkyGenerator g;
    g.W_minus = Wm;
    g.W_plus = Wp;
    g.q = 0.0;
    g.w_minus = w_minus;
    g.w_plus = w_plus;
    g.rho = 0.0;
    g.sqrt_rho = 0.0;
    return g;
  }
  SchottkyGenerator g = make_generator(Wm, Wp, q);
  // keep the caller's exact canonical data
  g.w_minus = w_minus;
  g.w_plus = w_plus;
  g.sqrt_rho = std::sqrt(rho);
  g.rho = g.sqrt_rho * g.sqrt_rho;
  return g;
}

struct PairMargin {
  int a = 0;  // signed disc indices
  int b = 0;
  double margin = 0.0;  // |w_a - w_b| - |rho_a|^{1/2} - |rho_b|^{1/2}
};

struct ValidationReport {
  std::vector<PairMargin> pairs;
  bool pass = true;
  double min_margin = 0.0;
};

// The full moduli input: g generators; signed index a in {+-1,..,+-g}
// labels the 2g discs, -a being the inverse side of handle |a|.
struct SchottkyParams {
  std::vector<SchottkyGenerator> generators;

  int genus() const { return static_cast<int>(generators.size()); }

  const SchottkyGenerator& gen(int a) const { return generators.at(std::abs(a) - 1); }

  cplx centre(int a) const { return a > 0 ? gen(a).w_plus : gen(a).w_minus; }
  cplx fixed_point(int a) const { return a > 0 ? gen(a).W_plus : gen(a).W_minus; }
  cplx rho(int a) const { return gen(a).rho; }
  cplx sqrt_rho(int a) const { return gen(a).sqrt_rho; }
  double radius(int a) const { return gen(a).radius(); }
  MoebiusMap map(int a) const { return a > 0 ? gen(a).map() : gen(a).map().inverse(); }

  // Signed indices in canonical order +1, -1, +2, -2, ...
  std::vector<int> indices() const {
    std::vector<int> out;
    for (int a = 1; a <= genus(); ++a) {
      out.push_back(a);
      out.push_back(-a);
    }
    return out;
  }
};

inline ValidationReport validate(const SchottkyParams& params) {
  ValidationReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  const auto idx = params.indices();
  for (size_t i = 0; i < idx.size(); ++i) {
    for (size_t j = i + 1; j < idx.size(); ++j) {
      PairMargin pm;
      pm.a = idx[i];
      pm.b = idx[j];
      pm.margin = std::abs(params.centre(pm.a) - params.centre(pm.b)) -
                  params.radius(pm.a) - params.radius(pm.b);
      rep.min_margin = std::min(rep.min_margin, pm.margin);
      if (pm.margin <= 0.0) rep.pass = false;
      rep.pairs.push_back(pm);
    }
  }
  return rep;
}

// SL(2,C) action on the canonical coordinates,
//   w_a     -> ((A w_a + B)(C w_{-a} + D) - rho_a A C) / D_a,
//   rho_a   -> rho_a / D_a^2,   D_a = (C w_a + D)(C w_{-a} + D) - rho_a C^2,
// applied to both signed sides of every handle; fixed points map by gamma W,
// the multiplier q_a is conjugation invariant.
inline SchottkyParams act_on_params(const MoebiusMap& gamma, const SchottkyParams& params) {
  SchottkyParams out = params;
  const cplx A = gamma.a(), B = gamma.b(), C = gamma.c(), D = gamma.d();
  for (int a = 1; a <= params.genus(); ++a) {
    const SchottkyGenerator& src = params.gen(a);
    SchottkyGenerator& dst = out.generators[a - 1];
    auto transform = [&](cplx wa, cplx wma, cplx rho) -> std::pair<cplx, cplx> {
      const cplx den = (C * wa + D) * (C * wma + D) - rho * C * C;
      return {((A * wa + B) * (C * wma + D) - rho * A * C) / den, rho / (den * den)};
    };
    auto [wp, rho_p] = transform(src.w_plus, src.w_minus, src.rho);
    auto [wm, rho_m] = transform(src.w_minus, src.w_plus, src.rho);
    if (std::abs(rho_p - rho_m) > 1e-10 * (std::abs(rho_p) + 1e-30))
      throw Error("act_on_params: inconsistent rho images");
    dst.w_plus = wp;
    dst.w_minus = wm;
    dst.rho = rho_p;
    dst.sqrt_rho = std::sqrt(rho_p);
    dst.W_minus = gamma.apply(ExtComplex(src.W_minus)).z;
    dst.W_plus = gamma.apply(ExtComplex(src.W_plus)).z;
    dst.q = src.q;
  }
  if (!validate(out).pass)
    throw ImageOutsideParameterSpace("disc condition fails after Moebius action");
  return out;
}

struct GroupWord {
  std::vector<int> letters;  // signed generator indices, reduced
  MoebiusMap map;
};

// All reduced words of length <= depth, identity first, in breadth-first
// lexicographic order (letters ordered +1, -1, +2, -2, ...).
inline std::vector<GroupWord> enumerate_words(const SchottkyParams& params, int depth) {
  std::vector<GroupWord> words;
  words.push_back(GroupWord{{}, MoebiusMap::identity()});
  const auto letters = params.indices();
  size_t level_begin = 0;
  for (int len = 1; len <= depth; ++len) {
    const size_t level_end = words.size();
    for (size_t i = level_begin; i < level_end; ++i) {
      for (int l : letters) {
        if (!words[i].letters.empty() && words[i].letters.back() == -l) continue;
        GroupWord w;
        w.letters = words[i].letters;
        w.letters.push_back(l);
        w.map = words[i].map * params.map(l);
        words.push_back(std::move(w));
      }
    }
    level_begin = level_end;
  }
  return words;
}

namespace detail {

inline double min_disc_distance(const SchottkyParams& params, cplx x) {
  double d = std::numeric_limits<double>::infinity();
  for (int a : params.indices())
    d = std::min(d, std::abs(x - params.centre(a)) - params.radius(a));
  return d;
}

}  // namespace detail

// Deterministic basepoint selection for the pi_N kernel.
//
// N >= 2: 2N-1 pairwise-distinct limit points, drawn from the generator
// fixed points in the order W_{-1}, W_{+1}, W_{-2}, W_{+2}, ... and, when
// more are needed, from their images under short reduced words in
// enumeration order.  N = 1: a single point of the fundamental domain far
// from every disc, located by a deterministic grid search.
inline std::vector<cplx> select_basepoints(const SchottkyParams& params, int N) {
  const int g = params.genus();
  if (N == 1) {
    double lo_re = 0, hi_re = 0, lo_im = 0, hi_im = 0;
    for (int a : params.indices()) {
      const cplx w = params.centre(a);
      lo_re = std::min(lo_re, w.real());
      hi_re = std::max(hi_re, w.real());
      lo_im = std::min(lo_im, w.imag());
      hi_im = std::max(hi_im, w.imag());
    }
    const double span = std::max({hi_re - lo_re, hi_im - lo_im, 1.0});
    const double cre = 0.5 * (lo_re + hi_re), cim = 0.5 * (lo_im + hi_im);
    cplx best = 0.0;
    double best_d = -std::numeric_limits<double>::infinity();
    const int n = 41;
    double half = 1.5 * span;
    cplx centre(cre, cim);
    for (int refine = 0; refine < 3; ++refine) {
      cplx local_best = best;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const cplx x = centre + cplx(-half + 2.0 * half * i / (n - 1),
                                       -half + 2.0 * half * j / (n - 1));
          const double d = detail::min_disc_distance(params, x);
          if (d > best_d + 1e-15) {
            best_d = d;
            local_best = x;
          }
        }
      }
      best = local_best;
      centre = best;
      half /= n - 1;
    }
    if (!(best_d > 0)) throw InsufficientDistinctPoints("no point clear of the discs");
    return {best};
  }

  const int needed = 2 * N - 1;
  std::vector<cplx> pts;
  auto push_distinct = [&](cplx p) {
    for (cplx q : pts)
      if (std::abs(p - q) < 1e-12) return;
    pts.push_back(p);
  };
  for (int a = 1; a <= g && static_cast<int>(pts.size()) < needed; ++a) {
    push_distinct(params.fixed_point(-a));
    if (static_cast<int>(pts.size()) < needed) push_distinct(params.fixed_point(a));
  }
  if (static_cast<int>(pts.size()) < needed) {
    if (g == 1) {
      // Genus-one extension: fixed points are the only limit points, so the
      // remaining basepoints are ordinary points placed on the perpendicular
      // bisector of the two centres, clear of both discs.
      const SchottkyGenerator& gen = params.generators[0];
      const cplx mid = 0.5 * (gen.w_minus + gen.w_plus);
      const cplx dir = (gen.w_plus - gen.w_minus) / std::abs(gen.w_plus - gen.w_minus);
      const cplx perp = dir * kI;
      const double scale = 0.75 * std::abs(gen.w_plus - gen.w_minus);
      int k = 1;
      while (static_cast<int>(pts.size()) < needed && k < 64) {
        const cplx p = mid + scale * static_cast<double>(k) * perp;
        if (detail::min_disc_distance(params, p) > 0) push_distinct(p);
        ++k;
      }
    } else {
      for (const GroupWord& w : enumerate_words(params, 3)) {
        if (w.letters.empty()) continue;
        for (int a : params.indices()) {
          const ExtComplex img = w.map.apply(ExtComplex(params.fixed_point(a)));
          if (!img.infinite) push_distinct(img.z);
          if (static_cast<int>(pts.size()) >= needed) break;
        }
        if (static_cast<int>(pts.size()) >= needed) break;
      }
    }
  }
  if (static_cast<int>(pts.size()) < needed)
    throw InsufficientDistinctPoints("could not assemble " + std::to_string(needed) +
                                     " distinct basepoints");
  pts.resize(needed);
  return pts;
}

// Convenience builders for the two reference configurations used across the
// test and verification suites.
inline SchottkyParams single_handle(cplx W_minus, cplx W_plus, cplx q) {
  SchottkyParams p;
  p.generators.push_back(make_generator(W_minus, W_plus, q));
  return p;
}

inline SchottkyParams reference_genus2(double rho = 0.02) {
  SchottkyParams p;
  p.generators.push_back(make_generator_canonical(cplx(2, 0), cplx(-2, 0), rho));
  p.generators.push_back(make_generator_canonical(cplx(0, 2), cplx(0, -2), rho));
  return p;
}

}  // namespace szhu

#endif
