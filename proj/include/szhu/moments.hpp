#ifndef SZHU_MOMENTS_HPP
#define SZHU_MOMENTS_HPP

#include <Eigen/Dense>
#include <Eigen/LU>
#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "szhu/schottky.hpp"

namespace szhu {

// Binomial coefficients in double precision, Pascal recurrence.
inline double binom(int n, int k) {
  if (k < 0 || k > n || n < 0) return 0.0;
  k = std::min(k, n - k);
  static std::vector<std::vector<double>> table;  // table[n][k], k <= n/2
  if (static_cast<size_t>(n) >= table.size()) {
    size_t old = table.size();
    table.resize(n + 1);
    for (size_t r = old; r < table.size(); ++r) {
      table[r].resize(r / 2 + 1);
      table[r][0] = 1.0;
      auto at = [&](size_t row, size_t col) -> double {
        if (col > row / 2) col = row - col;
        return table[row][col];
      };
      for (size_t c = 1; c <= r / 2; ++c)
        table[r][c] = at(r - 1, c - 1) + at(r - 1, c);
    }
  }
  return table[n][k];
}

// Normalised derivative of a simple pole: partial_x^(i) (x-A)^{-1}.
inline cplx pole_deriv(cplx x, cplx A, int i) {
  const cplx d = x - A;
  return ((i % 2) ? -1.0 : 1.0) * std::pow(d, -(i + 1.0));
}

// The genus-zero Zhu kernel
//   pi_N(x,y) = 1/(x-y) + sum_l f_l(x) y^l
//             = 1/(x-y) - sum_i Q_i(y)/(x - A_i),
// built from Lagrange polynomials Q_i on the basepoints A_0..A_{2N-2}.
//
// An empty basepoint list selects the f_l = 0 choice: pi_N(x,y) = 1/(x-y).
// The genus-zero Ward identity makes every assembled genus-g quantity
// independent of the choice of f_l; the f_l = 0 kernel is the one whose
// moment matrices stay numerically benign for N >= 2 (the Lagrange f_l on
// limit points put poles inside the moment contours).
class KernelSpec {
 public:
  KernelSpec() = default;

  KernelSpec(int N, std::vector<cplx> basepoints, SchottkyParams params)
      : N_(N), A_(std::move(basepoints)), params_(std::move(params)) {
    const int L = 2 * N_ - 1;
    if (!A_.empty() && static_cast<int>(A_.size()) != L)
      throw Error("KernelSpec: need 2N-1 basepoints (or none for f_l = 0)");
    for (size_t i = 0; i < A_.size(); ++i)
      for (size_t j = i + 1; j < A_.size(); ++j)
        if (std::abs(A_[i] - A_[j]) < 1e-13)
          throw Error("KernelSpec: basepoints must be pairwise distinct");

    // coefficients of Q_i(y) = prod_{j != i} (y - A_j)/(A_i - A_j)
    const int npts = static_cast<int>(A_.size());
    qcoef_.assign(npts, std::vector<cplx>(L, 0.0));
    for (int i = 0; i < npts; ++i) {
      std::vector<cplx> poly{1.0};
      cplx denom = 1.0;
      for (int j = 0; j < L; ++j) {
        if (j == i) continue;
        denom *= A_[i] - A_[j];
        std::vector<cplx> next(poly.size() + 1, 0.0);
        for (size_t k = 0; k < poly.size(); ++k) {
          next[k + 1] += poly[k];
          next[k] += -A_[j] * poly[k];
        }
        poly = std::move(next);
      }
      for (size_t k = 0; k < poly.size(); ++k) qcoef_[i][k] = poly[k] / denom;
    }

  }

  int N() const { return N_; }
  int Lsize() const { return 2 * N_ - 1; }
  const std::vector<cplx>& basepoints() const { return A_; }
  const SchottkyParams& params() const { return params_; }

  // partial_y^(j) Q_i(y)
  cplx q_deriv(size_t i, int j, cplx y) const {
    cplx s = 0.0;
    for (int l = j; l < Lsize(); ++l)
      s += qcoef_[i][l] * binom(l, j) * std::pow(y, static_cast<double>(l - j));
    return s;
  }

  void guard_basepoint(cplx x) const {
    for (cplx A : A_)
      if (std::abs(x - A) < 1e-13)
        throw EvaluationAtBasepoint("evaluation point coincides with a basepoint");
  }

  // partial_x^(i) partial_y^(j) pi_N(x,y)
  cplx pi(cplx x, cplx y, int i, int j) const {
    if (std::abs(x - y) < 1e-14) throw CoincidentPoints("pi_N at x = y");
    cplx s = (i % 2 ? -1.0 : 1.0) * binom(i + j, i) * std::pow(x - y, -(i + j + 1.0));
    for (size_t k = 0; k < A_.size(); ++k)
      s -= pole_deriv(x, A_[k], i) * q_deriv(k, j, y);
    return s;
  }

  // f_l^{(i)}(x)
  cplx f_deriv(int l, int i, cplx x) const {
    cplx s = 0.0;
    for (size_t k = 0; k < A_.size(); ++k)
      s -= qcoef_[k][l] * pole_deriv(x, A_[k], i);
    return s;
  }

  // e_m^n(y) = sum_l binom(l,n) f_l^{(m)}(y) y^{l-n}; vanishes for n > 2N-2.
  cplx e_mn(cplx y, int m, int n) const {
    if (n > 2 * N_ - 2) return 0.0;
    guard_basepoint(y);
    cplx s = 0.0;
    for (size_t k = 0; k < A_.size(); ++k)
      s -= pole_deriv(y, A_[k], m) * q_deriv(k, n, y);
    return s;
  }

  // e^j_i(y) = sum_l f_l^{(i)}(y) partial^{(j)} y^l, the x-expansion
  // coefficient of pi_N(y+x, y) used in the second Zhu recursion.
  cplx e_coeff(cplx y, int j, int i) const { return e_mn(y, i, j); }

 private:
  int N_ = 1;
  std::vector<cplx> A_;
  SchottkyParams params_;
  std::vector<std::vector<cplx>> qcoef_;
};

// Truncated doubly-indexed moment system for one weight N: the matrices
// A and Atilde = A Delta of modes m,n in 0..M over the 2g signed discs,
// the LU factorisation of I - Atilde and its log-determinant.
class BlockSystem {
 public:
  BlockSystem() = default;

  BlockSystem(KernelSpec spec, int M) : spec_(std::move(spec)), M_(M) {
    const SchottkyParams& p = spec_.params();
    const int g = p.genus();
    if (M_ < 2 * spec_.N() - 1) throw Error("BlockSystem: cutoff M too small");
    dim_ = 2 * g * (M_ + 1);

    A_ = Eigen::MatrixXcd::Zero(dim_, dim_);
    At_ = Eigen::MatrixXcd::Zero(dim_, dim_);
    const int N = spec_.N();
    const double signN = (N % 2) ? -1.0 : 1.0;
    for (int a : p.indices()) {
      const cplx sa = p.sqrt_rho(a);
      const cplx wma = p.centre(-a);
      for (int b : p.indices()) {
        const cplx sb = p.sqrt_rho(b);
        const cplx wb = p.centre(b);
        for (int m = 0; m <= M_; ++m) {
          for (int n = 0; n <= M_; ++n) {
            cplx entry;
            if (b == -a)
              entry = signN * ipow(sa, m + n + 1) * spec_.e_mn(wma, m, n);
            else
              entry = signN * ipow(sa, m + 1) * ipow(sb, n) * spec_.pi(wma, wb, m, n);
            A_(row(a, m), row(b, n)) = entry;
            // Atilde = A Delta: the a = -b block vanishes, the rest is
            // independent of the f_l terms and has the closed form (2.37).
            if (b != -a) {
              const double bc = binom(m + n + 2 * N - 1, m);
              const double sgn = ((m + N) % 2) ? -1.0 : 1.0;
              At_(row(a, m), row(b, n)) = sgn * bc * ipow(sa, m + 1) *
                                          ipow(sb, n + 2 * N - 1) /
                                          std::pow(wma - wb, m + n + 2.0 * N);
            }
          }
        }
      }
    }

    Eigen::MatrixXcd IA = Eigen::MatrixXcd::Identity(dim_, dim_) - At_;
    lu_.compute(IA);
    // rcond proxy: smallest pivot against the largest
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double v = std::abs(lu_.matrixLU()(i, i));
      dmin = std::min(dmin, v);
      dmax = std::max(dmax, v);
    }
    if (!(dmin > 1e-13 * dmax))
      throw SingularResolvent("I - Atilde numerically singular; parameters near the boundary of the Schottky space");
    inv_ = lu_.inverse();
    logdet_ = logdet_from_lu(lu_);
    if (std::abs(logdet_.imag()) > 1.5) logdet_ = logdet_by_path();
  }

  const KernelSpec& spec() const { return spec_; }
  const SchottkyParams& params() const { return spec_.params(); }
  int M() const { return M_; }
  int dim() const { return dim_; }
  const Eigen::MatrixXcd& A() const { return A_; }
  const Eigen::MatrixXcd& Atilde() const { return At_; }
  const Eigen::MatrixXcd& resolvent() const { return inv_; }
  cplx logdet() const { return logdet_; }

  int row(int a, int m) const {
    const int slot = 2 * (std::abs(a) - 1) + (a > 0 ? 0 : 1);
    return slot * (M_ + 1) + m;
  }

  // L_b^n(x) with i normalised x-derivatives applied:
  //   rho_b^{n/2} pi_N^{(i,n)}(x, w_b).
  Eigen::RowVectorXcd eval_L(cplx x, int i) const {
    const SchottkyParams& p = params();
    Eigen::RowVectorXcd v(dim_);
    for (int b : p.indices()) {
      const cplx sb = p.sqrt_rho(b);
      const cplx wb = p.centre(b);
      if (std::abs(x - wb) < 1e-13) throw EvaluationAtCentre("L row at a disc centre");
      for (int n = 0; n <= M_; ++n) v(row(b, n)) = ipow(sb, n) * spec_.pi(x, wb, i, n);
    }
    return v;
  }

  // Ltilde_b^n(x) = rho_b^{(n+2N-1)/2} (x-w_b)^{-n-2N}, i-th x-derivative
  // in closed form.
  Eigen::RowVectorXcd eval_Ltilde(cplx x, int i) const {
    const SchottkyParams& p = params();
    const int N = spec_.N();
    Eigen::RowVectorXcd v(dim_);
    for (int b : p.indices()) {
      const cplx sb = p.sqrt_rho(b);
      const cplx xb = x - p.centre(b);
      if (std::abs(xb) < 1e-13) throw EvaluationAtCentre("Ltilde row at a disc centre");
      for (int n = 0; n <= M_; ++n) {
        const double sgn = (i % 2) ? -1.0 : 1.0;
        v(row(b, n)) = sgn * binom(n + 2 * N - 1 + i, i) * ipow(sb, n + 2 * N - 1) *
                       std::pow(xb, -(n + 2.0 * N + i));
      }
    }
    return v;
  }

  // R_a^m(y) = (-1)^N rho_a^{(m+1)/2} pi_N^{(m,j)}(w_{-a}, y), annulus
  // coefficients at w_{-a} (poles inside Delta_{-a} dropped).
  Eigen::VectorXcd eval_R(cplx y, int j) const {
    const SchottkyParams& p = params();
    const int N = spec_.N();
    const double signN = (N % 2) ? -1.0 : 1.0;
    Eigen::VectorXcd v(dim_);
    for (int a : p.indices()) {
      const cplx sa = p.sqrt_rho(a);
      const cplx wma = p.centre(-a);
      if (std::abs(y - wma) < 1e-13) throw EvaluationAtCentre("R column at a disc centre");
      for (int m = 0; m <= M_; ++m)
        v(row(a, m)) = signN * ipow(sa, m + 1) * spec_.pi(wma, y, m, j);
    }
    return v;
  }

  Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const {
    Eigen::VectorXcd x = lu_.solve(rhs);
    const double rn = ((Eigen::MatrixXcd::Identity(dim_, dim_) - At_) * x - rhs)
                          .lpNorm<Eigen::Infinity>();
    if (rhs.size() && rn > 1e-12 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()))
      throw SingularResolvent("resolvent solve residual too large");
    return x;
  }

 private:
  static cplx ipow(cplx z, int k) {
    cplx r = 1.0;
    for (int i = 0; i < k; ++i) r *= z;
    return r;
  }

  static cplx logdet_from_lu(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu) {
    cplx s = 0.0;
    for (int i = 0; i < lu.rows(); ++i) s += std::log(lu.matrixLU()(i, i));
    if (lu.permutationP().determinant() < 0) s += cplx(0.0, kPi);
    return s;
  }

  // Continuous-branch log-determinant: step the sewing parameters from 0 to
  // their actual values and unwrap 2*pi*i jumps.  det(I - Atilde(t rho)) is
  // 1 at t = 0.
  cplx logdet_by_path() const {
    const int steps = 16;
    cplx prev = 0.0;
    cplx value = 0.0;
    for (int s = 1; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      SchottkyParams q = params();
      for (auto& gen : q.generators) {
        gen.rho *= t;
        gen.sqrt_rho *= std::sqrt(t);
      }
      BlockSystemShadow sh(q, spec_.N(), M_);
      cplx ld = sh.logdet_principal;
      while ((ld - prev).imag() > kPi) ld -= kTwoPiI;
      while ((ld - prev).imag() < -kPi) ld += kTwoPiI;
      prev = ld;
      value = ld;
    }
    return value;
  }

  // Minimal rebuild used by the path-stepping branch tracker.
  struct BlockSystemShadow {
    cplx logdet_principal;
    BlockSystemShadow(const SchottkyParams& p, int N, int M) {
      const int g = p.genus();
      const int dim = 2 * g * (M + 1);
      Eigen::MatrixXcd At = Eigen::MatrixXcd::Zero(dim, dim);
      auto row = [&](int a, int m) {
        return (2 * (std::abs(a) - 1) + (a > 0 ? 0 : 1)) * (M + 1) + m;
      };
      for (int a : p.indices())
        for (int b : p.indices()) {
          if (b == -a) continue;
          const cplx wma = p.centre(-a), wb = p.centre(b);
          for (int m = 0; m <= M; ++m)
            for (int n = 0; n <= M; ++n) {
              const double sgn = ((m + N) % 2) ? -1.0 : 1.0;
              At(row(a, m), row(b, n)) = sgn * binom(m + n + 2 * N - 1, m) *
                                         ipow(p.sqrt_rho(a), m + 1) *
                                         ipow(p.sqrt_rho(b), n + 2 * N - 1) /
                                         std::pow(wma - wb, m + n + 2.0 * N);
            }
        }
      Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Eigen::MatrixXcd::Identity(dim, dim) - At);
      logdet_principal = logdet_from_lu(lu);
    }
  };

  KernelSpec spec_;
  int M_ = 0;
  int dim_ = 0;
  Eigen::MatrixXcd A_, At_, inv_;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
  cplx logdet_{};
};

inline BlockSystem build_block_system(const KernelSpec& spec, int M) {
  return BlockSystem(spec, M);
}

}  // namespace szhu

#endif
