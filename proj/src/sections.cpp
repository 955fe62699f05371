#include "bergman/sections.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cmath>

namespace bergman {

namespace {

// log-sum-exp accumulator for tail bounds.
struct LogSum {
  double mx = -1e300;
  double s = 0.0;
  void add(double lg) {
    if (lg <= -1e290) return;
    if (lg > mx) {
      s = s * std::exp(mx - lg) + 1.0;
      mx = lg;
    } else {
      s += std::exp(lg - mx);
    }
  }
  double log_value() const { return s > 0 ? mx + std::log(s) : -1e300; }
};

// Smallest M with  log[ sup_domain kernel tail past M ] < log(tol).
// The per-degree terms are the documented closed-form bounds; suffix sums
// are taken in log space so tiny tolerances stay meaningful.
int truncation_degree(const ModelGeometry& geom, int p, double tail_tol) {
  const double logtol = std::log(tail_tol);
  std::vector<double> logterm;
  if (geom.kind() == ModelKind::Fock) {
    // p * e^{-lam} sum_{m>M} lam^m/m!  with lam = p pi chart_bound^2.
    const double lam = p * kPi * geom.chart_bound() * geom.chart_bound();
    const double loglam = std::log(lam);
    int m_hi = static_cast<int>(lam + 60.0 * std::sqrt(lam + 4.0) + 900.0);
    logterm.reserve(m_hi + 1);
    for (int m = 0; m <= m_hi; ++m)
      logterm.push_back(std::log(static_cast<double>(p)) - lam + m * loglam -
                        std::lgamma(m + 1.0));
  } else {
    // (1-R^2)^{2p} sum_{m>M} R^{2m}/g_m on the Poincare model.
    const double R = geom.chart_bound();
    const double logR2 = 2.0 * std::log(R);
    const double head = 2.0 * p * std::log1p(-R * R);
    double ratio_break = 2.0 * p * R * R / (1.0 - R * R);
    int m_hi = static_cast<int>(ratio_break + (-logtol + 200.0) / (-logR2) + 400.0);
    if (m_hi > 2'000'000)
      fail(ErrorKind::Resource, "build_basis: truncation degree beyond budget");
    logterm.reserve(m_hi + 1);
    for (int m = 0; m <= m_hi; ++m) {
      double logg = std::log(2.0) + std::lgamma(m + 1.0) + std::lgamma(2.0 * p - 1.0) -
                    std::lgamma(2.0 * p + m);
      logterm.push_back(head + m * logR2 - logg);
    }
  }
  // suffix log-sum-exp, smallest M with tail < tol
  int n = static_cast<int>(logterm.size());
  std::vector<double> suffix(n + 1, -1e300);
  LogSum acc;
  for (int m = n - 1; m >= 0; --m) {
    acc.add(logterm[m]);
    suffix[m] = acc.log_value();
  }
  if (suffix[0] < logtol) return 0;
  for (int M = 0; M + 1 < n; ++M)
    if (suffix[M + 1] < logtol) return M;
  fail(ErrorKind::Accuracy, "build_basis: tail bound did not reach tolerance");
}

}  // namespace

SectionBasis build_basis(const ModelGeometry& geom, int p, double tail_tol) {
  if (geom.kind() == ModelKind::PoincareDisc && 2 * p <= 1)
    fail(ErrorKind::Config,
         "build_basis: no L^2 sections on the disc at power " + std::to_string(p));
  if (p < 1) fail(ErrorKind::Config, "build_basis: p must be >= 1");
  if (!(tail_tol > 0 && tail_tol < 1))
    fail(ErrorKind::Config, "build_basis: tail_tol must lie in (0,1)");
  SectionBasis b;
  b.geom = geom;
  b.p = p;
  switch (geom.kind()) {
    case ModelKind::ProjectiveLine:
      b.truncation = p;  // dim H^0 = p+1
      break;
    case ModelKind::FlatTorus:
      b.truncation = p - 1;  // p theta characteristics
      break;
    case ModelKind::Fock:
    case ModelKind::PoincareDisc:
      b.truncation = truncation_degree(geom, p, tail_tol);
      break;
  }
  return b;
}

double closed_form_log_norm(const SectionBasis& b, int m) {
  const int p = b.p;
  switch (b.geom.kind()) {
    case ModelKind::Fock:
      return std::lgamma(m + 1.0) - (m + 1.0) * std::log(static_cast<double>(p)) -
             m * std::log(kPi);
    case ModelKind::ProjectiveLine:
      return std::lgamma(m + 1.0) + std::lgamma(p - m + 1.0) - std::lgamma(p + 2.0);
    case ModelKind::PoincareDisc:
      return std::log(2.0) + std::lgamma(m + 1.0) + std::lgamma(2.0 * p - 1.0) -
             std::lgamma(2.0 * p + m);
    case ModelKind::FlatTorus:
      return -0.5 * std::log(2.0 * p * b.geom.tau().imag());
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// element evaluation

namespace {

// Theta characteristics, h-weighted:  theta_{j,p}(z) e^{-p phi(z)}.  The
// real part of every term exponent is -pi p Im(tau) (a + Im z/Im tau)^2 with
// a = m + j/p, so the lattice sum is a unit-bounded Gaussian; terms are cut
// at 1e-18 of the running maximum.
void theta_weighted(const SectionBasis& b, cplx z, bool deriv, std::vector<cplx>& out) {
  const double t1 = b.geom.tau().real(), t2 = b.geom.tau().imag();
  const int p = b.p;
  const double x = z.real(), c = z.imag() / t2;
  out.assign(b.size(), cplx(0, 0));
  for (int j = 0; j < p; ++j) {
    const double aj = static_cast<double>(j) / p;
    const long m0 = std::lround(-c - aj);
    NeumaierSumC acc;
    double max_log = -1e300;
    for (int dir = 0; dir < 2; ++dir) {
      for (long step = 0;; ++step) {
        const long m = (dir == 0) ? m0 + step : m0 - 1 - step;
        const double a = static_cast<double>(m) + aj;
        const double relog = -kPi * p * t2 * (a + c) * (a + c);
        if (relog > max_log) max_log = relog;
        if (relog < max_log - 46.0) break;
        const double imlog = kPi * t1 * p * a * a + 2.0 * kPi * p * a * x;
        cplx term = std::exp(relog) * cplx(std::cos(imlog), std::sin(imlog));
        if (deriv) term *= cplx(0.0, 2.0 * kPi * p * a);
        acc.add(term);
      }
    }
    out[j] = acc.value();
  }
}

// Monomials, h-weighted:  z^m e^{-p phi(z)}  evaluated as exp(m Log z - p phi)
// so that deep-tail elements underflow gracefully instead of poisoning the
// recursion.  `extra_log` shifts the exponent (used for 1/sqrt(norms)).
void monomial_weighted(const SectionBasis& b, cplx z, bool deriv,
                       const std::vector<double>* half_log_norms,
                       std::vector<cplx>& out) {
  const std::size_t K = b.size();
  out.assign(K, cplx(0, 0));
  const double phi = b.geom.potential(Point{z});
  const double pphi = static_cast<double>(b.p) * phi;
  if (z == cplx(0, 0)) {
    if (!deriv) {
      out[0] = std::exp(cplx(-pphi - (half_log_norms ? (*half_log_norms)[0] : 0.0), 0));
    } else if (K > 1) {
      out[1] = std::exp(cplx(-pphi - (half_log_norms ? (*half_log_norms)[1] : 0.0), 0));
    }
    return;
  }
  const cplx logz = std::log(z);
  for (std::size_t m = 0; m < K; ++m) {
    double shift = half_log_norms ? (*half_log_norms)[m] : 0.0;
    if (!deriv) {
      out[m] = std::exp(static_cast<double>(m) * logz - cplx(pphi + shift, 0));
    } else {
      if (m == 0) continue;
      out[m] = std::exp(static_cast<double>(m - 1) * logz +
                        cplx(std::log(static_cast<double>(m)) - pphi - shift, 0));
    }
  }
}

}  // namespace

void weighted_raw_values(const SectionBasis& b, cplx z, std::vector<cplx>& out) {
  if (b.geom.kind() == ModelKind::FlatTorus)
    theta_weighted(b, z, false, out);
  else
    monomial_weighted(b, z, false, nullptr, out);
}

void weighted_raw_derivs(const SectionBasis& b, cplx z, std::vector<cplx>& out) {
  if (b.geom.kind() == ModelKind::FlatTorus)
    theta_weighted(b, z, true, out);
  else
    monomial_weighted(b, z, true, nullptr, out);
}

// ---------------------------------------------------------------------------
// Gram assembly

Eigen::MatrixXcd assemble_gram(const SectionBasis& basis, const QuadratureRule& rule) {
  const int K = static_cast<int>(basis.size());
  if (basis.geom.kind() == ModelKind::FlatTorus) {
    if (rule.domain != QuadDomain::TorusFD)
      fail(ErrorKind::Config, "assemble_gram: torus basis needs a torus rule");
    if (rule.degree < 2 * basis.p + 16)
      fail(ErrorKind::Config, "assemble_gram: rule degree below 2p + margin");
  } else {
    if (rule.degree < 2 * basis.truncation)
      fail(ErrorKind::Config, "assemble_gram: rule degree below twice the basis degree");
  }

  const std::size_t n = rule.nodes.size();
  const std::size_t n_chunks = 64;
  std::vector<Eigen::MatrixXcd> partial(n_chunks, Eigen::MatrixXcd::Zero(K, K));
  parallel_chunks(n, n_chunks, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    std::vector<cplx> v;
    Eigen::VectorXcd col(K);
    for (std::size_t i = lo; i < hi; ++i) {
      const QuadNode& nd = rule.nodes[i];
      weighted_raw_values(basis, nd.z, v);
      const double s = std::sqrt(nd.w * basis.geom.volume_density(Point{nd.z}));
      for (int k = 0; k < K; ++k) col[k] = v[k] * s;
      partial[c].selfadjointView<Eigen::Lower>().rankUpdate(col, 1.0);
    }
  });
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(K, K);
  for (std::size_t c = 0; c < n_chunks; ++c) G += partial[c];
  G.triangularView<Eigen::StrictlyUpper>() = G.adjoint().triangularView<Eigen::StrictlyUpper>();
  return G;
}

Eigen::MatrixXcd assemble_gram_gated(const SectionBasis& basis, int degree) {
  QuadratureRule coarse = build_rule(basis.geom, degree, basis.p);
  QuadratureRule fine = build_rule(basis.geom, 2 * degree, basis.p);
  Eigen::MatrixXcd G0 = assemble_gram(basis, coarse);
  Eigen::MatrixXcd G1 = assemble_gram(basis, fine);
  const double scale = G1.diagonal().real().maxCoeff();
  const double drift = (G1 - G0).cwiseAbs().maxCoeff();
  if (drift > 1e-10 * scale)
    fail(ErrorKind::Accuracy,
         "assemble_gram_gated: doubling the rule degree moved a Gram entry by " +
             std::to_string(drift / scale) + " relative (gate 1e-10)");
  return G1;
}

// ---------------------------------------------------------------------------
// orthonormalization

OrthonormalBasis orthonormalize(const SectionBasis& basis, const Eigen::MatrixXcd& gram,
                                double drop_tol) {
  const int K = static_cast<int>(gram.rows());
  if (gram.cols() != K) fail(ErrorKind::Config, "orthonormalize: gram must be square");
  const double scale = gram.cwiseAbs().maxCoeff();
  if ((gram - gram.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
    fail(ErrorKind::Config, "orthonormalize: gram is not Hermitian");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
  if (es.info() != Eigen::Success)
    fail(ErrorKind::Numeric, "orthonormalize: eigendecomposition failed");
  const Eigen::VectorXd ev = es.eigenvalues();
  const double emax = ev.maxCoeff();
  if (!(emax > 0)) fail(ErrorKind::Numeric, "orthonormalize: empty section space");

  int kept = 0;
  for (int i = 0; i < K; ++i)
    if (ev[i] >= drop_tol * emax) ++kept;
  if (kept == 0) fail(ErrorKind::Numeric, "orthonormalize: all eigenvalues dropped");

  OrthonormalBasis onb;
  onb.basis = basis;
  onb.diagonal = false;
  onb.transform.resize(K, kept);
  double emin_kept = emax;
  int c = 0;
  for (int i = 0; i < K; ++i) {
    if (ev[i] < drop_tol * emax) continue;
    onb.transform.col(c++) = es.eigenvectors().col(i) / std::sqrt(ev[i]);
    emin_kept = std::min(emin_kept, ev[i]);
  }
  onb.gram_condition = emax / emin_kept;
  onb.dropped = K - kept;
  return onb;
}

OrthonormalBasis closed_form_onb(const SectionBasis& basis) {
  OrthonormalBasis onb;
  onb.basis = basis;
  onb.diagonal = true;
  onb.log_norms.resize(basis.size());
  for (std::size_t m = 0; m < basis.size(); ++m)
    onb.log_norms[m] = closed_form_log_norm(basis, static_cast<int>(m));
  onb.gram_condition = 1.0;
  onb.dropped = 0;
  return onb;
}

// ---------------------------------------------------------------------------
// kernel evaluation

KernelEvaluator KernelEvaluator::closed_form(const ModelGeometry& geom, int p,
                                             double tail_tol) {
  return KernelEvaluator(closed_form_onb(build_basis(geom, p, tail_tol)));
}

void KernelEvaluator::weighted_sections(cplx z, std::vector<cplx>& out) const {
  const SectionBasis& b = onb_.basis;
  if (onb_.diagonal) {
    if (b.geom.kind() == ModelKind::FlatTorus) {
      theta_weighted(b, z, false, out);
      for (std::size_t j = 0; j < out.size(); ++j)
        out[j] *= std::exp(-0.5 * onb_.log_norms[j]);
    } else {
      std::vector<double> half(b.size());
      for (std::size_t m = 0; m < half.size(); ++m) half[m] = 0.5 * onb_.log_norms[m];
      monomial_weighted(b, z, false, &half, out);
    }
    return;
  }
  std::vector<cplx> raw;
  weighted_raw_values(b, z, raw);
  const Eigen::Map<const Eigen::VectorXcd> rv(raw.data(), raw.size());
  Eigen::VectorXcd u = onb_.transform.transpose() * rv;
  out.assign(u.data(), u.data() + u.size());
}

void KernelEvaluator::weighted_section_derivs(cplx z, std::vector<cplx>& out) const {
  const SectionBasis& b = onb_.basis;
  if (onb_.diagonal) {
    if (b.geom.kind() == ModelKind::FlatTorus) {
      theta_weighted(b, z, true, out);
      for (std::size_t j = 0; j < out.size(); ++j)
        out[j] *= std::exp(-0.5 * onb_.log_norms[j]);
    } else {
      std::vector<double> half(b.size());
      for (std::size_t m = 0; m < half.size(); ++m) half[m] = 0.5 * onb_.log_norms[m];
      monomial_weighted(b, z, true, &half, out);
    }
    return;
  }
  std::vector<cplx> raw;
  weighted_raw_derivs(b, z, raw);
  const Eigen::Map<const Eigen::VectorXcd> rv(raw.data(), raw.size());
  Eigen::VectorXcd u = onb_.transform.transpose() * rv;
  out.assign(u.data(), u.data() + u.size());
}

double KernelEvaluator::cancellation_digits(cplx x, cplx y) const {
  const double p = onb_.basis.p;
  const cplx t = x * std::conj(y);
  const double ax = std::abs(x), ay = std::abs(y);
  switch (onb_.basis.geom.kind()) {
    case ModelKind::Fock:
      return p * kPi * (ax * ay - t.real()) / std::log(10.0);
    case ModelKind::ProjectiveLine:
      return p * std::log10((1.0 + ax * ay) / std::abs(1.0 + t));
    case ModelKind::PoincareDisc: {
      double prod = ax * ay;
      if (prod >= 1.0) return 1e9;  // outside the series disc; callers prevent this
      return 2.0 * p * std::log10(std::abs(1.0 - t) / (1.0 - prod));
    }
    default:
      return 0.0;
  }
}

KernelValue KernelEvaluator::eval_diag_double(cplx x, cplx y) const {
  std::vector<cplx> ux, uy;
  weighted_sections(x, ux);
  weighted_sections(y, uy);
  NeumaierSumC acc;
  for (std::size_t j = 0; j < ux.size(); ++j) acc.add(ux[j] * std::conj(uy[j]));
  const cplx W = acc.value();
  const double E = onb_.basis.p * (onb_.basis.geom.potential(Point{x}) +
                                   onb_.basis.geom.potential(Point{y}));
  return KernelValue{W * std::exp(E), std::abs(W)};
}

namespace {

// Fixed-precision complex accumulator for the diagonal-Gram series
// sum_m (x conj(y))^m / g_m.  The 1/g_m recursions are exact rationals
// (times pi for the Fock model), so the only rounding is the working
// precision itself.
struct MpfrSeries {
  mpfr_prec_t prec;
  mpfr_t tr, ti, termr, termi, accr, acci, tmp1, tmp2, pi;

  explicit MpfrSeries(mpfr_prec_t pr) : prec(pr) {
    mpfr_inits2(prec, tr, ti, termr, termi, accr, acci, tmp1, tmp2, pi,
                static_cast<mpfr_ptr>(nullptr));
    mpfr_const_pi(pi, MPFR_RNDN);
  }
  ~MpfrSeries() {
    mpfr_clears(tr, ti, termr, termi, accr, acci, tmp1, tmp2, pi,
                static_cast<mpfr_ptr>(nullptr));
  }
  // term *= t  (complex multiply)
  void mul_t() {
    mpfr_mul(tmp1, termr, tr, MPFR_RNDN);
    mpfr_mul(tmp2, termi, ti, MPFR_RNDN);
    mpfr_sub(tmp1, tmp1, tmp2, MPFR_RNDN);
    mpfr_mul(tmp2, termr, ti, MPFR_RNDN);
    mpfr_mul(termi, termi, tr, MPFR_RNDN);
    mpfr_add(termi, termi, tmp2, MPFR_RNDN);
    mpfr_swap(termr, tmp1);
  }
  void scale(double num, long den) {
    mpfr_mul_d(termr, termr, num, MPFR_RNDN);
    mpfr_div_si(termr, termr, den, MPFR_RNDN);
    mpfr_mul_d(termi, termi, num, MPFR_RNDN);
    mpfr_div_si(termi, termi, den, MPFR_RNDN);
  }
  void scale_pi_over(long pnum, long den) {  // term *= pnum*pi/den
    mpfr_mul_si(termr, termr, pnum, MPFR_RNDN);
    mpfr_mul(termr, termr, pi, MPFR_RNDN);
    mpfr_div_si(termr, termr, den, MPFR_RNDN);
    mpfr_mul_si(termi, termi, pnum, MPFR_RNDN);
    mpfr_mul(termi, termi, pi, MPFR_RNDN);
    mpfr_div_si(termi, termi, den, MPFR_RNDN);
  }
  void accumulate() {
    mpfr_add(accr, accr, termr, MPFR_RNDN);
    mpfr_add(acci, acci, termi, MPFR_RNDN);
  }
};

}  // namespace

KernelValue KernelEvaluator::eval_diag_mpfr(cplx x, cplx y, double loss_digits) const {
  const SectionBasis& b = onb_.basis;
  const long p = b.p;
  const int M = b.truncation;
  const mpfr_prec_t prec = static_cast<mpfr_prec_t>(
      std::min(64000.0, (loss_digits + 40.0) * 3.4 + 96.0));
  MpfrSeries S(prec);

  // t = x * conj(y), exactly from double components.
  mpfr_t xr, xi, yr, yi;
  mpfr_inits2(prec, xr, xi, yr, yi, static_cast<mpfr_ptr>(nullptr));
  mpfr_set_d(xr, x.real(), MPFR_RNDN);
  mpfr_set_d(xi, x.imag(), MPFR_RNDN);
  mpfr_set_d(yr, y.real(), MPFR_RNDN);
  mpfr_set_d(yi, -y.imag(), MPFR_RNDN);
  mpfr_mul(S.tmp1, xr, yr, MPFR_RNDN);
  mpfr_mul(S.tmp2, xi, yi, MPFR_RNDN);
  mpfr_sub(S.tr, S.tmp1, S.tmp2, MPFR_RNDN);
  mpfr_mul(S.tmp1, xr, yi, MPFR_RNDN);
  mpfr_mul(S.tmp2, xi, yr, MPFR_RNDN);
  mpfr_add(S.ti, S.tmp1, S.tmp2, MPFR_RNDN);

  // term_0 = 1/g_0, then the model's rational recursion.
  double inv_g0 = 0.0;
  switch (b.geom.kind()) {
    case ModelKind::Fock: inv_g0 = static_cast<double>(p); break;
    case ModelKind::ProjectiveLine: inv_g0 = static_cast<double>(p + 1); break;
    case ModelKind::PoincareDisc: inv_g0 = p - 0.5; break;
    default: fail(ErrorKind::Numeric, "mpfr series: unsupported model");
  }
  mpfr_set_d(S.termr, inv_g0, MPFR_RNDN);
  mpfr_set_zero(S.termi, 1);
  mpfr_set(S.accr, S.termr, MPFR_RNDN);
  mpfr_set(S.acci, S.termi, MPFR_RNDN);
  for (long m = 1; m <= M; ++m) {
    S.mul_t();
    switch (b.geom.kind()) {
      case ModelKind::Fock: S.scale_pi_over(p, m); break;
      case ModelKind::ProjectiveLine: S.scale(static_cast<double>(p - m + 1), m); break;
      case ModelKind::PoincareDisc: S.scale(static_cast<double>(2 * p + m - 1), m); break;
      default: break;
    }
    S.accumulate();
  }

  // E = p (phi(x) + phi(y)) in working precision.
  mpfr_t E, n2;
  mpfr_inits2(prec, E, n2, static_cast<mpfr_ptr>(nullptr));
  auto add_phi = [&](mpfr_t re, mpfr_t im) {
    mpfr_mul(S.tmp1, re, re, MPFR_RNDN);
    mpfr_mul(S.tmp2, im, im, MPFR_RNDN);
    mpfr_add(n2, S.tmp1, S.tmp2, MPFR_RNDN);
    switch (b.geom.kind()) {
      case ModelKind::Fock:
        mpfr_mul(S.tmp1, n2, S.pi, MPFR_RNDN);
        mpfr_mul_d(S.tmp1, S.tmp1, 0.5 * p, MPFR_RNDN);
        break;
      case ModelKind::ProjectiveLine:
        mpfr_log1p(S.tmp1, n2, MPFR_RNDN);
        mpfr_mul_d(S.tmp1, S.tmp1, 0.5 * p, MPFR_RNDN);
        break;
      case ModelKind::PoincareDisc:
        mpfr_neg(n2, n2, MPFR_RNDN);
        mpfr_log1p(S.tmp1, n2, MPFR_RNDN);
        mpfr_mul_d(S.tmp1, S.tmp1, -static_cast<double>(p), MPFR_RNDN);
        break;
      default: break;
    }
    mpfr_add(E, E, S.tmp1, MPFR_RNDN);
  };
  mpfr_set_zero(E, 1);
  add_phi(xr, xi);
  add_phi(yr, yi);

  // weighted value W = acc * exp(-E); raw = acc.
  mpfr_neg(E, E, MPFR_RNDN);
  mpfr_exp(E, E, MPFR_RNDN);
  mpfr_mul(S.tmp1, S.accr, E, MPFR_RNDN);
  mpfr_mul(S.tmp2, S.acci, E, MPFR_RNDN);
  const double wr = mpfr_get_d(S.tmp1, MPFR_RNDN);
  const double wi = mpfr_get_d(S.tmp2, MPFR_RNDN);
  KernelValue out;
  out.norm_mag = std::hypot(wr, wi);
  out.raw = cplx(mpfr_get_d(S.accr, MPFR_RNDN), mpfr_get_d(S.acci, MPFR_RNDN));
  mpfr_clears(xr, xi, yr, yi, E, n2, static_cast<mpfr_ptr>(nullptr));
  return out;
}

KernelValue KernelEvaluator::eval_kernel(Point x, Point y) const {
  const SectionBasis& b = onb_.basis;
  b.geom.require_in_chart(x);
  b.geom.require_in_chart(y);
  if (onb_.diagonal && b.geom.kind() != ModelKind::FlatTorus) {
    const double loss = cancellation_digits(x.z, y.z);
    if (loss > 12.0 && loss < 1e8) return eval_diag_mpfr(x.z, y.z, loss);
  }
  return eval_diag_double(x.z, y.z);
}

double KernelEvaluator::density(Point x) const {
  onb_.basis.geom.require_in_chart(x);
  std::vector<cplx> u;
  weighted_sections(x.z, u);
  NeumaierSum acc;
  for (const cplx& v : u) acc.add(std::norm(v));
  return acc.value();
}

double KernelEvaluator::reproducing_check(const QuadratureRule& rule, Point x,
                                          Point z) const {
  const SectionBasis& b = onb_.basis;
  b.geom.require_in_chart(x);
  b.geom.require_in_chart(z);
  // For non-compact models demand that the rule covers the truncated
  // section mass; otherwise the residual is tail-dominated.
  if (b.geom.kind() == ModelKind::Fock) {
    const double lq = log_gamma_tail_q(b.truncation + 1.0, b.p * kPi * rule.r1 * rule.r1);
    if (lq > std::log(1e-9))
      fail(ErrorKind::Accuracy,
           "reproducing_check: rule radius too small for the basis mass");
  } else if (b.geom.kind() == ModelKind::PoincareDisc) {
    if ((2.0 * b.p - 1.0) * std::log1p(-rule.r1 * rule.r1) > std::log(1e-9))
      fail(ErrorKind::Accuracy,
           "reproducing_check: rule radius too small for the weight mass");
  }
  std::vector<cplx> ux, uz, uy;
  weighted_sections(x.z, ux);
  weighted_sections(z.z, uz);
  NeumaierSumC integral;
  for (const QuadNode& nd : rule.nodes) {
    weighted_sections(nd.z, uy);
    cplx wxy(0, 0), wyz(0, 0);
    for (std::size_t j = 0; j < uy.size(); ++j) {
      wxy += ux[j] * std::conj(uy[j]);
      wyz += uy[j] * std::conj(uz[j]);
    }
    integral.add(nd.w * b.geom.volume_density(Point{nd.z}) * wxy * wyz);
  }
  NeumaierSumC wxz_acc;
  for (std::size_t j = 0; j < ux.size(); ++j) wxz_acc.add(ux[j] * std::conj(uz[j]));
  const cplx wxz = wxz_acc.value();
  const double E = b.p * (b.geom.potential(x) + b.geom.potential(z));
  // |I - W| e^E / (1 + |W| e^E)  ==  |I - W| / (e^{-E} + |W|), overflow-safe.
  return std::abs(integral.value() - wxz) / (std::exp(-E) + std::abs(wxz));
}

}  // namespace bergman
