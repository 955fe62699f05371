#include "bergman/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace bergman {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev-based initial guess, then Newton on P_n.
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double p0, p1, dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1.0;
      p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

double log_gamma_tail_q(double a, double x) {
  // log Q(a,x).  Continued fraction for x > a+1, otherwise via the series
  // for the lower function P(a,x) = 1 - Q(a,x).
  if (x <= 0) return 0.0;
  double lg = std::lgamma(a);
  if (x > a + 1.0) {
    // Lentz continued fraction for Gamma(a,x)*e^{x}*x^{-a}... standard form.
    double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 400; ++i) {
      double an = -i * (i - a);
      b += 2.0;
      d = an * d + b;
      if (std::abs(d) < tiny) d = tiny;
      c = b + an / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1.0 / d;
      double del = d * c;
      h *= del;
      if (std::abs(del - 1.0) < 1e-16) break;
    }
    return -x + a * std::log(x) - lg + std::log(h);
  }
  // Series for P, then log(1-P); guard P -> 1.
  double ap = a, sum = 1.0 / a, del = sum;
  for (int i = 0; i < 2000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-17) break;
  }
  double logp = -x + a * std::log(x) - lg + std::log(sum);
  if (logp > -1e-16) return -745.0;  // Q underflows
  double p = std::exp(logp);
  return p < 1.0 ? std::log1p(-p) : -745.0;
}

double gaussian_tail_radius(int m, double c, double tol) {
  double a = m + 1.0;
  double logtol = std::log(tol);
  double lo = a / c, hi = (a + 60.0 * std::sqrt(a) + 800.0) / c;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (log_gamma_tail_q(a, c * mid) < logtol)
      hi = mid;
    else
      lo = mid;
    if (hi - lo < 1e-12 * hi) break;
  }
  return std::sqrt(hi);
}

static QuadratureRule radial_rule(QuadDomain dom, double u0, double u1,
                                  int degree, int radial_extra) {
  QuadratureRule rule;
  rule.domain = dom;
  rule.degree = degree;
  rule.r0 = std::sqrt(u0);
  rule.r1 = std::sqrt(u1);
  int nr = degree / 2 + 2 + radial_extra;
  int na = degree + 8;
  std::vector<double> gx, gw;
  gauss_legendre(nr, gx, gw);
  rule.nodes.reserve(static_cast<std::size_t>(nr) * na);
  for (int i = 0; i < nr; ++i) {
    double u = 0.5 * (u1 + u0) + 0.5 * (u1 - u0) * gx[i];
    double wu = 0.5 * (u1 - u0) * gw[i];
    double r = std::sqrt(u);
    for (int k = 0; k < na; ++k) {
      double th = 2.0 * kPi * k / na;
      // dx dy = r dr dtheta = (1/2) du dtheta
      rule.nodes.push_back({cplx(r * std::cos(th), r * std::sin(th)),
                            0.5 * wu * (2.0 * kPi / na)});
    }
  }
  return rule;
}

QuadratureRule disc_rule(double radius, int degree, int radial_extra) {
  if (radius <= 0 || degree < 0) fail(ErrorKind::Config, "disc_rule: bad arguments");
  return radial_rule(QuadDomain::Disc, 0.0, radius * radius, degree, radial_extra);
}

QuadratureRule annulus_rule(double r0, double r1, int degree) {
  if (!(0 <= r0 && r0 < r1)) fail(ErrorKind::Config, "annulus_rule: need 0 <= r0 < r1");
  return radial_rule(QuadDomain::Annulus, r0 * r0, r1 * r1, degree, 0);
}

QuadratureRule torus_rule(cplx tau, int degree) {
  if (!(tau.imag() > 0)) fail(ErrorKind::Config, "torus_rule: Im(tau) must be > 0");
  QuadratureRule rule;
  rule.domain = QuadDomain::TorusFD;
  rule.degree = degree;
  rule.tau = tau;
  int n = std::max(degree + 1, 16);
  rule.nodes.reserve(static_cast<std::size_t>(n) * n);
  double w = tau.imag() / (static_cast<double>(n) * n);  // Lebesgue cell area / N^2
  for (int i = 0; i < n; ++i) {
    double s = (i + 0.5) / n;
    for (int j = 0; j < n; ++j) {
      double t = (j + 0.5) / n;
      rule.nodes.push_back({cplx(s, 0) + cplx(t, 0) * tau, w});
    }
  }
  return rule;
}

static QuadratureRule proj_chart_rule(int degree) {
  // Substitution w = r^2/(1+r^2):  t^m (1+t)^{-p-2} dt  ->  w^m (1-w)^{p-m} dw,
  // a polynomial of degree p for every Gram entry, so Gauss-Legendre in w is
  // exact for the whole monomial/Fubini-Study class.
  QuadratureRule rule;
  rule.domain = QuadDomain::ProjChart;
  rule.degree = degree;
  int nr = degree + 4;
  int na = degree + 8;
  std::vector<double> gx, gw;
  gauss_legendre(nr, gx, gw);
  rule.nodes.reserve(static_cast<std::size_t>(nr) * na);
  for (int i = 0; i < nr; ++i) {
    double w = 0.5 + 0.5 * gx[i];
    double dw = 0.5 * gw[i];
    double one_minus = 1.0 - w;
    double r = std::sqrt(w / one_minus);
    // dx dy = (1/2) dt dtheta with t = r^2 = w/(1-w), dt = dw/(1-w)^2.
    double wt = 0.5 * dw / (one_minus * one_minus);
    for (int k = 0; k < na; ++k) {
      double th = 2.0 * kPi * k / na;
      rule.nodes.push_back({cplx(r * std::cos(th), r * std::sin(th)),
                            wt * (2.0 * kPi / na)});
    }
  }
  return rule;
}

QuadratureRule build_rule(const ModelGeometry& geom, int degree, int p) {
  if (degree < 0) fail(ErrorKind::Config, "build_rule: degree must be >= 0");
  if (p < 1) fail(ErrorKind::Config, "build_rule: p must be >= 1");
  const long long budget = 80'000'000;  // node memory budget
  auto check_budget = [&](long long n) {
    if (n > budget)
      fail(ErrorKind::Resource,
           "build_rule: rule with ~" + std::to_string(n) + " nodes exceeds budget");
  };
  switch (geom.kind()) {
    case ModelKind::Fock: {
      // Radius past the chart bound so that the largest basis integrand
      // r^{degree} e^{-p pi r^2} keeps its tail below 1e-14.
      double c = p * kPi;
      double R = std::max(geom.chart_bound(),
                          gaussian_tail_radius(degree / 2, c, 1e-14));
      // Extra radial points to resolve e^{-p pi r^2} on [0, R^2].
      int extra = static_cast<int>(0.75 * c * R * R) + 16;
      check_budget(static_cast<long long>(degree / 2 + 2 + extra) * (degree + 8));
      return disc_rule(R, degree, extra);
    }
    case ModelKind::ProjectiveLine:
      check_budget(static_cast<long long>(degree + 4) * (degree + 8));
      return proj_chart_rule(degree);
    case ModelKind::FlatTorus: {
      int n = std::max(degree + 1, 16);
      check_budget(static_cast<long long>(n) * n);
      return torus_rule(geom.tau(), degree);
    }
    case ModelKind::PoincareDisc: {
      // The weight (1-r^2)^{2p-2} is polynomial, so Gauss-Legendre in u = r^2
      // is exact once the radius is close enough to 1 that the omitted Beta
      // tail is negligible: (1-R^2)^{2p-1} <= 1e-16.
      double one_minus = std::pow(1e-16, 1.0 / (2.0 * p - 1.0));
      one_minus = std::min(one_minus, 1e-4);
      double R2 = 1.0 - one_minus;
      int extra = 2 * p + 8;
      check_budget(static_cast<long long>(degree / 2 + 2 + extra) * (degree + 8));
      return radial_rule(QuadDomain::Disc, 0.0, R2, degree, extra);
    }
  }
  fail(ErrorKind::Config, "build_rule: unknown geometry");
}

cplx integrate(const QuadratureRule& rule, const std::function<cplx(cplx)>& f) {
  NeumaierSumC acc;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    cplx v = f(rule.nodes[i].z);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      fail(ErrorKind::Numeric,
           "integrate: non-finite integrand at node " + std::to_string(i) +
               " z=(" + std::to_string(rule.nodes[i].z.real()) + "," +
               std::to_string(rule.nodes[i].z.imag()) + ")");
    acc.add(rule.nodes[i].w * v);
  }
  return acc.value();
}

}  // namespace bergman
