#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "bergman/sections.hpp"

using namespace bergman;

namespace {

// --- independent oracles -----------------------------------------------

// Fock norms by 1-D radial Gauss-Legendre: 2 pi int r^{2m+1} e^{-p pi r^2} dr.
double fock_norm_oracle(int p, int m) {
  std::vector<double> x, w;
  gauss_legendre(600, x, w);
  double R = std::sqrt((2.0 * m + 60.0 + 10.0 * std::sqrt(m + 1.0)) / (p * kPi)) + 2.0;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = 0.5 * R * (x[i] + 1.0);
    s += 0.5 * R * w[i] * std::pow(r, 2 * m + 1) * std::exp(-p * kPi * r * r);
  }
  return 2.0 * kPi * s;
}

// CP^1 norms: Beta integral m!(p-m)!/(p+1)!.
double cp1_norm_oracle(int p, int m) {
  return std::exp(std::lgamma(m + 1.0) + std::lgamma(p - m + 1.0) - std::lgamma(p + 2.0));
}

// Theta norms by Gaussian sums: after the exact angular integral the norm is
// int_0^1 sum_m exp(-2 pi p Im(tau) (t + m + j/p)^2) dt, evaluated here with
// direct lattice summation and Gauss-Legendre in t.
double theta_norm_oracle(cplx tau, int p, int j) {
  std::vector<double> x, w;
  gauss_legendre(200, x, w);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double t = 0.5 * (x[i] + 1.0);
    double inner = 0.0;
    for (int m = -40; m <= 40; ++m) {
      double a = t + m + static_cast<double>(j) / p;
      inner += std::exp(-2.0 * kPi * p * tau.imag() * a * a);
    }
    s += 0.5 * w[i] * inner;
  }
  return s;
}

// Closed-form kernels (normalized magnitude), used as oracles only.
double fock_kernel_oracle(int p, cplx z, cplx w) {
  return p * std::exp(-0.5 * p * kPi * std::norm(z - w));
}
double cp1_kernel_oracle(int p, cplx z, cplx w) {
  double t = std::abs(1.0 + z * std::conj(w)) /
             std::sqrt((1.0 + std::norm(z)) * (1.0 + std::norm(w)));
  return (p + 1.0) * std::pow(t, p);
}
double disc_kernel_oracle(int p, cplx z, cplx w) {
  double c2 = std::norm(1.0 - z * std::conj(w)) /
              ((1.0 - std::norm(z)) * (1.0 - std::norm(w)));
  return (p - 0.5) * std::pow(c2, -static_cast<double>(p));
}

// Direct-summation Poisson tail oracle for the Fock truncation rule.
int fock_truncation_oracle(int p, double R, double tol) {
  double lam = p * kPi * R * R;
  for (int M = 0; M < 100000; ++M) {
    double tail = 0.0;
    for (int m = M + 1; m < M + 4000; ++m) {
      double lt = std::log(static_cast<double>(p)) - lam + m * std::log(lam) -
                  std::lgamma(m + 1.0);
      tail += std::exp(lt);
      if (m > lam && std::exp(lt) < tail * 1e-18) break;
    }
    if (tail < tol) return M;
  }
  return -1;
}

}  // namespace

TEST_CASE("basis dimensions") {
  CHECK(build_basis(ModelGeometry::projective_line(), 5, 1e-10).size() == 6);
  CHECK(build_basis(ModelGeometry::flat_torus(cplx(0, 1)), 4, 1e-10).size() == 4);
  CHECK_THROWS_AS(build_basis(ModelGeometry::fock(), 0, 1e-10), Error);
}

TEST_CASE("fock truncation matches the Poisson-tail oracle") {
  auto b = build_basis(ModelGeometry::fock(3.0), 4, 1e-10);
  int M_oracle = fock_truncation_oracle(4, 3.0, 1e-10);
  CHECK(b.truncation == M_oracle);
  // smaller tolerance, larger degree
  auto b2 = build_basis(ModelGeometry::fock(3.0), 4, 1e-14);
  CHECK(b2.truncation > b.truncation);
}

TEST_CASE("closed-form norms agree with independent oracles") {
  for (int m : {0, 1, 3, 7}) {
    CHECK(std::exp(closed_form_log_norm(
              build_basis(ModelGeometry::fock(2.0), 3, 1e-8), m)) ==
          doctest::Approx(fock_norm_oracle(3, m)).epsilon(1e-11));
    CHECK(std::exp(closed_form_log_norm(
              build_basis(ModelGeometry::projective_line(), 8, 1e-8), m)) ==
          doctest::Approx(cp1_norm_oracle(8, m)).epsilon(1e-13));
  }
  for (int j : {0, 1, 2}) {
    cplx tau(0.3, 1.2);
    auto b = build_basis(ModelGeometry::flat_torus(tau), 3, 1e-8);
    CHECK(std::exp(closed_form_log_norm(b, j)) ==
          doctest::Approx(theta_norm_oracle(tau, 3, j)).epsilon(1e-12));
    CHECK(std::exp(closed_form_log_norm(b, j)) ==
          doctest::Approx(1.0 / std::sqrt(2.0 * 3 * tau.imag())).epsilon(1e-12));
  }
}

TEST_CASE("theta elements satisfy the level-p automorphy modulus law") {
  cplx tau(0.4, 0.9);
  auto g = ModelGeometry::flat_torus(tau);
  auto b = build_basis(g, 5, 1e-8);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> v0, v1;
  for (int i = 0; i < 25; ++i) {
    cplx z(u(rng), u(rng));
    // |theta(z+gamma)| e^{-p phi(z+gamma)} == |theta(z)| e^{-p phi(z)}
    for (cplx gamma : {cplx(1, 0), tau, cplx(2, 0) + tau, -tau}) {
      weighted_raw_values(b, z, v0);
      weighted_raw_values(b, z + gamma, v1);
      for (std::size_t j = 0; j < v0.size(); ++j)
        CHECK(std::abs(v1[j]) == doctest::Approx(std::abs(v0[j])).epsilon(1e-10));
    }
  }
}

TEST_CASE("quadrature gram equals the closed forms (fast-path equivalence)") {
  SUBCASE("fock") {
    auto g = ModelGeometry::fock(1.5);
    auto basis = build_basis(g, 2, 1e-8);
    auto G = assemble_gram(basis, build_rule(g, 2 * basis.truncation, 2));
    for (int m = 0; m <= basis.truncation; ++m) {
      double closed = std::exp(closed_form_log_norm(basis, m));
      CHECK(G(m, m).real() == doctest::Approx(closed).epsilon(1e-10));
    }
    double scale = G.diagonal().real().maxCoeff();
    for (int i = 0; i < G.rows(); ++i)
      for (int j = 0; j < i; ++j) CHECK(std::abs(G(i, j)) < 1e-12 * scale);
  }
  SUBCASE("cp1 diagonal by angular orthogonality") {
    auto g = ModelGeometry::projective_line();
    auto basis = build_basis(g, 5, 1e-8);
    auto G = assemble_gram(basis, build_rule(g, 2 * basis.truncation, 5));
    double scale = G.diagonal().real().maxCoeff();
    for (int m = 0; m <= 5; ++m)
      CHECK(G(m, m).real() == doctest::Approx(cp1_norm_oracle(5, m)).epsilon(1e-12));
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < i; ++j) CHECK(std::abs(G(i, j)) < 1e-13 * scale);
  }
  SUBCASE("torus theta gram diagonal within 1e-10") {
    cplx tau(0.5, 1.0);
    auto g = ModelGeometry::flat_torus(tau);
    auto basis = build_basis(g, 4, 1e-8);
    auto G = assemble_gram(basis, build_rule(g, 16 * 4 + 64, 4));
    double scale = G.diagonal().real().maxCoeff();
    for (int j = 0; j < 4; ++j)
      CHECK(G(j, j).real() ==
            doctest::Approx(std::exp(closed_form_log_norm(basis, j))).epsilon(1e-10));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < i; ++j) CHECK(std::abs(G(i, j)) < 1e-10 * scale);
  }
  SUBCASE("poincare disc") {
    auto g = ModelGeometry::poincare_disc(0.6);
    auto basis = build_basis(g, 2, 1e-8);
    auto G = assemble_gram(basis, build_rule(g, 2 * basis.truncation, 2));
    for (int m = 0; m <= std::min(basis.truncation, 10); ++m) {
      double closed = std::exp(closed_form_log_norm(basis, m));
      CHECK(G(m, m).real() == doctest::Approx(closed).epsilon(1e-10));
    }
  }
}

TEST_CASE("gram convergence gate passes on a sane basis") {
  auto g = ModelGeometry::projective_line();
  auto basis = build_basis(g, 4, 1e-8);
  CHECK_NOTHROW(assemble_gram_gated(basis, 2 * basis.truncation));
}

TEST_CASE("gram positivity for random coefficient vectors") {
  auto g = ModelGeometry::projective_line();
  auto basis = build_basis(g, 6, 1e-8);
  auto G = assemble_gram(basis, build_rule(g, 12, 6));
  std::mt19937_64 rng(29);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXcd v(G.rows());
    for (int i = 0; i < v.size(); ++i) v[i] = cplx(n01(rng), n01(rng));
    double q = (v.adjoint() * G * v)(0, 0).real();
    CHECK(q >= -1e-12 * G.diagonal().real().maxCoeff());
  }
}

TEST_CASE("orthonormalize whitening") {
  SectionBasis dummy = build_basis(ModelGeometry::projective_line(), 9, 1e-8);
  SUBCASE("identity gram") {
    auto onb = orthonormalize(dummy, Eigen::MatrixXcd::Identity(10, 10));
    CHECK((onb.transform - Eigen::MatrixXcd::Identity(10, 10)).cwiseAbs().maxCoeff() <
          1e-12);
  }
  SUBCASE("diagonal whitening up to column phase") {
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(2, 2);
    G(0, 0) = 4.0;
    G(1, 1) = 1.0;
    auto onb = orthonormalize(dummy, G);
    Eigen::MatrixXcd T = onb.transform;
    // columns may come in either order / phase; check T^H G T = I and the
    // magnitudes {1/2, 1} appear.
    CHECK((T.adjoint() * G * T - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff() <
          1e-13);
    std::vector<double> mags = {std::abs(T.col(0).cwiseAbs().maxCoeff()),
                                std::abs(T.col(1).cwiseAbs().maxCoeff())};
    std::sort(mags.begin(), mags.end());
    CHECK(mags[0] == doctest::Approx(0.5));
    CHECK(mags[1] == doctest::Approx(1.0));
  }
  SUBCASE("random PSD 10x10") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n01;
    Eigen::MatrixXcd A(10, 10);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) A(i, j) = cplx(n01(rng), n01(rng));
    Eigen::MatrixXcd G = A * A.adjoint() + 1e-6 * Eigen::MatrixXcd::Identity(10, 10);
    auto onb = orthonormalize(dummy, G);
    CHECK((onb.transform.adjoint() * G * onb.transform -
           Eigen::MatrixXcd::Identity(onb.transform.cols(), onb.transform.cols()))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
  SUBCASE("empty space error") {
    CHECK_THROWS_AS(orthonormalize(dummy, Eigen::MatrixXcd::Zero(3, 3)), Error);
  }
  SUBCASE("rank-revealing drop") {
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(3, 3);
    G(0, 0) = 1.0;
    G(1, 1) = 1.0;
    G(2, 2) = 1e-15;
    auto onb = orthonormalize(dummy, G, 1e-12);
    CHECK(onb.dropped == 1);
    CHECK(onb.count() == 2);
  }
}

TEST_CASE("kernel closed-form oracles") {
  SUBCASE("fock p=4 density and gaussian profile") {
    auto ev = KernelEvaluator::closed_form(ModelGeometry::fock(2.5), 4, 1e-14);
    CHECK(ev.eval_kernel({cplx(0, 0)}, {cplx(0, 0)}).norm_mag ==
          doctest::Approx(4.0).epsilon(1e-12));
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int i = 0; i < 40; ++i) {
      cplx z(u(rng), u(rng)), w(u(rng), u(rng));
      double got = ev.eval_kernel({z}, {w}).norm_mag;
      CHECK(got == doctest::Approx(fock_kernel_oracle(4, z, w)).epsilon(1e-10));
    }
  }
  SUBCASE("fock p=16 deep-cancellation pair hits the oracle") {
    auto ev = KernelEvaluator::closed_form(ModelGeometry::fock(2.0), 16, 1e-300);
    cplx z(2.0, 0.0), w(-2.0, 0.0);
    double got = ev.eval_kernel({z}, {w}).norm_mag;
    double expect = fock_kernel_oracle(16, z, w);
    CHECK(got == doctest::Approx(expect).epsilon(1e-8));
    // and a moderately separated pair just above the precision switch
    cplx a(1.1, 0.3), b(-0.4, -0.6);
    CHECK(ev.eval_kernel({a}, {b}).norm_mag ==
          doctest::Approx(fock_kernel_oracle(16, a, b)).epsilon(1e-9));
  }
  SUBCASE("cp1 and disc densities are the closed constants") {
    auto cp = KernelEvaluator::closed_form(ModelGeometry::projective_line(), 8);
    for (cplx z : {cplx(0, 0), cplx(0.5, 0.2), cplx(-1.4, 0.3), cplx(2, -2), cplx(0, 1.7)})
      CHECK(cp.density({z}) == doctest::Approx(9.0).epsilon(1e-10));
    auto dc = KernelEvaluator::closed_form(ModelGeometry::poincare_disc(), 4);
    for (cplx z : {cplx(0, 0), cplx(0.3, -0.4), cplx(-0.7, 0.2)})
      CHECK(dc.density({z}) == doctest::Approx(3.5).epsilon(1e-10));
  }
  SUBCASE("cp1/disc normalized magnitudes match closed forms") {
    auto cp = KernelEvaluator::closed_form(ModelGeometry::projective_line(), 6);
    auto dc = KernelEvaluator::closed_form(ModelGeometry::poincare_disc(), 5, 1e-13);
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (int i = 0; i < 30; ++i) {
      cplx z(u(rng), u(rng)), w(u(rng), u(rng));
      CHECK(cp.eval_kernel({z}, {w}).norm_mag ==
            doctest::Approx(cp1_kernel_oracle(6, z, w)).epsilon(1e-9));
      CHECK(dc.eval_kernel({z}, {w}).norm_mag ==
            doctest::Approx(disc_kernel_oracle(5, z, w)).epsilon(1e-9));
    }
  }
}

TEST_CASE("kernel hermiticity and Cauchy-Schwarz") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  std::vector<KernelEvaluator> evs;
  evs.push_back(KernelEvaluator::closed_form(ModelGeometry::fock(2.0), 6));
  evs.push_back(KernelEvaluator::closed_form(ModelGeometry::projective_line(), 7));
  evs.push_back(KernelEvaluator::closed_form(ModelGeometry::flat_torus(cplx(0.2, 1.1)), 5));
  evs.push_back(KernelEvaluator::closed_form(ModelGeometry::poincare_disc(), 3));
  for (const auto& ev : evs) {
    for (int i = 0; i < 25; ++i) {
      cplx z(u(rng), u(rng)), w(u(rng), u(rng));
      auto k1 = ev.eval_kernel({z}, {w});
      auto k2 = ev.eval_kernel({w}, {z});
      CHECK(std::abs(k1.raw - std::conj(k2.raw)) <=
            1e-12 * (1.0 + std::abs(k1.raw)));
      CHECK(k1.norm_mag * k1.norm_mag <=
            ev.density({z}) * ev.density({w}) * (1.0 + 1e-10));
    }
    // diagonal values are real positive
    auto kd = ev.eval_kernel({cplx(0.1, 0.2)}, {cplx(0.1, 0.2)});
    CHECK(kd.norm_mag > 0.0);
    CHECK(std::abs(kd.raw.imag()) <= 1e-12 * kd.raw.real());
  }
}

TEST_CASE("torus density: lattice-shift invariance and integral = dim") {
  cplx tau(0, 1);
  auto g = ModelGeometry::flat_torus(tau);
  auto ev = KernelEvaluator::closed_form(g, 6);
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    cplx z = cplx(u(rng), 0) + cplx(u(rng), 0) * tau;
    double d0 = ev.density({z});
    CHECK(ev.density({z + 1.0}) == doctest::Approx(d0).epsilon(1e-10));
    CHECK(ev.density({z + tau}) == doctest::Approx(d0).epsilon(1e-10));
  }
  auto rule = torus_rule(tau, 96);
  cplx total = integrate(rule, [&](cplx z) {
    return cplx(ev.density({z}) * g.volume_density({z}), 0);
  });
  CHECK(total.real() == doctest::Approx(6.0).epsilon(1e-8));
  // Pointwise the density is p only up to an exponentially small theta
  // correction (about 3e-4 relative at p = 6); the integral above is the
  // sharp statement.
  CHECK(ev.density({cplx(0, 0)}) == doctest::Approx(6.0).epsilon(2e-3));
}

TEST_CASE("reproducing property") {
  SUBCASE("cp1 p=4") {
    auto g = ModelGeometry::projective_line();
    auto ev = KernelEvaluator::closed_form(g, 4);
    auto rule = build_rule(g, 16, 4);
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int i = 0; i < 10; ++i) {
      Point x{cplx(u(rng), u(rng))}, z{cplx(u(rng), u(rng))};
      CHECK(ev.reproducing_check(rule, x, z) < 1e-6);
    }
  }
  SUBCASE("torus p=5 including x=z=0") {
    auto g = ModelGeometry::flat_torus(cplx(0, 1));
    auto ev = KernelEvaluator::closed_form(g, 5);
    auto rule = build_rule(g, 16 * 5 + 64, 5);
    CHECK(ev.reproducing_check(rule, {cplx(0, 0)}, {cplx(0, 0)}) < 1e-6);
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10; ++i) {
      Point x{cplx(u(rng), u(rng))}, z{cplx(u(rng), u(rng))};
      CHECK(ev.reproducing_check(rule, x, z) < 1e-6);
    }
  }
  SUBCASE("fock p=2 with a mass-covering rule") {
    auto g = ModelGeometry::fock(1.5);
    auto ev = KernelEvaluator::closed_form(g, 2, 1e-10);
    auto rule = build_rule(g, 2 * ev.onb().basis.truncation, 2);
    CHECK(ev.reproducing_check(rule, {cplx(0.4, 0.1)}, {cplx(-0.2, 0.5)}) < 1e-6);
    // insufficient rule radius must raise the accuracy error
    auto small_rule = disc_rule(1.0, 2 * ev.onb().basis.truncation);
    CHECK_THROWS_AS(ev.reproducing_check(small_rule, {cplx(0, 0)}, {cplx(0, 0)}), Error);
  }
}

TEST_CASE("gram assembly is bit-stable across thread counts") {
  auto g = ModelGeometry::projective_line();
  auto basis = build_basis(g, 6, 1e-8);
  auto rule = build_rule(g, 12, 6);
  setenv("BERGMAN_THREADS", "1", 1);
  auto G1 = assemble_gram(basis, rule);
  setenv("BERGMAN_THREADS", "3", 1);
  auto G3 = assemble_gram(basis, rule);
  unsetenv("BERGMAN_THREADS");
  CHECK((G1 - G3).cwiseAbs().maxCoeff() == 0.0);
}
