#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bergman/common.hpp"
#include "bergman/geometry.hpp"
#include "bergman/quadrature.hpp"

namespace bergman {

// Finite basis of chart-holomorphic L^2 sections of the p-th power:
// monomials z^m (Fock, CP^1, Poincare disc) or level-p theta
// characteristics theta_{j,p} (flat torus).
struct SectionBasis {
  ModelGeometry geom = ModelGeometry::fock();
  int p = 1;
  int truncation = 0;   // max monomial degree; p-1 for the theta basis
  std::size_t size() const {
    return geom.kind() == ModelKind::FlatTorus
               ? static_cast<std::size_t>(p)
               : static_cast<std::size_t>(truncation) + 1;
  }
};

// Compact models return the full space (dim p+1 on CP^1, p on the torus).
// Non-compact models truncate at the smallest degree M whose omitted
// contribution to the normalized kernel on the evaluation domain stays
// below tail_tol; the Poisson / ratio-geometric tail bounds are evaluated
// in log space so tolerances down to 1e-300 are meaningful.
SectionBasis build_basis(const ModelGeometry& geom, int p, double tail_tol);

// log ||f_m||^2 from the one-dimensional radial closed forms:
//   Fock  m!/(p^{m+1} pi^m),   CP^1  m!(p-m)!/(p+1)!,
//   disc  2 m! G(2p-1)/G(2p+m),   torus  (2 p Im tau)^{-1/2} for every j.
double closed_form_log_norm(const SectionBasis& basis, int m);

// h-weighted element values f_k(z) e^{-p phi(z)} and chart-derivative
// values f_k'(z) e^{-p phi(z)}; stable for any chart point (evaluated in
// log scale for monomials, term-by-term with a relative 1e-18 cutoff for
// the theta series).
void weighted_raw_values(const SectionBasis& b, cplx z, std::vector<cplx>& out);
void weighted_raw_derivs(const SectionBasis& b, cplx z, std::vector<cplx>& out);

// Gram matrix G[j][k] = int f_j conj(f_k) e^{-2 p phi} dv through a
// quadrature rule; Hermitian by construction.
Eigen::MatrixXcd assemble_gram(const SectionBasis& basis, const QuadratureRule& rule);

// Convergence gate: assemble at the rule's degree and at twice that degree
// and require every entry to move by less than 1e-10 relative.
Eigen::MatrixXcd assemble_gram_gated(const SectionBasis& basis, int degree);

struct OrthonormalBasis {
  SectionBasis basis;
  bool diagonal = false;             // closed-form diagonal Gram fast path
  std::vector<double> log_norms;     // diagonal: transform = diag(exp(-log_norms/2))
  Eigen::MatrixXcd transform;        // generic: columns map raw -> orthonormal
  double gram_condition = 1.0;
  int dropped = 0;

  std::size_t count() const {
    return diagonal ? basis.size() : static_cast<std::size_t>(transform.cols());
  }
};

// Eigendecomposition-based whitening; eigenvalues below drop_tol times the
// largest are dropped and reported.
OrthonormalBasis orthonormalize(const SectionBasis& basis, const Eigen::MatrixXcd& gram,
                                double drop_tol = 1e-12);

OrthonormalBasis closed_form_onb(const SectionBasis& basis);

struct KernelValue {
  cplx raw;               // chart-trivialization value sum_j s_j(x) conj(s_j(y))
  double norm_mag;        // |P_p(x,y)| e^{-p(phi(x)+phi(y))}, the h-norm
};

class KernelEvaluator {
 public:
  explicit KernelEvaluator(OrthonormalBasis onb) : onb_(std::move(onb)) {}

  static KernelEvaluator closed_form(const ModelGeometry& geom, int p,
                                     double tail_tol = 1e-12);

  const ModelGeometry& geom() const { return onb_.basis.geom; }
  int p() const { return onb_.basis.p; }
  const OrthonormalBasis& onb() const { return onb_; }

  // Orthonormal h-weighted section values u_j(z) = s_j(z) e^{-p phi(z)}
  // (and chart-derivative companions).
  void weighted_sections(cplx z, std::vector<cplx>& out) const;
  void weighted_section_derivs(cplx z, std::vector<cplx>& out) const;

  KernelValue eval_kernel(Point x, Point y) const;
  double density(Point x) const;

  // |int P(x,y) P(y,z) e^{-2 p phi(y)} dv(y) - P(x,z)| / (1 + |P(x,z)|).
  double reproducing_check(const QuadratureRule& rule, Point x, Point z) const;

 private:
  KernelValue eval_diag_double(cplx x, cplx y) const;
  KernelValue eval_diag_mpfr(cplx x, cplx y, double loss_digits) const;
  double cancellation_digits(cplx x, cplx y) const;

  OrthonormalBasis onb_;
};

}  // namespace bergman
