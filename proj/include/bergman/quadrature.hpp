#pragma once

#include <functional>
#include <vector>

#include "bergman/common.hpp"
#include "bergman/geometry.hpp"

namespace bergman {

// Gauss-Legendre nodes/weights on [-1,1] (Newton on the Legendre recurrence).
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

// Target domain of a rule.  All rules carry plain-Lebesgue weights; model
// weights and volume densities are part of the integrand.
//  Disc / Annulus : radial Gauss-Legendre in u = r^2  x  uniform angle grid.
//  TorusFD        : tensor trapezoid over the cell {s + t*tau}, spectrally
//                   accurate for smooth periodic integrands.
//  ProjChart      : full plane through the rational substitution
//                   w = r^2/(1+r^2); exact for monomials against the
//                   Fubini-Study weight class up to the declared degree.
enum class QuadDomain { Disc, Annulus, TorusFD, ProjChart };

struct QuadNode {
  cplx z;
  double w;  // > 0
};

struct QuadratureRule {
  QuadDomain domain;
  int degree = 0;       // declared monomial exactness degree
  double r0 = 0.0;      // annulus inner radius
  double r1 = 0.0;      // disc / annulus outer radius
  cplx tau;             // torus modulus
  std::vector<QuadNode> nodes;
};

// Rule over the chart domain of `geom`, exact (to roundoff) for the
// monomial class of total degree <= degree the domain supports, and
// resolving the weight e^{-2 p phi}.  For Fock the disc radius is enlarged
// past the chart bound until the incomplete-Gamma tail of the largest
// basis integrand drops below 1e-14; for the Poincare model the radius
// approaches 1 until the Beta tail of the weight does the same.
QuadratureRule build_rule(const ModelGeometry& geom, int degree, int p = 1);

QuadratureRule disc_rule(double radius, int degree, int radial_extra = 0);
QuadratureRule annulus_rule(double r0, double r1, int degree);
QuadratureRule torus_rule(cplx tau, int degree);

// Weighted node sum in fixed node order with compensated accumulation.
// Throws Error(Numeric) naming the node when the integrand is non-finite.
cplx integrate(const QuadratureRule& rule, const std::function<cplx(cplx)>& f);

// log of the regularized upper incomplete gamma Q(a,x) = Gamma(a,x)/Gamma(a),
// used by the Fock truncation radius and basis tail bounds.
double log_gamma_tail_q(double a, double x);

// Smallest radius R with Q(m+1, c*R^2) < tol, i.e. the integrand r^{2m} e^{-c r^2}
// keeps all but `tol` of its mass inside radius R.
double gaussian_tail_radius(int m, double c, double tol);

}  // namespace bergman
