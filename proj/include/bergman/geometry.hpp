#pragma once

#include <string>

#include "bergman/common.hpp"

namespace bergman {

// The four model surfaces.  Conventions (derived in docs/models.md):
// the line bundle carries the weight e^{-2*phi} in the fixed chart, the
// curvature form of the weight is 2*d d-bar phi, and the area form is
// normalized so that curvature = 2*pi * area form.  This pins the metric
// density lambda(z) = (2/pi) * phi_{z zbar}(z), the distance, and the
// curvature constants below.
enum class ModelKind { Fock, ProjectiveLine, FlatTorus, PoincareDisc };

struct Point {
  cplx z;
};

struct CurvatureData {
  double mu0;              // infimum curvature eigenvalue (2*pi on all models)
  double det_rl_over_2pi;  // determinant of the curvature endomorphism / 2pi
  double epsilon_lower;    // largest epsilon with curvature >= epsilon * metric
};

class ModelGeometry {
 public:
  static ModelGeometry fock(double chart_bound = 3.0);
  static ModelGeometry projective_line();
  static ModelGeometry flat_torus(cplx tau);
  static ModelGeometry poincare_disc(double chart_bound = 0.95);

  ModelKind kind() const { return kind_; }
  cplx tau() const { return tau_; }
  double chart_bound() const { return chart_bound_; }
  bool compact() const {
    return kind_ == ModelKind::ProjectiveLine || kind_ == ModelKind::FlatTorus;
  }
  std::string name() const;

  // Chart membership; throws Error(Domain) when enforced by callers.
  bool in_chart(Point x) const;
  void require_in_chart(Point x) const;

  // Weight exponent phi(z):  Fock pi|z|^2/2,  CP^1 log(1+|z|^2)/2,
  // torus pi (Im z)^2 / Im tau,  disc -log(1-|z|^2).
  double potential(Point x) const;

  // Geodesic distance of the metric lambda |dz|^2 (see docs/models.md for
  // the closed forms: Euclidean, great-circle on the radius-1/(2 sqrt(pi))
  // sphere, flat quotient minimum, scaled hyperbolic).
  double distance(Point x, Point y) const;

  // Density of the Riemannian volume form against Lebesgue dx dy.
  double volume_density(Point x) const;

  CurvatureData curvature_constants() const;

  // Torus helpers.
  Point reduce_to_fundamental(Point x) const;  // {s + t*tau : s,t in [0,1)}
  double lattice_norm(cplx gamma) const;       // metric length of a lattice vector
  double injectivity_radius() const;           // torus: half the shortest lattice vector

 private:
  ModelGeometry(ModelKind k, cplx tau, double cb)
      : kind_(k), tau_(tau), chart_bound_(cb) {}

  ModelKind kind_;
  cplx tau_;
  double chart_bound_;
};

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);

}  // namespace bergman
