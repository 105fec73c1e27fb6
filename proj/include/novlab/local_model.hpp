#pragma once

// The standard local Morse model: quadratic form Q, its linear gradient flow
// in closed form, boundary membership, radial-multispherical coordinates, the
// top-to-bottom descent map, and latitudes relative to a co-oriented
// hyperplane.

#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include <json.hpp>

namespace novlab {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MorseModelConfig {
  int n = 4;
  int i = 2;
  double delta = 1.0;
  double delta_star = 1.0;
  // Points with |x^-| below this distance from the co-sphere never exit
  // through the bottom boundary; descend refuses them.
  double co_sphere_epsilon = 1e-9;

  void validate() const {
    if (n < 2) throw ModelError("model dimension must be >= 2");
    if (i < 1 || i > n - 1) throw ModelError("Morse index must lie in [1, n-1]");
    if (!(delta > 0) || !(delta_star > 0)) throw ModelError("delta and delta_star must be > 0");
  }

  static MorseModelConfig from_json(const nlohmann::json& doc);
};

struct ModelPoint {
  Eigen::VectorXd minus;  // x^- in R^i
  Eigen::VectorXd plus;   // x^+ in R^(n-i)

  ModelPoint() = default;
  ModelPoint(Eigen::VectorXd m, Eigen::VectorXd p) : minus(std::move(m)), plus(std::move(p)) {}
};

struct SphericalCoords {
  Eigen::VectorXd phi;  // unit vector in R^i (direction of x^-)
  double r = 0.0;
  Eigen::VectorXd psi;  // unit vector in R^(n-i) (direction of x^+)
};

double q_value(const ModelPoint& p);
ModelPoint flow(const ModelPoint& p, double t);
bool in_model(const ModelPoint& p, const MorseModelConfig& cfg);

bool on_top_boundary(const ModelPoint& p, const MorseModelConfig& cfg, double tol = 1e-9);
bool on_bottom_boundary(const ModelPoint& p, const MorseModelConfig& cfg, double tol = 1e-9);

// Spherical coordinates on a boundary component; r = |x^-| on the top
// boundary and r = |x^+| on the bottom boundary.
SphericalCoords spherical_top(const ModelPoint& p, const MorseModelConfig& cfg);
SphericalCoords spherical_bottom(const ModelPoint& p, const MorseModelConfig& cfg);

// Boundary points from spherical data.
ModelPoint top_point(const Eigen::VectorXd& phi, double r, const Eigen::VectorXd& psi,
                     const MorseModelConfig& cfg);
ModelPoint bottom_point(const Eigen::VectorXd& phi, double r, const Eigen::VectorXd& psi,
                        const MorseModelConfig& cfg);

// Follows the flow from {Q = +delta_star} to {Q = -delta_star}. Throws
// ModelError for points on (or within co_sphere_epsilon of) the co-sphere.
ModelPoint descend(const ModelPoint& p, const MorseModelConfig& cfg);
// Time at which the descending orbit reaches the bottom boundary.
double descend_exit_time(const ModelPoint& p, const MorseModelConfig& cfg);

struct LatitudeFrame {
  Eigen::VectorXd normal;  // unit normal of the hyperplane; also the north pole

  explicit LatitudeFrame(Eigen::VectorXd nu) : normal(std::move(nu)) {
    if (std::abs(normal.norm() - 1.0) > 1e-12) throw ModelError("latitude normal must be unit");
  }
  Eigen::VectorXd north() const { return normal; }
  Eigen::VectorXd south() const { return -normal; }
};

// Cosine of the polar angle of theta relative to the frame's north pole.
double latitude(const LatitudeFrame& frame, const Eigen::VectorXd& theta);

}  // namespace novlab
