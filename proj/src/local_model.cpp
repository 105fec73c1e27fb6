#include "novlab/local_model.hpp"

#include <cmath>

namespace novlab {

MorseModelConfig MorseModelConfig::from_json(const nlohmann::json& doc) {
  MorseModelConfig cfg;
  cfg.n = doc.at("n").get<int>();
  cfg.i = doc.at("i").get<int>();
  if (doc.contains("delta")) cfg.delta = doc["delta"].get<double>();
  if (doc.contains("delta_star")) cfg.delta_star = doc["delta_star"].get<double>();
  cfg.validate();
  return cfg;
}

double q_value(const ModelPoint& p) { return -p.minus.squaredNorm() + p.plus.squaredNorm(); }

ModelPoint flow(const ModelPoint& p, double t) {
  return ModelPoint(p.minus * std::exp(2.0 * t), p.plus * std::exp(-2.0 * t));
}

bool in_model(const ModelPoint& p, const MorseModelConfig& cfg) {
  double q = q_value(p);
  if (q < -cfg.delta_star || q > cfg.delta_star) return false;
  return p.minus.squaredNorm() * p.plus.squaredNorm() <= cfg.delta * cfg.delta_star;
}

bool on_top_boundary(const ModelPoint& p, const MorseModelConfig& cfg, double tol) {
  return std::abs(q_value(p) - cfg.delta_star) <= tol;
}

bool on_bottom_boundary(const ModelPoint& p, const MorseModelConfig& cfg, double tol) {
  return std::abs(q_value(p) + cfg.delta_star) <= tol;
}

namespace {
Eigen::VectorXd unit_or_throw(const Eigen::VectorXd& v, const char* what) {
  double n = v.norm();
  if (n == 0.0) throw ModelError(std::string("direction undefined: ") + what);
  return v / n;
}
}  // namespace

SphericalCoords spherical_top(const ModelPoint& p, const MorseModelConfig& cfg) {
  if (!on_top_boundary(p, cfg, 1e-7)) throw ModelError("spherical_top: not on the top boundary");
  SphericalCoords sc;
  sc.r = p.minus.norm();
  sc.phi = unit_or_throw(p.minus, "phi on the co-sphere");
  sc.psi = unit_or_throw(p.plus, "psi");
  return sc;
}

SphericalCoords spherical_bottom(const ModelPoint& p, const MorseModelConfig& cfg) {
  if (!on_bottom_boundary(p, cfg, 1e-7))
    throw ModelError("spherical_bottom: not on the bottom boundary");
  SphericalCoords sc;
  sc.r = p.plus.norm();
  sc.phi = unit_or_throw(p.minus, "phi");
  sc.psi = unit_or_throw(p.plus, "psi on the attaching sphere");
  return sc;
}

ModelPoint top_point(const Eigen::VectorXd& phi, double r, const Eigen::VectorXd& psi,
                     const MorseModelConfig& cfg) {
  if (r < 0) throw ModelError("top_point: negative radius");
  return ModelPoint(r * phi, std::sqrt(r * r + cfg.delta_star) * psi);
}

ModelPoint bottom_point(const Eigen::VectorXd& phi, double r, const Eigen::VectorXd& psi,
                        const MorseModelConfig& cfg) {
  if (r < 0) throw ModelError("bottom_point: negative radius");
  return ModelPoint(std::sqrt(r * r + cfg.delta_star) * phi, r * psi);
}

double descend_exit_time(const ModelPoint& p, const MorseModelConfig& cfg) {
  if (!on_top_boundary(p, cfg, 1e-7)) throw ModelError("descend: point not on the top boundary");
  double r2 = p.minus.squaredNorm();
  if (std::sqrt(r2) < cfg.co_sphere_epsilon)
    throw ModelError("descend: point on the co-sphere never exits");
  double b2 = p.plus.squaredNorm();
  // Solve r^2 E^2 - delta_star E - b2 = 0 for E = e^{4t}; the positive root
  // gives the time at which Q reaches -delta_star.
  double ds = cfg.delta_star;
  double E = (ds + std::sqrt(ds * ds + 4.0 * r2 * b2)) / (2.0 * r2);
  return 0.25 * std::log(E);
}

ModelPoint descend(const ModelPoint& p, const MorseModelConfig& cfg) {
  double t = descend_exit_time(p, cfg);
  ModelPoint out = flow(p, t);
  // Re-project exactly onto the bottom boundary to absorb the last bits of
  // floating-point drift: rescale x^- so that Q = -delta_star holds.
  double need = out.plus.squaredNorm() + cfg.delta_star;
  double have = out.minus.squaredNorm();
  if (have > 0) out.minus *= std::sqrt(need / have);
  return out;
}

double latitude(const LatitudeFrame& frame, const Eigen::VectorXd& theta) {
  if (theta.size() != frame.normal.size()) throw ModelError("latitude: dimension mismatch");
  return frame.normal.dot(theta);
}

}  // namespace novlab
