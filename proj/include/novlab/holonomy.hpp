#pragma once

// Parametrized holonomy families in tube coordinates over the local Morse
// model: construction of normalized crossing families, recovery of the
// slide invariants (frames, latitudes, holonomic factor, character),
// passage-disc iteration, homoclinic detection, signed incidence counting,
// and the two-parameter doubling sweep.
//
// Families are supported at desk scale: Morse index i = 2 with n in {3, 4},
// so the attaching sphere is a circle and the co-sphere is a circle (n = 4)
// or a point pair (n = 3).

#include <functional>
#include <limits>
#include <string>

#include "novlab/local_model.hpp"
#include "novlab/ring.hpp"

namespace novlab {

struct HolonomyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonGenericError : HolonomyError {
  using HolonomyError::HolonomyError;
};

struct TubeCoord {
  double x = 0.0;
  double y = 0.0;  // unused when the co-sphere is zero-dimensional
  double v = 0.0;
};

struct FamilyParams {
  double a_minus_angle = 0.0;  // angle of phi_0 in the x^- plane
  double a_plus_angle = 0.0;   // angle of psi_0 (n=4); for n=3 use 0 or pi
  double omega_phi = 0.0;
  double omega_psi = 0.5;
  double eta = 1.0;

  static FamilyParams from_json(const nlohmann::json& doc);
};

class HolonomyFamily {
 public:
  const MorseModelConfig& config() const { return cfg_; }
  const FamilyParams& params() const { return params_; }

  ModelPoint a_minus() const;
  ModelPoint a_plus() const;
  double chart_radius() const { return chart_radius_; }
  double s_max() const { return 0.1 * chart_radius_; }
  int co_sphere_dim() const { return cfg_.n - cfg_.i - 1; }

  std::optional<TubeCoord> chart_minus(const ModelPoint& p) const;
  ModelPoint chart_minus_inv(const TubeCoord& tc) const;
  std::optional<TubeCoord> chart_plus(const ModelPoint& p) const;
  ModelPoint chart_plus_inv(const TubeCoord& tc) const;

  // The geometric images of the unit v-vector of each chart.
  ModelPoint tube_v_minus() const;
  ModelPoint tube_v_plus() const;

  std::optional<ModelPoint> evaluate_holonomy(double s, const ModelPoint& p) const;
  std::optional<ModelPoint> inverse_holonomy(double s, const ModelPoint& p) const;

  // Attaching-sphere point at signed angle offset alpha from a^-.
  ModelPoint sigma_minus_point(double alpha) const;
  // Co-sphere point at offset beta from a^+ (beta ignored when n = 3).
  ModelPoint sigma_plus_point(double beta) const;
  // Signed angle from phi_0 to the phi-direction of a bottom-boundary point.
  double phi_offset(const ModelPoint& p) const;

  // Same charts and frames with a^- moved along the attaching sphere so that
  // its phi-latitude becomes omega_new.
  HolonomyFamily with_base_latitude(double omega_new) const;

  // Internal frame accessors (construction data, used by tests and the
  // incidence counter's genericity checks).
  const Eigen::Vector2d& nu_phi() const { return nu_phi_; }
  const Eigen::VectorXd& nu_psi() const { return nu_psi_; }

 private:
  friend HolonomyFamily make_elementary_family(const MorseModelConfig&, const FamilyParams&);
  MorseModelConfig cfg_;
  FamilyParams params_;
  Eigen::Vector2d phi0_;
  Eigen::VectorXd psi0_;    // dim n-i
  Eigen::Vector2d nu_phi_;  // pole of the phi-latitude frame
  Eigen::Vector2d tau_;     // spans the preferred hyperplane in the x^- plane
  Eigen::VectorXd nu_psi_;  // pole of the psi-latitude frame, dim n-i
  Eigen::VectorXd w_;       // spans the psi hyperplane (n = 4 only)
  double eta_ = 1.0;
  double chart_radius_ = 0.3;
};

HolonomyFamily make_elementary_family(const MorseModelConfig& cfg, const FamilyParams& params);

struct SelfSlideInvariants {
  ModelPoint a_minus;
  ModelPoint a_plus;
  Eigen::Vector2d nu_phi;   // recovered pole in the x^- plane
  Eigen::VectorXd nu_psi;   // recovered pole in the x^+ plane
  double omega_phi = 0.0;
  double omega_psi = 0.0;
  double eta = 1.0;
  double chi = 0.0;
  std::string label;
  bool marginal = false;
};

SelfSlideInvariants compute_invariants(const HolonomyFamily& f);

struct CloudSample {
  double param = 0.0;  // attaching-sphere angle offset it descends from
  ModelPoint point;
};

struct DiscCloud {
  int passage = 0;                                   // k for C_k
  std::vector<CloudSample> samples;                  // points on the bottom boundary
  std::vector<std::pair<double, double>> intervals;  // valid parameter ranges
  int orientation_sign = 0;                          // vs. the attaching sphere; 0 if unknown
};

struct PassageOptions {
  int scan_samples = 512;
  int cloud_samples = 257;
};

// C_1 .. C_k_max; iteration stops early at the first empty cloud.
std::vector<DiscCloud> passage_discs(const HolonomyFamily& f, double s, int k_max,
                                     const PassageOptions& opts = {});

struct IntersectionRecord {
  double param = 0.0;  // attaching-sphere parameter of the crossing
  int power = 2;       // homotopy class g^power
  int sign = 0;
  double v_gap = 0.0;
};

// Matched-projection candidates between C_k(s) and the stable-disc trace
// H_s^{-1}(Sigma^+) at the bottom boundary; v_gap = 0 marks a g^{k+1} orbit.
std::vector<IntersectionRecord> matched_gap_candidates(const HolonomyFamily& f, double s, int k,
                                                       const PassageOptions& opts = {});
// Candidates filtered to |v_gap| < v_tol.
std::vector<IntersectionRecord> detect_homoclinic(const HolonomyFamily& f, double s, int k,
                                                  double v_tol = 1e-7,
                                                  const PassageOptions& opts = {});

// d v_1 / ds at s = 0 by one-sided finite differences with Richardson
// extrapolation (v_1 is defined on the side where s * omega_phi > 0).
double v1_dot(const HolonomyFamily& f);

// s-derivatives at 0 of the v-coordinates of H_s(x_s,0,0) and
// H_s^{-1}(0,y_s,0), where x_s (resp. y_s) keeps the image on the x = 0
// (resp. y = 0) slice. Their sum vanishes for a crossing family.
std::pair<double, double> velocity_balance(const HolonomyFamily& f);

// Signed count of intersections of the passage discs with the fixed stable
// disc through the attaching-sphere point at offset b_offset from a^-;
// returns sum_k (count_k) g^k gamma, truncated by ctx.
RingElement count_incidence(const HolonomyFamily& f, double s, double b_offset, int k_max,
                            const Arrow& gamma, const Arrow& g, const TruncationContext& ctx,
                            const PassageOptions& opts = {});

struct SweepCell {
  double s = 0.0;
  double t = 0.0;
  std::string label;       // stratum label when the cell sits on the g-locus
  bool g_detected = false;
  bool g2_adjacent = false;
  bool g3_adjacent = false;
  double gap2 = std::numeric_limits<double>::quiet_NaN();
  double gap3 = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  int grid = 0;
  std::vector<SweepCell> cells;  // row-major, t outer, s inner
  std::string base_label;
};

// Two-parameter sweep around a base family on the character-zero locus;
// the t-direction moves the phi-latitude of a^-.
SweepResult sweep_doubling(const HolonomyFamily& base, std::pair<double, double> s_range,
                           std::pair<double, double> t_range, int grid, int threads = 0);

}  // namespace novlab
