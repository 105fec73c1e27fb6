#include "novlab/holonomy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace novlab {

namespace {

Eigen::Vector2d rot90(const Eigen::Vector2d& u) { return Eigen::Vector2d(-u.y(), u.x()); }

Eigen::Vector2d rotate(const Eigen::Vector2d& u, double th) {
  double c = std::cos(th), s = std::sin(th);
  return Eigen::Vector2d(c * u.x() - s * u.y(), s * u.x() + c * u.y());
}

double signed_angle(const Eigen::Vector2d& from, const Eigen::Vector2d& to) {
  return std::atan2(from.x() * to.y() - from.y() * to.x(), from.dot(to));
}

constexpr double kZeroThreshold = 1e-7;
constexpr double kMarginalBand = 1e-5;

std::string stratum_label(double chi, double om_phi, double om_psi) {
  auto small = [](double x) { return std::abs(x) < kZeroThreshold; };
  if (small(om_phi) && small(om_psi)) return "S_g00";
  if (small(om_psi)) return "phi-axis";
  if (small(om_phi)) return small(chi) ? "S_g0" : "psi-axis";
  if (small(chi)) return om_phi > 0 ? "S_g0+" : "S_g0-";
  return chi > 0 ? "S_g+" : "S_g-";
}

bool near_threshold(double x) {
  double a = std::abs(x);
  return a >= kZeroThreshold && a < kMarginalBand;
}

// Chart images land exactly on a boundary component, where rounding can push
// q_value past delta_star by an ulp; membership is checked with slack.
bool in_model_lenient(const ModelPoint& p, const MorseModelConfig& cfg) {
  double slack = 1e-9 * cfg.delta_star;
  double q = q_value(p);
  if (q < -cfg.delta_star - slack || q > cfg.delta_star + slack) return false;
  return p.minus.squaredNorm() * p.plus.squaredNorm() <=
         cfg.delta * cfg.delta_star + slack * cfg.delta;
}

}  // namespace

FamilyParams FamilyParams::from_json(const nlohmann::json& doc) {
  FamilyParams p;
  auto angle_of = [](const nlohmann::json& v) {
    if (v.is_array()) {
      if (v.size() < 2) return std::atan2(0.0, v[0].get<double>());
      return std::atan2(v[1].get<double>(), v[0].get<double>());
    }
    return v.get<double>();
  };
  if (doc.contains("a_minus")) p.a_minus_angle = angle_of(doc["a_minus"]);
  if (doc.contains("a_plus")) p.a_plus_angle = angle_of(doc["a_plus"]);
  p.omega_phi = doc.at("omega_phi").get<double>();
  p.omega_psi = doc.at("omega_psi").get<double>();
  p.eta = doc.at("eta").get<double>();
  return p;
}

ModelPoint HolonomyFamily::a_minus() const {
  return ModelPoint(std::sqrt(cfg_.delta_star) * phi0_,
                    Eigen::VectorXd::Zero(cfg_.n - cfg_.i));
}

ModelPoint HolonomyFamily::a_plus() const {
  return ModelPoint(Eigen::Vector2d::Zero(), std::sqrt(cfg_.delta_star) * psi0_);
}

std::optional<TubeCoord> HolonomyFamily::chart_minus(const ModelPoint& p) const {
  if (!on_bottom_boundary(p, cfg_, 1e-6)) return std::nullopt;
  double R = chart_radius_;
  double sq = std::sqrt(cfg_.delta_star);
  Eigen::Vector2d phi_p = p.minus.normalized();
  TubeCoord tc;
  tc.x = sq * signed_angle(phi0_, phi_p);
  if (std::abs(tc.x) > R) return std::nullopt;
  const Eigen::VectorXd& m = p.plus;
  tc.v = eta_ * m.dot(nu_psi_);
  if (std::abs(tc.v) > R) return std::nullopt;
  if (co_sphere_dim() == 1) {
    tc.y = m.dot(w_);
    if (std::abs(tc.y) > R) return std::nullopt;
  }
  return tc;
}

ModelPoint HolonomyFamily::chart_minus_inv(const TubeCoord& tc) const {
  double sq = std::sqrt(cfg_.delta_star);
  Eigen::Vector2d phi_p = rotate(phi0_, tc.x / sq);
  Eigen::VectorXd m = (tc.v / eta_) * nu_psi_;
  if (co_sphere_dim() == 1) m += tc.y * w_;
  return ModelPoint(std::sqrt(m.squaredNorm() + cfg_.delta_star) * phi_p, m);
}

std::optional<TubeCoord> HolonomyFamily::chart_plus(const ModelPoint& p) const {
  if (!on_top_boundary(p, cfg_, 1e-6)) return std::nullopt;
  double R = chart_radius_;
  TubeCoord tc;
  tc.x = p.minus.dot(tau_);
  tc.v = p.minus.dot(nu_phi_);
  if (std::abs(tc.x) > R || std::abs(tc.v) > R) return std::nullopt;
  if (co_sphere_dim() == 1) {
    Eigen::Vector2d psi_p(p.plus(0), p.plus(1));
    tc.y = std::sqrt(cfg_.delta_star) *
           signed_angle(Eigen::Vector2d(psi0_(0), psi0_(1)), psi_p.normalized());
    if (std::abs(tc.y) > R) return std::nullopt;
  } else {
    if (p.plus(0) * psi0_(0) <= 0) return std::nullopt;
  }
  return tc;
}

ModelPoint HolonomyFamily::chart_plus_inv(const TubeCoord& tc) const {
  Eigen::Vector2d mu = tc.x * tau_ + tc.v * nu_phi_;
  Eigen::VectorXd psi_p = psi0_;
  if (co_sphere_dim() == 1) {
    Eigen::Vector2d r = rotate(Eigen::Vector2d(psi0_(0), psi0_(1)),
                               tc.y / std::sqrt(cfg_.delta_star));
    psi_p = Eigen::VectorXd(2);
    psi_p << r.x(), r.y();
  }
  return ModelPoint(mu, std::sqrt(mu.squaredNorm() + cfg_.delta_star) * psi_p);
}

ModelPoint HolonomyFamily::tube_v_minus() const {
  return ModelPoint(Eigen::Vector2d::Zero(), nu_psi_ / eta_);
}

ModelPoint HolonomyFamily::tube_v_plus() const {
  return ModelPoint(nu_phi_, Eigen::VectorXd::Zero(cfg_.n - cfg_.i));
}

std::optional<ModelPoint> HolonomyFamily::evaluate_holonomy(double s, const ModelPoint& p) const {
  if (std::abs(s) > s_max()) return std::nullopt;
  auto tc = chart_minus(p);
  if (!tc) return std::nullopt;
  tc->v += s;
  if (std::abs(tc->v) > chart_radius_) return std::nullopt;
  ModelPoint out = chart_plus_inv(*tc);
  if (!in_model_lenient(out, cfg_)) return std::nullopt;
  return out;
}

std::optional<ModelPoint> HolonomyFamily::inverse_holonomy(double s, const ModelPoint& p) const {
  if (std::abs(s) > s_max()) return std::nullopt;
  auto tc = chart_plus(p);
  if (!tc) return std::nullopt;
  tc->v -= s;
  if (std::abs(tc->v) > chart_radius_) return std::nullopt;
  ModelPoint out = chart_minus_inv(*tc);
  if (!in_model_lenient(out, cfg_)) return std::nullopt;
  return out;
}

ModelPoint HolonomyFamily::sigma_minus_point(double alpha) const {
  return ModelPoint(std::sqrt(cfg_.delta_star) * rotate(phi0_, alpha),
                    Eigen::VectorXd::Zero(cfg_.n - cfg_.i));
}

ModelPoint HolonomyFamily::sigma_plus_point(double beta) const {
  Eigen::VectorXd psi = psi0_;
  if (co_sphere_dim() == 1) {
    Eigen::Vector2d r = rotate(Eigen::Vector2d(psi0_(0), psi0_(1)), beta);
    psi << r.x(), r.y();
  }
  return ModelPoint(Eigen::Vector2d::Zero(), std::sqrt(cfg_.delta_star) * psi);
}

double HolonomyFamily::phi_offset(const ModelPoint& p) const {
  return signed_angle(phi0_, p.minus.normalized());
}

HolonomyFamily HolonomyFamily::with_base_latitude(double omega_new) const {
  if (std::abs(omega_new) >= 1.0 - 1e-9)
    throw HolonomyError("with_base_latitude: |latitude| too close to 1");
  double side = signed_angle(nu_phi_, phi0_) >= 0 ? 1.0 : -1.0;
  double nu_angle = std::atan2(nu_phi_.y(), nu_phi_.x());
  HolonomyFamily out = *this;
  double angle = nu_angle + side * std::acos(omega_new);
  out.phi0_ = Eigen::Vector2d(std::cos(angle), std::sin(angle));
  out.params_.a_minus_angle = angle;
  out.params_.omega_phi = omega_new;
  return out;
}

namespace {

// One full passage pipeline: the point of C_k(s) descending from the
// attaching-sphere point at offset alpha, or nullopt when the orbit leaves a
// chart, the model, or hits the co-sphere.
std::optional<ModelPoint> c_point(const HolonomyFamily& f, double s, int k, double alpha) {
  ModelPoint p = f.sigma_minus_point(alpha);
  for (int j = 0; j < k; ++j) {
    auto up = f.evaluate_holonomy(s, p);
    if (!up) return std::nullopt;
    if (up->minus.norm() < f.config().co_sphere_epsilon) return std::nullopt;
    p = descend(*up, f.config());
  }
  return p;
}

// Stable-disc trace H_s^{-1}(Sigma^+) at the bottom boundary.
std::optional<ModelPoint> d_prime_point(const HolonomyFamily& f, double s, double beta) {
  return f.inverse_holonomy(s, f.sigma_plus_point(beta));
}

using Interval = std::pair<double, double>;

// Refines the boundary between a valid and an invalid parameter.
double refine_boundary(const std::function<bool(double)>& ok, double good, double bad) {
  for (int it = 0; it < 40; ++it) {
    double mid = 0.5 * (good + bad);
    (ok(mid) ? good : bad) = mid;
  }
  return good;
}

std::vector<Interval> valid_intervals(const std::function<bool(double)>& ok,
                                      const std::vector<Interval>& domain, int n_scan) {
  std::vector<Interval> out;
  for (const auto& [a, b] : domain) {
    if (!(b > a)) continue;
    double step = (b - a) / n_scan;
    bool prev_ok = ok(a);
    double run_start = prev_ok ? a : 0.0;
    double prev = a;
    for (int j = 1; j <= n_scan; ++j) {
      double x = (j == n_scan) ? b : a + j * step;
      bool cur_ok = ok(x);
      if (cur_ok && !prev_ok) run_start = refine_boundary(ok, x, prev);
      if (!cur_ok && prev_ok) {
        double end = refine_boundary(ok, prev, x);
        if (end > run_start) out.emplace_back(run_start, end);
      }
      prev_ok = cur_ok;
      prev = x;
    }
    if (prev_ok && b > run_start) out.emplace_back(run_start, b);
  }
  return out;
}

double total_length(const std::vector<Interval>& iv) {
  double len = 0;
  for (const auto& [a, b] : iv) len += b - a;
  return len;
}

// Orientation of C_k against the attaching sphere: the net signed crossing
// count of a generic fixed meridian. A pointwise slope is not enough; the
// disc can fold inside its window, covering the same angles with both slopes,
// and only the net count is the orientation. Meridians in the positive
// hemisphere of the phi frame are preferred; where the disc's net count
// vanishes there, the negative hemisphere decides.
int cloud_orientation(const HolonomyFamily& f, double s, int k,
                      const std::vector<Interval>& iv) {
  if (iv.empty()) return 0;
  double nu_angle = std::atan2(f.nu_phi().y(), f.nu_phi().x());
  // Polar angles away from the pole: positive then negative latitudes, a
  // couple of offsets each to dodge tangencies.
  for (double polar : {1.0, 0.7, 1.3, M_PI - 1.0, M_PI - 0.7, M_PI - 1.3}) {
    for (double side : {1.0, -1.0}) {
      double ref_angle = nu_angle + side * polar;
      Eigen::Vector2d ref_dir(std::cos(ref_angle), std::sin(ref_angle));
      long long net = 0;
      bool degenerate = false;
      for (const auto& [a, b] : iv) {
        const int n = 512;
        std::optional<double> prev;
        for (int j = 0; j <= n; ++j) {
          double alpha = a + (b - a) * j / n;
          std::optional<double> cur;
          if (auto p = c_point(f, s, k, alpha))
            cur = signed_angle(ref_dir, p->minus.normalized());
          if (prev && cur && std::abs(*prev) < M_PI_2 && std::abs(*cur) < M_PI_2 &&
              *prev * *cur <= 0) {
            if (*prev == 0 && *cur == 0)
              degenerate = true;
            else
              net += *cur > *prev ? 1 : -1;
          }
          prev = cur;
        }
      }
      if (!degenerate && net != 0) return net > 0 ? 1 : -1;
    }
  }
  return 0;
}

// Valid windows of `ok` inside `domain` can be far narrower than the scan
// step (their width shrinks with each passage), so a uniform scan may miss
// them entirely. The meridian offset of C_k is continuous on `domain` and
// must vanish inside any chart-sized window; its zero seeds the window,
// which then grows by bisection on validity.
void add_proxy_windows(const HolonomyFamily& f, double s, int k_proxy,
                       const std::function<bool(double)>& ok, const std::vector<Interval>& domain,
                       int n_scan, std::vector<Interval>& out) {
  auto proxy = [&](double a) -> std::optional<double> {
    auto p = c_point(f, s, k_proxy, a);
    if (!p) return std::nullopt;
    return f.phi_offset(*p);
  };
  auto covered = [&](double a) {
    for (const auto& [lo, hi] : out)
      if (a >= lo && a <= hi) return true;
    return false;
  };
  for (const auto& [a, b] : domain) {
    std::optional<double> prev = proxy(a);
    double prev_alpha = a;
    for (int j = 1; j <= n_scan; ++j) {
      double alpha = a + (b - a) * j / n_scan;
      std::optional<double> cur = proxy(alpha);
      if (prev && cur && std::abs(*prev) < M_PI_2 && std::abs(*cur) < M_PI_2 &&
          *prev * *cur < 0) {
        double lo = prev_alpha, hi = alpha, flo = *prev;
        for (int it = 0; it < 80; ++it) {
          double mid = 0.5 * (lo + hi);
          auto fm = proxy(mid);
          if (!fm) break;
          if (*fm * flo <= 0) {
            hi = mid;
          } else {
            lo = mid;
            flo = *fm;
          }
        }
        double seed = 0.5 * (lo + hi);
        if (ok(seed) && !covered(seed)) {
          double left = ok(prev_alpha) ? prev_alpha : refine_boundary(ok, seed, prev_alpha);
          double right = ok(alpha) ? alpha : refine_boundary(ok, seed, alpha);
          if (right > left) out.emplace_back(left, right);
        }
      }
      prev = cur;
      prev_alpha = alpha;
    }
  }
  std::sort(out.begin(), out.end());
}

std::vector<std::vector<Interval>> passage_intervals(const HolonomyFamily& f, double s, int k_max,
                                                     const PassageOptions& opts) {
  double amax = f.chart_radius() / std::sqrt(f.config().delta_star);
  std::vector<Interval> current{{-amax, amax}};
  std::vector<std::vector<Interval>> per_k;
  for (int k = 1; k <= k_max; ++k) {
    auto ok = [&](double a) { return c_point(f, s, k, a).has_value(); };
    std::vector<Interval> next = valid_intervals(ok, current, opts.scan_samples);
    if (k >= 2) add_proxy_windows(f, s, k - 1, ok, current, opts.scan_samples, next);
    current = next;
    per_k.push_back(current);
    if (current.empty()) break;
  }
  return per_k;
}

std::vector<CloudSample> sample_cloud(const HolonomyFamily& f, double s, int k,
                                      const std::vector<Interval>& iv, int n_total) {
  std::vector<CloudSample> samples;
  double len = total_length(iv);
  if (len <= 0) return samples;
  for (const auto& [a, b] : iv) {
    int n = std::max(2, (int)std::lround(n_total * (b - a) / len));
    for (int j = 0; j <= n; ++j) {
      double alpha = a + (b - a) * j / n;
      if (auto p = c_point(f, s, k, alpha)) samples.push_back({alpha, *p});
    }
  }
  return samples;
}

}  // namespace

std::vector<DiscCloud> passage_discs(const HolonomyFamily& f, double s, int k_max,
                                     const PassageOptions& opts) {
  if (k_max < 1) throw HolonomyError("passage_discs: k_max must be >= 1");
  auto per_k = passage_intervals(f, s, k_max, opts);
  std::vector<DiscCloud> clouds;
  for (int k = 1; k <= (int)per_k.size(); ++k) {
    DiscCloud cloud;
    cloud.passage = k;
    cloud.intervals = per_k[k - 1];
    cloud.samples = sample_cloud(f, s, k, cloud.intervals, opts.cloud_samples);
    cloud.orientation_sign = cloud_orientation(f, s, k, cloud.intervals);
    clouds.push_back(std::move(cloud));
  }
  return clouds;
}

namespace {

struct MatchedGap {
  bool valid = false;
  double dx = 0.0;
  double dv = 0.0;
};

// Chart gap between C_k(alpha) and the point of the stable-disc trace with
// the same y coordinate. The x component brackets projection crossings; the
// v component is the homoclinic gap.
MatchedGap matched_gap(const HolonomyFamily& f, double s, int k, double alpha) {
  MatchedGap g;
  auto c = c_point(f, s, k, alpha);
  if (!c) return g;
  auto tc = f.chart_minus(*c);
  if (!tc) return g;
  TubeCoord td;
  if (f.co_sphere_dim() == 1) {
    double bmax = 0.999 * f.chart_radius() / std::sqrt(f.config().delta_star);
    auto y_of = [&](double beta) -> std::optional<double> {
      auto d = d_prime_point(f, s, beta);
      if (!d) return std::nullopt;
      auto t = f.chart_minus(*d);
      if (!t) return std::nullopt;
      return t->y;
    };
    auto lo = y_of(-bmax), hi = y_of(bmax);
    if (!lo || !hi) return g;
    if ((*lo - tc->y) * (*hi - tc->y) > 0) return g;
    double a = -bmax, b = bmax;
    bool rising = *hi > *lo;
    for (int it = 0; it < 80; ++it) {
      double mid = 0.5 * (a + b);
      auto ym = y_of(mid);
      if (!ym) return g;
      bool above = (*ym > tc->y) == rising;
      (above ? b : a) = mid;
    }
    auto d = d_prime_point(f, s, 0.5 * (a + b));
    if (!d) return g;
    auto t = f.chart_minus(*d);
    if (!t) return g;
    td = *t;
  } else {
    auto d = d_prime_point(f, s, 0.0);
    if (!d) return g;
    auto t = f.chart_minus(*d);
    if (!t) return g;
    td = *t;
  }
  g.valid = true;
  g.dx = tc->x - td.x;
  g.dv = tc->v - td.v;
  return g;
}

}  // namespace

std::vector<IntersectionRecord> matched_gap_candidates(const HolonomyFamily& f, double s, int k,
                                                       const PassageOptions& opts) {
  std::vector<IntersectionRecord> records;
  auto per_k = passage_intervals(f, s, k, opts);
  if ((int)per_k.size() < k || per_k[k - 1].empty()) return records;
  // The gap is only defined where C_k sits inside the bottom chart, which is
  // a chart-sized (often narrow) window inside the k-th passage interval.
  auto okm = [&](double a) { return matched_gap(f, s, k, a).valid; };
  std::vector<Interval> windows = valid_intervals(okm, per_k[k - 1], opts.scan_samples);
  add_proxy_windows(f, s, k, okm, per_k[k - 1], opts.scan_samples, windows);
  for (const auto& [a, b] : windows) {
    int n = opts.scan_samples;
    double prev_alpha = a;
    MatchedGap prev = matched_gap(f, s, k, a);
    for (int j = 1; j <= n; ++j) {
      double alpha = a + (b - a) * j / n;
      MatchedGap cur = matched_gap(f, s, k, alpha);
      if (prev.valid && cur.valid && prev.dx * cur.dx <= 0 && (prev.dx != 0 || cur.dx != 0)) {
        double lo = prev_alpha, hi = alpha, flo = prev.dx;
        for (int it = 0; it < 60; ++it) {
          double mid = 0.5 * (lo + hi);
          MatchedGap gm = matched_gap(f, s, k, mid);
          if (!gm.valid) break;
          if (gm.dx * flo <= 0) {
            hi = mid;
          } else {
            lo = mid;
            flo = gm.dx;
          }
        }
        double star = 0.5 * (lo + hi);
        MatchedGap gs = matched_gap(f, s, k, star);
        if (gs.valid) {
          IntersectionRecord rec;
          rec.param = star;
          rec.power = k + 1;
          rec.sign = cur.dx > prev.dx ? 1 : -1;
          rec.v_gap = gs.dv;
          records.push_back(rec);
        }
      }
      prev = cur;
      prev_alpha = alpha;
    }
  }
  return records;
}

std::vector<IntersectionRecord> detect_homoclinic(const HolonomyFamily& f, double s, int k,
                                                  double v_tol, const PassageOptions& opts) {
  std::vector<IntersectionRecord> out;
  for (const auto& rec : matched_gap_candidates(f, s, k, opts))
    if (std::abs(rec.v_gap) < v_tol) out.push_back(rec);
  return out;
}

namespace {

// v_1(s): homoclinic gap of the first passage at the matched projection.
std::optional<double> v1_of(const HolonomyFamily& f, double s, const PassageOptions& opts) {
  auto records = matched_gap_candidates(f, s, 1, opts);
  if (records.empty()) return std::nullopt;
  return records.front().v_gap;
}

}  // namespace

double v1_dot(const HolonomyFamily& f) {
  SelfSlideInvariants inv = compute_invariants(f);
  if (std::abs(inv.omega_phi) < kZeroThreshold)
    throw HolonomyError("v1_dot: phi-latitude below the zero threshold");
  double sigma = inv.omega_phi > 0 ? 1.0 : -1.0;
  double h = 1e-3 * f.chart_radius();
  PassageOptions opts;
  auto slope = [&](double step) -> double {
    auto v = v1_of(f, sigma * step, opts);
    if (!v) throw HolonomyError("v1_dot: v_1 not evaluable at the probe step");
    return *v / (sigma * step);
  };
  double a1 = slope(h);
  double a2 = slope(0.5 * h);
  return 2.0 * a2 - a1;
}

std::pair<double, double> velocity_balance(const HolonomyFamily& f) {
  double R = f.chart_radius();
  // v of the forward image of the point on the x-axis of the bottom chart
  // whose image lands on the x = 0 slice of the top chart.
  auto fwd = [&](double s) -> double {
    auto image = [&](double x) -> TubeCoord {
      TubeCoord in;
      in.x = x;
      auto q = f.evaluate_holonomy(s, f.chart_minus_inv(in));
      if (!q) throw HolonomyError("velocity_balance: forward image undefined");
      auto tc = f.chart_plus(*q);
      if (!tc) throw HolonomyError("velocity_balance: forward image left the chart");
      return *tc;
    };
    double lo = -0.5 * R, hi = 0.5 * R;
    double flo = image(lo).x;
    if (flo * image(hi).x > 0) throw HolonomyError("velocity_balance: no matched x");
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      double fm = image(mid).x;
      if (fm * flo <= 0) {
        hi = mid;
      } else {
        lo = mid;
        flo = fm;
      }
    }
    return image(0.5 * (lo + hi)).v;
  };
  // v of the inverse image of the point on the y-axis of the top chart whose
  // image lands on the y = 0 slice of the bottom chart.
  auto inv = [&](double s) -> double {
    auto image = [&](double y) -> TubeCoord {
      TubeCoord in;
      in.y = y;
      auto q = f.inverse_holonomy(s, f.chart_plus_inv(in));
      if (!q) throw HolonomyError("velocity_balance: inverse image undefined");
      auto tc = f.chart_minus(*q);
      if (!tc) throw HolonomyError("velocity_balance: inverse image left the chart");
      return *tc;
    };
    if (f.co_sphere_dim() == 0) return image(0.0).v;
    double lo = -0.5 * R, hi = 0.5 * R;
    double flo = image(lo).y;
    if (flo * image(hi).y > 0) throw HolonomyError("velocity_balance: no matched y");
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      double fm = image(mid).y;
      if (fm * flo <= 0) {
        hi = mid;
      } else {
        lo = mid;
        flo = fm;
      }
    }
    return image(0.5 * (lo + hi)).v;
  };
  double h = 1e-3 * R;
  auto deriv = [&](auto&& fn) {
    auto central = [&](double step) { return (fn(step) - fn(-step)) / (2.0 * step); };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
  };
  return {deriv(fwd), deriv(inv)};
}

RingElement count_incidence(const HolonomyFamily& f, double s, double b_offset, int k_max,
                            const Arrow& gamma, const Arrow& g, const TruncationContext& ctx,
                            const PassageOptions& opts) {
  if (!g.is_loop() || !(u_value(g) < 0))
    throw HolonomyError("count_incidence: g must be a loop with negative valuation");
  if (g.source() != gamma.source())
    throw HolonomyError("count_incidence: gamma must start at the base point of g");
  Eigen::Vector2d phi_b = rotate(f.sigma_minus_point(b_offset).minus.normalized(), 0.0);
  double lat_b = phi_b.dot(f.nu_phi());
  if (std::abs(lat_b) < 1e-3)
    throw NonGenericError("count_incidence: test point on the equator");

  RingElement out(ctx);
  out.accumulate(gamma, 1);

  auto per_k = passage_intervals(f, s, k_max, opts);
  for (int k = 1; k <= (int)per_k.size(); ++k) {
    if (per_k[k - 1].empty()) break;
    auto angle_to_b = [&](double alpha) -> std::optional<double> {
      auto p = c_point(f, s, k, alpha);
      if (!p) return std::nullopt;
      return signed_angle(phi_b, p->minus.normalized());
    };
    long long signed_count = 0;
    for (const auto& [a, b] : per_k[k - 1]) {
      int n = opts.scan_samples;
      std::optional<double> prev = angle_to_b(a);
      double prev_alpha = a;
      for (int j = 1; j <= n; ++j) {
        double alpha = a + (b - a) * j / n;
        std::optional<double> cur = angle_to_b(alpha);
        if (prev && cur && std::abs(*prev) < M_PI_2 && std::abs(*cur) < M_PI_2 &&
            *prev * *cur <= 0 && (*prev != 0 || *cur != 0)) {
          double lo = prev_alpha, hi = alpha, flo = *prev;
          for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            auto fm = angle_to_b(mid);
            if (!fm) break;
            if (*fm * flo <= 0) {
              hi = mid;
            } else {
              lo = mid;
              flo = *fm;
            }
          }
          double slope = (*cur - *prev) / (alpha - prev_alpha);
          double span = per_k[k - 1].front().second - per_k[k - 1].front().first;
          if (std::abs(slope) * span < 1e-4)
            throw NonGenericError("count_incidence: tangential crossing");
          signed_count += slope > 0 ? 1 : -1;
        }
        prev = cur;
        prev_alpha = alpha;
      }
    }
    if (signed_count != 0) {
      Arrow cls = *compose(power(g, k), gamma);
      out.accumulate(cls, signed_count);
    }
  }
  return out;
}

SelfSlideInvariants compute_invariants(const HolonomyFamily& f) {
  const auto& cfg = f.config();
  SelfSlideInvariants inv;
  inv.a_minus = f.a_minus();
  inv.a_plus = f.a_plus();
  Eigen::Vector2d phi0 = inv.a_minus.minus.normalized();
  Eigen::VectorXd psi0 = inv.a_plus.plus.normalized();
  double h = 1e-4 * f.chart_radius();

  auto push = [&](double u) -> ModelPoint {
    auto p = f.evaluate_holonomy(0.0, f.sigma_minus_point(u));
    if (!p) throw HolonomyError("compute_invariants: holonomy undefined near a^-");
    return *p;
  };
  auto pull = [&](const ModelPoint& q) -> ModelPoint {
    auto p = f.inverse_holonomy(0.0, q);
    if (!p) throw HolonomyError("compute_invariants: inverse holonomy undefined near a^+");
    return *p;
  };
  auto richardson2 = [&](auto&& fn) {
    auto central = [&](double step) {
      return ((fn(step) - fn(-step)) / (2.0 * step)).eval();
    };
    auto d1 = central(h);
    auto d2 = central(0.5 * h);
    return ((4.0 * d2 - d1) / 3.0).eval();
  };

  // Preferred hyperplane at a^+: tangent to the meridian projection of the
  // pushed attaching sphere.
  Eigen::Vector2d t_phi = richardson2([&](double u) { return push(u).minus; });
  if (t_phi.norm() < 1e-12) throw HolonomyError("compute_invariants: degenerate phi tangent");
  Eigen::Vector2d n_phi = rot90(t_phi.normalized());
  double co = f.tube_v_plus().minus.dot(n_phi);
  if (std::abs(co) < 1e-12) throw HolonomyError("compute_invariants: v-axis tangent to the frame");
  if (co < 0) n_phi = -n_phi;
  inv.nu_phi = n_phi;
  inv.omega_phi = phi0.dot(n_phi);

  // Preferred hyperplane at a^-.
  Eigen::VectorXd n_psi;
  if (f.co_sphere_dim() == 1) {
    Eigen::VectorXd t_psi = richardson2([&](double u) { return pull(f.sigma_plus_point(u)).plus; });
    if (t_psi.norm() < 1e-12) throw HolonomyError("compute_invariants: degenerate psi tangent");
    Eigen::Vector2d t2(t_psi(0), t_psi(1));
    Eigen::Vector2d n2 = rot90(t2.normalized());
    Eigen::VectorXd cand(2);
    cand << n2.x(), n2.y();
    if (f.tube_v_minus().plus.dot(cand) < 0) cand = -cand;
    n_psi = cand;
  } else {
    n_psi = f.tube_v_minus().plus.normalized();
  }
  inv.nu_psi = n_psi;
  inv.omega_psi = psi0.dot(n_psi);

  // Holonomic factor from the linearized inverse holonomy along the pole
  // direction at a^+.
  double sq = std::sqrt(cfg.delta_star);
  auto pole_curve = [&](double eps) -> ModelPoint {
    Eigen::Vector2d mu = eps * n_phi;
    return ModelPoint(mu, std::sqrt(mu.squaredNorm() + cfg.delta_star) * psi0);
  };
  (void)sq;
  Eigen::VectorXd v_img = richardson2([&](double eps) { return pull(pole_curve(eps)).plus; });
  double eta_bar = v_img.dot(n_psi);
  if (!(eta_bar > 1e-12))
    throw HolonomyError("compute_invariants: holonomic factor is not positive");
  inv.eta = 1.0 / eta_bar;
  inv.chi = inv.eta * inv.omega_psi + inv.omega_phi;
  inv.label = stratum_label(inv.chi, inv.omega_phi, inv.omega_psi);
  inv.marginal =
      near_threshold(inv.chi) || near_threshold(inv.omega_phi) || near_threshold(inv.omega_psi);
  return inv;
}

namespace {

double lateral_radius(const MorseModelConfig& cfg) {
  // Largest r with r^2 (r^2 + delta_star) = delta * delta_star.
  double ds = cfg.delta_star;
  return std::sqrt((-ds + std::sqrt(ds * ds + 4.0 * cfg.delta * ds)) / 2.0);
}

// Post-construction check of the normalized-crossing conditions.
void verify_elementary(const HolonomyFamily& f, const FamilyParams& params) {
  SelfSlideInvariants inv = compute_invariants(f);
  double tol = 1e-6;
  if (std::abs(inv.omega_phi - params.omega_phi) > tol ||
      std::abs(inv.omega_psi - params.omega_psi) > tol ||
      std::abs(inv.eta - params.eta) > tol)
    throw HolonomyError("elementary family: recovered invariants do not match the request");

  double h = 1e-4 * f.chart_radius();
  // Crossing velocity: the image of a^- moves at unit speed along the v-axis.
  auto v_of = [&](double s) {
    auto q = f.evaluate_holonomy(s, f.a_minus());
    if (!q) throw HolonomyError("elementary family: holonomy undefined at a^-");
    auto tc = f.chart_plus(*q);
    if (!tc) throw HolonomyError("elementary family: image of a^- left the chart");
    return tc->v;
  };
  double da1 = (v_of(h) - v_of(-h)) / (2 * h);
  double da2 = (v_of(h / 2) - v_of(-h / 2)) / h;
  double da = (4 * da2 - da1) / 3;
  if (std::abs(da - 1.0) > 1e-5)
    throw HolonomyError("elementary family: crossing velocity is not 1");

  // The first disc moves parallel to the preferred hyperplane: its meridian
  // position at parameter u shifts by s times the pole vector.
  for (double u : {-0.2 * f.chart_radius(), 0.1 * f.chart_radius()}) {
    auto base = f.evaluate_holonomy(0.0, f.sigma_minus_point(u));
    auto moved = f.evaluate_holonomy(h, f.sigma_minus_point(u));
    if (!base || !moved) throw HolonomyError("elementary family: disc sample undefined");
    Eigen::Vector2d shift = (moved->minus - base->minus) / h;
    if ((shift - f.nu_phi()).norm() > 1e-5)
      throw HolonomyError("elementary family: first disc does not move parallelly");
  }

  // Radial velocity of the stable-disc trace on the meridian annulus.
  double sigma_b = params.omega_psi > 0 ? -1.0 : 1.0;
  auto r_b = [&](double s) -> double {
    // Intersection of the trace with the ray through a^- in the direction of
    // the co-sphere point psi_0.
    Eigen::VectorXd psi0 = f.a_plus().plus.normalized();
    if (f.co_sphere_dim() == 0) {
      auto d = d_prime_point(f, s, 0.0);
      if (!d) throw HolonomyError("elementary family: trace undefined");
      return d->plus.dot(psi0);
    }
    double bmax = 0.999 * f.chart_radius() / std::sqrt(f.config().delta_star);
    auto ang = [&](double beta) -> double {
      auto d = d_prime_point(f, s, beta);
      if (!d) throw HolonomyError("elementary family: trace undefined");
      if (d->plus.norm() < 1e-15) return 0.0;
      Eigen::Vector2d m(d->plus(0), d->plus(1));
      Eigen::Vector2d p2(psi0(0), psi0(1));
      return signed_angle(p2, m.normalized());
    };
    double lo = -bmax, hi = bmax;
    double flo = ang(lo);
    if (flo * ang(hi) > 0) throw HolonomyError("elementary family: trace misses the annulus");
    for (int it = 0; it < 80; ++it) {
      double mid = 0.5 * (lo + hi);
      double fm = ang(mid);
      if (fm * flo <= 0) {
        hi = mid;
      } else {
        lo = mid;
        flo = fm;
      }
    }
    auto d = d_prime_point(f, s, 0.5 * (lo + hi));
    return d->plus.dot(psi0);
  };
  double rb1 = r_b(sigma_b * h) / (sigma_b * h);
  double rb2 = r_b(sigma_b * h / 2) / (sigma_b * h / 2);
  double vel = 2 * rb2 - rb1;
  if (std::abs(vel + 1.0 / (params.eta * params.omega_psi)) > 1e-5)
    throw HolonomyError("elementary family: trace velocity mismatch");
}

}  // namespace

HolonomyFamily make_elementary_family(const MorseModelConfig& cfg, const FamilyParams& params) {
  cfg.validate();
  if (cfg.i != 2 || (cfg.n != 3 && cfg.n != 4))
    throw HolonomyError("families require Morse index 2 with ambient dimension 3 or 4");
  if (!(params.eta > 0)) throw HolonomyError("holonomic factor must be positive");
  if (std::abs(params.omega_psi) < kZeroThreshold)
    throw HolonomyError("psi-latitude zero: family undefined on the phi-axis");
  if (std::abs(params.omega_psi) > 1.0 || std::abs(params.omega_phi) > 1.0)
    throw HolonomyError("latitudes must lie in [-1, 1]");
  if (std::abs(params.omega_phi) >= 1.0 - 1e-9)
    throw HolonomyError("degenerate phi-latitude (|omega| = 1) is not supported");

  HolonomyFamily f;
  f.cfg_ = cfg;
  f.params_ = params;
  f.eta_ = params.eta;
  f.phi0_ = Eigen::Vector2d(std::cos(params.a_minus_angle), std::sin(params.a_minus_angle));
  f.nu_phi_ = params.omega_phi * f.phi0_ +
              std::sqrt(1.0 - params.omega_phi * params.omega_phi) * rot90(f.phi0_);
  f.tau_ = rot90(f.nu_phi_);
  int dy = cfg.n - cfg.i - 1;
  if (dy == 1) {
    Eigen::Vector2d psi0(std::cos(params.a_plus_angle), std::sin(params.a_plus_angle));
    Eigen::Vector2d nu = params.omega_psi * psi0 +
                         std::sqrt(std::max(0.0, 1.0 - params.omega_psi * params.omega_psi)) *
                             rot90(psi0);
    f.psi0_ = Eigen::VectorXd(2);
    f.psi0_ << psi0.x(), psi0.y();
    f.nu_psi_ = Eigen::VectorXd(2);
    f.nu_psi_ << nu.x(), nu.y();
    f.w_ = Eigen::VectorXd(2);
    Eigen::Vector2d w2 = rot90(nu);
    f.w_ << w2.x(), w2.y();
  } else {
    if (std::abs(std::abs(params.omega_psi) - 1.0) > 1e-9)
      throw HolonomyError("with a zero-dimensional co-sphere the psi-latitude must be +-1");
    double c = std::cos(params.a_plus_angle);
    if (std::abs(c) < 0.5)
      throw HolonomyError("for n = 3 the co-sphere point must be given as angle 0 or pi");
    f.psi0_ = Eigen::VectorXd(1);
    f.psi0_ << (c > 0 ? 1.0 : -1.0);
    f.nu_psi_ = params.omega_psi * f.psi0_;
    f.w_ = Eigen::VectorXd(0);
  }
  double sq = std::sqrt(cfg.delta_star);
  double rlat = lateral_radius(cfg);
  double m_gain = std::sqrt(1.0 / (params.eta * params.eta) + 1.0);
  f.chart_radius_ = std::min(0.3 * sq, 0.6 * rlat / m_gain);
  verify_elementary(f, params);
  return f;
}

namespace {

int thread_budget(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NOVLAB_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : (int)hc;
}

}  // namespace

SweepResult sweep_doubling(const HolonomyFamily& base, std::pair<double, double> s_range,
                           std::pair<double, double> t_range, int grid, int threads) {
  if (grid < 3) throw HolonomyError("sweep_doubling: grid too small");
  SelfSlideInvariants base_inv = compute_invariants(base);
  if (std::abs(base_inv.chi) > 1e-6)
    throw HolonomyError("sweep_doubling: base family is not on the character-zero locus");

  SweepResult result;
  result.grid = grid;
  result.base_label = base_inv.label;
  result.cells.resize((size_t)grid * grid);

  double om0 = base_inv.omega_phi;
  auto s_at = [&](int j) {
    return s_range.first + (s_range.second - s_range.first) * j / (grid - 1);
  };
  auto t_at = [&](int i) {
    return t_range.first + (t_range.second - t_range.first) * i / (grid - 1);
  };

  PassageOptions opts;
  opts.scan_samples = 256;
  auto run_row = [&](int i) {
    double t = t_at(i);
    HolonomyFamily fam = base.with_base_latitude(om0 + t);
    SelfSlideInvariants inv = compute_invariants(fam);
    for (int j = 0; j < grid; ++j) {
      SweepCell& cell = result.cells[(size_t)i * grid + j];
      cell.s = s_at(j);
      cell.t = t;
      auto q = fam.evaluate_holonomy(cell.s, fam.a_minus());
      double gap1 = std::numeric_limits<double>::quiet_NaN();
      if (q) {
        if (auto tc = fam.chart_plus(*q)) gap1 = tc->v;
      }
      cell.g_detected = std::isfinite(gap1) && std::abs(gap1) < 1e-10;
      cell.label = cell.g_detected ? inv.label : "-";
      auto c2 = matched_gap_candidates(fam, cell.s, 1, opts);
      if (!c2.empty()) cell.gap2 = c2.front().v_gap;
      auto c3 = matched_gap_candidates(fam, cell.s, 2, opts);
      if (!c3.empty()) cell.gap3 = c3.front().v_gap;
    }
  };

  int nthreads = std::min(thread_budget(threads), grid);
  if (nthreads <= 1) {
    for (int i = 0; i < grid; ++i) run_row(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nthreads; ++w) {
      pool.emplace_back([&, w] {
        for (int i = w; i < grid; i += nthreads) run_row(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Locus marks: a cell is adjacent to a class locus when its gap vanishes,
  // a neighbor's gap vanishes, or the gap changes sign toward a neighbor.
  double zero_tol = 1e-9;
  auto mark = [&](auto member) {
    std::vector<bool> marks((size_t)grid * grid, false);
    auto gap_at = [&](int i, int j) { return result.cells[(size_t)i * grid + j].*member; };
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        double g0 = gap_at(i, j);
        if (!std::isfinite(g0)) continue;
        if (std::abs(g0) < zero_tol) {
          marks[(size_t)i * grid + j] = true;
          continue;
        }
        const int di[4] = {1, -1, 0, 0};
        const int dj[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          int ni = i + di[d], nj = j + dj[d];
          if (ni < 0 || nj < 0 || ni >= grid || nj >= grid) continue;
          double g1 = gap_at(ni, nj);
          if (!std::isfinite(g1)) continue;
          if (std::abs(g1) < zero_tol || g0 * g1 < 0) {
            marks[(size_t)i * grid + j] = true;
            break;
          }
        }
      }
    }
    return marks;
  };
  auto m2 = mark(&SweepCell::gap2);
  auto m3 = mark(&SweepCell::gap3);
  for (size_t idx = 0; idx < result.cells.size(); ++idx) {
    result.cells[idx].g2_adjacent = m2[idx];
    result.cells[idx].g3_adjacent = m3[idx];
  }
  return result;
}

}  // namespace novlab
