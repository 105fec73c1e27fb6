// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
// with its runtime; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "novlab/holonomy.hpp"
#include "novlab/rules.hpp"

using namespace novlab;

namespace {

int n_failed = 0;

void run(int number, double budget_seconds, const std::function<bool()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  std::string note;
  try {
    ok = body();
  } catch (const std::exception& e) {
    note = std::string(" (") + e.what() + ")";
  }
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (dt > budget_seconds) {
    ok = false;
    note += " (over time budget)";
  }
  if (!ok) ++n_failed;
  std::printf("criterion %d: %s (%.2fs)%s\n", number, ok ? "PASS" : "FAIL", dt, note.c_str());
  std::fflush(stdout);
}

GraphPtr loop_graph(double u_g) {
  return GroupoidGraph::make({{"p", 2}}, {{"g", 0, 0, u_g}});
}

HolonomyFamily family(double omega_phi, double omega_psi, double eta) {
  MorseModelConfig cfg;
  FamilyParams p;
  p.a_minus_angle = 0.3;
  p.a_plus_angle = -0.7;
  p.omega_phi = omega_phi;
  p.omega_psi = omega_psi;
  p.eta = eta;
  return make_elementary_family(cfg, p);
}

// Offset along the attaching sphere whose latitude has the requested sign
// and is safely away from the equator.
double offset_with_latitude_sign(const HolonomyFamily& f, int sign) {
  for (double t = 0.2; t < 6.4; t += 0.01) {
    double lat = f.sigma_minus_point(t).minus.normalized().dot(f.nu_phi());
    if (sign * lat > 0.3) return t;
  }
  throw HolonomyError("no offset with the requested latitude sign");
}

Eigen::VectorXd random_unit(int dim, std::mt19937& rng) {
  std::normal_distribution<double> gauss;
  Eigen::VectorXd v(dim);
  for (int j = 0; j < dim; ++j) v[j] = gauss(rng);
  return v.normalized();
}

bool criterion_1() {
  std::mt19937 rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    // Dyadic valuations keep the cutoff comparison exact: m*|u| and the
    // m-fold sum of u are then the same double, so the boundary power is
    // classified identically on both sides.
    double u = -(7 + (int)(rng() % 186)) / 64.0;
    for (double m : {2.0, 5.0, 10.0}) {
      double L = m * std::abs(u);
      auto graph = loop_graph(u);
      TruncationContext ctx(L, graph);
      Arrow g = Arrow::generator(graph, 0);
      RingElement one(ctx, Arrow::identity(graph, 0));
      RingElement prod = mul(sub(one, RingElement(ctx, g)), geometric_series(g, ctx));
      if (!l_equal(prod, one, L)) return false;
    }
  }
  return true;
}

bool criterion_2() {
  std::mt19937 rng(102);
  std::uniform_real_distribution<double> uv(-3.0, -0.1);
  std::uniform_real_distribution<double> lm(1.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    double u = uv(rng);
    double L = lm(rng) * std::abs(u);
    auto graph = loop_graph(u);
    TruncationContext ctx(L, graph);
    Arrow g = Arrow::generator(graph, 0);
    Character ch = rng() % 2 ? Character::plus : Character::minus;
    RingElement pos = self_slide_factor({g, ch, CrossingSign::positive}, ctx);
    RingElement neg = self_slide_factor({g, ch, CrossingSign::negative}, ctx);
    if (!l_equal(neg, unit_inverse(pos), L)) return false;
  }
  return true;
}

bool criterion_3() {
  std::mt19937 rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    auto graph = GroupoidGraph::make(
        {{"p", 2}, {"q1", 1}, {"q2", 1}, {"r", 0}},
        {{"g", 0, 0, -(0.5 + (rng() % 100) / 100.0)},
         {"alpha", 0, 1, -1.0},
         {"beta", 0, 2, -1.0},
         {"gamma", 1, 3, -1.0},
         {"delta", 2, 3, -0.5}});
    TruncationContext ctx(3.0 + (rng() % 5), graph);
    Arrow g = Arrow::generator(graph, 0);
    Arrow alpha = Arrow::generator(graph, 1);
    Arrow gamma = Arrow::generator(graph, 3);
    Arrow delta = Arrow::generator(graph, 4);

    RingElement top1(ctx, alpha, 1 + (int)(rng() % 3));
    if (rng() % 2) top1.accumulate(*compose(g, alpha), (int)(rng() % 3) - 1);
    RingElement mid1(ctx, gamma, 1 + (int)(rng() % 3));
    RingElement path = mul(top1, mid1);
    RingElement top2(ctx);
    for (const auto& [arrow, c] : path.terms())
      top2.accumulate(*compose(arrow, inverse(delta)), -c);

    NovikovComplex c(ctx);
    c = c.set_incidence(0, 1, top1);
    c = c.set_incidence(1, 3, mid1);
    c = c.set_incidence(0, 2, top2);
    c = c.set_incidence(2, 3, RingElement(ctx, delta));
    if (!c.check_d_squared().ok) return false;

    int n_events = 1 + (int)(rng() % 4);
    for (int j = 0; j < n_events; ++j) {
      CrossingEvent e{g, rng() % 2 ? Character::plus : Character::minus,
                      rng() % 2 ? CrossingSign::positive : CrossingSign::negative,
                      rng() % 4 ? StratumKind::self_slide : StratumKind::doubling};
      c = apply_self_slide(c, e);
      if (!c.check_d_squared().ok) return false;
    }
  }
  return true;
}

bool criterion_4() {
  std::mt19937 rng(104);
  std::uniform_real_distribution<double> uv(-3.0, -0.1);
  std::uniform_real_distribution<double> lm(2.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    double u = uv(rng);
    double L = lm(rng) * std::abs(u);
    auto graph = loop_graph(u);
    TruncationContext ctx(L, graph);
    Arrow g = Arrow::generator(graph, 0);
    SlideScript script;
    script.events.push_back({g, Character::minus, CrossingSign::positive});
    script.events.push_back({g, Character::plus, CrossingSign::negative});
    script.events.push_back({g, Character::minus, CrossingSign::positive,
                             StratumKind::doubling});
    if (!loop_consistency(script, ctx).ok) return false;
  }
  return true;
}

std::vector<HolonomyFamily> slope_families() {
  std::mt19937 rng(105);
  std::uniform_real_distribution<double> mag(0.1, 0.9);
  std::uniform_real_distribution<double> et(0.5, 2.0);
  std::vector<HolonomyFamily> out;
  for (int trial = 0; trial < 20; ++trial) {
    double wp = (rng() % 2 ? 1 : -1) * mag(rng);
    double ws = (rng() % 2 ? 1 : -1) * mag(rng);
    out.push_back(family(wp, ws, et(rng)));
  }
  return out;
}

bool criterion_5() {
  for (const auto& f : slope_families()) {
    double chi = f.params().eta * f.params().omega_psi + f.params().omega_phi;
    if (std::abs(f.params().omega_phi * v1_dot(f) - chi) >= 1e-5) return false;
  }
  return true;
}

bool criterion_6() {
  for (const auto& f : slope_families()) {
    auto [fwd, inv] = velocity_balance(f);
    if (std::abs(fwd + inv) >= 1e-5) return false;
  }
  return true;
}

bool criterion_7() {
  std::mt19937 rng(107);
  std::uniform_real_distribution<double> et(1.0, 1.5);
  std::uniform_real_distribution<double> wp_a(0.4, 0.8);
  std::uniform_real_distribution<double> ratio(0.5, 1.2);
  std::uniform_real_distribution<double> wp_b(0.4, 0.7);
  std::uniform_real_distribution<double> margin(0.2, 0.5);

  for (int trial = 0; trial < 4; ++trial) {
    // Expanding case: positive character and positive base slope.
    double eta = et(rng), wp = wp_a(rng);
    double ws = wp * ratio(rng) / eta;
    HolonomyFamily fa = family(wp, ws, eta);
    for (double s : {0.01, 0.02}) {
      auto discs = passage_discs(fa, s, 4);
      if (discs.size() != 4) return false;
      for (const auto& d : discs)
        if (d.samples.empty()) return false;
      if (discs[0].orientation_sign != 1) return false;
      // Below the stratum the iteration ends at an empty C_2.
      auto below = passage_discs(fa, -s, 4);
      if (below.size() != 2) return false;
      if (below[0].samples.empty() || below[0].orientation_sign != -1) return false;
      if (!below[1].samples.empty()) return false;
    }

    // Folding case: positive character over a negative base slope.
    eta = et(rng);
    double wpb = -wp_b(rng);
    double wsb = (-wpb + margin(rng)) / eta;
    HolonomyFamily fb = family(wpb, wsb, eta);
    for (double s : {0.01, 0.02}) {
      // s < 0 carries the extra second passage, oriented against the
      // attaching sphere; s > 0 ends at an empty C_2.
      auto neg = passage_discs(fb, -s, 4);
      if (neg.size() != 3) return false;
      if (neg[0].samples.empty() || neg[1].samples.empty()) return false;
      if (neg[1].orientation_sign != -1) return false;
      if (!neg[2].samples.empty()) return false;
      auto pos = passage_discs(fb, s, 4);
      if (pos.size() != 2) return false;
      if (pos[0].samples.empty() || !pos[1].samples.empty()) return false;
    }
  }
  return true;
}

bool criterion_8() {
  auto graph = GroupoidGraph::make({{"p", 2}, {"q", 1}},
                                   {{"g", 0, 0, -1.0}, {"G", 0, 1, -0.5}});
  TruncationContext ctx(4.0, graph);
  Arrow g = Arrow::generator(graph, 0);
  Arrow G = Arrow::generator(graph, 1);
  RingElement factor =
      unit_inverse(sub(RingElement(ctx, Arrow::identity(graph, 0)), RingElement(ctx, g)));

  struct Case {
    double omega_phi, omega_psi;
    int latitude_sign;
  };
  // Positive/negative base slope crossed with the test point's hemisphere.
  Case cases[] = {{0.5, 0.5, +1}, {0.5, 0.5, -1}, {-0.5, 0.8, +1}, {-0.5, 0.8, -1}};
  for (const Case& cs : cases) {
    HolonomyFamily f = family(cs.omega_phi, cs.omega_psi, 1.0);
    double b = offset_with_latitude_sign(f, cs.latitude_sign);
    RingElement below = count_incidence(f, -0.01, b, 3, G, g, ctx);
    RingElement above = count_incidence(f, 0.01, b, 3, G, g, ctx);
    if (!l_equal(above, mul(factor, below), 4.0)) return false;
  }
  return true;
}

bool criterion_9() {
  for (double wp : {-0.5, 0.5}) {
    HolonomyFamily base = family(wp, -wp, 1.0);  // character zero
    SweepResult res = sweep_doubling(base, {-0.02, 0.02}, {-0.01, 0.01}, 41);
    bool base_minus = wp < 0;
    if (res.base_label != (base_minus ? "S_g0-" : "S_g0+")) return false;
    double t_step = 0.02 / 40;
    for (const auto& cell : res.cells) {
      if (cell.g3_adjacent) return false;
      if (cell.g2_adjacent) {
        if (std::abs(cell.t) > 2 * t_step + 1e-12) return false;
        if (base_minus ? cell.s > 1e-12 : cell.s < -1e-12) return false;
      }
    }
  }
  return true;
}

bool criterion_10() {
  MorseModelConfig cfg;
  cfg.delta = 0.8;
  cfg.delta_star = 1.2;
  double r_max = std::sqrt(
      0.5 * (-cfg.delta_star +
             std::sqrt(cfg.delta_star * cfg.delta_star + 4 * cfg.delta * cfg.delta_star)));
  std::mt19937 rng(110);
  std::uniform_real_distribution<double> radial(1e-4, 0.999);
  for (int trial = 0; trial < 1000; ++trial) {
    ModelPoint top = top_point(random_unit(2, rng), radial(rng) * r_max,
                               random_unit(2, rng), cfg);
    ModelPoint bot = descend(top, cfg);
    SphericalCoords st = spherical_top(top, cfg);
    SphericalCoords sb = spherical_bottom(bot, cfg);
    if ((st.phi - sb.phi).norm() >= 1e-12) return false;
    if ((st.psi - sb.psi).norm() >= 1e-12) return false;
    if (std::abs(st.r - sb.r) >= 1e-12) return false;
  }
  return true;
}

}  // namespace

int main() {
  run(1, 1.0, criterion_1);
  run(2, 1.0, criterion_2);
  run(3, 10.0, criterion_3);
  run(4, 1.0, criterion_4);
  run(5, 30.0, criterion_5);
  run(6, 30.0, criterion_6);
  run(7, 60.0, criterion_7);
  run(8, 120.0, criterion_8);
  run(9, 300.0, criterion_9);
  run(10, 1.0, criterion_10);
  return n_failed == 0 ? 0 : 1;
}
