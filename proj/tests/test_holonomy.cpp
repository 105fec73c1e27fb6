#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "novlab/holonomy.hpp"

using namespace novlab;

namespace {

HolonomyFamily family(double omega_phi, double omega_psi, double eta, int n = 4,
                      double a_minus_angle = 0.3, double a_plus_angle = -0.7) {
  MorseModelConfig cfg;
  cfg.n = n;
  cfg.i = 2;
  FamilyParams p;
  p.a_minus_angle = a_minus_angle;
  p.a_plus_angle = n == 3 ? 0.0 : a_plus_angle;
  p.omega_phi = omega_phi;
  p.omega_psi = omega_psi;
  p.eta = eta;
  return make_elementary_family(cfg, p);
}

}  // namespace

TEST_CASE("construction guards") {
  MorseModelConfig cfg;
  cfg.n = 5;
  FamilyParams p;
  p.omega_psi = 0.5;
  CHECK_THROWS_AS(make_elementary_family(cfg, p), HolonomyError);
  cfg.n = 4;
  p.eta = 0.0;
  CHECK_THROWS_AS(make_elementary_family(cfg, p), HolonomyError);
  p.eta = 1.0;
  p.omega_phi = 1.0;  // pole base point is non-generic
  CHECK_THROWS_AS(make_elementary_family(cfg, p), HolonomyError);
  p.omega_phi = 0.2;
  p.omega_psi = 0.5;
  CHECK_NOTHROW(make_elementary_family(cfg, p));
  // n = 3: co-sphere is a point pair, omega_psi must be a unit.
  cfg.n = 3;
  CHECK_THROWS_AS(make_elementary_family(cfg, p), HolonomyError);
  p.omega_psi = 1.0;
  CHECK_NOTHROW(make_elementary_family(cfg, p));
}

TEST_CASE("invariants round trip") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> om(-0.9, 0.9);
  std::uniform_real_distribution<double> et(0.5, 2.0);
  std::uniform_real_distribution<double> ang(-3.0, 3.0);
  for (int trial = 0; trial < 12; ++trial) {
    double w_phi = om(rng), w_psi = om(rng), eta = et(rng);
    if (std::abs(w_phi) < 0.1) w_phi = 0.3;
    if (std::abs(w_psi) < 0.1) w_psi = -0.4;
    HolonomyFamily f = family(w_phi, w_psi, eta, 4, ang(rng), ang(rng));
    SelfSlideInvariants inv = compute_invariants(f);
    CHECK(inv.omega_phi == doctest::Approx(w_phi).epsilon(1e-6));
    CHECK(inv.omega_psi == doctest::Approx(w_psi).epsilon(1e-6));
    CHECK(inv.eta == doctest::Approx(eta).epsilon(1e-6));
    CHECK(inv.chi == doctest::Approx(eta * w_psi + w_phi).epsilon(1e-6));
    CHECK((inv.nu_phi - f.nu_phi()).norm() < 1e-6);
    CHECK((inv.nu_psi - f.nu_psi()).norm() < 1e-6);
  }
}

TEST_CASE("stratum labels") {
  CHECK(compute_invariants(family(-0.5, 0.5, 1.0)).label == "S_g0-");
  CHECK(compute_invariants(family(-0.5, 0.5, 1.0)).chi == doctest::Approx(0.0).epsilon(1e-9));
  SelfSlideInvariants plus = compute_invariants(family(0.1, 0.3, 2.0));
  CHECK(plus.chi == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(plus.label == "S_g+");
  CHECK(compute_invariants(family(0.5, -0.3, 1.0)).label == "S_g+");
  CHECK(compute_invariants(family(-0.4, 0.1, 1.0)).label == "S_g-");
  CHECK(compute_invariants(family(0.6, -0.3, 2.0)).label == "S_g0+");
}

TEST_CASE("holonomy at s = 0 maps a^- to a^+ and inverts") {
  HolonomyFamily f = family(0.4, -0.3, 1.5);
  auto img = f.evaluate_holonomy(0.0, f.a_minus());
  REQUIRE(img.has_value());
  CHECK((img->minus - f.a_plus().minus).norm() < 1e-10);
  CHECK((img->plus - f.a_plus().plus).norm() < 1e-10);

  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (int trial = 0; trial < 40; ++trial) {
    double s = u(rng) * f.s_max();
    TubeCoord tc{u(rng) * f.chart_radius(), u(rng) * f.chart_radius(),
                 u(rng) * f.chart_radius()};
    ModelPoint p = f.chart_minus_inv(tc);
    auto fwd = f.evaluate_holonomy(s, p);
    if (!fwd) continue;
    auto back = f.inverse_holonomy(s, *fwd);
    REQUIRE(back.has_value());
    CHECK((back->minus - p.minus).norm() < 1e-10);
    CHECK((back->plus - p.plus).norm() < 1e-10);
  }

  // Out of the chart domain: far from a^- nothing is defined.
  ModelPoint far = f.sigma_minus_point(3.0);
  CHECK(!f.evaluate_holonomy(0.0, far).has_value());
}

TEST_CASE("v1 slope matches the character ratio") {
  CHECK(v1_dot(family(-0.6, 0.3, 2.0)) == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(v1_dot(family(0.5, 0.5, 1.0)) == doctest::Approx(2.0).epsilon(1e-5));
  HolonomyFamily f = family(0.35, -0.2, 1.4);
  double chi = 1.4 * -0.2 + 0.35;
  CHECK(v1_dot(f) == doctest::Approx(chi / 0.35).epsilon(1e-5));
}

TEST_CASE("velocity balance") {
  for (auto [wp, ws, eta] : {std::tuple{0.5, 0.5, 1.0}, {-0.6, 0.3, 2.0}, {0.3, -0.7, 0.8}}) {
    auto [fwd, inv] = velocity_balance(family(wp, ws, eta));
    CHECK(std::abs(fwd + inv) < 1e-5);
  }
}

TEST_CASE("passage structure, expanding case") {
  // chi > 0, omega_phi > 0: passages persist for s > 0, die after C_1 for s < 0.
  HolonomyFamily f = family(0.5, 0.5, 1.0);
  auto up = passage_discs(f, 0.01, 3);
  REQUIRE(up.size() == 3);
  for (const auto& c : up) CHECK(!c.samples.empty());
  CHECK(up[0].orientation_sign == 1);
  // Below the stratum the iteration ends at an empty C_2.
  auto down = passage_discs(f, -0.01, 3);
  REQUIRE(down.size() == 2);
  CHECK(down[0].orientation_sign == -1);
  CHECK(!down[0].samples.empty());
  CHECK(down[1].samples.empty());
}

TEST_CASE("passage structure, folding case") {
  // chi > 0, omega_phi < 0: s < 0 gains exactly one extra passage with
  // reversed orientation.
  HolonomyFamily f = family(-0.5, 0.8, 1.0);  // chi = 0.3
  auto neg = passage_discs(f, -0.01, 3);
  REQUIRE(neg.size() == 3);
  CHECK(!neg[0].samples.empty());
  CHECK(!neg[1].samples.empty());
  CHECK(neg[1].orientation_sign == -1);  // against the attaching sphere
  CHECK(neg[2].samples.empty());
  auto pos = passage_discs(f, 0.01, 3);
  REQUIRE(pos.size() == 2);
  CHECK(!pos[0].samples.empty());
  CHECK(pos[1].samples.empty());
}

TEST_CASE("orientation follows the sign of s") {
  HolonomyFamily f = family(0.5, 0.5, 1.0);
  for (double s : {0.008, -0.008}) {
    auto discs = passage_discs(f, s, 1);
    REQUIRE(!discs.empty());
    CHECK(discs[0].orientation_sign == (s > 0 ? 1 : -1));
  }
}

TEST_CASE("homoclinic detection near the character zero") {
  // On the doubling locus the first-passage gap closes: chi = 0, and the
  // passages of this base live on the s < 0 side (omega_phi < 0).
  HolonomyFamily on(family(-0.5, 0.5, 1.0));
  auto hits = detect_homoclinic(on, -0.01, 1, 1e-6);
  CHECK(!hits.empty());
  for (const auto& h : hits) {
    CHECK(h.power == 2);
    CHECK(std::abs(h.v_gap) < 1e-6);
  }
  // Away from it the gap is of order s * chi: no hit at the same tolerance.
  HolonomyFamily off(family(0.5, 0.5, 1.0));
  CHECK(detect_homoclinic(off, 0.01, 1, 1e-6).empty());
}

TEST_CASE("incidence counting") {
  auto graph = GroupoidGraph::make({{"p", 2}, {"q", 1}},
                                   {{"g", 0, 0, -1.0}, {"G", 0, 1, -0.5}});
  TruncationContext ctx(4.0, graph);
  Arrow g = Arrow::generator(graph, 0);
  Arrow G = Arrow::generator(graph, 1);

  HolonomyFamily f = family(0.5, 0.5, 1.0);
  RingElement below = count_incidence(f, -0.01, 0.25, 3, G, g, ctx);
  CHECK(below.terms() == RingElement(ctx, G).terms());

  RingElement above = count_incidence(f, 0.01, 0.25, 3, G, g, ctx);
  for (int k = 0; k <= 3; ++k) CHECK(above.coeff(*compose(power(g, k), G)) == 1);
  CHECK(above.terms().size() == 4);

  // Test points on the equator of the phi frame are rejected: locate one by
  // scanning the latitude of the offset point.
  double b_eq = 0.0;
  for (double t = 0.0; t < 6.3; t += 1e-4) {
    if (std::abs(f.sigma_minus_point(t).minus.normalized().dot(f.nu_phi())) < 5e-5) {
      b_eq = t;
      break;
    }
  }
  REQUIRE(b_eq != 0.0);
  CHECK_THROWS_AS(count_incidence(f, 0.01, b_eq, 1, G, g, ctx), NonGenericError);
}

TEST_CASE("n = 3 families") {
  HolonomyFamily f = family(0.5, 1.0, 0.7, 3);
  CHECK(f.co_sphere_dim() == 0);
  SelfSlideInvariants inv = compute_invariants(f);
  CHECK(inv.omega_phi == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(inv.omega_psi == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(inv.chi == doctest::Approx(0.7 + 0.5).epsilon(1e-6));
  CHECK(v1_dot(f) == doctest::Approx(inv.chi / 0.5).epsilon(1e-5));
}

TEST_CASE("small doubling sweep") {
  HolonomyFamily base = family(-0.5, 0.5, 1.0);  // chi = 0
  SweepResult res = sweep_doubling(base, {-0.02, 0.02}, {-0.01, 0.01}, 5, 2);
  CHECK(res.grid == 5);
  REQUIRE((int)res.cells.size() == 25);
  CHECK(res.base_label == "S_g0-");
  int n_g = 0, n_g2 = 0, n_g3 = 0;
  for (const auto& cell : res.cells) {
    if (cell.g_detected) ++n_g;
    if (cell.g2_adjacent) ++n_g2;
    if (cell.g3_adjacent) ++n_g3;
    if (cell.g2_adjacent) {
      CHECK(std::abs(cell.t) < 1e-2);
      CHECK(cell.s < 0);  // S_g^{0,-}: doubling sits on the s < 0 side
    }
  }
  CHECK(n_g == 5);  // the s = 0 column
  CHECK(n_g2 > 0);
  CHECK(n_g3 == 0);

  // Determinism across thread counts.
  SweepResult res1 = sweep_doubling(base, {-0.02, 0.02}, {-0.01, 0.01}, 5, 1);
  REQUIRE(res1.cells.size() == res.cells.size());
  for (size_t j = 0; j < res.cells.size(); ++j) {
    CHECK(res.cells[j].g_detected == res1.cells[j].g_detected);
    CHECK(res.cells[j].g2_adjacent == res1.cells[j].g2_adjacent);
  }
}
