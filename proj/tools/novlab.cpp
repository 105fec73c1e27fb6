// Command-line front end: load groupoids/complexes/scripts/simulator
// configs from a scenario document, run computations, emit reports.
//
// Exit codes: 0 success, 1 assertion/audit failure, 2 input error.

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "novlab/complex.hpp"
#include "novlab/expr.hpp"
#include "novlab/holonomy.hpp"
#include "novlab/rules.hpp"

using namespace novlab;
using nlohmann::json;

namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string scenario_path;
  double L = 0.0;  // 0 = take from scenario
  double tol = 1e-7;
  int64_t seed = 0;
  std::string out = "text";
  int grid = 0;  // 0 = take from scenario
};

struct Scenario {
  json doc;
  GraphPtr graph;
  double L = 1.0;

  TruncationContext context() const { return TruncationContext(L, graph); }
};

Scenario load_scenario(const Options& opt) {
  if (opt.scenario_path.empty()) throw InputError("--scenario is required");
  std::ifstream in(opt.scenario_path);
  if (!in) throw InputError("cannot open scenario file: " + opt.scenario_path);
  Scenario sc;
  try {
    in >> sc.doc;
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario is not valid JSON: ") + e.what());
  }
  try {
    sc.graph = GroupoidGraph::from_json(sc.doc.at("groupoid"));
  } catch (const std::exception& e) {
    throw InputError(std::string("bad groupoid document: ") + e.what());
  }
  if (opt.L > 0)
    sc.L = opt.L;
  else if (sc.doc.contains("L"))
    sc.L = sc.doc["L"].get<double>();
  else
    throw InputError("no truncation length: give \"L\" in the scenario or --L");
  if (!(sc.L > 0)) throw InputError("truncation length must be positive");
  return sc;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

json header_json(const Options& opt, double L) {
  return json{{"L", L}, {"tol", opt.tol}, {"seed", opt.seed}};
}

void print_header_text(const Options& opt, double L, const char* comment = "#") {
  std::printf("%s L=%s tol=%s seed=%" PRId64 "\n", comment, fmt_double(L).c_str(),
              fmt_double(opt.tol).c_str(), opt.seed);
}

json element_json(const RingElement& e) { return e.to_json(); }

void emit_element(const Options& opt, double L, const RingElement& e) {
  if (opt.out == "json") {
    json out{{"header", header_json(opt, L)}, {"result", element_json(e)}};
    std::printf("%s\n", out.dump(2).c_str());
  } else if (opt.out == "csv") {
    print_header_text(opt, L);
    std::printf("arrow,coeff\n");
    for (const auto& [arrow, coeff] : e.terms())
      std::printf("%s,%s\n", arrow.str().c_str(), coeff.str().c_str());
  } else {
    print_header_text(opt, L);
    std::printf("%s\n", e.str().c_str());
  }
}

// ---- ring ------------------------------------------------------------

int cmd_ring(const Options& opt, const std::string& expr) {
  Scenario sc = load_scenario(opt);
  RingElement result = parse_ring_expression(expr, sc.context());
  emit_element(opt, sc.L, result);
  return 0;
}

// ---- complex ---------------------------------------------------------

NovikovComplex load_complex(const Scenario& sc) {
  if (!sc.doc.contains("complex")) throw InputError("scenario has no \"complex\" document");
  json doc = sc.doc["complex"];
  doc["context"]["L"] = sc.L;
  try {
    return NovikovComplex::from_json(doc, sc.graph);
  } catch (const std::exception& e) {
    throw InputError(std::string("bad complex document: ") + e.what());
  }
}

SlideScript load_script(const Scenario& sc) {
  if (!sc.doc.contains("script")) throw InputError("scenario has no \"script\" document");
  try {
    return SlideScript::from_json(sc.doc["script"], sc.graph);
  } catch (const std::exception& e) {
    throw InputError(std::string("bad script document: ") + e.what());
  }
}

int cmd_complex_check(const Options& opt) {
  Scenario sc = load_scenario(opt);
  NovikovComplex c = load_complex(sc);
  auto report = c.check_d_squared();
  if (opt.out == "json") {
    json out{{"header", header_json(opt, sc.L)}, {"ok", report.ok}};
    if (!report.ok) {
      const auto& objs = sc.graph->objects();
      out["violating_pair"] = {objs[report.violating_pair->first].name,
                               objs[report.violating_pair->second].name};
      out["residue"] = element_json(*report.residue);
    }
    std::printf("%s\n", out.dump(2).c_str());
  } else {
    print_header_text(opt, sc.L);
    if (report.ok) {
      std::printf("d-squared: pass\n");
    } else {
      const auto& objs = sc.graph->objects();
      std::printf("d-squared: FAIL at (%s,%s): %s\n",
                  objs[report.violating_pair->first].name.c_str(),
                  objs[report.violating_pair->second].name.c_str(),
                  report.residue->str().c_str());
    }
  }
  return report.ok ? 0 : 1;
}

int cmd_complex_apply(const Options& opt) {
  Scenario sc = load_scenario(opt);
  NovikovComplex c = load_complex(sc);
  SlideScript script = load_script(sc);
  for (const auto& e : script.events) c = apply_self_slide(c, e);
  if (opt.out == "json") {
    json out{{"header", header_json(opt, sc.L)}, {"complex", c.to_json()}};
    std::printf("%s\n", out.dump(2).c_str());
  } else {
    print_header_text(opt, sc.L);
    const auto& objs = sc.graph->objects();
    for (const auto& [pq, elem] : c.incidences())
      std::printf("<%s,%s> = %s\n", objs[pq.first].name.c_str(), objs[pq.second].name.c_str(),
                  elem.str().c_str());
  }
  return 0;
}

int cmd_complex_audit(const Options& opt) {
  Scenario sc = load_scenario(opt);
  SlideScript script = load_script(sc);
  LoopAudit audit = loop_consistency(script, sc.context());
  if (opt.out == "json") {
    json out{{"header", header_json(opt, sc.L)},
             {"ok", audit.ok},
             {"residual", element_json(audit.residual)}};
    std::printf("%s\n", out.dump(2).c_str());
  } else {
    print_header_text(opt, sc.L);
    std::printf("loop audit: %s, residual %s\n", audit.ok ? "pass" : "FAIL",
                audit.residual.str().c_str());
  }
  return audit.ok ? 0 : 1;
}

// ---- sim -------------------------------------------------------------

struct SimSetup {
  MorseModelConfig cfg;
  HolonomyFamily family;
  json sim;
};

SimSetup load_sim(const Scenario& sc) {
  if (!sc.doc.contains("sim")) throw InputError("scenario has no \"sim\" config");
  const json& sim = sc.doc["sim"];
  try {
    MorseModelConfig cfg = MorseModelConfig::from_json(sim.at("model"));
    FamilyParams params = FamilyParams::from_json(sim);
    return SimSetup{cfg, make_elementary_family(cfg, params), sim};
  } catch (const json::exception& e) {
    throw InputError(std::string("bad sim config: ") + e.what());
  } catch (const ModelError& e) {
    throw InputError(std::string("bad sim config: ") + e.what());
  }
}

const char* bool_str(bool b) { return b ? "true" : "false"; }

int cmd_sim_invariants(const Options& opt) {
  Scenario sc = load_scenario(opt);
  SimSetup setup = load_sim(sc);
  SelfSlideInvariants inv = compute_invariants(setup.family);
  if (opt.out == "json") {
    json out{{"header", header_json(opt, sc.L)},
             {"omega_phi", inv.omega_phi},
             {"omega_psi", inv.omega_psi},
             {"eta", inv.eta},
             {"chi", inv.chi},
             {"label", inv.label},
             {"marginal", inv.marginal}};
    std::printf("%s\n", out.dump(2).c_str());
  } else if (opt.out == "csv") {
    print_header_text(opt, sc.L);
    std::printf("omega_phi,omega_psi,eta,chi,label,marginal\n");
    std::printf("%s,%s,%s,%s,%s,%s\n", fmt_double(inv.omega_phi).c_str(),
                fmt_double(inv.omega_psi).c_str(), fmt_double(inv.eta).c_str(),
                fmt_double(inv.chi).c_str(), inv.label.c_str(), bool_str(inv.marginal));
  } else {
    print_header_text(opt, sc.L);
    std::printf("omega_phi = %s\nomega_psi = %s\neta = %s\nchi = %s\nlabel = %s\nmarginal = %s\n",
                fmt_double(inv.omega_phi).c_str(), fmt_double(inv.omega_psi).c_str(),
                fmt_double(inv.eta).c_str(), fmt_double(inv.chi).c_str(), inv.label.c_str(),
                bool_str(inv.marginal));
  }
  return 0;
}

int cmd_sim_passages(const Options& opt) {
  Scenario sc = load_scenario(opt);
  SimSetup setup = load_sim(sc);
  double s = setup.sim.value("s", 0.01);
  int k_max = setup.sim.value("k_max", 3);
  auto discs = passage_discs(setup.family, s, k_max);
  if (opt.out == "json") {
    json rows = json::array();
    for (const auto& d : discs) {
      json iv = json::array();
      for (const auto& [a, b] : d.intervals) iv.push_back({a, b});
      rows.push_back({{"passage", d.passage},
                      {"intervals", iv},
                      {"samples", d.samples.size()},
                      {"orientation", d.orientation_sign}});
    }
    json out{{"header", header_json(opt, sc.L)}, {"s", s}, {"passages", rows}};
    std::printf("%s\n", out.dump(2).c_str());
  } else {
    print_header_text(opt, sc.L);
    std::printf("passage,intervals,samples,orientation\n");
    for (const auto& d : discs)
      std::printf("%d,%zu,%zu,%d\n", d.passage, d.intervals.size(), d.samples.size(),
                  d.orientation_sign);
  }
  return 0;
}

int cmd_sim_incidence(const Options& opt) {
  Scenario sc = load_scenario(opt);
  SimSetup setup = load_sim(sc);
  TruncationContext ctx = sc.context();
  Arrow g = Arrow::parse(sc.graph, setup.sim.value("g", std::string("g")));
  Arrow gamma = Arrow::parse(sc.graph, setup.sim.value("gamma", std::string("g")));
  double s = setup.sim.value("s", 0.01);
  double b_offset = setup.sim.value("b_offset", 0.25);
  int k_max = setup.sim.value("k_max", 3);
  RingElement neg = count_incidence(setup.family, -s, b_offset, k_max, gamma, g, ctx);
  RingElement pos = count_incidence(setup.family, +s, b_offset, k_max, gamma, g, ctx);
  if (opt.out == "json") {
    json out{{"header", header_json(opt, sc.L)},
             {"s", s},
             {"count_minus", element_json(neg)},
             {"count_plus", element_json(pos)}};
    std::printf("%s\n", out.dump(2).c_str());
  } else if (opt.out == "csv") {
    print_header_text(opt, sc.L);
    std::printf("side,count\n");
    std::printf("minus,%s\n", neg.str().c_str());
    std::printf("plus,%s\n", pos.str().c_str());
  } else {
    print_header_text(opt, sc.L);
    std::printf("count(s<0) = %s\ncount(s>0) = %s\n", neg.str().c_str(), pos.str().c_str());
  }
  return 0;
}

int cmd_sim_doubling(const Options& opt) {
  Scenario sc = load_scenario(opt);
  SimSetup setup = load_sim(sc);
  auto range_of = [&](const char* key, std::pair<double, double> dflt) {
    if (!setup.sim.contains(key)) return dflt;
    const json& r = setup.sim[key];
    return std::make_pair(r.at(0).get<double>(), r.at(1).get<double>());
  };
  auto s_range = range_of("s_range", {-0.02, 0.02});
  auto t_range = range_of("t_range", {-0.01, 0.01});
  int grid = opt.grid > 0 ? opt.grid : setup.sim.value("grid", 21);
  SweepResult sweep = sweep_doubling(setup.family, s_range, t_range, grid);
  if (opt.out == "json") {
    json cells = json::array();
    for (const auto& c : sweep.cells) {
      cells.push_back({{"s", c.s},
                       {"t", c.t},
                       {"label", c.label},
                       {"g", c.g_detected},
                       {"g2", c.g2_adjacent},
                       {"g3", c.g3_adjacent}});
    }
    json out{{"header", header_json(opt, sc.L)},
             {"grid", sweep.grid},
             {"base_label", sweep.base_label},
             {"cells", cells}};
    std::printf("%s\n", out.dump(2).c_str());
  } else {
    print_header_text(opt, sc.L);
    std::printf("s,t,label,g,g2,g3\n");
    for (const auto& c : sweep.cells)
      std::printf("%s,%s,%s,%d,%d,%d\n", fmt_double(c.s).c_str(), fmt_double(c.t).c_str(),
                  c.label.c_str(), c.g_detected ? 1 : 0, c.g2_adjacent ? 1 : 0,
                  c.g3_adjacent ? 1 : 0);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"truncated Novikov-ring and homoclinic-bifurcation workbench"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  app.add_option("--scenario", opt.scenario_path, "scenario JSON file")->required();
  app.add_option("--L", opt.L, "truncation length (overrides scenario)");
  app.add_option("--tol", opt.tol, "numeric tolerance");
  app.add_option("--seed", opt.seed, "sampling seed (recorded in the report header)");
  app.add_option("--out", opt.out, "output format")
      ->check(CLI::IsMember({"json", "csv", "text"}));
  app.add_option("--grid", opt.grid, "sweep grid size (overrides scenario)");

  std::string expr;
  CLI::App* ring = app.add_subcommand("ring", "evaluate a ring expression");
  ring->fallthrough();
  ring->add_option("expr", expr, "infix expression")->required();

  CLI::App* cplx = app.add_subcommand("complex", "chain-complex operations");
  cplx->require_subcommand(1);
  cplx->fallthrough();
  CLI::App* cplx_check = cplx->add_subcommand("check", "d-squared certificate");
  cplx_check->fallthrough();
  CLI::App* cplx_apply = cplx->add_subcommand("apply", "apply the slide script");
  cplx_apply->fallthrough();
  CLI::App* cplx_audit = cplx->add_subcommand("audit", "loop-consistency audit");
  cplx_audit->fallthrough();

  CLI::App* sim = app.add_subcommand("sim", "holonomy simulator");
  sim->require_subcommand(1);
  sim->fallthrough();
  CLI::App* sim_inv = sim->add_subcommand("invariants", "recover the slide invariants");
  sim_inv->fallthrough();
  CLI::App* sim_pass = sim->add_subcommand("passages", "passage-disc structure");
  sim_pass->fallthrough();
  CLI::App* sim_inc = sim->add_subcommand("incidence", "signed incidence counts");
  sim_inc->fallthrough();
  CLI::App* sim_dbl = sim->add_subcommand("doubling", "two-parameter doubling sweep");
  sim_dbl->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (ring->parsed()) return cmd_ring(opt, expr);
    if (cplx_check->parsed()) return cmd_complex_check(opt);
    if (cplx_apply->parsed()) return cmd_complex_apply(opt);
    if (cplx_audit->parsed()) return cmd_complex_audit(opt);
    if (sim_inv->parsed()) return cmd_sim_invariants(opt);
    if (sim_pass->parsed()) return cmd_sim_passages(opt);
    if (sim_inc->parsed()) return cmd_sim_incidence(opt);
    if (sim_dbl->parsed()) return cmd_sim_doubling(opt);
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const ExprError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const NonGenericError& e) {
    std::fprintf(stderr, "non-generic configuration: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
