#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bvlab/errors.hpp"
#include "bvlab/graphs.hpp"
#include "bvlab/hyperbolic.hpp"
#include "bvlab/io.hpp"
#include "bvlab/linfty.hpp"
#include "bvlab/polyring.hpp"
#include "bvlab/residue.hpp"
#include "bvlab/rgflow.hpp"

using namespace bvlab;
using io::json;
namespace hy = bvlab::hyperbolic;

namespace {

constexpr const char* kVersion = "0.1.0";

/** \brief Exit codes of the dispatcher. */
enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kResource = 3, kObstruction = 4 };

json read_json_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::vector<std::string> split(const std::string& s, char sep = ',')
{
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

/** \brief Terms of a functional without the space header. */
json terms_json(const Functional& f) { return io::to_json(f)["terms"]; }

json envelope(const std::string& command, const std::string& computation, json config)
{
  return {{"version", kVersion}, {"command", command}, {"computation", computation}, {"config", std::move(config)}};
}

struct Output {
  std::string path;
  void write(const std::string& text) const
  {
    if (path.empty() || path == "-") {
      std::cout << text;
      return;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
  }
  void write(const json& j) const { write(j.dump(2) + "\n"); }
};

/** \brief Everything needed to set up a harmonic field theory from the command line or a file. */
struct TheorySpec {
  CurvedLInftyModel model;
  int genus = 0;
  int D = 4;
  int hmin = -4, hmax = 2;
  std::optional<MPoly> W;
  std::vector<std::string> vars;
  json propagator = json::array();
  std::optional<json> interaction;
};

CurvedLInftyModel flat_model(const std::vector<std::string>& vars)
{
  std::vector<Generator> gens;
  for (const auto& v : vars) gens.push_back({v, 0});
  return CurvedLInftyModel(gens);
}

/**
 * \brief Theory file {model, genus, truncation, hbar_window, superpotential:{vars,w}, propagator,
 * interaction}; command-line values override file values.
 */
TheorySpec load_theory(const std::string& theory_file, const std::string& model_file, std::optional<int> genus,
                       std::optional<int> D, const std::string& vars, const std::string& w)
{
  TheorySpec t;
  json j = theory_file.empty() ? json::object() : read_json_file(theory_file);
  bool have_model = false;
  if (!model_file.empty()) {
    t.model = io::model_from_json(read_json_file(model_file));
    have_model = true;
  } else if (j.contains("model")) {
    t.model = io::model_from_json(j["model"]);
    have_model = true;
  }
  if (j.contains("superpotential")) {
    t.vars = j["superpotential"].at("vars").get<std::vector<std::string>>();
    t.W = parse_poly(j["superpotential"].at("w").get<std::string>(), t.vars);
  }
  if (!w.empty()) {
    t.vars = split(vars);
    if (t.vars.empty()) throw InputError("--w requires --vars");
    t.W = parse_poly(w, t.vars);
  }
  if (!have_model) {
    if (!t.W) throw InputError("no model: give --model, a theory file with 'model', or --vars/--w");
    t.model = flat_model(t.vars);
  }
  if (t.W && static_cast<std::size_t>(t.W->nvars()) != t.model.dim())
    throw InputError("superpotential variable count differs from the model dimension");
  t.genus = genus ? *genus : j.value("genus", 0);
  t.D = D ? *D : j.value("truncation", std::max(4, t.model.kmax() + 1));
  if (j.contains("hbar_window")) {
    auto win = j["hbar_window"].get<std::vector<int>>();
    if (win.size() != 2) throw InputError("hbar_window must have two entries");
    t.hmin = win[0];
    t.hmax = win[1];
  }
  if (j.contains("propagator")) t.propagator = j["propagator"];
  if (j.contains("interaction")) t.interaction = j["interaction"];
  auto rep = validate_linfty(t.model, t.D);
  if (!rep.valid())
    throw InputError("model fails the L-infinity relations (" + std::to_string(rep.residuals.size()) +
                     " residual coefficients); run cme-check for details");
  return t;
}

json theory_config(const TheorySpec& t)
{
  json c = {{"model", io::to_json(t.model)},
            {"genus", t.genus},
            {"truncation", t.D},
            {"hbar_window", {t.hmin, t.hmax}}};
  if (t.W) c["superpotential"] = {{"vars", t.vars}, {"w", to_string(*t.W, t.vars)}};
  return c;
}

Functional theory_interaction(const TheorySpec& t, const FieldModel& fm)
{
  if (t.interaction) return io::functional_from_json(*t.interaction, fm.space());
  Functional I = classical_interaction(fm);
  if (t.W) I = lg_twist(I, *t.W, fm);
  return I;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"bvlab: BV quantization toolkit (exact algebra and hyperbolic numerics)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Output out;
  app.add_option("-o,--output", out.path, "output file (default stdout)");

  // polynomial inputs shared by the LG commands
  std::string vars, w, obs_list, hbar_policy = "omitted";
  std::vector<std::string> obs;
  int genus = 0;

  auto* lg = app.add_subcommand("lg-correlator", "genus-g Landau-Ginzburg correlator by global residues");
  lg->add_option("--vars", vars, "comma-separated variables")->required();
  lg->add_option("--w", w, "superpotential")->required();
  lg->add_option("--genus", genus, "surface genus")->check(CLI::NonNegativeNumber);
  lg->add_option("--obs", obs, "observable polynomial (repeatable)");
  lg->add_option("--hbar-policy", hbar_policy, "omitted | proof")->check(CLI::IsMember({"omitted", "proof"}));

  auto* mil = app.add_subcommand("milnor", "Jacobian ring basis and Milnor number");
  mil->add_option("--vars", vars)->required();
  mil->add_option("--w", w)->required();

  std::string table, classes;
  bool emit_table = false;
  auto* frob = app.add_subcommand("frobenius", "genus-0 correlator from Frobenius data");
  frob->add_option("--table", table, "Frobenius table JSON")->check(CLI::ExistingFile);
  frob->add_option("--classes", classes, "comma-separated class names");
  frob->add_option("--vars", vars, "with --w: build the table from Jac(W) and the residue trace");
  frob->add_option("--w", w);
  frob->add_flag("--emit-table", emit_table, "print the table instead of a correlator");

  GraphBounds gb;
  std::string graph_format = "json";
  auto* ge = app.add_subcommand("graphs-enumerate", "stable connected graphs up to isomorphism");
  ge->add_option("--max-genus", gb.max_genus)->capture_default_str();
  ge->add_option("--max-vertices", gb.max_vertices)->capture_default_str();
  ge->add_option("--max-tails", gb.max_tails)->capture_default_str();
  ge->add_option("--format", graph_format)->check(CLI::IsMember({"json", "dot"}));

  std::string theory_file, model_file;
  std::optional<int> opt_genus, opt_D;
  FlowBounds fb;
  auto add_theory_opts = [&](CLI::App* c) {
    c->add_option("--theory", theory_file, "theory JSON")->check(CLI::ExistingFile);
    c->add_option("--model", model_file, "model JSON")->check(CLI::ExistingFile);
    c->add_option("--genus", opt_genus, "surface genus");
    c->add_option("--truncation", opt_D, "word-length truncation D");
    c->add_option("--vars", vars, "superpotential variables");
    c->add_option("--w", w, "superpotential");
  };
  auto* rg = app.add_subcommand("rg-flow", "renormalization-group flow W(P, I) with per-graph ledger");
  add_theory_opts(rg);
  rg->add_option("--max-genus", fb.max_genus)->capture_default_str();
  rg->add_option("--max-vertices", fb.max_vertices, "0 = automatic");
  rg->add_option("--threads", fb.threads)->check(CLI::PositiveNumber);

  auto* cme = app.add_subcommand("cme-check", "classical master equation residual");
  add_theory_opts(cme);

  bool with_correction = false;
  auto* qme = app.add_subcommand("qme-check", "quantum master equation residual and constant term");
  add_theory_opts(qme);
  qme->add_flag("--with-correction", with_correction, "add the solved one-loop correction");

  auto* an = app.add_subcommand("anomaly", "one-loop anomaly and the correction equation");
  add_theory_opts(an);

  std::vector<double> z1{0, 1}, z2{1, 2};
  double eps = 0.1, L = 1.0;
  std::optional<double> t_single;
  auto* hp = app.add_subcommand("hyperbolic-propagator", "propagator 1-form on the upper half plane");
  hp->add_option("--z1", z1, "x,y")->delimiter(',')->expected(2);
  hp->add_option("--z2", z2, "x,y")->delimiter(',')->expected(2);
  hp->add_option("--eps", eps)->capture_default_str();
  hp->add_option("--L", L)->capture_default_str();
  hp->add_option("--t", t_single, "also report the integrand at this time");

  int wheel_n = 2, panels = 4;
  std::vector<double> eps_list{0.1, 0.05, 0.025};
  std::string table_format = "csv";
  auto* wc = app.add_subcommand("wheel-convergence", "wheel-integral convergence table");
  wc->add_option("--n", wheel_n)->check(CLI::IsMember({2, 3}));
  wc->add_option("--eps", eps_list)->delimiter(',');
  wc->add_option("--L", L)->capture_default_str();
  wc->add_option("--panels", panels)->check(CLI::PositiveNumber);
  wc->add_option("--format", table_format)->check(CLI::IsMember({"csv", "json"}));

  std::vector<double> tvec;
  int samples = 0, max_n = 6;
  unsigned long seed = 1;
  auto* gs = app.add_subcommand("gaussian-estimates", "determinant and inverse-entry bound of M(t, eps)");
  gs->add_option("--t", tvec, "t_1..t_{n-1}")->delimiter(',');
  gs->add_option("--eps", eps)->capture_default_str();
  gs->add_option("--samples", samples, "random samples instead of --t");
  gs->add_option("--max-n", max_n)->check(CLI::Range(2, 12));
  gs->add_option("--seed", seed);

  std::vector<double> tau{0, 1};
  int lk = 1, ln = 1, cutoff = 50;
  auto* ls = app.add_subcommand("lattice-sum", "odd-exponent lattice sum under symmetric truncation");
  ls->add_option("--tau", tau, "re,im")->delimiter(',')->expected(2);
  ls->add_option("--k", lk)->capture_default_str();
  ls->add_option("--n", ln)->capture_default_str();
  ls->add_option("--cutoff", cutoff)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ExtrasError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  } catch (const CLI::RequiredError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return kUsage;
    }
    return kValidation;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  json result;
  int code = kOk;
  try {
    if (*lg) {
      auto v = split(vars);
      MPoly W = parse_poly(w, v);
      std::vector<MPoly> fs;
      for (const auto& o : obs) fs.push_back(parse_poly(o, v));
      auto pol = hbar_policy == "proof" ? HbarPolicy::ProofExponent : HbarPolicy::Omitted;
      Correlator c = vafa_correlator(W, fs, genus, pol);
      result = envelope("lg-correlator", "lg.vafa_residue_correlator",
                        {{"vars", v}, {"w", to_string(W, v)}, {"genus", genus}, {"obs", obs}, {"hbar_policy", hbar_policy}});
      result["value"] = to_string(c.value);
      result["hbar_exponent"] = c.hbar_exponent;
      result["milnor"] = c.milnor;
    } else if (*mil) {
      auto v = split(vars);
      MPoly W = parse_poly(w, v);
      JacobianData J = jacobian(W);
      json gbj = json::array(), qb = json::array();
      for (const auto& g : J.groebner_basis) gbj.push_back(to_string(g, v));
      for (const auto& e : J.quotient_monomials) qb.push_back(to_string(MPoly::monomial(e, 1), v));
      result = envelope("milnor", "polyring.jacobian_quotient", {{"vars", v}, {"w", to_string(W, v)}, {"order", "grevlex"}});
      result["milnor"] = J.milnor;
      result["groebner_basis"] = gbj;
      result["quotient_basis"] = qb;
    } else if (*frob) {
      FrobeniusData F;
      json cfg;
      if (!w.empty()) {
        auto v = split(vars);
        MPoly W = parse_poly(w, v);
        F = frobenius_from_jacobian(build_residue(W), v);
        cfg = {{"vars", v}, {"w", to_string(W, v)}};
      } else if (!table.empty()) {
        F = io::frobenius_from_json(read_json_file(table));
        cfg = {{"table", table}};
      } else {
        throw InputError("frobenius needs --table or --vars/--w");
      }
      if (emit_table) {
        result = io::to_json(F);
      } else {
        std::vector<std::size_t> idx;
        for (const auto& c : split(classes)) idx.push_back(F.index(c));
        TaggedValue tv = cy_correlator_genus0(F, idx);
        cfg["classes"] = split(classes);
        result = envelope("frobenius", "frobenius.genus0_trace_correlator", cfg);
        result["value"] = to_string(tv.value);
        result["hbar_exponent"] = tv.hbar_exponent;
      }
    } else if (*ge) {
      auto graphs = enumerate_stable(gb);
      if (graph_format == "dot") {
        std::string text = "// bvlab " + std::string(kVersion) + " graphs-enumerate max-genus " +
                           std::to_string(gb.max_genus) + " max-vertices " + std::to_string(gb.max_vertices) +
                           " max-tails " + std::to_string(gb.max_tails) + " count " +
                           std::to_string(graphs.size()) + "\n";
        for (std::size_t i = 0; i < graphs.size(); ++i) text += to_dot(graphs[i], "G" + std::to_string(i));
        out.write(text);
        return kOk;
      }
      json arr = json::array();
      for (const auto& g : graphs) {
        json e = io::to_json(g);
        e["genus"] = bvlab::genus(g);
        e["automorphisms"] = automorphism_order(g, TailMode::Labeled);
        arr.push_back(e);
      }
      result = envelope("graphs-enumerate", "graphs.stable_enumeration",
                        {{"max_genus", gb.max_genus}, {"max_vertices", gb.max_vertices}, {"max_tails", gb.max_tails}});
      result["count"] = graphs.size();
      result["graphs"] = arr;
    } else if (*rg || *cme || *qme || *an) {
      TheorySpec t = load_theory(theory_file, model_file, opt_genus, opt_D, vars, w);
      FieldModel fm(t.model, SurfaceModel(t.genus), t.D, t.hmin, t.hmax);
      json cfg = theory_config(t);
      if (*rg) {
        Functional I = theory_interaction(t, fm);
        Kernel P = io::kernel_from_json(t.propagator, fm.space());
        FlowResult fr = rg_flow_ledger(P, I, fb);
        cfg["propagator"] = io::to_json(P);
        cfg["bounds"] = {{"max_genus", fb.max_genus}, {"max_vertices", fb.max_vertices}, {"threads", fb.threads}};
        result = envelope("rg-flow", "rgflow.graph_sum", cfg);
        result["W"] = io::to_json(fr.W);
        json ledger = json::array();
        for (const auto& c : fr.ledger)
          ledger.push_back({{"graph_id", c.graph_id},
                            {"graph", io::to_json(c.graph)},
                            {"automorphisms", c.automorphisms},
                            {"weight", to_string(c.weight)},
                            {"hbar", c.genus},
                            {"contribution", terms_json(c.value)}});
        result["ledger"] = ledger;
      } else if (*cme) {
        Functional I = theory_interaction(t, fm);
        Functional r = cme_residual(fm, I);
        result = envelope("cme-check", "linfty.classical_master_equation", cfg);
        result["zero"] = r.is_zero();
        result["residual"] = terms_json(r);
      } else if (*qme) {
        Functional I = theory_interaction(t, fm);
        cfg["with_correction"] = with_correction;
        if (with_correction) {
          Functional B = solve_quantum_correction(t.model, t.genus, t.D);
          I += fm.embed_zero_modes(B).shift_hbar(1);
        }
        std::optional<Functional> extra;
        if (t.W) extra = lg_vertex(fm, *t.W);
        auto T = EffectiveTheory::from_field_model(fm, I, std::nullopt, extra);
        QmeReport rep = qme_residual(T);
        result = envelope("qme-check", "rgflow.quantum_master_equation", cfg);
        result["zero"] = rep.residual.is_zero();
        result["residual"] = terms_json(rep.residual);
        result["R"] = terms_json(rep.R);
      } else {
        Functional dl = delta_L_functional(t.model, t.D);
        Functional I = classical_interaction(fm);
        Functional anomaly = one_loop_anomaly(Kernel(fm.space()), fm.bv_kernel(), I);
        result = envelope("anomaly", "rgflow.one_loop_obstruction", cfg);
        result["factor"] = to_string(quantum_correction_factor(t.genus));
        result["delta_L"] = io::to_json(dl);
        result["anomaly"] = terms_json(anomaly);
        try {
          Functional B = solve_quantum_correction(t.model, t.genus, t.D);
          result["obstruction"] = false;
          result["B"] = io::to_json(B);
        } catch (const ObstructionNonzero& e) {
          result["obstruction"] = true;
          result["message"] = e.what();
          result["rhs"] = terms_json(e.rhs);
          result["witness"] = terms_json(e.witness);
          code = kObstruction;
        }
      }
    } else if (*hp) {
      hy::HPoint a(z1.at(0), z1.at(1)), b(z2.at(0), z2.at(1));
      auto s = hy::propagator_components(a, b, eps, L);
      result = envelope("hyperbolic-propagator", "hyperbolic.heat_kernel_propagator",
                        {{"z1", z1}, {"z2", z2}, {"eps", eps}, {"L", L}});
      result["rho"] = hy::geodesic_distance(a, b);
      result["f_integral"] = s.f_integral;
      result["coefficients"] = {{"dy1", s.coefficients.dy1},
                                {"dy2", s.coefficients.dy2},
                                {"dx1", s.coefficients.dx1},
                                {"dx2", s.coefficients.dx2}};
      if (t_single) {
        auto d = hy::propagator_density(a, b, *t_single);
        result["config"]["t"] = *t_single;
        result["density"] = {{"t", *t_single}, {"f", hy::propagator_f(hy::geodesic_distance(a, b), *t_single)},
                             {"dy1", d.dy1}, {"dy2", d.dy2}, {"dx1", d.dx1}, {"dx2", d.dx2}};
      }
    } else if (*wc) {
      auto tab = hy::wheel_integral(wheel_n, eps_list, L, panels);
      if (table_format == "csv") {
        std::string text = "# bvlab " + std::string(kVersion) + " wheel-convergence n=" + std::to_string(wheel_n) +
                           " L=" + std::to_string(L) + " panels=" + std::to_string(panels) +
                           " computation=hyperbolic.wheel_model_integral\neps,estimate,error,diff\n";
        char buf[160];
        for (const auto& r : tab.rows) {
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.3e,%.17g\n", r.eps, r.estimate, r.error, r.diff);
          text += buf;
        }
        out.write(text);
        return kOk;
      }
      result = envelope("wheel-convergence", "hyperbolic.wheel_model_integral",
                        {{"n", wheel_n}, {"eps", eps_list}, {"L", L}, {"panels", panels}});
      json rows = json::array();
      for (const auto& r : tab.rows)
        rows.push_back({{"eps", r.eps}, {"estimate", r.estimate}, {"error", r.error}, {"diff", r.diff}});
      result["rows"] = rows;
    } else if (*gs) {
      std::vector<std::vector<double>> inputs;
      std::vector<double> epss;
      if (samples > 0) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> nd(2, max_n);
        std::uniform_real_distribution<double> ld(std::log(1e-3), std::log(10.0));
        for (int s = 0; s < samples; ++s) {
          std::vector<double> t(static_cast<std::size_t>(nd(rng) - 1));
          for (auto& x : t) x = std::exp(ld(rng));
          inputs.push_back(t);
          epss.push_back(std::exp(ld(rng)));
        }
      } else {
        if (tvec.empty()) throw InputError("gaussian-estimates needs --t or --samples");
        inputs.push_back(tvec);
        epss.push_back(eps);
      }
      double worst_det = 0, worst_ratio = 0;
      bool all_hold = true;
      json rows = json::array();
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto d = hy::gaussian_matrix_det(inputs[i], epss[i]);
        auto ib = hy::inverse_entry_bound_check(inputs[i], epss[i]);
        worst_det = std::max(worst_det, d.rel_deviation);
        worst_ratio = std::max(worst_ratio, ib.max_ratio);
        all_hold = all_hold && ib.holds;
        if (samples == 0)
          rows.push_back({{"t", inputs[i]}, {"eps", epss[i]}, {"det_numeric", d.numeric}, {"det_closed_form", d.closed_form},
                          {"det_rel_deviation", d.rel_deviation}, {"bound_holds", ib.holds},
                          {"max_bound_ratio", ib.max_ratio}, {"m11_numeric", ib.m11_numeric},
                          {"m11_formula", ib.m11_formula}});
      }
      result = envelope("gaussian-estimates", "hyperbolic.gaussian_matrix_estimates",
                        {{"t", tvec}, {"eps", eps}, {"samples", samples}, {"max_n", max_n}, {"seed", seed}});
      result["max_det_rel_deviation"] = worst_det;
      result["max_bound_ratio"] = worst_ratio;
      result["bound_holds"] = all_hold;
      if (samples == 0) result["rows"] = rows;
    } else if (*ls) {
      std::complex<double> tv(tau.at(0), tau.at(1));
      auto v = hy::elliptic_lattice_sum(tv, lk, ln, cutoff);
      result = envelope("lattice-sum", "hyperbolic.odd_lattice_sum",
                        {{"tau", tau}, {"k", lk}, {"n", ln}, {"cutoff", cutoff}});
      result["re"] = v.real();
      result["im"] = v.imag();
      result["abs"] = std::abs(v);
    }
    out.write(result);
    return code;
  } catch (const ObstructionNonzero& e) {
    std::cerr << "obstruction: " << e.what() << "\n";
    return kObstruction;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ResourceError& e) {
    std::cerr << "resource limit: " << e.what() << "\n";
    return kResource;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kUsage;
  }
}
