#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsym/errors.hpp"
#include "qsym/field_io.hpp"
#include "qsym/harness.hpp"
#include "qsym/moving_planes.hpp"

using namespace qsym;
namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string(), {path.string()});
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what(), {path.string()});
  }
}

struct Globals {
  std::string config, out;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

// config file (if any) -> subcommand overrides -> global overrides
nlohmann::json base_json(const Globals& g, const std::string& kind) {
  nlohmann::json j = g.config.empty() ? nlohmann::json::object() : read_json(g.config);
  if (!j.is_object()) throw ConfigError("config must be a JSON object", {"<root>"});
  if (kind.empty()) return j;
  if (j.contains("kind") && j["kind"] != kind)
    throw ConfigError("config kind " + j["kind"].dump() + " does not match subcommand (" + kind + ")", {"kind"});
  j["kind"] = kind;
  return j;
}

ExperimentConfig finish(nlohmann::json j, const Globals& g) {
  if (g.out_opt->count()) j["out"] = g.out;
  if (g.seed_opt->count()) j["seed"] = g.seed;
  return ExperimentConfig::from_json(j);
}

void print_record(const ResultRecord& r, const fs::path& out) {
  std::cout << r.kind << " " << r.config_hash << " -> " << out.string() << "\n";
  for (const auto& a : r.artifacts) std::cout << "  " << a << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qsym: quantitative symmetry experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "experiment config JSON");
  g.out_opt = app.add_option("--out", g.out, "output directory");
  g.seed_opt = app.add_option("--seed", g.seed, "random seed");

  // solve
  auto* solve = app.add_subcommand("solve", "solve -Delta_p u = kappa f(u) on the unit ball");
  int s_n = 2;
  double s_p = 3.0, s_tol = 1e-8;
  std::string s_f, s_kappa, s_mode = "disk";
  std::size_t s_res = 0;
  auto* o_sn = solve->add_option("--n", s_n, "dimension");
  auto* o_sp = solve->add_option("--p", s_p, "exponent p");
  auto* o_sf = solve->add_option("--f", s_f, "nonlinearity const:c | power:F | table:u,f;...");
  auto* o_sk = solve->add_option("--kappa", s_kappa, "coefficient const:c | affine:base,eps[,axis] | radial:r,k;...");
  auto* o_sm = solve->add_option("--mode", s_mode, "radial | disk")->check(CLI::IsMember({"radial", "disk"}));
  auto* o_sr = solve->add_option("--resolution", s_res, "radial intervals or polar rings");
  auto* o_st = solve->add_option("--tol", s_tol, "residual tolerance");

  // bubble
  auto* bubble = app.add_subcommand("bubble", "Talenti bubble quantities on a truncated box");
  int b_n = 3;
  double b_p = 2.5, b_lambda = 1.0, b_rbox = 3.0;
  std::vector<double> b_z;
  std::size_t b_res = 33;
  bool b_dump = false;
  auto* o_bn = bubble->add_option("--n", b_n, "dimension");
  auto* o_bp = bubble->add_option("--p", b_p, "exponent p");
  auto* o_bz = bubble->add_option("--z", b_z, "center coordinates")->delimiter(',');
  auto* o_bl = bubble->add_option("--lambda", b_lambda, "scale");
  auto* o_bb = bubble->add_option("--rbox", b_rbox, "box half-width");
  auto* o_bre = bubble->add_option("--resolution", b_res, "points per axis");
  auto* o_bd = bubble->add_flag("--dump", b_dump, "write the sampled field");

  // mp-analyze
  auto* mp = app.add_subcommand("mp-analyze", "moving planes analysis of a dumped field");
  std::string m_field, m_kind = "osc(kappa)";
  double m_p = 0.0, m_deficit = 0.0, m_factor = 0.0;
  mp->add_option("--field", m_field, "field stem (stem.csv + stem.mesh.json)")->required();
  mp->add_option("--p", m_p, "exponent p (decay tail on boxes, rotation deficit)");
  mp->add_option("--deficit", m_deficit, "deficit value for the threshold");
  mp->add_option("--deficit-kind", m_kind, "label stored in the report");
  mp->add_option("--tau-factor", m_factor, "C3 in tau = max(C3 deficit, 3 h Lip)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "ball or space sweep from --config");

  // verify
  auto* verify = app.add_subcommand("verify", "run registered verification checks");
  std::string v_check = "all";
  std::size_t v_samples = 0, v_res = 0;
  verify->add_option("check", v_check, "check name or all");
  auto* o_vs = verify->add_option("--samples", v_samples, "samples for the fundamental inequalities");
  auto* o_vr = verify->add_option("--resolution", v_res, "polar rings for solver pairs");

  // fit
  auto* fit = app.add_subcommand("fit", "fit the log law to a deficit/deviation table");
  std::string f_table;
  fit->add_option("table", f_table, "CSV with columns deficit and deviation (or osc)")->required();

  // emit-plot
  auto* plot = app.add_subcommand("emit-plot", "plot-ready data from a result record");
  std::string p_record;
  plot->add_option("record", p_record, "record.json of a sweep")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) {
      auto j = base_json(g, "single-solve");
      auto& pj = j["problem"];
      if (o_sn->count()) pj["n"] = s_n;
      if (o_sp->count()) pj["p"] = s_p;
      if (o_sf->count()) pj["f"] = s_f;
      if (o_sk->count()) pj["kappa"] = s_kappa;
      if (o_sm->count()) pj["mode"] = s_mode;
      if (o_st->count()) pj["tol"] = s_tol;
      const std::string mode = pj.value("mode", std::string("disk"));
      if (o_sm->count() && !j.contains("mesh"))
        j["mesh"]["kind"] = mode == "radial" ? "radial" : "polar_disk";
      if (mode == "radial" && o_sn->count() && j.contains("mesh")) j["mesh"]["dim"] = s_n;
      if (o_sr->count()) {
        j["mesh"]["resolution"] = s_res;
        if (mode == "disk") j["mesh"]["angular"] = 2 * s_res;
      }
      if (pj.empty()) j.erase("problem");
      auto cfg = finish(j, g);
      auto rec = run(cfg);
      print_record(rec, cfg.out);
      return 0;
    }
    if (bubble->parsed()) {
      auto j = base_json(g, "bubble-report");
      auto& pj = j["problem"];
      if (o_bn->count()) pj["n"] = b_n;
      if (o_bp->count()) pj["p"] = b_p;
      if (pj.empty()) j.erase("problem");
      if (o_bz->count()) j["bubble"]["z"] = b_z;
      if (o_bl->count()) j["bubble"]["lambda"] = b_lambda;
      if (o_bd->count()) j["bubble"]["dump_fields"] = b_dump;
      if (o_bb->count()) j["mesh"]["extent"] = b_rbox;
      if (o_bre->count()) j["mesh"]["resolution"] = b_res;
      if (j.contains("mesh") && o_bn->count()) j["mesh"]["dim"] = b_n;
      auto cfg = finish(j, g);
      auto rec = run(cfg);
      print_record(rec, cfg.out);
      std::cout << rec.outputs.dump(2) << "\n";
      return 0;
    }
    if (sweep->parsed()) {
      if (g.config.empty()) throw ConfigError("sweep needs --config", {"--config"});
      auto j = base_json(g, "");
      const std::string kind = j.value("kind", std::string{});
      if (kind != "ball-sweep" && kind != "space-sweep")
        throw ConfigError("sweep config kind must be ball-sweep or space-sweep", {"kind"});
      auto cfg = finish(j, g);
      auto rec = run(cfg);
      print_record(rec, cfg.out);
      if (rec.fit)
        std::cout << "fit C " << format_double(rec.fit->C) << " alpha " << format_double(rec.fit->alpha) << "\n";
      else
        std::cout << "no fit\n";
      return 0;
    }
    if (verify->parsed()) {
      auto j = base_json(g, "verify-suite");
      if (v_check != "all") j["verify"]["checks"] = std::vector<std::string>{v_check};
      if (o_vs->count()) j["verify"]["samples"] = v_samples;
      if (o_vr->count()) j["verify"]["resolution"] = v_res;
      auto cfg = finish(j, g);
      auto rec = run(cfg);
      for (const auto& v : rec.outputs["verdicts"])
        std::cout << (v["pass"].get<bool>() ? "pass " : "FAIL ") << v["check"].get<std::string>() << "\n";
      std::cout << "artifacts in " << cfg.out.string() << "\n";
      return rec.outputs["all_pass"].get<bool>() ? 0 : 2;
    }
    if (mp->parsed()) {
      auto u = load_field(m_field);
      MovingPlanesOptions opts;
      opts.p = m_p;
      opts.tau_deficit_factor = m_factor;
      if (g.seed_opt->count()) opts.seed = g.seed;
      auto r = analyze(u, m_deficit, m_kind, opts);
      Json j = to_json(r);
      j["seed"] = opts.seed;
      const fs::path out = g.out.empty() ? fs::path(".") : fs::path(g.out);
      write_text(out / "mp_report.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (fit->parsed()) {
      std::vector<LogLawSample> pts;
      auto f = fit_from_csv(f_table, &pts);
      Json j = to_json(f);
      if (!g.out.empty()) write_text(fs::path(g.out) / "fit.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (plot->parsed()) {
      auto rec = ResultRecord::from_json(read_json(p_record));
      const fs::path out = g.out.empty() ? fs::path(p_record).parent_path() : fs::path(g.out);
      for (const auto& a : emit_plot_data(rec, out.empty() ? fs::path(".") : out)) std::cout << a << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const OutOfRegion& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const EmptyRegion& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
