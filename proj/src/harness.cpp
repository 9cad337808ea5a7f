#include "qsym/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qsym/bubbles.hpp"
#include "qsym/field_io.hpp"
#include "qsym/inequalities.hpp"
#include "qsym/solver.hpp"

namespace qsym {

namespace fs = std::filesystem;

namespace {

// non-finite doubles become strings so JSON stays valid and round-trips
Json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double unnum(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return std::nan("");
}

std::string now_text() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const std::map<std::string, ExperimentKind>& kind_names() {
  static const std::map<std::string, ExperimentKind> names = {
      {"ball-sweep", ExperimentKind::ball_sweep},     {"space-sweep", ExperimentKind::space_sweep},
      {"verify-suite", ExperimentKind::verify_suite}, {"single-solve", ExperimentKind::single_solve},
      {"bubble-report", ExperimentKind::bubble_report}};
  return names;
}

MeshParams default_mesh(ExperimentKind kind, int n, const std::string& mode) {
  MeshParams m;
  switch (kind) {
    case ExperimentKind::ball_sweep:
      m = {MeshKind::polar_disk, 2, 24, 48, 1.0};
      break;
    case ExperimentKind::space_sweep:
    case ExperimentKind::bubble_report:
      m = {MeshKind::box, n, 33, 0, 3.0};
      break;
    case ExperimentKind::single_solve:
      if (mode == "radial")
        m = {MeshKind::radial, n, 1000, 0, 1.0};
      else
        m = {MeshKind::polar_disk, 2, 32, 64, 1.0};
      break;
    case ExperimentKind::verify_suite:
      m = {MeshKind::polar_disk, 2, 24, 48, 1.0};
      break;
  }
  return m;
}

// Collects unknown and ill-typed keys instead of stopping at the first.
class Reader {
 public:
  std::vector<std::string> bad;

  void object(const nlohmann::json& j, const std::string& path, const std::set<std::string>& known) {
    if (!j.is_object()) {
      bad.push_back(path.empty() ? "<root>" : path);
      return;
    }
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key())) bad.push_back(join(path, it.key()));
  }

  template <class T>
  void get(const nlohmann::json& j, const std::string& path, const char* key, T& out) {
    if (!j.is_object() || !j.contains(key)) return;
    const auto& v = j.at(key);
    const std::string full = join(path, key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return bad.push_back(full);
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return bad.push_back(full);
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return bad.push_back(full);
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
        return bad.push_back(full);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return bad.push_back(full);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) return bad.push_back(full);
      for (const auto& e : v)
        if (!e.is_number()) return bad.push_back(full);
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!v.is_array()) return bad.push_back(full);
      for (const auto& e : v)
        if (!e.is_string()) return bad.push_back(full);
    }
    out = v.get<T>();
  }

  static std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }
};

std::string key_list(const std::vector<std::string>& keys) {
  std::string s;
  for (const auto& k : keys) s += (s.empty() ? "" : ", ") + k;
  return s;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [name, k] : kind_names())
    if (k == kind) return name;
  return "?";
}

// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  Reader r;
  ExperimentConfig c;
  r.object(j, "", {"kind", "problem", "eps", "fit", "mesh", "thresholds", "bubble", "verify", "out", "seed"});
  if (!r.bad.empty() && r.bad.front() == "<root>") throw ConfigError("config must be a JSON object", r.bad);

  std::string kind = "single-solve";
  r.get(j, "", "kind", kind);
  if (!kind_names().count(kind))
    r.bad.push_back("kind");
  else
    c.kind = kind_names().at(kind);

  if (j.contains("problem")) {
    const auto& pj = j.at("problem");
    r.object(pj, "problem", {"n", "p", "f", "kappa", "tol", "max_iter", "mode"});
    r.get(pj, "problem", "n", c.n);
    r.get(pj, "problem", "p", c.p);
    r.get(pj, "problem", "f", c.f);
    r.get(pj, "problem", "kappa", c.kappa);
    r.get(pj, "problem", "tol", c.tol);
    r.get(pj, "problem", "max_iter", c.max_iter);
    r.get(pj, "problem", "mode", c.mode);
  }
  if (c.kind == ExperimentKind::space_sweep && !(j.contains("problem") && j.at("problem").contains("n"))) c.n = 3;
  if (c.kind == ExperimentKind::space_sweep && !(j.contains("problem") && j.at("problem").contains("p"))) c.p = 2.5;
  if (c.kind == ExperimentKind::bubble_report && !(j.contains("problem") && j.at("problem").contains("n"))) c.n = 3;
  if (c.kind == ExperimentKind::bubble_report && !(j.contains("problem") && j.at("problem").contains("p"))) c.p = 2.5;

  r.get(j, "", "eps", c.eps);
  r.get(j, "", "fit", c.fit);

  c.mesh = default_mesh(c.kind, c.n, c.mode);
  if (j.contains("mesh")) {
    const auto& mj = j.at("mesh");
    r.object(mj, "mesh", {"kind", "dim", "resolution", "angular", "extent"});
    std::string mk = to_string(c.mesh.kind);
    r.get(mj, "mesh", "kind", mk);
    try {
      c.mesh.kind = mesh_kind_from_string(mk);
    } catch (const InvalidInput&) {
      r.bad.push_back("mesh.kind");
    }
    r.get(mj, "mesh", "dim", c.mesh.dim);
    r.get(mj, "mesh", "resolution", c.mesh.resolution);
    r.get(mj, "mesh", "angular", c.mesh.angular);
    r.get(mj, "mesh", "extent", c.mesh.extent);
  }
  if (j.contains("thresholds")) {
    const auto& tj = j.at("thresholds");
    r.object(tj, "thresholds", {"tau_deficit_factor", "deficit_threshold", "levels", "lambda_tol"});
    r.get(tj, "thresholds", "tau_deficit_factor", c.tau_deficit_factor);
    r.get(tj, "thresholds", "deficit_threshold", c.deficit_threshold);
    r.get(tj, "thresholds", "levels", c.levels);
    r.get(tj, "thresholds", "lambda_tol", c.lambda_tol);
  }
  if (j.contains("bubble")) {
    const auto& bj = j.at("bubble");
    r.object(bj, "bubble", {"z", "lambda", "dump_fields"});
    r.get(bj, "bubble", "z", c.z);
    r.get(bj, "bubble", "lambda", c.lambda);
    r.get(bj, "bubble", "dump_fields", c.dump_fields);
  }
  if (j.contains("verify")) {
    const auto& vj = j.at("verify");
    r.object(vj, "verify", {"checks", "samples", "resolution"});
    r.get(vj, "verify", "checks", c.checks);
    r.get(vj, "verify", "samples", c.samples);
    r.get(vj, "verify", "resolution", c.resolution);
  }
  std::string out = c.out.string();
  r.get(j, "", "out", out);
  c.out = out;
  r.get(j, "", "seed", c.seed);

  if (!r.bad.empty()) throw ConfigError("invalid config keys: " + key_list(r.bad), r.bad);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string(), {"--config"});
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what(), {"--config"});
  }
  return from_json(j);
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["kind"] = to_string(kind);
  j["problem"] = {{"n", n}, {"p", p}, {"f", f}, {"kappa", kappa}, {"tol", tol}, {"max_iter", max_iter}, {"mode", mode}};
  j["eps"] = eps;
  j["fit"] = fit;
  j["mesh"] = {{"kind", qsym::to_string(mesh.kind)},
               {"dim", mesh.dim},
               {"resolution", mesh.resolution},
               {"angular", mesh.angular},
               {"extent", mesh.extent}};
  j["thresholds"] = {{"tau_deficit_factor", tau_deficit_factor},
                     {"deficit_threshold", deficit_threshold},
                     {"levels", levels},
                     {"lambda_tol", lambda_tol}};
  j["bubble"] = {{"z", z}, {"lambda", lambda}, {"dump_fields", dump_fields}};
  j["verify"] = {{"checks", checks}, {"samples", samples}, {"resolution", resolution}};
  j["out"] = out.string();
  j["seed"] = seed;
  return j;
}

ProblemSpec ExperimentConfig::problem() const {
  ProblemSpec s;
  s.n = n;
  s.p = p;
  s.f = Nonlinearity::parse(f, p);
  s.kappa = Coefficient::parse(kappa);
  s.tol = tol;
  s.max_iter = max_iter;
  return s;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> bad;
  std::vector<std::string> why;
  auto fail = [&](const std::string& key, const std::string& msg) {
    bad.push_back(key);
    why.push_back(key + ": " + msg);
  };
  if (n < 1) fail("problem.n", "must be positive");
  if (!(p > 1.0)) fail("problem.p", "must exceed 1");
  try {
    (void)Nonlinearity::parse(f, p);
  } catch (const InvalidInput& e) {
    fail("problem.f", e.what());
  }
  try {
    (void)Coefficient::parse(kappa);
  } catch (const InvalidInput& e) {
    fail("problem.kappa", e.what());
  }
  if (!(tol > 0.0)) fail("problem.tol", "must be positive");
  if (max_iter < 1) fail("problem.max_iter", "must be positive");
  if (mesh.resolution < 2) fail("mesh.resolution", "must be at least 2");
  if (!(mesh.extent > 0.0)) fail("mesh.extent", "must be positive");
  if (levels < 2) fail("thresholds.levels", "must be at least 2");
  if (!(lambda_tol > 0.0)) fail("thresholds.lambda_tol", "must be positive");
  if (!(tau_deficit_factor >= 0.0)) fail("thresholds.tau_deficit_factor", "must be nonnegative");

  const bool sweep = kind == ExperimentKind::ball_sweep || kind == ExperimentKind::space_sweep;
  if (sweep) {
    if (eps.empty()) fail("eps", "sweeps need at least one epsilon");
    for (double e : eps)
      if (!(e > 0.0)) {
        fail("eps", "values must be strictly positive");
        break;
      }
    if (fit)
      for (std::size_t i = 1; i < eps.size(); ++i)
        if (!(eps[i] < eps[i - 1])) {
          fail("eps", "values must be strictly decreasing when a fit is requested");
          break;
        }
  }
  if (kind == ExperimentKind::ball_sweep) {
    if (n != 2) fail("problem.n", "ball sweeps are 2-D");
    if (mesh.kind != MeshKind::polar_disk) fail("mesh.kind", "ball sweeps need polar_disk");
  }
  if (kind == ExperimentKind::space_sweep || kind == ExperimentKind::bubble_report) {
    if (!(p > 2.0 && p < n)) fail("problem.p", "needs 2 < p < n");
    if (mesh.kind == MeshKind::polar_disk) fail("mesh.kind", "needs box or radial");
    if (kind == ExperimentKind::space_sweep && mesh.kind != MeshKind::box) fail("mesh.kind", "space sweeps need box");
    if (mesh.dim != n) fail("mesh.dim", "must equal problem.n");
  }
  if (kind == ExperimentKind::bubble_report) {
    if (!z.empty() && static_cast<int>(z.size()) != n) fail("bubble.z", "needs n coordinates");
    if (mesh.kind == MeshKind::radial)
      for (double v : z)
        if (v != 0.0) {
          fail("bubble.z", "radial meshes need z = 0");
          break;
        }
    if (!(lambda > 0.0)) fail("bubble.lambda", "must be positive");
  }
  if (kind == ExperimentKind::single_solve) {
    if (mode != "radial" && mode != "disk") fail("problem.mode", "must be radial or disk");
    if (mode == "disk" && n != 2) fail("problem.n", "disk mode is 2-D");
    if (mode == "disk" && mesh.kind != MeshKind::polar_disk) fail("mesh.kind", "disk mode needs polar_disk");
    if (mode == "radial" && mesh.kind != MeshKind::radial) fail("mesh.kind", "radial mode needs radial");
  }
  if (kind == ExperimentKind::verify_suite) {
    const auto names = registered_checks();
    for (const auto& c : checks)
      if (std::find(names.begin(), names.end(), c) == names.end()) {
        fail("verify.checks", "unknown check " + c);
        break;
      }
    if (samples < 1) fail("verify.samples", "must be positive");
    if (resolution < 8) fail("verify.resolution", "must be at least 8");
    if (!(p > 2.0)) fail("problem.p", "the verify suite needs p > 2");
  }
  if (!bad.empty()) {
    std::string msg;
    for (const auto& w : why) msg += (msg.empty() ? "" : "; ") + w;
    throw ConfigError("invalid config: " + msg, bad);
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  nlohmann::json j = cfg.to_json();  // std::map keys: sorted
  j.erase("out");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------

Json to_json(const LogLawFit& fit) {
  return Json{{"C", num(fit.C)},
              {"alpha", num(fit.alpha)},
              {"residual", num(fit.residual)},
              {"degenerate", fit.degenerate},
              {"samples", fit.samples}};
}

Json to_json(const MovingPlanesReport& r) {
  Json j;
  j["deficit_kind"] = r.deficit_kind;
  j["deficit"] = num(r.deficit);
  j["tau"] = num(r.tau);
  j["tau_deficit"] = num(r.tau_deficit);
  j["tau_discrete"] = num(r.tau_discrete);
  j["lip"] = num(r.lip);
  j["h"] = num(r.h);
  Json c;
  c["center"] = Json::array();
  for (double v : r.center.center) c["center"].push_back(num(v));
  c["lambda_plus"] = Json::array();
  for (double v : r.center.lambda_plus) c["lambda_plus"].push_back(num(v));
  c["lambda_minus"] = Json::array();
  for (double v : r.center.lambda_minus) c["lambda_minus"].push_back(num(v));
  c["degraded"] = r.center.degraded;
  j["center"] = c;
  j["plane_distance"] = Json::array();
  for (double v : r.plane_distance) j["plane_distance"].push_back(num(v));
  Json a;
  a["oscillation"] = num(r.angular.oscillation);
  a["radii"] = r.angular.radii;
  a["per_shell"] = r.angular.per_shell;
  a["skipped"] = r.angular.skipped;
  j["angular"] = a;
  j["rotation"] = {{"sup", num(r.rotation.sup)}, {"grad_lp", num(r.rotation.grad_lp)}};
  return j;
}

Json ResultRecord::to_json() const {
  Json j;
  j["kind"] = kind;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["config"] = config;
  j["outputs"] = outputs;
  if (fit) j["fit"] = qsym::to_json(*fit);
  j["fit_samples"] = Json::array();
  for (const auto& s : fit_samples) j["fit_samples"].push_back({{"deficit", num(s.deficit)}, {"deviation", num(s.deviation)}});
  j["artifacts"] = artifacts;
  return j;
}

ResultRecord ResultRecord::from_json(const nlohmann::json& j) {
  ResultRecord r;
  try {
    r.kind = j.at("kind").get<std::string>();
    r.config_hash = j.value("config_hash", std::string{});
    r.seed = j.value("seed", std::uint64_t{0});
    r.config = j.value("config", nlohmann::json::object());
    r.outputs = j.value("outputs", nlohmann::json::object());
    if (j.contains("fit")) {
      const auto& f = j.at("fit");
      LogLawFit fit;
      fit.C = unnum(f.at("C"));
      fit.alpha = unnum(f.at("alpha"));
      fit.residual = unnum(f.at("residual"));
      fit.degenerate = f.at("degenerate").get<bool>();
      fit.samples = f.at("samples").get<std::size_t>();
      r.fit = fit;
    }
    if (j.contains("fit_samples"))
      for (const auto& s : j.at("fit_samples")) r.fit_samples.push_back({unnum(s.at("deficit")), unnum(s.at("deviation"))});
    if (j.contains("artifacts")) r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed result record: ") + e.what());
  }
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw InvalidInput("cannot write " + path.string());
}

std::string sweep_csv(const SweepResult& result, const std::string& header_comment) {
  std::size_t n = 0;
  for (const auto& s : result.samples)
    if (!s.dropped) n = std::max(n, s.report.center.lambda_plus.size());
  std::ostringstream o;
  if (!header_comment.empty()) o << "# " << header_comment << "\n";
  o << "epsilon,deficit";
  for (std::size_t k = 0; k < n; ++k) o << ",lambda_star_" << k + 1;
  o << ",osc,rot_deficit\n";
  for (const auto& s : result.samples) {
    if (s.dropped) continue;
    o << format_double(s.epsilon) << "," << format_double(s.deficit);
    for (std::size_t k = 0; k < n; ++k)
      o << "," << format_double(k < s.report.center.lambda_plus.size() ? s.report.center.lambda_plus[k] : NAN);
    o << "," << format_double(s.report.angular.oscillation) << "," << format_double(s.report.rotation.sup) << "\n";
  }
  return o.str();
}

LogLawFit fit_from_csv(const fs::path& path, std::vector<LogLawSample>* samples) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::string line;
  std::vector<std::string> header;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  std::vector<LogLawSample> pts;
  int id = -1, is = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (header.empty()) {
      header = cells;
      for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == "deficit") id = static_cast<int>(k);
        if (header[k] == "deviation" || (header[k] == "osc" && is < 0)) is = static_cast<int>(k);
      }
      if (id < 0 || is < 0) throw InvalidInput("table needs columns deficit and deviation (or osc)");
      continue;
    }
    if (static_cast<int>(cells.size()) <= std::max(id, is)) throw InvalidInput("short row in " + path.string());
    pts.push_back({std::strtod(cells[static_cast<std::size_t>(id)].c_str(), nullptr),
                   std::strtod(cells[static_cast<std::size_t>(is)].c_str(), nullptr)});
  }
  if (samples) *samples = pts;
  return fit_log_law(pts);
}

std::vector<std::string> emit_plot_data(const ResultRecord& record, const fs::path& dir) {
  if (!record.fit) throw InvalidInput("record has no fit");
  if (record.fit_samples.size() < 2) throw InvalidInput("plot data needs at least two samples");
  const LogLawFit& f = *record.fit;
  std::ostringstream o;
  o << "# seed=" << record.seed << " config=" << record.config_hash << "\n";
  o << "log_abs_log_d,log_s\n";
  for (const auto& s : record.fit_samples)
    o << format_double(std::log(std::abs(std::log(f.C * s.deficit)))) << "," << format_double(std::log(s.deviation)) << "\n";
  write_text(dir / "plot.csv", o.str());
  Json line{{"seed", record.seed},
            {"config_hash", record.config_hash},
            {"intercept", num(std::log(f.C))},
            {"slope", num(-f.alpha)},
            {"C", num(f.C)},
            {"alpha", num(f.alpha)},
            {"points", record.fit_samples.size()}};
  write_text(dir / "plot_line.json", line.dump(2) + "\n");
  return {"plot.csv", "plot_line.json"};
}

// ---------------------------------------------------------------------------
// verification checks

namespace {

struct CheckContext {
  const ExperimentConfig& cfg;
  std::map<std::pair<double, std::size_t>, std::pair<ProblemSpec, SolveReport>> cache;

  const std::pair<ProblemSpec, SolveReport>& ball(double eps, std::size_t rings) {
    auto key = std::make_pair(eps, rings);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    ProblemSpec s = cfg.problem();
    s.n = 2;
    s.kappa = Coefficient::affine(1.0, eps);
    auto mesh = std::make_shared<const Mesh>(Mesh::polar_disk(rings, 2 * rings));
    auto rep = solve_dirichlet_2d(s, mesh);
    if (!rep.converged) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "ball solve did not converge (eps %g, %zu rings)", eps, rings);
      throw NumericalFailure(buf);
    }
    return cache.emplace(key, std::make_pair(s, std::move(rep))).first->second;
  }
};

const double kE2[2] = {0.0, 1.0};

Verdict check_fundamental(CheckContext& ctx) {
  Verdict v{"fundamental", true, Json::array()};
  for (double p : {2.0, 2.5, 3.0, 4.0}) {
    auto r = fundamental_ineq_check(p, ctx.cfg.samples, ctx.cfg.seed);
    v.metrics.push_back({{"p", p},
                         {"samples", r.samples},
                         {"c", num(r.c)},
                         {"c_ref", num(r.c_ref)},
                         {"C", num(r.C)},
                         {"C_ref", num(r.C_ref)},
                         {"c_hat", num(r.c_hat)},
                         {"c_hat_ref", num(r.c_hat_ref)},
                         {"violations", r.violations}});
    v.pass = v.pass && r.pass;
  }
  return v;
}

Verdict check_exponent(CheckContext&) {
  const double e = exponent_2M(4, 3.0);
  Verdict v{"exponent-2M", e == 8.0 / 3.0, Json{{"n", 4}, {"p", 3.0}, {"value", format_double(e)}}};
  return v;
}

Verdict check_sobolev(CheckContext& ctx) {
  auto m = std::make_shared<const Mesh>(Mesh::polar_disk(32, 64));
  ScalarField one(m, 1.0);
  auto all = Region::whole(*m);
  const double t = 1.5;
  auto wc = weight_condition_constant(one, t, 0.0, all);
  auto w = weight_report(2, wc.C_star, t, 0.0, 2.0, m->volume());
  std::size_t fails = 0;
  double worst = 0.0;
  for (const auto& f : random_test_fields(m, 100, ctx.cfg.seed)) {
    auto c = check_weighted_sobolev(one, f.v, f.grad, 2.0, all, w);
    fails += !c.pass;
    worst = std::max(worst, c.ratio);
  }
  return {"sobolev-bank", fails == 0,
          Json{{"fields", 100}, {"C_star", num(wc.C_star)}, {"C_S", num(w.C_S)}, {"max_ratio", num(worst)}, {"violations", fails}}};
}

Verdict check_poincare(CheckContext& ctx) {
  auto m = std::make_shared<const Mesh>(Mesh::polar_disk(32, 64));
  ScalarField one(m, 1.0);
  Verdict v{"poincare-caps", true, Json::array()};
  const double t = 1.5;
  for (double lam : {0.2, 0.5, 0.8}) {
    auto cap = Region::half_space(*m, kE2, lam);
    auto wc = weight_condition_constant(one, t, 0.0, cap);
    auto w = weight_report(2, wc.C_star, t, 0.0, 2.0, cap.measure(*m));
    auto f = cap_test_field(m, kE2, lam);
    auto c = check_weighted_poincare(one, f.v, f.grad, cap, 0.5, ctx.cfg.p, w.C_S);
    v.metrics.push_back({{"lambda", lam}, {"measure", num(c.measure)}, {"lhs", num(c.lhs)}, {"rhs", num(c.rhs)}, {"pass", c.pass}});
    v.pass = v.pass && c.pass && c.lhs > 0.0;
  }
  return v;
}

Verdict check_comparison(CheckContext& ctx) {
  Verdict v{"comparison", true, Json::array()};
  for (double eps : {0.1, 0.05}) {
    const auto& [spec, rep] = ctx.ball(eps, ctx.cfg.resolution);
    Json row{{"epsilon", eps}};
    double lo = INFINITY, hi = 0.0;
    bool finite = true;
    Json caps = Json::array();
    for (double lam : {0.5, 0.7}) {
      auto c = small_domain_comparison(cap_pair(rep.solution, spec, rep.scale, kE2, lam));
      caps.push_back({{"lambda", lam}, {"measure", num(c.measure)}, {"numerator", num(c.numerator)},
                      {"denominator", num(c.denominator)}, {"K", num(c.K)}});
      finite = finite && std::isfinite(c.K);
      lo = std::min(lo, c.K);
      hi = std::max(hi, c.K);
    }
    const double spread = hi == 0.0 ? 1.0 : (lo > 0.0 ? hi / lo : INFINITY);
    auto half = small_domain_comparison(cap_pair(rep.solution, spec, rep.scale, kE2, 0.0));
    row["caps"] = caps;
    row["spread"] = num(spread);
    row["half_disk_K"] = num(half.K);
    v.metrics.push_back(row);
    v.pass = v.pass && finite && spread < 2.0;
  }
  return v;
}

Verdict check_harnack(CheckContext& ctx) {
  Verdict v{"harnack", true, Json::array()};
  const auto& [spec, rep] = ctx.ball(0.1, ctx.cfg.resolution);
  auto pair = cap_pair(rep.solution, spec, rep.scale, kE2, 0.0);
  auto cfg = HarnackConfig::defaults(2, ctx.cfg.p);
  const double x0[2] = {0.0, 0.5};
  for (double R : {0.04, 0.08}) {
    auto h = harnack_check(pair.u2, pair.u1, pair.g_gap, x0, R, cfg, pair.omega);
    v.metrics.push_back({{"R", R}, {"M", num(h.M)}, {"k", num(h.k)}, {"norm_s", num(h.norm_s)}, {"inf", num(h.inf)},
                         {"ratio", num(h.ratio)}, {"frak_C_needed", num(h.frak_C_needed)}});
    v.pass = v.pass && h.pass;
  }
  return v;
}

Verdict check_local_bound(CheckContext& ctx) {
  Verdict v{"local-bound", true, Json::array()};
  const auto& [spec, rep] = ctx.ball(0.1, ctx.cfg.resolution);
  const Mesh& m = rep.solution.mesh();
  auto pair = cap_pair(rep.solution, spec, rep.scale, kE2, 0.0);
  auto cfg = HarnackConfig::defaults(2, ctx.cfg.p);
  auto rho = gradient_weight(rep.solution, ctx.cfg.p);
  const double t = admissible_t(ctx.cfg.p, 0.75);
  for (double R : {0.1, 0.2, 0.4}) {
    LocalBoundInput in;
    in.u1 = &pair.u1;
    in.u2 = &pair.u2;
    in.g_gap = &pair.g_gap;
    in.x0 = {0.0, 0.0};
    in.R = R;
    Region b5 = Region::ball(m, in.x0, 5 * R) & pair.omega;
    auto wc = weight_condition_constant(rho, t, 0.0, b5);
    in.C_S = weight_report(2, wc.C_star, t, 0.0, 2.0, b5.measure(m)).C_S;
    in.q = cfg.q;
    in.qq = cfg.qq;
    in.boundary_variant = true;
    in.omega = pair.omega;
    in.boundary = pair.boundary;
    auto r = local_bound_check(in);
    v.metrics.push_back({{"R", R}, {"C_S", num(in.C_S)}, {"sup", num(r.sup)}, {"norm", num(r.norm)}, {"k", num(r.k)},
                         {"M", num(r.M)}, {"factor", num(r.factor)}, {"constant", num(r.constant)}});
    v.pass = v.pass && std::isfinite(r.constant);
  }
  return v;
}

Verdict check_integrability(CheckContext& ctx) {
  Verdict v{"grad-integrability", true, Json::object()};
  const double oracle = 4.0 * M_PI * std::sqrt(2.0) / 3.0;
  auto mr = std::make_shared<const Mesh>(Mesh::radial(2, 4000));
  auto u = ScalarField::sample(mr, [](std::span<const double> x) { return torsion_profile(x[0], 2, 3.0); });
  const double exact = grad_integrability(u, 3.0, 0.5).value;
  v.metrics["exact"] = {{"value", num(exact)}, {"oracle", num(oracle)}, {"error", num(std::abs(exact - oracle))}};
  v.pass = std::abs(exact - oracle) <= 1e-3;
  Json rows = Json::array();
  const std::size_t r0 = ctx.cfg.resolution;
  for (double eps : {0.2, 0.1, 0.05, 0.025}) {
    double val[2];
    bool ok = true;
    for (int k = 0; k < 2; ++k) {
      const auto& [spec, rep] = ctx.ball(eps, r0 << k);
      auto g = grad_integrability(rep.solution, ctx.cfg.p, 0.5);
      val[k] = g.value;
      ok = ok && !g.divergent && std::isfinite(g.value);
    }
    const double rel = std::abs(val[1] - val[0]) / val[1];
    rows.push_back({{"epsilon", eps}, {"coarse", num(val[0])}, {"fine", num(val[1])}, {"relative_change", num(rel)}});
    v.pass = v.pass && ok && rel <= 0.05;
  }
  v.metrics["solver"] = rows;
  return v;
}

Verdict check_apriori(CheckContext& ctx) {
  const auto& [spec, rep] = ctx.ball(0.1, ctx.cfg.resolution);
  auto a = verify_apriori(rep.solution, spec);
  const bool ok = a.delta0 > 0.0 && std::isfinite(a.C1) && std::isfinite(a.C2) && std::isfinite(a.C3);
  return {"apriori", ok,
          Json{{"C0", num(a.C0)}, {"C1", num(a.C1)}, {"C2", num(a.C2)}, {"C3", num(a.C3)}, {"delta0", num(a.delta0)},
               {"barrier_ok", a.barrier_ok}}};
}

using CheckFn = Verdict (*)(CheckContext&);

const std::vector<std::pair<std::string, CheckFn>>& registry() {
  static const std::vector<std::pair<std::string, CheckFn>> r = {
      {"fundamental", check_fundamental},     {"exponent-2M", check_exponent},
      {"sobolev-bank", check_sobolev},        {"poincare-caps", check_poincare},
      {"comparison", check_comparison},       {"harnack", check_harnack},
      {"local-bound", check_local_bound},     {"grad-integrability", check_integrability},
      {"apriori", check_apriori}};
  return r;
}

Verdict dispatch(const std::string& name, CheckContext& ctx) {
  for (const auto& [n, fn] : registry())
    if (n == name) {
      try {
        return fn(ctx);
      } catch (const NumericalFailure& e) {
        throw NumericalFailure("check " + name + ": " + e.what());
      }
    }
  throw ConfigError("unknown check " + name, {"verify.checks"});
}

}  // namespace

std::vector<std::string> registered_checks() {
  std::vector<std::string> out;
  for (const auto& [n, fn] : registry()) out.push_back(n);
  return out;
}

Verdict run_check(const std::string& name, const ExperimentConfig& cfg) {
  CheckContext ctx{cfg, {}};
  return dispatch(name, ctx);
}

// ---------------------------------------------------------------------------

namespace {

Json solve_json(const SolveReport& r) {
  return Json{{"residual", num(r.residual)},   {"iterations", r.iterations},
              {"energy", num(r.energy)},       {"converged", r.converged},
              {"positive", r.positive},        {"scale", num(r.scale)},
              {"eps_final", num(r.eps_final)}, {"energy_monotone", r.energy_monotone},
              {"max", num(r.solution.max())}};
}

class RunLog {
 public:
  explicit RunLog(const fs::path& path) : out_(path) {}
  void line(const std::string& s) { out_ << now_text() << " " << s << "\n" << std::flush; }

 private:
  std::ofstream out_;
};

void run_sweep(const ExperimentConfig& cfg, ResultRecord& rec, const std::string& stamp, RunLog& log) {
  SweepConfig sc;
  sc.mode = cfg.kind == ExperimentKind::ball_sweep ? "ball" : "space";
  sc.base = cfg.problem();
  sc.mesh = cfg.mesh;
  sc.eps = cfg.eps;
  sc.mp.tau_deficit_factor = cfg.tau_deficit_factor;
  sc.mp.levels = cfg.levels;
  sc.mp.tol = cfg.lambda_tol;
  sc.mp.seed = cfg.seed;
  sc.deficit_threshold = cfg.deficit_threshold;
  log.line("sweep " + sc.mode + " with " + std::to_string(cfg.eps.size()) + " samples");
  auto res = sweep_experiment(sc);

  write_text(cfg.out / "sweep.csv", sweep_csv(res, stamp));
  rec.artifacts.push_back("sweep.csv");

  Json samples = Json::array();
  std::size_t kept = 0;
  for (const auto& s : res.samples) {
    Json j{{"epsilon", num(s.epsilon)}, {"deficit", num(s.deficit)}, {"dropped", s.dropped}};
    if (s.dropped) {
      j["reason"] = s.reason;
      log.line("dropped eps " + format_double(s.epsilon) + ": " + s.reason);
    } else {
      ++kept;
      j["residual"] = num(s.residual);
      j["scale"] = num(s.scale);
      j["report"] = to_json(s.report);
    }
    samples.push_back(j);
  }
  rec.outputs["baseline"] = num(res.baseline);
  rec.outputs["retained"] = kept;
  rec.outputs["samples"] = samples;

  Json fit{{"seed", cfg.seed}, {"config_hash", rec.config_hash}};
  if (cfg.fit && res.fit) {
    rec.fit = res.fit;
    rec.fit_samples = res.fit_samples;
    fit["fit"] = to_json(*res.fit);
  } else {
    fit["error"] = cfg.fit ? res.fit_error : std::string("fit not requested");
  }
  write_text(cfg.out / "fit.json", fit.dump(2) + "\n");
  rec.artifacts.push_back("fit.json");
  if (rec.fit && rec.fit_samples.size() >= 2)
    for (auto& a : emit_plot_data(rec, cfg.out)) rec.artifacts.push_back(a);
}

void run_solve(const ExperimentConfig& cfg, ResultRecord& rec, RunLog& log) {
  auto spec = cfg.problem();
  SolveReport rep;
  if (cfg.mode == "radial") {
    rep = solve_radial(spec, cfg.mesh.resolution);
  } else {
    auto mesh = std::make_shared<const Mesh>(Mesh::from_params(cfg.mesh));
    rep = solve_dirichlet_2d(spec, mesh);
  }
  log.line("solve finished after " + std::to_string(rep.iterations) + " iterations");
  save_field(rep.solution, cfg.out / "solution");
  rec.artifacts.push_back("solution.csv");
  rec.artifacts.push_back("solution.mesh.json");
  Json j = solve_json(rep);
  j["seed"] = cfg.seed;
  j["config_hash"] = rec.config_hash;
  if (rep.converged) {
    auto a = verify_apriori(rep.solution, spec);
    j["apriori"] = {{"C0", num(a.C0)}, {"C1", num(a.C1)}, {"C2", num(a.C2)}, {"C3", num(a.C3)},
                    {"delta0", num(a.delta0)}, {"barrier_ok", a.barrier_ok}};
  }
  write_text(cfg.out / "solve.json", j.dump(2) + "\n");
  rec.artifacts.push_back("solve.json");
  rec.outputs = j;
  if (!rep.converged) throw NumericalFailure("solver did not reach tolerance (residual " + format_double(rep.residual) + ")");
}

void run_bubble(const ExperimentConfig& cfg, ResultRecord& rec) {
  auto mesh = std::make_shared<const Mesh>(Mesh::from_params(cfg.mesh));
  Point z = cfg.z.empty() ? Point(static_cast<std::size_t>(cfg.n), 0.0) : cfg.z;
  TalentiBubble b(cfg.n, cfg.p, z, cfg.lambda);
  auto u = b.sample(mesh);
  auto g = b.sample_gradient(mesh);
  ScalarField kappa(mesh, 1.0);
  auto q = sobolev_quotient_report(u, g, cfg.p);
  const double S = talenti_constant(cfg.n, cfg.p);
  auto res = critical_residual_report(u, kappa, cfg.p);
  auto d = decay_constants(u, cfg.p, 1.0);
  auto k0 = kappa0(u, kappa, cfg.p);
  Json j;
  j["seed"] = cfg.seed;
  j["config_hash"] = rec.config_hash;
  j["quotient"] = num(q.quotient);
  j["talenti"] = num(S);
  j["quotient_relative_gap"] = num((q.quotient - S) / S);
  j["tail_grad_p"] = num(q.tail_grad_p);
  j["tail_mass"] = num(q.tail_mass);
  j["residual"] = num(res.residual);
  j["kappa0"] = num(k0.kappa0);
  j["decay"] = {{"C0", num(d.C0)}, {"c0", num(d.c0)},     {"c1", num(d.c1)},
                {"R0", num(d.R0)}, {"mass", num(d.mass)}, {"mass_floor", num(d.mass_floor)},
                {"mass_ok", d.mass_ok}};
  write_text(cfg.out / "bubble.json", j.dump(2) + "\n");
  rec.artifacts.push_back("bubble.json");
  if (cfg.dump_fields) {
    save_field(u, cfg.out / "bubble");
    rec.artifacts.push_back("bubble.csv");
    rec.artifacts.push_back("bubble.mesh.json");
  }
  rec.outputs = j;
}

void run_verify(const ExperimentConfig& cfg, ResultRecord& rec, const std::string& stamp, RunLog& log) {
  CheckContext ctx{cfg, {}};
  const auto names = cfg.checks.empty() ? registered_checks() : cfg.checks;
  std::ostringstream csv;
  csv << "# " << stamp << "\ncheck,pass\n";
  Json all = Json::array();
  bool ok = true;
  for (const auto& name : names) {
    log.line("check " + name);
    auto v = dispatch(name, ctx);
    Json j{{"check", v.name}, {"pass", v.pass}, {"seed", cfg.seed}, {"config_hash", rec.config_hash}, {"metrics", v.metrics}};
    write_text(cfg.out / ("verify_" + name + ".json"), j.dump(2) + "\n");
    rec.artifacts.push_back("verify_" + name + ".json");
    csv << name << "," << (v.pass ? "pass" : "fail") << "\n";
    all.push_back({{"check", v.name}, {"pass", v.pass}});
    ok = ok && v.pass;
  }
  write_text(cfg.out / "summary.csv", csv.str());
  rec.artifacts.push_back("summary.csv");
  rec.outputs["verdicts"] = all;
  rec.outputs["all_pass"] = ok;
}

}  // namespace

ResultRecord run(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out);
  ResultRecord rec;
  rec.kind = to_string(cfg.kind);
  rec.config_hash = config_hash(cfg);
  rec.seed = cfg.seed;
  rec.config = cfg.to_json();
  rec.config.erase("out");
  rec.outputs = Json::object();
  rec.started = now_text();
  RunLog log(cfg.out / "run.log");
  log.line("start " + rec.kind + " config " + rec.config_hash + " seed " + std::to_string(cfg.seed));
  const std::string stamp = "seed=" + std::to_string(cfg.seed) + " config=" + rec.config_hash;

  write_text(cfg.out / "config.json", rec.config.dump(2) + "\n");
  rec.artifacts.push_back("config.json");
  try {
    switch (cfg.kind) {
      case ExperimentKind::ball_sweep:
      case ExperimentKind::space_sweep:
        run_sweep(cfg, rec, stamp, log);
        break;
      case ExperimentKind::single_solve:
        run_solve(cfg, rec, log);
        break;
      case ExperimentKind::bubble_report:
        run_bubble(cfg, rec);
        break;
      case ExperimentKind::verify_suite:
        run_verify(cfg, rec, stamp, log);
        break;
    }
  } catch (const NumericalFailure& e) {
    log.line(std::string("numerical failure: ") + e.what());
    throw NumericalFailure(rec.kind + " run " + rec.config_hash + ": " + e.what());
  } catch (const std::exception& e) {
    log.line(std::string("error: ") + e.what());
    throw;
  }
  rec.artifacts.push_back("record.json");
  write_text(cfg.out / "record.json", rec.to_json().dump(2) + "\n");
  rec.finished = now_text();
  log.line("finish");
  return rec;
}

}  // namespace qsym
