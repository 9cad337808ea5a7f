#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "qsym/field_io.hpp"
#include "qsym/harness.hpp"

using namespace qsym;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("qsym_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_rows(const std::string& csv) {
  std::size_t rows = 0;
  std::istringstream in(csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    ++rows;
  }
  return rows;
}

nlohmann::json ball_sweep_json(const fs::path& out) {
  return {{"kind", "ball-sweep"},
          {"eps", {0.2, 0.1, 0.05}},
          {"mesh", {{"resolution", 12}, {"angular", 24}}},
          {"out", out.string()},
          {"seed", 11}};
}

std::vector<std::string> keys_of(const nlohmann::json& j) {
  try {
    ExperimentConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.keys();
  }
  return {};
}

}  // namespace

TEST_CASE("config defaults and round trip") {
  auto c = ExperimentConfig::from_json(nlohmann::json::object());
  CHECK(c.kind == ExperimentKind::single_solve);
  CHECK(c.mesh.kind == MeshKind::polar_disk);
  auto s = ExperimentConfig::from_json({{"kind", "space-sweep"}, {"eps", {0.008, 0.004, 0.002}}});
  CHECK(s.n == 3);
  CHECK(s.mesh.kind == MeshKind::box);
  CHECK(s.mesh.dim == 3);
  auto back = ExperimentConfig::from_json(nlohmann::json::parse(s.to_json().dump()));
  CHECK(config_hash(back) == config_hash(s));
  CHECK(back.to_json() == s.to_json());
}

TEST_CASE("schema violations list every offending key") {
  auto keys = keys_of({{"kind", "ball-sweep"}, {"eps", {0.1}}, {"bogus", 1}, {"mesh", {{"resolution", "x"}, {"color", 1}}}});
  CHECK(keys == std::vector<std::string>{"bogus", "mesh.color", "mesh.resolution"});
  CHECK(keys_of({{"kind", "nope"}}) == std::vector<std::string>{"kind"});
  CHECK(keys_of({{"seed", -4}}) == std::vector<std::string>{"seed"});
  CHECK(keys_of({{"kind", "ball-sweep"}, {"eps", nlohmann::json::array()}}) == std::vector<std::string>{"eps"});
  CHECK(keys_of({{"kind", "ball-sweep"}, {"eps", {0.1, 0.2, 0.05}}}) == std::vector<std::string>{"eps"});
  CHECK(keys_of({{"kind", "ball-sweep"}, {"eps", {0.1, 0.0}}}) == std::vector<std::string>{"eps"});
  CHECK(keys_of({{"kind", "ball-sweep"}, {"eps", {0.1, 0.2}}, {"fit", false}}).empty());
  CHECK(keys_of({{"problem", {{"f", "cubic"}}}}) == std::vector<std::string>{"problem.f"});
  CHECK(keys_of({{"kind", "verify-suite"}, {"verify", {{"checks", {"nope"}}}}}) == std::vector<std::string>{"verify.checks"});
  CHECK(keys_of({{"kind", "bubble-report"}, {"problem", {{"n", 3}, {"p", 3.5}}}}) == std::vector<std::string>{"problem.p"});
}

TEST_CASE("config hash ignores the output directory only") {
  auto a = ExperimentConfig::from_json(ball_sweep_json("/tmp/a"));
  auto b = ExperimentConfig::from_json(ball_sweep_json("/tmp/b"));
  CHECK(config_hash(a) == config_hash(b));
  auto j = ball_sweep_json("/tmp/a");
  j["seed"] = 12;
  CHECK(config_hash(ExperimentConfig::from_json(j)) != config_hash(a));
  j = ball_sweep_json("/tmp/a");
  j["eps"] = {0.2, 0.1, 0.04};
  CHECK(config_hash(ExperimentConfig::from_json(j)) != config_hash(a));
  j = ball_sweep_json("/tmp/a");
  j["mesh"]["resolution"] = 13;
  CHECK(config_hash(ExperimentConfig::from_json(j)) != config_hash(a));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("ball sweep artifacts and bit-identical rerun") {
  auto d1 = scratch("sweep1"), d2 = scratch("sweep2");
  auto r1 = run(ExperimentConfig::from_json(ball_sweep_json(d1)));
  auto r2 = run(ExperimentConfig::from_json(ball_sweep_json(d2)));
  CHECK(data_rows(slurp(d1 / "sweep.csv")) == 3);
  CHECK(slurp(d1 / "sweep.csv").rfind("# seed=11 config=" + r1.config_hash, 0) == 0);
  REQUIRE(r1.fit.has_value());
  CHECK(r1.fit->alpha > 0.0);
  CHECK(r1.fit_samples.size() == 3);
  CHECK(fs::exists(d1 / "run.log"));
  CHECK(r1.artifacts == r2.artifacts);
  for (const auto& a : r1.artifacts) {
    CAPTURE(a);
    CHECK(slurp(d1 / a) == slurp(d2 / a));
  }
  auto rec = ResultRecord::from_json(nlohmann::json::parse(slurp(d1 / "record.json")));
  CHECK(rec.config_hash == r1.config_hash);
  CHECK(rec.fit->alpha == r1.fit->alpha);
  CHECK(rec.fit_samples.size() == 3);
  CHECK(nlohmann::json::parse(rec.to_json().dump()) == nlohmann::json::parse(r1.to_json().dump()));
}

TEST_CASE("fit table round trip") {
  auto d = scratch("fit");
  auto r = run(ExperimentConfig::from_json(ball_sweep_json(d)));
  std::vector<LogLawSample> pts;
  auto f = fit_from_csv(d / "sweep.csv", &pts);
  CHECK(pts.size() == 3);
  CHECK(f.alpha == r.fit->alpha);
  CHECK(f.C == r.fit->C);
}

TEST_CASE("plot data") {
  auto d = scratch("plot");
  ResultRecord rec;
  rec.config_hash = "0";
  LogLawFit fit;
  fit.C = 2.0;
  fit.alpha = 0.5;
  rec.fit = fit;
  for (double dd : {1e-3, 1e-4, 1e-6, 1e-9})
    rec.fit_samples.push_back({dd, 2.0 * std::pow(std::abs(std::log(2.0 * dd)), -0.5)});
  auto files = emit_plot_data(rec, d);
  CHECK(files.size() == 2);
  auto line = nlohmann::json::parse(slurp(d / "plot_line.json"));
  const double a = line["intercept"].get<double>(), b = line["slope"].get<double>();
  std::istringstream in(slurp(d / "plot.csv"));
  std::string row;
  std::size_t rows = 0;
  while (std::getline(in, row)) {
    if (row.empty() || row[0] == '#' || row[0] == 'l') continue;
    const auto comma = row.find(',');
    const double x = std::stod(row.substr(0, comma)), y = std::stod(row.substr(comma + 1));
    CHECK(std::abs(a + b * x - y) < 1e-6);
    ++rows;
  }
  CHECK(rows == 4);

  ResultRecord single = rec;
  single.fit_samples.resize(1);
  CHECK_THROWS_AS(emit_plot_data(single, d), InvalidInput);
  ResultRecord nofit = rec;
  nofit.fit.reset();
  CHECK_THROWS_AS(emit_plot_data(nofit, d), InvalidInput);
}

TEST_CASE("space sweep with a dropped sample") {
  auto d = scratch("space");
  nlohmann::json j{{"kind", "space-sweep"},
                   {"problem", {{"n", 3}, {"p", 2.5}}},
                   {"eps", {0.5, 0.008, 0.004, 0.002}},
                   {"mesh", {{"kind", "box"}, {"dim", 3}, {"resolution", 17}, {"extent", 3.0}}},
                   {"out", d.string()}};
  auto r = run(ExperimentConfig::from_json(j));
  CHECK(r.outputs["retained"].get<std::size_t>() == 3);
  CHECK(r.outputs["samples"][0]["dropped"].get<bool>());
  CHECK(data_rows(slurp(d / "sweep.csv")) == 3);
  REQUIRE(r.fit.has_value());
  CHECK(data_rows(slurp(d / "plot.csv")) == r.fit_samples.size());
}

TEST_CASE("single solve and bubble report") {
  auto d = scratch("solve");
  nlohmann::json j{{"kind", "single-solve"},
                   {"problem", {{"n", 2}, {"p", 3.0}, {"f", "const:1"}, {"mode", "radial"}}},
                   {"mesh", {{"kind", "radial"}, {"dim", 2}, {"resolution", 200}}},
                   {"out", d.string()}};
  auto r = run(ExperimentConfig::from_json(j));
  CHECK(r.outputs["converged"].get<bool>());
  auto u = load_field(d / "solution");
  CHECK(u.size() == 201);
  auto again = load_field(d / "solution");
  CHECK(std::equal(u.values().begin(), u.values().end(), again.values().begin()));

  auto b = scratch("bubble");
  nlohmann::json bj{{"kind", "bubble-report"},
                    {"problem", {{"n", 3}, {"p", 2.5}}},
                    {"bubble", {{"z", {0.3, -0.2, 0.0}}, {"dump_fields", true}}},
                    {"mesh", {{"resolution", 17}}},
                    {"out", b.string()}};
  auto rb = run(ExperimentConfig::from_json(bj));
  CHECK(fs::exists(b / "bubble.json"));
  CHECK(fs::exists(b / "bubble.csv"));
  CHECK(rb.outputs["quotient"].get<double>() > 0.0);
}

TEST_CASE("verify suite subset and registry") {
  auto names = registered_checks();
  CHECK(names.size() == 9);
  CHECK_THROWS_AS(run_check("nope", ExperimentConfig{}), ConfigError);
  auto d = scratch("verify");
  nlohmann::json j{{"kind", "verify-suite"},
                   {"verify", {{"checks", {"exponent-2M", "fundamental"}}, {"samples", 20000}}},
                   {"out", d.string()}};
  auto r = run(ExperimentConfig::from_json(j));
  CHECK(r.outputs["all_pass"].get<bool>());
  CHECK(r.outputs["verdicts"].size() == 2);
  CHECK(fs::exists(d / "verify_fundamental.json"));
  CHECK(data_rows(slurp(d / "summary.csv")) == 2);
}

TEST_CASE("non-finite values survive the record round trip") {
  ResultRecord rec;
  rec.kind = "ball-sweep";
  LogLawFit f;
  f.residual = INFINITY;
  rec.fit = f;
  auto back = ResultRecord::from_json(nlohmann::json::parse(rec.to_json().dump()));
  CHECK(std::isinf(back.fit->residual));
}
