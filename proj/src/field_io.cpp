#include "qsym/field_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qsym/errors.hpp"

namespace qsym {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

fs::path with_suffix(const fs::path& stem, const char* suffix) { return fs::path(stem.string() + suffix); }

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return std::strtod(s.c_str(), nullptr);
}

}  // namespace

void save_field(const ScalarField& u, const fs::path& stem) {
  const Mesh& m = u.mesh();
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  nlohmann::ordered_json meta;
  meta["kind"] = to_string(m.kind());
  meta["dim"] = m.dim();
  meta["resolution"] = m.params().resolution;
  meta["angular"] = m.params().angular;
  meta["R_box"] = m.extent();
  meta["nodes"] = m.size();
  std::ofstream js(with_suffix(stem, ".mesh.json"));
  js << meta.dump(2) << "\n";

  std::ofstream csv(with_suffix(stem, ".csv"));
  const int d = m.coord_dim();
  for (int k = 0; k < d; ++k) csv << (k ? "," : "") << (d == 1 ? "r" : "x" + std::to_string(k + 1));
  csv << ",value\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto x = m.node(i);
    for (int k = 0; k < d; ++k) csv << format_double(x[static_cast<std::size_t>(k)]) << ",";
    csv << format_double(u[i]) << "\n";
  }
  if (!csv) throw InvalidInput("cannot write field to " + stem.string());
}

ScalarField load_field(const fs::path& stem) {
  std::ifstream js(with_suffix(stem, ".mesh.json"));
  if (!js) throw InvalidInput("missing mesh sidecar for " + stem.string());
  nlohmann::json meta;
  try {
    js >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed mesh sidecar: ") + e.what());
  }
  MeshParams p;
  p.kind = mesh_kind_from_string(meta.at("kind").get<std::string>());
  p.dim = meta.at("dim").get<int>();
  p.resolution = meta.at("resolution").get<std::size_t>();
  p.angular = meta.value("angular", std::size_t{0});
  p.extent = meta.at("R_box").get<double>();
  auto mesh = std::make_shared<const Mesh>(Mesh::from_params(p));

  std::ifstream csv(with_suffix(stem, ".csv"));
  if (!csv) throw InvalidInput("missing field csv for " + stem.string());
  std::string line;
  std::getline(csv, line);
  std::vector<double> values;
  values.reserve(mesh->size());
  const int d = mesh->coord_dim();
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    int col = 0;
    double v = 0.0;
    while (std::getline(ls, cell, ',')) {
      if (col == d) v = parse_double(cell);
      ++col;
    }
    if (col != d + 1) throw InvalidInput("field csv row has the wrong column count");
    values.push_back(v);
  }
  if (values.size() != mesh->size()) throw InvalidInput("field csv row count does not match the mesh");
  return ScalarField(mesh, std::move(values));
}

}  // namespace qsym
