#include "qsym/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qsym/errors.hpp"

namespace qsym {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw InvalidInput("cannot parse number '" + s + "'");
  }
  if (pos != s.size()) throw InvalidInput("cannot parse number '" + s + "'");
  return v;
}

void parse_table(const std::string& body, std::vector<double>& xs, std::vector<double>& ys) {
  for (const auto& pair : split(body, ';')) {
    auto v = split(pair, ',');
    if (v.size() != 2) throw InvalidInput("table entries must be 'x,y' pairs");
    xs.push_back(to_double(v[0]));
    ys.push_back(to_double(v[1]));
  }
  if (xs.size() < 2) throw InvalidInput("table needs at least two entries");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw InvalidInput("table abscissae must increase strictly");
}

double table_eval(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto k = static_cast<std::size_t>(it - xs.begin());
  const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return (1.0 - t) * ys[k - 1] + t * ys[k];
}

std::pair<std::string, std::string> family(const std::string& text) {
  const auto c = text.find(':');
  if (c == std::string::npos) return {text, ""};
  return {text.substr(0, c), text.substr(c + 1)};
}

std::string join_table(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? ";" : "") << xs[i] << "," << ys[i];
  return os.str();
}

}  // namespace

Nonlinearity Nonlinearity::constant(double c) {
  Nonlinearity f;
  f.kind = Kind::constant;
  f.scale = c;
  return f;
}

Nonlinearity Nonlinearity::power(double F, double exponent) {
  Nonlinearity f;
  f.kind = Kind::power;
  f.scale = F;
  f.exponent = exponent;
  return f;
}

Nonlinearity Nonlinearity::tabulated(std::vector<double> u, std::vector<double> v) {
  if (u.size() != v.size() || u.size() < 2) throw InvalidInput("tabulated f needs matching tables of length >= 2");
  Nonlinearity f;
  f.kind = Kind::tabulated;
  f.u_table = std::move(u);
  f.f_table = std::move(v);
  return f;
}

Nonlinearity Nonlinearity::parse(const std::string& text, double p) {
  auto [name, body] = family(text);
  if (name == "const" || name == "constant") return constant(body.empty() ? 1.0 : to_double(body));
  if (name == "power") return power(body.empty() ? 1.0 : to_double(body), p - 1.0);
  if (name == "table") {
    std::vector<double> u, v;
    parse_table(body, u, v);
    return tabulated(std::move(u), std::move(v));
  }
  throw InvalidInput("unknown nonlinearity family '" + name + "'");
}

std::string Nonlinearity::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::constant: os << "const:" << scale; break;
    case Kind::power: os << "power:" << scale << "^" << exponent; break;
    case Kind::tabulated: os << "table:" << join_table(u_table, f_table); break;
  }
  return os.str();
}

double Nonlinearity::operator()(double u) const {
  switch (kind) {
    case Kind::constant: return scale;
    case Kind::power: return scale * std::pow(std::max(u, 0.0), exponent);
    case Kind::tabulated: return table_eval(u_table, f_table, u);
  }
  return 0.0;
}

double Nonlinearity::primitive(double u) const {
  switch (kind) {
    case Kind::constant: return scale * u;
    case Kind::power: return scale * std::pow(std::max(u, 0.0), exponent + 1.0) / (exponent + 1.0);
    case Kind::tabulated: {
      // trapezoid on the breakpoints is exact for the piecewise-linear table
      double s = 0.0, x = 0.0;
      const double sign = u >= 0.0 ? 1.0 : -1.0;
      const double end = std::abs(u);
      std::vector<double> pts{0.0};
      for (double t : u_table)
        if (t > 0.0 && t < end) pts.push_back(t);
      pts.push_back(end);
      for (std::size_t k = 1; k < pts.size(); ++k) {
        x = pts[k];
        s += 0.5 * (pts[k] - pts[k - 1]) * ((*this)(sign * pts[k - 1]) + (*this)(sign * x));
      }
      return sign * s;
    }
  }
  return 0.0;
}

double Nonlinearity::lipschitz(double umax) const {
  switch (kind) {
    case Kind::constant: return 0.0;
    case Kind::power:
      if (exponent >= 1.0) return std::abs(scale) * exponent * std::pow(umax, exponent - 1.0);
      return std::numeric_limits<double>::infinity();
    case Kind::tabulated: {
      double L = 0.0;
      for (std::size_t k = 1; k < u_table.size(); ++k)
        L = std::max(L, std::abs(f_table[k] - f_table[k - 1]) / (u_table[k] - u_table[k - 1]));
      return L;
    }
  }
  return 0.0;
}

bool Nonlinearity::homogeneous(double p) const { return kind == Kind::power && std::abs(exponent - (p - 1.0)) < 1e-14; }

// ---------------------------------------------------------------------------

Coefficient Coefficient::constant(double c) {
  Coefficient k;
  k.kind = Kind::constant;
  k.base = c;
  return k;
}

Coefficient Coefficient::affine(double base, double epsilon, std::vector<double> direction) {
  Coefficient k;
  k.kind = Kind::affine;
  k.base = base;
  k.epsilon = epsilon;
  k.direction = std::move(direction);
  return k;
}

Coefficient Coefficient::radial_table(std::vector<double> r, std::vector<double> v) {
  if (r.size() != v.size() || r.size() < 2) throw InvalidInput("radial kappa table needs matching entries");
  Coefficient k;
  k.kind = Kind::radial_table;
  k.r_table = std::move(r);
  k.k_table = std::move(v);
  return k;
}

Coefficient Coefficient::parse(const std::string& text) {
  auto [name, body] = family(text);
  if (name == "const" || name == "constant") return constant(body.empty() ? 1.0 : to_double(body));
  if (name == "affine") {
    auto v = split(body, ',');
    if (v.size() < 2 || v.size() > 3) throw InvalidInput("affine kappa expects 'base,eps[,axis]'");
    std::vector<double> dir;
    if (v.size() == 3) {
      const int axis = static_cast<int>(to_double(v[2]));
      if (axis < 1 || axis > 4) throw InvalidInput("affine kappa axis must be 1..4");
      dir.assign(static_cast<std::size_t>(axis), 0.0);
      dir.back() = 1.0;
    }
    return affine(to_double(v[0]), to_double(v[1]), dir);
  }
  if (name == "radial") {
    std::vector<double> r, v;
    parse_table(body, r, v);
    return radial_table(std::move(r), std::move(v));
  }
  throw InvalidInput("unknown kappa family '" + name + "'");
}

std::string Coefficient::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::constant: os << "const:" << base; break;
    case Kind::affine:
      os << "affine:" << base << "," << epsilon;
      if (!direction.empty()) {
        os << ",[";
        for (std::size_t k = 0; k < direction.size(); ++k) os << (k ? " " : "") << direction[k];
        os << "]";
      }
      break;
    case Kind::radial_table: os << "radial:" << join_table(r_table, k_table); break;
  }
  return os.str();
}

bool Coefficient::radial() const { return kind != Kind::affine || epsilon == 0.0; }

double Coefficient::at_radius(double r) const {
  switch (kind) {
    case Kind::constant: return base;
    case Kind::affine:
      if (epsilon != 0.0) throw InvalidInput("affine kappa is not radial");
      return base;
    case Kind::radial_table: return table_eval(r_table, k_table, r);
  }
  return 0.0;
}

double Coefficient::operator()(std::span<const double> x, int n) const {
  if (x.size() == 1 && n > 1) return at_radius(std::abs(x[0]));
  switch (kind) {
    case Kind::constant: return base;
    case Kind::affine: {
      double s = 0.0;
      if (direction.empty()) {
        s = x[static_cast<std::size_t>(n - 1)];
      } else {
        for (std::size_t k = 0; k < direction.size() && k < x.size(); ++k) s += direction[k] * x[k];
      }
      return base + epsilon * s;
    }
    case Kind::radial_table: {
      double r = 0.0;
      for (double v : x) r += v * v;
      return table_eval(r_table, k_table, std::sqrt(r));
    }
  }
  return 0.0;
}

ScalarField Coefficient::sample(const MeshPtr& mesh) const {
  const int n = mesh->dim();
  return ScalarField::sample(mesh, [&](std::span<const double> x) { return (*this)(x, n); });
}

// ---------------------------------------------------------------------------

double ProblemSpec::critical_exponent() const {
  if (p < n) return n * p / (n - p);
  return std::numeric_limits<double>::infinity();
}

void ProblemSpec::validate(const Mesh& mesh, double umax) const {
  if (n < 2) throw InvalidInput("dimension n must be >= 2");
  if (!(p > 1.0)) throw InvalidInput("exponent p must exceed 1");
  if (p < n && !(critical_exponent() > p)) throw InvalidInput("critical exponent must exceed p");
  if (!(tol > 0.0)) throw InvalidInput("solver tolerance must be positive");
  if (max_iter < 1) throw InvalidInput("max_iter must be positive");
  if (!(eps_reg > 0.0) || !(eps_floor > 0.0) || eps_floor > eps_reg) throw InvalidInput("bad regularization schedule");
  for (int k = 0; k <= 200; ++k) {
    const double u = umax * k / 200.0;
    const double v = f(u);
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("nonlinearity f must be non-negative on [0, inf)");
    if (power_bound > 0.0 && v > power_bound * std::pow(u, p - 1.0) * (1.0 + 1e-12))
      throw InvalidInput("nonlinearity exceeds the declared power bound F u^{p-1}");
  }
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double k = kappa(mesh.node(i), n);
    if (!(k > 0.0)) throw InvalidInput("coefficient kappa must be strictly positive on the region");
  }
}

}  // namespace qsym
