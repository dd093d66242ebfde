#include "epcag/catalog.hpp"

#include "epcag/errors.hpp"

#include <cmath>
#include <sstream>

namespace epcag {
namespace {

double get(const ParamMap& p, const char* key) { return p.at(key); }

// log cosh without overflow
double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

std::vector<CatalogEntry> build_catalog() {
  std::vector<CatalogEntry> out;

  out.push_back({"zero", "f(t,z,w) = 0", "l = 0", {}, 0,
                 [](const ParamMap&) { return 0.0; },
                 [](const ParamMap&, int n) -> Nonlinearity {
                   return [n](double, const Vector&, const Vector&) {
                     return Vector(Vector::Zero(n));
                   };
                 }});

  out.push_back({"example1-quadratic", "f(t,z,w) = -w^2 (componentwise)",
                 "l = 2 R on the ball of radius R",
                 {{"R", 1.0, "radius on which the Lipschitz bound holds"}}, 0,
                 [](const ParamMap& p) { return 2.0 * get(p, "R"); },
                 [](const ParamMap&, int) -> Nonlinearity {
                   return [](double, const Vector&, const Vector& w) {
                     return Vector(-w.array().square().matrix());
                   };
                 }});

  out.push_back({"epca-linear", "f(t,z,w) = b w", "l = |b|",
                 {{"b", 0.25, "coefficient of the anchored state"}}, 0,
                 [](const ParamMap& p) { return std::abs(get(p, "b")); },
                 [](const ParamMap& p, int) -> Nonlinearity {
                   const double b = get(p, "b");
                   return [b](double, const Vector&, const Vector& w) { return Vector(b * w); };
                 }});

  out.push_back(
      {"damped-cubic",
       "f = eps (rho log cosh(z_2/rho), -s h(w_2) + kc tanh(z_1) tanh(z_2)), "
       "h(x) = x^3/(rho^2 + x^2)",
       "l = eps max(1 + sqrt(2) kc, 9/8)",
       {{"eps", 0.01, "overall size"},
        {"rho", 0.01, "scale below which h is cubic"},
        {"kc", 0.1, "cross coupling"},
        {"s", 1.0, "+1 damped, -1 anti-damped"}},
       2,
       [](const ParamMap& p) {
         return get(p, "eps") * std::max(1.0 + std::sqrt(2.0) * std::abs(get(p, "kc")), 9.0 / 8.0);
       },
       [](const ParamMap& p, int) -> Nonlinearity {
         const double eps = get(p, "eps"), rho = get(p, "rho"), kc = get(p, "kc"), s = get(p, "s");
         return [=](double, const Vector& z, const Vector& w) {
           const double x = w(1);
           Vector out(2);
           out(0) = eps * rho * log_cosh(z(1) / rho);
           out(1) = eps * (-s * x * x * x / (rho * rho + x * x) + kc * std::tanh(z(0)) * std::tanh(z(1)));
           return out;
         };
       }});

  out.push_back({"tanh-coupled",
                 "f = eps (tanh(w_2)/2, (tanh(z_1) + tanh(w_1))/2)", "l = eps",
                 {{"eps", 0.01, "overall size"}}, 2,
                 [](const ParamMap& p) { return std::abs(get(p, "eps")); },
                 [](const ParamMap& p, int) -> Nonlinearity {
                   const double eps = get(p, "eps");
                   return [eps](double, const Vector& z, const Vector& w) {
                     Vector out(2);
                     out(0) = 0.5 * eps * std::tanh(w(1));
                     out(1) = 0.5 * eps * (std::tanh(z(0)) + std::tanh(w(0)));
                     return out;
                   };
                 }});
  return out;
}

}  // namespace

const std::vector<CatalogEntry>& catalog_list() {
  static const std::vector<CatalogEntry> entries = build_catalog();
  return entries;
}

const CatalogEntry& catalog_find(const std::string& name) {
  for (const auto& e : catalog_list()) {
    if (e.name == name) return e;
  }
  throw ParameterError("catalog", "unknown nonlinearity '" + name + "'");
}

ParamMap catalog_params(const CatalogEntry& entry, const ParamMap& given) {
  ParamMap out;
  for (const auto& p : entry.params) out[p.name] = p.default_value;
  for (const auto& [key, value] : given) {
    if (!out.count(key)) {
      throw ParameterError("catalog", "'" + entry.name + "' has no parameter '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

HybridSystem make_catalog_system(const std::string& name, const ParamMap& params, Matrix a,
                                 SystemOptions options, double lipschitz) {
  const auto& entry = catalog_find(name);
  const int n = static_cast<int>(a.rows());
  if (entry.dim != 0 && entry.dim != n) {
    std::ostringstream os;
    os << "'" << name << "' needs dimension " << entry.dim << ", matrix has " << n;
    throw ParameterError("catalog", os.str());
  }
  const auto p = catalog_params(entry, params);
  const double l = lipschitz >= 0.0 ? lipschitz : entry.lipschitz(p);
  if (options.name.empty()) options.name = name;
  if (name == "example1-quadratic") options.probe_radius = p.at("R");
  options.autonomous = true;
  return HybridSystem(std::move(a), entry.make(p, n), l, options);
}

}  // namespace epcag
