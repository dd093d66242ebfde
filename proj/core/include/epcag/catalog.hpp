#pragma once

#include "epcag/system.hpp"

#include <map>
#include <string>
#include <vector>

namespace epcag {

using ParamMap = std::map<std::string, double>;

struct CatalogParam {
  std::string name;
  double default_value = 0.0;
  std::string description;
};

/// A registered nonlinearity with its analytic Lipschitz constant.
struct CatalogEntry {
  std::string name;
  std::string formula;
  std::string lipschitz_formula;
  std::vector<CatalogParam> params;
  /// Required state dimension, 0 when any dimension works.
  int dim = 0;
  double (*lipschitz)(const ParamMap&) = nullptr;
  Nonlinearity (*make)(const ParamMap&, int n) = nullptr;
};

const std::vector<CatalogEntry>& catalog_list();

/// Throws ParameterError for unknown names.
const CatalogEntry& catalog_find(const std::string& name);

/// Defaults merged with `given`; unknown parameter names throw ParameterError.
ParamMap catalog_params(const CatalogEntry& entry, const ParamMap& given);

/// Builds z' = A z + f with f from the catalog. The declared Lipschitz
/// constant is the catalog formula unless `lipschitz` is non-negative.
HybridSystem make_catalog_system(const std::string& name, const ParamMap& params, Matrix a,
                                 SystemOptions options = {}, double lipschitz = -1.0);

}  // namespace epcag
