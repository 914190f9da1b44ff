#pragma once

#include <map>
#include <string>
#include <utility>

#include "bilevel/expr.hpp"

namespace bilevel {

/**
 * Dual multipliers grouped into named blocks.
 *
 * Block names used across the library:
 *   generic solver output: "ineq", "eq" (and "lower", "upper" for LP bounds)
 *   WDP KKT certificates:  "eta_g", "eta_u", "alpha", "beta", "upper", "h", "u_cap"
 *   MPEC S-stationarity:   "lambda_g", "lambda_u", "gamma", "upper", "h"
 * Sign convention everywhere: ∇F + Σ mult_i ∇c_i = 0, with inequality
 * multipliers nonnegative for constraints written as c_i ≤ 0.
 */
class MultiplierSet {
 public:
  void set(const std::string& name, Vector values) { blocks_[name] = std::move(values); }

  bool has(const std::string& name) const { return blocks_.contains(name); }

  const Vector& get(const std::string& name) const {
    auto it = blocks_.find(name);
    if (it == blocks_.end()) {
      throw Error(ErrorCode::kInvalidArgument, "no multiplier block named '" + name + "'");
    }
    return it->second;
  }

  const std::map<std::string, Vector>& blocks() const { return blocks_; }

  bool empty() const { return blocks_.empty(); }

 private:
  std::map<std::string, Vector> blocks_;
};

}  // namespace bilevel
