#include "dgif/params.hpp"

#include <cmath>

#include "dgif/error.hpp"

namespace dgif {

Tensor ParamRegistry::add(const std::string& name, Shape shape, Rng& rng,
                          std::size_t fan_in) {
  if (contains(name)) {
    throw ContractError("parameter registered twice: " + name);
  }
  if (fan_in == 0) {
    throw ContractError("parameter " + name + ": fan_in must be positive");
  }
  Tensor t(shape);
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (double& v : t.values()) {
    v = rng.uniform(-bound, bound);
  }
  t.set_requires_grad(true);
  items_.emplace_back(name, t);
  return t;
}

Tensor ParamRegistry::add_zeros(const std::string& name, Shape shape) {
  if (contains(name)) {
    throw ContractError("parameter registered twice: " + name);
  }
  Tensor t(shape);
  t.set_requires_grad(true);
  items_.emplace_back(name, t);
  return t;
}

void ParamRegistry::add_existing(const std::string& name, Tensor t) {
  if (contains(name)) {
    throw ContractError("parameter registered twice: " + name);
  }
  t.set_requires_grad(true);
  items_.emplace_back(name, std::move(t));
}

Tensor ParamRegistry::find(const std::string& name) const {
  for (const auto& [n, t] : items_) {
    if (n == name) return t;
  }
  throw ContractError("unknown parameter: " + name);
}

bool ParamRegistry::contains(const std::string& name) const {
  for (const auto& [n, t] : items_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t ParamRegistry::total_coords() const {
  std::size_t total = 0;
  for (const auto& [n, t] : items_) total += t.size();
  return total;
}

void ParamRegistry::zero_grads() {
  for (auto& [n, t] : items_) t.zero_grad();
}

bool ParamRegistry::grads_finite() const {
  for (const auto& [n, t] : items_) {
    for (double g : t.grad_or_empty()) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

}  // namespace dgif
