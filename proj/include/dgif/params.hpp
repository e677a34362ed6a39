#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dgif/tensor.hpp"
#include "dgif/util.hpp"

namespace dgif {

/// Ordered collection of named trainable tensors. Names are unique and the
/// insertion order is the canonical order for checkpoints, optimizer state,
/// and gradient reports.
class ParamRegistry {
 public:
  /// New trainable tensor initialized uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)).
  Tensor add(const std::string& name, Shape shape, Rng& rng, std::size_t fan_in);
  /// New trainable tensor initialized to zero (bias vectors).
  Tensor add_zeros(const std::string& name, Shape shape);
  /// Registers an externally created tensor (used when loading checkpoints).
  void add_existing(const std::string& name, Tensor t);

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  Tensor find(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t total_coords() const;

  void zero_grads();
  bool grads_finite() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

}  // namespace dgif
