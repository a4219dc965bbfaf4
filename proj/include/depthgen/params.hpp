#pragma once

#include <map>
#include <string>

#include "depthgen/autograd.hpp"
#include "depthgen/rng.hpp"
#include "depthgen/tensor.hpp"

namespace depthgen {

// deterministic initializers (draw order is row-major element order)
Tensor init_uniform(const Shape& shape, double a, double b, Rng& rng);
Tensor init_normal(const Shape& shape, double mu, double sigma, Rng& rng);
Tensor init_trunc_normal(const Shape& shape, double sigma, Rng& rng);

/// Named set of trainable leaves. Iteration order is the sorted name
/// order, which fixes checkpoint layout and optimizer update order.
class ParamStore {
 public:
  /// Registers a new leaf; throws on duplicate names.
  Var add(const std::string& name, Tensor init);
  Var get(const std::string& name) const;  // throws on unknown name
  bool has(const std::string& name) const { return items_.count(name) != 0; }

  std::size_t size() const { return items_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  const std::map<std::string, Var>& items() const { return items_; }

  /// "DGT1" container: per param (sorted by name) a u16 name length,
  /// the UTF-8 name, u8 ndims, u64 little-endian dims, f64 values.
  void save(const std::string& path) const;
  /// Strict load: the file must hold exactly this store's names with
  /// matching shapes. Values are overwritten in place.
  void load(const std::string& path);

 private:
  std::map<std::string, Var> items_;
};

}  // namespace depthgen
