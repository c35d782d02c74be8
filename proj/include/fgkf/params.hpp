#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fgkf/rng.hpp"
#include "fgkf/value.hpp"

namespace fgkf {

using GradMap = std::map<std::string, std::vector<double>>;
using ParamSnapshot = std::map<std::string, std::vector<double>>;

// Named registry of leaf parameter Values. Names are hierarchical by
// convention ("src.lstm.fw.wx", "rel.bilinear", ...); training phases scope
// their updates with prefix-selected name lists.
class ParamSet {
 public:
  Value create(const std::string& name, int rows, int cols, std::vector<double> data,
               bool trainable = true);
  Value create_uniform(const std::string& name, int rows, int cols, Rng& rng, double radius,
                       bool trainable = true);
  // Glorot-style uniform init for weight matrices.
  Value create_glorot(const std::string& name, int rows, int cols, Rng& rng,
                      bool trainable = true);
  Value create_zeros(const std::string& name, int rows, int cols, bool trainable = true);

  bool has(const std::string& name) const;
  Value get(const std::string& name) const;
  bool trainable(const std::string& name) const;
  void set_trainable(const std::string& name, bool on);

  // Sorted names, optionally restricted to those starting with any prefix.
  std::vector<std::string> names() const;
  std::vector<std::string> names(std::span<const std::string_view> prefixes) const;

  // Gradients from the most recent backward() for the trainable entries of
  // `names`; parameters the loss never reached get explicit zeros.
  GradMap gradients(std::span<const std::string> names) const;

  // Same, but omits parameters the last backward() never reached, so an
  // update step touches only what the loss actually depends on.
  GradMap current_gradients(std::span<const std::string> names) const;

  uint64_t hash(std::span<const std::string> names) const;
  uint64_t hash_prefix(std::string_view prefix) const;

  // Copies values entry-by-entry: "<from><suffix>" -> "<to><suffix>" for every
  // entry under `from`. Shapes must match.
  void copy_prefix(const std::string& from, const std::string& to);

  ParamSnapshot snapshot() const;
  void restore(const ParamSnapshot& snap);

  void save(std::ostream& os) const;
  void load(std::istream& is);

  size_t count() const { return entries_.size(); }

 private:
  struct Entry {
    Value value;
    bool trainable = true;
  };
  std::map<std::string, Entry> entries_;
};

// Global-norm clipping followed by the SGD/L2 step
//   p <- p - lr * (g + l2 * p)
// over the trainable entries of `names`. The norm is taken over all grads in
// the step; frozen entries are left untouched. A trainable name without a
// gradient entry is an error.
void sgd_update(ParamSet& params, std::span<const std::string> names, const GradMap& grads,
                double lr, double l2, double clip);

// Applies the same step to exactly the parameters named in `grads`.
void sgd_update_map(ParamSet& params, const GradMap& grads, double lr, double l2, double clip);

}  // namespace fgkf
