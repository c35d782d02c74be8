#include "fgkf/params.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "fgkf/common.hpp"

namespace fgkf {

Value ParamSet::create(const std::string& name, int rows, int cols, std::vector<double> data,
                       bool trainable) {
  if (entries_.count(name))
    throw Error("ParamSet: duplicate parameter name '" + name + "'");
  Value v = Value::param(rows, cols, std::move(data));
  entries_[name] = Entry{v, trainable};
  return v;
}

Value ParamSet::create_uniform(const std::string& name, int rows, int cols, Rng& rng,
                               double radius, bool trainable) {
  std::vector<double> data(static_cast<size_t>(rows) * cols);
  for (double& x : data) x = rng.uniform(-radius, radius);
  return create(name, rows, cols, std::move(data), trainable);
}

Value ParamSet::create_glorot(const std::string& name, int rows, int cols, Rng& rng,
                              bool trainable) {
  const double r = std::sqrt(6.0 / (rows + cols));
  return create_uniform(name, rows, cols, rng, r, trainable);
}

Value ParamSet::create_zeros(const std::string& name, int rows, int cols, bool trainable) {
  return create(name, rows, cols,
                std::vector<double>(static_cast<size_t>(rows) * cols, 0.0), trainable);
}

bool ParamSet::has(const std::string& name) const { return entries_.count(name) != 0; }

Value ParamSet::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamSet: unknown parameter '" + name + "'");
  return it->second.value;
}

bool ParamSet::trainable(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamSet: unknown parameter '" + name + "'");
  return it->second.trainable;
}

void ParamSet::set_trainable(const std::string& name, bool on) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamSet: unknown parameter '" + name + "'");
  it->second.trainable = on;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

std::vector<std::string> ParamSet::names(std::span<const std::string_view> prefixes) const {
  std::vector<std::string> out;
  for (const auto& [k, _] : entries_)
    for (std::string_view p : prefixes)
      if (k.size() >= p.size() && std::string_view(k).substr(0, p.size()) == p) {
        out.push_back(k);
        break;
      }
  return out;
}

GradMap ParamSet::gradients(std::span<const std::string> names) const {
  GradMap g;
  for (const auto& name : names) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error("ParamSet: unknown parameter '" + name + "'");
    if (!it->second.trainable) continue;
    const Value& v = it->second.value;
    if (v.grad_current()) {
      g[name].assign(v.grad().begin(), v.grad().end());
    } else {
      g[name].assign(static_cast<size_t>(v.size()), 0.0);
    }
  }
  return g;
}

GradMap ParamSet::current_gradients(std::span<const std::string> names) const {
  GradMap g;
  for (const auto& name : names) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error("ParamSet: unknown parameter '" + name + "'");
    if (!it->second.trainable) continue;
    const Value& v = it->second.value;
    if (v.grad_current()) g[name].assign(v.grad().begin(), v.grad().end());
  }
  return g;
}

uint64_t ParamSet::hash(std::span<const std::string> names) const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& name : names) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error("ParamSet: unknown parameter '" + name + "'");
    h = fnv1a64(name, h);
    h = fnv1a64(it->second.value.data(), h);
  }
  return h;
}

uint64_t ParamSet::hash_prefix(std::string_view prefix) const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [k, e] : entries_) {
    if (std::string_view(k).substr(0, prefix.size()) != prefix) continue;
    h = fnv1a64(k, h);
    h = fnv1a64(e.value.data(), h);
  }
  return h;
}

void ParamSet::copy_prefix(const std::string& from, const std::string& to) {
  for (auto& [k, e] : entries_) {
    if (k.compare(0, from.size(), from) != 0) continue;
    const std::string dst = to + k.substr(from.size());
    auto it = entries_.find(dst);
    if (it == entries_.end())
      throw Error("ParamSet: copy target '" + dst + "' does not exist");
    Value& d = it->second.value;
    if (d.rows() != e.value.rows() || d.cols() != e.value.cols())
      throw Error("ParamSet: shape mismatch copying '" + k + "' to '" + dst + "'");
    auto src = e.value.data();
    std::copy(src.begin(), src.end(), d.leaf_data().begin());
  }
}

ParamSnapshot ParamSet::snapshot() const {
  ParamSnapshot snap;
  for (const auto& [k, e] : entries_)
    snap[k].assign(e.value.data().begin(), e.value.data().end());
  return snap;
}

void ParamSet::restore(const ParamSnapshot& snap) {
  for (const auto& [k, data] : snap) {
    auto it = entries_.find(k);
    if (it == entries_.end()) throw Error("ParamSet: cannot restore unknown '" + k + "'");
    Value& v = it->second.value;
    if (data.size() != static_cast<size_t>(v.size()))
      throw Error("ParamSet: snapshot size mismatch for '" + k + "'");
    std::copy(data.begin(), data.end(), v.leaf_data().begin());
  }
}

void ParamSet::save(std::ostream& os) const {
  os << "params " << entries_.size() << "\n";
  os.precision(17);
  for (const auto& [k, e] : entries_) {
    const Value& v = e.value;
    os << k << " " << v.rows() << " " << v.cols() << " " << (e.trainable ? 1 : 0) << "\n";
    auto d = v.data();
    for (size_t i = 0; i < d.size(); ++i) os << (i ? " " : "") << d[i];
    os << "\n";
  }
}

void ParamSet::load(std::istream& is) {
  std::string tag;
  size_t count = 0;
  if (!(is >> tag >> count) || tag != "params")
    throw DataError("checkpoint: missing params section");
  for (size_t i = 0; i < count; ++i) {
    std::string name;
    int rows = 0, cols = 0, trainable = 1;
    if (!(is >> name >> rows >> cols >> trainable))
      throw DataError("checkpoint: truncated parameter header");
    std::vector<double> data(static_cast<size_t>(rows) * cols);
    for (double& x : data)
      if (!(is >> x)) throw DataError("checkpoint: truncated data for '" + name + "'");
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      create(name, rows, cols, std::move(data), trainable != 0);
    } else {
      Value& v = it->second.value;
      if (v.rows() != rows || v.cols() != cols)
        throw DataError("checkpoint: shape mismatch for '" + name + "'");
      std::copy(data.begin(), data.end(), v.leaf_data().begin());
      it->second.trainable = trainable != 0;
    }
  }
}

void sgd_update(ParamSet& params, std::span<const std::string> names, const GradMap& grads,
                double lr, double l2, double clip) {
  if (lr < 0) throw Error("sgd_update: negative learning rate");
  if (clip <= 0) throw Error("sgd_update: clip must be positive");

  double sq = 0.0;
  std::vector<std::pair<std::string, const std::vector<double>*>> work;
  for (const auto& name : names) {
    if (!params.trainable(name)) continue;
    auto it = grads.find(name);
    if (it == grads.end())
      throw Error("sgd_update: missing gradient for trainable parameter '" + name + "'");
    for (double g : it->second) sq += g * g;
    work.emplace_back(name, &it->second);
  }
  const double norm = std::sqrt(sq);
  const double scale = norm > clip ? clip / norm : 1.0;

  for (auto& [name, g] : work) {
    Value v = params.get(name);
    auto p = v.leaf_data();
    for (size_t i = 0; i < p.size(); ++i)
      p[i] -= lr * ((*g)[i] * scale + l2 * p[i]);
  }
}

void sgd_update_map(ParamSet& params, const GradMap& grads, double lr, double l2, double clip) {
  if (lr < 0) throw Error("sgd_update: negative learning rate");
  if (clip <= 0) throw Error("sgd_update: clip must be positive");

  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  const double scale = norm > clip ? clip / norm : 1.0;

  for (const auto& [name, g] : grads) {
    Value v = params.get(name);
    auto p = v.leaf_data();
    if (p.size() != g.size()) throw Error("sgd_update: gradient shape mismatch for '" + name + "'");
    for (size_t i = 0; i < p.size(); ++i) p[i] -= lr * (g[i] * scale + l2 * p[i]);
  }
}

}  // namespace fgkf
