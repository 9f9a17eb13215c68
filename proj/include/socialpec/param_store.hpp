#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "socialpec/tensor.hpp"

namespace socialpec {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0))
      throw ShapeError("adam: learning_rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw ShapeError("adam: betas must lie in [0, 1)");
  }
};

// Named, ordered parameter tensors with matching gradient accumulators and
// Adam moment buffers. Iteration order is insertion order.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
  };

  Tensor& add(const std::string& name, Tensor init) {
    if (entries_.count(name))
      throw ShapeError("param store: duplicate parameter '" + name + "'");
    Entry e;
    e.grad = Tensor(init.shape());
    e.m = Tensor(init.shape());
    e.v = Tensor(init.shape());
    e.value = std::move(init);
    order_.push_back(name);
    return entries_.emplace(name, std::move(e)).first->second.value;
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  Tensor& value(const std::string& name) { return entry(name).value; }
  const Tensor& value(const std::string& name) const { return entry(name).value; }
  Tensor& grad(const std::string& name) { return entry(name).grad; }
  const Tensor& grad(const std::string& name) const { return entry(name).grad; }
  Entry& raw_entry(const std::string& name) { return entry(name); }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (const auto& name : order_) n += entry(name).value.numel();
    return n;
  }

  long long step_count() const { return step_; }
  void set_step_count(long long t) { step_ = t; }

  void zero_grads() {
    for (auto& name : order_) entry(name).grad.fill(0.0);
  }

  // Global L2 norm of all gradients (for optional clipping).
  double grad_norm() const {
    double s = 0.0;
    for (const auto& name : order_)
      for (double g : entry(name).grad.vec()) s += g * g;
    return std::sqrt(s);
  }

  void scale_grads(double factor) {
    for (auto& name : order_)
      for (double& g : entry(name).grad.vec()) g *= factor;
  }

  // Bias-corrected Adam update over every parameter; zeroes gradients after.
  void adam_step(const AdamConfig& cfg) {
    cfg.validate();
    ++step_;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (auto& name : order_) {
      Entry& e = entry(name);
      for (std::size_t i = 0; i < e.value.numel(); ++i) {
        const double g = e.grad[i];
        e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g;
        e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = e.m[i] / c1;
        const double vhat = e.v[i] / c2;
        e.value[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
      }
      e.grad.fill(0.0);
    }
  }

 private:
  Entry& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw ShapeError("param store: unknown parameter '" + name + "'");
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw ShapeError("param store: unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
  long long step_ = 0;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) {
  put_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}

inline bool get_u64(std::istream& is, std::uint64_t& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}

inline bool get_f64(std::istream& is, double& v) {
  std::uint64_t u;
  if (!get_u64(is, u)) return false;
  v = std::bit_cast<double>(u);
  return true;
}

inline void write_named_tensor(std::ostream& os, const std::string& name,
                               const Tensor& t) {
  put_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u64(os, d);
  for (double v : t.vec()) put_f64(os, v);
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Checkpoint layout: u32 version, then entries until EOF; each entry is
// u32 name length, name bytes, u32 rank, u64 dims, little-endian f64 data.
// Parameters come first in store order; when with_optimizer_state is set,
// Adam moments follow as "opt.m:<name>" / "opt.v:<name>" plus "opt.t".
inline void save_checkpoint(const ParamStore& store, const std::string& path,
                            bool with_optimizer_state = false) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  detail::put_u32(os, kCheckpointVersion);
  for (const auto& name : store.names())
    detail::write_named_tensor(os, name, store.value(name));
  if (with_optimizer_state) {
    auto& mut = const_cast<ParamStore&>(store);
    for (const auto& name : store.names())
      detail::write_named_tensor(os, "opt.m:" + name, mut.raw_entry(name).m);
    for (const auto& name : store.names())
      detail::write_named_tensor(os, "opt.v:" + name, mut.raw_entry(name).v);
    detail::write_named_tensor(os, "opt.t",
                               Tensor::scalar(static_cast<double>(store.step_count())));
  }
  if (!os) throw DataError("checkpoint: write failed for '" + path + "'");
}

inline std::map<std::string, Tensor> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
  std::uint32_t version = 0;
  if (!detail::get_u32(is, version) || version != kCheckpointVersion)
    throw DataError("checkpoint: '" + path + "' has unsupported format version");
  std::map<std::string, Tensor> out;
  for (;;) {
    std::uint32_t name_len = 0;
    if (!detail::get_u32(is, name_len)) break;  // clean EOF
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw DataError("checkpoint: truncated name in '" + path + "'");
    std::uint32_t rank = 0;
    if (!detail::get_u32(is, rank))
      throw DataError("checkpoint: truncated entry in '" + path + "'");
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint64_t v;
      if (!detail::get_u64(is, v))
        throw DataError("checkpoint: truncated shape in '" + path + "'");
      d = static_cast<std::size_t>(v);
    }
    Tensor t((Shape(shape)));
    for (std::size_t i = 0; i < t.numel(); ++i) {
      if (!detail::get_f64(is, t[i]))
        throw DataError("checkpoint: truncated data in '" + path + "'");
    }
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

// Loads a checkpoint into an already-shaped store; every parameter must be
// present with a matching shape. Restores optimizer state when available.
inline void load_checkpoint_into(ParamStore& store, const std::string& path) {
  auto tensors = read_checkpoint(path);
  for (const auto& name : store.names()) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw DataError("checkpoint: '" + path + "' is missing tensor '" + name + "'");
    if (it->second.shape() != store.value(name).shape())
      throw DataError("checkpoint: tensor '" + name + "' has shape " +
                      shape_str(it->second.shape()) + ", expected " +
                      shape_str(store.value(name).shape()));
    store.value(name) = it->second;
    auto m = tensors.find("opt.m:" + name);
    auto v = tensors.find("opt.v:" + name);
    if (m != tensors.end() && v != tensors.end()) {
      store.raw_entry(name).m = m->second;
      store.raw_entry(name).v = v->second;
    }
  }
  auto t = tensors.find("opt.t");
  if (t != tensors.end())
    store.set_step_count(static_cast<long long>(t->second[0]));
}

}  // namespace socialpec
