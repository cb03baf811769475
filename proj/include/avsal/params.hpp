#ifndef AVSAL_PARAMS_HPP
#define AVSAL_PARAMS_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "avsal/rng.hpp"
#include "avsal/tensor.hpp"

namespace avsal {

// Ordered collection of named trainable tensors. Insertion order is the
// canonical order everywhere (optimizer state, checkpoints, gradient
// accumulation), which keeps training bit-reproducible.
template <typename S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<S> value;
    bool sampled;  // true when drawn from the truncated normal at init
  };

  std::size_t add(std::string name, Tensor<S> value, bool sampled) {
    if (index_.count(name)) throw ArgumentError(cat("duplicate parameter ", name));
    const std::size_t i = entries_.size();
    index_.emplace(name, i);
    entries_.push_back(Entry{std::move(name), std::move(value), sampled});
    return i;
  }

  std::size_t add_sampled(std::string name, Shape shape, Rng& rng, double sigma = 0.05,
                          double cutoff = 2.0) {
    Tensor<S> t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i)
      t[i] = static_cast<S>(rng.truncated_normal(sigma, cutoff));
    return add(std::move(name), std::move(t), true);
  }

  std::size_t size() const { return entries_.size(); }

  std::size_t find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError(cat("unknown parameter ", name));
    return it->second;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<S>& value(std::size_t i) { return entries_.at(i).value; }
  const Tensor<S>& value(std::size_t i) const { return entries_.at(i).value; }
  Tensor<S>& value(const std::string& name) { return entries_.at(find(name)).value; }
  const Tensor<S>& value(const std::string& name) const { return entries_.at(find(name)).value; }
  const std::string& name(std::size_t i) const { return entries_.at(i).name; }
  bool sampled(std::size_t i) const { return entries_.at(i).sampled; }

  std::int64_t total_scalars() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Adam with bias correction. Moment math runs in double per element; the
// stored moments and parameters keep S precision.
template <typename S>
class Adam {
 public:
  Adam(const ParamStore<S>& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    m_.reserve(store.size());
    v_.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
      m_.emplace_back(store.value(i).shape());
      v_.emplace_back(store.value(i).shape());
    }
  }

  void step(ParamStore<S>& store, const std::vector<Tensor<S>>& grads) {
    if (grads.size() != m_.size())
      throw ArgumentError(cat("gradient count ", grads.size(), " != parameter count ", m_.size()));
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < m_.size(); ++p) {
      Tensor<S>& w = store.value(p);
      const Tensor<S>& g = grads[p];
      if (!w.same_shape(g))
        throw ShapeError(cat("gradient shape ", shape_str(g.shape()), " for parameter ",
                             store.name(p), " ", shape_str(w.shape())));
      for (std::int64_t i = 0; i < w.numel(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = b1_ * static_cast<double>(m_[p][i]) + (1.0 - b1_) * gi;
        const double vi = b2_ * static_cast<double>(v_[p][i]) + (1.0 - b2_) * gi * gi;
        m_[p][i] = static_cast<S>(mi);
        v_[p][i] = static_cast<S>(vi);
        const double mhat = mi / c1;
        const double vhat = vi / c2;
        w[i] = static_cast<S>(static_cast<double>(w[i]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  std::int64_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor<S>> m_, v_;
};

}  // namespace avsal

#endif  // AVSAL_PARAMS_HPP
