#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "molvae/core/rng.hpp"
#include "molvae/core/tensor.hpp"

namespace molvae {

// Named parameter set with insertion order preserved, so that a fixed seed
// yields a fixed initialization and update sequence.
template <class S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<S> value;
    bool trainable;
  };

  Tensor<S>& add(const std::string& name, Tensor<S> value, bool trainable = true) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter " + name);
    index_[name] = entries_.size();
    entries_.push_back({name, std::move(value), trainable});
    return entries_.back().value;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor<S>& at(const std::string& name) { return entries_[index_.at(name)].value; }
  const Tensor<S>& at(const std::string& name) const { return entries_[index_.at(name)].value; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

// Adaptive moment estimation with bias correction.
template <class S>
class AdamOptimizer {
 public:
  struct Config {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit AdamOptimizer(Config cfg = {}) : cfg_(cfg) {}

  // grads: parameter name -> gradient (missing entries mean zero gradient,
  // which still advances the moment estimates of touched parameters only).
  void step(ParamStore<S>& params, const std::map<std::string, Tensor<S>>& grads) {
    ++step_count_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, step_count_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, step_count_);
    for (auto& e : params.entries()) {
      if (!e.trainable) continue;
      auto it = grads.find(e.name);
      if (it == grads.end()) continue;
      const Tensor<S>& g = it->second;
      if (!g.same_shape(e.value)) throw std::invalid_argument("gradient shape mismatch: " + e.name);
      auto [m, v] = moments(e.name, e.value);
      for (long i = 0; i < g.size(); ++i) {
        if (!std::isfinite(static_cast<double>(g[i])))
          throw std::runtime_error("non-finite gradient in " + e.name);
        m[i] = S(cfg_.beta1) * m[i] + S(1 - cfg_.beta1) * g[i];
        v[i] = S(cfg_.beta2) * v[i] + S(1 - cfg_.beta2) * g[i] * g[i];
        S mhat = m[i] / S(bc1);
        S vhat = v[i] / S(bc2);
        e.value[i] -= S(cfg_.learning_rate) * mhat / (std::sqrt(vhat) + S(cfg_.eps));
      }
    }
  }

  long step_count() const { return step_count_; }
  const Config& config() const { return cfg_; }

 private:
  std::pair<Tensor<S>&, Tensor<S>&> moments(const std::string& name, const Tensor<S>& like) {
    auto it = state_.find(name);
    if (it == state_.end())
      it = state_.emplace(name, std::make_pair(Tensor<S>(like.rows(), like.cols()),
                                               Tensor<S>(like.rows(), like.cols())))
               .first;
    return {it->second.first, it->second.second};
  }

  Config cfg_;
  long step_count_ = 0;
  std::map<std::string, std::pair<Tensor<S>, Tensor<S>>> state_;
};

// Xavier-uniform weight initialization; biases start at zero.
template <class S>
Tensor<S> xavier_init(long rows, long cols, Rng& rng) {
  Tensor<S> t(rows, cols);
  double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (long i = 0; i < t.size(); ++i)
    t[i] = static_cast<S>((rng.uniform() * 2.0 - 1.0) * bound);
  return t;
}

}  // namespace molvae
