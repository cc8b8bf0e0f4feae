#pragma once

#include <map>
#include <string>

#include "molvae/core/ops.hpp"
#include "molvae/model/params.hpp"

namespace molvae::model {

// Per-forward binding of model parameters onto a tape. Parameters become
// leaves on first use; after backward the accumulated leaf gradients map
// back to parameter names.
template <class S>
class ForwardContext {
 public:
  ForwardContext(Tape<S>& tape, Model<S>& model, bool training, bool with_grad)
      : tape_(tape), model_(model), training_(training), with_grad_(with_grad) {}

  Tape<S>& tape() { return tape_; }
  Model<S>& model() { return model_; }
  bool training() const { return training_; }

  Var<S> param(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Var<S> v = tape_.leaf(model_.params.at(name), with_grad_);
    bound_.emplace(name, v);
    return v;
  }

  Var<S> linear(Var<S> x, const std::string& prefix) {
    return ops::add_rowvec(ops::matmul(x, param(prefix + ".w")), param(prefix + ".b"));
  }

  Var<S> batch_norm(Var<S> x, const std::string& prefix) {
    return ops::batch_norm(x, param(prefix + ".gamma"), param(prefix + ".beta"),
                           model_.params.at(prefix + ".rmean"),
                           model_.params.at(prefix + ".rvar"), training_);
  }

  // Gradients of every bound trainable parameter; call after tape.backward.
  std::map<std::string, Tensor<S>> gradients() {
    std::map<std::string, Tensor<S>> out;
    for (const auto& [name, var] : bound_) {
      if (!tape_.requires_grad(var.id)) continue;
      if (tape_.has_grad(var.id)) out.emplace(name, tape_.grad(var.id));
    }
    return out;
  }

 private:
  Tape<S>& tape_;
  Model<S>& model_;
  bool training_;
  bool with_grad_;
  std::map<std::string, Var<S>> bound_;
};

}  // namespace molvae::model
