#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace molvae {

// Dense row-major tensor. Copies share storage; tape values are treated as
// immutable once created, parameters are uniquely owned by their store.
template <class S>
class Tensor {
 public:
  Tensor() : shape_{0, 0} {}
  Tensor(long rows, long cols)
      : shape_{rows, cols},
        data_(std::make_shared<std::vector<S>>(static_cast<std::size_t>(rows * cols), S(0))) {}

  static Tensor scalar(S v) {
    Tensor t(1, 1);
    (*t.data_)[0] = v;
    return t;
  }
  static Tensor from(long rows, long cols, std::vector<S> values) {
    if (static_cast<long>(values.size()) != rows * cols)
      throw std::invalid_argument("tensor data size does not match shape");
    Tensor t;
    t.shape_ = {rows, cols};
    t.data_ = std::make_shared<std::vector<S>>(std::move(values));
    return t;
  }

  long rows() const { return shape_[0]; }
  long cols() const { return shape_[1]; }
  long size() const { return shape_[0] * shape_[1]; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  S* data() { return data_->data(); }
  const S* data() const { return data_->data(); }
  S& at(long r, long c) { return (*data_)[r * shape_[1] + c]; }
  S at(long r, long c) const { return (*data_)[r * shape_[1] + c]; }
  S& operator[](long i) { return (*data_)[i]; }
  S operator[](long i) const { return (*data_)[i]; }
  S value() const {
    if (size() != 1) throw std::logic_error("value() on non-scalar tensor");
    return (*data_)[0];
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<S>>(*data_);
    return t;
  }

  template <class T>
  Tensor<T> cast() const {
    Tensor<T> out(rows(), cols());
    for (long i = 0; i < size(); ++i) out[i] = static_cast<T>((*data_)[i]);
    return out;
  }

  bool allocated() const { return data_ != nullptr; }

 private:
  std::vector<long> shape_;
  std::shared_ptr<std::vector<S>> data_;
};

template <class S>
class Tape;

// Handle to a tape node.
template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<S>& val() const;
  long rows() const { return val().rows(); }
  long cols() const { return val().cols(); }
};

// Reverse-mode tape. Nodes are appended in creation order, which is a
// topological order; backward walks them once in reverse.
template <class S>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  Var<S> leaf(Tensor<S> value, bool requires_grad = false) {
    nodes_.push_back({std::move(value), Tensor<S>{}, {}, nullptr, requires_grad});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Var<S> constant(Tensor<S> value) { return leaf(std::move(value), false); }

  Var<S> emplace(Tensor<S> value, std::vector<int> parents, BackwardFn backward) {
    bool needs_grad = false;
    for (int p : parents) needs_grad = needs_grad || nodes_[p].requires_grad;
    nodes_.push_back({std::move(value), Tensor<S>{}, std::move(parents),
                      needs_grad ? std::move(backward) : nullptr, needs_grad});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<S>& value(int id) const { return nodes_[id].value; }

  Tensor<S>& grad(int id) {
    Node& n = nodes_[id];
    if (!n.grad.allocated() || n.grad.size() == 0)
      n.grad = Tensor<S>(n.value.rows(), n.value.cols());
    return n.grad;
  }
  bool has_grad(int id) const {
    return nodes_[id].grad.allocated() && nodes_[id].grad.size() > 0;
  }

  // Accumulates gradients for every node reachable from `loss`, which must
  // be scalar. A tape can only run backward once.
  void backward(Var<S> loss) {
    if (loss.tape != this) throw std::logic_error("loss from another tape");
    if (nodes_[loss.id].value.size() != 1)
      throw std::logic_error("backward requires a scalar loss");
    if (ran_backward_) throw std::logic_error("backward already ran on this tape");
    ran_backward_ = true;
    grad(loss.id)[0] = S(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward || !has_grad(i)) continue;
      n.backward(*this, i);
    }
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad;
  };
  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

template <class S>
const Tensor<S>& Var<S>::val() const {
  return tape->value(id);
}

}  // namespace molvae
