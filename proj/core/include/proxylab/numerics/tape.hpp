#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <vector>

#include "proxylab/numerics/tensor.hpp"

namespace proxylab {

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = kNone;
  bool valid() const { return id != kNone; }
};

/// Reverse-mode gradient tape at tensor granularity.
///
/// Values are appended in evaluation order, so reverse insertion order is a
/// valid reverse topological order for backward(). A non-recording tape keeps
/// values but stores no backward closures, which is how inference runs.
template <typename T>
class Tape {
 public:
  /// Called with the tape and the op's own output handle.
  using Backward = std::function<void(Tape&, Var)>;

  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor<T> value) { return push(std::move(value), nullptr, false); }

  /// Non-owning view of an external tensor; it must outlive the tape.
  Var reference(const Tensor<T>& value, bool requires_grad = false) {
    Node node;
    node.ref = &value;
    node.requires_grad = record_ && requires_grad;
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Var leaf(Tensor<T> value) { return push(std::move(value), nullptr, record_); }

  /// Records an op output. The closure is kept only when some input needs a
  /// gradient.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    if (record_) {
      for (Var v : inputs) needs = needs || requires_grad(v);
    }
    return push(std::move(value), needs ? std::move(backward) : nullptr, needs);
  }

  const Tensor<T>& value(Var v) const {
    const Node& n = node(v);
    return n.ref ? *n.ref : n.value;
  }

  /// Owned values only; used to move large outputs out of a finished tape.
  Tensor<T> take(Var v) {
    Node& n = node(v);
    if (n.ref) return *n.ref;
    return std::move(n.value);
  }

  bool requires_grad(Var v) const { return node(v).requires_grad; }

  bool has_grad(Var v) const { return !node(v).grad.empty(); }

  /// Gradient buffer, zero-initialized on first access.
  Tensor<T>& grad(Var v) {
    Node& n = node(v);
    if (n.grad.empty()) n.grad = Tensor<T>(value(v).shape());
    return n.grad;
  }

  void backward(Var root) {
    if (value(root).size() != 1) {
      throw std::invalid_argument("backward() needs a scalar root, got shape " +
                                  shape_string(value(root).shape()));
    }
    if (!requires_grad(root)) return;
    grad(root)[0] = T{1};
    for (std::uint32_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this, Var{i});
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    Backward backward;
    bool requires_grad = false;
  };

  Var push(Tensor<T> value, Backward backward, bool requires_grad) {
    Node node;
    node.value = std::move(value);
    node.backward = std::move(backward);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw std::out_of_range("invalid tape variable");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw std::out_of_range("invalid tape variable");
    return nodes_[v.id];
  }

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace proxylab
