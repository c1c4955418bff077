#pragma once

#include <cstdint>

#include "quantlab/mat.hpp"

namespace quantlab::autodiff {

using numerics::Mat;

// Long-lived trainable value. Graphs bind to it via Graph::param; backward
// passes accumulate into grad until zero_grad() is called.
struct Param {
  Mat value;
  Mat grad;

  Param() = default;
  explicit Param(Mat v) : value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.reuse_zero(value.rows(), value.cols()); }
};

class Graph;

// Handle to a node on a Graph. Cheap to copy; valid until the graph is
// cleared or destroyed.
class Tensor {
 public:
  Tensor() = default;

  int rows() const;
  int cols() const;
  const Mat& value() const;
  // Gradient of the last backward()'s loss w.r.t. this tensor. Throws
  // std::logic_error if the tensor is untracked or backward has not run.
  const Mat& grad() const;
  bool tracked() const;
  Graph* graph() const { return g_; }

 private:
  friend class Graph;
  Tensor(Graph* g, int id) : g_(g), id_(id) {}

  Graph* g_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape over dense 2-D double matrices. Build a fresh expression
// per training update, call backward once on a scalar loss, then clear();
// node storage is recycled across updates. Single-threaded by design: one
// graph belongs to one run.
//
// Broadcasting is limited to a 1x1 right operand for add/sub/mul/div;
// everything else requires exact shape agreement.
class Graph {
 public:
  Graph();
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  Tensor constant(Mat v);          // no gradient tracking
  Tensor constant_like(const Mat& v);  // constant holding a copy of v, backed by the recycle pool
  Tensor scalar(double v);         // 1x1 constant
  Tensor leaf(Mat v);              // tracked input (grad available after backward)
  Tensor param(Param& p);          // tracked; backward adds into p.grad

  // Borrows a buffer from the recycle pool (contents unspecified). Meant for
  // values built in place and then moved into constant() or
  // straight_through(), so per-update workloads reach a zero-allocation
  // steady state.
  Mat acquire(int rows, int cols);

  // Ops.
  Tensor matmul(Tensor a, Tensor b);
  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor mul(Tensor a, Tensor b);  // elementwise
  Tensor div(Tensor a, Tensor b);  // elementwise; exact-zero divisor is an error
  // Identity forward, blocks gradient flow to ancestors.
  Tensor stop_grad(Tensor a);
  // Forwards the given values verbatim (bit-exact) while passing gradients
  // through to a unchanged, as if the op were the identity on a. This is the
  // quantizer-bridge primitive: composing a + stop_grad(q - a) in floating
  // point would not reproduce q's bits, this does. The Tensor overload takes
  // the values from an untracked node (typically a constant) without leaving
  // the pool.
  Tensor straight_through(Tensor a, Mat forward_values);
  Tensor straight_through(Tensor a, Tensor forward_values);
  Tensor prelu(Tensor a, Tensor slope);  // slope is 1x1
  Tensor mean_all(Tensor a);
  // Population standard deviation over all elements, sqrt(var + 1e-12); the
  // epsilon keeps the backward pass finite on constant input.
  Tensor std_all(Tensor a);
  Tensor sum_all(Tensor a);
  Tensor mse(Tensor a, Tensor b);

  // Reverse sweep from a 1x1 loss. Tracked nodes receive grads; params
  // accumulate. May be called once per build; clear() re-arms.
  void backward(Tensor loss);

  // Drops all nodes and recycles their storage. Params persist.
  void clear();

  int size() const;
  bool backward_ran() const { return backward_ran_; }

  static constexpr double kStdEps = 1e-12;

 private:
  friend class Tensor;
  struct Node;
  struct Impl;
  Impl* im_;
  bool backward_ran_ = false;

  const Node& node(int id) const;
  Node& node(int id);
  int push(Node n);
  Tensor binary_elementwise(int kind, Tensor a, Tensor b);
  void check_same_graph(Tensor t) const;
};

}  // namespace quantlab::autodiff
