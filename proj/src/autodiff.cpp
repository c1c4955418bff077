#include "quantlab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace quantlab::autodiff {

namespace {

// Reductions below use four independent partial sums folded as
// ((s0+s1)+(s2+s3)) plus a sequential tail. A single-accumulator loop cannot
// be vectorized or pipelined under strict FP semantics (addition order is
// observable), so it runs at FMA-latency speed; four fixed lanes are ~4x
// faster and still give one deterministic, platform-stable result.

// sum(x)
double sum4(const double* x, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int t = 0;
  for (; t + 4 <= n; t += 4) {
    s0 += x[t];
    s1 += x[t + 1];
    s2 += x[t + 2];
    s3 += x[t + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; t < n; ++t) s += x[t];
  return s;
}

// sum(x * y)
double dot4(const double* x, const double* y, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int t = 0;
  for (; t + 4 <= n; t += 4) {
    s0 += x[t] * y[t];
    s1 += x[t + 1] * y[t + 1];
    s2 += x[t + 2] * y[t + 2];
    s3 += x[t + 3] * y[t + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; t < n; ++t) s += x[t] * y[t];
  return s;
}

// sum((x - mu)^2)
double sqdev4(const double* x, double mu, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int t = 0;
  for (; t + 4 <= n; t += 4) {
    const double d0 = x[t] - mu, d1 = x[t + 1] - mu, d2 = x[t + 2] - mu, d3 = x[t + 3] - mu;
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; t < n; ++t) {
    const double d = x[t] - mu;
    s += d * d;
  }
  return s;
}

// sum((x - y)^2)
double sqdiff4(const double* x, const double* y, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int t = 0;
  for (; t + 4 <= n; t += 4) {
    const double d0 = x[t] - y[t], d1 = x[t + 1] - y[t + 1], d2 = x[t + 2] - y[t + 2], d3 = x[t + 3] - y[t + 3];
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; t < n; ++t) {
    const double d = x[t] - y[t];
    s += d * d;
  }
  return s;
}

enum class OpKind {
  kConstant,
  kLeaf,
  kParam,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kStopGrad,
  kStraightThrough,
  kPrelu,
  kMeanAll,
  kStdAll,
  kSumAll,
  kMse,
};

// gA += g * B^T. B is staged transposed in a per-thread scratch so the inner
// accumulation is an elementwise FMA over contiguous memory; a dot-product
// formulation would serialize on its accumulator (strict FP addition order
// cannot be vectorized) and run several times slower. The per-(i,j) addition
// order over t is unchanged, so results stay bit-identical to the naive loop.
void acc_matmul_nt(const Mat& g, const Mat& b, Mat& ga) {
  static thread_local Mat bt;
  const int m = ga.rows(), k = ga.cols(), n = g.cols();
  if (k == 1) {  // column result (e.g. bias grads): plain row-by-row dots
    for (int i = 0; i < m; ++i) ga[i] += dot4(g.data() + static_cast<size_t>(i) * n, b.data(), n);
    return;
  }
  bt.reuse_shape(n, k);
  for (int t = 0; t < n; ++t) {
    double* bt_row = bt.data() + static_cast<size_t>(t) * k;
    const double* b_col = b.data() + t;
    for (int j = 0; j < k; ++j) bt_row[j] = b_col[static_cast<size_t>(j) * n];
  }
  for (int i = 0; i < m; ++i) {
    const double* gi = g.data() + static_cast<size_t>(i) * n;
    double* ai = ga.data() + static_cast<size_t>(i) * k;
    for (int t = 0; t < n; ++t) {
      const double s = gi[t];
      const double* bt_row = bt.data() + static_cast<size_t>(t) * k;
      for (int j = 0; j < k; ++j) ai[j] += s * bt_row[j];
    }
  }
}

// gB += A^T * g. Inner loop is an axpy over contiguous rows.
void acc_matmul_tn(const Mat& a, const Mat& g, Mat& gb) {
  const int m = a.rows(), k = a.cols(), n = g.cols();
  for (int i = 0; i < m; ++i) {
    const double* ai = a.data() + static_cast<size_t>(i) * k;
    const double* gi = g.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < k; ++j) {
      const double s = ai[j];
      double* bj = gb.data() + static_cast<size_t>(j) * n;
      for (int t = 0; t < n; ++t) bj[t] += s * gi[t];
    }
  }
}

}  // namespace

struct Graph::Node {
  OpKind op = OpKind::kConstant;
  int a = -1;
  int b = -1;
  Mat value;
  Mat grad;
  Param* bound = nullptr;
  bool needs_grad = false;
  bool has_grad = false;
  double aux0 = 0.0;  // std_all: mean
  double aux1 = 0.0;  // std_all: sigma
};

struct Graph::Impl {
  std::vector<Node> nodes;
  // Recycled buffers, bucketed by capacity. take() picks the smallest block
  // that fits (falling back to the largest available), so the recurring
  // shapes of a training loop are served without any reallocation once the
  // pool is warm. Bounded so pathological workloads cannot hoard memory.
  std::map<size_t, std::vector<Mat>> pool;
  int pooled = 0;
  static constexpr int kPoolCapacity = 512;

  Mat take(int rows, int cols, bool zeroed) {
    const size_t need = static_cast<size_t>(rows) * static_cast<size_t>(cols);
    Mat m;
    if (pooled > 0 && need > 0) {
      std::vector<Mat>* src = nullptr;
      std::vector<Mat>* largest = nullptr;
      for (auto& [cap, bucket] : pool) {
        if (bucket.empty()) continue;
        largest = &bucket;
        if (cap >= need) {
          src = &bucket;
          break;
        }
      }
      if (src == nullptr) src = largest;
      if (src != nullptr) {
        m = std::move(src->back());
        src->pop_back();
        --pooled;
      }
    }
    if (zeroed) {
      m.reuse_zero(rows, cols);
    } else {
      m.reuse_shape(rows, cols);
    }
    return m;
  }

  Mat copy_of(const Mat& src) {
    Mat m = take(src.rows(), src.cols(), false);
    std::copy(src.data(), src.data() + src.size(), m.data());
    return m;
  }

  void give(Mat&& m) {
    if (m.capacity() == 0 || pooled >= kPoolCapacity) return;
    pool[m.capacity()].push_back(std::move(m));
    ++pooled;
  }
};

Graph::Graph() : im_(new Impl) {}

Graph::~Graph() { delete im_; }

const Graph::Node& Graph::node(int id) const { return im_->nodes[static_cast<size_t>(id)]; }
Graph::Node& Graph::node(int id) { return im_->nodes[static_cast<size_t>(id)]; }

int Graph::push(Node n) {
  im_->nodes.push_back(std::move(n));
  return static_cast<int>(im_->nodes.size()) - 1;
}

int Graph::size() const { return static_cast<int>(im_->nodes.size()); }

void Graph::check_same_graph(Tensor t) const {
  if (t.g_ != this || t.id_ < 0 || t.id_ >= size())
    throw std::logic_error("tensor does not belong to this graph");
}

int Tensor::rows() const { return value().rows(); }
int Tensor::cols() const { return value().cols(); }

const Mat& Tensor::value() const {
  if (g_ == nullptr) throw std::logic_error("empty tensor handle");
  g_->check_same_graph(*this);
  return g_->node(id_).value;
}

bool Tensor::tracked() const {
  if (g_ == nullptr) return false;
  g_->check_same_graph(*this);
  return g_->node(id_).needs_grad;
}

const Mat& Tensor::grad() const {
  if (g_ == nullptr) throw std::logic_error("empty tensor handle");
  g_->check_same_graph(*this);
  if (!g_->backward_ran()) throw std::logic_error("grad(): backward has not run on this graph");
  const auto& n = g_->node(id_);
  if (!n.has_grad) throw std::logic_error("grad(): tensor is not tracked (constant or stop_grad)");
  return n.grad;
}

Tensor Graph::constant(Mat v) {
  Node n;
  n.op = OpKind::kConstant;
  n.value = std::move(v);
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::constant_like(const Mat& v) {
  Node n;
  n.op = OpKind::kConstant;
  n.value = im_->copy_of(v);
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::scalar(double v) {
  Node n;
  n.op = OpKind::kConstant;
  n.value = im_->take(1, 1, false);
  n.value[0] = v;
  return Tensor(this, push(std::move(n)));
}

Mat Graph::acquire(int rows, int cols) { return im_->take(rows, cols, false); }

Tensor Graph::leaf(Mat v) {
  Node n;
  n.op = OpKind::kLeaf;
  n.value = std::move(v);
  n.needs_grad = true;
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::param(Param& p) {
  Node n;
  n.op = OpKind::kParam;
  n.value = im_->copy_of(p.value);  // snapshot; optimizer updates happen between graphs
  n.bound = &p;
  n.needs_grad = true;
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::matmul(Tensor a, Tensor b) {
  check_same_graph(a);
  check_same_graph(b);
  const Node& na = node(a.id_);
  const Node& nb = node(b.id_);
  Node n;
  n.op = OpKind::kMatmul;
  n.a = a.id_;
  n.b = b.id_;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = im_->take(na.value.rows(), nb.value.cols(), false);
  matmul_plain_into(na.value, nb.value, n.value);
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::binary_elementwise(int kind, Tensor a, Tensor b) {
  check_same_graph(a);
  check_same_graph(b);
  const OpKind op = static_cast<OpKind>(kind);
  const Node& na = node(a.id_);
  const Node& nb = node(b.id_);
  const bool same = na.value.same_shape(nb.value);
  const bool bcast = !same && nb.value.is_scalar();
  if (!same && !bcast)
    throw std::invalid_argument("elementwise op: shapes " + std::to_string(na.value.rows()) + "x" +
                                std::to_string(na.value.cols()) + " vs " + std::to_string(nb.value.rows()) + "x" +
                                std::to_string(nb.value.cols()) + " (only a 1x1 right operand broadcasts)");
  Node n;
  n.op = op;
  n.a = a.id_;
  n.b = b.id_;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = im_->take(na.value.rows(), na.value.cols(), false);
  const int sz = na.value.size();
  const double* pa = na.value.data();
  const double* pb = nb.value.data();
  double* out = n.value.data();
  switch (op) {
    case OpKind::kAdd:
      if (bcast) {
        const double s = pb[0];
        for (int i = 0; i < sz; ++i) out[i] = pa[i] + s;
      } else {
        for (int i = 0; i < sz; ++i) out[i] = pa[i] + pb[i];
      }
      break;
    case OpKind::kSub:
      if (bcast) {
        const double s = pb[0];
        for (int i = 0; i < sz; ++i) out[i] = pa[i] - s;
      } else {
        for (int i = 0; i < sz; ++i) out[i] = pa[i] - pb[i];
      }
      break;
    case OpKind::kMul:
      if (bcast) {
        const double s = pb[0];
        for (int i = 0; i < sz; ++i) out[i] = pa[i] * s;
      } else {
        for (int i = 0; i < sz; ++i) out[i] = pa[i] * pb[i];
      }
      break;
    case OpKind::kDiv: {
      const int bsz = nb.value.size();
      for (int i = 0; i < bsz; ++i) {
        if (pb[i] == 0.0)
          throw std::domain_error("div: division by zero at (" + std::to_string(i / nb.value.cols()) + ", " +
                                  std::to_string(i % nb.value.cols()) + ")");
      }
      if (bcast) {
        const double s = pb[0];
        for (int i = 0; i < sz; ++i) out[i] = pa[i] / s;
      } else {
        for (int i = 0; i < sz; ++i) out[i] = pa[i] / pb[i];
      }
      break;
    }
    default:
      throw std::logic_error("binary_elementwise: bad op");
  }
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::add(Tensor a, Tensor b) { return binary_elementwise(static_cast<int>(OpKind::kAdd), a, b); }
Tensor Graph::sub(Tensor a, Tensor b) { return binary_elementwise(static_cast<int>(OpKind::kSub), a, b); }
Tensor Graph::mul(Tensor a, Tensor b) { return binary_elementwise(static_cast<int>(OpKind::kMul), a, b); }
Tensor Graph::div(Tensor a, Tensor b) { return binary_elementwise(static_cast<int>(OpKind::kDiv), a, b); }

Tensor Graph::stop_grad(Tensor a) {
  check_same_graph(a);
  Mat v = im_->copy_of(node(a.id_).value);  // forward-transparent: same bits
  Node n;
  n.op = OpKind::kStopGrad;
  n.a = a.id_;
  n.needs_grad = false;
  n.value = std::move(v);
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::straight_through(Tensor a, Mat forward_values) {
  check_same_graph(a);
  if (!forward_values.same_shape(node(a.id_).value))
    throw std::invalid_argument("straight_through: forward values shape mismatch");
  Node n;
  n.op = OpKind::kStraightThrough;
  n.a = a.id_;
  n.needs_grad = node(a.id_).needs_grad;
  n.value = std::move(forward_values);
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::straight_through(Tensor a, Tensor forward_values) {
  check_same_graph(forward_values);
  if (node(forward_values.id_).needs_grad)
    throw std::invalid_argument("straight_through: forward values must be untracked");
  return straight_through(a, im_->copy_of(node(forward_values.id_).value));
}

Tensor Graph::prelu(Tensor a, Tensor slope) {
  check_same_graph(a);
  check_same_graph(slope);
  const Node& na = node(a.id_);
  const Node& ns = node(slope.id_);
  if (!ns.value.is_scalar()) throw std::invalid_argument("prelu: slope must be 1x1");
  Node n;
  n.op = OpKind::kPrelu;
  n.a = a.id_;
  n.b = slope.id_;
  n.needs_grad = na.needs_grad || ns.needs_grad;
  n.value = im_->take(na.value.rows(), na.value.cols(), false);
  const double s = ns.value[0];
  const double* in = na.value.data();
  double* out = n.value.data();
  for (int i = 0; i < na.value.size(); ++i) out[i] = in[i] >= 0.0 ? in[i] : s * in[i];
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::mean_all(Tensor a) {
  check_same_graph(a);
  const Node& na = node(a.id_);
  if (na.value.empty()) throw std::invalid_argument("mean_all: empty tensor");
  const double s = sum4(na.value.data(), na.value.size());
  Node n;
  n.op = OpKind::kMeanAll;
  n.a = a.id_;
  n.needs_grad = na.needs_grad;
  n.value = im_->take(1, 1, false);
  n.value[0] = s / na.value.size();
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::std_all(Tensor a) {
  check_same_graph(a);
  const Node& na = node(a.id_);
  if (na.value.empty()) throw std::invalid_argument("std_all: empty tensor");
  const int sz = na.value.size();
  const double mean = sum4(na.value.data(), sz) / sz;
  const double var = sqdev4(na.value.data(), mean, sz) / sz;
  const double sigma = std::sqrt(var + kStdEps);
  Node n;
  n.op = OpKind::kStdAll;
  n.a = a.id_;
  n.needs_grad = na.needs_grad;
  n.aux0 = mean;
  n.aux1 = sigma;
  n.value = im_->take(1, 1, false);
  n.value[0] = sigma;
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::sum_all(Tensor a) {
  check_same_graph(a);
  const Node& na = node(a.id_);
  const double s = sum4(na.value.data(), na.value.size());
  Node n;
  n.op = OpKind::kSumAll;
  n.a = a.id_;
  n.needs_grad = na.needs_grad;
  n.value = im_->take(1, 1, false);
  n.value[0] = s;
  return Tensor(this, push(std::move(n)));
}

Tensor Graph::mse(Tensor a, Tensor b) {
  check_same_graph(a);
  check_same_graph(b);
  const Node& na = node(a.id_);
  const Node& nb = node(b.id_);
  if (!na.value.same_shape(nb.value)) throw std::invalid_argument("mse: shape mismatch");
  if (na.value.empty()) throw std::invalid_argument("mse: empty tensors");
  const int sz = na.value.size();
  const double s = sqdiff4(na.value.data(), nb.value.data(), sz);
  Node n;
  n.op = OpKind::kMse;
  n.a = a.id_;
  n.b = b.id_;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = im_->take(1, 1, false);
  n.value[0] = s / sz;
  return Tensor(this, push(std::move(n)));
}

void Graph::backward(Tensor loss) {
  check_same_graph(loss);
  if (backward_ran_) throw std::logic_error("backward: already ran on this graph; clear() first");
  Node& ln = node(loss.id_);
  if (!ln.value.is_scalar()) throw std::logic_error("backward: loss must be a 1x1 scalar tensor");

  // Grad buffers for every tracked node up to the loss, plus the loss itself.
  for (int i = 0; i <= loss.id_; ++i) {
    Node& n = node(i);
    if (n.needs_grad || i == loss.id_) {
      n.grad = im_->take(n.value.rows(), n.value.cols(), true);
      n.has_grad = true;
    }
  }
  ln.grad[0] = 1.0;
  backward_ran_ = true;

  for (int i = loss.id_; i >= 0; --i) {
    Node& n = node(i);
    if (!n.has_grad) continue;
    if (!n.needs_grad && i != loss.id_) continue;
    Node* pa = n.a >= 0 ? &node(n.a) : nullptr;
    Node* pb = n.b >= 0 ? &node(n.b) : nullptr;
    const bool ga = pa != nullptr && pa->needs_grad;
    const bool gb = pb != nullptr && pb->needs_grad;
    switch (n.op) {
      case OpKind::kConstant:
      case OpKind::kLeaf:
      case OpKind::kStopGrad:
        break;
      case OpKind::kParam:
        n.bound->grad.reuse_shape(n.value.rows(), n.value.cols());
        // reuse_shape preserves contents here: the shape never changes.
        for (int t = 0; t < n.grad.size(); ++t) n.bound->grad[t] += n.grad[t];
        break;
      case OpKind::kMatmul:
        if (ga) acc_matmul_nt(n.grad, pb->value, pa->grad);
        if (gb) acc_matmul_tn(pa->value, n.grad, pb->grad);
        break;
      case OpKind::kAdd:
      case OpKind::kSub: {
        const double sign = n.op == OpKind::kSub ? -1.0 : 1.0;
        if (ga)
          for (int t = 0; t < n.grad.size(); ++t) pa->grad[t] += n.grad[t];
        if (gb) {
          if (pb->value.is_scalar() && !n.grad.is_scalar()) {
            pb->grad[0] += sign * sum4(n.grad.data(), n.grad.size());
          } else {
            for (int t = 0; t < n.grad.size(); ++t) pb->grad[t] += sign * n.grad[t];
          }
        }
        break;
      }
      case OpKind::kMul:
        if (pb->value.is_scalar() && !n.value.is_scalar()) {
          const double s = pb->value[0];
          if (ga)
            for (int t = 0; t < n.grad.size(); ++t) pa->grad[t] += n.grad[t] * s;
          if (gb) pb->grad[0] += dot4(n.grad.data(), pa->value.data(), n.grad.size());
        } else {
          if (ga)
            for (int t = 0; t < n.grad.size(); ++t) pa->grad[t] += n.grad[t] * pb->value[t];
          if (gb)
            for (int t = 0; t < n.grad.size(); ++t) pb->grad[t] += n.grad[t] * pa->value[t];
        }
        break;
      case OpKind::kDiv:
        if (pb->value.is_scalar() && !n.value.is_scalar()) {
          const double s = pb->value[0];
          if (ga)
            for (int t = 0; t < n.grad.size(); ++t) pa->grad[t] += n.grad[t] / s;
          if (gb) pb->grad[0] -= dot4(n.grad.data(), n.value.data(), n.grad.size()) / s;
        } else {
          if (ga)
            for (int t = 0; t < n.grad.size(); ++t) pa->grad[t] += n.grad[t] / pb->value[t];
          if (gb)
            for (int t = 0; t < n.grad.size(); ++t) pb->grad[t] -= n.grad[t] * n.value[t] / pb->value[t];
        }
        break;
      case OpKind::kStraightThrough:
        if (ga)
          for (int t = 0; t < n.grad.size(); ++t) pa->grad[t] += n.grad[t];
        break;
      case OpKind::kPrelu: {
        const double s = pb->value[0];
        if (ga)
          for (int t = 0; t < n.grad.size(); ++t)
            pa->grad[t] += n.grad[t] * (pa->value[t] >= 0.0 ? 1.0 : s);
        if (gb) {
          // Branchless four-lane reduction; the ternary compiles to a select.
          const double* av = pa->value.data();
          const double* gv = n.grad.data();
          const int sz = n.grad.size();
          double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
          int t = 0;
          for (; t + 4 <= sz; t += 4) {
            a0 += av[t] < 0.0 ? gv[t] * av[t] : 0.0;
            a1 += av[t + 1] < 0.0 ? gv[t + 1] * av[t + 1] : 0.0;
            a2 += av[t + 2] < 0.0 ? gv[t + 2] * av[t + 2] : 0.0;
            a3 += av[t + 3] < 0.0 ? gv[t + 3] * av[t + 3] : 0.0;
          }
          double acc = (a0 + a1) + (a2 + a3);
          for (; t < sz; ++t) acc += av[t] < 0.0 ? gv[t] * av[t] : 0.0;
          pb->grad[0] += acc;
        }
        break;
      }
      case OpKind::kMeanAll:
        if (ga) {
          const double g = n.grad[0] / pa->value.size();
          for (int t = 0; t < pa->value.size(); ++t) pa->grad[t] += g;
        }
        break;
      case OpKind::kStdAll:
        if (ga) {
          const double g = n.grad[0] / (pa->value.size() * n.aux1);
          for (int t = 0; t < pa->value.size(); ++t) pa->grad[t] += g * (pa->value[t] - n.aux0);
        }
        break;
      case OpKind::kSumAll:
        if (ga) {
          const double g = n.grad[0];
          for (int t = 0; t < pa->value.size(); ++t) pa->grad[t] += g;
        }
        break;
      case OpKind::kMse: {
        const double g = 2.0 * n.grad[0] / pa->value.size();
        if (ga)
          for (int t = 0; t < pa->value.size(); ++t) pa->grad[t] += g * (pa->value[t] - pb->value[t]);
        if (gb)
          for (int t = 0; t < pb->value.size(); ++t) pb->grad[t] -= g * (pa->value[t] - pb->value[t]);
        break;
      }
    }
  }
}

void Graph::clear() {
  for (Node& n : im_->nodes) {
    im_->give(std::move(n.value));
    if (n.has_grad) im_->give(std::move(n.grad));
  }
  im_->nodes.clear();
  backward_ran_ = false;
}

}  // namespace quantlab::autodiff
