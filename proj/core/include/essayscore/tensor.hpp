// Copyright 2026 The essayscore Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense float64 tensors with define-by-run reverse-mode differentiation.
//
// Every operation that has at least one grad-requiring input records a node
// holding its parents and a backward rule. Nodes are stamped with a
// monotonically increasing record index, so sorting reachable nodes by
// descending index is always a valid reverse traversal of the tape. The
// graph is owned by the tensors that reference it; dropping the loss frees it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace essayscore {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  std::uint64_t record_index = 0;

  bool is_leaf() const { return !backward; }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  /// In-place access for optimizers and weight perturbation. Never call on a
  /// tensor whose graph is still going to be differentiated.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Record position on the tape; 0 for leaves created outside any op.
  std::uint64_t tape_id() const;

  /// Deep copy of the values, detached from any graph.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_op_result(Shape, std::vector<double>, std::vector<Tensor>,
                               std::function<void(detail::Node&)>);

  std::shared_ptr<detail::Node> node_;
};

/// Builds the output of an op. Parents/backward are kept only when gradient
/// recording is on and some parent requires grad.
Tensor make_op_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                      std::function<void(detail::Node&)> backward);

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Reverse sweep from a scalar loss. Leaf gradients accumulate across calls;
/// intermediate gradients are recomputed from scratch each time.
void backward(const Tensor& loss);

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor tanh(const Tensor& x);
Tensor gelu(const Tensor& x);
/// Elementwise Huber-style loss with transition at |d| = beta.
Tensor smooth_l1(const Tensor& pred, const Tensor& target, double beta = 1.0);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

// ---- linear algebra & structure --------------------------------------------

/// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// Adds a length-n bias (shape [n] or [1 x n]) to every row of [m x n].
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
/// Columns [start, start + count) of a 2-D tensor.
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
/// Horizontal concatenation of 2-D tensors with equal row counts.
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Row gather from a [V x d] table; backward scatter-adds into the table.
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);

// ---- reductions & normalisation -------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Numerically stable softmax along `axis` (max subtraction).
Tensor softmax(const Tensor& x, std::size_t axis);
/// Normalises each row over the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// ---- dropout -----------------------------------------------------------------

/// Counter-based dropout stream: mask bits are a pure function of
/// (seed, call counter, element index), so masks never depend on how many
/// other random numbers were drawn elsewhere.
class DropoutStream {
 public:
  DropoutStream(std::uint64_t seed, double p) : seed_(seed), p_(p) {}
  double probability() const { return p_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_call() { return counter_++; }

 private:
  std::uint64_t seed_;
  double p_;
  std::uint64_t counter_ = 0;
};

/// Identity when `stream` is null or p == 0; otherwise inverted dropout.
Tensor dropout(const Tensor& x, DropoutStream* stream);

/// splitmix64 finaliser; also the hash behind dropout masks.
std::uint64_t mix64(std::uint64_t x);

}  // namespace essayscore
