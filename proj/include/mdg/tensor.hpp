#pragma once

#include "mdg/types.hpp"

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace mdg {

class Tape;

namespace detail {

struct TensorNode {
  Matrix value;
  Matrix grad;  // empty until gradient flows into this node
  bool requires_grad = false;
  Tape* tape = nullptr;  // null for constants

  void ensure_grad() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
  }
};

}  // namespace detail

// Handle to a dense 2-d value, optionally tracked for reverse-mode
// differentiation. Copies share the underlying node. Vectors are 1×d rows.
class Tensor {
 public:
  Tensor() = default;
  // Constant: participates in arithmetic but never receives a gradient.
  explicit Tensor(Matrix value);

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }

  const Matrix& value() const { return node_->value; }
  Matrix& value_mut() { return node_->value; }  // optimizer updates, test perturbations

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && node_->grad.size() != 0; }
  const Matrix& grad() const;
  void zero_grad();

  // Detaches from any tape and stops gradient tracking; drops the gradient.
  void freeze();

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  friend class Tape;
  std::shared_ptr<detail::TensorNode> node_;
};

// Record of differentiable operations for one training run. Backward replays
// the recorded closures in exact reverse order of recording.
class Tape {
 public:
  // New learnable leaf tracked on this tape.
  Tensor parameter(Matrix value);

  // Fills grad fields of every tensor the loss depends on. The loss must be
  // a 1×1 tensor produced on this tape. Gradients accumulate additively.
  void backward(const Tensor& loss);

  // Drops recorded operations; leaves parameters and their gradients alone.
  void clear() { ops_.clear(); }
  std::size_t size() const { return ops_.size(); }

  void record(std::shared_ptr<detail::TensorNode> output,
              std::function<void(detail::TensorNode&)> backward_fn);

 private:
  struct Op {
    std::shared_ptr<detail::TensorNode> output;
    std::function<void(detail::TensorNode&)> backward;
  };
  std::vector<Op> ops_;
};

// ---- forward primitives -----------------------------------------------
// Each primitive records itself when any input requires a gradient.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
// Hadamard product; one operand may be a 1×d row broadcast over the other's rows.
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);                // subgradient at 0 is 0
Tensor row_mean(const Tensor& x);            // n×c -> 1×c
Tensor l2_normalize_rows(const Tensor& x);   // zero rows stay zero
Tensor scale(const Tensor& x, double c);
// u·v/(‖u‖‖v‖) as a 1×1 tensor; defined as 0 with zero gradient when either
// vector is zero. Both inputs must be vectors of identical shape.
Tensor cosine_similarity(const Tensor& u, const Tensor& v);

// Cosine of row `anchor_row` of `a` against the listed rows of `b` -> 1×|rows|.
// `a` and `b` may share a node; gradients accumulate into both.
Tensor cosine_rows(const Tensor& a, Index anchor_row, const Tensor& b,
                   std::span<const int> rows);

// -ln( exp(s_0/t) / sum_{j>=1} exp(s_j/t) ) for a 1×(1+m) similarity row whose
// first entry is the positive pair. `include_positive` adds s_0 to the sum.
Tensor link_nll(const Tensor& sims, double temperature, bool include_positive = false);

// -ln( exp(s_y/t) / sum_j exp(s_j/t) ) over all classes of a 1×C similarity row.
Tensor class_nll(const Tensor& sims, int label, double temperature);

Tensor add_all(std::span<const Tensor> terms);  // same-shape sum
Tensor sum_all(const Tensor& x);                // 1×1 sum of every entry
Tensor vstack(std::span<const Tensor> rows);    // concatenates along rows

}  // namespace mdg
