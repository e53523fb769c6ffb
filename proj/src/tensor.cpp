#include "mdg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace mdg {

namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

void check_shape(const Matrix& m, const char* what) {
  if (m.rows() < 0 || m.cols() < 0) throw Error(std::string(what) + ": bad shape");
}

// Tape and tracking flags for an op: all tracked inputs must share one tape.
struct OpContext {
  Tape* tape = nullptr;
  bool track = false;
};

OpContext context_of(std::initializer_list<const Tensor*> inputs) {
  OpContext ctx;
  for (const Tensor* t : inputs) {
    if (!t->defined()) throw Error("operation on an undefined tensor");
    if (!t->requires_grad()) continue;
    ctx.track = true;
    Tape* tape = t->node()->tape;
    if (tape == nullptr) throw Error("tracked tensor has no tape");
    if (ctx.tape != nullptr && ctx.tape != tape) {
      throw Error("operands belong to different tapes");
    }
    ctx.tape = tape;
  }
  return ctx;
}

Tensor make_result(Matrix value, OpContext ctx,
                   std::function<void(TensorNode&)> backward_fn) {
  Tensor out{std::move(value)};
  if (ctx.track) {
    out.node()->requires_grad = true;
    out.node()->tape = ctx.tape;
    ctx.tape->record(out.node(), std::move(backward_fn));
  }
  return out;
}

bool is_vector_shape(const Tensor& t) { return t.rows() == 1 || t.cols() == 1; }

// Cosine similarity value plus gradient coefficients for one vector pair.
// Returns false (value 0, zero gradient) when either vector is zero.
struct CosineParts {
  double value = 0.0;
  double inv_norms = 0.0;  // 1/(|u||v|)
  double inv_u2 = 0.0;     // 1/|u|^2
  double inv_v2 = 0.0;     // 1/|v|^2
  bool nonzero = false;
};

template <typename RowU, typename RowV>
CosineParts cosine_parts(const RowU& u, const RowV& v) {
  CosineParts p;
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return p;
  p.inv_norms = 1.0 / (nu * nv);
  p.value = u.dot(v) * p.inv_norms;
  p.inv_u2 = 1.0 / (nu * nu);
  p.inv_v2 = 1.0 / (nv * nv);
  p.nonzero = true;
  return p;
}

// Shared core of link_nll / class_nll: loss = -s[pos]/t + lse(s[denom]/t).
Tensor nll_from_sims(const Tensor& sims, int positive, std::vector<int> denom,
                     double temperature, const char* what) {
  if (sims.rows() != 1) throw Error(std::string(what) + ": similarities must be a row");
  if (temperature <= 0.0) throw Error(std::string(what) + ": temperature must be positive");
  if (positive < 0 || positive >= sims.cols()) throw Error(std::string(what) + ": bad index");
  for (int j : denom) {
    if (j < 0 || j >= sims.cols()) throw Error(std::string(what) + ": bad index");
  }
  if (denom.empty()) throw Error(std::string(what) + ": empty denominator");

  const double inv_t = 1.0 / temperature;
  const auto& s = sims.value();
  double zmax = -std::numeric_limits<double>::infinity();
  for (int j : denom) zmax = std::max(zmax, s(0, j) * inv_t);
  double sum = 0.0;
  for (int j : denom) sum += std::exp(s(0, j) * inv_t - zmax);
  const double lse = zmax + std::log(sum);
  Matrix out(1, 1);
  out(0, 0) = -s(0, positive) * inv_t + lse;

  OpContext ctx = context_of({&sims});
  return make_result(
      std::move(out), ctx,
      [sn = sims.node(), positive, denom = std::move(denom), inv_t](TensorNode& o) {
        if (o.grad.size() == 0 || !sn->requires_grad) return;
        const double g = o.grad(0, 0);
        if (g == 0.0) return;
        sn->ensure_grad();
        const auto& s = sn->value;
        double zmax = -std::numeric_limits<double>::infinity();
        for (int j : denom) zmax = std::max(zmax, s(0, j) * inv_t);
        double sum = 0.0;
        for (int j : denom) sum += std::exp(s(0, j) * inv_t - zmax);
        for (int j : denom) {
          const double p = std::exp(s(0, j) * inv_t - zmax) / sum;
          sn->grad(0, j) += g * p * inv_t;
        }
        sn->grad(0, positive) -= g * inv_t;
      });
}

}  // namespace

Tensor::Tensor(Matrix value) : node_(std::make_shared<TensorNode>()) {
  check_shape(value, "tensor");
  node_->value = std::move(value);
}

const Matrix& Tensor::grad() const {
  if (!node_) throw Error("grad of an undefined tensor");
  if (node_->grad.size() == 0) throw Error("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && node_->grad.size() != 0) node_->grad.setZero();
}

void Tensor::freeze() {
  if (!node_) return;
  node_->requires_grad = false;
  node_->tape = nullptr;
  node_->grad.resize(0, 0);
}

Tensor Tape::parameter(Matrix value) {
  Tensor t{std::move(value)};
  t.node_->requires_grad = true;
  t.node_->tape = this;
  return t;
}

void Tape::record(std::shared_ptr<detail::TensorNode> output,
                  std::function<void(detail::TensorNode&)> backward_fn) {
  ops_.push_back({std::move(output), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw Error("backward: undefined loss");
  if (loss.rows() != 1 || loss.cols() != 1) throw Error("backward: loss is not a scalar");
  if (loss.node()->tape != this) throw Error("backward: loss is not on this tape");
  loss.node()->ensure_grad();
  loss.node()->grad(0, 0) += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    it->backward(*it->output);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw Error("matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  OpContext ctx = context_of({&a, &b});
  return make_result(std::move(out), ctx, [an = a.node(), bn = b.node()](TensorNode& o) {
    if (o.grad.size() == 0) return;
    if (an->requires_grad) {
      an->ensure_grad();
      an->grad.noalias() += o.grad * bn->value.transpose();
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      bn->grad.noalias() += an->value.transpose() * o.grad;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("add: shape mismatch");
  Matrix out = a.value() + b.value();
  OpContext ctx = context_of({&a, &b});
  return make_result(std::move(out), ctx, [an = a.node(), bn = b.node()](TensorNode& o) {
    if (o.grad.size() == 0) return;
    if (an->requires_grad) {
      an->ensure_grad();
      an->grad += o.grad;
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      bn->grad += o.grad;
    }
  });
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
  const bool same = a.rows() == b.rows() && a.cols() == b.cols();
  const bool a_row = a.rows() == 1 && a.cols() == b.cols();
  const bool b_row = b.rows() == 1 && b.cols() == a.cols();
  if (!same && !a_row && !b_row) throw Error("elementwise_mul: shape mismatch");
  if (!same && b_row) return elementwise_mul(b, a);  // canonicalize: broadcast lives in a

  Matrix out;
  if (same) {
    out = a.value().cwiseProduct(b.value());
  } else {
    out = b.value().array().rowwise() * a.value().row(0).array();
  }
  OpContext ctx = context_of({&a, &b});
  return make_result(std::move(out), ctx,
                     [an = a.node(), bn = b.node(), same](TensorNode& o) {
    if (o.grad.size() == 0) return;
    if (same) {
      if (an->requires_grad) {
        an->ensure_grad();
        an->grad.array() += o.grad.array() * bn->value.array();
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        bn->grad.array() += o.grad.array() * an->value.array();
      }
    } else {
      if (an->requires_grad) {
        an->ensure_grad();
        an->grad.row(0) += (o.grad.array() * bn->value.array()).colwise().sum().matrix();
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        bn->grad.array() += o.grad.array().rowwise() * an->value.row(0).array();
      }
    }
  });
}

Tensor relu(const Tensor& x) {
  Matrix out = x.value().cwiseMax(0.0);
  OpContext ctx = context_of({&x});
  return make_result(std::move(out), ctx, [xn = x.node()](TensorNode& o) {
    if (o.grad.size() == 0 || !xn->requires_grad) return;
    xn->ensure_grad();
    xn->grad.array() += o.grad.array() * (xn->value.array() > 0.0).cast<double>();
  });
}

Tensor row_mean(const Tensor& x) {
  if (x.rows() == 0) throw Error("row_mean: empty input");
  Matrix out = x.value().colwise().mean();
  OpContext ctx = context_of({&x});
  return make_result(std::move(out), ctx, [xn = x.node()](TensorNode& o) {
    if (o.grad.size() == 0 || !xn->requires_grad) return;
    xn->ensure_grad();
    const double inv_n = 1.0 / static_cast<double>(xn->value.rows());
    xn->grad.array() += (o.grad.array() * inv_n).replicate(xn->value.rows(), 1);
  });
}

Tensor l2_normalize_rows(const Tensor& x) {
  Matrix out = x.value();
  for (Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  OpContext ctx = context_of({&x});
  return make_result(std::move(out), ctx, [xn = x.node()](TensorNode& o) {
    if (o.grad.size() == 0 || !xn->requires_grad) return;
    xn->ensure_grad();
    for (Index i = 0; i < xn->value.rows(); ++i) {
      const double n = xn->value.row(i).norm();
      if (n == 0.0) continue;  // stays zero, no gradient
      const auto y = o.value.row(i);  // already normalized
      const auto g = o.grad.row(i);
      xn->grad.row(i) += (g - g.dot(y) * y) / n;
    }
  });
}

Tensor scale(const Tensor& x, double c) {
  Matrix out = c * x.value();
  OpContext ctx = context_of({&x});
  return make_result(std::move(out), ctx, [xn = x.node(), c](TensorNode& o) {
    if (o.grad.size() == 0 || !xn->requires_grad) return;
    xn->ensure_grad();
    xn->grad += c * o.grad;
  });
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v) {
  if (!is_vector_shape(u) || !is_vector_shape(v) || u.rows() != v.rows() ||
      u.cols() != v.cols()) {
    throw Error("cosine_similarity: expects two vectors of identical shape");
  }
  const auto uflat = u.value().reshaped();
  const auto vflat = v.value().reshaped();
  CosineParts p = cosine_parts(uflat, vflat);
  Matrix out(1, 1);
  out(0, 0) = p.value;
  OpContext ctx = context_of({&u, &v});
  return make_result(std::move(out), ctx, [un = u.node(), vn = v.node()](TensorNode& o) {
    if (o.grad.size() == 0) return;
    const double g = o.grad(0, 0);
    if (g == 0.0) return;
    const auto uf = un->value.reshaped();
    const auto vf = vn->value.reshaped();
    CosineParts p = cosine_parts(uf, vf);
    if (!p.nonzero) return;  // defined as 0 with zero gradient
    if (un->requires_grad) {
      un->ensure_grad();
      un->grad.reshaped() += g * (vf * p.inv_norms - p.value * p.inv_u2 * uf);
    }
    if (vn->requires_grad) {
      vn->ensure_grad();
      vn->grad.reshaped() += g * (uf * p.inv_norms - p.value * p.inv_v2 * vf);
    }
  });
}

Tensor cosine_rows(const Tensor& a, Index anchor_row, const Tensor& b,
                   std::span<const int> rows) {
  if (a.cols() != b.cols()) throw Error("cosine_rows: column counts differ");
  if (anchor_row < 0 || anchor_row >= a.rows()) throw Error("cosine_rows: anchor out of range");
  for (int r : rows) {
    if (r < 0 || r >= b.rows()) throw Error("cosine_rows: row index out of range");
  }
  Matrix out(1, static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    out(0, static_cast<Index>(j)) =
        cosine_parts(a.value().row(anchor_row), b.value().row(rows[j])).value;
  }
  OpContext ctx = context_of({&a, &b});
  std::vector<int> rows_copy(rows.begin(), rows.end());
  return make_result(
      std::move(out), ctx,
      [an = a.node(), bn = b.node(), anchor_row, rows_copy = std::move(rows_copy)](TensorNode& o) {
        if (o.grad.size() == 0) return;
        const auto u = an->value.row(anchor_row);
        for (std::size_t j = 0; j < rows_copy.size(); ++j) {
          const double g = o.grad(0, static_cast<Index>(j));
          if (g == 0.0) continue;
          const auto v = bn->value.row(rows_copy[j]);
          CosineParts p = cosine_parts(u, v);
          if (!p.nonzero) continue;
          if (an->requires_grad) {
            an->ensure_grad();
            an->grad.row(anchor_row) += g * (v * p.inv_norms - p.value * p.inv_u2 * u);
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            bn->grad.row(rows_copy[j]) += g * (u * p.inv_norms - p.value * p.inv_v2 * v);
          }
        }
      });
}

Tensor link_nll(const Tensor& sims, double temperature, bool include_positive) {
  if (sims.cols() < 2) throw Error("link_nll: needs a positive and at least one negative");
  std::vector<int> denom;
  denom.reserve(static_cast<std::size_t>(sims.cols()));
  if (include_positive) denom.push_back(0);
  for (int j = 1; j < sims.cols(); ++j) denom.push_back(j);
  return nll_from_sims(sims, 0, std::move(denom), temperature, "link_nll");
}

Tensor class_nll(const Tensor& sims, int label, double temperature) {
  std::vector<int> denom(static_cast<std::size_t>(sims.cols()));
  for (int j = 0; j < sims.cols(); ++j) denom[static_cast<std::size_t>(j)] = j;
  return nll_from_sims(sims, label, std::move(denom), temperature, "class_nll");
}

Tensor add_all(std::span<const Tensor> terms) {
  if (terms.empty()) throw Error("add_all: empty term list");
  Matrix out = terms[0].value();
  for (std::size_t i = 1; i < terms.size(); ++i) {
    if (terms[i].rows() != out.rows() || terms[i].cols() != out.cols()) {
      throw Error("add_all: shape mismatch");
    }
    out += terms[i].value();
  }
  OpContext ctx;
  std::vector<NodePtr> nodes;
  nodes.reserve(terms.size());
  for (const Tensor& t : terms) {
    OpContext c = context_of({&t});
    if (c.track) {
      if (ctx.tape != nullptr && ctx.tape != c.tape) throw Error("add_all: mixed tapes");
      ctx.tape = c.tape;
      ctx.track = true;
    }
    nodes.push_back(t.node());
  }
  return make_result(std::move(out), ctx, [nodes = std::move(nodes)](TensorNode& o) {
    if (o.grad.size() == 0) return;
    for (const NodePtr& n : nodes) {
      if (!n->requires_grad) continue;
      n->ensure_grad();
      n->grad += o.grad;
    }
  });
}

Tensor sum_all(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  OpContext ctx = context_of({&x});
  return make_result(std::move(out), ctx, [xn = x.node()](TensorNode& o) {
    if (o.grad.size() == 0 || !xn->requires_grad) return;
    xn->ensure_grad();
    xn->grad.array() += o.grad(0, 0);
  });
}

Tensor vstack(std::span<const Tensor> rows) {
  if (rows.empty()) throw Error("vstack: empty list");
  const Index cols = rows[0].cols();
  Index total = 0;
  for (const Tensor& t : rows) {
    if (t.cols() != cols) throw Error("vstack: column counts differ");
    total += t.rows();
  }
  Matrix out(total, cols);
  Index at = 0;
  OpContext ctx;
  std::vector<NodePtr> nodes;
  std::vector<Index> offsets;
  nodes.reserve(rows.size());
  for (const Tensor& t : rows) {
    out.middleRows(at, t.rows()) = t.value();
    offsets.push_back(at);
    at += t.rows();
    OpContext c = context_of({&t});
    if (c.track) {
      if (ctx.tape != nullptr && ctx.tape != c.tape) throw Error("vstack: mixed tapes");
      ctx.tape = c.tape;
      ctx.track = true;
    }
    nodes.push_back(t.node());
  }
  return make_result(std::move(out), ctx,
                     [nodes = std::move(nodes), offsets = std::move(offsets)](TensorNode& o) {
    if (o.grad.size() == 0) return;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const NodePtr& n = nodes[i];
      if (!n->requires_grad) continue;
      n->ensure_grad();
      n->grad += o.grad.middleRows(offsets[i], n->value.rows());
    }
  });
}

}  // namespace mdg
