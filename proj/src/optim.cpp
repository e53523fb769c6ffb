#include "mdg/optim.hpp"

#include <cmath>

namespace mdg {

AdamState::AdamState(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (const Tensor& p : params_) {
    if (!p.defined()) throw Error("adam: undefined parameter");
    first_moment_.push_back(Matrix::Zero(p.rows(), p.cols()));
    second_moment_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void AdamState::step() {
  for (const Tensor& p : params_) {
    if (!p.has_grad()) throw Error("adam: parameter is missing its gradient");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const Matrix& g = p.grad();
    Matrix& m = first_moment_[i];
    Matrix& v = second_moment_[i];
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    p.value_mut().array() -=
        config_.learning_rate * (m.array() / bc1) /
        ((v.array() / bc2).sqrt() + config_.epsilon);
    p.zero_grad();
  }
}

}  // namespace mdg
