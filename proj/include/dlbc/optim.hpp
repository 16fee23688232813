#ifndef DLBC_OPTIM_HPP_
#define DLBC_OPTIM_HPP_

#include <cmath>
#include <vector>

#include "dlbc/tensor.hpp"

namespace dlbc::nn {

inline void zero_grad(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

inline double grad_norm(const std::vector<Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.has_grad()) sq += p.grad().squaredNorm();
  }
  return std::sqrt(sq);
}

class Adam {
 public:
  struct Options {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-5;
  };

  Adam(std::vector<Tensor> params, Options options)
      : params_(std::move(params)), options_(options) {
    for (const auto& p : params_) {
      m_.push_back(Matrix::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }

  void set_lr(double lr) { options_.lr = lr; }
  const std::vector<Tensor>& params() const { return params_; }
  long steps() const { return steps_; }

  // Scales gradients so their global norm is at most max_norm; returns the
  // norm before clipping.
  double clip_grad_norm(double max_norm) {
    const double norm = grad_norm(params_);
    if (norm > max_norm) {
      const double factor = max_norm / (norm + 1e-12);
      for (auto& p : params_) {
        if (p.has_grad()) p.node()->grad *= factor;
      }
    }
    return norm;
  }

  void step() {
    ++steps_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!params_[i].has_grad()) continue;
      const Matrix& g = params_[i].node()->grad;
      m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * g;
      v_[i] = options_.beta2 * v_[i] +
              (1.0 - options_.beta2) * g.cwiseProduct(g);
      Matrix denom = ((v_[i] / c2).array().sqrt() + options_.eps).matrix();
      params_[i].mutable_value() -=
          options_.lr * ((m_[i] / c1).array() / denom.array()).matrix();
    }
  }

  void zero_grad() { nn::zero_grad(params_); }

 private:
  std::vector<Tensor> params_;
  Options options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long steps_ = 0;
};

}  // namespace dlbc::nn

#endif  // DLBC_OPTIM_HPP_
