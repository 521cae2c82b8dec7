#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cagnn/autodiff.hpp"

namespace cagnn {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 penalty added to the gradient
};

class Adam {
 public:
  Adam(std::vector<ad::Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.lr >= 0.0)) throw std::invalid_argument("adam: lr must be nonnegative");
    for (auto& p : params_) {
      m_.emplace_back(p.rows(), p.cols());
      v_.emplace_back(p.rows(), p.cols());
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      Matrix& val = params_[i].value();
      Matrix& grad = params_[i].grad();
      for (size_t k = 0; k < val.data.size(); ++k) {
        const double g = grad.data[k] + cfg_.weight_decay * val.data[k];
        m_[i].data[k] = cfg_.beta1 * m_[i].data[k] + (1.0 - cfg_.beta1) * g;
        v_[i].data[k] = cfg_.beta2 * v_[i].data[k] + (1.0 - cfg_.beta2) * g * g;
        val.data[k] -=
            cfg_.lr * (m_[i].data[k] / bc1) / (std::sqrt(v_[i].data[k] / bc2) + cfg_.eps);
      }
    }
  }

  long step_count() const { return t_; }

 private:
  std::vector<ad::Tensor> params_;
  std::vector<Matrix> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace cagnn
