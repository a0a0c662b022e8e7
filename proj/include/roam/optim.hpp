#ifndef ROAM_OPTIM_HPP
#define ROAM_OPTIM_HPP

#include <cmath>
#include <vector>

#include "roam/layers.hpp"

namespace roam {

/// Adam with coupled L2 weight decay (decay added to the gradient before
/// the moment updates). Holds references into the model's parameters; the
/// model must outlive the optimizer.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<ParamRef<Scalar>> params, double lr, double weight_decay)
      : params_(std::move(params)), lr_(lr), wd_(weight_decay) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.push_back(ArrayX<Scalar>::Zero(p.value->size()));
      v_.push_back(ArrayX<Scalar>::Zero(p.value->size()));
    }
  }

  /// One update from the currently accumulated gradients.
  void step() {
    ++t_;
    const Scalar bc1 = Scalar(1.0 - std::pow(0.9, static_cast<double>(t_)));
    const Scalar bc2 = Scalar(1.0 - std::pow(0.999, static_cast<double>(t_)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      ArrayX<Scalar> g = *params_[i].grad;
      if (wd_ != 0.0) g += Scalar(wd_) * *params_[i].value;
      m_[i] = Scalar(0.9) * m_[i] + Scalar(0.1) * g;
      v_[i] = Scalar(0.999) * v_[i] + Scalar(0.001) * g.square();
      *params_[i].value -= Scalar(lr_) * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + Scalar(1e-8));
    }
  }

  /// Fresh moments and step count, e.g. when a new training phase starts.
  void reset() {
    t_ = 0;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].setZero();
      v_[i].setZero();
    }
  }

  long steps() const { return t_; }

 private:
  std::vector<ParamRef<Scalar>> params_;
  std::vector<ArrayX<Scalar>> m_, v_;
  double lr_;
  double wd_;
  long t_ = 0;
};

}  // namespace roam

#endif  // ROAM_OPTIM_HPP
