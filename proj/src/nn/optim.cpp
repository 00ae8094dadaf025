#include "murmur/nn/optim.hpp"

#include <cmath>

namespace murmur::nn {

template <class T>
void adamw_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v, int step,
                  const AdamWConfig& c) {
  const double bc1 = 1.0 - std::pow(c.beta1, step);
  const double bc2 = 1.0 - std::pow(c.beta2, step);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double p = param[i];
    const double update = (mi / bc1) / (std::sqrt(vi / bc2) + c.eps);
    param[i] = static_cast<T>(p - c.lr * update - c.lr * c.weight_decay * p);
  }
}

template <class T>
void AdamW<T>::step(std::vector<Param<T>>& params) {
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), T(0));
      v_.emplace_back(p.value.size(), T(0));
    }
  }
  ++step_;
  for (std::size_t i = 0; i < params.size(); ++i)
    adamw_update<T>(params[i].value, params[i].grad, m_[i], v_[i], step_, config_);
}

template void adamw_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>, int,
                                  const AdamWConfig&);
template void adamw_update<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                                   int, const AdamWConfig&);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace murmur::nn
