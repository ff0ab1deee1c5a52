#pragma once

#include <map>
#include <string>

#include "cssl/trace.hpp"

namespace cssl {

enum class OptMethod { kSgd, kSgdMomentum, kAdam };

// Per-parameter state buffers are created lazily on the first step that sees
// a given name, so one OptimizerState can serve a parameter set that grows
// (new classifier heads, new session prototypes).
struct OptimizerState {
  OptMethod method = OptMethod::kSgd;
  double lr = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::map<std::string, Tensor> m;  // momentum / first moment
  std::map<std::string, Tensor> v;  // second moment (adam)
  std::size_t step_count = 0;
};

OptimizerState make_sgd(double lr);
OptimizerState make_sgd_momentum(double lr, double momentum = 0.9);
OptimizerState make_adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);

// In-place update of every param that has a gradient entry. Params without a
// gradient entry are untouched; a gradient without a matching param throws.
void optimizer_step(OptimizerState& state, std::map<std::string, Tensor>& params,
                    const GradientMap& grads);

}  // namespace cssl
