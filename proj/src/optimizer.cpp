#include "cssl/optimizer.hpp"

#include <cmath>

#include "cssl/error.hpp"

namespace cssl {

OptimizerState make_sgd(double lr) {
  OptimizerState s;
  s.method = OptMethod::kSgd;
  s.lr = lr;
  return s;
}

OptimizerState make_sgd_momentum(double lr, double momentum) {
  OptimizerState s;
  s.method = OptMethod::kSgdMomentum;
  s.lr = lr;
  s.momentum = momentum;
  return s;
}

OptimizerState make_adam(double lr, double beta1, double beta2, double eps) {
  OptimizerState s;
  s.method = OptMethod::kAdam;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

namespace {

Tensor& buffer_for(std::map<std::string, Tensor>& buffers, const std::string& name,
                   const Shape& shape) {
  auto it = buffers.find(name);
  if (it == buffers.end()) {
    it = buffers.emplace(name, zeros(shape)).first;
  } else if (it->second.shape != shape) {
    throw ShapeError("optimizer_step: state buffer for '" + name + "' has shape " +
                     shape_str(it->second.shape) + ", param has " + shape_str(shape));
  }
  return it->second;
}

}  // namespace

void optimizer_step(OptimizerState& state, std::map<std::string, Tensor>& params,
                    const GradientMap& grads) {
  if (!(state.lr >= 0.0) || !std::isfinite(state.lr)) {
    throw ValueError("optimizer_step: lr must be finite and >= 0");
  }
  state.step_count += 1;

  for (const auto& [name, grad] : grads) {
    auto pit = params.find(name);
    if (pit == params.end()) {
      throw NotFoundError("optimizer_step: gradient for unknown param '" + name + "'");
    }
    Tensor& p = pit->second;
    if (p.shape != grad.shape) {
      throw ShapeError("optimizer_step: param '" + name + "' has shape " +
                       shape_str(p.shape) + ", gradient has " + shape_str(grad.shape));
    }
    if (!grad.all_finite()) {
      throw NumericError("optimizer_step: non-finite gradient for '" + name + "'");
    }

    switch (state.method) {
      case OptMethod::kSgd: {
        for (std::size_t i = 0; i < p.size(); ++i) {
          p.values[i] -= state.lr * grad.values[i];
        }
        break;
      }
      case OptMethod::kSgdMomentum: {
        Tensor& m = buffer_for(state.m, name, p.shape);
        for (std::size_t i = 0; i < p.size(); ++i) {
          m.values[i] = state.momentum * m.values[i] + grad.values[i];
          p.values[i] -= state.lr * m.values[i];
        }
        break;
      }
      case OptMethod::kAdam: {
        Tensor& m = buffer_for(state.m, name, p.shape);
        Tensor& v = buffer_for(state.v, name, p.shape);
        double t = static_cast<double>(state.step_count);
        double bc1 = 1.0 - std::pow(state.beta1, t);
        double bc2 = 1.0 - std::pow(state.beta2, t);
        for (std::size_t i = 0; i < p.size(); ++i) {
          double g = grad.values[i];
          m.values[i] = state.beta1 * m.values[i] + (1.0 - state.beta1) * g;
          v.values[i] = state.beta2 * v.values[i] + (1.0 - state.beta2) * g * g;
          double mhat = m.values[i] / bc1;
          double vhat = v.values[i] / bc2;
          p.values[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        break;
      }
    }

    if (!p.all_finite()) {
      throw NumericError("optimizer_step: non-finite param '" + name + "' after update");
    }
  }
}

}  // namespace cssl
