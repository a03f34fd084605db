#include "dualaug/optimizer.hpp"

#include "dualaug/errors.hpp"

#include <cmath>

namespace dualaug {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adamw: return "adamw";
  }
  return "adam";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  if (name == "adamw") return OptimizerKind::adamw;
  throw ParseError("unknown optimizer kind: " + name);
}

OptimizerState make_optimizer(OptimizerKind kind, double lr, int param_count) {
  OptimizerState s;
  s.kind = kind;
  s.lr = lr;
  if (kind != OptimizerKind::sgd) {
    s.m = Vector::Zero(param_count);
    s.v = Vector::Zero(param_count);
  }
  return s;
}

void optimizer_step(OptimizerState& state, Vector& params, const Vector& grads) {
  if (params.size() != grads.size()) {
    throw LengthError("optimizer: " + std::to_string(params.size()) + " params vs " + std::to_string(grads.size()) +
                      " gradients");
  }
  ++state.step;
  if (state.kind == OptimizerKind::sgd) {
    params -= state.lr * grads;
    return;
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw LengthError("optimizer moments do not match parameter count");
  }
  if (state.kind == OptimizerKind::adamw) params *= 1.0 - state.lr * state.weight_decay;

  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double lr = state.lr;
  const double eps = state.epsilon;
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

}  // namespace dualaug
