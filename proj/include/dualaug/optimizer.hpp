#pragma once

#include "dualaug/tape.hpp"

#include <string>

namespace dualaug {

enum class OptimizerKind { sgd, adam, adamw };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;  // adamw only
  long step = 0;
  Vector m;
  Vector v;
};

OptimizerState make_optimizer(OptimizerKind kind, double lr, int param_count);

// Bias-corrected Adam; AdamW applies decoupled decay p -= lr*wd*p first.
// Throws LengthError if sizes disagree.
void optimizer_step(OptimizerState& state, Vector& params, const Vector& grads);

}  // namespace dualaug
