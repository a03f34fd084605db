#pragma once

#include "dualaug/mlp.hpp"
#include "dualaug/optimizer.hpp"
#include "dualaug/tape.hpp"

#include <span>

namespace dualaug {

// Euclidean norm of d(output)/d(inputs), recorded on the tape so it can be
// differentiated again w.r.t. anything upstream of `output`.
Var grad_norm(Tape& tape, Var output, std::span<const Var> inputs);

// Per-row gradient norms (N x 1) of a scalar output w.r.t. an N x D input,
// for batches whose rows do not interact.
Var row_grad_norms(Tape& tape, Var output, Var input);

// Mean of squared entrywise differences.
Var mse(Tape& tape, Var a, Var b);

}  // namespace dualaug
