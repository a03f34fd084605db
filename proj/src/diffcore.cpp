#include "dualaug/diffcore.hpp"

#include "dualaug/errors.hpp"

namespace dualaug {

Var grad_norm(Tape& tape, Var output, std::span<const Var> inputs) {
  if (inputs.empty()) throw ShapeError("grad_norm needs at least one input");
  const auto grads = tape.grad_graph(output, inputs);
  Var total = tape.sum(tape.square(grads.front()));
  for (std::size_t i = 1; i < grads.size(); ++i) total = tape.add(total, tape.sum(tape.square(grads[i])));
  return tape.sqrt(total);
}

Var row_grad_norms(Tape& tape, Var output, Var input) {
  const Var w[1] = {input};
  const Var g = tape.grad_graph(output, w).front();
  return tape.sqrt(tape.row_sum(tape.square(g)));
}

Var mse(Tape& tape, Var a, Var b) {
  const Var d = tape.sub(a, b);
  return tape.mean(tape.square(d));
}

}  // namespace dualaug
