#pragma once

#include "dualaug/tape.hpp"

#include <random>
#include <string>
#include <vector>

namespace dualaug {

// Named block of a flat parameter vector. Matrices are stored column-major.
struct ParamSegment {
  std::string name;
  int offset = 0;
  int rows = 0;
  int cols = 0;
  int size() const { return rows * cols; }
};

struct ParamLayout {
  std::vector<ParamSegment> segments;

  int total() const;
  const ParamSegment& find(const std::string& name) const;
  // Offsets ascending, non-overlapping, and covering [0, total).
  bool is_contiguous() const;
  void append(std::string name, int rows, int cols);
};

struct ParamStore {
  ParamLayout layout;
  Vector values;

  int size() const { return static_cast<int>(values.size()); }
};

// Fully connected network with leaky-relu hidden activations.
// With residual_blocks > 0 there must be exactly one hidden width w:
//   h = act(in(x)); repeat: h = h + act(fc2(act(fc1(h)))); y = out(h)
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  double leaky_slope = 0.01;
  bool final_layer_zero_init = false;
  int residual_blocks = 0;
};

void validate(const MlpSpec& spec);
ParamLayout mlp_layout(const MlpSpec& spec);

// Kaiming-uniform hidden weights, zero biases; the output layer is zero when
// spec.final_layer_zero_init is set.
ParamStore init_mlp(const MlpSpec& spec, std::mt19937_64& rng);

// `params` is a column vector laid out by mlp_layout(spec); `input` is N x input_dim.
Var mlp_forward(const MlpSpec& spec, Tape& tape, Var params, Var input);

// Convenience evaluation without keeping a tape.
Matrix mlp_eval(const MlpSpec& spec, const Vector& params, const Matrix& input);

}  // namespace dualaug
