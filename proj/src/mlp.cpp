#include "dualaug/mlp.hpp"

#include "dualaug/errors.hpp"

#include <cmath>

namespace dualaug {

int ParamLayout::total() const {
  int t = 0;
  for (const auto& s : segments) t += s.size();
  return t;
}

const ParamSegment& ParamLayout::find(const std::string& name) const {
  for (const auto& s : segments) {
    if (s.name == name) return s;
  }
  throw ShapeError("no parameter segment named " + name);
}

bool ParamLayout::is_contiguous() const {
  int expected = 0;
  for (const auto& s : segments) {
    if (s.offset != expected || s.rows <= 0 || s.cols <= 0) return false;
    expected += s.size();
  }
  return true;
}

void ParamLayout::append(std::string name, int rows, int cols) {
  segments.push_back({std::move(name), total(), rows, cols});
}

void validate(const MlpSpec& spec) {
  if (spec.input_dim <= 0 || spec.output_dim <= 0) throw ShapeError("mlp dimensions must be positive");
  for (int h : spec.hidden_dims) {
    if (h <= 0) throw ShapeError("mlp hidden dimensions must be positive");
  }
  if (spec.residual_blocks < 0) throw ShapeError("residual_blocks must be non-negative");
  if (spec.residual_blocks > 0 && spec.hidden_dims.size() != 1) {
    throw ShapeError("residual mlp needs exactly one hidden width");
  }
}

ParamLayout mlp_layout(const MlpSpec& spec) {
  validate(spec);
  ParamLayout layout;
  int prev = spec.input_dim;
  if (spec.residual_blocks > 0) {
    const int w = spec.hidden_dims.front();
    layout.append("in.weight", prev, w);
    layout.append("in.bias", 1, w);
    for (int b = 0; b < spec.residual_blocks; ++b) {
      const std::string p = "block" + std::to_string(b);
      layout.append(p + ".fc1.weight", w, w);
      layout.append(p + ".fc1.bias", 1, w);
      layout.append(p + ".fc2.weight", w, w);
      layout.append(p + ".fc2.bias", 1, w);
    }
    prev = w;
  } else {
    for (std::size_t i = 0; i < spec.hidden_dims.size(); ++i) {
      const std::string p = "fc" + std::to_string(i);
      layout.append(p + ".weight", prev, spec.hidden_dims[i]);
      layout.append(p + ".bias", 1, spec.hidden_dims[i]);
      prev = spec.hidden_dims[i];
    }
  }
  layout.append("out.weight", prev, spec.output_dim);
  layout.append("out.bias", 1, spec.output_dim);
  return layout;
}

ParamStore init_mlp(const MlpSpec& spec, std::mt19937_64& rng) {
  ParamStore store;
  store.layout = mlp_layout(spec);
  store.values = Vector::Zero(store.layout.total());
  const double gain = std::sqrt(2.0 / (1.0 + spec.leaky_slope * spec.leaky_slope));
  for (const auto& seg : store.layout.segments) {
    const bool is_bias = seg.rows == 1 && seg.name.ends_with(".bias");
    if (is_bias) continue;
    if (seg.name.starts_with("out.") && spec.final_layer_zero_init) continue;
    const double bound = gain * std::sqrt(3.0 / seg.rows);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int k = 0; k < seg.size(); ++k) store.values(seg.offset + k) = dist(rng);
  }
  return store;
}

namespace {

struct Linear {
  Var weight;
  Var bias;
};

Linear bind_linear(Tape& tape, Var params, const ParamLayout& layout, const std::string& prefix) {
  const auto& w = layout.find(prefix + ".weight");
  const auto& b = layout.find(prefix + ".bias");
  return {tape.reshape(tape.slice_rows(params, w.offset, w.size()), w.rows, w.cols),
          tape.reshape(tape.slice_rows(params, b.offset, b.size()), 1, b.cols)};
}

Var linear(Tape& tape, const Linear& l, Var x) { return tape.add_row(tape.matmul(x, l.weight), l.bias); }

}  // namespace

Var mlp_forward(const MlpSpec& spec, Tape& tape, Var params, Var input) {
  const ParamLayout layout = mlp_layout(spec);
  const Matrix& p = tape.value(params);
  if (p.cols() != 1 || p.rows() != layout.total()) {
    throw ShapeError("mlp params: expected " + std::to_string(layout.total()) + " values, got " +
                     std::to_string(p.size()));
  }
  if (tape.value(input).cols() != spec.input_dim) {
    throw ShapeError("mlp input: expected " + std::to_string(spec.input_dim) + " columns, got " +
                     std::to_string(tape.value(input).cols()));
  }
  const double slope = spec.leaky_slope;
  Var h = input;
  if (spec.residual_blocks > 0) {
    h = tape.leaky_relu(linear(tape, bind_linear(tape, params, layout, "in"), h), slope);
    for (int b = 0; b < spec.residual_blocks; ++b) {
      const std::string pre = "block" + std::to_string(b);
      Var r = tape.leaky_relu(linear(tape, bind_linear(tape, params, layout, pre + ".fc1"), h), slope);
      r = tape.leaky_relu(linear(tape, bind_linear(tape, params, layout, pre + ".fc2"), r), slope);
      h = tape.add(h, r);
    }
  } else {
    for (std::size_t i = 0; i < spec.hidden_dims.size(); ++i) {
      h = tape.leaky_relu(linear(tape, bind_linear(tape, params, layout, "fc" + std::to_string(i)), h), slope);
    }
  }
  return linear(tape, bind_linear(tape, params, layout, "out"), h);
}

Matrix mlp_eval(const MlpSpec& spec, const Vector& params, const Matrix& input) {
  Tape tape;
  const Var p = tape.constant(params);
  const Var x = tape.constant(input);
  return tape.value(mlp_forward(spec, tape, p, x));
}

}  // namespace dualaug
