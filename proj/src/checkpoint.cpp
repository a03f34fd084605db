#include "dualaug/checkpoint.hpp"

#include "dualaug/errors.hpp"
#include "dualaug/io.hpp"

namespace dualaug {

using nlohmann::json;

json to_json(const ParamLayout& layout) {
  json segs = json::array();
  for (const auto& s : layout.segments) {
    segs.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
  }
  return segs;
}

ParamLayout layout_from_json(const json& doc) {
  ParamLayout layout;
  for (const auto& s : doc) {
    layout.segments.push_back(
        {s.at("name").get<std::string>(), s.at("offset").get<int>(), s.at("rows").get<int>(), s.at("cols").get<int>()});
  }
  if (!layout.is_contiguous()) throw ParseError("parameter layout is not contiguous");
  return layout;
}

json to_json(const ParamStore& store) {
  json values = json::array();
  for (Eigen::Index i = 0; i < store.values.size(); ++i) values.push_back(store.values(i));
  return {{"layout", to_json(store.layout)}, {"values", std::move(values)}};
}

ParamStore param_store_from_json(const json& doc) {
  try {
    ParamStore store;
    store.layout = layout_from_json(doc.at("layout"));
    const auto& values = doc.at("values");
    if (static_cast<int>(values.size()) != store.layout.total()) {
      throw ParseError("parameter count " + std::to_string(values.size()) + " does not match layout total " +
                       std::to_string(store.layout.total()));
    }
    store.values.resize(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) store.values(static_cast<Eigen::Index>(i)) = values[i].get<double>();
    return store;
  } catch (const json::exception& e) {
    throw ParseError(std::string("parameter store: ") + e.what());
  }
}

json to_json(const MlpSpec& spec) {
  return {{"input_dim", spec.input_dim},         {"hidden_dims", spec.hidden_dims},
          {"output_dim", spec.output_dim},       {"leaky_slope", spec.leaky_slope},
          {"final_layer_zero_init", spec.final_layer_zero_init},
          {"residual_blocks", spec.residual_blocks}};
}

MlpSpec mlp_spec_from_json(const json& doc) {
  MlpSpec s;
  s.input_dim = doc.at("input_dim").get<int>();
  s.hidden_dims = doc.at("hidden_dims").get<std::vector<int>>();
  s.output_dim = doc.at("output_dim").get<int>();
  s.leaky_slope = doc.value("leaky_slope", 0.01);
  s.final_layer_zero_init = doc.value("final_layer_zero_init", false);
  s.residual_blocks = doc.value("residual_blocks", 0);
  validate(s);
  return s;
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace dualaug
