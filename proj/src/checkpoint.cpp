#include "mara/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mara/errors.hpp"

namespace mara {

using nlohmann::json;

namespace {

json config_to_json(const ModelConfig& c) {
  return {{"species", c.species},
          {"l_max", c.l_max},
          {"layers", c.layers},
          {"channels", c.channels},
          {"n_bessel", c.n_bessel},
          {"envelope_p", c.envelope_p},
          {"cutoff", c.cutoff},
          {"gating", c.gating},
          {"n_theta", c.n_theta},
          {"n_phi", c.n_phi},
          {"attn_dim", c.attn_dim},
          {"field_mode", c.field_mode.to_string()},
          {"positional_encoding", c.attention.positional_encoding},
          {"learnable_projections", c.attention.learnable},
          {"gate_activation", std::string(to_string(c.attention.gate))},
          {"heads", c.attention.heads}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.species = j.at("species").get<std::vector<int>>();
  c.l_max = j.at("l_max").get<int>();
  c.layers = j.at("layers").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.n_bessel = j.at("n_bessel").get<std::size_t>();
  c.envelope_p = j.at("envelope_p").get<int>();
  c.cutoff = j.at("cutoff").get<double>();
  c.gating = j.at("gating").get<bool>();
  c.n_theta = j.at("n_theta").get<std::size_t>();
  c.n_phi = j.at("n_phi").get<std::size_t>();
  c.attn_dim = j.at("attn_dim").get<std::size_t>();
  c.field_mode = FieldMode::parse(j.at("field_mode").get<std::string>());
  c.attention.positional_encoding = j.at("positional_encoding").get<bool>();
  c.attention.learnable = j.at("learnable_projections").get<bool>();
  c.attention.gate = parse_gate_activation(j.at("gate_activation").get<std::string>());
  c.attention.heads = j.at("heads").get<std::size_t>();
  return c;
}

/// Empty parameter skeleton with the right number of leaves for `c`.
ModelParams<Matrix> skeleton(const ModelConfig& c) {
  ModelParams<Matrix> p;
  p.layers.resize(c.layers);
  for (auto& l : p.layers) {
    l.w_radial.resize(static_cast<std::size_t>(c.l_max) + 1);
    l.w_mix.resize(static_cast<std::size_t>(c.l_max) + 1);
    l.w_inv.resize(static_cast<std::size_t>(c.l_max));
  }
  return p;
}

}  // namespace

std::string checkpoint_to_json(const ModelState& state, const std::map<std::string, std::string>& metadata) {
  state.validate();
  json params = json::object();
  for_each_param(state.params, [&](const std::string& name, const Matrix& m, ParamRole) {
    params[name] = {{"shape", {m.rows, m.cols}}, {"data", m.data}};
  });
  json meta(metadata);
  meta["gradient_strategy"] = kGradientStrategy;
  json doc = {{"format", "mara-checkpoint"},
              {"format_version", kCheckpointFormatVersion},
              {"config", config_to_json(state.config)},
              {"params", params},
              {"metadata", meta}};
  return doc.dump(1);
}

Checkpoint checkpoint_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; convert it to a line number.
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1;
    for (std::size_t i = 0; i < upto; ++i) line += text[i] == '\n';
    throw ParseError(line, std::string("invalid checkpoint JSON: ") + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw SchemaError("unsupported checkpoint format version " + doc.at("format_version").dump());
    Checkpoint ck;
    ck.state.config = config_from_json(doc.at("config"));
    ck.state.params = skeleton(ck.state.config);
    const json& params = doc.at("params");
    std::size_t seen = 0;
    for_each_param(ck.state.params, [&](const std::string& name, Matrix& m, ParamRole) {
      if (!params.contains(name)) throw SchemaError("checkpoint lacks parameter '" + name + "'");
      const json& entry = params.at(name);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw SchemaError("parameter '" + name + "' must have a 2-d shape");
      auto data = entry.at("data").get<std::vector<double>>();
      if (data.size() != shape[0] * shape[1]) throw SchemaError("parameter '" + name + "' data does not match its shape");
      m = Matrix(shape[0], shape[1], std::move(data));
      ++seen;
    });
    if (seen != params.size()) throw SchemaError("checkpoint has parameters this model does not use");
    if (doc.contains("metadata"))
      for (const auto& [k, v] : doc.at("metadata").items())
        ck.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    ck.state.validate();
    return ck;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint schema error: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw SchemaError(std::string("checkpoint is inconsistent: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const ModelState& state, const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(state, metadata) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace mara
