#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "mara/errors.hpp"
#include "mara/model.hpp"

namespace mara {

using ad::Tape;
using ad::Var;

std::size_t ModelConfig::species_index(int z) const {
  for (std::size_t i = 0; i < species.size(); ++i)
    if (species[i] == z) return i;
  throw InvalidArgument("element Z=" + std::to_string(z) + " is not in the model's species list");
}

void ModelConfig::validate() const {
  if (species.empty()) throw InvalidArgument("model needs at least one species");
  if (l_max < 0 || l_max > 8) throw InvalidArgument("l_max must be in [0, 8]");
  if (channels == 0 || n_bessel == 0) throw InvalidArgument("channels and n_bessel must be positive");
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw InvalidArgument("cutoff must be positive");
  if (n_theta == 0 || n_phi == 0) throw InvalidArgument("grid counts must be positive");
  if (attn_dim == 0) throw InvalidArgument("attention width must be positive");
  if (attention.heads == 0 || attn_dim % attention.heads != 0)
    throw InvalidArgument("attention heads must divide the attention width");
}

namespace {

Matrix uniform(std::size_t r, std::size_t c, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(r, c);
  for (double& x : m.data) x = u(rng);
  return m;
}

Matrix normal(std::size_t r, std::size_t c, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (double& x : m.data) x = n(rng);
  return m;
}

void check_leaf(const std::string& name, const Matrix& m, std::size_t rows, std::size_t cols) {
  if (m.rows != rows || m.cols != cols)
    throw InvalidArgument(name + " has shape " + shape_string(m.rows, m.cols) + ", expected " +
                          shape_string(rows, cols));
  for (double x : m.data)
    if (!std::isfinite(x)) throw InvalidArgument(name + " contains a non-finite entry");
}

}  // namespace

ModelState ModelState::random(const ModelConfig& config, std::uint64_t seed, bool random_gate) {
  config.validate();
  std::mt19937_64 rng(seed);
  ModelState st;
  st.config = config;
  const std::size_t c = config.channels, nb = config.n_bessel, ns = config.species.size();
  const std::size_t L = static_cast<std::size_t>(config.l_max);
  auto& p = st.params;
  p.embedding = normal(ns, c, 1.0, rng);
  p.reference = Matrix(ns, 1);
  p.readout = uniform(c, 1, 1.0 / std::sqrt(double(c)), rng);
  for (std::size_t t = 0; t < config.layers; ++t) {
    LayerParams<Matrix> l;
    for (std::size_t j = 0; j <= L; ++j) {
      l.w_radial.push_back(uniform(nb, c, 1.0 / std::sqrt(double(nb)), rng));
      l.w_mix.push_back(uniform(c, c, 1.0 / std::sqrt(double(c)), rng));
      if (j > 0) l.w_inv.push_back(uniform(c, c, 1.0 / std::sqrt(double(c)), rng));
    }
    MaraParams m = init_mara_params(config.attn_dim, c, config.field_mode.dim(), config.n_grid(), config.attention, rng);
    if (random_gate) {
      m.weights.gate_w = normal(1, config.attn_dim, 1.0, rng);
      m.weights.gate_b = normal(1, 1, 1.0, rng);
    }
    l.attention = std::move(m.weights);
    p.layers.push_back(std::move(l));
  }
  return st;
}

MaraParams ModelState::mara(std::size_t layer) const {
  if (layer >= params.layers.size()) throw InvalidArgument("layer index out of range");
  return {params.layers[layer].attention, config.attention};
}

void ModelState::validate() const {
  config.validate();
  const std::size_t c = config.channels, ns = config.species.size();
  const std::size_t L = static_cast<std::size_t>(config.l_max);
  if (params.layers.size() != config.layers) throw InvalidArgument("layer count does not match the config");
  check_leaf("embedding", params.embedding, ns, c);
  check_leaf("reference", params.reference, ns, 1);
  check_leaf("readout", params.readout, c, 1);
  for (const auto& l : params.layers) {
    if (l.w_radial.size() != L + 1 || l.w_mix.size() != L + 1 || l.w_inv.size() != L)
      throw InvalidArgument("layer weights do not match l_max");
    for (const auto& w : l.w_radial) check_leaf("w_radial", w, config.n_bessel, c);
    for (const auto& w : l.w_mix) check_leaf("w_mix", w, c, c);
    for (const auto& w : l.w_inv) check_leaf("w_inv", w, c, c);
    MaraParams m{l.attention, config.attention};
    m.validate(config.n_grid());
    if (m.node_dim() != c || m.dim() != config.attn_dim || m.field_dim() != config.field_mode.dim())
      throw InvalidArgument("attention weights do not match the model config");
  }
}

void set_reference_energies(ModelState& state, const std::vector<AtomicConfiguration>& configs) {
  double total = 0.0;
  std::size_t atoms = 0;
  for (const auto& c : configs) {
    if (!c.energy) throw SchemaError("reference energies need labelled configurations");
    total += *c.energy;
    atoms += c.size();
  }
  if (atoms == 0) throw InvalidArgument("no atoms to average over");
  for (double& e : state.params.reference.data) e = total / static_cast<double>(atoms);
}

ModelState with_grid(const ModelState& state, std::size_t n_theta, std::size_t n_phi) {
  if (state.config.attention.positional_encoding)
    throw InvalidArgument("positional embeddings are tied to one grid; disable them to change grids");
  ModelState out = state;
  out.config.n_theta = n_theta;
  out.config.n_phi = n_phi;
  out.config.validate();
  for (auto& l : out.params.layers) l.attention.pos = Matrix(out.config.n_grid(), out.config.attn_dim);
  return out;
}

Batch make_batch(const std::vector<const AtomicConfiguration*>& configs, const ModelConfig& config) {
  Batch b;
  std::size_t total = 0;
  for (const auto* c : configs) {
    c->validate();
    if (c->size() == 0) throw InvalidArgument("empty configuration");
    total += c->size();
  }
  b.positions = Matrix(total, 3);
  b.offset.push_back(0);
  for (std::size_t g = 0; g < configs.size(); ++g) {
    const auto& c = *configs[g];
    const std::size_t base = b.offset.back();
    for (std::size_t a = 0; a < c.size(); ++a) {
      b.species.push_back(config.species_index(c.species[a]));
      b.config_of.push_back(g);
      for (int k = 0; k < 3; ++k) b.positions(base + a, k) = c.positions[a][k];
    }
    for (const auto& [i, j] : neighbor_list(c.positions, config.cutoff).edges) {
      if (!(norm(c.positions[j] - c.positions[i]) > kMinEdgeLength))
        throw DegenerateGeometry("atoms " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      b.recv.push_back(base + i);
      b.send.push_back(base + j);
    }
    b.offset.push_back(base + c.size());
  }
  return b;
}

template <class T>
ModelParams<Var<T>> bind_params(Tape<T>& tape, const ModelParams<Matrix>& params,
                                const std::function<bool(ParamRole)>& trainable) {
  ModelParams<Var<T>> out;
  out.layers.resize(params.layers.size());
  for (std::size_t t = 0; t < params.layers.size(); ++t) {
    out.layers[t].w_radial.resize(params.layers[t].w_radial.size());
    out.layers[t].w_mix.resize(params.layers[t].w_mix.size());
    out.layers[t].w_inv.resize(params.layers[t].w_inv.size());
  }
  // Visit both structures in lockstep through their identical layouts.
  std::vector<std::pair<const Matrix*, ParamRole>> src;
  for_each_param(params, [&](const std::string&, const Matrix& m, ParamRole role) { src.emplace_back(&m, role); });
  std::size_t i = 0;
  for_each_param(out, [&](const std::string&, Var<T>& v, ParamRole) {
    const auto& [m, role] = src[i++];
    v = trainable && trainable(role) ? tape.input(lift<T>(*m)) : tape.constant(lift<T>(*m));
  });
  return out;
}

std::vector<double> radial_basis(double r, double rc, std::size_t n, int envelope_p) {
  if (!(r > 0.0)) throw InvalidArgument("radial_basis needs r > 0");
  if (!(rc > 0.0)) throw InvalidArgument("radial_basis needs a positive cutoff");
  std::vector<double> out(n, 0.0);
  if (r >= rc) return out;
  double env = 1.0;
  if (envelope_p > 0) {
    const double x = r / rc, p = envelope_p;
    env = 1.0 - (p + 1) * (p + 2) / 2 * std::pow(x, p) + p * (p + 2) * std::pow(x, p + 1) -
          p * (p + 1) / 2 * std::pow(x, p + 2);
  }
  const double pref = std::sqrt(2.0 / rc);
  for (std::size_t m = 0; m < n; ++m)
    out[m] = pref * std::sin(static_cast<double>(m + 1) * std::numbers::pi * r / rc) / r * env;
  return out;
}

namespace model {

template <class T>
EdgeGeometry<T> edge_geometry(const Batch& batch, Var<T> positions, const ModelConfig& config) {
  Tape<T>& tape = *positions.tape;
  EdgeGeometry<T> g;
  g.rel = ad::sub(ad::gather_rows(positions, batch.send), ad::gather_rows(positions, batch.recv));
  g.r = ad::row_norm(g.rel);
  Var<T> inv_r = ad::reciprocal(g.r);
  g.sh = ad::sph_harm(ad::mul_colvec(g.rel, inv_r), config.l_max);
  Matrix freq(1, config.n_bessel);
  for (std::size_t m = 0; m < config.n_bessel; ++m)
    freq.data[m] = static_cast<double>(m + 1) * std::numbers::pi / config.cutoff;
  Var<T> waves = ad::sin(ad::matmul(g.r, tape.constant(lift<T>(freq))));
  Var<T> radial = ad::mul_colvec(waves, inv_r);
  if (config.envelope_p > 0)
    radial = ad::mul_colvec(radial, ad::poly_envelope(ad::affine(g.r, 1.0 / config.cutoff, 0.0), config.envelope_p));
  g.basis = ad::affine(radial, std::sqrt(2.0 / config.cutoff), 0.0);
  return g;
}

template <class T>
std::vector<Var<T>> messages(const EdgeGeometry<T>& geo, Var<T> s_send, Var<T> alpha,
                             const LayerParams<Var<T>>& layer, int l_max) {
  const std::size_t ne = geo.r.rows();
  std::vector<Var<T>> out;
  for (int J = 0; J <= l_max; ++J) {
    const std::size_t width = static_cast<std::size_t>(2 * J + 1);
    Var<T> base = ad::mul(ad::matmul(geo.basis, layer.w_radial[J]), s_send);
    if (alpha.valid()) base = ad::mul_colvec(base, alpha);
    std::vector<std::size_t> rep(ne * width);
    for (std::size_t r = 0; r < rep.size(); ++r) rep[r] = r / width;
    Var<T> y = ad::reshape(ad::slice_cols(geo.sh, static_cast<std::size_t>(J * J), static_cast<std::size_t>((J + 1) * (J + 1))),
                           ne * width, 1);
    out.push_back(ad::mul_colvec(ad::gather_rows(base, std::move(rep)), y));
  }
  return out;
}

template <class T>
void aggregate_update(const std::vector<Var<T>>& msgs, const std::vector<std::size_t>& recv, std::size_t n_atoms,
                      const LayerParams<Var<T>>& layer, Var<T>& s, std::vector<Var<T>>& h) {
  const std::size_t ne = recv.size();
  Var<T> pre;
  for (std::size_t J = 0; J < msgs.size(); ++J) {
    const std::size_t width = 2 * J + 1;
    std::vector<std::size_t> dst(ne * width);
    for (std::size_t r = 0; r < dst.size(); ++r) dst[r] = recv[r / width] * width + r % width;
    Var<T> agg = ad::scatter_add_rows(msgs[J], std::move(dst), n_atoms * width);
    Var<T> mixed = ad::matmul(agg, layer.w_mix[J]);
    if (J == 0) {
      pre = mixed;
      continue;
    }
    h[J - 1] = h[J - 1].valid() ? ad::add(h[J - 1], mixed) : mixed;
    std::vector<std::size_t> atom(n_atoms * width);
    for (std::size_t r = 0; r < atom.size(); ++r) atom[r] = r / width;
    Var<T> invariant = ad::scatter_add_rows(ad::square(h[J - 1]), std::move(atom), n_atoms);
    pre = ad::add(pre, ad::matmul(invariant, layer.w_inv[J - 1]));
  }
  s = ad::add(s, ad::silu(pre));
}

}  // namespace model

template <class T>
Forward<T> evaluate(const Batch& batch, Var<T> positions, const ModelParams<Var<T>>& params,
                    const ModelConfig& config, const SphericalGrid& grid, const EvalOptions& opts) {
  Tape<T>& tape = *positions.tape;
  const std::size_t n = batch.n_atoms(), ne = batch.recv.size();
  if (positions.rows() != n || positions.cols() != 3) throw InvalidArgument("positions must be n_atoms x 3");
  if (n == 0) throw InvalidArgument("cannot evaluate an empty batch");
  Forward<T> f;
  Var<T> s0 = ad::gather_rows(params.embedding, batch.species);
  Var<T> s = s0;
  if (ne > 0) {
    auto geo = model::edge_geometry(batch, positions, config);
    const bool attend = config.gating && !opts.force_unit_gate;
    Var<T> feats;
    if (attend) feats = attn::field_feature_rows(geo.rel, geo.r, grid, config.field_mode);
    Var<T> ones;
    if (config.gating && opts.force_unit_gate) {
      Matrix one(ne, 1);
      for (double& x : one.data) x = 1.0;
      ones = tape.constant(lift<T>(one));
    }
    std::vector<Var<T>> h(static_cast<std::size_t>(config.l_max));
    for (const auto& layer : params.layers) {
      Var<T> s_send = ad::gather_rows(s, batch.send);
      Var<T> alpha = ones;
      if (attend) {
        auto qkv = attn::qkv_rows(ad::gather_rows(s, batch.recv), s_send, feats, layer.attention, config.attention,
                                  grid.size());
        auto gate = attn::pool_gate_rows(attn::attention_rows(qkv, grid, config.attention.heads), grid,
                                         layer.attention, config.attention.gate);
        alpha = gate.alpha;
        f.alpha.push_back(gate.alpha);
        f.pooled.push_back(gate.pooled);
      }
      auto msgs = model::messages(geo, s_send, alpha, layer, config.l_max);
      model::aggregate_update(msgs, batch.recv, n, layer, s, h);
    }
  }
  Var<T> reference = ad::gather_rows(params.reference, batch.species);
  f.atom_energy = ad::add(reference, ad::matmul(ad::sub(s, s0), params.readout));
  f.energy = ad::scatter_add_rows(f.atom_energy, batch.config_of, batch.n_configs());
  return f;
}

#define MARA_INSTANTIATE_MODEL(T)                                                                             \
  template ModelParams<Var<T>> bind_params(Tape<T>&, const ModelParams<Matrix>&,                              \
                                           const std::function<bool(ParamRole)>&);                            \
  template Forward<T> evaluate(const Batch&, Var<T>, const ModelParams<Var<T>>&, const ModelConfig&,          \
                               const SphericalGrid&, const EvalOptions&);                                     \
  template model::EdgeGeometry<T> model::edge_geometry(const Batch&, Var<T>, const ModelConfig&);             \
  template std::vector<Var<T>> model::messages(const model::EdgeGeometry<T>&, Var<T>, Var<T>,                \
                                               const LayerParams<Var<T>>&, int);                              \
  template void model::aggregate_update(const std::vector<Var<T>>&, const std::vector<std::size_t>&,          \
                                        std::size_t, const LayerParams<Var<T>>&, Var<T>&, std::vector<Var<T>>&);

MARA_INSTANTIATE_MODEL(double)
MARA_INSTANTIATE_MODEL(Dual<double>)

#undef MARA_INSTANTIATE_MODEL

Prediction predict(const AtomicConfiguration& config, const ModelState& state, bool with_forces,
                   const EvalOptions& opts) {
  if (config.size() == 0) throw InvalidArgument("energy of an empty configuration");
  const Batch batch = make_batch({&config}, state.config);
  const SphericalGrid grid = build_equiangular_grid(state.config.n_theta, state.config.n_phi);
  Tape<double> tape;
  auto params = bind_params<double>(tape, state.params, nullptr);
  Var<double> x = with_forces ? tape.input(batch.positions) : tape.constant(batch.positions);
  auto f = evaluate(batch, x, params, state.config, grid, opts);
  Prediction p;
  p.energy = f.energy.value().data[0];
  p.atom_energies = f.atom_energy.value().data;
  p.neighbors = neighbor_list(config.positions, state.config.cutoff);
  for (const auto& a : f.alpha) p.alpha.push_back(a.value().data);
  for (const auto& a : f.pooled) p.pooled.push_back(a.value());
  if (with_forces) {
    const Var<double> wrt[] = {x};
    const Matrix g = tape.grad(f.energy, wrt, true)[0];
    p.forces.resize(config.size());
    for (std::size_t i = 0; i < config.size(); ++i)
      for (int k = 0; k < 3; ++k) p.forces[i][k] = -g(i, k);
  }
  return p;
}

double energy(const AtomicConfiguration& config, const ModelState& state, const EvalOptions& opts) {
  return predict(config, state, false, opts).energy;
}

std::vector<Vec3> forces(const AtomicConfiguration& config, const ModelState& state, const EvalOptions& opts) {
  return predict(config, state, true, opts).forces;
}

}  // namespace mara
