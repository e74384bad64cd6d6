#pragma once

// Gated equivariant message-passing force field.
//
// Each atom carries scalar channels s (ell = 0) and, for 1 <= J <= l_max,
// blocks h_J of shape (2J+1) x C that rotate with the Wigner matrix of order J.
// An edge (i <- j) sends, for every order J,
//     m_ij,J = alpha_ij * (B(r_ij) Wrad_J  o  s_j) (x) Y_J(r_hat_ij)
// where B is a Bessel basis times a polynomial cutoff. Messages are summed per
// receiver, mixed over channels, and added to the features:
//     h_J += A_J Wmix_J                              (J >= 1)
//     s   += silu(A_0 Wmix_0 + sum_J |h_J|^2 Winv_J)
// The squared norms |h_J|^2 are rotation invariant, so the scalars stay
// invariant and the model is exactly SE(3)-equivariant when alpha is.
// Per-atom energy: E0[species] + (s_final - s_initial) . w_out.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mara/attention.hpp"
#include "mara/config.hpp"
#include "mara/field.hpp"
#include "mara/geometry.hpp"
#include "mara/tape.hpp"

namespace mara {

struct ModelConfig {
  std::vector<int> species{1, 8};  // atomic-number vocabulary
  int l_max = 2;
  std::size_t layers = 2;
  std::size_t channels = 32;
  std::size_t n_bessel = 8;
  int envelope_p = 6;
  double cutoff = 5.0;
  bool gating = true;
  // attention
  std::size_t n_theta = 4;
  std::size_t n_phi = 8;
  std::size_t attn_dim = 16;
  FieldMode field_mode{};
  AttentionFlags attention{};

  std::size_t n_grid() const { return n_theta * n_phi; }
  /// Row of `z` in the embedding table; InvalidArgument for an unknown element.
  std::size_t species_index(int z) const;
  void validate() const;
};

template <class Leaf>
struct LayerParams {
  std::vector<Leaf> w_radial;  // l_max + 1 of n_bessel x C
  std::vector<Leaf> w_mix;     // l_max + 1 of C x C
  std::vector<Leaf> w_inv;     // l_max of C x C (orders 1..l_max)
  AttentionWeights<Leaf> attention;
};

template <class Leaf>
struct ModelParams {
  Leaf embedding;   // n_species x C
  Leaf reference;   // n_species x 1, per-species energy shift (not trained)
  Leaf readout;     // C x 1
  std::vector<LayerParams<Leaf>> layers;
};

enum class ParamRole { backbone, projection, positional, gate, reference };

/// Visits every parameter leaf in a fixed order: fn(name, leaf, role).
template <class Params, class Fn>
void for_each_param(Params& p, Fn&& fn) {
  fn(std::string("embedding"), p.embedding, ParamRole::backbone);
  fn(std::string("reference"), p.reference, ParamRole::reference);
  fn(std::string("readout"), p.readout, ParamRole::backbone);
  for (std::size_t t = 0; t < p.layers.size(); ++t) {
    auto& l = p.layers[t];
    const std::string pre = "layers." + std::to_string(t) + ".";
    for (std::size_t j = 0; j < l.w_radial.size(); ++j)
      fn(pre + "w_radial." + std::to_string(j), l.w_radial[j], ParamRole::backbone);
    for (std::size_t j = 0; j < l.w_mix.size(); ++j)
      fn(pre + "w_mix." + std::to_string(j), l.w_mix[j], ParamRole::backbone);
    for (std::size_t j = 0; j < l.w_inv.size(); ++j)
      fn(pre + "w_inv." + std::to_string(j + 1), l.w_inv[j], ParamRole::backbone);
    auto& a = l.attention;
    fn(pre + "attention.w_h_q", a.w_h_q, ParamRole::projection);
    fn(pre + "attention.w_h_k", a.w_h_k, ParamRole::projection);
    fn(pre + "attention.w_h_v", a.w_h_v, ParamRole::projection);
    fn(pre + "attention.w_f_q", a.w_f_q, ParamRole::projection);
    fn(pre + "attention.w_f_k", a.w_f_k, ParamRole::projection);
    fn(pre + "attention.w_f_v", a.w_f_v, ParamRole::projection);
    fn(pre + "attention.pos", a.pos, ParamRole::positional);
    fn(pre + "attention.gate_w", a.gate_w, ParamRole::gate);
    fn(pre + "attention.gate_b", a.gate_b, ParamRole::gate);
  }
}

struct ModelState {
  ModelConfig config;
  ModelParams<Matrix> params;

  /// Fresh weights. Attention gates start at zero (alpha = 0.5) unless
  /// random_gate is set, which draws gate weights from N(0, 1).
  static ModelState random(const ModelConfig& config, std::uint64_t seed, bool random_gate = false);

  /// Attention parameters of one layer packaged with the flags.
  MaraParams mara(std::size_t layer) const;
  /// Throws InvalidArgument on any shape mismatch or non-finite entry.
  void validate() const;
};

/// Every reference energy set to the mean energy per atom of `configs`.
void set_reference_energies(ModelState& state, const std::vector<AtomicConfiguration>& configs);

/// Same weights on a different grid. Positional embeddings cannot be carried
/// across grids, so this requires positional encoding to be off.
ModelState with_grid(const ModelState& state, std::size_t n_theta, std::size_t n_phi);

struct EvalOptions {
  /// Multiply messages by alpha = 1 instead of the attention gate.
  bool force_unit_gate = false;
};

/// Disjoint union of configurations with their cutoff graphs.
struct Batch {
  std::vector<std::size_t> species;      // embedding row per atom
  std::vector<std::size_t> config_of;    // configuration index per atom
  std::vector<std::size_t> offset;       // first atom of each configuration (+ total)
  std::vector<std::size_t> recv, send;   // edges i <- j, sorted by (i, j)
  Matrix positions;                      // N x 3
  std::size_t n_configs() const { return offset.empty() ? 0 : offset.size() - 1; }
  std::size_t n_atoms() const { return positions.rows; }
};

Batch make_batch(const std::vector<const AtomicConfiguration*>& configs, const ModelConfig& config);

template <class T>
struct Forward {
  ad::Var<T> energy;                   // n_configs x 1
  ad::Var<T> atom_energy;              // n_atoms x 1
  std::vector<ad::Var<T>> alpha;       // per layer, n_edges x 1 (empty when ungated)
  std::vector<ad::Var<T>> pooled;      // per layer, n_edges x d
};

template <class T>
ModelParams<ad::Var<T>> bind_params(ad::Tape<T>& tape, const ModelParams<Matrix>& params,
                                    const std::function<bool(ParamRole)>& trainable);

template <class T>
Forward<T> evaluate(const Batch& batch, ad::Var<T> positions, const ModelParams<ad::Var<T>>& params,
                    const ModelConfig& config, const SphericalGrid& grid, const EvalOptions& opts = {});

// ---- pieces of the forward pass ---------------------------------------------

/// Bessel basis sqrt(2/rc) sin(m pi r / rc) / r, m = 1..n, times the polynomial
/// cutoff (skipped when envelope_p <= 0). Zero for r >= rc. Throws for r <= 0.
std::vector<double> radial_basis(double r, double rc, std::size_t n, int envelope_p);

namespace model {

template <class T>
struct EdgeGeometry {
  ad::Var<T> rel;    // E x 3, x_j - x_i
  ad::Var<T> r;      // E x 1
  ad::Var<T> sh;     // E x (l_max+1)^2
  ad::Var<T> basis;  // E x n_bessel
};

template <class T>
EdgeGeometry<T> edge_geometry(const Batch& batch, ad::Var<T> positions, const ModelConfig& config);

/// Per-order messages, rows e*(2J+1) + m. `alpha` may be invalid (no gating).
template <class T>
std::vector<ad::Var<T>> messages(const EdgeGeometry<T>& geo, ad::Var<T> s_send, ad::Var<T> alpha,
                                 const LayerParams<ad::Var<T>>& layer, int l_max);

/// Sums messages per receiver (ascending edge order), mixes channels and
/// updates (s, h) in place. h[J-1] may be invalid before the first update.
template <class T>
void aggregate_update(const std::vector<ad::Var<T>>& msgs, const std::vector<std::size_t>& recv,
                      std::size_t n_atoms, const LayerParams<ad::Var<T>>& layer, ad::Var<T>& s,
                      std::vector<ad::Var<T>>& h);

}  // namespace model

// ---- convenience wrappers -----------------------------------------------------

struct Prediction {
  double energy = 0.0;
  std::vector<double> atom_energies;
  std::vector<Vec3> forces;                 // empty unless requested
  NeighborList neighbors;
  std::vector<std::vector<double>> alpha;   // per layer, per edge
  std::vector<Matrix> pooled;               // per layer, n_edges x attn_dim
};

Prediction predict(const AtomicConfiguration& config, const ModelState& state, bool with_forces = true,
                   const EvalOptions& opts = {});
double energy(const AtomicConfiguration& config, const ModelState& state, const EvalOptions& opts = {});
std::vector<Vec3> forces(const AtomicConfiguration& config, const ModelState& state, const EvalOptions& opts = {});

}  // namespace mara
