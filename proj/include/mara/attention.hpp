#pragma once

// Continuous spherical attention over per-edge grid fields, pooled into a
// scalar gate per edge.
//
// For an edge (i <- j) every grid point k gets
//   q_k = W_h h_i + W_f f_k + p_k
//   k_k = W'_h h_j + W'_f f_k + p_k
//   v_k = W''_h h_j + W''_f f_k + p_k
// attention over the grid uses the quadrature weights as the measure, the
// result is averaged over the sphere, and a linear readout plus activation
// gives alpha_ij.
//
// Positional embeddings live in the global frame, so the gate is only
// approximately rotation invariant; the error shrinks as the grid is refined.

#include <cstddef>
#include <random>
#include <string_view>
#include <vector>

#include "mara/config.hpp"
#include "mara/field.hpp"
#include "mara/geometry.hpp"
#include "mara/tape.hpp"

namespace mara {

enum class GateActivation { logistic, sinusoidal };

std::string_view to_string(GateActivation a);
GateActivation parse_gate_activation(std::string_view s);

struct AttentionFlags {
  bool positional_encoding = true;
  /// Cleared: the trainer keeps the six projection matrices fixed.
  bool learnable = true;
  GateActivation gate = GateActivation::logistic;
  std::size_t heads = 1;
};

/// Leaf is Matrix for stored weights or ad::Var<T> when bound to a tape.
template <class Leaf>
struct AttentionWeights {
  Leaf w_h_q, w_h_k, w_h_v;  // d x d_h
  Leaf w_f_q, w_f_k, w_f_v;  // d x d_f
  Leaf pos;                  // n_grid x d
  Leaf gate_w;               // 1 x d
  Leaf gate_b;               // 1 x 1
};

struct MaraParams {
  AttentionWeights<Matrix> weights;
  AttentionFlags flags;

  std::size_t dim() const { return weights.w_h_q.rows; }
  std::size_t node_dim() const { return weights.w_h_q.cols; }
  std::size_t field_dim() const { return weights.w_f_q.cols; }
  /// Throws InvalidArgument on non-finite entries, inconsistent shapes, a
  /// positional table that does not match n_grid, or heads not dividing d.
  void validate(std::size_t n_grid) const;
};

/// Projections uniform in +-1/sqrt(fan_in), positional embeddings N(0, 0.02^2),
/// gate weights and bias zero (alpha starts at 0.5).
MaraParams init_mara_params(std::size_t d, std::size_t d_h, std::size_t d_f, std::size_t n_grid,
                            const AttentionFlags& flags, std::mt19937_64& rng);

/// Per-grid-point q, k, v (n_grid x d each) for one edge.
struct AttentionField {
  std::pair<std::size_t, std::size_t> edge{0, 0};
  Matrix q, k, v;
};

AttentionField build_qkv(std::span<const double> h_i, std::span<const double> h_j, const Matrix& field_feats,
                         const MaraParams& params);

/// out_m = sum_k softmax_k(q_m . k_k / sqrt(d_head); w) v_k, heads concatenated.
Matrix spherical_attention(const AttentionField& af, const SphericalGrid& grid, std::size_t heads = 1);

struct GateResult {
  std::vector<double> pooled;  // d
  double alpha = 0.0;
};

GateResult pool_and_gate(const Matrix& attn_out, const SphericalGrid& grid, const MaraParams& params);

struct EdgeGates {
  NeighborList neighbors;
  std::vector<double> alpha;                // per edge
  std::vector<std::vector<double>> pooled;  // per edge, d values
};

/// Full per-edge pipeline: grid field, feature lift, q/k/v, attention, pooling
/// and gate. `features` is n_atoms x d_h. Throws InvalidArgument for an empty
/// neighbor list and DegenerateGeometry for coincident atoms.
EdgeGates edge_gates(const AtomicConfiguration& config, const Matrix& features, const SphericalGrid& grid,
                     const MaraParams& params, const FieldMode& mode, double cutoff);

// ---- tape-level building blocks, batched over edges ------------------------
// Row r of an edge-expanded matrix is (edge r / K, grid point r % K).

namespace attn {

template <class T>
struct QKV {
  ad::Var<T> q, k, v;
};

template <class T>
struct GateVars {
  ad::Var<T> pooled;  // E x d
  ad::Var<T> alpha;   // E x 1
};

/// rel: E x 3 edge vectors x_j - x_i; r: E x 1 their lengths.
template <class T>
ad::Var<T> field_feature_rows(ad::Var<T> rel, ad::Var<T> r, const SphericalGrid& grid, const FieldMode& mode);

template <class T>
QKV<T> qkv_rows(ad::Var<T> h_recv, ad::Var<T> h_send, ad::Var<T> feats, const AttentionWeights<ad::Var<T>>& w,
                const AttentionFlags& flags, std::size_t n_grid);

template <class T>
ad::Var<T> attention_rows(const QKV<T>& qkv, const SphericalGrid& grid, std::size_t heads);

template <class T>
GateVars<T> pool_gate_rows(ad::Var<T> attn_out, const SphericalGrid& grid, const AttentionWeights<ad::Var<T>>& w,
                           GateActivation activation);

template <class T>
AttentionWeights<ad::Var<T>> bind_constant(ad::Tape<T>& tape, const AttentionWeights<Matrix>& w);

}  // namespace attn

}  // namespace mara
