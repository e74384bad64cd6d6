#include "mara/attention.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mara/errors.hpp"

namespace mara {

using ad::Tape;
using ad::Var;

std::string_view to_string(GateActivation a) {
  return a == GateActivation::logistic ? "logistic" : "sinusoidal";
}

GateActivation parse_gate_activation(std::string_view s) {
  if (s == "logistic") return GateActivation::logistic;
  if (s == "sinusoidal") return GateActivation::sinusoidal;
  throw InvalidArgument("unknown gate activation '" + std::string(s) + "'");
}

namespace {

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows != rows || m.cols != cols)
    throw InvalidArgument(std::string(name) + " has shape " + shape_string(m.rows, m.cols) + ", expected " +
                          shape_string(rows, cols));
}

void require_finite(const Matrix& m, const char* name) {
  for (double x : m.data)
    if (!std::isfinite(x)) throw InvalidArgument(std::string(name) + " contains a non-finite entry");
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (double& x : m.data) x = u(rng);
  return m;
}

}  // namespace

void MaraParams::validate(std::size_t n_grid) const {
  const auto& w = weights;
  const std::size_t d = dim(), dh = node_dim(), df = field_dim();
  if (d == 0) throw InvalidArgument("attention width must be positive");
  require_shape(w.w_h_q, d, dh, "W_h");
  require_shape(w.w_h_k, d, dh, "W'_h");
  require_shape(w.w_h_v, d, dh, "W''_h");
  require_shape(w.w_f_q, d, df, "W_f");
  require_shape(w.w_f_k, d, df, "W'_f");
  require_shape(w.w_f_v, d, df, "W''_f");
  require_shape(w.pos, n_grid, d, "positional embeddings");
  require_shape(w.gate_w, 1, d, "gate weights");
  require_shape(w.gate_b, 1, 1, "gate bias");
  for (const Matrix* m : {&w.w_h_q, &w.w_h_k, &w.w_h_v, &w.w_f_q, &w.w_f_k, &w.w_f_v, &w.pos, &w.gate_w, &w.gate_b})
    require_finite(*m, "attention parameters");
  if (flags.heads == 0 || d % flags.heads != 0)
    throw InvalidArgument("attention heads (" + std::to_string(flags.heads) + ") must divide the width " +
                          std::to_string(d));
}

MaraParams init_mara_params(std::size_t d, std::size_t d_h, std::size_t d_f, std::size_t n_grid,
                            const AttentionFlags& flags, std::mt19937_64& rng) {
  MaraParams p;
  p.flags = flags;
  auto& w = p.weights;
  const double bh = 1.0 / std::sqrt(static_cast<double>(d_h));
  const double bf = 1.0 / std::sqrt(static_cast<double>(d_f));
  w.w_h_q = uniform_matrix(d, d_h, bh, rng);
  w.w_h_k = uniform_matrix(d, d_h, bh, rng);
  w.w_h_v = uniform_matrix(d, d_h, bh, rng);
  w.w_f_q = uniform_matrix(d, d_f, bf, rng);
  w.w_f_k = uniform_matrix(d, d_f, bf, rng);
  w.w_f_v = uniform_matrix(d, d_f, bf, rng);
  w.pos = Matrix(n_grid, d);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (double& x : w.pos.data) x = normal(rng);
  w.gate_w = Matrix(1, d);
  w.gate_b = Matrix(1, 1);
  return p;
}

namespace attn {

namespace {

std::vector<std::size_t> edge_of_row(std::size_t n_edges, std::size_t k) {
  std::vector<std::size_t> idx(n_edges * k);
  for (std::size_t r = 0; r < idx.size(); ++r) idx[r] = r / k;
  return idx;
}

std::vector<std::size_t> point_of_row(std::size_t n_edges, std::size_t k) {
  std::vector<std::size_t> idx(n_edges * k);
  for (std::size_t r = 0; r < idx.size(); ++r) idx[r] = r % k;
  return idx;
}

}  // namespace

template <class T>
Var<T> field_feature_rows(Var<T> rel, Var<T> r, const SphericalGrid& grid, const FieldMode& mode) {
  Tape<T>& tape = *rel.tape;
  const std::size_t n_edges = rel.rows(), k = grid.size();
  Matrix tiled(n_edges * k, 3);
  for (std::size_t row = 0; row < n_edges * k; ++row)
    for (int c = 0; c < 3; ++c) tiled(row, c) = grid.points[row % k][c];
  const auto rows = edge_of_row(n_edges, k);
  Var<T> rel_rep = ad::gather_rows(rel, rows);
  Var<T> r_rep = ad::gather_rows(r, rows);
  Var<T> points = tape.constant(lift<T>(tiled));
  Var<T> delta = ad::row_norm(ad::sub(rel_rep, ad::mul_colvec(points, r_rep)));
  Var<T> t = ad::affine(ad::mul_colvec(delta, ad::reciprocal(r_rep)), 0.5, 0.0);
  if (mode.kind == FieldMode::Kind::scalar) return t;

  const std::size_t n = mode.n;
  const double width = n > 1 ? 1.0 / static_cast<double>(n - 1) : 1.0;
  Matrix ones(1, n), centres(1, n);
  for (std::size_t m = 0; m < n; ++m) {
    ones.data[m] = 1.0;
    centres.data[m] = -(n > 1 ? static_cast<double>(m) * width : 0.5);
  }
  Var<T> spread = ad::matmul(t, tape.constant(lift<T>(ones)));
  Var<T> z = ad::affine(ad::add_rowvec(spread, tape.constant(lift<T>(centres))), 1.0 / width, 0.0);
  return ad::exp(ad::affine(ad::square(z), -0.5, 0.0));
}

template <class T>
QKV<T> qkv_rows(Var<T> h_recv, Var<T> h_send, Var<T> feats, const AttentionWeights<Var<T>>& w,
                const AttentionFlags& flags, std::size_t n_grid) {
  const std::size_t n_edges = h_recv.rows();
  if (h_send.rows() != n_edges || feats.rows() != n_edges * n_grid)
    throw InvalidArgument("qkv: node features and field features disagree on the edge count");
  const auto rows = edge_of_row(n_edges, n_grid);
  auto project = [&](Var<T> h, Var<T> wh, Var<T> wf) {
    Var<T> node = ad::gather_rows(ad::matmul_nt(h, wh), rows);
    Var<T> out = ad::add(node, ad::matmul_nt(feats, wf));
    return out;
  };
  QKV<T> o{project(h_recv, w.w_h_q, w.w_f_q), project(h_send, w.w_h_k, w.w_f_k), project(h_send, w.w_h_v, w.w_f_v)};
  if (flags.positional_encoding) {
    Var<T> pos = ad::gather_rows(w.pos, point_of_row(n_edges, n_grid));
    o.q = ad::add(o.q, pos);
    o.k = ad::add(o.k, pos);
    o.v = ad::add(o.v, pos);
  }
  return o;
}

template <class T>
Var<T> attention_rows(const QKV<T>& qkv, const SphericalGrid& grid, std::size_t heads) {
  const std::size_t d = qkv.q.cols(), k = grid.size();
  if (d == 0) throw InvalidArgument("attention width must be positive");
  if (heads == 0 || d % heads != 0) throw InvalidArgument("attention heads must divide the width");
  if (qkv.q.rows() % k != 0 || qkv.k.rows() != qkv.q.rows() || qkv.v.rows() != qkv.q.rows())
    throw InvalidArgument("attention fields do not match the grid size");
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var<T>> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var<T> q = heads == 1 ? qkv.q : ad::slice_cols(qkv.q, h * dh, (h + 1) * dh);
    Var<T> kk = heads == 1 ? qkv.k : ad::slice_cols(qkv.k, h * dh, (h + 1) * dh);
    Var<T> v = heads == 1 ? qkv.v : ad::slice_cols(qkv.v, h * dh, (h + 1) * dh);
    Var<T> logits = ad::affine(ad::group_matmul_nt(q, kk, k), scale, 0.0);
    Var<T> p = ad::weighted_softmax(logits, grid.weights);
    outs.push_back(ad::group_matmul(p, v, k));
  }
  return heads == 1 ? outs[0] : ad::concat_cols(outs);
}

template <class T>
GateVars<T> pool_gate_rows(Var<T> attn_out, const SphericalGrid& grid, const AttentionWeights<Var<T>>& w,
                           GateActivation activation) {
  Tape<T>& tape = *attn_out.tape;
  const std::size_t k = grid.size();
  if (attn_out.rows() % k != 0) throw InvalidArgument("pooling: row count is not a multiple of the grid size");
  const std::size_t n_edges = attn_out.rows() / k;
  Matrix wcol(n_edges * k, 1);
  for (std::size_t r = 0; r < wcol.rows; ++r) wcol.data[r] = grid.weights[r % k];
  Var<T> weighted = ad::mul_colvec(attn_out, tape.constant(lift<T>(wcol)));
  Var<T> pooled = ad::affine(ad::scatter_add_rows(weighted, edge_of_row(n_edges, k), n_edges),
                             1.0 / (4.0 * std::numbers::pi), 0.0);
  Var<T> z = ad::add_rowvec(ad::matmul_nt(pooled, w.gate_w), w.gate_b);
  Var<T> alpha = activation == GateActivation::logistic ? ad::sigmoid(z) : ad::affine(ad::sin(z), 0.5, 0.5);
  return {pooled, alpha};
}

template <class T>
AttentionWeights<Var<T>> bind_constant(Tape<T>& tape, const AttentionWeights<Matrix>& w) {
  auto c = [&](const Matrix& m) { return tape.constant(lift<T>(m)); };
  return {c(w.w_h_q), c(w.w_h_k), c(w.w_h_v), c(w.w_f_q), c(w.w_f_k),
          c(w.w_f_v), c(w.pos),   c(w.gate_w), c(w.gate_b)};
}

#define MARA_INSTANTIATE_ATTN(T)                                                                              \
  template Var<T> field_feature_rows(Var<T>, Var<T>, const SphericalGrid&, const FieldMode&);                 \
  template QKV<T> qkv_rows(Var<T>, Var<T>, Var<T>, const AttentionWeights<Var<T>>&, const AttentionFlags&,    \
                           std::size_t);                                                                      \
  template Var<T> attention_rows(const QKV<T>&, const SphericalGrid&, std::size_t);                           \
  template GateVars<T> pool_gate_rows(Var<T>, const SphericalGrid&, const AttentionWeights<Var<T>>&,          \
                                      GateActivation);                                                        \
  template AttentionWeights<Var<T>> bind_constant(Tape<T>&, const AttentionWeights<Matrix>&);

MARA_INSTANTIATE_ATTN(double)
MARA_INSTANTIATE_ATTN(Dual<double>)

#undef MARA_INSTANTIATE_ATTN

}  // namespace attn

// ---- single-edge convenience wrappers ------------------------------------

AttentionField build_qkv(std::span<const double> h_i, std::span<const double> h_j, const Matrix& field_feats,
                         const MaraParams& params) {
  const std::size_t dh = params.node_dim();
  if (h_i.size() != dh || h_j.size() != dh)
    throw InvalidArgument("node features must have length " + std::to_string(dh));
  if (field_feats.cols != params.field_dim())
    throw InvalidArgument("field features must have " + std::to_string(params.field_dim()) + " columns");
  if (params.flags.positional_encoding && params.weights.pos.rows != field_feats.rows)
    throw InvalidArgument("positional table does not match the number of grid points");
  Tape<double> tape;
  auto w = attn::bind_constant(tape, params.weights);
  Var<double> hi = tape.constant(Matrix(1, dh, {h_i.begin(), h_i.end()}));
  Var<double> hj = tape.constant(Matrix(1, dh, {h_j.begin(), h_j.end()}));
  auto qkv = attn::qkv_rows(hi, hj, tape.constant(field_feats), w, params.flags, field_feats.rows);
  return {{0, 0}, qkv.q.value(), qkv.k.value(), qkv.v.value()};
}

Matrix spherical_attention(const AttentionField& af, const SphericalGrid& grid, std::size_t heads) {
  const std::size_t k = grid.size();
  if (af.q.rows != k || af.k.rows != k || af.v.rows != k)
    throw InvalidArgument("attention field rows must equal the grid size");
  if (af.q.cols != af.k.cols || af.q.cols != af.v.cols) throw InvalidArgument("q, k, v widths differ");
  Tape<double> tape;
  attn::QKV<double> qkv{tape.constant(af.q), tape.constant(af.k), tape.constant(af.v)};
  return attn::attention_rows(qkv, grid, heads).value();
}

GateResult pool_and_gate(const Matrix& attn_out, const SphericalGrid& grid, const MaraParams& params) {
  if (attn_out.rows != grid.size()) throw InvalidArgument("attention output rows must equal the grid size");
  if (attn_out.cols != params.dim()) throw InvalidArgument("attention output width does not match the gate");
  Tape<double> tape;
  auto w = attn::bind_constant(tape, params.weights);
  auto g = attn::pool_gate_rows(tape.constant(attn_out), grid, w, params.flags.gate);
  return {g.pooled.value().data, g.alpha.value().data[0]};
}

EdgeGates edge_gates(const AtomicConfiguration& config, const Matrix& features, const SphericalGrid& grid,
                     const MaraParams& params, const FieldMode& mode, double cutoff) {
  config.validate();
  params.validate(grid.size());
  if (features.rows != config.size() || features.cols != params.node_dim())
    throw InvalidArgument("node feature table must be n_atoms x " + std::to_string(params.node_dim()));
  if (mode.dim() != params.field_dim()) throw InvalidArgument("field mode does not match W_f width");
  EdgeGates out;
  out.neighbors = neighbor_list(config.positions, cutoff);
  const auto& edges = out.neighbors.edges;
  if (edges.empty()) throw InvalidArgument("edge_gates needs at least one edge within the cutoff");

  const std::size_t ne = edges.size();
  Matrix rel(ne, 3), r(ne, 1);
  std::vector<std::size_t> recv(ne), send(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    recv[e] = edges[e].first;
    send[e] = edges[e].second;
    const Vec3 d = config.positions[send[e]] - config.positions[recv[e]];
    const double len = norm(d);
    if (!(len > kMinEdgeLength)) throw DegenerateGeometry("atoms " + std::to_string(recv[e]) + " and " +
                                                          std::to_string(send[e]) + " coincide");
    for (int c = 0; c < 3; ++c) rel(e, c) = d[c];
    r.data[e] = len;
  }
  Tape<double> tape;
  auto w = attn::bind_constant(tape, params.weights);
  Var<double> h = tape.constant(features);
  Var<double> feats = attn::field_feature_rows(tape.constant(rel), tape.constant(r), grid, mode);
  auto qkv = attn::qkv_rows(ad::gather_rows(h, recv), ad::gather_rows(h, send), feats, w, params.flags, grid.size());
  auto gate = attn::pool_gate_rows(attn::attention_rows(qkv, grid, params.flags.heads), grid, w, params.flags.gate);
  out.alpha = gate.alpha.value().data;
  const Matrix& pooled = gate.pooled.value();
  out.pooled.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) out.pooled[e].assign(pooled.row(e), pooled.row(e) + pooled.cols);
  return out;
}

}  // namespace mara
