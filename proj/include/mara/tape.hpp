#pragma once

// Reverse-mode differentiation over a small set of dense 2-D primitives.
//
// A Tape records nodes in creation order, so the record is always
// topologically sorted. Every primitive stores its own vector-Jacobian
// product. The scalar type T is double or Dual<double>; running the tape on
// dual numbers yields directional derivatives of gradients (used for
// force-matching losses) without a second reverse sweep.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "mara/dual.hpp"
#include "mara/errors.hpp"

namespace mara {

/// Dense row-major matrix.
template <class T>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0.0)) {}
  Mat(std::size_t r, std::size_t c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw InvalidArgument("matrix data does not match its shape");
  }

  T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  T* row(std::size_t i) { return data.data() + i * cols; }
  const T* row(std::size_t i) const { return data.data() + i * cols; }
  std::size_t size() const { return data.size(); }

  bool operator==(const Mat& o) const = default;
};

using Matrix = Mat<double>;

/// Converts a double matrix to another scalar type (zero tangents for duals).
template <class T>
Mat<T> lift(const Matrix& m) {
  if constexpr (std::is_same_v<T, double>) {
    return m;
  } else {
    Mat<T> out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = T(m.data[i]);
    return out;
  }
}

/// Value parts of a (possibly dual) matrix.
template <class T>
Matrix values_of(const Mat<T>& m) {
  if constexpr (std::is_same_v<T, double>) {
    return m;
  } else {
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = value_of(m.data[i]);
    return out;
  }
}

std::string shape_string(std::size_t rows, std::size_t cols);

}  // namespace mara

namespace mara::ad {

template <class T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  bool valid() const { return tape != nullptr; }
  const Mat<T>& value() const { return tape->value(*this); }
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

template <class T>
class Tape {
 public:
  /// Accumulates into parent_grads[i] (nullptr when parent i needs no gradient).
  using BackwardFn =
      std::function<void(const Tape& tape, std::size_t self, const Mat<T>& grad, std::span<Mat<T>*> parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf.
  Var<T> input(Mat<T> value) {
    nodes_.push_back({std::move(value), {}, nullptr, true, true});
    return {this, nodes_.size() - 1};
  }

  /// Leaf that never receives a gradient.
  Var<T> constant(Mat<T> value) {
    nodes_.push_back({std::move(value), {}, nullptr, false, false});
    return {this, nodes_.size() - 1};
  }

  Var<T> record(Mat<T> value, std::vector<Var<T>> parents, BackwardFn backward) {
    Node n{std::move(value), {}, std::move(backward), false, false};
    n.parents.reserve(parents.size());
    for (const Var<T>& p : parents) {
      check_owned(p);
      n.parents.push_back(p.id);
      n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
    }
    if (!n.requires_grad) n.backward = nullptr;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  const Mat<T>& value(Var<T> v) const {
    check_owned(v);
    return nodes_[v.id].value;
  }
  const Mat<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradients of the 1x1 node `out` with respect to the input leaves `wrt`.
  /// A leaf that does not feed `out` raises MissingDependency unless
  /// allow_unused is set, in which case its gradient is zero.
  std::vector<Mat<T>> grad(Var<T> out, std::span<const Var<T>> wrt, bool allow_unused = false) const {
    check_owned(out);
    const Mat<T>& ov = nodes_[out.id].value;
    if (ov.rows != 1 || ov.cols != 1)
      throw InvalidArgument("grad needs a scalar output, got " + shape_string(ov.rows, ov.cols));
    for (const Var<T>& w : wrt) {
      if (w.tape != this || w.id >= nodes_.size()) throw MissingDependency("gradient requested for a node on another tape");
      if (!nodes_[w.id].is_input) throw InvalidArgument("gradients are only taken with respect to tape inputs");
    }
    const std::size_t n = out.id + 1;
    std::vector<char> relevant(n, 0);
    for (const Var<T>& w : wrt)
      if (w.id < n) relevant[w.id] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (relevant[i] || !nodes_[i].requires_grad) continue;
      for (std::size_t p : nodes_[i].parents)
        if (relevant[p]) {
          relevant[i] = 1;
          break;
        }
    }

    std::vector<Mat<T>> adj(n);
    std::vector<char> reached(n, 0);
    if (relevant[out.id]) {
      adj[out.id] = Mat<T>(1, 1);
      adj[out.id].data[0] = T(1.0);
      reached[out.id] = 1;
    }
    std::vector<Mat<T>*> pg;
    for (std::size_t id = n; id-- > 0;) {
      if (!reached[id] || !nodes_[id].backward) continue;
      const Node& node = nodes_[id];
      pg.assign(node.parents.size(), nullptr);
      bool any = false;
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        const std::size_t p = node.parents[k];
        if (!relevant[p]) continue;
        if (!reached[p]) {
          adj[p] = Mat<T>(nodes_[p].value.rows, nodes_[p].value.cols);
          reached[p] = 1;
        }
        pg[k] = &adj[p];
        any = true;
      }
      if (any) node.backward(*this, id, adj[id], std::span<Mat<T>*>(pg));
    }

    std::vector<Mat<T>> out_grads;
    out_grads.reserve(wrt.size());
    for (const Var<T>& w : wrt) {
      if (w.id < n && reached[w.id]) {
        out_grads.push_back(adj[w.id]);
      } else if (allow_unused) {
        out_grads.emplace_back(nodes_[w.id].value.rows, nodes_[w.id].value.cols);
      } else {
        throw MissingDependency("node " + std::to_string(w.id) + " does not feed the output");
      }
    }
    return out_grads;
  }

 private:
  struct Node {
    Mat<T> value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_input = false;
  };

  void check_owned(Var<T> v) const {
    if (v.tape != this || v.id >= nodes_.size()) throw MissingDependency("variable does not belong to this tape");
  }

  std::vector<Node> nodes_;
};

// ---- primitives -------------------------------------------------------------
// Shapes are checked eagerly; mismatches raise InvalidArgument.

template <class T> Var<T> add(Var<T> a, Var<T> b);
template <class T> Var<T> sub(Var<T> a, Var<T> b);
/// Elementwise product.
template <class T> Var<T> mul(Var<T> a, Var<T> b);
/// scale * a + shift
template <class T> Var<T> affine(Var<T> a, double scale, double shift);
template <class T> Var<T> matmul(Var<T> a, Var<T> b);
/// a * b^T
template <class T> Var<T> matmul_nt(Var<T> a, Var<T> b);
/// out[r] = a[index[r]]
template <class T> Var<T> gather_rows(Var<T> a, std::vector<std::size_t> index);
/// out[index[r]] += a[r], summed in ascending r.
template <class T> Var<T> scatter_add_rows(Var<T> a, std::vector<std::size_t> index, std::size_t n_out);
/// Row-wise scaling: a (n x c) times s (n x 1).
template <class T> Var<T> mul_colvec(Var<T> a, Var<T> s);
/// Broadcast add of b (1 x c) to every row of a.
template <class T> Var<T> add_rowvec(Var<T> a, Var<T> b);
template <class T> Var<T> exp(Var<T> a);
template <class T> Var<T> sin(Var<T> a);
template <class T> Var<T> sqrt(Var<T> a);
template <class T> Var<T> square(Var<T> a);
template <class T> Var<T> reciprocal(Var<T> a);
template <class T> Var<T> sigmoid(Var<T> a);
/// x * sigmoid(x)
template <class T> Var<T> silu(Var<T> a);
/// Euclidean norm of every row (n x 1); the gradient at a zero row is zero.
template <class T> Var<T> row_norm(Var<T> a);
template <class T> Var<T> row_sum(Var<T> a);
/// Sum of all entries (1 x 1).
template <class T> Var<T> sum(Var<T> a);
template <class T> Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t end);
template <class T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
/// Row-major reinterpretation.
template <class T> Var<T> reshape(Var<T> a, std::size_t rows, std::size_t cols);
/// Rows come in consecutive groups of `group`; out_g = a_g * b_g^T (group x group).
template <class T> Var<T> group_matmul_nt(Var<T> a, Var<T> b, std::size_t group);
/// out_g = p_g (group x group) * v_g (group x d).
template <class T> Var<T> group_matmul(Var<T> p, Var<T> v, std::size_t group);
/// Row-wise softmax with positive weights: p_k = w_k e^{l_k} / sum_j w_j e^{l_j}.
/// Logits are shifted by their row maximum. Non-finite logits raise NumericalOverflow.
template <class T> Var<T> weighted_softmax(Var<T> logits, std::vector<double> weights);
/// Real spherical harmonics of each row of a (n x 3) unit-direction matrix.
template <class T> Var<T> sph_harm(Var<T> dirs, int l_max);
/// Smooth cutoff u(x) = 1 - (p+1)(p+2)/2 x^p + p(p+2) x^{p+1} - p(p+1)/2 x^{p+2}
/// for x < 1, zero otherwise.
template <class T> Var<T> poly_envelope(Var<T> x, int p);

}  // namespace mara::ad
