#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#include "mara/geometry.hpp"
#include "mara/kernels.hpp"
#include "mara/tape.hpp"

namespace mara {

std::string shape_string(std::size_t rows, std::size_t cols) {
  return "(" + std::to_string(rows) + " x " + std::to_string(cols) + ")";
}

}  // namespace mara

namespace mara::ad {
namespace {

using std::size_t;

template <class T>
using Grads = std::span<Mat<T>*>;

[[noreturn]] void shape_error(const char* op, size_t r1, size_t c1, size_t r2, size_t c2) {
  throw InvalidArgument(std::string(op) + ": incompatible shapes " + shape_string(r1, c1) + " and " +
                        shape_string(r2, c2));
}

template <class T>
void require_same(const char* op, const Mat<T>& a, const Mat<T>& b) {
  if (a.rows != b.rows || a.cols != b.cols) shape_error(op, a.rows, a.cols, b.rows, b.cols);
}

// Dense products; double goes through the dispatched SIMD kernels.
template <class T>
void gemm_nn(size_t n, size_t m, size_t p, const T* a, const T* b, T* c) {
  if constexpr (std::is_same_v<T, double>) {
    kernels::active().gemm_nn(n, m, p, a, b, c);
  } else {
    for (size_t i = 0; i < n; ++i)
      for (size_t l = 0; l < m; ++l) {
        const T ail = a[i * m + l];
        for (size_t j = 0; j < p; ++j) c[i * p + j] += ail * b[l * p + j];
      }
  }
}

template <class T>
void gemm_nt(size_t n, size_t m, size_t p, const T* a, const T* b, T* c) {
  if constexpr (std::is_same_v<T, double>) {
    kernels::active().gemm_nt(n, m, p, a, b, c);
  } else {
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < p; ++j) {
        T s(0.0);
        for (size_t l = 0; l < m; ++l) s += a[i * m + l] * b[j * m + l];
        c[i * p + j] += s;
      }
  }
}

template <class T>
void gemm_tn(size_t n, size_t m, size_t p, const T* a, const T* b, T* c) {
  if constexpr (std::is_same_v<T, double>) {
    kernels::active().gemm_tn(n, m, p, a, b, c);
  } else {
    for (size_t r = 0; r < n; ++r)
      for (size_t i = 0; i < m; ++i) {
        const T ari = a[r * m + i];
        for (size_t j = 0; j < p; ++j) c[i * p + j] += ari * b[r * p + j];
      }
  }
}

template <class T, class F, class D>
Var<T> unary(Var<T> a, F f, D dfdx) {
  const Mat<T>& av = a.value();
  Mat<T> out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.data[i] = f(av.data[i]);
  return a.tape->record(std::move(out), {a}, [aid = a.id, dfdx](const Tape<T>& t, size_t self, const Mat<T>& g, Grads<T> pg) {
    const Mat<T>& x = t.value(aid);
    const Mat<T>& y = t.value(self);
    for (size_t i = 0; i < g.size(); ++i) pg[0]->data[i] += g.data[i] * dfdx(x.data[i], y.data[i]);
  });
}

template <class T>
T stable_sigmoid(const T& x) {
  using std::exp;
  if (value_of(x) >= 0.0) return T(1.0) / (exp(-x) + 1.0);
  T e = exp(x);
  return e / (e + 1.0);
}

}  // namespace

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  const Mat<T>& av = a.value();
  const Mat<T>& bv = b.value();
  require_same("add", av, bv);
  Mat<T> out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
  return a.tape->record(std::move(out), {a, b}, [](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
    for (Mat<T>* p : pg)
      if (p)
        for (size_t i = 0; i < g.size(); ++i) p->data[i] += g.data[i];
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  const Mat<T>& av = a.value();
  const Mat<T>& bv = b.value();
  require_same("sub", av, bv);
  Mat<T> out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] - bv.data[i];
  return a.tape->record(std::move(out), {a, b}, [](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
    if (pg[0])
      for (size_t i = 0; i < g.size(); ++i) pg[0]->data[i] += g.data[i];
    if (pg[1])
      for (size_t i = 0; i < g.size(); ++i) pg[1]->data[i] -= g.data[i];
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  const Mat<T>& av = a.value();
  const Mat<T>& bv = b.value();
  require_same("mul", av, bv);
  Mat<T> out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
  return a.tape->record(std::move(out), {a, b},
                        [aid = a.id, bid = b.id](const Tape<T>& t, size_t, const Mat<T>& g, Grads<T> pg) {
                          const Mat<T>& x = t.value(aid);
                          const Mat<T>& y = t.value(bid);
                          if (pg[0])
                            for (size_t i = 0; i < g.size(); ++i) pg[0]->data[i] += g.data[i] * y.data[i];
                          if (pg[1])
                            for (size_t i = 0; i < g.size(); ++i) pg[1]->data[i] += g.data[i] * x.data[i];
                        });
}

template <class T>
Var<T> affine(Var<T> a, double scale, double shift) {
  const Mat<T>& av = a.value();
  Mat<T> out(av.rows, av.cols);
  for (size_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] * scale + shift;
  return a.tape->record(std::move(out), {a}, [scale](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
    for (size_t i = 0; i < g.size(); ++i) pg[0]->data[i] += g.data[i] * scale;
  });
}

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Mat<T>& av = a.value();
  const Mat<T>& bv = b.value();
  if (av.cols != bv.rows) shape_error("matmul", av.rows, av.cols, bv.rows, bv.cols);
  const size_t n = av.rows, m = av.cols, p = bv.cols;
  Mat<T> out(n, p);
  gemm_nn(n, m, p, av.data.data(), bv.data.data(), out.data.data());
  return a.tape->record(std::move(out), {a, b},
                        [aid = a.id, bid = b.id, n, m, p](const Tape<T>& t, size_t, const Mat<T>& g, Grads<T> pg) {
                          if (pg[0]) gemm_nt(n, p, m, g.data.data(), t.value(bid).data.data(), pg[0]->data.data());
                          if (pg[1]) gemm_tn(n, m, p, t.value(aid).data.data(), g.data.data(), pg[1]->data.data());
                        });
}

template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  const Mat<T>& av = a.value();
  const Mat<T>& bv = b.value();
  if (av.cols != bv.cols) shape_error("matmul_nt", av.rows, av.cols, bv.rows, bv.cols);
  const size_t n = av.rows, m = av.cols, p = bv.rows;
  Mat<T> out(n, p);
  gemm_nt(n, m, p, av.data.data(), bv.data.data(), out.data.data());
  return a.tape->record(std::move(out), {a, b},
                        [aid = a.id, bid = b.id, n, m, p](const Tape<T>& t, size_t, const Mat<T>& g, Grads<T> pg) {
                          // dA = G B, dB = G^T A
                          if (pg[0]) gemm_nn(n, p, m, g.data.data(), t.value(bid).data.data(), pg[0]->data.data());
                          if (pg[1]) gemm_tn(n, p, m, g.data.data(), t.value(aid).data.data(), pg[1]->data.data());
                        });
}

template <class T>
Var<T> gather_rows(Var<T> a, std::vector<size_t> index) {
  const Mat<T>& av = a.value();
  const size_t c = av.cols;
  Mat<T> out(index.size(), c);
  for (size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= av.rows) throw InvalidArgument("gather_rows: index out of range");
    std::copy_n(av.row(index[r]), c, out.row(r));
  }
  return a.tape->record(std::move(out), {a},
                        [idx = std::move(index), c](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
                          for (size_t r = 0; r < idx.size(); ++r) {
                            T* dst = pg[0]->row(idx[r]);
                            const T* src = g.row(r);
                            for (size_t j = 0; j < c; ++j) dst[j] += src[j];
                          }
                        });
}

template <class T>
Var<T> scatter_add_rows(Var<T> a, std::vector<size_t> index, size_t n_out) {
  const Mat<T>& av = a.value();
  if (index.size() != av.rows) throw InvalidArgument("scatter_add_rows: index length must equal row count");
  const size_t c = av.cols;
  Mat<T> out(n_out, c);
  for (size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= n_out) throw InvalidArgument("scatter_add_rows: index out of range");
    T* dst = out.row(index[r]);
    const T* src = av.row(r);
    for (size_t j = 0; j < c; ++j) dst[j] += src[j];
  }
  return a.tape->record(std::move(out), {a},
                        [idx = std::move(index), c](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
                          for (size_t r = 0; r < idx.size(); ++r) {
                            T* dst = pg[0]->row(r);
                            const T* src = g.row(idx[r]);
                            for (size_t j = 0; j < c; ++j) dst[j] += src[j];
                          }
                        });
}

template <class T>
Var<T> mul_colvec(Var<T> a, Var<T> s) {
  const Mat<T>& av = a.value();
  const Mat<T>& sv = s.value();
  if (sv.rows != av.rows || sv.cols != 1) shape_error("mul_colvec", av.rows, av.cols, sv.rows, sv.cols);
  const size_t c = av.cols;
  Mat<T> out(av.rows, c);
  for (size_t r = 0; r < av.rows; ++r)
    for (size_t j = 0; j < c; ++j) out(r, j) = av(r, j) * sv.data[r];
  return a.tape->record(std::move(out), {a, s},
                        [aid = a.id, sid = s.id, c](const Tape<T>& t, size_t, const Mat<T>& g, Grads<T> pg) {
                          const Mat<T>& x = t.value(aid);
                          const Mat<T>& sc = t.value(sid);
                          for (size_t r = 0; r < x.rows; ++r) {
                            if (pg[0])
                              for (size_t j = 0; j < c; ++j) (*pg[0])(r, j) += g(r, j) * sc.data[r];
                            if (pg[1]) {
                              T acc(0.0);
                              for (size_t j = 0; j < c; ++j) acc += g(r, j) * x(r, j);
                              pg[1]->data[r] += acc;
                            }
                          }
                        });
}

template <class T>
Var<T> add_rowvec(Var<T> a, Var<T> b) {
  const Mat<T>& av = a.value();
  const Mat<T>& bv = b.value();
  if (bv.rows != 1 || bv.cols != av.cols) shape_error("add_rowvec", av.rows, av.cols, bv.rows, bv.cols);
  Mat<T> out(av.rows, av.cols);
  for (size_t r = 0; r < av.rows; ++r)
    for (size_t j = 0; j < av.cols; ++j) out(r, j) = av(r, j) + bv.data[j];
  return a.tape->record(std::move(out), {a, b}, [](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
    if (pg[0])
      for (size_t i = 0; i < g.size(); ++i) pg[0]->data[i] += g.data[i];
    if (pg[1])
      for (size_t r = 0; r < g.rows; ++r)
        for (size_t j = 0; j < g.cols; ++j) pg[1]->data[j] += g(r, j);
  });
}

template <class T>
Var<T> exp(Var<T> a) {
  using std::exp;
  return unary(a, [](const T& x) { return exp(x); }, [](const T&, const T& y) { return y; });
}

template <class T>
Var<T> sin(Var<T> a) {
  using std::cos;
  using std::sin;
  return unary(a, [](const T& x) { return sin(x); }, [](const T& x, const T&) { return cos(x); });
}

template <class T>
Var<T> sqrt(Var<T> a) {
  using std::sqrt;
  return unary(a, [](const T& x) { return sqrt(x); }, [](const T&, const T& y) { return T(0.5) / y; });
}

template <class T>
Var<T> square(Var<T> a) {
  return unary(a, [](const T& x) { return x * x; }, [](const T& x, const T&) { return x * 2.0; });
}

template <class T>
Var<T> reciprocal(Var<T> a) {
  return unary(a, [](const T& x) { return T(1.0) / x; }, [](const T&, const T& y) { return -(y * y); });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  return unary(a, [](const T& x) { return stable_sigmoid(x); },
               [](const T&, const T& y) { return y * (T(1.0) - y); });
}

template <class T>
Var<T> silu(Var<T> a) {
  return unary(a, [](const T& x) { return x * stable_sigmoid(x); },
               [](const T& x, const T&) {
                 T s = stable_sigmoid(x);
                 return s + x * s * (T(1.0) - s);
               });
}

template <class T>
Var<T> row_norm(Var<T> a) {
  using std::sqrt;
  const Mat<T>& av = a.value();
  Mat<T> out(av.rows, 1);
  for (size_t r = 0; r < av.rows; ++r) {
    T s(0.0);
    for (size_t j = 0; j < av.cols; ++j) s += av(r, j) * av(r, j);
    out.data[r] = value_of(s) > 0.0 ? sqrt(s) : T(0.0);
  }
  return a.tape->record(std::move(out), {a}, [aid = a.id](const Tape<T>& t, size_t self, const Mat<T>& g, Grads<T> pg) {
    const Mat<T>& x = t.value(aid);
    const Mat<T>& y = t.value(self);
    for (size_t r = 0; r < x.rows; ++r) {
      if (!(value_of(y.data[r]) > 0.0)) continue;  // subgradient zero at the origin
      const T scale = g.data[r] / y.data[r];
      for (size_t j = 0; j < x.cols; ++j) (*pg[0])(r, j) += scale * x(r, j);
    }
  });
}

template <class T>
Var<T> row_sum(Var<T> a) {
  const Mat<T>& av = a.value();
  Mat<T> out(av.rows, 1);
  for (size_t r = 0; r < av.rows; ++r)
    for (size_t j = 0; j < av.cols; ++j) out.data[r] += av(r, j);
  return a.tape->record(std::move(out), {a}, [](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
    Mat<T>& d = *pg[0];
    for (size_t r = 0; r < d.rows; ++r)
      for (size_t j = 0; j < d.cols; ++j) d(r, j) += g.data[r];
  });
}

template <class T>
Var<T> sum(Var<T> a) {
  const Mat<T>& av = a.value();
  Mat<T> out(1, 1);
  for (const T& x : av.data) out.data[0] += x;
  return a.tape->record(std::move(out), {a}, [](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
    for (T& x : pg[0]->data) x += g.data[0];
  });
}

template <class T>
Var<T> slice_cols(Var<T> a, size_t begin, size_t end) {
  const Mat<T>& av = a.value();
  if (begin > end || end > av.cols) throw InvalidArgument("slice_cols: range outside " + shape_string(av.rows, av.cols));
  const size_t w = end - begin;
  Mat<T> out(av.rows, w);
  for (size_t r = 0; r < av.rows; ++r) std::copy_n(av.row(r) + begin, w, out.row(r));
  return a.tape->record(std::move(out), {a}, [begin, w](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
    for (size_t r = 0; r < g.rows; ++r)
      for (size_t j = 0; j < w; ++j) (*pg[0])(r, begin + j) += g(r, j);
  });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  const size_t rows = parts[0].rows();
  size_t cols = 0;
  std::vector<size_t> offsets;
  for (const Var<T>& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", rows, cols, p.rows(), p.cols());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Mat<T> out(rows, cols);
  for (size_t k = 0; k < parts.size(); ++k) {
    const Mat<T>& pv = parts[k].value();
    for (size_t r = 0; r < rows; ++r) std::copy_n(pv.row(r), pv.cols, out.row(r) + offsets[k]);
  }
  return parts[0].tape->record(std::move(out), parts,
                               [offsets](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
                                 for (size_t k = 0; k < pg.size(); ++k) {
                                   if (!pg[k]) continue;
                                   Mat<T>& d = *pg[k];
                                   for (size_t r = 0; r < d.rows; ++r)
                                     for (size_t j = 0; j < d.cols; ++j) d(r, j) += g(r, offsets[k] + j);
                                 }
                               });
}

template <class T>
Var<T> reshape(Var<T> a, size_t rows, size_t cols) {
  const Mat<T>& av = a.value();
  if (rows * cols != av.size()) shape_error("reshape", av.rows, av.cols, rows, cols);
  Mat<T> out(rows, cols, av.data);
  return a.tape->record(std::move(out), {a}, [](const Tape<T>&, size_t, const Mat<T>& g, Grads<T> pg) {
    for (size_t i = 0; i < g.size(); ++i) pg[0]->data[i] += g.data[i];
  });
}

template <class T>
Var<T> group_matmul_nt(Var<T> a, Var<T> b, size_t group) {
  const Mat<T>& av = a.value();
  const Mat<T>& bv = b.value();
  if (group == 0 || av.rows % group != 0 || av.rows != bv.rows || av.cols != bv.cols)
    shape_error("group_matmul_nt", av.rows, av.cols, bv.rows, bv.cols);
  const size_t ng = av.rows / group, d = av.cols;
  Mat<T> out(av.rows, group);
  for (size_t gi = 0; gi < ng; ++gi)
    gemm_nt(group, d, group, av.row(gi * group), bv.row(gi * group), out.row(gi * group));
  return a.tape->record(std::move(out), {a, b},
                        [aid = a.id, bid = b.id, group, ng, d](const Tape<T>& t, size_t, const Mat<T>& g, Grads<T> pg) {
                          const Mat<T>& x = t.value(aid);
                          const Mat<T>& y = t.value(bid);
                          for (size_t gi = 0; gi < ng; ++gi) {
                            const size_t o = gi * group;
                            if (pg[0]) gemm_nn(group, group, d, g.row(o), y.row(o), pg[0]->row(o));
                            if (pg[1]) gemm_tn(group, group, d, g.row(o), x.row(o), pg[1]->row(o));
                          }
                        });
}

template <class T>
Var<T> group_matmul(Var<T> p, Var<T> v, size_t group) {
  const Mat<T>& pv = p.value();
  const Mat<T>& vv = v.value();
  if (group == 0 || pv.cols != group || pv.rows % group != 0 || pv.rows != vv.rows)
    shape_error("group_matmul", pv.rows, pv.cols, vv.rows, vv.cols);
  const size_t ng = pv.rows / group, d = vv.cols;
  Mat<T> out(pv.rows, d);
  for (size_t gi = 0; gi < ng; ++gi)
    gemm_nn(group, group, d, pv.row(gi * group), vv.row(gi * group), out.row(gi * group));
  return p.tape->record(std::move(out), {p, v},
                        [pid = p.id, vid = v.id, group, ng, d](const Tape<T>& t, size_t, const Mat<T>& g, Grads<T> pg) {
                          const Mat<T>& x = t.value(pid);
                          const Mat<T>& y = t.value(vid);
                          for (size_t gi = 0; gi < ng; ++gi) {
                            const size_t o = gi * group;
                            if (pg[0]) gemm_nt(group, d, group, g.row(o), y.row(o), pg[0]->row(o));
                            if (pg[1]) gemm_tn(group, group, d, x.row(o), g.row(o), pg[1]->row(o));
                          }
                        });
}

template <class T>
Var<T> weighted_softmax(Var<T> logits, std::vector<double> weights) {
  using std::exp;
  const Mat<T>& lv = logits.value();
  const size_t k = lv.cols;
  if (weights.size() != k) shape_error("weighted_softmax", lv.rows, lv.cols, 1, weights.size());
  Mat<T> out(lv.rows, k);
  for (size_t r = 0; r < lv.rows; ++r) {
    const T* l = lv.row(r);
    double shift = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < k; ++j) {
      const double x = value_of(l[j]);
      if (!std::isfinite(x)) throw NumericalOverflow("attention logit is not finite");
      shift = std::max(shift, x);
    }
    T* o = out.row(r);
    T z(0.0);
    for (size_t j = 0; j < k; ++j) {
      o[j] = exp(l[j] - shift) * weights[j];
      z += o[j];
    }
    for (size_t j = 0; j < k; ++j) o[j] = o[j] / z;
  }
  return logits.tape->record(std::move(out), {logits}, [k](const Tape<T>& t, size_t self, const Mat<T>& g, Grads<T> pg) {
    const Mat<T>& p = t.value(self);
    for (size_t r = 0; r < p.rows; ++r) {
      const T* pr = p.row(r);
      const T* gr = g.row(r);
      T s(0.0);
      for (size_t j = 0; j < k; ++j) s += pr[j] * gr[j];
      T* d = pg[0]->row(r);
      for (size_t j = 0; j < k; ++j) d[j] += pr[j] * (gr[j] - s);
    }
  });
}

template <class T>
Var<T> sph_harm(Var<T> dirs, int l_max) {
  const Mat<T>& dv = dirs.value();
  if (dv.cols != 3) shape_error("sph_harm", dv.rows, dv.cols, dv.rows, 3);
  if (l_max < 0) throw InvalidArgument("sph_harm: negative l_max");
  const size_t nc = sph_harm_count(l_max);
  Mat<T> out(dv.rows, nc);
  for (size_t r = 0; r < dv.rows; ++r) detail::sph_harm_poly(l_max, dv(r, 0), dv(r, 1), dv(r, 2), out.row(r));
  return dirs.tape->record(std::move(out), {dirs},
                           [did = dirs.id, l_max, nc](const Tape<T>& t, size_t, const Mat<T>& g, Grads<T> pg) {
                             using D = Dual<T>;
                             const Mat<T>& x = t.value(did);
                             std::vector<D> y(nc);
                             for (size_t r = 0; r < x.rows; ++r) {
                               for (size_t c = 0; c < 3; ++c) {
                                 D xs[3];
                                 for (size_t q = 0; q < 3; ++q) xs[q] = D(x(r, q), T(q == c ? 1.0 : 0.0));
                                 detail::sph_harm_poly(l_max, xs[0], xs[1], xs[2], y.data());
                                 T acc(0.0);
                                 for (size_t q = 0; q < nc; ++q) acc += g(r, q) * y[q].d;
                                 (*pg[0])(r, c) += acc;
                               }
                             }
                           });
}

template <class T>
Var<T> poly_envelope(Var<T> x, int p) {
  if (p < 1) throw InvalidArgument("poly_envelope: exponent must be >= 1");
  const double pd = p;
  const double c0 = (pd + 1.0) * (pd + 2.0) / 2.0, c1 = pd * (pd + 2.0), c2 = pd * (pd + 1.0) / 2.0;
  auto ipow = [](const T& b, int e) {
    T r(1.0);
    for (int i = 0; i < e; ++i) r = r * b;
    return r;
  };
  auto f = [=](const T& v) {
    if (!(value_of(v) < 1.0)) return T(0.0);
    const T xp = ipow(v, p);
    return T(1.0) - xp * c0 + xp * v * c1 - xp * v * v * c2;
  };
  auto df = [=](const T& v, const T&) {
    if (!(value_of(v) < 1.0)) return T(0.0);
    const T om = T(1.0) - v;
    return ipow(v, p - 1) * om * om * (-pd * c0);
  };
  return unary(x, f, df);
}

#define MARA_INSTANTIATE_OPS(T)                                                         \
  template Var<T> add(Var<T>, Var<T>);                                                  \
  template Var<T> sub(Var<T>, Var<T>);                                                  \
  template Var<T> mul(Var<T>, Var<T>);                                                  \
  template Var<T> affine(Var<T>, double, double);                                       \
  template Var<T> matmul(Var<T>, Var<T>);                                               \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                            \
  template Var<T> gather_rows(Var<T>, std::vector<size_t>);                             \
  template Var<T> scatter_add_rows(Var<T>, std::vector<size_t>, size_t);                \
  template Var<T> mul_colvec(Var<T>, Var<T>);                                           \
  template Var<T> add_rowvec(Var<T>, Var<T>);                                           \
  template Var<T> exp(Var<T>);                                                          \
  template Var<T> sin(Var<T>);                                                          \
  template Var<T> sqrt(Var<T>);                                                         \
  template Var<T> square(Var<T>);                                                       \
  template Var<T> reciprocal(Var<T>);                                                   \
  template Var<T> sigmoid(Var<T>);                                                      \
  template Var<T> silu(Var<T>);                                                         \
  template Var<T> row_norm(Var<T>);                                                     \
  template Var<T> row_sum(Var<T>);                                                      \
  template Var<T> sum(Var<T>);                                                          \
  template Var<T> slice_cols(Var<T>, size_t, size_t);                                   \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                              \
  template Var<T> reshape(Var<T>, size_t, size_t);                                      \
  template Var<T> group_matmul_nt(Var<T>, Var<T>, size_t);                              \
  template Var<T> group_matmul(Var<T>, Var<T>, size_t);                                 \
  template Var<T> weighted_softmax(Var<T>, std::vector<double>);                        \
  template Var<T> sph_harm(Var<T>, int);                                                \
  template Var<T> poly_envelope(Var<T>, int);

MARA_INSTANTIATE_OPS(double)
MARA_INSTANTIATE_OPS(Dual<double>)

#undef MARA_INSTANTIATE_OPS

}  // namespace mara::ad
