#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mara/errors.hpp"
#include "mara/model.hpp"

using namespace mara;
using ad::Tape;
using ad::Var;

namespace {

ModelConfig small_config(bool gating) {
  ModelConfig c;
  c.species = {1, 6, 8};
  c.channels = 8;
  c.attn_dim = 8;
  c.n_bessel = 6;
  c.gating = gating;
  return c;
}

AtomicConfiguration random_molecule(std::mt19937_64& rng, std::size_t n) {
  std::vector<int> z;
  const int elements[] = {1, 6, 8};
  for (std::size_t i = 0; i < n; ++i) z.push_back(elements[i % 3]);
  return testing::molecule(z, testing::spaced_cloud(rng, n, 1.3, 0.8));
}

/// Per-edge J-order messages of layer 0 for `config`.
std::vector<Matrix> layer0_messages(const AtomicConfiguration& mol, const ModelState& st, double alpha) {
  const Batch b = make_batch({&mol}, st.config);
  Tape<double> t;
  auto p = bind_params<double>(t, st.params, nullptr);
  auto x = t.constant(b.positions);
  auto geo = model::edge_geometry(b, x, st.config);
  Matrix a(b.recv.size(), 1);
  for (double& v : a.data) v = alpha;
  auto s = ad::gather_rows(p.embedding, b.species);
  auto msgs = model::messages(geo, ad::gather_rows(s, b.send), t.constant(a), p.layers[0], st.config.l_max);
  std::vector<Matrix> out;
  for (auto& m : msgs) out.push_back(m.value());
  return out;
}

}  // namespace

TEST_CASE("radial basis") {
  const double rc = 5.0;
  for (double v : radial_basis(rc, rc, 8, 6)) CHECK(v == 0.0);
  for (double v : radial_basis(7.0, rc, 8, 6)) CHECK(v == 0.0);
  const auto tiny = radial_basis(1e-6, rc, 3, 6);
  for (double v : tiny) CHECK(std::isfinite(v));
  CHECK(tiny[0] == doctest::Approx(std::sqrt(2 / rc) * std::numbers::pi / rc).epsilon(1e-9));
  const auto half = radial_basis(rc / 2, rc, 2, 0);
  CHECK(std::abs(half[0] - std::sqrt(2 / rc) * std::sin(std::numbers::pi / 2) / (rc / 2)) < 1e-14);
  CHECK(std::abs(half[1] - std::sqrt(2 / rc) * std::sin(std::numbers::pi) / (rc / 2)) < 1e-14);
  CHECK_THROWS_AS(radial_basis(0.0, rc, 3, 6), InvalidArgument);
  CHECK_THROWS_AS(radial_basis(-1.0, rc, 3, 6), InvalidArgument);

  // The tape basis agrees with the scalar one.
  ModelConfig c = small_config(false);
  auto mol = testing::molecule({1, 8}, {{0, 0, 0}, {0.3, 1.1, -0.6}});
  const Batch b = make_batch({&mol}, c);
  Tape<double> t;
  auto geo = model::edge_geometry(b, t.constant(b.positions), c);
  const auto ref = radial_basis(norm(mol.positions[1]), c.cutoff, c.n_bessel, c.envelope_p);
  for (std::size_t m = 0; m < c.n_bessel; ++m) CHECK(std::abs(geo.basis.value()(0, m) - ref[m]) < 1e-14);
}

TEST_CASE("messages: gating limits and rotation of the J = 1 block") {
  std::mt19937_64 rng(1);
  const auto st = ModelState::random(small_config(true), 3);
  auto mol = random_molecule(rng, 4);
  for (const auto& m : layer0_messages(mol, st, 0.0))
    for (double v : m.data) CHECK(v == 0.0);

  const auto base = layer0_messages(mol, st, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto motion = random_rigid_motion(rng, 3.0);
    auto moved = mol;
    moved.positions = apply_rigid(motion, mol.positions);
    const auto rot = layer0_messages(moved, st, 1.0);
    // J = 0 invariant
    CHECK(testing::max_abs_diff(base[0].data, rot[0].data) < 1e-10);
    // J = 1 rows are (y, z, x) components
    const std::size_t ne = base[1].rows / 3, c = base[1].cols;
    for (std::size_t e = 0; e < ne; ++e)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const Vec3 v{base[1](3 * e + 2, ch), base[1](3 * e, ch), base[1](3 * e + 1, ch)};
        const Vec3 rv = matvec(motion.rotation, v);
        CHECK(std::abs(rot[1](3 * e + 2, ch) - rv[0]) < 1e-10);
        CHECK(std::abs(rot[1](3 * e, ch) - rv[1]) < 1e-10);
        CHECK(std::abs(rot[1](3 * e + 1, ch) - rv[2]) < 1e-10);
      }
  }
}

TEST_CASE("aggregation") {
  const auto st = ModelState::random(small_config(false), 4);
  Tape<double> t;
  auto p = bind_params<double>(t, st.params, nullptr);

  // Mirrored identical neighbours: the J = 1 aggregate on the centre cancels.
  auto sym = testing::molecule({8, 1, 1}, {{0, 0, 0}, {0.4, 0.7, -0.9}, {-0.4, -0.7, 0.9}});
  Batch b = make_batch({&sym}, st.config);
  auto geo = model::edge_geometry(b, t.constant(b.positions), st.config);
  auto s = ad::gather_rows(p.embedding, b.species);
  auto msgs = model::messages(geo, ad::gather_rows(s, b.send), Var<double>{}, p.layers[0], st.config.l_max);
  std::vector<std::size_t> dst;
  for (std::size_t r = 0; r < b.recv.size() * 3; ++r) dst.push_back(b.recv[r / 3] * 3 + r % 3);
  const Matrix agg = ad::scatter_add_rows(msgs[1], dst, 9).value();
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t c = 0; c < agg.cols; ++c) CHECK(std::abs(agg(m, c)) < 1e-10);

  // Explicit per-edge sum on a 3-atom cloud.
  std::mt19937_64 rng(2);
  auto mol = random_molecule(rng, 3);
  b = make_batch({&mol}, st.config);
  Tape<double> t2;
  p = bind_params<double>(t2, st.params, nullptr);
  geo = model::edge_geometry(b, t2.constant(b.positions), st.config);
  auto s0 = ad::gather_rows(p.embedding, b.species);
  msgs = model::messages(geo, ad::gather_rows(s0, b.send), Var<double>{}, p.layers[0], st.config.l_max);
  Var<double> s_new = s0;
  std::vector<Var<double>> h(st.config.l_max);
  model::aggregate_update(msgs, b.recv, 3, p.layers[0], s_new, h);
  const std::size_t C = st.config.channels;
  // Oracle: A_J sums, then the update rule by hand.
  std::vector<Matrix> A;
  for (int J = 0; J <= st.config.l_max; ++J) {
    const std::size_t w = 2 * J + 1;
    Matrix a(3 * w, C);
    const Matrix& mv = msgs[J].value();
    for (std::size_t e = 0; e < b.recv.size(); ++e)
      for (std::size_t m = 0; m < w; ++m)
        for (std::size_t c = 0; c < C; ++c) a(b.recv[e] * w + m, c) += mv(e * w + m, c);
    A.push_back(a);
  }
  auto mm = [](const Matrix& x, const Matrix& y) {
    Matrix o(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t k = 0; k < x.cols; ++k)
        for (std::size_t j = 0; j < y.cols; ++j) o(i, j) += x(i, k) * y(k, j);
    return o;
  };
  Matrix pre = mm(A[0], st.params.layers[0].w_mix[0]);
  for (int J = 1; J <= st.config.l_max; ++J) {
    const std::size_t w = 2 * J + 1;
    const Matrix hj = mm(A[J], st.params.layers[0].w_mix[J]);
    for (std::size_t i = 0; i < hj.size(); ++i) CHECK(std::abs(hj.data[i] - h[J - 1].value().data[i]) < 1e-12);
    Matrix q(3, C);
    for (std::size_t r = 0; r < hj.rows; ++r)
      for (std::size_t c = 0; c < C; ++c) q(r / w, c) += hj(r, c) * hj(r, c);
    const Matrix add = mm(q, st.params.layers[0].w_inv[J - 1]);
    for (std::size_t i = 0; i < pre.size(); ++i) pre.data[i] += add.data[i];
  }
  const Matrix s_init = s0.value();
  for (std::size_t i = 0; i < pre.size(); ++i) {
    const double x = pre.data[i];
    CHECK(std::abs(s_new.value().data[i] - (s_init.data[i] + x / (1 + std::exp(-x)))) < 1e-12);
  }
}

TEST_CASE("energy basics") {
  auto st = ModelState::random(small_config(true), 5);
  st.params.reference = Matrix(3, 1, {-13.6, -1000.0, -2000.5});
  auto atom = testing::molecule({6}, {{1.0, 2.0, 3.0}});
  CHECK(energy(atom, st) == -1000.0);
  for (const auto& f : forces(atom, st)) CHECK(norm(f) == 0.0);
  auto far = testing::molecule({6, 1}, {{0, 0, 0}, {0, 0, 6.0}});
  CHECK(energy(far, st) == -1000.0 - 13.6);
  CHECK_THROWS_AS(energy(AtomicConfiguration{}, st), InvalidArgument);
  CHECK_THROWS_AS(energy(testing::molecule({92}, {{0, 0, 0}}), st), InvalidArgument);
  CHECK_THROWS_AS(energy(testing::molecule({1, 1}, {{0, 0, 0}, {0, 0, 0}}), st), DegenerateGeometry);
}

TEST_CASE("ungated model is exactly equivariant; gated model is translation invariant") {
  std::mt19937_64 rng(6);
  const auto ungated = ModelState::random(small_config(false), 7);
  const auto gated = ModelState::random(small_config(true), 7, true);
  for (int trial = 0; trial < 20; ++trial) {
    auto mol = random_molecule(rng, 5);
    const auto p0 = predict(mol, ungated);
    const auto m = random_rigid_motion(rng, 5.0);
    auto moved = mol;
    moved.positions = apply_rigid(m, mol.positions);
    const auto p1 = predict(moved, ungated);
    CHECK(std::abs(p0.energy - p1.energy) < 1e-10);
    for (std::size_t i = 0; i < 5; ++i) {
      const Vec3 rf = matvec(m.rotation, p0.forces[i]);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(p1.forces[i][c] - rf[c]) < 1e-9);
    }
    auto shifted = mol;
    for (auto& x : shifted.positions) x = x + Vec3{4.0, -2.0, 1.0};
    CHECK(std::abs(energy(shifted, gated) - energy(mol, gated)) < 1e-12);
  }
}

TEST_CASE("unit gate reproduces the ungated model bit-exactly") {
  std::mt19937_64 rng(8);
  auto gated = ModelState::random(small_config(true), 9, true);
  auto ungated = gated;
  ungated.config.gating = false;
  for (int trial = 0; trial < 5; ++trial) {
    auto mol = random_molecule(rng, 4);
    const auto a = predict(mol, gated, true, {.force_unit_gate = true});
    const auto b = predict(mol, ungated);
    CHECK(a.energy == b.energy);
    CHECK(a.forces == b.forces);
    CHECK(predict(mol, gated).energy != b.energy);
  }
}

TEST_CASE("forces match finite differences and sum to zero") {
  std::mt19937_64 rng(10);
  for (bool gating : {false, true}) {
    ModelConfig cfg;  // default widths
    cfg.species = {1, 6, 8};
    cfg.gating = gating;
    const auto st = ModelState::random(cfg, 11, true);
    for (int trial = 0; trial < 3; ++trial) {
      auto mol = random_molecule(rng, 4);
      const auto f = forces(mol, st);
      Vec3 net{0, 0, 0};
      for (const auto& v : f) net = net + v;
      for (int c = 0; c < 3; ++c) CHECK(std::abs(net[c]) < 1e-8);
      const double h = 1e-4;
      for (std::size_t i = 0; i < 4; ++i)
        for (int c = 0; c < 3; ++c) {
          auto p = mol, m = mol;
          p.positions[i][c] += h;
          m.positions[i][c] -= h;
          const double fd = -(energy(p, st) - energy(m, st)) / (2 * h);
          if (std::abs(fd) > 1e-6) CHECK(std::abs(fd - f[i][c]) <= 1e-5 * std::abs(fd));
        }
    }
  }
  // Newton's third law on a dimer.
  const auto st = ModelState::random(small_config(true), 12, true);
  const auto f = forces(testing::molecule({8, 8}, {{0.1, 0.2, 0.3}, {1.0, -0.4, 0.9}}), st);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(f[0][c] + f[1][c]) < 1e-10);
}

TEST_CASE("permutation of identical atoms") {
  const auto st = ModelState::random(small_config(false), 13);
  auto a = testing::molecule({1, 8, 1}, {{0.9, 0, 0}, {0, 0, 0}, {-0.3, 0.85, 0}});
  auto b = testing::molecule({1, 8, 1}, {{-0.3, 0.85, 0}, {0, 0, 0}, {0.9, 0, 0}});
  CHECK(energy(a, st) == doctest::Approx(energy(b, st)).epsilon(1e-14));
}

TEST_CASE("batched evaluation equals per-configuration evaluation") {
  std::mt19937_64 rng(14);
  const auto st = ModelState::random(small_config(true), 15, true);
  std::vector<AtomicConfiguration> mols{random_molecule(rng, 3), random_molecule(rng, 4), random_molecule(rng, 1)};
  std::vector<const AtomicConfiguration*> ptrs;
  for (auto& m : mols) ptrs.push_back(&m);
  const Batch b = make_batch(ptrs, st.config);
  Tape<double> t;
  auto p = bind_params<double>(t, st.params, nullptr);
  const auto grid = build_equiangular_grid(st.config.n_theta, st.config.n_phi);
  auto f = evaluate(b, t.constant(b.positions), p, st.config, grid);
  for (std::size_t g = 0; g < mols.size(); ++g)
    CHECK(std::abs(f.energy.value().data[g] - energy(mols[g], st)) < 1e-12);
}

TEST_CASE("state validation and grid swaps") {
  auto st = ModelState::random(small_config(true), 16);
  CHECK_NOTHROW(st.validate());
  CHECK_THROWS_AS(with_grid(st, 8, 16), InvalidArgument);
  st.config.attention.positional_encoding = false;
  const auto fine = with_grid(st, 8, 16);
  CHECK_NOTHROW(fine.validate());
  CHECK(fine.params.layers[0].attention.pos.rows == 128);
  auto bad = st;
  bad.params.readout.data[0] = std::nan("");
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);

  std::vector<AtomicConfiguration> data{testing::molecule({1, 1}, {{0, 0, 0}, {1, 0, 0}})};
  data[0].energy = -3.0;
  set_reference_energies(st, data);
  for (double e : st.params.reference.data) CHECK(e == -1.5);
}
