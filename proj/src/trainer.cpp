#include "mara/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "mara/errors.hpp"
#include "mara/metrics.hpp"

namespace mara {

using ad::Tape;
using ad::Var;

void TrainConfig::validate() const {
  if (lambda_e < 0 || lambda_f < 0 || (lambda_e == 0 && lambda_f == 0))
    throw InvalidArgument("loss weights must be non-negative and not both zero");
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (!(learning_rate > 0)) throw InvalidArgument("learning rate must be positive");
  if (!(final_lr_ratio > 0)) throw InvalidArgument("final learning-rate ratio must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw InvalidArgument("Adam betas must be in [0, 1)");
  if (!(epsilon > 0)) throw InvalidArgument("Adam epsilon must be positive");
  if (valid_every == 0) throw InvalidArgument("validation interval must be positive");
  if (threads == 0) throw InvalidArgument("thread count must be positive");
}

std::string to_jsonl(const LogRecord& r) {
  nlohmann::ordered_json j = {{"step", r.step}, {"split", r.split}, {"metric", r.metric}, {"value", r.value}};
  return j.dump();
}

bool is_trainable(ParamRole role, const ModelConfig& c) {
  switch (role) {
    case ParamRole::backbone: return true;
    case ParamRole::reference: return false;
    case ParamRole::projection: return c.gating && c.attention.learnable;
    case ParamRole::positional: return c.gating && c.attention.positional_encoding;
    case ParamRole::gate: return c.gating;
  }
  return false;
}

namespace {

template <class T>
std::vector<Var<T>> trainable_leaves(ModelParams<Var<T>>& p, const ModelConfig& c) {
  std::vector<Var<T>> out;
  for_each_param(p, [&](const std::string&, Var<T>& v, ParamRole role) {
    if (is_trainable(role, c)) out.push_back(v);
  });
  return out;
}

/// Loss and gradient contributions of one part of a batch; the loss is
/// normalised by the whole batch (G configurations, n_comp force components).
BatchGradient partial_gradient(const ModelState& state, const std::vector<const AtomicConfiguration*>& configs,
                               double lambda_e, double lambda_f, double G, double n_comp) {
  const ModelConfig& cfg = state.config;
  const Batch batch = make_batch(configs, cfg);
  const SphericalGrid grid = build_equiangular_grid(cfg.n_theta, cfg.n_phi);
  const auto trainable = [&](ParamRole r) { return is_trainable(r, cfg); };
  const std::size_t n = batch.n_atoms(), g_count = configs.size();

  // Pass A: energies, forces, and the energy-loss gradient.
  Tape<double> ta;
  auto pa = bind_params<double>(ta, state.params, trainable);
  auto x = ta.input(batch.positions);
  auto fa = evaluate(batch, x, pa, cfg, grid);
  const Var<double> wrt_x[] = {x};
  const Matrix dedx = ta.grad(ad::sum(fa.energy), wrt_x, true)[0];

  Matrix coeff(g_count, 1);
  double loss_e = 0.0, loss_f = 0.0;
  for (std::size_t g = 0; g < g_count; ++g) {
    const double ng = static_cast<double>(configs[g]->size());
    const double de = fa.energy.value().data[g] - *configs[g]->energy;
    loss_e += (de / ng) * (de / ng);
    coeff.data[g] = 2.0 * lambda_e * de / (G * ng * ng);
  }
  Matrix u(n, 3);
  for (std::size_t g = 0; g < g_count; ++g)
    for (std::size_t a = 0; a < configs[g]->size(); ++a)
      for (int c = 0; c < 3; ++c) {
        const std::size_t row = batch.offset[g] + a;
        u(row, c) = -dedx(row, c) - (*configs[g]->forces)[a][c];
        loss_f += u(row, c) * u(row, c);
      }
  BatchGradient out;
  out.loss = lambda_e * loss_e / G + lambda_f * loss_f / n_comp;

  auto leaves_a = trainable_leaves(pa, cfg);
  std::vector<Matrix> ga;
  if (!leaves_a.empty())
    ga = ta.grad(ad::sum(ad::mul(fa.energy, ta.constant(coeff))), leaves_a, true);

  // Pass B: the tangent of grad_theta E along u gives grad_theta (u . grad_x E).
  std::vector<Mat<Dual<double>>> gb;
  if (lambda_f > 0 && !leaves_a.empty()) {
    Tape<Dual<double>> tb;
    auto pb = bind_params<Dual<double>>(tb, state.params, trainable);
    Mat<Dual<double>> xd(n, 3);
    for (std::size_t i = 0; i < xd.size(); ++i) xd.data[i] = Dual<double>(batch.positions.data[i], u.data[i]);
    auto fb = evaluate(batch, tb.constant(std::move(xd)), pb, cfg, grid);
    gb = tb.grad(ad::sum(fb.energy), trainable_leaves(pb, cfg), true);
  }
  const double force_scale = -2.0 * lambda_f / n_comp;

  std::size_t k = 0;
  for_each_param(state.params, [&](const std::string&, const Matrix& m, ParamRole role) {
    Matrix g(m.rows, m.cols);
    if (is_trainable(role, cfg)) {
      g = ga[k];
      if (!gb.empty())
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += force_scale * gb[k].data[i].d;
      ++k;
    }
    out.grads.push_back(std::move(g));
  });
  return out;
}

/// Runs fn(part) for parts 0..n-1 on up to `threads` threads.
template <class Fn>
void parallel_parts(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (std::size_t t = 0; t < std::min(threads, n); ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

BatchGradient loss_gradient(const ModelState& state, const std::vector<const AtomicConfiguration*>& configs,
                            double lambda_e, double lambda_f, std::size_t threads) {
  if (configs.empty()) throw InvalidArgument("loss_gradient needs at least one configuration");
  std::size_t n_atoms = 0;
  for (const auto* c : configs) {
    if (!c->energy || !c->forces) throw SchemaError("training configurations need energy and forces");
    n_atoms += c->size();
  }
  const double G = static_cast<double>(configs.size()), n_comp = 3.0 * static_cast<double>(n_atoms);
  const std::size_t parts = std::clamp<std::size_t>(threads, 1, configs.size());
  std::vector<BatchGradient> partial(parts);
  parallel_parts(parts, parts, [&](std::size_t p) {
    const std::size_t lo = configs.size() * p / parts, hi = configs.size() * (p + 1) / parts;
    const std::vector<const AtomicConfiguration*> sub(configs.begin() + lo, configs.begin() + hi);
    partial[p] = partial_gradient(state, sub, lambda_e, lambda_f, G, n_comp);
  });
  BatchGradient out = std::move(partial[0]);
  for (std::size_t p = 1; p < parts; ++p) {
    out.loss += partial[p].loss;
    for (std::size_t k = 0; k < out.grads.size(); ++k)
      for (std::size_t i = 0; i < out.grads[k].size(); ++i) out.grads[k].data[i] += partial[p].grads[k].data[i];
  }
  return out;
}

std::vector<AtomicConfiguration> predict_all(const ModelState& state,
                                             const std::vector<const AtomicConfiguration*>& configs,
                                             const EvalOptions& opts, std::size_t threads) {
  constexpr std::size_t kChunk = 64;
  const SphericalGrid grid = build_equiangular_grid(state.config.n_theta, state.config.n_phi);
  std::vector<AtomicConfiguration> out(configs.size());
  const std::size_t n_chunks = (configs.size() + kChunk - 1) / kChunk;
  parallel_parts(n_chunks, threads, [&](std::size_t ci) {
    const std::size_t lo = ci * kChunk;
    const std::vector<const AtomicConfiguration*> chunk(configs.begin() + lo,
                                                        configs.begin() + std::min(configs.size(), lo + kChunk));
    const Batch b = make_batch(chunk, state.config);
    Tape<double> t;
    auto p = bind_params<double>(t, state.params, nullptr);
    auto x = t.input(b.positions);
    auto f = evaluate(b, x, p, state.config, grid, opts);
    const Var<double> wrt[] = {x};
    const Matrix g = t.grad(ad::sum(f.energy), wrt, true)[0];
    for (std::size_t c = 0; c < chunk.size(); ++c) {
      AtomicConfiguration pred = *chunk[c];
      pred.energy = f.energy.value().data[c];
      pred.forces.emplace(chunk[c]->size());
      for (std::size_t a = 0; a < chunk[c]->size(); ++a)
        for (int k = 0; k < 3; ++k) (*pred.forces)[a][k] = -g(b.offset[c] + a, k);
      out[lo + c] = std::move(pred);
    }
  });
  return out;
}

namespace {

bool all_finite(const std::vector<Matrix>& grads) {
  for (const auto& g : grads)
    for (double v : g.data)
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

TrainResult train(const Dataset& data, const ModelState& initial, const TrainConfig& cfg,
                  const std::function<void(const LogRecord&)>& on_record) {
  cfg.validate();
  initial.validate();
  const auto train_set = data.subset(Split::train);
  const auto valid_set = data.subset(Split::valid);
  if (train_set.empty() || valid_set.empty()) throw InvalidArgument("training needs nonempty train and valid splits");
  std::vector<AtomicConfiguration> valid_ref;
  for (const auto* c : valid_set) {
    if (!c->energy || !c->forces) throw SchemaError("validation configurations need energy and forces");
    valid_ref.push_back(*c);
  }

  TrainResult res;
  res.state = initial;
  auto emit = [&](std::size_t step, const char* split, const char* metric, double value) {
    res.log.push_back({step, split, metric, value});
    if (on_record) on_record(res.log.back());
  };
  auto validate_now = [&](std::size_t step) {
    const auto pred = predict_all(res.state, valid_set, {}, cfg.threads);
    const auto s = error_summary(pred, valid_ref);
    const auto fe = tail_metrics(s.force_abs);
    emit(step, "valid", "loss", loss(pred, valid_ref, cfg.lambda_e, cfg.lambda_f));
    emit(step, "valid", "energy_mae", tail_metrics(s.energy_abs).mae);
    emit(step, "valid", "energy_rmse", s.energy_rmse);
    emit(step, "valid", "force_mae", fe.mae);
    emit(step, "valid", "force_rmse", s.force_rmse);
    res.valid_steps.push_back(step);
    res.valid_force_mae.push_back(fe.mae);
  };

  validate_now(0);
  OptimizerState opt;
  for_each_param(res.state.params, [&](const std::string&, const Matrix& m, ParamRole) {
    opt.m.emplace_back(m.rows, m.cols);
    opt.v.emplace_back(m.rows, m.cols);
  });

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  double running = 0.0;
  std::size_t running_n = 0;
  const std::size_t bs = std::min(cfg.batch_size, train_set.size());

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<const AtomicConfiguration*> batch;
    while (batch.size() < bs) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(train_set[order[cursor++]]);
    }
    const BatchGradient bg = loss_gradient(res.state, batch, cfg.lambda_e, cfg.lambda_f, cfg.threads);
    if (!std::isfinite(bg.loss) || !all_finite(bg.grads)) throw TrainingDiverged(step, res.state);
    running += bg.loss;
    ++running_n;

    const double lr = cfg.learning_rate * std::pow(cfg.final_lr_ratio, static_cast<double>(step - 1) /
                                                                            static_cast<double>(cfg.steps));
    ++opt.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
    std::size_t k = 0;
    for_each_param(res.state.params, [&](const std::string&, Matrix& w, ParamRole role) {
      const std::size_t idx = k++;
      if (!is_trainable(role, res.state.config)) return;
      Matrix& m = opt.m[idx];
      Matrix& v = opt.v[idx];
      const Matrix& g = bg.grads[idx];
      for (std::size_t i = 0; i < w.size(); ++i) {
        m.data[i] = cfg.beta1 * m.data[i] + (1 - cfg.beta1) * g.data[i];
        v.data[i] = cfg.beta2 * v.data[i] + (1 - cfg.beta2) * g.data[i] * g.data[i];
        w.data[i] -= lr * (m.data[i] / bc1) / (std::sqrt(v.data[i] / bc2) + cfg.epsilon);
      }
    });

    if (step % cfg.valid_every == 0 || step == cfg.steps) {
      emit(step, "train", "loss", running / static_cast<double>(running_n));
      emit(step, "train", "learning_rate", lr);
      running = 0.0;
      running_n = 0;
      validate_now(step);
    }
  }
  return res;
}

}  // namespace mara
