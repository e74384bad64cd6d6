#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mara/dataset.hpp"
#include "mara/model.hpp"

namespace mara {

struct TrainConfig {
  double lambda_e = 1.0;
  double lambda_f = 100.0;
  std::size_t steps = 1000;
  std::size_t batch_size = 16;
  double learning_rate = 5e-3;
  /// Exponential decay: lr(t) = learning_rate * final_lr_ratio^(t / steps).
  double final_lr_ratio = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t valid_every = 100;
  std::uint64_t seed = 0;
  /// Worker threads for the batch gradient and validation. Results are
  /// deterministic for a fixed thread count; 1 is the reference.
  std::size_t threads = 1;

  void validate() const;
};

/// One line of the training log.
struct LogRecord {
  std::size_t step = 0;
  std::string split;
  std::string metric;
  double value = 0.0;
};

std::string to_jsonl(const LogRecord& r);

/// Adam moments for every parameter leaf, in for_each_param order.
struct OptimizerState {
  std::vector<Matrix> m, v;
  std::size_t t = 0;
};

struct TrainResult {
  ModelState state;
  std::vector<LogRecord> log;
  /// Validation force MAE at each validation point (first entry: untrained).
  std::vector<std::size_t> valid_steps;
  std::vector<double> valid_force_mae;
};

/// Non-finite loss or gradient. Carries the last parameters that produced a
/// finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, ModelState last_good)
      : std::runtime_error("training diverged at step " + std::to_string(step)),
        step_(step),
        last_good_(std::move(last_good)) {}
  std::size_t step() const noexcept { return step_; }
  const ModelState& last_good() const noexcept { return last_good_; }

 private:
  std::size_t step_;
  ModelState last_good_;
};

/// Whether the trainer updates parameters of this role under `config`.
bool is_trainable(ParamRole role, const ModelConfig& config);

struct BatchGradient {
  double loss = 0.0;
  std::vector<Matrix> grads;  // for_each_param order; zero for frozen leaves
};

/// Exact gradient of the energy+force loss over `configs` (see kGradientStrategy).
/// With threads > 1 the batch is cut into contiguous parts whose gradients are
/// summed in part order.
BatchGradient loss_gradient(const ModelState& state, const std::vector<const AtomicConfiguration*>& configs,
                            double lambda_e, double lambda_f, std::size_t threads = 1);

/// Predicted energies and forces for every configuration (chunked batches).
std::vector<AtomicConfiguration> predict_all(const ModelState& state,
                                             const std::vector<const AtomicConfiguration*>& configs,
                                             const EvalOptions& opts = {}, std::size_t threads = 1);

/// Adam on the train split, validation every cfg.valid_every steps and at the
/// end. Frozen leaves (reference energies; projections when learnable is off;
/// attention leaves when gating is off) stay bit-identical. `on_record` sees
/// each log line as it is produced.
TrainResult train(const Dataset& data, const ModelState& initial, const TrainConfig& cfg,
                  const std::function<void(const LogRecord&)>& on_record = nullptr);

}  // namespace mara
