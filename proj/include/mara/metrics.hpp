#pragma once

#include <span>
#include <vector>

#include "mara/config.hpp"

namespace mara {

struct TailMetrics {
  double mae = 0.0;
  double q95 = 0.0;
  double q99 = 0.0;
  double max = 0.0;
};

/// Linear interpolation between order statistics: the q-quantile of sorted
/// x_0..x_{n-1} sits at position q (n - 1).
double percentile(std::span<const double> values, double q);

/// MAE, Q95, Q99 and MAX of absolute errors. Throws InvalidArgument on empty input.
TailMetrics tail_metrics(std::span<const double> abs_errors);

/// (b - m) / b * 100 per element; positive means the gated model is better.
/// Throws UndefinedRatio at the first zero baseline entry.
std::vector<double> validation_ratio(std::span<const double> baseline, std::span<const double> mara);

/// lambda_e * mean_g ((E_pred - E_ref) / N_g)^2 + lambda_f * mean over all force
/// components of (F_pred - F_ref)^2. Both sides need energies and forces.
double loss(const std::vector<AtomicConfiguration>& pred, const std::vector<AtomicConfiguration>& target,
            double lambda_e, double lambda_f);

struct ErrorSummary {
  std::vector<double> energy_abs;   // |dE| per configuration
  std::vector<double> force_abs;    // |dF| per component
  double energy_rmse = 0.0;
  double force_rmse = 0.0;
};

ErrorSummary error_summary(const std::vector<AtomicConfiguration>& pred, const std::vector<AtomicConfiguration>& target);

}  // namespace mara
