#include "mara/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mara/errors.hpp"

namespace mara {

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile must be in [0, 1]");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

TailMetrics tail_metrics(std::span<const double> e) {
  if (e.empty()) throw InvalidArgument("tail metrics of an empty sample");
  TailMetrics t;
  double sum = 0.0;
  for (double x : e) sum += x;
  t.mae = sum / static_cast<double>(e.size());
  t.q95 = percentile(e, 0.95);
  t.q99 = percentile(e, 0.99);
  t.max = *std::max_element(e.begin(), e.end());
  return t;
}

std::vector<double> validation_ratio(std::span<const double> b, std::span<const double> m) {
  if (b.size() != m.size()) throw InvalidArgument("validation_ratio needs series of equal length");
  std::vector<double> out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] == 0.0) throw UndefinedRatio(i, "baseline is zero at index " + std::to_string(i));
    out[i] = (b[i] - m[i]) / b[i] * 100.0;
  }
  return out;
}

namespace {

void check_pair(const AtomicConfiguration& p, const AtomicConfiguration& t) {
  if (!p.energy || !t.energy || !p.forces || !t.forces)
    throw InvalidArgument("loss needs energies and forces on both sides");
  if (p.size() != t.size() || p.forces->size() != t.forces->size() || t.forces->size() != t.size())
    throw InvalidArgument("prediction and target shapes differ");
  if (p.size() == 0) throw InvalidArgument("empty configuration");
}

}  // namespace

double loss(const std::vector<AtomicConfiguration>& pred, const std::vector<AtomicConfiguration>& target,
            double lambda_e, double lambda_f) {
  if (pred.size() != target.size() || pred.empty()) throw InvalidArgument("loss needs equally many, nonempty samples");
  double le = 0.0, lf = 0.0;
  std::size_t comps = 0;
  for (std::size_t g = 0; g < pred.size(); ++g) {
    check_pair(pred[g], target[g]);
    const double de = (*pred[g].energy - *target[g].energy) / static_cast<double>(pred[g].size());
    le += de * de;
    for (std::size_t i = 0; i < pred[g].size(); ++i)
      for (int c = 0; c < 3; ++c) {
        const double df = (*pred[g].forces)[i][c] - (*target[g].forces)[i][c];
        lf += df * df;
        ++comps;
      }
  }
  return lambda_e * le / static_cast<double>(pred.size()) + lambda_f * lf / static_cast<double>(comps);
}

ErrorSummary error_summary(const std::vector<AtomicConfiguration>& pred, const std::vector<AtomicConfiguration>& target) {
  if (pred.size() != target.size() || pred.empty()) throw InvalidArgument("error summary needs equally many samples");
  ErrorSummary s;
  double se = 0.0, sf = 0.0;
  for (std::size_t g = 0; g < pred.size(); ++g) {
    check_pair(pred[g], target[g]);
    const double de = *pred[g].energy - *target[g].energy;
    s.energy_abs.push_back(std::abs(de));
    se += de * de;
    for (std::size_t i = 0; i < pred[g].size(); ++i)
      for (int c = 0; c < 3; ++c) {
        const double df = (*pred[g].forces)[i][c] - (*target[g].forces)[i][c];
        s.force_abs.push_back(std::abs(df));
        sf += df * df;
      }
  }
  s.energy_rmse = std::sqrt(se / static_cast<double>(s.energy_abs.size()));
  s.force_rmse = std::sqrt(sf / static_cast<double>(s.force_abs.size()));
  return s;
}

}  // namespace mara
