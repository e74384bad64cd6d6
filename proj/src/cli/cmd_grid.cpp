#include <cmath>
#include <numbers>
#include <ostream>

#include "internal.hpp"
#include "mara/errors.hpp"
#include "mara/geometry.hpp"

namespace mara::cli {

namespace {

struct GridOptions {
  std::size_t n_theta = 4;
  std::size_t n_phi = 8;
  std::string rule = "fejer";
  std::string out = "grid_out";
};

void run_grid(const CLI::App& sub, Context& ctx, const GridOptions& o) {
  apply_kernels(ctx);
  QuadratureRule rule;
  if (o.rule == "fejer")
    rule = QuadratureRule::fejer;
  else if (o.rule == "sine-area")
    rule = QuadratureRule::sine_area;
  else
    throw InvalidArgument("unknown quadrature rule '" + o.rule + "' (fejer, sine-area)");
  RunManifest m = begin_manifest(sub, ctx, 0);
  prepare_dir(o.out);
  const SphericalGrid g = build_equiangular_grid(o.n_theta, o.n_phi, rule);

  CsvWriter points(join_path(o.out, "grid.csv"), {"index", "theta", "phi", "x", "y", "z", "weight"});
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double theta = std::numbers::pi * (static_cast<double>(k / o.n_phi) + 0.5) / static_cast<double>(o.n_theta);
    const double phi = 2 * std::numbers::pi * static_cast<double>(k % o.n_phi) / static_cast<double>(o.n_phi);
    points.row({std::to_string(k), num(theta), num(phi), num(g.points[k][0]), num(g.points[k][1]),
                num(g.points[k][2]), num(g.weights[k])});
  }

  // Quadrature self-test: total weight and the integrals of Y_lm for l <= 2.
  CsvWriter report(join_path(o.out, "quadrature.csv"), {"check", "value", "expected", "deviation"});
  double total = 0;
  for (double w : g.weights) total += w;
  const double dev = std::abs(total - 4 * std::numbers::pi);
  report.row({"sum_weights", num(total), num(4 * std::numbers::pi), num(dev)});
  std::vector<double> integrals(9, 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto y = real_spherical_harmonics(2, g.points[k]);
    for (std::size_t i = 0; i < y.size(); ++i) integrals[i] += g.weights[k] * y[i];
  }
  for (int l = 0; l <= 2; ++l)
    for (int mm = -l; mm <= l; ++mm) {
      const double expected = l == 0 ? std::sqrt(4 * std::numbers::pi) : 0.0;
      const double v = integrals[static_cast<std::size_t>(l * l + l + mm)];
      report.row({"integral_Y_" + std::to_string(l) + "_" + std::to_string(mm), num(v), num(expected),
                  num(std::abs(v - expected))});
    }

  m.artifacts = {"grid.csv", "quadrature.csv"};
  m.finished = utc_now();
  write_manifest(o.out, m);
  ctx.out << g.size() << " points, sum of weights " << num(total) << " (|dev from 4 pi| = " << num(dev) << ")\n";
  if (!(dev <= 1e-10)) throw CommandFailed("quadrature weights deviate from 4 pi by " + num(dev));
}

}  // namespace

void add_grid_command(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<GridOptions>();
  CLI::App* sub = app.add_subcommand("grid", "Dump an equiangular grid with its quadrature self-test");
  sub->add_option("--ntheta", o->n_theta, "Polar points")->check(CLI::PositiveNumber);
  sub->add_option("--nphi", o->n_phi, "Azimuthal points")->check(CLI::PositiveNumber);
  sub->add_option("--rule", o->rule, "Polar weights: fejer or sine-area");
  sub->add_option("--out", o->out, "Output directory");
  add_common_options(sub, ctx);
  sub->callback([sub, o, &ctx] { run_grid(*sub, ctx, *o); });
}

}  // namespace mara::cli
