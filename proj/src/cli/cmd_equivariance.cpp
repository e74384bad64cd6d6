#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "internal.hpp"
#include "mara/errors.hpp"
#include "mara/geometry.hpp"

namespace mara::cli {

namespace {

struct EquivarianceOptions {
  std::string checkpoint;
  bool random_model = false;
  ModelFlags flags;
  std::string system;
  std::size_t atoms = 5;
  std::size_t rotations = 20;
  std::string grids;
  bool translation_only = false;
  std::uint64_t seed = 0;
  std::string out = "equivariance_out";
};

std::vector<std::pair<std::size_t, std::size_t>> parse_grids(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) throw InvalidArgument("grid '" + item + "' is not of the form <ntheta>x<nphi>");
    try {
      out.emplace_back(std::stoul(item.substr(0, x)), std::stoul(item.substr(x + 1)));
    } catch (const std::exception&) {
      throw InvalidArgument("grid '" + item + "' is not of the form <ntheta>x<nphi>");
    }
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

struct Deviations {
  std::vector<double> alpha, energy, force;
};

Deviations measure(const AtomicConfiguration& sys, const ModelState& model, const std::vector<RigidMotion>& motions,
                   const EvalOptions& opts) {
  const Prediction base = predict(sys, model, true, opts);
  Deviations d;
  for (const auto& g : motions) {
    AtomicConfiguration moved = sys;
    moved.positions = apply_rigid(g, sys.positions);
    const Prediction p = predict(moved, model, true, opts);
    d.energy.push_back(std::abs(p.energy - base.energy));
    double f = 0;
    for (std::size_t i = 0; i < sys.size(); ++i) {
      const Vec3 rf = matvec(g.rotation, base.forces[i]);
      for (int c = 0; c < 3; ++c) f = std::max(f, std::abs(p.forces[i][c] - rf[c]));
    }
    d.force.push_back(f);
    if (p.neighbors.edges == base.neighbors.edges)
      for (std::size_t l = 0; l < p.alpha.size(); ++l)
        for (std::size_t e = 0; e < p.alpha[l].size(); ++e) d.alpha.push_back(std::abs(p.alpha[l][e] - base.alpha[l][e]));
  }
  return d;
}

void run_equivariance(const CLI::App& sub, Context& ctx, const EquivarianceOptions& o) {
  apply_kernels(ctx);
  std::mt19937_64 rng(o.seed);
  AtomicConfiguration sys;
  ModelState model;
  if (o.system.empty()) {
    // Random cloud over the model's species with atoms at least 0.9 A apart.
    model = obtain_model(o.checkpoint, o.random_model, o.flags, {1, 6, 8});
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    while (sys.size() < o.atoms) {
      const Vec3 p{u(rng), u(rng), u(rng)};
      bool ok = true;
      for (const auto& q : sys.positions) ok = ok && norm(p - q) >= 0.9;
      if (!ok) continue;
      sys.positions.push_back(p);
      sys.species.push_back(model.config.species[sys.size() % model.config.species.size()]);
    }
  } else {
    sys = load_system(o.system);
    std::vector<int> species = sys.species;
    std::sort(species.begin(), species.end());
    species.erase(std::unique(species.begin(), species.end()), species.end());
    model = obtain_model(o.checkpoint, o.random_model, o.flags, species);
  }

  std::vector<RigidMotion> motions;
  for (std::size_t r = 0; r < o.rotations; ++r) {
    RigidMotion g = random_rigid_motion(rng, 3.0);
    if (o.translation_only) g.rotation = identity3();
    motions.push_back(g);
  }
  auto grids = parse_grids(o.grids);
  if (grids.empty()) grids.emplace_back(model.config.n_theta, model.config.n_phi);

  RunManifest m = begin_manifest(sub, ctx, o.seed);
  prepare_dir(o.out);
  CsvWriter table(join_path(o.out, "equivariance.csv"), {"grid", "path", "quantity", "median", "max"});
  auto emit = [&](const std::string& grid, const std::string& path, const char* q, const std::vector<double>& v) {
    table.row({grid, path, q, num(median(v)), num(max_of(v))});
    ctx.out << grid << " " << path << " " << q << ": median " << num(median(v)) << ", max " << num(max_of(v)) << "\n";
  };

  // The plain backbone (messages times a constant 1) must be exactly equivariant.
  const Deviations exact = measure(sys, model, motions, EvalOptions{.force_unit_gate = true});
  const std::string own = std::to_string(model.config.n_theta) + "x" + std::to_string(model.config.n_phi);
  emit(own, "ungated", "energy", exact.energy);
  emit(own, "ungated", "force", exact.force);

  for (const auto& [nt, np] : grids) {
    const std::string name = std::to_string(nt) + "x" + std::to_string(np);
    ModelState on_grid = model;
    if (nt != model.config.n_theta || np != model.config.n_phi) on_grid = with_grid(model, nt, np);
    const Deviations d = measure(sys, on_grid, motions, {});
    const std::string path = model.config.gating ? "gated" : "ungated";
    emit(name, path, "alpha", d.alpha);
    emit(name, path, "energy", d.energy);
    emit(name, path, "force", d.force);
  }
  m.artifacts = {"equivariance.csv"};
  m.finished = utc_now();
  write_manifest(o.out, m);

  if (!(max_of(exact.energy) < 1e-10) || !(max_of(exact.force) < 1e-9))
    throw CommandFailed("ungated backbone is not equivariant: max |dE| = " + num(max_of(exact.energy)) +
                        ", max |dF| = " + num(max_of(exact.force)));
}

}  // namespace

void add_equivariance_command(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<EquivarianceOptions>();
  CLI::App* sub = app.add_subcommand("check-equivariance", "Deviation of gates, energy and forces under rigid motions");
  sub->add_option("--checkpoint", o->checkpoint, "Model checkpoint");
  sub->add_flag("--random-model", o->random_model, "Use fresh weights from the model flags");
  add_model_flags(sub, o->flags, true);
  sub->add_option("--system", o->system, "Structure (file.xyz[@frame] or synth:<kind>); default: random cloud");
  sub->add_option("--atoms", o->atoms, "Atoms in the random cloud")->check(CLI::PositiveNumber);
  sub->add_option("--rotations", o->rotations, "Number of random rigid motions")->check(CLI::PositiveNumber);
  sub->add_option("--grids", o->grids, "Comma-separated grids, e.g. 4x8,8x16,16x32 (default: the model's)");
  sub->add_flag("--translation-only", o->translation_only, "Translations without rotation");
  sub->add_option("--seed", o->seed, "Seed for motions and the random cloud");
  sub->add_option("--out", o->out, "Output directory");
  add_common_options(sub, ctx);
  sub->callback([sub, o, &ctx] { run_equivariance(*sub, ctx, *o); });
}

}  // namespace mara::cli
