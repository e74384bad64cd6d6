#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "internal.hpp"
#include "mara/errors.hpp"

namespace mara::cli {

namespace {

struct AttentionMapOptions {
  std::string checkpoint;
  bool random_model = false;
  ModelFlags flags;
  std::string system;
  std::string mode = "radial";
  std::size_t layer = 0;
  // radial
  std::size_t atom = 0;
  std::string from, to;
  std::size_t steps = 100;
  std::string neighbors;
  // angular
  std::size_t center = 0;
  std::size_t probe = 1;
  double radius = 1.0;
  std::string grid = "18x36";
  std::string out = "attention_map_out";
};

Vec3 parse_point(const std::string& text) {
  std::stringstream ss(text);
  Vec3 p{};
  std::string item;
  for (int c = 0; c < 3; ++c) {
    if (!std::getline(ss, item, ',')) throw InvalidArgument("point '" + text + "' needs three comma-separated values");
    try {
      p[c] = std::stod(item);
    } catch (const std::exception&) {
      throw InvalidArgument("point '" + text + "' needs three comma-separated values");
    }
  }
  if (std::getline(ss, item, ',')) throw InvalidArgument("point '" + text + "' has more than three values");
  return p;
}

std::vector<std::size_t> parse_indices(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
  return out;
}

/// Gate and pooled-attention norm of edge recv <- send, NaN when the edge is absent.
std::pair<double, double> edge_gate(const Prediction& p, std::size_t layer, std::size_t recv, std::size_t send) {
  const auto& edges = p.neighbors.edges;
  const auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(recv, send));
  if (it == edges.end() || *it != std::make_pair(recv, send) || layer >= p.alpha.size())
    return {std::nan(""), std::nan("")};
  const auto e = static_cast<std::size_t>(it - edges.begin());
  const Matrix& pooled = p.pooled[layer];
  double s = 0;
  for (std::size_t c = 0; c < pooled.cols; ++c) s += pooled(e, c) * pooled(e, c);
  return {p.alpha[layer][e], std::sqrt(s)};
}

void run_attention_map(const CLI::App& sub, Context& ctx, const AttentionMapOptions& o) {
  apply_kernels(ctx);
  if (o.system.empty()) throw InvalidArgument("--system is required");
  AtomicConfiguration sys = load_system(o.system);
  std::vector<int> species = sys.species;
  std::sort(species.begin(), species.end());
  species.erase(std::unique(species.begin(), species.end()), species.end());
  const ModelState model = obtain_model(o.checkpoint, o.random_model, o.flags, species);
  if (!model.config.gating) throw InvalidArgument("the model has no attention gates");
  if (o.layer >= model.config.layers) throw InvalidArgument("--layer out of range");

  RunManifest m = begin_manifest(sub, ctx, 0);
  prepare_dir(o.out);
  const std::string file = join_path(o.out, "attention_map.csv");
  std::size_t rows = 0;
  if (o.mode == "radial") {
    if (o.atom >= sys.size()) throw InvalidArgument("--atom out of range");
    if (o.from.empty() || o.to.empty()) throw InvalidArgument("radial mode needs --from and --to");
    if (o.steps < 2) throw InvalidArgument("radial mode needs --steps >= 2");
    const Vec3 p0 = parse_point(o.from), p1 = parse_point(o.to);
    std::vector<std::size_t> nbrs = parse_indices(o.neighbors);
    if (nbrs.empty())
      for (std::size_t j = 0; j < sys.size(); ++j)
        if (j != o.atom) nbrs.push_back(j);
    for (std::size_t j : nbrs)
      if (j >= sys.size() || j == o.atom) throw InvalidArgument("bad neighbour index " + std::to_string(j));
    CsvWriter t(file, {"step", "fraction", "x", "y", "z", "neighbor", "alpha", "pooled_norm"});
    for (std::size_t s = 0; s < o.steps; ++s) {
      const double f = static_cast<double>(s) / static_cast<double>(o.steps - 1);
      sys.positions[o.atom] = p0 + f * (p1 - p0);
      const Prediction p = predict(sys, model, false);
      for (std::size_t j : nbrs) {
        const auto [alpha, pooled] = edge_gate(p, o.layer, o.atom, j);
        t.row({std::to_string(s), num(f), num(sys.positions[o.atom][0]), num(sys.positions[o.atom][1]),
               num(sys.positions[o.atom][2]), std::to_string(j), num(alpha), num(pooled)});
        ++rows;
      }
    }
  } else if (o.mode == "angular") {
    if (o.center >= sys.size() || o.probe >= sys.size() || o.center == o.probe)
      throw InvalidArgument("--center and --probe must be distinct atom indices");
    const auto x = o.grid.find('x');
    if (x == std::string::npos) throw InvalidArgument("--grid must be <ntheta>x<nphi>");
    const std::size_t nt = std::stoul(o.grid.substr(0, x)), np = std::stoul(o.grid.substr(x + 1));
    if (nt == 0 || np == 0) throw InvalidArgument("--grid counts must be positive");
    const Vec3 c = sys.positions[o.center];
    CsvWriter t(file, {"theta", "phi", "x", "y", "z", "alpha", "pooled_norm"});
    // Upper hemisphere around the centre, cell-centred in theta.
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t j = 0; j < np; ++j) {
        const double th = 0.5 * std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(nt);
        const double ph = 2 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(np);
        sys.positions[o.probe] = c + o.radius * Vec3{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
        const Prediction p = predict(sys, model, false);
        const auto [alpha, pooled] = edge_gate(p, o.layer, o.center, o.probe);
        t.row({num(th), num(ph), num(sys.positions[o.probe][0]), num(sys.positions[o.probe][1]),
               num(sys.positions[o.probe][2]), num(alpha), num(pooled)});
        ++rows;
      }
  } else {
    throw InvalidArgument("--mode must be radial or angular");
  }
  m.artifacts = {"attention_map.csv"};
  m.finished = utc_now();
  write_manifest(o.out, m);
  ctx.out << rows << " rows written to " << file << "\n";
}

}  // namespace

void add_attention_map_command(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<AttentionMapOptions>();
  CLI::App* sub = app.add_subcommand("attention-map", "Gate values along a probe sweep");
  sub->add_option("--checkpoint", o->checkpoint, "Model checkpoint");
  sub->add_flag("--random-model", o->random_model, "Use fresh weights from the model flags");
  add_model_flags(sub, o->flags, true);
  sub->add_option("--system", o->system, "Structure (file.xyz[@frame] or synth:<kind>)");
  sub->add_option("--mode", o->mode, "radial or angular");
  sub->add_option("--layer", o->layer, "Which layer's gates to report");
  sub->add_option("--atom", o->atom, "Radial: atom moved from --from to --to");
  sub->add_option("--from", o->from, "Radial: start point x,y,z (A)");
  sub->add_option("--to", o->to, "Radial: end point x,y,z (A)");
  sub->add_option("--steps", o->steps, "Radial: positions along the path, endpoints included");
  sub->add_option("--neighbors", o->neighbors, "Radial: comma-separated neighbour indices (default: all)");
  sub->add_option("--center", o->center, "Angular: atom at the sphere centre");
  sub->add_option("--probe", o->probe, "Angular: atom swept over the hemisphere");
  sub->add_option("--radius", o->radius, "Angular: probe distance (A)")->check(CLI::PositiveNumber);
  sub->add_option("--grid", o->grid, "Angular: <ntheta>x<nphi> sweep resolution");
  sub->add_option("--out", o->out, "Output directory");
  add_common_options(sub, ctx);
  sub->callback([sub, o, &ctx] { run_attention_map(*sub, ctx, *o); });
}

}  // namespace mara::cli
