#include <fstream>
#include <ostream>

#include "internal.hpp"
#include "json.hpp"
#include "mara/checkpoint.hpp"
#include "mara/errors.hpp"
#include "mara/md.hpp"

namespace mara::cli {

namespace {

struct MDCommandOptions {
  std::string checkpoint;
  std::string potential;
  std::string system = "synth:trimer";
  MDOptions md;
  double rdf_rmax = 6.0;
  std::size_t rdf_bins = 60;
  double window_fs = 500.0;
  std::string out = "md_out";
};

void run_md(const CLI::App& sub, Context& ctx, const MDCommandOptions& o) {
  apply_kernels(ctx);
  const AtomicConfiguration sys = load_system(o.system);
  ForceFn forces;
  if (!o.checkpoint.empty() == !o.potential.empty()) throw InvalidArgument("give exactly one of --checkpoint and --potential");
  if (!o.checkpoint.empty())
    forces = model_forces(load_checkpoint(o.checkpoint).state, sys.species);
  else
    forces = potential_forces(parse_potential(o.potential));

  RunManifest m = begin_manifest(sub, ctx, o.md.seed);
  prepare_dir(o.out);
  Trajectory t;
  try {
    t = run(sys, forces, o.md);
  } catch (const SimulationAbort& e) {
    AtomicConfiguration bad = sys;
    bad.positions = e.frame();
    bad.info = {{"abort_step", std::to_string(e.step())}};
    write_extxyz_file(join_path(o.out, "abort_frame.xyz"), {bad});
    m.artifacts = {"abort_frame.xyz"};
    m.finished = utc_now();
    write_manifest(o.out, m);
    throw CommandFailed(std::string("simulation aborted: ") + e.what());
  }

  write_extxyz_file(join_path(o.out, "trajectory.xyz"), t.frames);
  {
    std::ofstream f(join_path(o.out, "force_stats.jsonl"));
    for (const auto& s : t.force_stats) {
      nlohmann::ordered_json j{{"step", s.step}, {"mean", s.mean}, {"q95", s.q95}, {"max", s.max}};
      f << j.dump() << '\n';
    }
  }
  std::vector<double> mean, q95, mx;
  for (const auto& s : t.force_stats) {
    mean.push_back(s.mean);
    q95.push_back(s.q95);
    mx.push_back(s.max);
  }
  const auto window = static_cast<std::size_t>(std::max(1.0, std::round(o.window_fs / o.md.dt)));
  const auto mean_avg = moving_average(mean, window), q95_avg = moving_average(q95, window),
             max_avg = moving_average(mx, window), temp_avg = moving_average(t.temperature, window);
  CsvWriter thermo(join_path(o.out, "thermo.csv"),
                   {"step", "time_fs", "temperature", "potential", "force_mean", "force_q95", "force_max",
                    "temperature_avg", "force_mean_avg", "force_q95_avg", "force_max_avg"});
  for (std::size_t i = 0; i < t.temperature.size(); ++i)
    thermo.row({std::to_string(i), num(static_cast<double>(i) * o.md.dt), num(t.temperature[i]), num(t.potential[i]),
                num(mean[i]), num(q95[i]), num(mx[i]), num(temp_avg[i]), num(mean_avg[i]), num(q95_avg[i]),
                num(max_avg[i])});

  const RDF g = rdf(t.frames, o.rdf_rmax, o.rdf_bins);
  CsvWriter r(join_path(o.out, "rdf.csv"), {"r", "g", "count"});
  for (std::size_t b = 0; b < g.g.size(); ++b) r.row({num(g.centers[b]), num(g.g[b]), num(g.counts[b])});

  double t_mean = 0;
  for (double v : t.temperature) t_mean += v;
  t_mean /= static_cast<double>(t.temperature.size());
  ctx.out << t.force_stats.size() - 1 << " steps, " << t.frames.size() << " frames, mean kinetic temperature "
          << num(t_mean) << " K\n";
  m.artifacts = {"trajectory.xyz", "force_stats.jsonl", "thermo.csv", "rdf.csv"};
  m.finished = utc_now();
  write_manifest(o.out, m);
}

}  // namespace

void add_md_command(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<MDCommandOptions>();
  CLI::App* sub = app.add_subcommand("md", "Langevin dynamics (BAOAB) with force statistics and RDF");
  sub->add_option("--checkpoint", o->checkpoint, "Model checkpoint providing forces");
  sub->add_option("--potential", o->potential, "Analytic forces instead: morse or trimer");
  sub->add_option("--system", o->system, "Start structure (file.xyz[@frame] or synth:<kind>)");
  sub->add_option("--steps", o->md.steps, "Integration steps");
  sub->add_option("--dt", o->md.dt, "Time step (fs)")->check(CLI::PositiveNumber);
  sub->add_option("--friction", o->md.friction, "Friction (1/fs)")->check(CLI::NonNegativeNumber);
  sub->add_option("--temp", o->md.temperature, "Temperature (K)")->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", o->md.seed, "Seed for velocities and noise");
  sub->add_option("--frame-every", o->md.frame_every, "Steps between stored frames")->check(CLI::PositiveNumber);
  sub->add_option("--rdf-rmax", o->rdf_rmax, "RDF range (A)")->check(CLI::PositiveNumber);
  sub->add_option("--rdf-bins", o->rdf_bins, "RDF bins")->check(CLI::PositiveNumber);
  sub->add_option("--window", o->window_fs, "Moving-average window (fs)")->check(CLI::PositiveNumber);
  sub->add_option("--out", o->out, "Output directory");
  add_common_options(sub, ctx);
  sub->callback([sub, o, &ctx] { run_md(*sub, ctx, *o); });
}

}  // namespace mara::cli
