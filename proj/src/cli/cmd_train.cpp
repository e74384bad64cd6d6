#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "internal.hpp"
#include "mara/checkpoint.hpp"
#include "mara/errors.hpp"
#include "mara/metrics.hpp"
#include "mara/trainer.hpp"

namespace mara::cli {

namespace {

struct TrainOptions {
  std::string data = "synth:morse";
  std::size_t n = 500;
  double noise_temp = 500.0;
  std::string init;
  ModelFlags flags;
  TrainConfig train;
  std::string baseline;
  std::string out = "train_out";
};

/// Validation force MAE per step from a previous run's validation.csv.
std::map<std::size_t, double> read_force_mae(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read " + path);
  std::string line;
  std::getline(f, line);
  std::map<std::size_t, double> out;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string step, loss, emae, ermse, fmae;
    std::getline(ss, step, ',');
    std::getline(ss, loss, ',');
    std::getline(ss, emae, ',');
    std::getline(ss, ermse, ',');
    std::getline(ss, fmae, ',');
    out[std::stoul(step)] = std::stod(fmae);
  }
  return out;
}

void run_train(const CLI::App& sub, Context& ctx, TrainOptions o) {
  apply_kernels(ctx);
  o.train.threads = ctx.threads;
  const Dataset data = load_data(o.data, o.n, o.train.seed, o.noise_temp);
  ModelState init;
  if (!o.init.empty()) {
    init = load_checkpoint(o.init).state;
  } else {
    init = ModelState::random(o.flags.to_config(data.species()), o.flags.model_seed);
    set_reference_energies(init, data.copy_of(Split::train));
  }

  RunManifest m = begin_manifest(sub, ctx, o.train.seed);
  prepare_dir(o.out);
  std::ofstream log(join_path(o.out, "log.jsonl"));
  std::map<std::string, std::string> meta{{"data", data.provenance},
                                          {"steps", std::to_string(o.train.steps)},
                                          {"seed", std::to_string(o.train.seed)}};
  TrainResult result;
  bool diverged = false;
  std::string failure;
  try {
    result = train(data, init, o.train, [&](const LogRecord& r) { log << to_jsonl(r) << '\n' << std::flush; });
  } catch (const TrainingDiverged& e) {
    diverged = true;
    failure = e.what();
    result.state = e.last_good();
    meta["status"] = "diverged";
    meta["diverged_at_step"] = std::to_string(e.step());
  }
  save_checkpoint(join_path(o.out, "checkpoint.json"), result.state, meta);
  m.artifacts = {"checkpoint.json", "log.jsonl"};

  if (!diverged) {
    // One row per validation point, pivoted from the log.
    std::map<std::size_t, std::map<std::string, double>> rows;
    for (const auto& r : result.log)
      if (r.split == "valid") rows[r.step][r.metric] = r.value;
    CsvWriter v(join_path(o.out, "validation.csv"),
                {"step", "loss", "energy_mae", "energy_rmse", "force_mae", "force_rmse"});
    for (auto& [step, mm] : rows)
      v.row({std::to_string(step), num(mm["loss"]), num(mm["energy_mae"]), num(mm["energy_rmse"]),
             num(mm["force_mae"]), num(mm["force_rmse"])});
    m.artifacts.push_back("validation.csv");

    if (!o.baseline.empty()) {
      const auto base = read_force_mae(join_path(o.baseline, "validation.csv"));
      std::vector<double> b, g;
      std::vector<std::size_t> steps;
      for (std::size_t i = 0; i < result.valid_steps.size(); ++i)
        if (auto it = base.find(result.valid_steps[i]); it != base.end()) {
          steps.push_back(result.valid_steps[i]);
          b.push_back(it->second);
          g.push_back(result.valid_force_mae[i]);
        }
      const auto ratio = validation_ratio(b, g);
      CsvWriter r(join_path(o.out, "validation_ratio.csv"),
                  {"step", "baseline_force_mae", "force_mae", "ratio_percent"});
      for (std::size_t i = 0; i < steps.size(); ++i)
        r.row({std::to_string(steps[i]), num(b[i]), num(g[i]), num(ratio[i])});
      m.artifacts.push_back("validation_ratio.csv");
    }
    ctx.out << "validation force MAE: " << num(result.valid_force_mae.front()) << " -> "
            << num(result.valid_force_mae.back()) << " kcal/mol/A\n";
  }
  m.finished = utc_now();
  write_manifest(o.out, m);
  if (diverged) throw CommandFailed(failure + "; last good parameters saved");
}

}  // namespace

void add_train_command(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<TrainOptions>();
  CLI::App* sub = app.add_subcommand("train", "Fit a model to labelled structures");
  sub->add_option("--data", o->data, "Labelled extxyz file, synth:morse or synth:trimer");
  sub->add_option("--n", o->n, "Synthetic sample count")->check(CLI::PositiveNumber);
  sub->add_option("--noise-temp", o->noise_temp, "Synthetic sampling temperature (K)");
  sub->add_option("--init", o->init, "Start from this checkpoint instead of fresh weights");
  add_model_flags(sub, o->flags, false);
  auto& t = o->train;
  sub->add_option("--steps", t.steps, "Optimizer steps");
  sub->add_option("--batch-size", t.batch_size, "Configurations per step");
  sub->add_option("--lr", t.learning_rate, "Initial learning rate");
  sub->add_option("--final-lr-ratio", t.final_lr_ratio, "Final / initial learning rate (exponential decay)");
  sub->add_option("--lambda-e", t.lambda_e, "Energy loss weight");
  sub->add_option("--lambda-f", t.lambda_f, "Force loss weight");
  sub->add_option("--valid-every", t.valid_every, "Steps between validations");
  sub->add_option("--seed", t.seed, "Seed for data, splits and batch order");
  sub->add_option("--baseline", o->baseline, "Earlier run directory to compare against (validation ratio)");
  sub->add_option("--out", o->out, "Output directory");
  add_common_options(sub, ctx);
  sub->callback([sub, o, &ctx] { run_train(*sub, ctx, *o); });
}

}  // namespace mara::cli
