#include <fstream>
#include <ostream>

#include "internal.hpp"
#include "json.hpp"
#include "mara/checkpoint.hpp"
#include "mara/errors.hpp"
#include "mara/metrics.hpp"
#include "mara/trainer.hpp"

namespace mara::cli {

namespace {

struct EvalCommandOptions {
  std::string checkpoint;
  std::string data;
  std::size_t n = 500;
  double noise_temp = 500.0;
  std::uint64_t seed = 0;
  std::string split = "all";
  std::string out = "eval_out";
};

void run_eval(const CLI::App& sub, Context& ctx, const EvalCommandOptions& o) {
  apply_kernels(ctx);
  if (o.checkpoint.empty() || o.data.empty()) throw InvalidArgument("--checkpoint and --data are required");
  const ModelState model = load_checkpoint(o.checkpoint).state;
  const Dataset data = load_data(o.data, o.n, o.seed, o.noise_temp);
  std::vector<const AtomicConfiguration*> subset;
  if (o.split == "all") {
    for (const auto& s : data.samples) subset.push_back(&s);
  } else if (o.split == "train" || o.split == "valid" || o.split == "test") {
    subset = data.subset(o.split == "train" ? Split::train : o.split == "valid" ? Split::valid : Split::test);
  } else {
    throw InvalidArgument("--split must be all, train, valid or test");
  }
  if (subset.empty()) throw InvalidArgument("no structures in split '" + o.split + "'");

  RunManifest m = begin_manifest(sub, ctx, o.seed);
  prepare_dir(o.out);
  const auto pred = predict_all(model, subset, {}, ctx.threads);
  std::vector<AtomicConfiguration> ref;
  for (const auto* s : subset) ref.push_back(*s);
  const ErrorSummary e = error_summary(pred, ref);

  std::ofstream jl(join_path(o.out, "metrics.jsonl"));
  CsvWriter csv(join_path(o.out, "metrics.csv"), {"target", "mae", "q95", "q99", "max", "rmse"});
  auto emit = [&](const char* target, const std::vector<double>& abs_err, double rmse) {
    const TailMetrics t = tail_metrics(abs_err);
    const std::pair<const char*, double> values[] = {
        {"mae", t.mae}, {"q95", t.q95}, {"q99", t.q99}, {"max", t.max}, {"rmse", rmse}};
    for (const auto& [name, v] : values) {
      nlohmann::ordered_json j{{"target", target}, {"metric", name}, {"value", v}, {"n", abs_err.size()}};
      jl << j.dump() << '\n';
    }
    csv.row({target, num(t.mae), num(t.q95), num(t.q99), num(t.max), num(rmse)});
    ctx.out << target << ": MAE " << num(t.mae) << ", Q95 " << num(t.q95) << ", Q99 " << num(t.q99) << ", MAX "
            << num(t.max) << "\n";
  };
  emit("energy", e.energy_abs, e.energy_rmse);
  emit("force", e.force_abs, e.force_rmse);
  write_extxyz_file(join_path(o.out, "predictions.xyz"), pred);
  m.artifacts = {"metrics.jsonl", "metrics.csv", "predictions.xyz"};
  m.finished = utc_now();
  write_manifest(o.out, m);
}

}  // namespace

void add_eval_command(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<EvalCommandOptions>();
  CLI::App* sub = app.add_subcommand("eval", "Energy and force error metrics (MAE, Q95, Q99, MAX)");
  sub->add_option("--checkpoint", o->checkpoint, "Model checkpoint");
  sub->add_option("--data", o->data, "Labelled extxyz file, synth:morse or synth:trimer");
  sub->add_option("--n", o->n, "Synthetic sample count")->check(CLI::PositiveNumber);
  sub->add_option("--noise-temp", o->noise_temp, "Synthetic sampling temperature (K)");
  sub->add_option("--seed", o->seed, "Seed for synthetic data and splits");
  sub->add_option("--split", o->split, "all, train, valid or test");
  sub->add_option("--out", o->out, "Output directory");
  add_common_options(sub, ctx);
  sub->callback([sub, o, &ctx] { run_eval(*sub, ctx, *o); });
}

}  // namespace mara::cli
