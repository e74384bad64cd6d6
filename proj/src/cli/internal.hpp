#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mara/cli.hpp"
#include "mara/dataset.hpp"
#include "mara/model.hpp"

namespace mara::cli {

/// Raised by a command when a checked invariant fails; exit code 1.
class CommandFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;
  std::string kernels = "auto";
  std::string config_file;
  std::size_t threads = 1;
};

/// Architecture and ablation flags shared by train and the random-model paths.
struct ModelFlags {
  std::size_t channels = 32;
  std::size_t layers = 2;
  int l_max = 2;
  std::size_t n_bessel = 8;
  double cutoff = 5.0;
  std::size_t n_theta = 4;
  std::size_t n_phi = 8;
  std::size_t attn_dim = 16;
  std::size_t heads = 1;
  std::string field_mode = "scalar";
  std::string gate = "logistic";
  bool no_positional_encoding = false;
  bool freeze_projections = false;
  bool no_gating = false;
  bool random_gate = false;
  std::uint64_t model_seed = 0;

  ModelConfig to_config(std::vector<int> species) const;
};

void add_model_flags(CLI::App* app, ModelFlags& f, bool random_model_options);

/// --checkpoint, or a fresh model from the flags when --random-model is set.
ModelState obtain_model(const std::string& checkpoint, bool random_model, const ModelFlags& flags,
                        const std::vector<int>& species);

/// `path.xyz` (every frame, labelled) or `synth:<kind>`.
Dataset load_data(const std::string& spec, std::size_t n, std::uint64_t seed, double noise_temp);

/// Creates the directory (and parents).
void prepare_dir(const std::string& dir);
std::string join_path(const std::string& dir, const std::string& name);

/// Shortest round-tripping decimal form.
std::string num(double v);

/// Comma-separated table with a header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream file_;
  std::size_t width_;
};

/// Snapshot of every option of `app` (command line, config file or default).
std::map<std::string, std::string> option_snapshot(const CLI::App& app);

// Command registration. Each adds a subcommand whose callback does the work.
void add_grid_command(CLI::App& app, Context& ctx);
void add_equivariance_command(CLI::App& app, Context& ctx);
void add_train_command(CLI::App& app, Context& ctx);
void add_md_command(CLI::App& app, Context& ctx);
void add_attention_map_command(CLI::App& app, Context& ctx);
void add_eval_command(CLI::App& app, Context& ctx);

/// --config, --kernels and --threads on a subcommand.
void add_common_options(CLI::App* sub, Context& ctx);
/// Applies --kernels; throws CommandFailed if the backend is unavailable.
void apply_kernels(const Context& ctx);

/// Starts a manifest for `sub` with its options already resolved.
RunManifest begin_manifest(const CLI::App& sub, const Context& ctx, std::uint64_t seed);

}  // namespace mara::cli
