#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "internal.hpp"
#include "json.hpp"
#include "mara/checkpoint.hpp"
#include "mara/errors.hpp"
#include "mara/kernels.hpp"

namespace mara::cli {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config;
  j["seed"] = seed;
  j["artifacts"] = artifacts;
  j["started"] = started;
  j["finished"] = finished;
  return j.dump(2) + "\n";
}

void write_manifest(const std::string& dir, const RunManifest& m) {
  std::ofstream f(join_path(dir, "manifest.json"));
  if (!f) throw std::runtime_error("cannot write manifest in " + dir);
  f << m.to_json();
}

AtomicConfiguration load_system(const std::string& spec) {
  if (spec.rfind("synth:", 0) == 0) {
    const Potential kind = parse_potential(spec.substr(6));
    const PotentialParams p;
    AtomicConfiguration c;
    if (kind == Potential::morse) {
      c.species = {1, 1};
      c.positions = {{0, 0, 0}, {0, 0, p.r0}};
    } else {
      const double th = p.theta0_deg * std::numbers::pi / 180.0;
      c.species = {8, 1, 1};
      c.positions = {{0, 0, 0}, {p.r0, 0, 0}, {p.r0 * std::cos(th), p.r0 * std::sin(th), 0}};
    }
    return c;
  }
  std::string path = spec;
  std::size_t frame = 0;
  if (const auto at = spec.rfind('@'); at != std::string::npos) {
    path = spec.substr(0, at);
    try {
      frame = std::stoul(spec.substr(at + 1));
    } catch (const std::exception&) {
      throw InvalidArgument("bad frame index in '" + spec + "'");
    }
  }
  const Dataset d = read_extxyz_file(path, false);
  if (frame >= d.size())
    throw InvalidArgument(path + " has " + std::to_string(d.size()) + " frames; frame " + std::to_string(frame) +
                          " requested");
  return d.samples[frame];
}

ModelConfig ModelFlags::to_config(std::vector<int> species) const {
  ModelConfig c;
  c.species = std::move(species);
  c.channels = channels;
  c.layers = layers;
  c.l_max = l_max;
  c.n_bessel = n_bessel;
  c.cutoff = cutoff;
  c.n_theta = n_theta;
  c.n_phi = n_phi;
  c.attn_dim = attn_dim;
  c.field_mode = FieldMode::parse(field_mode);
  c.gating = !no_gating;
  c.attention.positional_encoding = !no_positional_encoding;
  c.attention.learnable = !freeze_projections;
  c.attention.gate = parse_gate_activation(gate);
  c.attention.heads = heads;
  c.validate();
  return c;
}

void add_model_flags(CLI::App* app, ModelFlags& f, bool random_model_options) {
  auto g = "Model";
  app->add_option("--channels", f.channels, "Feature channels")->group(g);
  app->add_option("--layers", f.layers, "Message-passing layers")->group(g);
  app->add_option("--l-max", f.l_max, "Highest spherical-harmonic order")->group(g);
  app->add_option("--n-bessel", f.n_bessel, "Radial basis size")->group(g);
  app->add_option("--cutoff", f.cutoff, "Neighbour cutoff (A)")->group(g);
  app->add_option("--ntheta", f.n_theta, "Attention grid: polar points")->group(g);
  app->add_option("--nphi", f.n_phi, "Attention grid: azimuthal points")->group(g);
  app->add_option("--attn-dim", f.attn_dim, "Attention width")->group(g);
  app->add_option("--heads", f.heads, "Attention heads")->group(g);
  app->add_option("--field-mode", f.field_mode, "Grid-field features: scalar or rbf(<n>)")->group(g);
  app->add_option("--gate", f.gate, "Gate activation: logistic or sinusoidal")->group(g);
  app->add_flag("--no-positional-encoding", f.no_positional_encoding, "Drop grid positional embeddings")->group(g);
  app->add_flag("--freeze-projections", f.freeze_projections, "Keep the six attention projections fixed")->group(g);
  app->add_flag("--no-gating", f.no_gating, "Plain backbone without attention gates")->group(g);
  app->add_option("--model-seed", f.model_seed, "Seed for fresh weights")->group(g);
  if (random_model_options)
    app->add_flag("--random-gate", f.random_gate, "Random (not zero) gate weights for --random-model")->group(g);
}

ModelState obtain_model(const std::string& checkpoint, bool random_model, const ModelFlags& flags,
                        const std::vector<int>& species) {
  if (!checkpoint.empty() && random_model) throw InvalidArgument("--checkpoint and --random-model are exclusive");
  if (!checkpoint.empty()) return load_checkpoint(checkpoint).state;
  if (!random_model) throw InvalidArgument("need --checkpoint or --random-model");
  return ModelState::random(flags.to_config(species), flags.model_seed, flags.random_gate);
}

Dataset load_data(const std::string& spec, std::size_t n, std::uint64_t seed, double noise_temp) {
  if (spec.rfind("synth:", 0) == 0) return synth_dataset(parse_potential(spec.substr(6)), n, seed, noise_temp);
  Dataset d = read_extxyz_file(spec, true);
  for (const auto& s : d.samples)
    if (!s.forces) throw SchemaError(spec + ": every frame needs forces");
  assign_splits(d, seed);
  return d;
}

void prepare_dir(const std::string& dir) { std::filesystem::create_directories(dir); }

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : file_(path), width_(header.size()) {
  if (!file_) throw std::runtime_error("cannot write " + path);
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw std::logic_error("CSV row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) file_ << (i ? "," : "") << cells[i];
  file_ << '\n';
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0, pos = 0;
  auto trim = [](std::string_view v) {
    const auto b = v.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string_view{};
    return v.substr(b, v.find_last_not_of(" \t\r") - b + 1);
  };
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const auto key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    out.emplace_back(std::string(key), std::string(value));
  }
  return out;
}

std::map<std::string, std::string> option_snapshot(const CLI::App& app) {
  std::map<std::string, std::string> out;
  for (const CLI::Option* o : app.get_options()) {
    std::string name = o->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    std::string value;
    if (o->count() > 0) {
      const auto& r = o->results();
      for (std::size_t i = 0; i < r.size(); ++i) value += (i ? " " : "") + r[i];
    } else {
      value = o->get_default_str();
    }
    out[name] = value;
  }
  return out;
}

void add_common_options(CLI::App* sub, Context& ctx) {
  sub->add_option("--config", ctx.config_file, "Flat key = value file with option defaults");
  sub->add_option("--kernels", ctx.kernels, "Kernel variant: auto, scalar, avx2 or neon");
  sub->add_option("--threads", ctx.threads, "Worker threads (1 = bit-reproducible reference)")
      ->check(CLI::PositiveNumber);
}

void apply_kernels(const Context& ctx) {
  if (ctx.kernels == "auto") return;
  kernels::set_backend(kernels::parse_backend(ctx.kernels));
}

RunManifest begin_manifest(const CLI::App& sub, const Context& ctx, std::uint64_t seed) {
  RunManifest m;
  m.command = sub.get_name();
  m.argv = ctx.argv;
  m.config = option_snapshot(sub);
  m.config["kernels.active"] = std::string(kernels::backend_name(kernels::active().backend));
  m.seed = seed;
  m.started = utc_now();
  return m;
}

}  // namespace mara::cli
