#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mara/checkpoint.hpp"
#include "mara/cli.hpp"
#include "mara/errors.hpp"
#include "mara/metrics.hpp"
#include "mara/trainer.hpp"

namespace fs = std::filesystem;
using namespace mara;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("mara_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Result {
  int code;
  std::string out, err;
};

Result mara_cmd(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream f(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t manifests_in(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().filename() == "manifest.json";
  return n;
}

std::vector<std::vector<double>> param_data(const ModelState& st) {
  std::vector<std::vector<double>> out;
  for_each_param(st.params, [&](const std::string&, const Matrix& m, ParamRole) { out.push_back(m.data); });
  return out;
}

}  // namespace

TEST_CASE("grid command") {
  TempDir tmp;
  auto r = mara_cmd({"grid", "--ntheta", "4", "--nphi", "8", "--out", tmp / "a"});
  REQUIRE(r.code == 0);
  auto rows = read_csv(tmp / "a/grid.csv");
  CHECK(rows.size() == 33);
  CHECK(rows[0] == std::vector<std::string>{"index", "theta", "phi", "x", "y", "z", "weight"});
  CHECK(manifests_in(tmp.path / "a") == 1);

  r = mara_cmd({"grid", "--ntheta", "1", "--nphi", "1", "--out", tmp / "b"});
  REQUIRE(r.code == 0);
  rows = read_csv(tmp / "b/grid.csv");
  REQUIRE(rows.size() == 2);
  CHECK(std::stod(rows[1][6]) == doctest::Approx(4 * std::numbers::pi).epsilon(1e-15));

  // 2 x 2: both polar nodes at theta = pi/4, 3pi/4 are mirror images, so every
  // rule gives each of the four points a quarter of the sphere.
  for (const char* rule : {"fejer", "sine-area"}) {
    r = mara_cmd({"grid", "--ntheta", "2", "--nphi", "2", "--rule", rule, "--out", tmp / "c"});
    REQUIRE(r.code == 0);
    rows = read_csv(tmp / "c/grid.csv");
    REQUIRE(rows.size() == 5);
    for (std::size_t k = 1; k < 5; ++k) CHECK(std::abs(std::stod(rows[k][6]) - std::numbers::pi) < 1e-14);
    CHECK(std::abs(std::stod(rows[1][3]) - std::sqrt(0.5)) < 1e-15);
  }
  const auto q = read_csv(tmp / "c/quadrature.csv");
  CHECK(q[1][0] == "sum_weights");
  CHECK(std::stod(q[1][3]) <= 1e-10);

  CHECK(mara_cmd({"grid", "--ntheta", "0", "--out", tmp / "d"}).code != 0);
  CHECK(mara_cmd({"grid", "--rule", "trapezoid", "--out", tmp / "d"}).code == 2);
  CHECK(mara_cmd({}).code != 0);
  CHECK(mara_cmd({"frobnicate"}).code != 0);
}

TEST_CASE("config file precedence") {
  TempDir tmp;
  std::ofstream(tmp / "run.cfg") << "# grid settings\nntheta = 3\nnphi = 5   # trailing comment\n\n";
  REQUIRE(mara_cmd({"grid", "--config", tmp / "run.cfg", "--out", tmp / "a"}).code == 0);
  CHECK(read_csv(tmp / "a/grid.csv").size() == 16);
  REQUIRE(mara_cmd({"grid", "--config", tmp / "run.cfg", "--nphi", "2", "--out", tmp / "b"}).code == 0);
  CHECK(read_csv(tmp / "b/grid.csv").size() == 7);
  const auto manifest = nlohmann::json::parse(slurp(tmp / "b/manifest.json"));
  CHECK(manifest["config"]["ntheta"] == "3");
  CHECK(manifest["config"]["nphi"] == "2");
  CHECK(manifest["command"] == "grid");

  std::ofstream(tmp / "bad.cfg") << "ntheta = 3\nwidth = 9\n";
  const auto r = mara_cmd({"grid", "--config", tmp / "bad.cfg", "--out", tmp / "c"});
  CHECK(r.code == 2);
  CHECK(r.err.find("width") != std::string::npos);

  CHECK(cli::parse_config_text("a = 1\n b=two words \n#x\n") ==
        std::vector<std::pair<std::string, std::string>>{{"a", "1"}, {"b", "two words"}});
  try {
    cli::parse_config_text("a = 1\n\njunk\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("check-equivariance command") {
  TempDir tmp;
  auto r = mara_cmd({"check-equivariance", "--random-model", "--no-gating", "--rotations", "5", "--out", tmp / "a"});
  REQUIRE(r.code == 0);
  auto rows = read_csv(tmp / "a/equivariance.csv");
  for (const auto& row : rows)
    if (row[1] == "ungated" && row[2] == "energy") CHECK(std::stod(row[4]) < 1e-10);

  r = mara_cmd({"check-equivariance", "--random-model", "--random-gate", "--translation-only", "--rotations", "5",
                "--out", tmp / "b"});
  REQUIRE(r.code == 0);
  for (const auto& row : read_csv(tmp / "b/equivariance.csv"))
    if (row[0] != "grid") CHECK(std::stod(row[4]) < 1e-12);

  r = mara_cmd({"check-equivariance", "--random-model", "--random-gate", "--no-positional-encoding", "--grids",
                "4x8,8x16,16x32", "--rotations", "10", "--out", tmp / "c"});
  REQUIRE(r.code == 0);
  std::vector<double> medians;
  for (const auto& row : read_csv(tmp / "c/equivariance.csv"))
    if (row[1] == "gated" && row[2] == "alpha") medians.push_back(std::stod(row[3]));
  REQUIRE(medians.size() == 3);
  CHECK(medians[1] <= medians[0]);
  CHECK(medians[2] <= medians[1]);

  // Positional embeddings cannot move to another grid.
  CHECK(mara_cmd({"check-equivariance", "--random-model", "--grids", "8x16", "--out", tmp / "d"}).code == 2);
  CHECK(mara_cmd({"check-equivariance", "--out", tmp / "e"}).code == 2);
}

TEST_CASE("train command: zero steps, ablations, paired ratio") {
  TempDir tmp;
  const std::vector<std::string> small = {"--data", "synth:trimer", "--n", "40", "--channels", "6", "--attn-dim",
                                          "4", "--n-bessel", "4", "--l-max", "1", "--batch-size", "4"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a{"train"};
    a.insert(a.end(), small.begin(), small.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return mara_cmd(a);
  };
  REQUIRE(with({"--steps", "0", "--out", tmp / "zero"}).code == 0);
  const auto first = load_checkpoint(tmp / "zero/checkpoint.json");
  REQUIRE(with({"--steps", "0", "--init", tmp / "zero/checkpoint.json", "--out", tmp / "zero2"}).code == 0);
  CHECK(param_data(load_checkpoint(tmp / "zero2/checkpoint.json").state) == param_data(first.state));
  CHECK(first.metadata.at("gradient_strategy") == kGradientStrategy);

  // The four ablation configurations.
  const std::vector<std::vector<std::string>> variants = {
      {}, {"--no-positional-encoding"}, {"--freeze-projections"}, {"--no-positional-encoding", "--freeze-projections"}};
  for (std::size_t v = 0; v < variants.size(); ++v) {
    auto extra = variants[v];
    const std::string dir = tmp / ("ablation" + std::to_string(v));
    extra.insert(extra.end(), {"--steps", "3", "--valid-every", "1", "--out", dir});
    REQUIRE(with(extra).code == 0);
    const auto ck = load_checkpoint(dir + "/checkpoint.json");
    const bool no_pe = std::count(variants[v].begin(), variants[v].end(), "--no-positional-encoding") > 0;
    const bool frozen = std::count(variants[v].begin(), variants[v].end(), "--freeze-projections") > 0;
    CHECK(ck.state.config.attention.positional_encoding == !no_pe);
    CHECK(ck.state.config.attention.learnable == !frozen);
    CHECK(read_csv(dir + "/validation.csv").size() == 5);
    CHECK(manifests_in(dir) == 1);
  }

  REQUIRE(with({"--no-gating", "--steps", "4", "--valid-every", "2", "--out", tmp / "base"}).code == 0);
  REQUIRE(with({"--steps", "4", "--valid-every", "2", "--baseline", tmp / "base", "--out", tmp / "gated"}).code == 0);
  const auto ratio = read_csv(tmp / "gated/validation_ratio.csv");
  REQUIRE(ratio.size() == 4);
  for (std::size_t i = 1; i < ratio.size(); ++i) {
    const double b = std::stod(ratio[i][1]), m = std::stod(ratio[i][2]);
    CHECK(std::stod(ratio[i][3]) == doctest::Approx((b - m) / b * 100).epsilon(1e-12));
  }
  // Step 0 uses identical backbone weights, and the untrained gate halves every message.
  CHECK(ratio[1][0] == "0");

  const std::string log = slurp(tmp / "gated/log.jsonl");
  const auto first_line = nlohmann::json::parse(log.substr(0, log.find('\n')));
  CHECK(first_line.contains("step"));
  CHECK(first_line.contains("split"));
  CHECK(first_line.contains("metric"));
  CHECK(first_line.contains("value"));
}

TEST_CASE("md command") {
  TempDir tmp;
  REQUIRE(mara_cmd({"md", "--potential", "trimer", "--steps", "0", "--out", tmp / "zero"}).code == 0);
  CHECK(parse_extxyz(slurp(tmp / "zero/trajectory.xyz")).size() == 1);
  const std::vector<std::string> args = {"md", "--potential", "morse", "--system", "synth:morse", "--steps", "200",
                                         "--seed", "3", "--frame-every", "20"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out", tmp / "a"});
  b.insert(b.end(), {"--out", tmp / "b"});
  REQUIRE(mara_cmd(a).code == 0);
  REQUIRE(mara_cmd(b).code == 0);
  for (const char* f : {"trajectory.xyz", "thermo.csv", "rdf.csv", "force_stats.jsonl"})
    CHECK(slurp(tmp / (std::string("a/") + f)) == slurp(tmp / (std::string("b/") + f)));
  CHECK(parse_extxyz(slurp(tmp / "a/trajectory.xyz")).size() == 11);
  CHECK(read_csv(tmp / "a/thermo.csv").size() == 202);
  CHECK(manifests_in(tmp.path / "a") == 1);
  const auto manifest = nlohmann::json::parse(slurp(tmp / "a/manifest.json"));
  CHECK(manifest["config"]["dt"] == "1");
  CHECK(manifest["config"]["friction"] == "0.1");
  CHECK(manifest["config"]["temp"] == "500");
  CHECK(manifest["config"]["steps"] == "200");
  CHECK(mara_cmd({"md", "--out", tmp / "c"}).code == 2);
}

TEST_CASE("attention-map command") {
  TempDir tmp;
  std::ofstream(tmp / "aha.xyz") << "3\nenergy=0\nO -1.2 0 0\nH 0 -1 0\nO 1.2 0 0\n";
  auto r = mara_cmd({"attention-map", "--random-model", "--random-gate", "--no-positional-encoding", "--system",
                     tmp / "aha.xyz", "--mode", "radial", "--atom", "1", "--from", "0,-1,0", "--to", "0,1,0",
                     "--steps", "100", "--out", tmp / "radial"});
  REQUIRE(r.code == 0);
  const auto rows = read_csv(tmp / "radial/attention_map.csv");
  std::map<std::string, std::vector<double>> curves;
  for (std::size_t i = 1; i < rows.size(); ++i) curves[rows[i][5]].push_back(std::stod(rows[i][6]));
  REQUIRE(curves.size() == 2);
  for (const auto& [nbr, c] : curves) {
    CAPTURE(nbr);
    REQUIRE(c.size() == 100);
    double asym = 0, spread = 0;
    for (std::size_t k = 0; k < 100; ++k) {
      asym = std::max(asym, std::abs(c[k] - c[99 - k]));
      spread = std::max(spread, std::abs(c[k] - c[0]));
    }
    CHECK(asym < 1e-6);
    CHECK(spread > 1e-8);
  }

  r = mara_cmd({"attention-map", "--random-model", "--system", "synth:trimer", "--mode", "angular", "--center", "0",
                "--probe", "1", "--radius", "1.0", "--grid", "5x8", "--out", tmp / "angular"});
  REQUIRE(r.code == 0);
  const auto ang = read_csv(tmp / "angular/attention_map.csv");
  CHECK(ang.size() == 41);
  for (std::size_t i = 1; i < ang.size(); ++i) CHECK(std::stod(ang[i][5]) == 0.5);
  CHECK(mara_cmd({"attention-map", "--random-model", "--system", "synth:trimer", "--mode", "spiral", "--out",
                  tmp / "x"}).code == 2);
}

TEST_CASE("eval command") {
  TempDir tmp;
  const auto st = ModelState::random(ModelConfig{.species = {1}, .channels = 6, .n_bessel = 4, .attn_dim = 4}, 2);
  save_checkpoint(tmp / "m.json", st);
  REQUIRE(mara_cmd({"eval", "--checkpoint", tmp / "m.json", "--data", "synth:morse", "--n", "25", "--out",
                    tmp / "a"}).code == 0);

  // Oracle: the same metrics from the library on the same data.
  const Dataset d = synth_dataset(Potential::morse, 25, 0);
  std::vector<const AtomicConfiguration*> all;
  for (const auto& s : d.samples) all.push_back(&s);
  const auto e = error_summary(predict_all(st, all), d.samples);
  const auto tf = tail_metrics(e.force_abs);
  std::map<std::pair<std::string, std::string>, double> rec;
  std::istringstream jl(slurp(tmp / "a/metrics.jsonl"));
  for (std::string line; std::getline(jl, line);) {
    const auto j = nlohmann::json::parse(line);
    rec[{j["target"], j["metric"]}] = j["value"];
  }
  for (const char* t : {"energy", "force"})
    for (const char* m : {"mae", "q95", "q99", "max", "rmse"}) CHECK(rec.count({t, m}) == 1);
  CHECK(rec[{"force", "mae"}] == tf.mae);
  CHECK(rec[{"force", "q99"}] == tf.q99);
  CHECK(rec[{"force", "max"}] == tf.max);

  // The model's own predictions as labels give exact zeros.
  REQUIRE(mara_cmd({"eval", "--checkpoint", tmp / "m.json", "--data", tmp / "a/predictions.xyz", "--out",
                    tmp / "b"}).code == 0);
  const auto rows = read_csv(tmp / "b/metrics.csv");
  for (std::size_t i = 1; i < rows.size(); ++i)
    for (std::size_t c = 1; c < rows[i].size(); ++c) CHECK(std::stod(rows[i][c]) == 0.0);
  CHECK(mara_cmd({"eval", "--checkpoint", tmp / "missing.json", "--data", "synth:morse", "--out", tmp / "c"}).code != 0);
}
