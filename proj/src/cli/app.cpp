#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "internal.hpp"
#include "mara/errors.hpp"
#include "mara/trainer.hpp"

namespace mara::cli {

namespace {

/// Appends `--key value` for every config-file entry not given on the command
/// line. Unknown keys are errors.
void merge_config_file(CLI::App& app, std::vector<std::string>& args) {
  auto first = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
  if (first == args.end()) return;
  CLI::App* sub = app.get_subcommand_no_throw(*first);
  if (!sub) return;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return;
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  std::vector<std::string> extra;
  for (const auto& [key, value] : parse_config_text(ss.str())) {
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (!opt || key == "config") throw InvalidArgument(path + ": unknown key '" + key + "' for " + sub->get_name());
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    extra.push_back(flag + "=" + value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err, args};
  CLI::App app{"Gated equivariant force field: grids, equivariance checks, training, MD and gate maps", "mara"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  add_grid_command(app, ctx);
  add_equivariance_command(app, ctx);
  add_train_command(app, ctx);
  add_md_command(app, ctx);
  add_attention_map_command(app, ctx);
  add_eval_command(app, ctx);

  try {
    std::vector<std::string> full = args;
    merge_config_file(app, full);
    ctx.argv = args;
    std::vector<std::string> reversed(full.rbegin(), full.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  } catch (const CommandFailed& e) {
    err << "mara: " << e.what() << "\n";
    return 1;
  } catch (const InvalidArgument& e) {
    err << "mara: invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "mara: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mara::cli
