// Command-line driver: `apc render ...` and `apc bench ...`.

#include <apc/cli.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

namespace {

// Flags that map one-to-one onto config keys. Values are applied through the
// config parser so flags and files accept identical syntax.
const std::map<std::string, std::string> kFlagKeys = {
    {"scene", "scene"},
    {"ranks", "ranks"},
    {"width", "width"},
    {"height", "height"},
    {"orbit", "orbit"},
    {"orbit-radius", "orbit_radius"},
    {"orbit-elevation", "orbit_elevation"},
    {"step", "step"},
    {"moment-bias", "moment_bias"},
    {"overestimation", "overestimation"},
    {"absorbance-max", "absorbance_max"},
    {"algorithms", "algorithms"},
    {"out", "out"},
    {"seed", "seed"},
    {"background", "background"},
    {"resolution", "scene.resolution"},
    {"shells", "scene.shells"},
    {"threads", "threads"},
    {"sweep", "sweep"},
};

struct CommandFlags {
  std::map<std::string, std::string> values;
  std::string config_path;
  bool compare{false};
  bool check{false};
};

void add_flags(CLI::App* cmd, CommandFlags& flags, bool with_sweep) {
  for (const auto& [flag, key] : kFlagKeys) {
    if (flag == "sweep" && !with_sweep) continue;
    cmd->add_option("--" + flag, flags.values[flag], "config key '" + key + "'");
  }
  cmd->add_option("--config", flags.config_path, "key=value config file; flags override its values");
  cmd->add_flag("--compare", flags.compare, "write quality rows and diff images for algorithm pairs");
  cmd->add_flag("--check", flags.check, "exit with status 2 when a comparison misses its threshold");
}

apc::RunConfig resolve_config(const CLI::App* cmd, const CommandFlags& flags) {
  apc::RunConfig config;
  if (!flags.config_path.empty()) config = apc::parse_run_config(apc::read_file(flags.config_path));
  for (const auto& [flag, key] : kFlagKeys) {
    const auto it = flags.values.find(flag);
    if (it == flags.values.end()) continue;
    if (cmd->count("--" + flag) > 0) apc::apply_config_value(config, key, it->second);
  }
  if (flags.compare) config.compare = true;
  if (flags.check) config.check = true;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment-based distributed volume compositing: render scenes, compare pipelines, count traffic"};
  app.require_subcommand(1);

  CommandFlags render_flags;
  CLI::App* render = app.add_subcommand("render", "render a scene with the requested algorithms");
  add_flags(render, render_flags, false);

  CommandFlags bench_flags;
  CLI::App* bench = app.add_subcommand("bench", "sweep rank counts and report communication and timings");
  add_flags(bench, bench_flags, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (render->parsed()) return apc::cmd_render(resolve_config(render, render_flags), std::cout);
    if (bench->parsed()) return apc::cmd_bench(resolve_config(bench, bench_flags), std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return apc::kExitError;
  }
  return apc::kExitError;
}
