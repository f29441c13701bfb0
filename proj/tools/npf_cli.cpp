#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "npf/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool dump_paths = false;
};

void add_flags(CLI::App* sub, Flags& flags, bool config_required) {
  auto* opt = sub->add_option("--config", flags.config, "experiment config (JSON)");
  if (config_required) opt->required();
  sub->add_option("--seed", flags.seed, "seed override");
  sub->add_option("--out-dir", flags.out_dir, "output directory override");
  sub->add_flag("--dump-paths", flags.dump_paths, "also write per-path CSV dumps");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalization Monte Carlo solver for semilinear PDEs with nonlinear Neumann boundary conditions"};
  app.require_subcommand(1);
  Flags flags;
  add_flags(app.add_subcommand("forward", "coupled penalized vs reflected forward paths"), flags, true);
  add_flags(app.add_subcommand("solve", "u and u^n at the configured query points"), flags, true);
  add_flags(app.add_subcommand("sweep", "penalty sweep |u^n - u| at the query points"), flags, true);
  add_flags(app.add_subcommand("validate", "built-in acceptance suite"), flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : npf::kConfigError;
  }

  npf::RunOptions opts;
  opts.command = app.get_subcommands().front()->get_name();
  opts.seed = flags.seed;
  opts.out_dir = flags.out_dir;
  opts.dump_paths = flags.dump_paths;

  std::optional<std::string> text;
  if (!flags.config.empty()) {
    std::ifstream in(flags.config, std::ios::binary);
    if (!in) {
      std::cerr << "npf: config error: cannot read " << flags.config << '\n';
      return npf::kConfigError;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  return npf::run_experiment(opts, text);
}
