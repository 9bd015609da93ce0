// csck_lab <solve|verify|identities|local|report> --config PATH [--out DIR] [--seed INT]

#include "CLI11.hpp"

#include "csck/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for the coupled cscK system on flat complex tori"};
  app.require_subcommand(1);
  std::string config;
  std::string out;
  std::int64_t seed = -1;
  for (const auto& mode : csck::run_modes()) {
    auto* sub = app.add_subcommand(mode, "run in " + mode + " mode");
    sub->add_option("--config", config, "configuration file")->required();
    sub->add_option("--out", out, "output directory (default: out)");
    sub->add_option("--seed", seed, "overrides [lattice] seed")->check(CLI::NonNegativeNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  csck::RunConfig cfg;
  try {
    cfg = csck::load_config(config);
  } catch (const csck::ConfigError& e) {
    std::cerr << "config error: " << config << ": " << e.what() << '\n';
    return 2;
  }
  cfg.mode = app.get_subcommands().front()->get_name();
  if (!out.empty()) cfg.out = out;
  if (seed >= 0) cfg.seed = std::uint64_t(seed);
  return csck::run_and_write(cfg);
}
