// Command-line front end: dataset simulation, filter runs, the property
// verification suite, and side-by-side filter comparisons.

#include "CLI11.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lio/pipeline.hpp"
#include "lio/verify.hpp"

int main(int argc, char** argv) {
  CLI::App app{"geometric LiDAR-inertial odometry toolkit"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "generate a dataset from a spec file");
  std::string spec_path;
  std::string sim_out;
  std::uint64_t seed = 0;
  sim->add_option("--spec", spec_path, "simulation spec (JSON)")->required();
  sim->add_option("--out", sim_out, "output dataset directory")->required();
  CLI::Option* seed_opt = sim->add_option("--seed", seed, "override the spec seed");

  auto* run = app.add_subcommand("run", "run a filter over a dataset");
  std::string run_config;
  std::string run_out;
  run->add_option("--config", run_config, "run config (JSON)")->required();
  run->add_option("--out", run_out, "output directory for est.csv and report.json")->required();

  auto* verify = app.add_subcommand("verify", "run the property-check suite");
  std::string check_filter;
  verify->add_option("--filter", check_filter, "substring filter on check names");

  auto* compare = app.add_subcommand("compare", "run several configs over one dataset");
  std::vector<std::string> configs;
  std::string compare_out;
  compare->add_option("--config", configs, "run config (repeat per filter)")->required();
  compare->add_option("--out", compare_out, "output comparison file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (sim->parsed()) {
    return lio::cmd_simulate(
        spec_path, sim_out,
        seed_opt->count() > 0 ? std::optional<std::uint64_t>(seed) : std::nullopt);
  }
  if (run->parsed()) return lio::cmd_run(run_config, run_out);
  if (verify->parsed()) return lio::cmd_verify(check_filter);
  if (compare->parsed()) return lio::cmd_compare(configs, compare_out);
  return 2;
}
