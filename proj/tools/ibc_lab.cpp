#include <Eigen/Core>

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ibc/cli/run.hpp"

int main(int argc, char** argv) {
  using namespace ibc::cli;
  CLI::App app{"Interior-boundary condition experiments"};
  std::string config_path, out_dir;
  std::int64_t seed = -1;
  int threads = 1;
  app.add_option("--config", config_path, "config file (key = value)")->required();
  app.add_option("--out", out_dir, "output directory, overrides output.dir");
  app.add_option("--seed", seed, "seed, overrides the config")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_config;
  }
  Eigen::setNbThreads(threads);

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot read config " << config_path << "\n";
    return exit_config;
  }
  std::stringstream text;
  text << in.rdbuf();
  ExperimentConfig cfg;
  try {
    cfg = parse_config(text.str());
  } catch (const ConfigError& e) {
    for (const auto& v : e.violations()) std::cerr << config_path << ": " << v << "\n";
    return exit_config;
  }
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (!out_dir.empty()) cfg.output_dir = out_dir;

  const auto r = run_command(cfg);
  if (r.exit_code != exit_ok) {
    std::cerr << "error: " << r.error << "\n";
    return r.exit_code;
  }
  for (const auto& f : r.manifest["files"])
    std::cout << f["sha256"].get<std::string>() << "  " << f["path"].get<std::string>() << "\n";
  std::cout << "wrote " << cfg.output_dir << "/manifest.json\n";
  return exit_ok;
}
