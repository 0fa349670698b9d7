// solidtex: synthesize 3D microstructure volumes from a 2D exemplar and
// evaluate them (porosity, particle sizes, GLCM).
//
//   solidtex synth|eval|compare|slice --config <file> [--seed N] [--out PATH]

#include <iostream>

#include <CLI11.hpp>

#include "solidtex/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Solid texture synthesis of 3D microstructures from a 2D exemplar"};
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  app.add_option("command", command, "synth | eval | compare | slice")
      ->required()
      ->check(CLI::IsMember({"synth", "eval", "compare", "slice"}));
  app.add_option("--config", config_path, "run configuration (key = value lines)")->required();
  app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--out", out, "override the configured output path");
  app.add_option("--threads", threads, "override the configured worker count");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  solidtex::RunConfig config;
  try {
    config = solidtex::load_config(config_path);
  } catch (const solidtex::Error& e) {
    std::cerr << "error: category=" << e.category_name() << " message=" << e.what() << "\n";
    return static_cast<int>(e.category());
  }
  if (seed)
    config.synthesis.seed = *seed;
  if (out)
    config.output = *out;
  if (threads)
    config.synthesis.threads = *threads;
  return solidtex::run(*solidtex::parse_command(command), config, std::cout, std::cerr);
}
