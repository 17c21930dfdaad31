#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pmed/cli.hpp"

namespace {

int fail(pmed::ErrorCode code, const std::string& msg) {
  std::string line = msg;
  for (char& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "error: " << pmed::to_string(code) << ": " << line << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Porous medium equation with drift: solver and verification lab"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  for (const char* name : {"simulate", "equilibrium", "verify-barriers", "compare", "convergence"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment description")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(pmed::ErrorCode::Config, e.what());
  }

  const auto command = pmed::cli::parse_command(app.get_subcommands().front()->get_name());
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) return fail(pmed::ErrorCode::Config, "cannot read " + config_path);
    std::ostringstream text;
    text << in.rdbuf();
    const auto cfg = pmed::cli::parse_config(text.str(), command);
    const auto result = pmed::cli::run(cfg);
    pmed::cli::write_outputs(result, out_dir.empty() ? cfg.output.directory : out_dir);
    std::cout << result.summary << '\n';
    return result.exit_code;
  } catch (const pmed::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(pmed::ErrorCode::InvalidInput, e.what());
  }
}
