#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sigdistill/error.hpp"
#include "sigdistill/experiment.hpp"

namespace fs = std::filesystem;
using namespace sigdistill;

namespace {

struct Common {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<std::string> method;
  std::vector<std::string> sets;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_method) {
  cmd->add_option("--config", c.config, "experiment manifest (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "seed for generation, distillation and evaluation");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--set", c.sets, "override a manifest value, e.g. --set distill.eta=0.01");
  if (with_method) cmd->add_option("--method", c.method, "random, dm or mdm");
  cmd->add_flag("--force", c.force, "replace existing outputs");
  cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
}

Manifest resolve(const Common& c) {
  std::vector<std::string> overrides = c.sets;
  if (c.method) overrides.push_back("method=" + *c.method);
  if (c.seed)
    for (const char* block : {"gen", "distill", "eval"})
      overrides.push_back(std::string(block) + ".seed=" + std::to_string(*c.seed));
  Manifest m = c.config ? load_manifest(*c.config, overrides) : parse_manifest("{}", "<defaults>", overrides);
  if (c.out) m.output_dir = *c.out;
  return m;
}

RunOptions options(const Common& c) {
  RunOptions o;
  o.force = c.force;
  o.out = &std::cout;
  o.log = c.quiet ? nullptr : &std::cerr;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signal dataset distillation: generate data, distill, evaluate and plot."};
  app.require_subcommand(1);

  Common gen, distill, eval, crossarch;
  add_common(app.add_subcommand("gen", "generate train.sigds and test.sigds"), gen, false);
  add_common(app.add_subcommand("distill", "write synth_<method>_<spc>.sigds and loss.csv"), distill, true);
  add_common(app.add_subcommand("eval", "train classifiers on each synthetic set and report accuracy"), eval, false);
  add_common(app.add_subcommand("crossarch", "distill on some architectures, evaluate on others"), crossarch, false);

  auto* plot = app.add_subcommand("plot", "draw I/Q records and their magnitude spectra as SVG");
  PlotRequest req;
  std::optional<fs::path> compare;
  bool plot_force = false;
  plot->add_option("--dataset", req.dataset, "SIGDS file to draw from")->required();
  plot->add_option("--class", req.class_name, "class name, e.g. QPSK")->required();
  plot->add_option("--out", req.out, "output SVG file")->required();
  plot->add_option("--compare", compare, "second SIGDS file drawn below, e.g. a synthetic set");
  plot->add_option("--records", req.records, "records per dataset")->check(CLI::PositiveNumber);
  plot->add_flag("--force", plot_force, "replace an existing figure");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (app.got_subcommand("gen")) {
      cmd_gen(resolve(gen), options(gen));
    } else if (app.got_subcommand("distill")) {
      cmd_distill(resolve(distill), options(distill));
    } else if (app.got_subcommand("eval")) {
      cmd_eval(resolve(eval), options(eval));
    } else if (app.got_subcommand("crossarch")) {
      cmd_crossarch(resolve(crossarch), options(crossarch));
    } else if (app.got_subcommand("plot")) {
      req.compare = compare;
      RunOptions o;
      o.force = plot_force;
      o.out = &std::cout;
      cmd_plot(req, o);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
