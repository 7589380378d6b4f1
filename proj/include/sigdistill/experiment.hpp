#pragma once

// Experiment manifests and the commands that run them. A manifest is a JSON
// file with optional blocks:
//
//   {
//     "output_dir": "runs/desk",
//     "method": "mdm",                       // random | dm | mdm
//     "gen": { "schemes": [...], "n_per_class": 1250, "samples_per_record": 128,
//              "samples_per_symbol": 8, "snr_db_min": 10, "snr_db_max": 18,
//              "snr_db_step": 2, "test_fraction": 0.2, "seed": 1 },
//     "data": { "train": "...", "test": "..." },   // default: output_dir/{train,test}.sigds
//     "distill": { "iterations", "eta", "alpha", "spc", "real_batch_per_class",
//                  "arch", "seed", "normalize_spectrum", "report_every" },
//     "eval": { "arch", "lr", "momentum", "batch_size", "epochs", "n_runs", "seed",
//               "methods": ["random", "dm", "mdm"] },
//     "crossarch": { "distill_archs": [...], "eval_archs": [...] }
//   }
//
// Unknown keys are errors. Relative paths resolve against the manifest's
// directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sigdistill/distill.hpp"
#include "sigdistill/eval.hpp"
#include "sigdistill/siggen.hpp"

namespace sigdistill {

enum class Method { random, dm, mdm };
std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct Manifest {
  GenConfig gen;
  double test_fraction = 0.2;
  DistillConfig distill;
  EvalConfig eval;
  Method method = Method::mdm;
  std::vector<Method> eval_methods{Method::random, Method::dm, Method::mdm};
  std::vector<Arch> crossarch_distill{Arch::alexnet1d, Arch::vgg_lite};
  std::vector<Arch> crossarch_eval{Arch::alexnet1d, Arch::cnn2, Arch::vgg_lite, Arch::resnet1d_lite};
  std::filesystem::path output_dir = "runs/default";
  std::optional<std::filesystem::path> train_path;
  std::optional<std::filesystem::path> test_path;

  // Defaults for the desk experiment: 1250 records per class split 4:1.
  Manifest();

  std::filesystem::path resolved_train() const;
  std::filesystem::path resolved_test() const;
  // The distill config with method applied (dm forces alpha = 0).
  DistillConfig effective_distill() const;
  // Every field, fully resolved, as JSON text with a trailing newline.
  std::string to_json() const;
  void validate() const;
};

// Parses manifest text. Errors are ParseError(config) with "<source>:<line>:"
// prefixed. `overrides` are "dotted.key=value" assignments applied before
// typing, with JSON values ("0.5", "true", "[\"cnn2\"]") or bare strings.
Manifest parse_manifest(std::string_view text, const std::string& source = "<manifest>",
                        const std::vector<std::string>& overrides = {},
                        const std::filesystem::path& base_dir = {});
Manifest load_manifest(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

struct RunOptions {
  bool force = false;
  std::ostream* out = nullptr;  // tables and summaries
  std::ostream* log = nullptr;  // progress
};

std::string synth_filename(Method m, std::size_t spc);
std::string eval_filename(Arch a, std::size_t spc);
std::string crossarch_filename(Arch a);
inline constexpr const char* kLossFilename = "loss.csv";
inline constexpr const char* kManifestCopy = "manifest.json";

// Each command writes a resolved manifest copy into output_dir and refuses to
// replace existing outputs unless opts.force is set.
void cmd_gen(const Manifest& m, const RunOptions& opts);
// Returns the path of the written synthetic set.
std::filesystem::path cmd_distill(const Manifest& m, const RunOptions& opts);

struct EvalRow {
  Method method;
  EvalResult result;
};
std::vector<EvalRow> cmd_eval(const Manifest& m, const RunOptions& opts);
CrossArchMatrix cmd_crossarch(const Manifest& m, const RunOptions& opts);

struct PlotRequest {
  std::filesystem::path dataset;
  std::string class_name;
  std::filesystem::path out;
  std::optional<std::filesystem::path> compare;  // drawn as the bottom row
  std::size_t records = 1;
};
void cmd_plot(const PlotRequest& req, const RunOptions& opts);

// CSV helpers shared with tests: shortest round-trip formatting.
std::string format_number(double v);
std::string loss_csv(const std::vector<LossReport>& reports);

}  // namespace sigdistill
