#include "persp3d/io.hpp"
#include "persp3d/pipeline.hpp"
#include "persp3d/version.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

// Exit codes: 0 success, 1 check failure, 2 config error, 3 data error.
enum ExitCode { kOk = 0, kCheckFailure = 1, kConfigError = 2, kDataError = 3 };

std::string join_command(int argc, char** argv) {
  std::ostringstream os;
  for (int i = 0; i < argc; ++i) os << (i ? " " : "") << argv[i];
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace persp3d;

  CLI::App app{"Perspective-point geometry toolkit for monocular 3D box experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  const std::string command = join_command(argc, argv);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic scene dataset");
  std::string gen_config, gen_out;
  std::optional<std::uint64_t> gen_seed;
  std::optional<int> gen_count;
  gen->add_option("--config", gen_config, "Generator config JSON")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Override the config seed");
  gen->add_option("--count", gen_count, "Override the number of scenes");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit boxes to the observations of a dataset");
  std::string fit_dataset, fit_out, fit_config;
  int fit_jobs = 1;
  std::optional<double> fit_noise;
  std::optional<std::uint64_t> fit_seed;
  bool fit_traces = false;
  fit->add_option("--dataset", fit_dataset, "Dataset directory")->required();
  fit->add_option("--out", fit_out, "Output directory")->required();
  fit->add_option("--config", fit_config, "Fit config JSON (defaults when omitted)");
  fit->add_option("--jobs", fit_jobs, "Worker threads")->check(CLI::PositiveNumber);
  fit->add_option("--noise", fit_noise, "Override the dataset observation noise");
  fit->add_option("--seed", fit_seed, "Override the observation/init seed");
  fit->add_flag("--traces", fit_traces, "Write per-object loss traces");

  // eval
  auto* eval = app.add_subcommand("eval", "Score detections against a dataset");
  std::string eval_dets, eval_dataset, eval_out;
  double eval_thr = 0.15;
  bool eval_svg = false;
  eval->add_option("--dets", eval_dets, "Detections JSON")->required();
  eval->add_option("--dataset", eval_dataset, "Dataset directory")->required();
  eval->add_option("--out", eval_out, "Output directory")->required();
  eval->add_option("--iou-threshold", eval_thr, "Match threshold");
  eval->add_flag("--svg", eval_svg, "Also plot PR curves as SVG");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Verify loss gradients by finite differences");
  std::uint64_t gc_seed = 7;
  std::string gc_out;
  int gc_configs = 100;
  bool gc_bug = false;
  gc->add_option("--seed", gc_seed, "Sampling seed");
  gc->add_option("--out", gc_out, "Optional report JSON path");
  gc->add_option("--configs", gc_configs, "Configurations per loss")->check(CLI::PositiveNumber);
  gc->add_flag("--self-test-bug", gc_bug, "Corrupt one gradient to prove the check fails")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (gen->parsed()) {
      SynthConfig cfg = synth_config_from_json(load_config_file(gen_config));
      if (gen_seed) cfg.seed = *gen_seed;
      if (gen_count) {
        if (*gen_count < 0) throw ConfigError("gen: --count must be >= 0");
        cfg.num_scenes = *gen_count;
      }
      const GenResult res = run_gen(cfg, gen_out, command, hash_file(gen_config));
      std::cout << "wrote " << res.scene_paths.size() << " scenes to " << gen_out << "\n";
      return kOk;
    }
    if (fit->parsed()) {
      FitRunConfig cfg;
      std::string config_hash = "none";
      if (!fit_config.empty()) {
        cfg = fit_run_config_from_json(load_config_file(fit_config));
        config_hash = hash_file(fit_config);
      }
      if (fit_traces) cfg.write_traces = true;
      const FitRunResult res = run_fit(fit_dataset, cfg, fit_out, fit_jobs, fit_noise, fit_seed,
                                       command, config_hash);
      std::cout << "fitted " << res.detections.size() << " objects (" << res.failures
                << " failures) -> " << res.detections_path.string() << "\n";
      return kOk;
    }
    if (eval->parsed()) {
      const EvalRunResult res = run_eval(eval_dets, eval_dataset, eval_out, eval_thr, eval_svg,
                                         command, hash_file(eval_dets));
      std::printf("mAP@%.2f = %.4f over %zu classes\n", eval_thr, res.result.map,
                  res.result.per_class.size());
      for (const auto& [cls, series] : res.result.per_class) {
        std::printf("  class %d: AP = %.4f (%d gt)\n", cls, series.ap,
                    res.result.gt_counts.at(cls));
      }
      return kOk;
    }
    if (gc->parsed()) {
      const GradCheckReport report = run_gradcheck(gc_seed, gc_configs, gc_bug);
      Json entries = Json::object();
      for (const auto& e : report.entries) {
        std::printf("%-18s max relative error %.3e (threshold %.0e)\n", e.name.c_str(),
                    e.max_rel_error, report.threshold);
        entries[e.name] = e.max_rel_error;
      }
      if (!gc_out.empty()) {
        save_json(gc_out, Json{{"schema", 1}, {"seed", gc_seed}, {"threshold", report.threshold},
                               {"max_rel_error", entries}, {"pass", report.pass}});
      }
      std::printf("gradcheck: %s\n", report.pass ? "PASS" : "FAIL");
      return report.pass ? kOk : kCheckFailure;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailure;
  }
  return kOk;
}
