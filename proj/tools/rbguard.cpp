// rbguard command line: run / validate scenarios, train the MDN estimator,
// convert FALCON exports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "rbguard/error.hpp"
#include "rbguard/mdn.hpp"
#include "rbguard/report.hpp"
#include "rbguard/scenario.hpp"
#include "rbguard/trace_io.hpp"

namespace fs = std::filesystem;
using namespace rbguard;

namespace {

constexpr int exit_ok = 0, exit_config = 1, exit_runtime = 2;

bool is_config_error(errc c) {
  return c == errc::config || c == errc::parse || c == errc::bad_generator_params;
}

fs::path output_root() {
  const char* env = std::getenv("RBGUARD_OUT");
  return env && *env ? fs::path(env) : fs::path("out");
}

int run_scenario(const std::string& arg, bool force_validation, int jobs, bool timing) {
  Scenario s = load_scenario(arg);
  if (force_validation) s.kind = ScenarioKind::validation;
  const fs::path dir = output_root() / s.output_dir;
  auto res = run_experiment(s, dir, {jobs, timing});
  for (const auto& o : res.simulations) {
    std::cout << o.point.tag << ' ' << to_string(o.mode) << " violation:";
    for (double v : o.result.violation) std::cout << ' ' << format9(v);
    std::cout << '\n';
  }
  if (!res.validation.empty()) {
    std::map<int, std::pair<double, std::size_t>> mean;
    for (const auto& r : res.validation) {
      auto& [sum, n] = mean[r.point.cell.t_obs];
      sum += r.v.eps_r;
      ++n;
    }
    for (const auto& [t, sn] : mean)
      std::cout << "t_obs " << t << " mean eps_r " << format9(sn.first / static_cast<double>(sn.second)) << "%\n";
  }
  for (const auto& r : res.complexity)
    std::cout << r.point.tag << " alg2 g=" << format9(r.alg2.objective) << " (" << r.alg2.iterations
              << " evals) brute g=" << format9(r.brute.objective) << " (" << r.enumeration << ")\n";
  std::cout << res.files.size() << " files under " << dir.string() << '\n';
  return exit_ok;
}

int train(const std::string& dataset, const std::string& out_model, mdn::TrainParams p) {
  std::ifstream in(dataset);
  if (!in) throw error(errc::io, "cannot open " + dataset);
  auto rows = mdn::read_dataset(in);
  const int n_services = static_cast<int>(rows[0].labels.size());
  mdn::TrainReport rep;
  auto model = mdn::mdn_train(rows, n_services, p, &rep);
  std::ofstream out(out_model);
  if (!out) throw error(errc::io, "cannot write " + out_model);
  mdn::save_model(out, model);
  std::cout << rows.size() << " rows, " << n_services << " services, best epoch " << rep.best_epoch;
  if (!rep.validation_loss.empty())
    std::cout << ", validation NLL " << format9(rep.validation_loss[static_cast<std::size_t>(rep.best_epoch)]);
  std::cout << '\n';
  return exit_ok;
}

int convert(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw error(errc::io, "cannot open " + in_path);
  auto recs = convert_falcon(in);
  std::ofstream out(out_path);
  if (!out) throw error(errc::io, "cannot write " + out_path);
  write_trace(out, recs);
  std::cout << recs.size() << " records\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rbguard: guaranteed-RB slicing experiments"};
  app.require_subcommand(1);
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool timing = false;
  std::string scenario, dataset, model_out, in_path, out_path, preset_name;

  auto* run_cmd = app.add_subcommand("run", "Run a scenario file or preset");
  run_cmd->add_option("scenario", scenario, "Scenario JSON or preset name")->required();
  run_cmd->add_option("-j,--jobs", jobs, "Worker threads");
  run_cmd->add_flag("--timing", timing, "Record wall-clock runtimes in outputs");

  auto* val_cmd = app.add_subcommand("validate", "Bound-vs-simulation validation of a scenario");
  val_cmd->add_option("scenario", scenario, "Scenario JSON or preset name")->required();
  val_cmd->add_option("-j,--jobs", jobs, "Worker threads");

  mdn::TrainParams tp;
  auto* train_cmd = app.add_subcommand("train-mdn", "Train the MDN estimator on a dataset CSV");
  train_cmd->add_option("dataset", dataset)->required();
  train_cmd->add_option("out_model", model_out)->required();
  train_cmd->add_option("--components", tp.k, "Mixture components")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", tp.epochs)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch", tp.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tp.learning_rate)->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tp.seed);
  train_cmd->add_option("--sigma-max", tp.sigma_max, "Upper clamp on predicted widths (cell size in RBs)")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--label-jitter", tp.label_jitter, "Uniform dequantisation half-width for labels")
      ->check(CLI::NonNegativeNumber);

  auto* conv_cmd = app.add_subcommand("convert-trace", "FALCON export to tti,ue_id,bits,rbs");
  conv_cmd->add_option("in", in_path)->required();
  conv_cmd->add_option("out", out_path)->required();

  auto* show_cmd = app.add_subcommand("show-preset", "Print a built-in scenario");
  show_cmd->add_option("name", preset_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_config;
  }

  try {
    if (*run_cmd) return run_scenario(scenario, false, jobs, timing);
    if (*val_cmd) return run_scenario(scenario, true, jobs, false);
    if (*train_cmd) return train(dataset, model_out, tp);
    if (*conv_cmd) return convert(in_path, out_path);
    if (*show_cmd) {
      std::cout << preset_json(preset_name).dump(2) << '\n';
      return exit_ok;
    }
  } catch (const error& e) {
    std::cerr << "rbguard: " << to_string(e.code()) << ": " << e.what() << '\n';
    return is_config_error(e.code()) ? exit_config : exit_runtime;
  } catch (const std::exception& e) {
    std::cerr << "rbguard: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_ok;
}
