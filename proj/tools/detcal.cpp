// Copyright 2026 The detcal Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// detcal: command-line front end for calibration evaluation, post-hoc
// calibration and the toy training demo.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "detcal/calibrate.hpp"
#include "detcal/core.hpp"
#include "detcal/io.hpp"
#include "detcal/losses.hpp"
#include "detcal/metrics.hpp"
#include "detcal/synth.hpp"
#include "detcal/traindemo.hpp"

namespace fs = std::filesystem;
using namespace detcal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::dimension_mismatch:
    case ErrorCode::parse_error:
    case ErrorCode::io_error:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::size_t bins = kEvalBins;
  std::string denominator = "predictions";
  std::string output;
};

void write_json(const fs::path& path, const ordered_json& j) { write_text_file(path, j.dump(2) + "\n"); }

void print_report_row(const MetricReport& r) {
  std::size_t occupied = 0;
  for (const auto& b : r.bins) occupied += b.count > 0 ? 1 : 0;
  std::cout << std::left << std::setw(12) << display_name(r.metric) << std::right << std::setw(12)
            << std::fixed << std::setprecision(6) << r.value << std::setw(10) << r.total_count << std::setw(8)
            << occupied << "/" << r.scheme.total_bins();
  if (r.denominator) std::cout << "  denominator=" << to_string(*r.denominator);
  std::cout << '\n';
}

// ---------------------------------------------------------------- eval
struct EvalOptions {
  std::string input;
  std::string mode = "both";
  std::string features;
};

int cmd_eval(const EvalOptions& o, const GlobalOptions& g, bool denominator_given) {
  if (o.mode != "dominant" && o.mode != "full" && o.mode != "both") throw UsageError("--mode must be dominant, full or both");
  if (o.mode == "dominant" && denominator_given) throw UsageError("--denominator only applies to --mode full/both");
  if (o.mode == "full" && !o.features.empty()) throw UsageError("--features only applies to dominant predictions");
  const auto denominator = parse_denominator(g.denominator);

  auto dataset = read_detections(o.input);
  std::vector<MetricReport> reports;
  ordered_json reliability = ordered_json::array();
  if (o.mode != "full") {
    reports.push_back(compute_ece(dataset, g.bins));
    reports.push_back(compute_d_ece(dataset, parse_scheme_spec(o.features, g.bins, dataset.feature_names())));
    reliability.push_back(reliability_to_json(reliability_data(dataset, g.bins, PredictionMode::dominant), g.bins,
                                              PredictionMode::dominant));
  }
  if (o.mode != "dominant") {
    reports.push_back(compute_full_d_ece(dataset, g.bins, denominator));
    reliability.push_back(
        reliability_to_json(reliability_data(dataset, g.bins, PredictionMode::full), g.bins, PredictionMode::full));
  }

  std::cout << o.input << ": " << dataset.size() << " detections, " << dataset.num_classes() << " classes\n";
  std::cout << std::left << std::setw(12) << "metric" << std::right << std::setw(12) << "value" << std::setw(10)
            << "norm" << std::setw(12) << "bins used" << '\n';
  for (const auto& r : reports) print_report_row(r);

  if (!g.output.empty()) {
    ordered_json doc;
    doc["tool"] = "detcal";
    doc["version"] = kToolVersion;
    doc["command"] = "eval";
    doc["input"] = o.input;
    doc["mode"] = o.mode;
    doc["reports"] = ordered_json::array();
    for (const auto& r : reports) doc["reports"].push_back(report_to_json(r));
    doc["reliability"] = reliability;
    write_json(g.output, doc);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- fit
struct FitOptions {
  std::string input;
  std::string method;
  std::string fit_mode = "dominant";
};

int cmd_fit(const FitOptions& o, const GlobalOptions& g) {
  const auto mode = parse_prediction_mode(o.fit_mode);
  if (o.method == "temperature" && mode != FitMode::dominant) {
    throw UsageError("temperature scaling is fitted on dominant predictions only");
  }
  if (g.output.empty()) throw UsageError("fit needs --output for the calibrator file");

  auto dataset = read_detections(o.input);
  Calibrator calibrator = TemperatureParams{};
  if (o.method == "temperature") {
    calibrator = fit_temperature(dataset);
  } else if (o.method == "platt") {
    calibrator = fit_platt(dataset, mode);
  } else if (o.method == "isotonic") {
    calibrator = fit_isotonic(dataset, mode);
  } else {
    calibrator = fit_histogram(dataset, g.bins, mode);
  }
  CalibratorMetadata meta{o.input, dataset.size(),
                          mode == FitMode::dominant ? dataset.size() : dataset.size() * dataset.num_classes()};
  write_json(g.output, calibrator_to_json(calibrator, meta));

  std::cout << "fitted " << method_name(calibrator) << " (" << o.fit_mode << ") on " << dataset.size()
            << " detections\n";
  if (auto* t = std::get_if<TemperatureParams>(&calibrator)) {
    std::cout << "  T = " << std::setprecision(6) << t->temperature << '\n';
  } else if (auto* p = std::get_if<PlattParams>(&calibrator)) {
    std::cout << "  a = " << std::setprecision(6) << p->a << ", b = " << p->b
              << (p->converged ? "" : "  (not converged)") << '\n';
  } else if (auto* iso = std::get_if<IsotonicMap>(&calibrator)) {
    std::cout << "  " << iso->breakpoints.size() << " steps\n";
  } else {
    std::cout << "  " << std::get<HistogramMap>(calibrator).num_bins() << " bins\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- apply
int cmd_apply(const std::string& input, const std::string& calibrator_path, const GlobalOptions& g) {
  if (g.output.empty()) throw UsageError("apply needs --output for the calibrated detection file");
  auto calibrator = calibrator_from_json(read_json_file(calibrator_path));
  auto dataset = read_detections(input);
  auto calibrated = calibrate_dataset(dataset, calibrator);
  write_detections(calibrated, fs::path(g.output));
  std::cout << "applied " << method_name(calibrator) << " to " << calibrated.size() << " detections\n";
  return kExitOk;
}

// ---------------------------------------------------------------- diagram
int cmd_diagram(const std::string& input, const std::string& mode_name, const GlobalOptions& g) {
  const auto mode = parse_prediction_mode(mode_name);
  if (g.output.empty()) throw UsageError("diagram needs --output for the CSV file");
  auto dataset = read_detections(input);
  auto points = reliability_data(dataset, g.bins, mode);
  std::ostringstream csv;
  write_reliability_csv(points, csv);
  write_text_file(g.output, csv.str());

  std::cout << std::setw(10) << "center" << std::setw(12) << "empirical" << std::setw(12) << "mean_conf"
            << std::setw(10) << "count" << '\n';
  for (const auto& p : points) {
    std::cout << std::fixed << std::setprecision(4) << std::setw(10) << p.bin_center << std::setw(12)
              << p.empirical << std::setw(12) << p.mean_confidence << std::setw(10) << p.count << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- simulate
struct SimulateOptions {
  std::size_t n = 1000;
  std::size_t classes = 3;
  double logit_scale = 2.0;
  std::string sampling = "softmax_categorical";
  std::vector<std::string> features;
  std::string distortion;
};

Distortion parse_distortion(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  auto num = [&](std::size_t i) {
    try {
      return std::stod(parts.at(i));
    } catch (const std::exception&) {
      throw UsageError("bad distortion '" + spec + "'");
    }
  };
  if (!parts.empty() && parts[0] == "temperature" && parts.size() == 2) return TemperatureDistortion{num(1)};
  if (!parts.empty() && parts[0] == "affine" && parts.size() == 3) return AffineDistortion{num(1), num(2)};
  if (!parts.empty() && parts[0] == "sharpen" && parts.size() == 2) return SharpenDistortion{num(1)};
  throw UsageError("distortion must be temperature:T, affine:a:b or sharpen:kappa");
}

int cmd_simulate(const SimulateOptions& o, const GlobalOptions& g) {
  if (g.output.empty()) throw UsageError("simulate needs --output for the detection file");
  SynthConfig cfg{o.n, o.classes, g.seed, o.logit_scale, parse_label_sampling(o.sampling), {}, {}};
  for (const auto& f : o.features) {
    std::vector<std::string> parts;
    std::stringstream ss(f);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw UsageError("--feature must be name:lo:hi");
    try {
      cfg.features.push_back({parts[0], std::stod(parts[1]), std::stod(parts[2])});
    } catch (const std::exception&) {
      throw UsageError("--feature must be name:lo:hi");
    }
  }
  std::optional<Distortion> distortion;
  if (!o.distortion.empty()) distortion = parse_distortion(o.distortion);
  cfg.validate();

  auto dataset = generate_calibrated(cfg);
  if (distortion) dataset = distort(dataset, *distortion);
  write_detections(dataset, fs::path(g.output));
  std::cout << "wrote " << dataset.size() << " detections (" << to_string(cfg.sampling)
            << (o.distortion.empty() ? "" : ", distortion " + o.distortion) << ") to " << g.output << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- split
int cmd_split(const std::string& input, const std::string& cal_out, const std::string& eval_out,
              const GlobalOptions& g) {
  if (cal_out == eval_out) throw UsageError("calibration and evaluation outputs must differ");
  auto dataset = read_detections(input);
  auto [cal, eval] = split_dataset(dataset, g.seed);
  write_detections(cal, fs::path(cal_out));
  write_detections(eval, fs::path(eval_out));
  std::cout << "split " << dataset.size() << " detections: " << cal.size() << " calibration, " << eval.size()
            << " evaluation\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train-demo
struct TrainDemoOptions {
  ToyExperiment experiment;
  TrainConfig train;
  std::string aux = "full_dece";
  std::string base = "focal";
  std::string report;
  bool sweep = false;
};

ordered_json summary_json(const TrainResult& r) {
  const auto& last = r.log.back();
  return {{"heldout_accuracy", last.heldout_accuracy},
          {"heldout_ece", last.heldout_ece},
          {"heldout_full_d_ece", last.heldout_full_d_ece},
          {"final_base_part", last.base_part},
          {"final_aux_part", last.aux_part}};
}

int cmd_train_demo(TrainDemoOptions o, const GlobalOptions& g) {
  if (o.base != "focal" && o.base != "cross_entropy") throw UsageError("--base must be focal or cross_entropy");
  o.train.loss.base = o.base == "focal" ? BaseLoss::focal : BaseLoss::cross_entropy;
  o.train.loss.aux = parse_aux_loss(o.aux);
  o.train.loss.denominator = parse_denominator(g.denominator);
  o.train.seed = g.seed;
  if (o.sweep && o.train.loss.aux == AuxLoss::none) throw UsageError("--sweep needs an auxiliary loss");
  o.train.validate();

  auto result = run_toy_experiment(o.experiment, o.train);
  if (!g.output.empty()) {
    std::ostringstream csv;
    write_epoch_log_csv(result.log, csv);
    write_text_file(g.output, csv.str());
  }

  std::cout << std::setw(6) << "epoch" << std::setw(12) << "base" << std::setw(12) << "aux" << std::setw(10) << "acc"
            << std::setw(10) << "ECE" << std::setw(12) << "FullD-ECE" << '\n';
  for (const auto& e : result.log) {
    std::cout << std::setw(6) << e.epoch << std::fixed << std::setprecision(5) << std::setw(12) << e.base_part
              << std::setw(12) << e.aux_part << std::setw(10) << e.heldout_accuracy << std::setw(10) << e.heldout_ece
              << std::setw(12) << e.heldout_full_d_ece << '\n';
  }

  ordered_json doc;
  doc["tool"] = "detcal";
  doc["version"] = kToolVersion;
  doc["command"] = "train-demo";
  doc["config"] = {{"classes", o.experiment.num_classes}, {"n", o.experiment.n},
                   {"heldout_n", o.experiment.heldout_n}, {"overlap", o.experiment.overlap},
                   {"hidden", o.experiment.hidden_dim},   {"epochs", o.train.epochs},
                   {"batch_size", o.train.batch_size},    {"learning_rate", o.train.learning_rate},
                   {"base", o.base},                       {"gamma", o.train.loss.gamma},
                   {"aux", o.aux},                         {"alpha", o.train.loss.alpha},
                   {"train_bins", o.train.loss.train_bins}, {"seed", g.seed}};
  doc["final"] = summary_json(result);
  if (o.sweep) {
    ordered_json sweep = ordered_json::array();
    std::cout << "\nalpha sweep (" << o.aux << ")\n";
    for (double alpha : o.train.alpha_sweep) {
      auto cfg = o.train;
      cfg.loss.alpha = alpha;
      auto r = run_toy_experiment(o.experiment, cfg);
      auto s = summary_json(r);
      s["alpha"] = alpha;
      sweep.push_back(s);
      const auto& last = r.log.back();
      std::cout << "  alpha=" << std::setw(5) << std::setprecision(1) << alpha << std::setprecision(5)
                << "  acc=" << last.heldout_accuracy << "  ECE=" << last.heldout_ece
                << "  FullD-ECE=" << last.heldout_full_d_ece << '\n';
    }
    doc["alpha_sweep"] = sweep;
  }
  if (!o.report.empty()) write_json(o.report, doc);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detcal: confidence calibration metrics, post-hoc calibrators and calibration-aware training"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kToolVersion));

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for simulate/split/train-demo")->capture_default_str();
  app.add_option("--bins", g.bins, "Confidence bins")->capture_default_str()->check(CLI::PositiveNumber);
  auto* denom_opt = app.add_option("--denominator", g.denominator, "Full D-ECE normaliser")
                        ->check(CLI::IsMember({"predictions", "detections"}))
                        ->capture_default_str();
  app.add_option("-o,--output", g.output, "Output file");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compute ECE, D-ECE and Full D-ECE");
  eval_cmd->add_option("input", eval.input, "Detection file")->required();
  eval_cmd->add_option("--mode", eval.mode, "dominant, full or both")->capture_default_str();
  eval_cmd->add_option("--features", eval.features, "Feature binning for D-ECE: name:bins:lo:hi[,...]");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a post-hoc calibrator");
  fit_cmd->add_option("input", fit.input, "Detection file")->required();
  fit_cmd->add_option("--method", fit.method, "Calibration method")
      ->required()
      ->check(CLI::IsMember({"temperature", "platt", "isotonic", "histogram"}));
  fit_cmd->add_option("--fit-mode", fit.fit_mode, "Fit on dominant or all predictions")
      ->check(CLI::IsMember({"dominant", "full"}))
      ->capture_default_str();

  std::string apply_input, apply_calibrator;
  auto* apply_cmd = app.add_subcommand("apply", "Apply a fitted calibrator");
  apply_cmd->add_option("input", apply_input, "Detection file")->required();
  apply_cmd->add_option("calibrator", apply_calibrator, "Calibrator JSON from 'fit'")->required();

  std::string diagram_input, diagram_mode = "dominant";
  auto* diagram_cmd = app.add_subcommand("diagram", "Reliability-diagram data as CSV");
  diagram_cmd->add_option("input", diagram_input, "Detection file")->required();
  diagram_cmd->add_option("--mode", diagram_mode, "dominant or full")
      ->check(CLI::IsMember({"dominant", "full"}))
      ->capture_default_str();

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic detection file");
  sim_cmd->add_option("--n", sim.n, "Number of detections")->capture_default_str()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--classes", sim.classes, "Number of classes")->capture_default_str()->check(CLI::Range(2, 1000));
  sim_cmd->add_option("--logit-scale", sim.logit_scale, "Std-dev of the logits")->capture_default_str();
  sim_cmd->add_option("--sampling", sim.sampling, "softmax_categorical or sigmoid_bernoulli")
      ->check(CLI::IsMember({"softmax_categorical", "sigmoid_bernoulli", "softmax", "sigmoid"}))
      ->capture_default_str();
  sim_cmd->add_option("--feature", sim.features, "Uniform feature column name:lo:hi (repeatable)");
  sim_cmd->add_option("--distort", sim.distortion, "temperature:T, affine:a:b or sharpen:kappa");

  std::string split_input, split_cal, split_eval;
  auto* split_cmd = app.add_subcommand("split", "Seeded split into calibration and evaluation halves");
  split_cmd->add_option("input", split_input, "Detection file")->required();
  split_cmd->add_option("--calibration-out", split_cal, "Calibration half")->required();
  split_cmd->add_option("--evaluation-out", split_eval, "Evaluation half")->required();

  TrainDemoOptions demo;
  auto* demo_cmd = app.add_subcommand("train-demo", "Train the toy classifier with and without auxiliary losses");
  demo_cmd->add_option("--classes", demo.experiment.num_classes)->capture_default_str()->check(CLI::Range(2, 100));
  demo_cmd->add_option("--n", demo.experiment.n, "Training samples")->capture_default_str();
  demo_cmd->add_option("--heldout-n", demo.experiment.heldout_n, "Held-out samples")->capture_default_str();
  demo_cmd->add_option("--overlap", demo.experiment.overlap, "Cluster std-dev")->capture_default_str();
  demo_cmd->add_option("--hidden", demo.experiment.hidden_dim)->capture_default_str();
  demo_cmd->add_option("--epochs", demo.train.epochs)->capture_default_str();
  demo_cmd->add_option("--batch-size", demo.train.batch_size)->capture_default_str();
  demo_cmd->add_option("--lr", demo.train.learning_rate)->capture_default_str();
  demo_cmd->add_option("--base", demo.base, "focal or cross_entropy")->capture_default_str();
  demo_cmd->add_option("--gamma", demo.train.loss.gamma, "Focal exponent")->capture_default_str();
  demo_cmd->add_option("--aux", demo.aux, "none, dece or full_dece")
      ->check(CLI::IsMember({"none", "dece", "full_dece"}))
      ->capture_default_str();
  demo_cmd->add_option("--alpha", demo.train.loss.alpha, "Auxiliary weight")->capture_default_str();
  demo_cmd->add_option("--train-bins", demo.train.loss.train_bins)->capture_default_str();
  demo_cmd->add_option("--report", demo.report, "Final JSON report");
  demo_cmd->add_flag("--sweep", demo.sweep, "Also run the alpha sweep 0.5,1,2,5,10,20");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*eval_cmd) return cmd_eval(eval, g, denom_opt->count() > 0);
    if (*fit_cmd) return cmd_fit(fit, g);
    if (*apply_cmd) return cmd_apply(apply_input, apply_calibrator, g);
    if (*diagram_cmd) return cmd_diagram(diagram_input, diagram_mode, g);
    if (*sim_cmd) return cmd_simulate(sim, g);
    if (*split_cmd) return cmd_split(split_input, split_cal, split_eval, g);
    if (*demo_cmd) return cmd_train_demo(demo, g);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
