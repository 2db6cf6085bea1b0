// trms: command-line front end.
//
//   trms sim       --config scenario.json --out trace.csv
//   trms design    --config scenario.json --out gains.json
//   trms linearize --config scenario.json --out bank.json
//   trms metrics   --trace trace.csv [--config scenario.json]

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trms/trms.hpp"

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw trms::ConfigError("cannot write '" + path + "'");
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const trms::Metrics& m) {
  return {{"rms_pre", {optional_json(m.rms_pre[0]), optional_json(m.rms_pre[1])}},
          {"rms_post", {optional_json(m.rms_post[0]), optional_json(m.rms_post[1])}},
          {"fault_rms", optional_json(m.fault_rms)},
          {"settling_time", {optional_json(m.settling_time[0]), optional_json(m.settling_time[1])}},
          {"saturation_duty", m.saturation_duty}};
}

// Without a config the split point is the first sample carrying a fault.
trms::FaultProfile infer_fault_window(const trms::SimTrace& trace) {
  trms::FaultProfile p;
  for (const auto& s : trace.samples) {
    if (s.f.size() > 0 && s.f.cwiseAbs().maxCoeff() > 0.0) {
      p.kind = trms::FaultKind::step;
      p.t_start = s.t;
      p.t_stop = std::numeric_limits<double>::infinity();
      break;
    }
  }
  return p;
}

int run_sim(const std::string& config, const std::string& out_path) {
  const trms::ScenarioConfig cfg = trms::io::load_scenario(config);
  const auto t0 = std::chrono::steady_clock::now();
  const trms::SimTrace trace = trms::run_scenario(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto out = open_out(out_path);
  trms::write_csv(out, trace);
  const trms::Metrics m = trms::metrics(trace, cfg.fault, cfg.controller.u_limit);
  std::fprintf(stderr, "%zu samples in %.3f s\n", trace.size(), secs);
  std::cerr << metrics_json(m).dump(2) << '\n';
  return 0;
}

int run_design(const std::string& config, const std::string& out_path) {
  const trms::ScenarioConfig cfg = trms::io::load_scenario(config);
  const trms::PreparedScenario prep = trms::prepare_scenario(cfg);
  json doc = trms::io::design_to_json(prep.design);
  doc["bank"] = trms::io::bank_to_json(prep.bank);
  open_out(out_path) << doc.dump(2) << '\n';
  for (std::size_t i = 0; i < prep.bank.size(); ++i) {
    const auto& m = prep.bank.models[i];
    const double ctrl = trms::spectral_abscissa(m.a - m.b * prep.design.ftc.k1[i]);
    const double obs = trms::spectral_abscissa(prep.design.uio.a_bar[i] - prep.design.uio.k2[i] * m.c);
    std::fprintf(stderr, "model %zu (node %+.3f): controller abscissa %.4f, observer abscissa %.4f\n", i,
                 prep.bank.nodes[i], ctrl, obs);
  }
  return 0;
}

int run_linearize(const std::string& config, const std::string& out_path) {
  const trms::ScenarioConfig cfg = trms::io::load_scenario(config);
  const trms::ModelBank bank = cfg.bank.preloaded
                                   ? *cfg.bank.preloaded
                                   : trms::build_bank(cfg.params, cfg.bank.nodes, cfg.bank.sigma, cfg.bank.spec,
                                                      cfg.controller.u_limit);
  open_out(out_path) << trms::io::bank_to_json(bank).dump(2) << '\n';
  return 0;
}

int run_metrics(const std::string& trace_path, const std::string& config) {
  std::ifstream in(trace_path);
  if (!in) throw trms::ConfigError("cannot open '" + trace_path + "'");
  const trms::SimTrace trace = trms::read_csv(in);
  if (trace.empty()) throw trms::ConfigError("trace '" + trace_path + "' has no samples");
  double u_limit = 2.5;
  trms::FaultProfile profile;
  if (!config.empty()) {
    const trms::ScenarioConfig cfg = trms::io::load_scenario(config);
    profile = cfg.fault;
    u_limit = cfg.controller.u_limit;
  } else {
    profile = infer_fault_window(trace);
  }
  std::cout << metrics_json(trms::metrics(trace, profile, u_limit)).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Twin-rotor multi-model fault-tolerant control toolkit"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string trace;

  auto* sim = app.add_subcommand("sim", "Run a closed-loop scenario and write the trace CSV");
  sim->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out, "Output CSV")->required();

  auto* des = app.add_subcommand("design", "Synthesize gains for the configured bank");
  des->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  des->add_option("--out", out, "Output gains JSON")->required();

  auto* lin = app.add_subcommand("linearize", "Trim and linearize at the bank nodes");
  lin->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  lin->add_option("--out", out, "Output bank JSON")->required();

  auto* met = app.add_subcommand("metrics", "Tracking and estimation metrics of a trace");
  met->add_option("--trace", trace, "Trace CSV")->required()->check(CLI::ExistingFile);
  met->add_option("--config", config, "Scenario JSON giving the fault window (default: inferred from f)")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_sim(config, out);
    if (des->parsed()) return run_design(config, out);
    if (lin->parsed()) return run_linearize(config, out);
    if (met->parsed()) return run_metrics(trace, config);
  } catch (const trms::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
