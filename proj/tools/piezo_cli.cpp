#include "piezo/config.hpp"
#include "piezo/errors.hpp"
#include "piezo/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using piezo::pipeline::Stage;

struct GlobalFlags {
  std::string config_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> sample_rate;
  bool quiet = false;
  bool no_cache = false;
};

piezo::config::PipelineConfig resolve(const GlobalFlags& g) {
  piezo::config::PipelineConfig cfg = g.config_path.empty() ? piezo::config::PipelineConfig{} : piezo::config::load(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (g.sample_rate) cfg.sample_rate = *g.sample_rate;
  cfg.validate();
  return cfg;
}

void report(const piezo::pipeline::RunResult& r, Stage target) {
  using namespace piezo;
  const auto& a = r.artifacts;
  switch (target) {
    case Stage::Fit:
      for (const auto& s : a.fit_summary)
        std::printf("%s: kernel residual %.4g, Ramberg-Osgood residual %.4g\n", std::string(name(s.element)).c_str(),
                    s.kernel_rms, s.ramberg_osgood_rms);
      break;
    case Stage::Sensor:
      std::printf("sensor model order %zu, current gains %.6g %.6g %.6g %.6g\n", a.sensor_model->order,
                  (*a.current_gains)[0], (*a.current_gains)[1], (*a.current_gains)[2], (*a.current_gains)[3]);
      break;
    case Stage::Ilc:
      for (Direction d : kBothDirections) {
        const auto& h = a.ilc_rmsd[index(d)];
        if (!h.empty())
          std::printf("ILC %s: RMSD %.4g m -> %.4g m over %zu trials\n", std::string(name(d)).c_str(), h.front(), h.back(),
                      h.size());
      }
      break;
    case Stage::Sweep:
    case Stage::Collect:
    case Stage::Strokes:
      break;
    case Stage::Certify: {
      const auto& c = *a.certification;
      std::printf("horizon %zu at %.4g Hz: idempotency defect %.3g, sigma(D) %.6g, rho(D) %.6g, lemma %.6g, "
                  "frequency sup %.6g\n",
                  c.certificates.horizon, c.drive_frequency, c.certificates.idempotency_defect, c.certificates.sigma_d,
                  c.certificates.spectral_radius_d, c.certificates.lemma_value, c.frequency_sup);
      break;
    }
  }
  if (target == Stage::Sweep && a.reports)
    for (const auto& rep : *a.reports)
      std::printf("%s %s: mean RMSD %.4g m\n", std::string(experiment::name(rep.strategy)).c_str(),
                  std::string(name(rep.direction)).c_str(), rep.mean_rmsd());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedforward control framework for a simulated piezo-stepper actuator"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config_path, "JSON configuration; missing keys keep their defaults")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory for artifacts and the manifest");
  app.add_option("--seed", g.seed, "Plant and excitation seed");
  app.add_option("--sample-rate", g.sample_rate, "Sample rate in Hz");
  app.add_flag("--quiet", g.quiet, "Suppress progress lines");
  app.add_flag("--no-cache", g.no_cache, "Recompute every stage");

  std::optional<Stage> target;
  bool everything = false;
  auto add = [&](std::string cmd, std::string help, std::optional<Stage> stage) {
    auto* sub = app.add_subcommand(std::move(cmd), std::move(help));
    sub->fallthrough();
    sub->callback([&, stage] {
      target = stage;
      everything = !stage;
    });
  };
  add("collect", "Collect hysteresis data over the frequency grid", Stage::Collect);
  add("fit-hysteresis", "Fit the kernel gain models and build lookup tables", Stage::Fit);
  add("optimize-strokes", "Optimize stroke bounds per element and frequency", Stage::Strokes);
  add("identify-sensor", "Identify the sensor transfer and current gains", Stage::Sensor);
  add("run-ilc", "Learn angle-domain compensation profiles in both directions", Stage::Ilc);
  add("sweep", "Compare strategies S1, S2 and S3 over the drive-frequency grid", Stage::Sweep);
  add("certify", "Evaluate the learning convergence certificates", Stage::Certify);
  add("pipeline", "Run every stage in order", std::nullopt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const piezo::config::PipelineConfig cfg = resolve(g);
    piezo::pipeline::Options opt;
    opt.use_cache = !g.no_cache;
    if (!g.quiet) opt.log = [](const std::string& s) { std::cerr << s << '\n'; };
    if (everything) {
      const auto r = piezo::pipeline::unified_pipeline(cfg, g.out, opt);
      if (!g.quiet)
        for (Stage s : {Stage::Fit, Stage::Sensor, Stage::Ilc, Stage::Sweep, Stage::Certify}) report(r, s);
    } else {
      const auto r = piezo::pipeline::run(cfg, g.out, *target, opt);
      if (!g.quiet) report(r, *target);
    }
  } catch (const piezo::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const piezo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
