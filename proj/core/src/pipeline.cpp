#include "piezo/pipeline.hpp"

#include "piezo/collection.hpp"
#include "piezo/csv.hpp"
#include "piezo/errors.hpp"
#include "piezo/metrics.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace piezo::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kFormat = "piezo-artifacts-1";

struct StageInfo {
  Stage stage;
  std::string_view name;
  std::vector<Stage> inputs;
  std::vector<std::string_view> config_keys;
  std::vector<std::string> files;
};

const std::vector<StageInfo>& stage_table() {
  static const std::vector<StageInfo> table{
      {Stage::Collect, "collect", {}, {"sample_rate", "seed", "plant", "control", "collect"}, {"datasets.csv"}},
      {Stage::Fit, "fit-hysteresis", {Stage::Collect}, {"fit"}, {"luts.csv", "hysteresis_fit.csv"}},
      {Stage::Strokes, "optimize-strokes", {Stage::Fit}, {"control", "strokes"}, {"strokes.csv", "stroke_optima.csv"}},
      {Stage::Sensor,
       "identify-sensor",
       {},
       {"sample_rate", "seed", "plant", "control", "sensor"},
       {"sensor_model.csv", "sensor_frf.csv", "sensor_frf_s1.csv", "sensor_frf_s2.csv"}},
      {Stage::Ilc,
       "run-ilc",
       {Stage::Fit, Stage::Strokes, Stage::Sensor},
       {"ilc"},
       {"profiles.csv", "ilc_rmsd_plus.csv", "ilc_rmsd_minus.csv", "ilc_trace_plus_first.csv", "ilc_trace_plus_last.csv",
        "ilc_trace_minus_first.csv", "ilc_trace_minus_last.csv"}},
      {Stage::Sweep,
       "sweep",
       {Stage::Fit, Stage::Strokes, Stage::Sensor, Stage::Ilc},
       {"sweep"},
       {"sweep.csv", "sweep_alpha_error.csv", "sweep_spectrum.csv", "sweep_provenance.csv"}},
      {Stage::Certify, "certify", {Stage::Sensor}, {"ilc", "certify"}, {"certificates.csv", "convergence_frequency.csv"}},
  };
  return table;
}

const StageInfo& info(Stage s) { return stage_table()[static_cast<std::size_t>(s)]; }

std::string direction_tag(Direction d) { return d == Direction::Plus ? "plus" : "minus"; }

struct Context {
  const config::PipelineConfig& cfg;
  fs::path out;
  sim::PlantConfig plant;
  Artifacts& a;
};

// collect ------------------------------------------------------------------

void compute_collect(Context& c) {
  const auto& k = c.cfg.control;
  PerElement<control::GainModel> models;
  models.fill(control::GainModel::constant(k.collection_gain));
  const control::ControllerConfig controller = c.cfg.controller(models);
  waveform::StrokePlan plan;
  for (Element e : kAllElements) {
    const double span = stroke::constant_gain_span(k.collection_gain, controller.u_min[index(e)], controller.u_max[index(e)]) *
                        (1.0 + k.collection_margin);
    plan.fixed[index(e)] = {-0.5 * span, 0.5 * span};
  }
  const auto& cs = c.cfg.collect;
  const hyst::FrequencyGrid grid = hyst::frequency_grid(cs.f_min, cs.f_max, cs.count);
  hyst::CollectionResult res = hyst::collect_dataset(c.plant, controller, plan, grid, {cs.steps_per_frequency, cs.samples_per_step});
  hyst::write_datasets_csv(res.data, c.out / "datasets.csv");
  c.a.data = std::move(res.data);
}

void load_collect(Context& c) { c.a.data = hyst::read_datasets_csv(c.out / "datasets.csv"); }

// fit ----------------------------------------------------------------------

void write_fit_summary(const std::vector<FitSummary>& rows, const fs::path& path) {
  csv::Writer w(path, {"element", "kernel residual rms", "ramberg-osgood residual rms", "samples plus", "samples minus"});
  for (const FitSummary& r : rows)
    w.cell(name(r.element))
        .cell(r.kernel_rms)
        .cell(r.ramberg_osgood_rms)
        .cell(static_cast<long long>(r.samples[0]))
        .cell(static_cast<long long>(r.samples[1]))
        .end_row();
}

std::vector<FitSummary> read_fit_summary(const fs::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t ce = t.column("element");
  const auto k = t.numeric_column("kernel residual rms");
  const auto ro = t.numeric_column("ramberg-osgood residual rms");
  const auto sp = t.numeric_column("samples plus");
  const auto sm = t.numeric_column("samples minus");
  std::vector<FitSummary> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    out.push_back({parse_element(t.rows[i][ce]), k[i], ro[i],
                   {static_cast<std::size_t>(sp[i]), static_cast<std::size_t>(sm[i])}});
  return out;
}

void compute_fit(Context& c) {
  const auto& f = c.cfg.fit;
  hyst::LutSet luts;
  std::vector<FitSummary> summary;
  for (Element e : kAllElements) {
    const hyst::HysteresisDataset& d = (*c.a.data)[index(e)];
    hyst::KernelSetup setup = hyst::default_kernel_setup(d, f.kernel_grid);
    setup.ridge_factor = f.ridge_factor;
    setup.max_samples = f.max_samples;
    const hyst::KernelModel model = hyst::fit_model(d, setup);
    const auto [rate_axis, absement_axis] = hyst::default_lut_axes(d, f.lut_nodes);
    luts[index(e)] = hyst::build_lut(model, rate_axis, absement_axis);
    summary.push_back({e, hyst::residual_rms(d, model), hyst::residual_rms(d, hyst::fit_ramberg_osgood(d)),
                       {d.included_count(Direction::Plus), d.included_count(Direction::Minus)}});
  }
  hyst::write_luts_csv(luts, c.out / "luts.csv");
  write_fit_summary(summary, c.out / "hysteresis_fit.csv");
  c.a.luts = std::move(luts);
  c.a.fit_summary = std::move(summary);
}

void load_fit(Context& c) {
  c.a.luts = hyst::read_luts_csv(c.out / "luts.csv");
  c.a.fit_summary = read_fit_summary(c.out / "hysteresis_fit.csv");
}

// strokes ------------------------------------------------------------------

void compute_strokes(Context& c) {
  const auto& cs = c.cfg.collect;
  const std::vector<double> freqs = hyst::frequency_grid(cs.f_min, cs.f_max, cs.count).positive;
  PerElement<control::GainModel> models;
  PerElement<stroke::ElementLaw> laws;
  PerElement<stroke::StrokeBounds> init;
  const double u_min = c.cfg.u_min(), u_max = c.cfg.u_max();
  for (Element e : kAllElements) {
    models[index(e)] = control::GainModel::lut((*c.a.luts)[index(e)]);
    laws[index(e)] = {&models[index(e)], u_min, u_max, c.plant.sample_time(), c.cfg.control.guard_fraction};
    const double span = stroke::constant_gain_span(models[index(e)].median(), u_min, u_max);
    init[index(e)] = {-0.5 * span, 0.5 * span};
  }
  const stroke::StrokeTableResult res = stroke::build_stroke_lut(freqs, laws, init, c.cfg.optimizer());
  res.table.write_csv(c.out / "strokes.csv");
  csv::Writer w(c.out / "stroke_optima.csv", {"element", "frequency (Hz)", "r_min", "r_max"});
  for (Element e : kAllElements)
    for (std::size_t i = 0; i < freqs.size(); ++i)
      w.cell(name(e)).cell(freqs[i]).cell(res.optima[index(e)][i].r_min).cell(res.optima[index(e)][i].r_max).end_row();
  c.a.strokes = res.table;
}

void load_strokes(Context& c) { c.a.strokes = waveform::StrokeLUT::read_csv(c.out / "strokes.csv"); }

// sensor -------------------------------------------------------------------

void compute_sensor(Context& c) {
  sensor::SensorIdentification id = sensor::identify_sensor(c.plant, c.cfg.sensor_settings());
  sensor::write_model_csv(id.model, id.current_gain, c.out / "sensor_model.csv");
  id.g_hat.write_csv(c.out / "sensor_frf.csv");
  id.g_s1.write_csv(c.out / "sensor_frf_s1.csv");
  id.g_s2.write_csv(c.out / "sensor_frf_s2.csv");
  c.a.sensor_model = std::move(id.model);
  c.a.current_gains = id.current_gain;
}

void load_sensor(Context& c) {
  auto [model, gains] = sensor::read_model_csv(c.out / "sensor_model.csv");
  c.a.sensor_model = std::move(model);
  c.a.current_gains = gains;
}

// ilc ----------------------------------------------------------------------

void compute_ilc(Context& c) {
  const auto& k = c.cfg.control;
  const experiment::StrategySetup s2 =
      experiment::strategy_setup(experiment::Strategy::S2, c.a.strategy_inputs(), k.amplifier_min, k.amplifier_max,
                                 k.inset, c.plant.sample_time());
  const auto& ic = c.cfg.ilc;
  const ilc::IlcFilters filters =
      ilc::default_filters(c.a.sensor_model->transfer, c.cfg.sample_rate, ic.beta, ic.q_cutoff_hz, ic.q_order);

  PerDirection<std::optional<ilc::IlcResult>> results;
  PerDirection<std::exception_ptr> failures;
  {
    std::vector<std::jthread> workers;
    for (Direction d : kBothDirections)
      workers.emplace_back([&, d] {
        try {
          const double f = d == Direction::Plus ? ic.drive_frequency : -ic.drive_frequency;
          results[index(d)] = ilc::run_ilc(c.plant, s2.controller, s2.plan, c.a.sensor_model->transfer, filters,
                                           c.cfg.ilc_settings(f));
        } catch (...) {
          failures[index(d)] = std::current_exception();
        }
      });
  }
  for (const auto& e : failures)
    if (e) std::rethrow_exception(e);

  PerDirection<CompensationProfile> profiles;
  for (Direction d : kBothDirections) {
    ilc::IlcResult& r = *results[index(d)];
    const std::string tag = direction_tag(d);
    ilc::write_rmsd_csv(c.out / ("ilc_rmsd_" + tag + ".csv"), d, r.rmsd);
    r.first_trace->write_csv(c.out / ("ilc_trace_" + tag + "_first.csv"));
    r.last_trace->write_csv(c.out / ("ilc_trace_" + tag + "_last.csv"));
    profiles[index(d)] = r.profile;
    c.a.ilc_rmsd[index(d)] = r.rmsd;
  }
  ilc::write_profile_csv(c.out / "profiles.csv", profiles);
  c.a.profiles = profiles;
}

void load_ilc(Context& c) {
  const std::vector<CompensationProfile> p = ilc::read_profile_csv(c.out / "profiles.csv");
  PerDirection<std::optional<CompensationProfile>> found;
  for (const CompensationProfile& q : p) found[index(q.direction)] = q;
  if (!found[0] || !found[1]) throw IoError("profiles.csv must hold both directions");
  c.a.profiles = PerDirection<CompensationProfile>{*found[0], *found[1]};
  for (Direction d : kBothDirections)
    c.a.ilc_rmsd[index(d)] = ilc::read_rmsd_csv(c.out / ("ilc_rmsd_" + direction_tag(d) + ".csv"));
}

// sweep --------------------------------------------------------------------

void compute_sweep(Context& c, const std::array<std::string, kAllStages.size()>& keys, const std::string& config_hash) {
  const auto& sc = c.cfg.sweep;
  const auto& k = c.cfg.control;
  experiment::SweepSettings s;
  s.frequencies = experiment::log_grid(sc.f_min, sc.f_max, sc.count);
  s.steps = sc.steps;
  s.lead_in_steps = sc.lead_in_steps;
  s.amplifier_min = k.amplifier_min;
  s.amplifier_max = k.amplifier_max;
  s.inset = k.inset;
  const experiment::StrategyArtifacts inputs = c.a.strategy_inputs();
  std::vector<experiment::ExperimentReport> reports = experiment::strategy_sweep(c.plant, inputs, s);

  std::map<std::string, std::string> provenance{{"config", config_hash},
                                                {"seed", std::to_string(c.cfg.seed)},
                                                {"format", std::string(kFormat)}};
  for (Stage st : {Stage::Fit, Stage::Strokes, Stage::Sensor, Stage::Ilc})
    provenance[std::string(name(st))] = keys[static_cast<std::size_t>(st)];
  for (auto& r : reports) r.provenance = provenance;
  experiment::write_reports_csv(reports, c.out / "sweep.csv");
  {
    csv::Writer w(c.out / "sweep_provenance.csv", {"key", "value"});
    for (const auto& [key, value] : provenance) w.cell(key).cell(value).end_row();
  }

  // Angle-domain error and spectrum at the learning frequency.
  csv::Writer wa(c.out / "sweep_alpha_error.csv", {"strategy", "direction", "alpha (rad)", "error (m)"});
  csv::Writer ws(c.out / "sweep_spectrum.csv", {"strategy", "direction", "frequency (Hz)", "amplitude (m)"});
  for (experiment::Strategy st : experiment::kAllStrategies) {
    const experiment::StrategySetup setup = experiment::strategy_setup(st, inputs, k.amplifier_min, k.amplifier_max,
                                                                       k.inset, c.plant.sample_time());
    for (Direction d : kBothDirections) {
      const double f = d == Direction::Plus ? c.cfg.ilc.drive_frequency : -c.cfg.ilc.drive_frequency;
      const experiment::CellRun run =
          experiment::run_cell(c.plant, setup, c.a.sensor_model->transfer, f, sc.steps, sc.lead_in_steps);
      const std::vector<double> binned = metrics::alpha_binned(run.error, run.alpha, run.steps, sc.alpha_bins);
      for (std::size_t b = 0; b < binned.size(); ++b)
        wa.cell(experiment::name(st))
            .cell(name(d))
            .cell(kTwoPi * (static_cast<double>(b) + 0.5) / static_cast<double>(binned.size()))
            .cell(binned[b])
            .end_row();
      const std::span<const double> measured(run.error.data() + run.steps.front().begin,
                                             run.steps.back().end - run.steps.front().begin);
      for (const metrics::SpectrumPoint& p : metrics::reverse_cumulative_spectrum(measured, c.cfg.sample_rate))
        ws.cell(experiment::name(st)).cell(name(d)).cell(p.frequency).cell(p.amplitude).end_row();
    }
  }
  c.a.reports = std::move(reports);
}

void load_sweep(Context& c) {
  std::vector<experiment::ExperimentReport> reports = experiment::read_reports_csv(c.out / "sweep.csv");
  const csv::Table t = csv::read(c.out / "sweep_provenance.csv");
  const std::size_t ck = t.column("key"), cv = t.column("value");
  std::map<std::string, std::string> provenance;
  for (const auto& row : t.rows) provenance[row[ck]] = row[cv];
  for (auto& r : reports) r.provenance = provenance;
  c.a.reports = std::move(reports);
}

// certify ------------------------------------------------------------------

void compute_certify(Context& c) {
  const auto& cc = c.cfg.certify;
  const auto& ic = c.cfg.ilc;
  const lti::TransferFunction& g_hat = c.a.sensor_model->transfer;
  const lti::TransferFunction g_true = sim::sensor_transfer(c.plant);
  const ilc::IlcFilters filters = ilc::default_filters(g_hat, c.cfg.sample_rate, ic.beta, ic.q_cutoff_hz, ic.q_order);

  Certification cert;
  cert.drive_frequency = c.cfg.sample_rate / static_cast<double>(cc.horizon);
  const std::vector<double> schedule = control::constant_schedule(cert.drive_frequency, cc.horizon);
  const ilc::Basis basis(waveform::alpha_sequence(schedule, c.plant.sample_time()), ic.nodes);
  cert.certificates = ilc::projection_certificates(basis, ilc::lift(g_hat, cc.horizon), ilc::lift(g_true, cc.horizon),
                                                   ilc::lift(filters.robustness, cc.horizon),
                                                   ilc::lift(filters.learning.filter, cc.horizon), cc.cap);
  const std::vector<double> omega = ilc::uniform_frequency_grid(cc.grid_points);
  cert.frequency_sup = ilc::check_convergence_freq(filters.robustness, filters.learning.filter, g_true, omega);

  {
    csv::Writer w(c.out / "certificates.csv", {"quantity", "value"});
    const auto& k = cert.certificates;
    w.cell("horizon").cell(static_cast<double>(k.horizon)).end_row();
    w.cell("drive frequency (Hz)").cell(cert.drive_frequency).end_row();
    w.cell("idempotency defect").cell(k.idempotency_defect).end_row();
    w.cell("largest singular value of D").cell(k.sigma_d).end_row();
    w.cell("spectral radius of D").cell(k.spectral_radius_d).end_row();
    w.cell("lemma value").cell(k.lemma_value).end_row();
    w.cell("frequency sup").cell(cert.frequency_sup).end_row();
  }
  csv::Writer w(c.out / "convergence_frequency.csv", {"omega (rad/sample)", "frequency (Hz)", "magnitude"});
  const lti::TransferFunction& q = filters.robustness;
  const lti::TransferFunction& l = filters.learning.filter;
  for (double om : omega)
    w.cell(om)
        .cell(om * c.cfg.sample_rate / kTwoPi)
        .cell(std::abs(q.response(om) * (1.0 - l.response(om) * g_true.response(om))))
        .end_row();
  c.a.certification = cert;
}

void load_certify(Context& c) {
  const csv::Table t = csv::read(c.out / "certificates.csv");
  const std::size_t cq = t.column("quantity");
  const std::vector<double> v = t.numeric_column("value");
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < t.rows.size(); ++i) m[t.rows[i][cq]] = v[i];
  auto get = [&](const std::string& k) {
    auto it = m.find(k);
    if (it == m.end()) throw IoError("certificates.csv: missing " + k);
    return it->second;
  };
  Certification cert;
  cert.certificates.horizon = static_cast<std::size_t>(get("horizon"));
  cert.drive_frequency = get("drive frequency (Hz)");
  cert.certificates.idempotency_defect = get("idempotency defect");
  cert.certificates.sigma_d = get("largest singular value of D");
  cert.certificates.spectral_radius_d = get("spectral radius of D");
  cert.certificates.lemma_value = get("lemma value");
  cert.frequency_sup = get("frequency sup");
  c.a.certification = cert;
}

// manifest -----------------------------------------------------------------

json read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return json::object();
  try {
    json m = json::parse(in);
    if (m.is_object() && m.value("format", "") == kFormat) return m;
  } catch (const json::exception&) {
  }
  return json::object();
}

bool reusable(const json& manifest, const StageInfo& si, const std::string& key, const fs::path& out) {
  if (!manifest.contains("stages") || !manifest["stages"].contains(si.name)) return false;
  const json& entry = manifest["stages"][std::string(si.name)];
  if (entry.value("key", "") != key || !entry.contains("artifacts")) return false;
  for (const std::string& f : si.files) {
    if (!entry["artifacts"].contains(f) || !fs::exists(out / f)) return false;
    if (entry["artifacts"][f].get<std::string>() != config::file_hash(out / f)) return false;
  }
  return true;
}

void write_manifest(const fs::path& path, const std::string& config_hash, const std::map<std::string, json>& stages) {
  json m = json::object();
  m["format"] = kFormat;
  m["config"] = "config.json";
  m["config_hash"] = config_hash;
  json s = json::object();
  for (const auto& [k, v] : stages) s[k] = v;
  m["stages"] = s;
  std::ofstream o(path, std::ios::binary);
  if (!o) throw IoError("cannot write " + path.string());
  o << m.dump(2) << "\n";
}

}  // namespace

std::string_view name(Stage s) { return info(s).name; }

Stage parse_stage(std::string_view s) {
  for (const StageInfo& si : stage_table())
    if (si.name == s) return si.stage;
  throw ParameterError("unknown stage '" + std::string(s) + "'");
}

std::vector<Stage> upstream(Stage s) { return info(s).inputs; }

std::vector<Stage> closure(Stage target) {
  std::array<bool, kAllStages.size()> need{};
  need[static_cast<std::size_t>(target)] = true;
  for (std::size_t i = kAllStages.size(); i-- > 0;)
    if (need[i])
      for (Stage u : upstream(kAllStages[i])) need[static_cast<std::size_t>(u)] = true;
  std::vector<Stage> out;
  for (Stage s : kAllStages)
    if (need[static_cast<std::size_t>(s)]) out.push_back(s);
  return out;
}

experiment::StrategyArtifacts Artifacts::strategy_inputs() const {
  experiment::StrategyArtifacts s;
  s.luts = luts;
  s.strokes = strokes;
  s.current_gains = current_gains;
  if (sensor_model) s.sensor_model = sensor_model->transfer;
  if (luts && current_gains) s.constant_gains = experiment::midrange_gains(*luts, *current_gains);
  s.profiles = profiles;
  return s;
}

const StageRecord& RunResult::record(Stage s) const {
  for (const StageRecord& r : stages)
    if (r.stage == s) return r;
  throw ParameterError("stage '" + std::string(name(s)) + "' was not part of this run");
}

std::array<std::string, kAllStages.size()> stage_keys(const config::PipelineConfig& cfg) {
  std::array<std::string, kAllStages.size()> keys;
  for (const StageInfo& si : stage_table()) {
    std::string material = std::string(kFormat) + "|" + std::string(si.name) + "|" + config::subset_json(cfg, si.config_keys);
    for (Stage u : si.inputs) material += "|" + keys[static_cast<std::size_t>(u)];
    keys[static_cast<std::size_t>(si.stage)] = config::hex(config::fnv1a(material));
  }
  return keys;
}

namespace {

RunResult run_stages(const config::PipelineConfig& cfg, const fs::path& out, const std::vector<Stage>& stages,
                     const Options& options) {
  cfg.validate();
  fs::create_directories(out);
  RunResult result;
  const std::string cfg_text = config::to_json(cfg);
  result.config_hash = config::hex(config::fnv1a(cfg_text));
  {
    std::ofstream o(out / "config.json", std::ios::binary);
    if (!o) throw IoError("cannot write " + (out / "config.json").string());
    o << cfg_text;
  }
  const auto keys = stage_keys(cfg);
  const json previous = options.use_cache ? read_manifest(out / "manifest.json") : json::object();

  // Entries of the previous manifest still valid for this config are carried over.
  std::map<std::string, json> entries;
  if (previous.contains("stages"))
    for (const StageInfo& si : stage_table()) {
      const std::string n(si.name);
      if (previous["stages"].contains(n) && previous["stages"][n].value("key", "") == keys[static_cast<std::size_t>(si.stage)])
        entries[n] = previous["stages"][n];
    }

  Context ctx{cfg, out, cfg.plant_config(), result.artifacts};
  auto say = [&](const std::string& s) {
    if (options.log) options.log(s);
  };
  for (Stage s : stages) {
    const StageInfo& si = info(s);
    StageRecord rec;
    rec.stage = s;
    rec.key = keys[static_cast<std::size_t>(s)];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rec.reused = options.use_cache && reusable(previous, si, rec.key, out);
      switch (s) {
        case Stage::Collect: rec.reused ? load_collect(ctx) : compute_collect(ctx); break;
        case Stage::Fit: rec.reused ? load_fit(ctx) : compute_fit(ctx); break;
        case Stage::Strokes: rec.reused ? load_strokes(ctx) : compute_strokes(ctx); break;
        case Stage::Sensor: rec.reused ? load_sensor(ctx) : compute_sensor(ctx); break;
        case Stage::Ilc: rec.reused ? load_ilc(ctx) : compute_ilc(ctx); break;
        case Stage::Sweep: rec.reused ? load_sweep(ctx) : compute_sweep(ctx, keys, result.config_hash); break;
        case Stage::Certify: rec.reused ? load_certify(ctx) : compute_certify(ctx); break;
      }
    } catch (const std::exception& e) {
      entries.erase(std::string(si.name));
      write_manifest(out / "manifest.json", result.config_hash, entries);
      throw Error(std::string(si.name), e.what());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json files = json::object();
    for (const std::string& f : si.files) {
      const std::string h = config::file_hash(out / f);
      files[f] = h;
      rec.artifacts.emplace_back(f, h);
    }
    entries[std::string(si.name)] = json{{"key", rec.key}, {"artifacts", files}};
    write_manifest(out / "manifest.json", result.config_hash, entries);
    std::ostringstream line;
    line << si.name << ": " << (rec.reused ? "reused" : "computed") << " in " << rec.seconds << " s";
    say(line.str());
    result.stages.push_back(std::move(rec));
  }
  return result;
}

}  // namespace

RunResult run(const config::PipelineConfig& cfg, const fs::path& out, Stage target, const Options& options) {
  return run_stages(cfg, out, closure(target), options);
}

RunResult unified_pipeline(const config::PipelineConfig& cfg, const fs::path& out, const Options& options) {
  return run_stages(cfg, out, {kAllStages.begin(), kAllStages.end()}, options);
}

}  // namespace piezo::pipeline
