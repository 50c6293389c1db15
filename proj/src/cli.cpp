#include "qclone/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "qclone/amplifier_kernel.hpp"
#include "qclone/cloning_math.hpp"
#include "qclone/errors.hpp"
#include "qclone/experiment_pipeline.hpp"
#include "qclone/format.hpp"
#include "qclone/photonics_units.hpp"
#include "qclone/svg_plot.hpp"

namespace qclone::cli {

namespace {

using nlohmann::ordered_json;

struct GlobalOptions {
  std::uint64_t seed = 42;
  std::string output;
  bool json = false;
};

// Writes to --output when given, otherwise to `fallback`.
void emit(const GlobalOptions& g, std::ostream& fallback, const std::string& text) {
  if (g.output.empty()) {
    fallback << text;
    return;
  }
  std::ofstream file(g.output, std::ios::binary);
  if (!file) throw InvalidArgument("cannot write " + g.output);
  file << text;
}

ordered_json num_or_null(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

ordered_json metadata(const GlobalOptions& g) {
  return {{"constants",
           {{"planck_J_s", constants::planck}, {"speed_of_light_m_s", constants::speed_of_light}}},
          {"tau_c", "1/delta_nu"},
          {"seed", g.seed}};
}

// ---------------------------------------------------------------- fidelity

struct FidelityArgs {
  int n = 0;
  int m = 0;
};

int cmd_fidelity(const FidelityArgs& a, const GlobalOptions& g, std::ostream& out) {
  const CloneProcess process(a.n, a.m);
  const Fraction exact = optimal_fidelity_exact(process);
  const auto weights = stimulated_weights(process);
  const std::string fraction = std::to_string(exact.num) + "/" + std::to_string(exact.den);

  std::ostringstream text;
  if (g.json) {
    ordered_json j = {{"n", a.n},
                      {"m", a.m},
                      {"optimal_fidelity", exact.value()},
                      {"fraction", fraction},
                      {"weights", weights.weights},
                      {"k_bar", weights.k_bar},
                      {"stimulated_fidelity", weights.fidelity}};
    text << j.dump(2) << '\n';
  } else {
    text << "process N=" << a.n << " -> M=" << a.m << '\n'
         << "optimal fidelity: " << format_short(exact.value()) << " (" << fraction << ")\n"
         << "k  weight\n";
    for (std::size_t k = 0; k < weights.weights.size(); ++k) {
      text << k << "  " << format_short(weights.weights[k]) << '\n';
    }
    text << "mean excess k: " << format_short(weights.k_bar) << '\n'
         << "stimulated-emission fidelity: " << format_short(weights.fidelity) << '\n';
  }
  emit(g, out, text.str());
  return kSuccess;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::optional<double> gain;
  double merit = 1.0;
  std::optional<double> spontaneous;
  std::optional<int> fock;
  std::optional<double> poisson;
  std::optional<double> thermal;
  std::optional<int> postselect;
  std::optional<std::size_t> trajectories;
  int n_max = 0;
  unsigned threads = 0;
  std::string csv;
};

std::string describe(const InputState& s) {
  switch (s.kind()) {
    case InputState::Kind::Fock: return "Fock(" + std::to_string(s.fock_number()) + ")";
    case InputState::Kind::Poissonian: return "Poissonian(" + format_short(s.mean()) + ")";
    case InputState::Kind::Thermal: return "Thermal(" + format_short(s.mean()) + ")";
  }
  return {};
}

int cmd_simulate(const SimulateArgs& a, const GlobalOptions& g, std::ostream& out) {
  const int inputs = a.fock.has_value() + a.poisson.has_value() + a.thermal.has_value();
  if (inputs != 1) throw InvalidArgument("give exactly one of --fock, --poisson, --thermal");
  if (a.gain.has_value() == a.spontaneous.has_value()) {
    throw InvalidArgument("give exactly one of --g or --spontaneous");
  }
  const InputState input = a.fock       ? InputState::fock(*a.fock)
                           : a.poisson ? InputState::poissonian(*a.poisson)
                                       : InputState::thermal(*a.thermal);
  const AmplifierParams params = a.gain ? AmplifierParams::from_gain_merit(*a.gain, a.merit)
                                        : AmplifierParams::spontaneous_only(*a.spontaneous);
  if (a.postselect && !a.fock) throw InvalidArgument("--postselect needs a --fock input");

  MasterOptions options;
  options.n_max = a.n_max;
  const auto dist = evolve_master(input, params, options);
  const auto model = mean_outputs(params, input.mean());

  ordered_json j;
  j["input"] = describe(input);
  j["gain"] = params.gain();
  j["merit"] = params.merit();
  j["emission_rate"] = params.emission_rate();
  j["absorption_rate"] = params.absorption_rate();
  j["duration"] = params.duration();
  j["n_max"] = dist.n_max();
  j["tail_mass"] = dist.tail_mass();
  j["mean_v"] = dist.mean_v();
  j["mean_h"] = dist.mean_h();
  j["model_mean_v"] = model.mu_v;
  j["model_mean_h"] = model.mu_h;

  if (a.postselect) {
    const int n = *a.fock;
    const auto sel = postselect_total(dist, n, *a.postselect);
    j["postselect"] = {{"n", n},
                       {"m", *a.postselect},
                       {"process_probability", process_probability(dist, n, *a.postselect)},
                       {"selected_probability", sel.probability},
                       {"weights", sel.result.weights},
                       {"fidelity", sel.result.fidelity},
                       {"optimal_fidelity", optimal_fidelity(sel.result.process)}};
  }

  if (a.trajectories) {
    const auto batch = sample_trajectories(input, params, *a.trajectories, g.seed, a.threads);
    const auto m = sample_moments(batch);
    ordered_json mc = {{"count", batch.count()},
                       {"seed", g.seed},
                       {"chunk", kTrajectoryChunk},
                       {"mean_v", m.mean_v},
                       {"mean_h", m.mean_h},
                       {"stderr_v", m.stderr_v},
                       {"stderr_h", m.stderr_h}};
    if (a.postselect) {
      try {
        const auto s = postselect_samples(batch, *a.fock, *a.postselect);
        mc["postselect"] = {{"selected", s.selected},
                            {"fidelity", s.result.fidelity},
                            {"fidelity_stderr", s.fidelity_stderr}};
      } catch (const EmptySelectionError&) {
        mc["postselect"] = {{"selected", 0}, {"fidelity", nullptr}};
      }
    }
    j["monte_carlo"] = mc;
  }
  j["metadata"] = metadata(g);

  if (!a.csv.empty()) {
    std::ofstream csv(a.csv, std::ios::binary);
    if (!csv) throw InvalidArgument("cannot write " + a.csv);
    csv << "n_v,n_h,probability\n";
    for (int v = 0; v <= dist.n_max(); ++v) {
      for (int h = 0; h <= dist.n_max(); ++h) {
        if (const double p = dist(v, h); p > 0.0) {
          csv << v << ',' << h << ',' << format_exact(p) << '\n';
        }
      }
    }
  }

  std::ostringstream text;
  if (g.json) {
    text << j.dump(2) << '\n';
  } else {
    text << "input: " << describe(input) << '\n'
         << "amplifier: G=" << format_short(params.gain()) << " Q=" << format_short(params.merit())
         << " (A=" << format_short(params.emission_rate())
         << " B=" << format_short(params.absorption_rate())
         << " tau=" << format_short(params.duration()) << ")\n"
         << "truncation: n_max=" << dist.n_max() << " tail mass=" << format_short(dist.tail_mass())
         << '\n'
         << "mean n_V: " << format_short(dist.mean_v()) << " (model " << format_short(model.mu_v)
         << ")\n"
         << "mean n_H: " << format_short(dist.mean_h()) << " (model " << format_short(model.mu_h)
         << ")\n";
    if (a.postselect) {
      const auto& p = j["postselect"];
      text << "P(M=" << *a.postselect << "|N=" << *a.fock
           << "): " << format_short(p["process_probability"].get<double>()) << '\n'
           << "fidelity " << *a.fock << " -> " << *a.postselect << ": "
           << format_short(p["fidelity"].get<double>()) << " (optimal "
           << format_short(p["optimal_fidelity"].get<double>()) << ")\n";
    }
    if (a.trajectories) {
      const auto& mc = j["monte_carlo"];
      text << "monte carlo: " << *a.trajectories << " trajectories, seed " << g.seed << '\n'
           << "  mean n_V: " << format_short(mc["mean_v"].get<double>()) << " +- "
           << format_short(mc["stderr_v"].get<double>()) << '\n'
           << "  mean n_H: " << format_short(mc["mean_h"].get<double>()) << " +- "
           << format_short(mc["stderr_h"].get<double>()) << '\n';
      if (a.postselect) {
        const auto& ps = mc["postselect"];
        if (ps["fidelity"].is_null()) {
          text << "  no trajectory reached M=" << *a.postselect << '\n';
        } else {
          text << "  fidelity: " << format_short(ps["fidelity"].get<double>()) << " +- "
               << format_short(ps["fidelity_stderr"].get<double>()) << " ("
               << ps["selected"].get<std::size_t>() << " selected)\n";
        }
      }
    }
  }
  emit(g, out, text.str());
  return kSuccess;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string calibration;
  std::string units = "photons";
  std::string method = "linear";
  std::string plot;
};

ordered_json estimate_json(const FitReport& r) {
  return {{"gain", r.gain_estimate},
          {"gain_stderr", r.gain_stderr},
          {"merit", r.merit_estimate ? ordered_json(*r.merit_estimate) : ordered_json(nullptr)},
          {"merit_stderr", r.merit_stderr},
          {"residual_rms", r.residual_rms},
          {"clamped", r.clamped}};
}

void write_plots(const std::string& prefix, const std::vector<MeasurementRecord>& records,
                 const FitReport& report) {
  PlotSeries data{"data", {}, true};
  PlotSeries inset_data{"data", {}, true};
  for (const auto& r : records) {
    data.points.emplace_back(r.mu_in, r.fidelity());
    inset_data.points.emplace_back(r.mu_in, r.mu_out());
  }
  PlotSeries q0{"Q=0", {}}, q1{"Q=1", {}};
  PlotSeries qfit{"Q=" + (report.merit_estimate ? format_short(*report.merit_estimate) : "?"), {}};
  PlotSeries line{"linear fit", {}};
  for (const auto& row : report.curve) {
    q0.points.emplace_back(row.mu_in, row.f_q0);
    q1.points.emplace_back(row.mu_in, row.f_q1);
    if (std::isfinite(row.f_qfit)) qfit.points.emplace_back(row.mu_in, row.f_qfit);
    line.points.emplace_back(row.mu_in, row.mu_out);
  }
  PlotSpec fig{"Mean fidelity vs input photons per mode", "mu_in", "fidelity", {data, q0}};
  if (!qfit.points.empty()) fig.series.push_back(qfit);
  fig.series.push_back(q1);
  write_svg(fig, prefix + "_fidelity.svg");
  write_svg({"Output vs input photons per mode", "mu_in", "mu_out", {inset_data, line}},
            prefix + "_inset.svg");
}

int cmd_fit(const FitArgs& a, const GlobalOptions& g, std::ostream& out) {
  Units units;
  if (a.units == "photons") {
    units = Units::Photons;
  } else if (a.units == "raw") {
    units = Units::RawWatts;
  } else {
    throw InvalidArgument("--units must be 'photons' or 'raw'");
  }
  if (a.method != "linear" && a.method != "curve") {
    throw InvalidArgument("--method must be 'linear' or 'curve'");
  }
  std::optional<CalibrationFile> cal;
  if (!a.calibration.empty()) cal = load_calibration(a.calibration);
  if (units == Units::RawWatts && !cal) {
    throw InvalidArgument("--units raw requires --calibration");
  }
  const auto records = ingest_file(a.data, cal, units);

  const FitReport linear = fit_linear_means(records);
  const FitReport curve = fit_fidelity_curve(records, linear.gain_estimate, linear.gain_stderr);
  const FitReport& chosen = a.method == "linear" ? linear : curve;

  ordered_json j;
  j["method"] = to_string(chosen.method);
  j["gain"] = chosen.gain_estimate;
  j["gain_stderr"] = chosen.gain_stderr;
  j["merit"] = chosen.merit_estimate ? ordered_json(*chosen.merit_estimate) : ordered_json(nullptr);
  j["merit_stderr"] = chosen.merit_stderr;
  j["residual_rms"] = chosen.residual_rms;
  j["clamped"] = chosen.clamped;
  j["flags"] = chosen.flags;
  j["curve"] = ordered_json::array();
  for (const auto& row : chosen.curve) {
    j["curve"].push_back({{"mu_in", row.mu_in},
                          {"mu_out", row.mu_out},
                          {"f_q0", row.f_q0},
                          {"f_qfit", num_or_null(row.f_qfit)},
                          {"f_q1", row.f_q1}});
  }
  const double op_out = chosen.gain_estimate + 2.0 * chosen.spontaneous_estimate;
  j["operating_point"] = {
      {"mu_in", 1.0},
      {"mu_out", op_out},
      {"fidelity", chosen.merit_estimate
                       ? ordered_json(mean_fidelity_model(*chosen.merit_estimate, 1.0, op_out))
                       : ordered_json(nullptr)}};
  j["estimates"] = {{to_string(linear.method), estimate_json(linear)},
                    {to_string(curve.method), estimate_json(curve)}};
  auto meta = metadata(g);
  meta["units"] = a.units;
  meta["records"] = records.size();
  if (cal) {
    meta["center_wavelength_m"] = cal->mode.wavelength();
    meta["bandwidth_hz"] = cal->mode.bandwidth_frequency();
  }
  j["metadata"] = meta;

  if (!a.plot.empty()) write_plots(a.plot, records, chosen);
  emit(g, out, j.dump(2) + "\n");
  return kSuccess;
}

// ---------------------------------------------------------------- convert

struct ConvertArgs {
  std::optional<double> watts;
  std::optional<double> mu;
  double lambda_nm = 1550.0;
  double dlambda_nm = 1.0;
};

int cmd_convert(const ConvertArgs& a, const GlobalOptions& g, std::ostream& out) {
  if (a.watts.has_value() == a.mu.has_value()) {
    throw InvalidArgument("give exactly one of --watts or --mu");
  }
  const auto mode = OpticalMode::from_wavelength_bandwidth(a.lambda_nm * 1e-9, a.dlambda_nm * 1e-9);
  const double watts = a.watts ? *a.watts : photons_to_power(*a.mu, mode);
  const double mu = a.mu ? *a.mu : power_to_photons(*a.watts, mode);

  std::ostringstream text;
  if (g.json) {
    ordered_json j = {{"watts", watts},
                      {"mu", mu},
                      {"wavelength_m", mode.wavelength()},
                      {"bandwidth_hz", mode.bandwidth_frequency()},
                      {"coherence_time_s", mode.coherence_time()},
                      {"tau_c", "1/delta_nu"}};
    text << j.dump(2) << '\n';
  } else {
    text << "power: " << format_short(watts) << " W\n"
         << "photons per mode: " << format_short(mu) << '\n'
         << "mode: lambda=" << format_short(a.lambda_nm) << " nm, delta_nu="
         << format_short(mode.bandwidth_frequency()) << " Hz, tau_c=1/delta_nu\n";
  }
  emit(g, out, text.str());
  return kSuccess;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  double gain = 1.2686;
  double merit = 0.8;
  double noise = 0.01;
  double extinction_db = std::numeric_limits<double>::infinity();
  std::vector<double> grid;
  double grid_min = 0.1;
  double grid_max = 5.0;
  int grid_points = 12;
};

int cmd_synth(const SynthArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  SyntheticSpec spec;
  spec.true_gain = a.gain;
  spec.true_merit = a.merit;
  spec.relative_noise = a.noise;
  spec.extinction_db = a.extinction_db;
  spec.seed = g.seed;
  spec.mu_in_grid = a.grid.empty() ? linear_grid(a.grid_min, a.grid_max, a.grid_points) : a.grid;
  const auto records = synthesize(spec);

  std::ostringstream csv;
  write_records(csv, records);
  emit(g, out, csv.str());

  // With the data on stdout the echo goes to stderr.
  std::ostream& echo = g.output.empty() ? err : out;
  if (g.json) {
    ordered_json j = {{"gain", spec.true_gain},
                      {"merit", spec.true_merit},
                      {"noise", spec.relative_noise},
                      {"extinction_db", num_or_null(spec.extinction_db)},
                      {"grid", spec.mu_in_grid},
                      {"seed", spec.seed}};
    echo << j.dump(2) << '\n';
  } else {
    echo << "synthesized " << records.size() << " records: G=" << format_exact(spec.true_gain)
         << " Q=" << format_exact(spec.true_merit) << " noise=" << format_exact(spec.relative_noise)
         << " extinction_db=" << format_exact(spec.extinction_db) << " seed=" << spec.seed << '\n';
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Universal cloning by stimulated emission: fidelities, amplifier simulation, fits"};
  app.name("qclone");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed (u64)");
  app.add_option("--output", g.output, "Write the primary output to this file");
  app.add_flag("--json", g.json, "Machine-readable output");

  FidelityArgs fa;
  auto* fidelity = app.add_subcommand("fidelity", "Optimal N -> M cloning fidelity");
  fidelity->add_option("--n", fa.n, "Input photons N")->required();
  fidelity->add_option("--m", fa.m, "Output photons M")->required();

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Master-equation / Monte Carlo amplifier");
  simulate->add_option("--g", sa.gain, "Gain G >= 1");
  simulate->add_option("--q", sa.merit, "Merit Q in (0, 1]")->capture_default_str();
  simulate->add_option("--spontaneous", sa.spontaneous, "Q = 0 family: spontaneous photons A tau");
  simulate->add_option("--fock", sa.fock, "Fock input with N photons");
  simulate->add_option("--poisson", sa.poisson, "Poissonian input mean");
  simulate->add_option("--thermal", sa.thermal, "Thermal input mean");
  simulate->add_option("--postselect", sa.postselect, "Select exactly M output photons");
  simulate->add_option("--trajectories", sa.trajectories, "Monte Carlo trajectory count");
  simulate->add_option("--n-max", sa.n_max, "Fock truncation (0 = automatic)");
  simulate->add_option("--threads", sa.threads, "Monte Carlo worker threads (0 = all)");
  simulate->add_option("--csv", sa.csv, "Write the joint distribution (n_v,n_h,probability)");

  FitArgs ta;
  auto* fit = app.add_subcommand("fit", "Estimate G and Q from measurements");
  fit->add_option("--data", ta.data, "Measurement CSV")->required();
  fit->add_option("--calibration", ta.calibration, "Calibration key=value file");
  fit->add_option("--units", ta.units, "photons | raw")->capture_default_str();
  fit->add_option("--method", ta.method, "linear | curve")->capture_default_str();
  fit->add_option("--plot", ta.plot, "Write <prefix>_fidelity.svg and <prefix>_inset.svg");

  ConvertArgs ca;
  auto* convert = app.add_subcommand("convert", "Power <-> photons per mode");
  convert->add_option("--watts", ca.watts, "Optical power (W)");
  convert->add_option("--mu", ca.mu, "Photons per spatio-temporal mode");
  convert->add_option("--lambda-nm", ca.lambda_nm, "Center wavelength (nm)")->capture_default_str();
  convert->add_option("--dlambda-nm", ca.dlambda_nm, "Filter width (nm)")->capture_default_str();

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth", "Synthesize a noisy measurement set");
  synth->add_option("--gain", ya.gain, "True gain")->capture_default_str();
  synth->add_option("--merit", ya.merit, "True merit")->capture_default_str();
  synth->add_option("--noise", ya.noise, "Relative Gaussian noise")->capture_default_str();
  synth->add_option("--extinction-db", ya.extinction_db, "Polarizer extinction (dB, inf = ideal)");
  synth->add_option("--grid", ya.grid, "Explicit mu_in values")->delimiter(',');
  synth->add_option("--grid-min", ya.grid_min, "Grid start")->capture_default_str();
  synth->add_option("--grid-max", ya.grid_max, "Grid end")->capture_default_str();
  synth->add_option("--grid-points", ya.grid_points, "Grid size")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*fidelity) return cmd_fidelity(fa, g, out);
    if (*simulate) return cmd_simulate(sa, g, out);
    if (*fit) return cmd_fit(ta, g, out);
    if (*convert) return cmd_convert(ca, g, out);
    if (*synth) return cmd_synth(ya, g, out, err);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const TruncationError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const EmptySelectionError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const DegenerateFitError& e) {
    err << "degenerate fit: " << e.what() << '\n';
    return kDegenerateFit;
  }
  return kUsage;
}

}  // namespace qclone::cli
