#include "qclone/experiment_pipeline.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <string_view>

#include "qclone/cloning_math.hpp"
#include "qclone/errors.hpp"
#include "qclone/format.hpp"

namespace qclone {

namespace {

constexpr std::string_view kPhotonsHeader = "mu_in,mu_v,mu_h";
constexpr std::string_view kRawHeader = "p_in_watts,p_v_watts,p_h_watts";

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

double parse_field(std::string_view text, std::size_t line) {
  text = strip(text);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ParseError("not a number: '" + std::string(text) + "'", line);
  }
  if (!std::isfinite(value)) throw ParseError("non-finite value", line);
  return value;
}

// Mean-fidelity model without the domain checks; noisy records may have
// mu_out slightly below mu_in and still belong in the objective.
double model_fidelity(double q, double mu_in, double mu_out) {
  const double cross = q * mu_out * mu_in;
  return (cross + mu_out + mu_in) / (cross + 2.0 * mu_out);
}

void require_fit_design(const std::vector<MeasurementRecord>& records) {
  if (records.size() < 3) {
    throw DegenerateFitError("at least 3 records are required, got " +
                             std::to_string(records.size()));
  }
  const auto [lo, hi] = std::minmax_element(
      records.begin(), records.end(),
      [](const auto& a, const auto& b) { return a.mu_in < b.mu_in; });
  if (lo->mu_in == hi->mu_in) {
    throw DegenerateFitError("all records share the same mu_in; slope is undetermined");
  }
}

std::vector<double> distinct_inputs(const std::vector<MeasurementRecord>& records) {
  std::vector<double> grid;
  for (const auto& r : records) {
    if (r.mu_in > 0.0) grid.push_back(r.mu_in);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::vector<CurveRow> curves_from_model(double gain, double spontaneous, double q_fit,
                                        std::vector<double> grid) {
  std::sort(grid.begin(), grid.end());
  std::vector<CurveRow> rows;
  rows.reserve(grid.size());
  for (double mu_in : grid) {
    if (!std::isfinite(mu_in) || mu_in <= 0.0) {
      throw InvalidArgument("curve grid must be strictly positive");
    }
    CurveRow row;
    row.mu_in = mu_in;
    row.mu_out = gain * mu_in + 2.0 * spontaneous;
    row.f_q0 = mean_fidelity_model(0.0, mu_in, row.mu_out);
    row.f_q1 = mean_fidelity_model(1.0, mu_in, row.mu_out);
    row.f_qfit = std::isnan(q_fit) ? std::numeric_limits<double>::quiet_NaN()
                                   : mean_fidelity_model(q_fit, mu_in, row.mu_out);
    rows.push_back(row);
  }
  return rows;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

double MeasurementRecord::fidelity() const { return mean_fidelity(mu_v, mu_h); }

std::vector<MeasurementRecord> ingest(std::istream& in, const std::optional<CalibrationFile>& cal,
                                      Units units) {
  if (units == Units::RawWatts && !cal) {
    throw InvalidArgument("raw power data need a calibration file");
  }
  if (cal) cal->calibration.validate();

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty input, expected a header", 1);
  ++line_no;
  const auto expected = units == Units::Photons ? kPhotonsHeader : kRawHeader;
  if (strip(line) != expected) {
    throw ParseError("expected header '" + std::string(expected) + "'", line_no);
  }

  std::vector<MeasurementRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = strip(line);
    if (row.empty()) continue;
    std::array<double, 3> v{};
    std::size_t start = 0;
    for (int field = 0; field < 3; ++field) {
      const auto comma = row.find(',', start);
      const bool last = field == 2;
      if (last != (comma == std::string_view::npos)) {
        throw ParseError("expected exactly 3 comma-separated fields", line_no);
      }
      v[field] = parse_field(row.substr(start, last ? row.npos : comma - start), line_no);
      start = comma + 1;
    }
    if (v[0] < 0.0 || v[1] < 0.0 || v[2] < 0.0) {
      throw ParseError(units == Units::RawWatts ? "negative power" : "negative photon number",
                       line_no);
    }
    MeasurementRecord rec{v[0], v[1], v[2]};
    if (units == Units::RawWatts) {
      const auto& c = cal->calibration;
      rec.mu_in = power_to_photons(apply_loss_db(v[0], c.input_path_loss_db), cal->mode);
      rec.mu_v = power_to_photons(apply_loss_db(v[1], -c.output_path_loss_db), cal->mode);
      rec.mu_h = power_to_photons(apply_loss_db(v[2], -c.output_path_loss_db), cal->mode);
    }
    if (rec.mu_out() <= 0.0) throw ParseError("no output light (mu_v + mu_h = 0)", line_no);
    records.push_back(rec);
  }
  if (records.empty()) throw ParseError("no data rows", line_no);
  return records;
}

std::vector<MeasurementRecord> ingest_file(const std::filesystem::path& path,
                                           const std::optional<CalibrationFile>& cal, Units units) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return ingest(in, cal, units);
}

void write_records(std::ostream& out, const std::vector<MeasurementRecord>& records) {
  out << kPhotonsHeader << '\n';
  for (const auto& r : records) {
    out << format_exact(r.mu_in) << ',' << format_exact(r.mu_v) << ',' << format_exact(r.mu_h)
        << '\n';
  }
}

std::string to_string(FitMethod method) {
  return method == FitMethod::LinearMeans ? "LinearMeans" : "FidelityCurve";
}

FitReport fit_linear_means(const std::vector<MeasurementRecord>& records) {
  require_fit_design(records);
  const auto n = static_cast<double>(records.size());

  double x_bar = 0.0, v_bar = 0.0, h_bar = 0.0;
  for (const auto& r : records) {
    x_bar += r.mu_in;
    v_bar += r.mu_v;
    h_bar += r.mu_h;
  }
  x_bar /= n;
  v_bar /= n;
  h_bar /= n;

  double sxx = 0.0, sxy = 0.0;
  for (const auto& r : records) {
    sxx += (r.mu_in - x_bar) * (r.mu_in - x_bar);
    sxy += (r.mu_in - x_bar) * (r.mu_v - v_bar);
  }
  const double slope = sxy / sxx;
  const double intercept = v_bar - slope * x_bar;

  double rss_v = 0.0, rss_h = 0.0;
  for (const auto& r : records) {
    const double ev = r.mu_v - (intercept + slope * r.mu_in);
    rss_v += ev * ev;
    rss_h += (r.mu_h - h_bar) * (r.mu_h - h_bar);
  }
  const double s2 = rss_v / (n - 2.0);
  const double var_slope = s2 / sxx;
  const double var_a = s2 * (1.0 / n + x_bar * x_bar / sxx);
  const double cov_slope_a = -x_bar * s2 / sxx;
  const double var_b = rss_h / (n - 1.0) / n;

  // Inverse-variance pooling of the two estimates of (G - 1)/Q.
  double w_a = 0.5;
  if (var_a > 0.0 && var_b > 0.0) {
    w_a = (1.0 / var_a) / (1.0 / var_a + 1.0 / var_b);
  } else if (var_a > 0.0) {
    w_a = 0.0;
  } else if (var_b > 0.0) {
    w_a = 1.0;
  }
  const double pooled = w_a * intercept + (1.0 - w_a) * h_bar;
  const double var_pooled = w_a * w_a * var_a + (1.0 - w_a) * (1.0 - w_a) * var_b;

  FitReport report;
  report.method = FitMethod::LinearMeans;
  report.gain_estimate = slope;
  report.gain_stderr = std::sqrt(var_slope);
  report.residual_rms = std::sqrt((rss_v + rss_h) / (2.0 * n));
  report.spontaneous_estimate = pooled;

  if (slope < 1.0) {
    report.gain_estimate = 1.0;
    report.clamped = true;
    report.flags.push_back("gain estimate " + format_exact(slope) + " below 1, clamped");
  }

  const double scale = std::max(std::abs(v_bar), 1.0);
  if (pooled <= 1e-12 * scale) {
    report.flags.push_back("spontaneous term not resolved (mu_H ~ 0); merit undetermined");
    report.spontaneous_estimate = 0.0;
    report.curve = curves_from_model(report.gain_estimate, 0.0,
                                     std::numeric_limits<double>::quiet_NaN(),
                                     distinct_inputs(records));
    return report;
  }

  const double excess = slope - 1.0;
  double merit = excess / pooled;
  const double var_merit = var_slope / (pooled * pooled) +
                           excess * excess * var_pooled / std::pow(pooled, 4) -
                           2.0 * excess * w_a * cov_slope_a / std::pow(pooled, 3);
  report.merit_stderr = std::sqrt(std::max(0.0, var_merit));
  if (merit < 0.0 || merit > 1.0) {
    report.flags.push_back("merit estimate " + format_exact(merit) + " outside [0, 1], clamped");
    report.clamped = true;
    merit = std::clamp(merit, 0.0, 1.0);
  }
  report.merit_estimate = merit;
  report.curve = curves_from_model(report.gain_estimate, pooled, merit, distinct_inputs(records));
  return report;
}

FitReport fit_fidelity_curve(const std::vector<MeasurementRecord>& records, double gain,
                             double gain_stderr) {
  require_fit_design(records);
  if (!std::isfinite(gain)) throw InvalidArgument("gain must be finite");

  auto objective = [&](double q) {
    double s = 0.0;
    for (const auto& r : records) {
      const double d = model_fidelity(q, r.mu_in, r.mu_out()) - r.mu_v / r.mu_out();
      s += d * d;
    }
    return s;
  };

  // Golden-section search on [0, 1]; the endpoints are compared at the end
  // so boundary minimizers are returned exactly.
  constexpr double inv_phi = std::numbers::phi - 1.0;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = objective(x1), f2 = objective(x2);
  while (hi - lo > 1e-10) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective(x2);
    }
  }
  double q = 0.5 * (lo + hi);
  double best = objective(q);
  for (double edge : {0.0, 1.0}) {
    if (const double f = objective(edge); f <= best) {
      q = edge;
      best = f;
    }
  }

  const auto n = static_cast<double>(records.size());
  double jtj = 0.0;
  constexpr double dq = 1e-6;
  for (const auto& r : records) {
    const double up = model_fidelity(std::min(1.0, q + dq), r.mu_in, r.mu_out());
    const double down = model_fidelity(std::max(0.0, q - dq), r.mu_in, r.mu_out());
    const double d = (up - down) / (std::min(1.0, q + dq) - std::max(0.0, q - dq));
    jtj += d * d;
  }

  FitReport report;
  report.method = FitMethod::FidelityCurve;
  report.gain_estimate = gain;
  report.gain_stderr = gain_stderr;
  report.merit_estimate = q;
  report.merit_stderr = jtj > 0.0 ? std::sqrt(best / (n - 1.0) / jtj) : 0.0;
  report.residual_rms = std::sqrt(best / n);
  if (gain < 1.0) {
    report.gain_estimate = 1.0;
    report.clamped = true;
    report.flags.push_back("gain " + format_exact(gain) + " below 1, clamped");
  }

  if (q > 0.0) {
    report.spontaneous_estimate = (report.gain_estimate - 1.0) / q;
  } else {
    double h = 0.0;
    for (const auto& r : records) h += r.mu_h;
    report.spontaneous_estimate = h / n;
  }
  report.curve = curves_from_model(report.gain_estimate, report.spontaneous_estimate, q,
                                   distinct_inputs(records));
  return report;
}

std::vector<CurveRow> bracketing_curves(double q_fit, double gain, std::vector<double> mu_in_grid) {
  if (!std::isfinite(gain) || gain < 1.0) throw InvalidArgument("gain must be >= 1");
  if (!std::isfinite(q_fit) || q_fit < 0.0 || q_fit > 1.0) {
    throw InvalidArgument("merit must lie in [0, 1]");
  }
  if (q_fit == 0.0 && gain > 1.0) {
    throw InvalidArgument("Q = 0 forces G = 1; the spontaneous term is unbounded otherwise");
  }
  const double spontaneous = gain == 1.0 ? 0.0 : (gain - 1.0) / q_fit;
  return curves_from_model(gain, spontaneous, q_fit, std::move(mu_in_grid));
}

void SyntheticSpec::validate() const {
  if (!std::isfinite(true_gain) || true_gain < 1.0) throw InvalidArgument("true gain must be >= 1");
  if (!std::isfinite(true_merit) || true_merit <= 0.0 || true_merit > 1.0) {
    throw InvalidArgument("true merit must lie in (0, 1]");
  }
  if (mu_in_grid.empty()) throw InvalidArgument("mu_in grid is empty");
  for (double mu : mu_in_grid) {
    if (!std::isfinite(mu) || mu <= 0.0) throw InvalidArgument("mu_in grid must be positive");
  }
  if (!std::isfinite(relative_noise) || relative_noise < 0.0) {
    throw InvalidArgument("relative noise must be >= 0");
  }
  if (std::isnan(extinction_db) || extinction_db < 0.0) {
    throw InvalidArgument("extinction ratio must be >= 0 dB");
  }
}

std::vector<MeasurementRecord> synthesize(const SyntheticSpec& spec) {
  spec.validate();
  const auto params = AmplifierParams::from_gain_merit(spec.true_gain, spec.true_merit);
  const double leak = extinction_floor(spec.extinction_db);
  std::mt19937_64 rng(spec.seed);

  std::vector<MeasurementRecord> records;
  records.reserve(spec.mu_in_grid.size());
  for (double mu_in : spec.mu_in_grid) {
    const auto means = mean_outputs(params, mu_in);
    // Box-Muller: one independent pair (z_V, z_H) per grid point.
    const double radius = std::sqrt(-2.0 * std::log1p(-uniform01(rng)));
    const double angle = 2.0 * std::numbers::pi * uniform01(rng);
    const double z_v = radius * std::cos(angle);
    const double z_h = radius * std::sin(angle);
    MeasurementRecord r;
    r.mu_in = mu_in;
    r.mu_v = std::max(0.0, means.mu_v * (1.0 + spec.relative_noise * z_v));
    r.mu_h = std::max(0.0, (means.mu_h + leak * mu_in) * (1.0 + spec.relative_noise * z_h));
    records.push_back(r);
  }
  return records;
}

std::vector<double> linear_grid(double lo, double hi, int count) {
  if (count < 1) throw InvalidArgument("grid needs at least one point");
  if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) throw InvalidArgument("bad grid range");
  if (count == 1) return {lo};
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) grid[i] = lo + (hi - lo) * i / (count - 1);
  grid.back() = hi;
  return grid;
}

}  // namespace qclone
