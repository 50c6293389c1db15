#pragma once

// Measurement ingestion, (G, Q) estimation and synthetic datasets.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qclone/photonics_units.hpp"

namespace qclone {

/// One operating point in photons per mode.
struct MeasurementRecord {
  double mu_in = 0.0;
  double mu_v = 0.0;
  double mu_h = 0.0;

  double mu_out() const noexcept { return mu_v + mu_h; }
  double fidelity() const;
};

enum class Units { RawWatts, Photons };

/// Photons CSV: header `mu_in,mu_v,mu_h`. Raw CSV: header
/// `p_in_watts,p_v_watts,p_h_watts`, which needs a calibration. Raw input
/// powers are taken at the reference point before the input path; the
/// analyzer powers are corrected for the output path only.
std::vector<MeasurementRecord> ingest(std::istream& in, const std::optional<CalibrationFile>& cal,
                                      Units units);
std::vector<MeasurementRecord> ingest_file(const std::filesystem::path& path,
                                           const std::optional<CalibrationFile>& cal, Units units);

/// Writes the photons CSV schema with round-trip precision.
void write_records(std::ostream& out, const std::vector<MeasurementRecord>& records);

enum class FitMethod { LinearMeans, FidelityCurve };

std::string to_string(FitMethod method);

/// One row of the Fig. 3 style bracketing plot.
struct CurveRow {
  double mu_in = 0.0;
  double mu_out = 0.0;
  double f_q0 = 0.0;
  double f_qfit = 0.0;
  double f_q1 = 0.0;
};

struct FitReport {
  FitMethod method = FitMethod::LinearMeans;
  double gain_estimate = 1.0;
  /// Empty when the data carry no spontaneous term (mu_H = 0 everywhere).
  std::optional<double> merit_estimate;
  double gain_stderr = 0.0;
  double merit_stderr = 0.0;
  double residual_rms = 0.0;
  /// Pooled estimate of the spontaneous term (G - 1)/Q.
  double spontaneous_estimate = 0.0;
  bool clamped = false;
  /// Human-readable reasons for clamping or missing estimates.
  std::vector<std::string> flags;
  std::vector<CurveRow> curve;
};

/// Least squares of mu_V on mu_in (slope G, intercept a) and the mean b of
/// mu_H. a and b both estimate (G - 1)/Q and are pooled by inverse variance.
/// Needs >= 3 records and at least two distinct mu_in values.
FitReport fit_linear_means(const std::vector<MeasurementRecord>& records);

/// Least-squares fit of the mean-fidelity model over Q in [0, 1] by golden
/// section. `gain` (and its uncertainty) are carried into the report.
FitReport fit_fidelity_curve(const std::vector<MeasurementRecord>& records, double gain,
                             double gain_stderr = 0.0);

/// Rows sorted by mu_in. mu_out follows the intensity model at (gain, q_fit);
/// the three fidelity columns evaluate the mean-fidelity model at Q = 0,
/// q_fit and 1 on that mu_out.
std::vector<CurveRow> bracketing_curves(double q_fit, double gain, std::vector<double> mu_in_grid);

struct SyntheticSpec {
  double true_gain = 1.0;
  double true_merit = 1.0;
  std::vector<double> mu_in_grid;
  double relative_noise = 0.0;
  /// Infinity disables preparation leakage.
  double extinction_db = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Noise for grid point i draws z_V then z_H from one generator seeded by `seed`.
std::vector<MeasurementRecord> synthesize(const SyntheticSpec& spec);

/// `count` points spaced evenly from lo to hi inclusive.
std::vector<double> linear_grid(double lo, double hi, int count);

}  // namespace qclone
