#pragma once

// Optical power <-> photons per spatio-temporal mode, and dB bookkeeping.

#include <filesystem>
#include <iosfwd>

namespace qclone {

namespace constants {
// CODATA 2018 (exact in the SI).
inline constexpr double planck = 6.62607015e-34;         // J s
inline constexpr double speed_of_light = 299792458.0;   // m / s
}  // namespace constants

/// Center wavelength and optical bandwidth of the detected mode.
/// The bandwidth is stored in Hz; the wavelength form is derived.
class OpticalMode {
 public:
  static OpticalMode from_wavelength_bandwidth(double wavelength_m, double bandwidth_m);
  static OpticalMode from_frequency_bandwidth(double wavelength_m, double bandwidth_hz);

  double wavelength() const noexcept { return wavelength_; }
  double frequency() const noexcept { return constants::speed_of_light / wavelength_; }
  double bandwidth_frequency() const noexcept { return bandwidth_hz_; }
  double bandwidth_wavelength() const noexcept;
  /// tau_c = 1 / delta_nu.
  double coherence_time() const noexcept { return 1.0 / bandwidth_hz_; }
  /// Energy carried by one photon per mode per coherence time, h nu delta_nu (W).
  double watts_per_photon() const noexcept;

 private:
  OpticalMode(double wavelength, double bandwidth_hz)
      : wavelength_(wavelength), bandwidth_hz_(bandwidth_hz) {}

  double wavelength_;
  double bandwidth_hz_;
};

/// Loss figures of the measurement chain, all in dB.
struct CalibrationConfig {
  double input_path_loss_db = 0.0;
  double output_path_loss_db = 0.0;
  double edf_attenuation_db = 0.0;
  double polarizer_extinction_db = 0.0;

  /// Throws InvalidArgument unless every entry is finite and >= 0.
  void validate() const;
};

/// Contents of a calibration file: loss figures plus the detected mode.
struct CalibrationFile {
  CalibrationConfig calibration;
  OpticalMode mode = OpticalMode::from_wavelength_bandwidth(1550e-9, 1e-9);
};

/// Parses `key = value` lines; `#` starts a comment. All six keys are required:
/// input_path_loss_db, output_path_loss_db, edf_attenuation_db,
/// polarizer_extinction_db, center_wavelength_nm, filter_width_nm.
CalibrationFile parse_calibration(std::istream& in);
CalibrationFile load_calibration(const std::filesystem::path& path);

double power_to_photons(double watts, const OpticalMode& mode);
double photons_to_power(double mu, const OpticalMode& mode);

/// value * 10^(-loss/10). A negative loss is a gain and undoes a loss.
double apply_loss_db(double value, double loss_db);

/// Fraction of the prepared power leaking into the orthogonal polarization.
double extinction_floor(double extinction_db);

/// Power at the amplifier entry from an analyzer reading taken with the pump
/// off: the output path and the unpumped fiber attenuation are added back.
double entry_power_from_unpumped_reading(double analyzer_watts, const CalibrationConfig& cal);

}  // namespace qclone
