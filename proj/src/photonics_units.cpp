#include "qclone/photonics_units.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include "qclone/errors.hpp"

namespace qclone {

namespace {

void require_positive(double x, const char* what) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw InvalidArgument(std::string(what) + " must be finite and positive");
  }
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& text, std::size_t line) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + text + "'", line);
  }
  if (used != text.size()) {
    throw ParseError("trailing characters in number: '" + text + "'", line);
  }
  return value;
}

constexpr std::array<const char*, 6> kCalibrationKeys = {
    "input_path_loss_db",      "output_path_loss_db",  "edf_attenuation_db",
    "polarizer_extinction_db", "center_wavelength_nm", "filter_width_nm"};

}  // namespace

OpticalMode OpticalMode::from_wavelength_bandwidth(double wavelength_m, double bandwidth_m) {
  require_positive(wavelength_m, "wavelength");
  require_positive(bandwidth_m, "bandwidth");
  const double hz = constants::speed_of_light * bandwidth_m / (wavelength_m * wavelength_m);
  return {wavelength_m, hz};
}

OpticalMode OpticalMode::from_frequency_bandwidth(double wavelength_m, double bandwidth_hz) {
  require_positive(wavelength_m, "wavelength");
  require_positive(bandwidth_hz, "bandwidth");
  return {wavelength_m, bandwidth_hz};
}

double OpticalMode::bandwidth_wavelength() const noexcept {
  return bandwidth_hz_ * wavelength_ * wavelength_ / constants::speed_of_light;
}

double OpticalMode::watts_per_photon() const noexcept {
  return constants::planck * frequency() * bandwidth_hz_;
}

void CalibrationConfig::validate() const {
  for (double v : {input_path_loss_db, output_path_loss_db, edf_attenuation_db,
                   polarizer_extinction_db}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument("calibration losses must be finite and >= 0 dB");
    }
  }
}

CalibrationFile parse_calibration(std::istream& in) {
  std::map<std::string, double> values;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected 'key = value'", line_no);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool known = false;
    for (const char* k : kCalibrationKeys) known = known || key == k;
    if (!known) throw ParseError("unknown calibration key '" + key + "'", line_no);
    if (values.count(key) != 0) throw ParseError("duplicate key '" + key + "'", line_no);
    values[key] = parse_number(value, line_no);
  }
  for (const char* k : kCalibrationKeys) {
    if (values.count(k) == 0) throw ParseError(std::string("missing calibration key '") + k + "'", 0);
  }

  CalibrationFile file;
  file.calibration.input_path_loss_db = values["input_path_loss_db"];
  file.calibration.output_path_loss_db = values["output_path_loss_db"];
  file.calibration.edf_attenuation_db = values["edf_attenuation_db"];
  file.calibration.polarizer_extinction_db = values["polarizer_extinction_db"];
  try {
    file.calibration.validate();
    file.mode = OpticalMode::from_wavelength_bandwidth(values["center_wavelength_nm"] * 1e-9,
                                                       values["filter_width_nm"] * 1e-9);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), 0);
  }
  return file;
}

CalibrationFile load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open calibration file " + path.string(), 0);
  return parse_calibration(in);
}

double power_to_photons(double watts, const OpticalMode& mode) {
  if (!std::isfinite(watts) || watts < 0.0) {
    throw InvalidArgument("power must be finite and nonnegative");
  }
  return watts / mode.watts_per_photon();
}

double photons_to_power(double mu, const OpticalMode& mode) {
  if (!std::isfinite(mu) || mu < 0.0) {
    throw InvalidArgument("photon number must be finite and nonnegative");
  }
  return mu * mode.watts_per_photon();
}

double apply_loss_db(double value, double loss_db) {
  if (!std::isfinite(loss_db)) {
    throw InvalidArgument("loss must be finite");
  }
  return value * std::pow(10.0, -loss_db / 10.0);
}

double extinction_floor(double extinction_db) {
  if (std::isnan(extinction_db) || extinction_db < 0.0) {
    throw InvalidArgument("extinction ratio must be >= 0 dB");
  }
  if (std::isinf(extinction_db)) return 0.0;
  return std::pow(10.0, -extinction_db / 10.0);
}

double entry_power_from_unpumped_reading(double analyzer_watts, const CalibrationConfig& cal) {
  cal.validate();
  return apply_loss_db(analyzer_watts, -(cal.output_path_loss_db + cal.edf_attenuation_db));
}

}  // namespace qclone
