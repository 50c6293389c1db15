#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <iomanip>

#include "qclone/cloning_math.hpp"
#include "qclone/errors.hpp"
#include "qclone/experiment_pipeline.hpp"

using namespace qclone;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<MeasurementRecord> noiseless(double gain, double merit, std::vector<double> grid) {
  SyntheticSpec spec;
  spec.true_gain = gain;
  spec.true_merit = merit;
  spec.mu_in_grid = std::move(grid);
  spec.relative_noise = 0.0;
  spec.extinction_db = kInf;
  return synthesize(spec);
}

SyntheticSpec replica(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.true_gain = 1.2686;
  spec.true_merit = 0.8;
  spec.mu_in_grid = {0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};
  spec.relative_noise = 0.01;
  spec.extinction_db = kInf;
  spec.seed = seed;
  return spec;
}

CalibrationFile calibration(double in_db, double out_db) {
  CalibrationFile file;
  file.calibration = {in_db, out_db, 0.25, 21.0};
  file.mode = OpticalMode::from_wavelength_bandwidth(1555e-9, 1e-9);
  return file;
}

}  // namespace

TEST(Ingest, PhotonRowsAreTakenVerbatim) {
  std::istringstream in("mu_in,mu_v,mu_h\n1.0,1.6043,0.3357\n\n");
  const auto records = ingest(in, std::nullopt, Units::Photons);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].mu_in, 1.0);
  EXPECT_EQ(records[0].mu_v, 1.6043);
  EXPECT_EQ(records[0].mu_h, 0.3357);
}

TEST(Ingest, RawRowsWithoutLossMatchPlainConversion) {
  const auto cal = calibration(0.0, 0.0);
  const double pw = photons_to_power(1.0, cal.mode);
  std::ostringstream csv;
  csv.precision(17);
  csv << "p_in_watts,p_v_watts,p_h_watts\n" << pw << ',' << 1.6 * pw << ',' << 0.3 * pw << '\n';
  std::istringstream in(csv.str());
  const auto records = ingest(in, cal, Units::RawWatts);
  EXPECT_NEAR(records[0].mu_in, power_to_photons(pw, cal.mode), 1e-15);
  EXPECT_NEAR(records[0].mu_v, power_to_photons(1.6 * pw, cal.mode), 1e-15);
  EXPECT_NEAR(records[0].mu_h, power_to_photons(0.3 * pw, cal.mode), 1e-15);
}

TEST(Ingest, LossesAreRemovedAndCommonOutputLossCancels) {
  const std::string rows = "p_in_watts,p_v_watts,p_h_watts\n2e-8,2.4e-8,5e-9\n1e-8,1.5e-8,4.9e-9\n";
  std::istringstream a(rows), b(rows);
  const auto plain = ingest(a, calibration(1.0, 0.0), Units::RawWatts);
  const auto lossy = ingest(b, calibration(1.0, 3.0), Units::RawWatts);
  for (std::size_t i = 0; i < plain.size(); ++i) {
    EXPECT_NEAR(lossy[i].mu_v / plain[i].mu_v, std::pow(10.0, 0.3), 1e-12);
    EXPECT_NEAR(lossy[i].fidelity(), plain[i].fidelity(), 1e-12);
    EXPECT_EQ(lossy[i].mu_in, plain[i].mu_in);
  }
  const auto cal = calibration(1.0, 0.0);
  EXPECT_NEAR(plain[0].mu_in, power_to_photons(2e-8 * std::pow(10.0, -0.1), cal.mode), 1e-12);
}

TEST(Ingest, ErrorsCarryLineNumbers) {
  std::istringstream negative("mu_in,mu_v,mu_h\n1,2,0.3\n1,-2,0.3\n");
  try {
    ingest(negative, std::nullopt, Units::Photons);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream garbage("mu_in,mu_v,mu_h\n1,abc,0.3\n");
  EXPECT_THROW(ingest(garbage, std::nullopt, Units::Photons), ParseError);
  std::istringstream fields("mu_in,mu_v,mu_h\n1,2\n");
  EXPECT_THROW(ingest(fields, std::nullopt, Units::Photons), ParseError);
  std::istringstream header("a,b,c\n1,2,3\n");
  EXPECT_THROW(ingest(header, std::nullopt, Units::Photons), ParseError);
  std::istringstream raw("p_in_watts,p_v_watts,p_h_watts\n1e-8,1e-8,1e-9\n");
  EXPECT_THROW(ingest(raw, std::nullopt, Units::RawWatts), InvalidArgument);
}

TEST(FitLinearMeans, ExactRecoveryOnNoiselessData) {
  const auto records = noiseless(1.2686, 0.8, {0.2, 0.5, 1, 2, 5});
  const auto fit = fit_linear_means(records);
  EXPECT_NEAR(fit.gain_estimate, 1.2686, 1e-10);
  ASSERT_TRUE(fit.merit_estimate.has_value());
  EXPECT_NEAR(*fit.merit_estimate, 0.8, 1e-10);
  EXPECT_FALSE(fit.clamped);
  EXPECT_EQ(fit.method, FitMethod::LinearMeans);
}

TEST(FitLinearMeans, WorkedExampleIntercept) {
  const auto fit = fit_linear_means(noiseless(4.0 / 3.0, 1.0, {0.5, 1, 2, 3}));
  EXPECT_NEAR(fit.spontaneous_estimate, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(*fit.merit_estimate, 1.0, 1e-10);
}

TEST(FitLinearMeans, NoOrthogonalLightLeavesMeritUndetermined) {
  std::vector<MeasurementRecord> records{{0.5, 0.5, 0.0}, {1.0, 1.0, 0.0}, {2.0, 2.0, 0.0}};
  const auto fit = fit_linear_means(records);
  EXPECT_NEAR(fit.gain_estimate, 1.0, 1e-12);
  EXPECT_FALSE(fit.merit_estimate.has_value());
  EXPECT_FALSE(fit.flags.empty());
}

TEST(FitLinearMeans, DegenerateDesigns) {
  std::vector<MeasurementRecord> same{{1, 1.6, 0.3}, {1, 1.7, 0.3}, {1, 1.5, 0.3}};
  EXPECT_THROW(fit_linear_means(same), DegenerateFitError);
  std::vector<MeasurementRecord> two{{1, 1.6, 0.3}, {2, 2.9, 0.3}};
  EXPECT_THROW(fit_linear_means(two), DegenerateFitError);
  EXPECT_THROW(fit_fidelity_curve(same, 1.3), DegenerateFitError);
}

TEST(FitLinearMeans, NonphysicalDataIsClampedWithFlag) {
  // Shrinking output: slope below 1.
  std::vector<MeasurementRecord> records{{1, 0.9, 0.1}, {2, 1.7, 0.1}, {3, 2.5, 0.1}};
  const auto fit = fit_linear_means(records);
  EXPECT_TRUE(fit.clamped);
  EXPECT_EQ(fit.gain_estimate, 1.0);
  ASSERT_TRUE(fit.merit_estimate.has_value());
  EXPECT_GE(*fit.merit_estimate, 0.0);
  EXPECT_LE(*fit.merit_estimate, 1.0);
}

TEST(FitFidelityCurve, SelfConsistency) {
  const auto records = noiseless(1.2686, 0.8, {0.2, 0.5, 1, 2, 5});
  const auto fit = fit_fidelity_curve(records, 1.2686);
  EXPECT_NEAR(*fit.merit_estimate, 0.8, 1e-5);
  EXPECT_EQ(fit.method, FitMethod::FidelityCurve);
  EXPECT_LT(fit.residual_rms, 1e-9);

  const auto optimal = fit_fidelity_curve(noiseless(1.5, 1.0, {0.2, 0.5, 1, 2, 5}), 1.5);
  EXPECT_EQ(*optimal.merit_estimate, 1.0);
}

TEST(FitFidelityCurve, OnePercentNoise) {
  const auto records = synthesize(replica(42));
  const auto fit = fit_fidelity_curve(records, fit_linear_means(records).gain_estimate);
  EXPECT_GE(*fit.merit_estimate, 0.75);
  EXPECT_LE(*fit.merit_estimate, 0.85);
}

TEST(Estimators, ConsistentOnNoiselessGrid) {
  const std::vector<double> grid{0.1, 0.3, 0.7, 1.0, 1.8, 3.0, 5.0};
  for (double gain : {1.05, 1.3, 2.0, 3.0}) {
    for (double merit : {0.2, 0.5, 0.8, 1.0}) {
      const auto records = noiseless(gain, merit, grid);
      const auto lin = fit_linear_means(records);
      EXPECT_NEAR(lin.gain_estimate, gain, 1e-6);
      EXPECT_NEAR(*lin.merit_estimate, merit, 1e-6);
      const auto cur = fit_fidelity_curve(records, lin.gain_estimate);
      EXPECT_NEAR(*cur.merit_estimate, merit, 1e-6) << gain << " " << merit;
    }
  }
}

TEST(Estimators, MedianBiasBelowTwoPercent) {
  std::vector<double> linear, curve;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto records = synthesize(replica(1000 + seed));
    const auto lin = fit_linear_means(records);
    linear.push_back(*lin.merit_estimate);
    curve.push_back(*fit_fidelity_curve(records, lin.gain_estimate).merit_estimate);
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  EXPECT_LT(std::abs(median(linear) - 0.8), 0.02);
  EXPECT_LT(std::abs(median(curve) - 0.8), 0.02);
}

TEST(BracketingCurves, Examples) {
  const auto optimal = bracketing_curves(1.0, 4.0 / 3.0, {1.0});
  EXPECT_NEAR(optimal[0].mu_out, 2.0, 1e-15);
  EXPECT_NEAR(optimal[0].f_q1, 5.0 / 6.0, 1e-12);

  const auto tiny = bracketing_curves(0.8, 1.2686, {1e-12});
  EXPECT_NEAR(tiny[0].f_q0, 0.5, 1e-11);
  EXPECT_NEAR(tiny[0].f_qfit, 0.5, 1e-11);
  EXPECT_NEAR(tiny[0].f_q1, 0.5, 1e-11);

  const auto paper = bracketing_curves(0.8, 1.2686, {1.0});
  EXPECT_NEAR(paper[0].mu_out, 1.94, 5e-4);
  EXPECT_NEAR(paper[0].f_qfit, 0.827, 5e-4);

  EXPECT_THROW(bracketing_curves(0.8, 1.2, {0.0}), InvalidArgument);
  EXPECT_THROW(bracketing_curves(0.0, 1.2, {1.0}), InvalidArgument);
}

TEST(BracketingCurves, SortedAndOrderedProperty) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> g(1.0, 4.0), q(0.01, 1.0), mu(1e-3, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> grid(8);
    for (auto& x : grid) x = mu(rng);
    const auto rows = bracketing_curves(q(rng), g(rng), grid);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0) EXPECT_LE(rows[i - 1].mu_in, rows[i].mu_in);
      EXPECT_LE(rows[i].f_q0, rows[i].f_qfit + 1e-15);
      EXPECT_LE(rows[i].f_qfit, rows[i].f_q1 + 1e-15);
    }
  }
}

TEST(Synthesize, NoiselessIsExactModel) {
  const auto records = noiseless(1.2686, 0.8, {1.0, 2.0});
  const auto params = AmplifierParams::from_gain_merit(1.2686, 0.8);
  for (const auto& r : records) {
    const auto m = mean_outputs(params, r.mu_in);
    EXPECT_EQ(r.mu_v, m.mu_v);
    EXPECT_EQ(r.mu_h, m.mu_h);
  }
}

TEST(Synthesize, ExtinctionFloorWithPumpOff) {
  SyntheticSpec spec;
  spec.true_gain = 1.0;
  spec.true_merit = 1.0;
  spec.mu_in_grid = {0.5, 1.0, 4.0};
  spec.extinction_db = 21.0;
  for (const auto& r : synthesize(spec)) EXPECT_NEAR(r.mu_h / r.mu_in, 0.0079, 1e-4);
}

TEST(Synthesize, DeterministicPerSeed) {
  const auto a = synthesize(replica(5)), b = synthesize(replica(5)), c = synthesize(replica(6));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].mu_v, b[i].mu_v);
    EXPECT_EQ(a[i].mu_h, b[i].mu_h);
  }
  EXPECT_NE(a[0].mu_v, c[0].mu_v);
}

TEST(Synthesize, ReplicaFidelityNearPaperValue) {
  const auto records = synthesize(replica(42));
  const auto fit = fit_linear_means(records);
  const double mu_out = fit.gain_estimate + 2.0 * fit.spontaneous_estimate;
  const double f = mean_fidelity_model(*fit.merit_estimate, 1.0, mu_out);
  EXPECT_GE(f, 0.82);
  EXPECT_LE(f, 0.83);
}

TEST(Synthesize, RejectsInvalidSpecs) {
  auto spec = replica(1);
  spec.mu_in_grid = {};
  EXPECT_THROW(synthesize(spec), InvalidArgument);
  spec = replica(1);
  spec.mu_in_grid = {0.0, 1.0};
  EXPECT_THROW(synthesize(spec), InvalidArgument);
  spec = replica(1);
  spec.relative_noise = -0.1;
  EXPECT_THROW(synthesize(spec), InvalidArgument);
}

TEST(LinearGrid, Endpoints) {
  const auto g = linear_grid(0.1, 5.0, 12);
  ASSERT_EQ(g.size(), 12u);
  EXPECT_EQ(g.front(), 0.1);
  EXPECT_EQ(g.back(), 5.0);
}
