#pragma once

// Closed-form cloning fidelities and the mean-intensity amplifier model.

#include <cstdint>
#include <span>
#include <vector>

namespace qclone {

/// N input photons amplified to exactly M output photons.
class CloneProcess {
 public:
  /// Throws InvalidArgument unless 0 <= n_in <= m_out.
  CloneProcess(int n_in, int m_out);

  int n_in() const noexcept { return n_in_; }
  int m_out() const noexcept { return m_out_; }
  /// Number of photons added by the amplifier, M - N.
  int added() const noexcept { return m_out_ - n_in_; }

 private:
  int n_in_;
  int m_out_;
};

/// Reduced nonnegative fraction.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// Post-selected statistics of an N -> M process.
struct ConditionalCloneResult {
  CloneProcess process;
  /// weights[k] is the normalized probability of N + k photons in the input mode.
  std::vector<double> weights;
  double k_bar = 0.0;
  double fidelity = 0.0;
};

/// Gain G and merit Q of the amplifier, together with one microscopic
/// realization as emission rate A, absorption rate B and interaction time tau.
///
/// Three families are representable:
///  - G > 1, 0 < Q <= 1 from from_gain_merit (tau = 1, A = ln G / Q, B = A (1 - Q));
///  - G = 1 with no interaction (A = B = 0), from from_gain_merit(1, Q);
///  - G = 1, Q = 0 with A = B, from spontaneous_only or from_rates. Here the
///    spontaneous output A tau is the only free parameter.
class AmplifierParams {
 public:
  static AmplifierParams from_gain_merit(double gain, double merit);
  static AmplifierParams from_rates(double emission_rate, double absorption_rate, double duration);
  static AmplifierParams spontaneous_only(double spontaneous_photons);

  double gain() const noexcept { return gain_; }
  double merit() const noexcept { return merit_; }
  double emission_rate() const noexcept { return emission_; }
  double absorption_rate() const noexcept { return absorption_; }
  double duration() const noexcept { return duration_; }

  /// Photons added to each mode from vacuum: (G - 1) / Q, or A tau when Q = 0.
  double spontaneous_mean() const noexcept { return spontaneous_; }

 private:
  AmplifierParams() = default;

  double gain_ = 1.0;
  double merit_ = 1.0;
  double emission_ = 0.0;
  double absorption_ = 0.0;
  double duration_ = 1.0;
  double spontaneous_ = 0.0;
};

struct MeanIntensities {
  double mu_in = 0.0;
  double mu_v = 0.0;
  double mu_h = 0.0;

  double mu_out() const noexcept { return mu_v + mu_h; }
};

/// (MN + M + N) / (M (N + 2)) in exact arithmetic. Requires M >= 1.
Fraction optimal_fidelity_exact(const CloneProcess& process);
double optimal_fidelity(const CloneProcess& process);

/// Post-selected weights for a pure stimulated-emission amplifier, where
/// p(k) / p(0) = (N + k)! / (N! k!).
ConditionalCloneResult stimulated_weights(const CloneProcess& process);

/// (N + sum_k k w[k]) / M with w normalized. Rejects negative or all-zero weights.
double fidelity_from_distribution(const CloneProcess& process, std::span<const double> weights);

/// Output intensities mu_V = G mu_in + (G - 1)/Q, mu_H = (G - 1)/Q.
MeanIntensities mean_outputs(const AmplifierParams& params, double mu_in);

/// Gain implied by the intensity model, (Q mu_out + 2) / (Q mu_in + 2).
double gain_from_mus(double merit, double mu_in, double mu_out);

/// mu_V / (mu_V + mu_H). Independent of any common loss on both outputs.
double mean_fidelity(double mu_v, double mu_h);

/// Mean fidelity as a function of merit and the input/output intensities:
/// (Q mo mi + mo + mi) / (Q mo mi + 2 mo). Continuous at Q = 0.
double mean_fidelity_model(double merit, double mu_in, double mu_out);

}  // namespace qclone
