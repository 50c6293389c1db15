#include "qclone/cloning_math.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "qclone/errors.hpp"

namespace qclone {

namespace {

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

CloneProcess::CloneProcess(int n_in, int m_out) : n_in_(n_in), m_out_(m_out) {
  if (n_in < 0 || m_out < 0) {
    throw InvalidArgument("photon numbers must be nonnegative");
  }
  if (m_out < n_in) {
    throw InvalidArgument("output photon number M=" + std::to_string(m_out) +
                          " is smaller than input N=" + std::to_string(n_in));
  }
}

AmplifierParams AmplifierParams::from_gain_merit(double gain, double merit) {
  if (!std::isfinite(gain) || gain < 1.0) {
    throw InvalidArgument("gain must be finite and >= 1");
  }
  if (!std::isfinite(merit) || merit <= 0.0 || merit > 1.0) {
    throw InvalidArgument("merit Q must lie in (0, 1]; use spontaneous_only for Q = 0");
  }
  AmplifierParams p;
  p.gain_ = gain;
  p.merit_ = merit;
  p.duration_ = 1.0;
  p.emission_ = std::log(gain) / merit;
  p.absorption_ = merit == 1.0 ? 0.0 : p.emission_ * (1.0 - merit);
  p.spontaneous_ = (gain - 1.0) / merit;
  return p;
}

AmplifierParams AmplifierParams::from_rates(double emission_rate, double absorption_rate,
                                            double duration) {
  if (!finite_nonneg(emission_rate) || !finite_nonneg(absorption_rate)) {
    throw InvalidArgument("rates must be finite and nonnegative");
  }
  if (!std::isfinite(duration) || duration <= 0.0) {
    throw InvalidArgument("duration must be positive");
  }
  if (absorption_rate > emission_rate) {
    throw InvalidArgument("absorption exceeds emission: the medium is not inverted (G < 1)");
  }
  AmplifierParams p;
  p.emission_ = emission_rate;
  p.absorption_ = absorption_rate;
  p.duration_ = duration;
  if (emission_rate == 0.0) {
    p.gain_ = 1.0;
    p.merit_ = 1.0;
    p.spontaneous_ = 0.0;
  } else if (absorption_rate == emission_rate) {
    p.gain_ = 1.0;
    p.merit_ = 0.0;
    p.spontaneous_ = emission_rate * duration;
  } else {
    const double net = (emission_rate - absorption_rate) * duration;
    p.gain_ = std::exp(net);
    p.merit_ = (emission_rate - absorption_rate) / emission_rate;
    p.spontaneous_ = std::expm1(net) / p.merit_;
  }
  return p;
}

AmplifierParams AmplifierParams::spontaneous_only(double spontaneous_photons) {
  if (!finite_nonneg(spontaneous_photons)) {
    throw InvalidArgument("spontaneous output must be finite and nonnegative");
  }
  return from_rates(spontaneous_photons, spontaneous_photons, 1.0);
}

Fraction optimal_fidelity_exact(const CloneProcess& process) {
  if (process.m_out() == 0) {
    throw InvalidArgument("optimal fidelity requires M >= 1");
  }
  const auto n = static_cast<std::uint64_t>(process.n_in());
  const auto m = static_cast<std::uint64_t>(process.m_out());
  const std::uint64_t num = m * n + m + n;
  const std::uint64_t den = m * (n + 2);
  const std::uint64_t g = std::gcd(num, den);
  return {num / g, den / g};
}

double optimal_fidelity(const CloneProcess& process) {
  return optimal_fidelity_exact(process).value();
}

ConditionalCloneResult stimulated_weights(const CloneProcess& process) {
  if (process.m_out() == 0) {
    throw InvalidArgument("cloning process requires M >= 1");
  }
  const int n = process.n_in();
  const int extra = process.added();

  // C(N+k, k) via w[k+1] = w[k] (N+k+1)/(k+1), rescaled to stay finite.
  std::vector<double> w(static_cast<std::size_t>(extra) + 1);
  w[0] = 1.0;
  for (int k = 0; k < extra; ++k) {
    double next = w[k] * static_cast<double>(n + k + 1) / static_cast<double>(k + 1);
    if (next > 1e250) {
      for (int j = 0; j <= k; ++j) w[j] *= 1e-250;
      next *= 1e-250;
    }
    w[k + 1] = next;
  }

  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double k_bar = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] /= total;
    k_bar += static_cast<double>(k) * w[k];
  }
  const double fidelity = (static_cast<double>(n) + k_bar) / process.m_out();
  return {process, std::move(w), k_bar, fidelity};
}

double fidelity_from_distribution(const CloneProcess& process, std::span<const double> weights) {
  if (process.m_out() == 0) {
    throw InvalidArgument("fidelity requires M >= 1");
  }
  if (weights.size() != static_cast<std::size_t>(process.added()) + 1) {
    throw InvalidArgument("weights must have M - N + 1 entries");
  }
  double total = 0.0;
  double first_moment = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!finite_nonneg(weights[k])) {
      throw InvalidArgument("weights must be finite and nonnegative");
    }
    total += weights[k];
    first_moment += static_cast<double>(k) * weights[k];
  }
  if (total <= 0.0) {
    throw InvalidArgument("weights are all zero");
  }
  return (static_cast<double>(process.n_in()) + first_moment / total) / process.m_out();
}

MeanIntensities mean_outputs(const AmplifierParams& params, double mu_in) {
  if (!finite_nonneg(mu_in)) {
    throw InvalidArgument("mu_in must be finite and nonnegative");
  }
  const double spont = params.spontaneous_mean();
  return {mu_in, params.gain() * mu_in + spont, spont};
}

double gain_from_mus(double merit, double mu_in, double mu_out) {
  if (!std::isfinite(merit) || merit <= 0.0 || merit > 1.0) {
    throw InvalidArgument("merit Q must lie in (0, 1]");
  }
  if (!finite_nonneg(mu_in) || !std::isfinite(mu_out)) {
    throw InvalidArgument("intensities must be finite and nonnegative");
  }
  if (mu_out < mu_in) {
    throw InvalidArgument("mu_out < mu_in would imply G < 1");
  }
  return (merit * mu_out + 2.0) / (merit * mu_in + 2.0);
}

double mean_fidelity(double mu_v, double mu_h) {
  if (!finite_nonneg(mu_v) || !finite_nonneg(mu_h)) {
    throw InvalidArgument("intensities must be finite and nonnegative");
  }
  const double out = mu_v + mu_h;
  if (out <= 0.0) {
    throw InvalidArgument("no output light: mu_V = mu_H = 0");
  }
  return mu_v / out;
}

double mean_fidelity_model(double merit, double mu_in, double mu_out) {
  if (!std::isfinite(merit) || merit < 0.0 || merit > 1.0) {
    throw InvalidArgument("merit Q must lie in [0, 1]");
  }
  if (!finite_nonneg(mu_in) || !std::isfinite(mu_out)) {
    throw InvalidArgument("intensities must be finite and nonnegative");
  }
  if (mu_out <= 0.0) {
    throw InvalidArgument("mu_out must be positive");
  }
  if (mu_out < mu_in) {
    throw InvalidArgument("mu_out < mu_in would imply G < 1");
  }
  const double cross = merit * mu_out * mu_in;
  return (cross + mu_out + mu_in) / (cross + 2.0 * mu_out);
}

}  // namespace qclone
