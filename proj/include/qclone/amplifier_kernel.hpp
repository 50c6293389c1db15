#pragma once

// Two-mode birth-death model of an inverted gain medium. Each polarization
// mode n gains a photon at rate A (n + 1) (stimulated + spontaneous emission)
// and loses one at rate B n (absorption). The input light occupies mode V;
// mode H starts in vacuum.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "qclone/cloning_math.hpp"

namespace qclone {

/// Photon-number statistics of the light entering mode V.
class InputState {
 public:
  enum class Kind { Fock, Poissonian, Thermal };

  static InputState fock(int photons);
  static InputState poissonian(double mean);
  static InputState thermal(double mean);

  Kind kind() const noexcept { return kind_; }
  double mean() const noexcept { return mean_; }
  /// Photon number of a Fock state (0 for other kinds).
  int fock_number() const noexcept { return fock_; }

  /// p(n) for n = 0..n_max; entries beyond n_max are dropped.
  std::vector<double> distribution(int n_max) const;

 private:
  InputState(Kind kind, double mean, int fock) : kind_(kind), mean_(mean), fock_(fock) {}

  Kind kind_;
  double mean_;
  int fock_;
};

/// Probability table over (n_V, n_H) with 0 <= n_V, n_H <= n_max.
class JointPhotonDistribution {
 public:
  JointPhotonDistribution(InputState input, int n_max, std::vector<double> marginal_v,
                          std::vector<double> marginal_h);

  const InputState& input() const noexcept { return input_; }
  int n_max() const noexcept { return n_max_; }
  double operator()(int n_v, int n_h) const { return grid_[index(n_v, n_h)]; }
  /// Probability lost beyond the truncation, 1 - sum of the grid.
  double tail_mass() const noexcept { return tail_mass_; }

  const std::vector<double>& marginal_v() const noexcept { return marginal_v_; }
  const std::vector<double>& marginal_h() const noexcept { return marginal_h_; }
  double mean_v() const noexcept;
  double mean_h() const noexcept;

  /// Exchanges the roles of the two modes.
  JointPhotonDistribution swapped() const;

 private:
  std::size_t index(int n_v, int n_h) const;

  InputState input_;
  int n_max_;
  std::vector<double> marginal_v_;
  std::vector<double> marginal_h_;
  std::vector<double> grid_;
  double tail_mass_;
};

struct MasterOptions {
  /// 0 selects the truncation automatically.
  int n_max = 0;
  double tail_tolerance = 1e-10;
  /// Upper bound on each uniformization sub-step, in units of the largest exit rate.
  double max_rate_step = 8.0;
  /// Multiplies the number of sub-steps; used to check step convergence.
  int step_multiplier = 1;
};

/// Truncation used when MasterOptions::n_max is 0.
int default_truncation(const InputState& input, const AmplifierParams& params);

/// Solves the master equation for the joint photon distribution after the
/// interaction time. Throws TruncationError if the tail mass stays above
/// tolerance after one doubling of n_max.
JointPhotonDistribution evolve_master(const InputState& input, const AmplifierParams& params,
                                      const MasterOptions& options = {});

/// Single-mode transient of the birth-death chain on 0..n_max from `initial`.
/// Probability that would leave n_max is discarded.
std::vector<double> propagate_mode(std::vector<double> initial, const AmplifierParams& params,
                                   const MasterOptions& options = {});

/// Conditional outcome of selecting exactly M output photons from a Fock(N) input.
struct PostselectedClone {
  ConditionalCloneResult result;
  /// Sum over 0 <= k <= M - N of p_M(k|N).
  double probability = 0.0;
  /// Mass with n_V + n_H = M but n_V < N (only possible with absorption).
  double absorbed_mass = 0.0;
};

PostselectedClone postselect_total(const JointPhotonDistribution& dist, int n_in, int m_total);

/// P(M|N): all mass with n_V + n_H = M. Sums to 1 over M up to the tail mass.
double process_probability(const JointPhotonDistribution& dist, int n_in, int m_total);

/// Terminal photon numbers of independent stochastic trajectories.
struct TrajectoryBatch {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> samples;
  std::uint64_t seed = 0;

  std::size_t count() const noexcept { return samples.size(); }
};

/// Trajectories are generated in fixed chunks of this many; chunk c draws from
/// its own generator seeded by (seed, c). Output depends only on (seed, count).
inline constexpr std::size_t kTrajectoryChunk = 1u << 16;

/// Exact event-time (Gillespie) simulation of the same birth-death process.
/// `threads` = 0 uses the hardware concurrency; the result does not depend on it.
TrajectoryBatch sample_trajectories(const InputState& input, const AmplifierParams& params,
                                    std::size_t count, std::uint64_t seed,
                                    unsigned threads = 0);

struct SampleMoments {
  double mean_v = 0.0;
  double mean_h = 0.0;
  double stderr_v = 0.0;
  double stderr_h = 0.0;
};

SampleMoments sample_moments(const TrajectoryBatch& batch);

/// Post-selection applied to Monte Carlo samples from a Fock(N) input.
struct SampledClone {
  ConditionalCloneResult result;
  std::size_t selected = 0;
  /// Standard error of the fidelity estimate.
  double fidelity_stderr = 0.0;
};

SampledClone postselect_samples(const TrajectoryBatch& batch, int n_in, int m_total);

}  // namespace qclone
