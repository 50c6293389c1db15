#include "qclone/amplifier_kernel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "qclone/errors.hpp"

namespace qclone {

namespace {

constexpr int kMaxTruncation = 4000;
constexpr double kDefaultTail = 1e-13;

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double first_moment(const std::vector<double>& v) {
  double m = 0.0;
  for (std::size_t n = 0; n < v.size(); ++n) m += static_cast<double>(n) * v[n];
  return m;
}

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint32_t draw_initial(const InputState& input, std::mt19937_64& rng) {
  switch (input.kind()) {
    case InputState::Kind::Fock:
      return static_cast<std::uint32_t>(input.fock_number());
    case InputState::Kind::Thermal: {
      if (input.mean() == 0.0) return 0;
      const double ratio = input.mean() / (1.0 + input.mean());
      const double u = uniform01(rng);
      return static_cast<std::uint32_t>(std::floor(std::log1p(-u) / std::log(ratio)));
    }
    case InputState::Kind::Poissonian: {
      if (input.mean() == 0.0) return 0;
      // Sequential inversion, in log space so large means do not underflow.
      const double u = uniform01(rng);
      double log_p = -input.mean();
      double cumulative = std::exp(log_p);
      std::uint32_t n = 0;
      while (cumulative <= u && n < 100000) {
        ++n;
        log_p += std::log(input.mean() / n);
        cumulative += std::exp(log_p);
      }
      return n;
    }
  }
  return 0;
}

std::pair<std::uint32_t, std::uint32_t> run_trajectory(std::uint32_t n_v, const AmplifierParams& p,
                                                       std::mt19937_64& rng) {
  const double a = p.emission_rate();
  const double b = p.absorption_rate();
  const double tau = p.duration();
  std::uint32_t n_h = 0;
  double t = 0.0;
  while (true) {
    const double birth_v = a * (n_v + 1.0);
    const double rate_v = birth_v + b * n_v;
    const double birth_h = a * (n_h + 1.0);
    const double total = rate_v + birth_h + b * n_h;
    if (total <= 0.0) break;
    t += -std::log1p(-uniform01(rng)) / total;
    if (t > tau) break;
    const double pick = uniform01(rng) * total;
    if (pick < birth_v) {
      ++n_v;
    } else if (pick < rate_v) {
      --n_v;
    } else if (pick < rate_v + birth_h) {
      ++n_h;
    } else {
      --n_h;
    }
  }
  return {n_v, n_h};
}

}  // namespace

InputState InputState::fock(int photons) {
  if (photons < 0) throw InvalidArgument("Fock photon number must be >= 0");
  return {Kind::Fock, static_cast<double>(photons), photons};
}

InputState InputState::poissonian(double mean) {
  if (!std::isfinite(mean) || mean < 0.0) throw InvalidArgument("mean must be finite and >= 0");
  return {Kind::Poissonian, mean, 0};
}

InputState InputState::thermal(double mean) {
  if (!std::isfinite(mean) || mean < 0.0) throw InvalidArgument("mean must be finite and >= 0");
  return {Kind::Thermal, mean, 0};
}

std::vector<double> InputState::distribution(int n_max) const {
  if (n_max < 0) throw InvalidArgument("n_max must be >= 0");
  std::vector<double> p(static_cast<std::size_t>(n_max) + 1, 0.0);
  switch (kind_) {
    case Kind::Fock:
      if (fock_ <= n_max) p[fock_] = 1.0;
      break;
    case Kind::Poissonian:
      if (mean_ == 0.0) {
        p[0] = 1.0;
      } else {
        for (int n = 0; n <= n_max; ++n) {
          p[n] = std::exp(n * std::log(mean_) - mean_ - std::lgamma(n + 1.0));
        }
      }
      break;
    case Kind::Thermal: {
      const double ratio = mean_ / (1.0 + mean_);
      double term = 1.0 / (1.0 + mean_);
      for (int n = 0; n <= n_max; ++n) {
        p[n] = term;
        term *= ratio;
      }
      break;
    }
  }
  return p;
}

JointPhotonDistribution::JointPhotonDistribution(InputState input, int n_max,
                                                 std::vector<double> marginal_v,
                                                 std::vector<double> marginal_h)
    : input_(input),
      n_max_(n_max),
      marginal_v_(std::move(marginal_v)),
      marginal_h_(std::move(marginal_h)) {
  const auto size = static_cast<std::size_t>(n_max) + 1;
  if (marginal_v_.size() != size || marginal_h_.size() != size) {
    throw InvalidArgument("marginals must have n_max + 1 entries");
  }
  // The modes evolve independently from a product state, so the joint table
  // is the outer product of the marginals.
  grid_.resize(size * size);
  for (std::size_t v = 0; v < size; ++v) {
    for (std::size_t h = 0; h < size; ++h) grid_[v * size + h] = marginal_v_[v] * marginal_h_[h];
  }
  tail_mass_ = std::max(0.0, 1.0 - sum(marginal_v_) * sum(marginal_h_));
}

std::size_t JointPhotonDistribution::index(int n_v, int n_h) const {
  if (n_v < 0 || n_h < 0 || n_v > n_max_ || n_h > n_max_) {
    throw InvalidArgument("photon numbers outside the truncated grid");
  }
  return static_cast<std::size_t>(n_v) * (static_cast<std::size_t>(n_max_) + 1) +
         static_cast<std::size_t>(n_h);
}

double JointPhotonDistribution::mean_v() const noexcept { return first_moment(marginal_v_); }
double JointPhotonDistribution::mean_h() const noexcept { return first_moment(marginal_h_); }

JointPhotonDistribution JointPhotonDistribution::swapped() const {
  return {input_, n_max_, marginal_h_, marginal_v_};
}

int default_truncation(const InputState& input, const AmplifierParams& params) {
  // Both modes are bounded by a geometric law with the larger output mean;
  // amplified light is at most as broad as thermal light of the same mean.
  const double out_mean = params.gain() * input.mean() + params.spontaneous_mean();
  int n_max = 10;
  if (out_mean > 0.0) {
    const double ratio = out_mean / (1.0 + out_mean);
    const double needed = std::log(kDefaultTail) / std::log(ratio);
    if (needed > kMaxTruncation) {
      throw TruncationError("output mean " + std::to_string(out_mean) +
                            " needs a truncation above " + std::to_string(kMaxTruncation));
    }
    n_max = static_cast<int>(std::ceil(needed)) + 10;
  }
  if (input.kind() == InputState::Kind::Fock) n_max = std::max(n_max, input.fock_number() + 10);
  return std::min(n_max, kMaxTruncation);
}

std::vector<double> propagate_mode(std::vector<double> p, const AmplifierParams& params,
                                   const MasterOptions& options) {
  const double a = params.emission_rate();
  const double b = params.absorption_rate();
  const auto size = p.size();
  if (size == 0) throw InvalidArgument("empty initial distribution");
  const auto top = static_cast<double>(size - 1);
  const double max_rate = a * (top + 1.0) + b * top;
  if (max_rate == 0.0) return p;

  // Uniformization: exp(L t) = sum_k Poisson(k; Lambda t) P^k, P = I + L / Lambda.
  // The series is applied over sub-steps with Lambda dt <= max_rate_step so
  // exp(-Lambda dt) stays far from underflow.
  const double total = max_rate * params.duration();
  const auto steps = static_cast<long>(std::ceil(total / options.max_rate_step)) *
                     std::max(1, options.step_multiplier);
  const double h = total / static_cast<double>(steps);

  std::vector<double> birth(size), death(size), stay(size);
  for (std::size_t n = 0; n < size; ++n) {
    birth[n] = a * (n + 1.0) / max_rate;
    death[n] = b * static_cast<double>(n) / max_rate;
    stay[n] = 1.0 - birth[n] - death[n];
  }

  std::vector<double> term(size), next(size), acc(size);
  for (long s = 0; s < steps; ++s) {
    term = p;
    double weight = std::exp(-h);
    for (std::size_t n = 0; n < size; ++n) acc[n] = weight * term[n];
    for (int k = 1;; ++k) {
      for (std::size_t n = 0; n < size; ++n) {
        double v = stay[n] * term[n];
        if (n > 0) v += birth[n - 1] * term[n - 1];
        if (n + 1 < size) v += death[n + 1] * term[n + 1];
        next[n] = v;
      }
      term.swap(next);
      weight *= h / k;
      for (std::size_t n = 0; n < size; ++n) acc[n] += weight * term[n];
      if (k > h && weight < 1e-20) break;
    }
    p.swap(acc);
  }
  return p;
}

JointPhotonDistribution evolve_master(const InputState& input, const AmplifierParams& params,
                                      const MasterOptions& options) {
  int n_max = options.n_max > 0 ? options.n_max : default_truncation(input, params);
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto v = propagate_mode(input.distribution(n_max), params, options);
    std::vector<double> vacuum(static_cast<std::size_t>(n_max) + 1, 0.0);
    vacuum[0] = 1.0;
    auto h = propagate_mode(std::move(vacuum), params, options);
    JointPhotonDistribution dist(input, n_max, std::move(v), std::move(h));
    if (dist.tail_mass() < options.tail_tolerance) return dist;
    if (attempt == 0 && 2 * n_max <= kMaxTruncation) {
      n_max *= 2;
      continue;
    }
    throw TruncationError("tail mass " + std::to_string(dist.tail_mass()) +
                          " exceeds tolerance at n_max = " + std::to_string(n_max));
  }
  throw TruncationError("truncation did not converge");
}

namespace {

void check_postselection(const JointPhotonDistribution& dist, int n_in, int m_total) {
  const auto& input = dist.input();
  if (input.kind() != InputState::Kind::Fock || input.fock_number() != n_in) {
    throw InvalidArgument("post-selection requires a distribution evolved from Fock(" +
                          std::to_string(n_in) + ")");
  }
  if (m_total > dist.n_max()) {
    throw InvalidArgument("M exceeds the truncation n_max");
  }
}

}  // namespace

PostselectedClone postselect_total(const JointPhotonDistribution& dist, int n_in, int m_total) {
  check_postselection(dist, n_in, m_total);
  const CloneProcess process(n_in, m_total);
  if (m_total == 0) throw InvalidArgument("post-selection requires M >= 1");

  std::vector<double> weights(static_cast<std::size_t>(process.added()) + 1);
  double probability = 0.0;
  for (int k = 0; k <= process.added(); ++k) {
    weights[k] = dist(n_in + k, m_total - n_in - k);
    probability += weights[k];
  }
  double absorbed = 0.0;
  for (int n_v = 0; n_v < n_in; ++n_v) absorbed += dist(n_v, m_total - n_v);

  if (probability < 1e-300) {
    throw EmptySelectionError("P(M|N) vanishes for N=" + std::to_string(n_in) +
                              ", M=" + std::to_string(m_total));
  }
  double k_bar = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    weights[k] /= probability;
    k_bar += static_cast<double>(k) * weights[k];
  }
  const double fidelity = fidelity_from_distribution(process, weights);
  return {{process, std::move(weights), k_bar, fidelity}, probability, absorbed};
}

double process_probability(const JointPhotonDistribution& dist, int n_in, int m_total) {
  check_postselection(dist, n_in, m_total);
  if (m_total < 0) throw InvalidArgument("M must be >= 0");
  double p = 0.0;
  for (int n_v = 0; n_v <= m_total; ++n_v) p += dist(n_v, m_total - n_v);
  return p;
}

TrajectoryBatch sample_trajectories(const InputState& input, const AmplifierParams& params,
                                    std::size_t count, std::uint64_t seed, unsigned threads) {
  if (count == 0) throw InvalidArgument("trajectory count must be >= 1");
  TrajectoryBatch batch;
  batch.seed = seed;
  batch.samples.resize(count);

  const std::size_t chunks = (count + kTrajectoryChunk - 1) / kTrajectoryChunk;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));

  std::atomic<std::size_t> next_chunk{0};
  auto worker = [&] {
    for (std::size_t c = next_chunk++; c < chunks; c = next_chunk++) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
      std::mt19937_64 rng(seq);
      const std::size_t begin = c * kTrajectoryChunk;
      const std::size_t end = std::min(count, begin + kTrajectoryChunk);
      for (std::size_t i = begin; i < end; ++i) {
        batch.samples[i] = run_trajectory(draw_initial(input, rng), params, rng);
      }
    }
  };

  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  return batch;
}

SampleMoments sample_moments(const TrajectoryBatch& batch) {
  const auto n = static_cast<double>(batch.count());
  if (batch.count() == 0) throw InvalidArgument("empty trajectory batch");
  double sv = 0.0, sh = 0.0, sv2 = 0.0, sh2 = 0.0;
  for (const auto& [v, h] : batch.samples) {
    sv += v;
    sh += h;
    sv2 += static_cast<double>(v) * v;
    sh2 += static_cast<double>(h) * h;
  }
  SampleMoments m;
  m.mean_v = sv / n;
  m.mean_h = sh / n;
  if (batch.count() > 1) {
    const double var_v = std::max(0.0, (sv2 - n * m.mean_v * m.mean_v) / (n - 1.0));
    const double var_h = std::max(0.0, (sh2 - n * m.mean_h * m.mean_h) / (n - 1.0));
    m.stderr_v = std::sqrt(var_v / n);
    m.stderr_h = std::sqrt(var_h / n);
  }
  return m;
}

SampledClone postselect_samples(const TrajectoryBatch& batch, int n_in, int m_total) {
  const CloneProcess process(n_in, m_total);
  if (m_total == 0) throw InvalidArgument("post-selection requires M >= 1");
  std::vector<double> counts(static_cast<std::size_t>(process.added()) + 1, 0.0);
  std::size_t selected = 0;
  for (const auto& [v, h] : batch.samples) {
    if (static_cast<std::int64_t>(v) + h != m_total || static_cast<int>(v) < n_in) continue;
    counts[v - n_in] += 1.0;
    ++selected;
  }
  if (selected == 0) {
    throw EmptySelectionError("no trajectory ended with exactly M=" + std::to_string(m_total) +
                              " photons");
  }
  double k_bar = 0.0, k2 = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    counts[k] /= static_cast<double>(selected);
    k_bar += static_cast<double>(k) * counts[k];
    k2 += static_cast<double>(k * k) * counts[k];
  }
  const double fidelity = fidelity_from_distribution(process, counts);
  const double var_k = std::max(0.0, k2 - k_bar * k_bar);
  const double se = std::sqrt(var_k / static_cast<double>(selected)) / m_total;
  return {{process, std::move(counts), k_bar, fidelity}, selected, se};
}

}  // namespace qclone
