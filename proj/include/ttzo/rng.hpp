#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace ttzo {

// SplitMix64 finalizer; used to derive independent stream seeds from one
// master seed so that e.g. weight init and perturbation draws never share
// a sequence.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Named sub-streams of a run's master seed. Documented in README; the
// numbering is part of the reproducibility contract.
enum class Stream : std::uint64_t {
  init = 1,         // weight initialization
  perturb = 2,      // ZO perturbation directions
  batch = 3,        // mini-batch shuffling
  collocation = 4,  // PDE collocation sampling
  validation = 5,   // fixed validation point set
  stein_mc = 6,     // Monte-Carlo Stein draws
  acceptance = 7,   // test harness draws
};

inline std::mt19937_64 make_rng(std::uint64_t master_seed, Stream stream,
                                std::uint64_t substream = 0) {
  return std::mt19937_64(
      mix64(mix64(master_seed ^ (static_cast<std::uint64_t>(stream) << 32)) + substream));
}

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> gauss;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

inline Eigen::VectorXd rademacher_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = coin(rng) ? 1.0 : -1.0;
  return v;
}

}  // namespace ttzo
