#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "degenheat/model_kernel.hpp"
#include "degenheat/numerics.hpp"
#include "degenheat/perturbation.hpp"
#include "degenheat/wf_solver.hpp"

namespace degenheat::oracles {

/// Philox4x32-10 counter-based generator: the output is a pure function of (key, counter).
class Philox {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  explicit Philox(std::uint64_t seed);
  Counter operator()(Counter ctr) const;
  /// Uniform in (0,1) from a 32-bit word.
  static double uniform(std::uint32_t w) { return (static_cast<double>(w) + 0.5) * 0x1p-32; }

 private:
  std::array<std::uint32_t, 2> key_;
};

/// Binomial(n, p) from a stream of uniforms: inversion when n min(p, 1-p) < 30, otherwise the
/// normal approximation with continuity correction.
class BinomialSampler {
 public:
  static constexpr double inversion_cutoff = 30.0;
  BinomialSampler(const Philox& rng, std::uint64_t stream) : rng_(rng), stream_(stream) {}
  std::int64_t operator()(std::int64_t n, double p);

 private:
  double next_uniform();
  const Philox& rng_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox::Counter buf_{};
  int used_ = 4;
};

struct ChainParams {
  std::int64_t N = 1000;  ///< population size (number of gene copies), >= 100
  double u12 = 0.0;       ///< per-generation mutation 2 -> 1 pressure entering as u12 (1-x)
  double u21 = 0.0;
  double sigma = 0.0;     ///< per-generation selection
  double x0 = 0.5;
  std::int64_t generations = 1;
  std::int64_t replicates = 1000;
  std::uint64_t seed = 1;
};

/// Per-generation parameters of the chain approximating the diffusion with drift
/// mu12 (1-x) - mu21 x + s x (1-x) at time t.
ChainParams chain_for_diffusion(double mu12, double mu21, double s, std::int64_t N, double t, double x0,
                                std::int64_t replicates, std::uint64_t seed);

struct Histogram {
  std::vector<double> edges;  ///< bins.size() + 1 edges over [0,1]
  std::vector<double> mass;   ///< interior mass per bin (endpoints excluded)
  double atom0 = 0.0, atom1 = 0.0;
};

struct ChainResult {
  std::int64_t N = 0;
  std::int64_t replicates = 0;
  std::vector<std::int64_t> counts;  ///< counts[k]: replicates ending at X = k

  double atom0() const;
  double atom1() const;
  double mean() const;
  /// Empirical P(X/N <= x).
  double cdf(double x) const;
  Histogram histogram(int bins) const;
};

/// Replicates of X_{g+1} ~ Binomial(N, pi(X_g / N)), pi(x) = x + u12 (1-x) - u21 x + sigma x (1-x),
/// clipped to [0,1]. Replicate r draws from its own stream, so results do not depend on threads.
ChainResult mc_wright_fisher(const ChainParams& p, int threads = 1);

/// t = generations / (2N).
double diffusion_time_map(std::int64_t N, std::int64_t generations);

/// Kolmogorov-Smirnov distance between the chain's final law and a solver measure.
double ks_distance(const ChainResult& chain, const wf::SolutionMeasure& m);

struct FdOptions {
  int steps = 400;          ///< Crank-Nicolson steps
  int rannacher_steps = 4;  ///< implicit Euler quarter steps at the start
};

/// Crank-Nicolson for u_t = x(1-x) u_xx + b u_x on the grid; the endpoint rows use the degenerate
/// equation u_t = b(0) u_x (resp. b(1) u_x) with one-sided second-order differences.
numerics::SampledField fd_solve(const wf::DriftSpec& d, const numerics::Function& f, double t,
                                const numerics::Grid& grid, FdOptions opt = {});

struct SeriesSolution {
  numerics::SampledField value;
  double remainder_bound = 0.0;  ///< t^l / l! sup |L^l f|, valid since Q_s is a contraction
  std::vector<model::Poly> powers;  ///< L^j f, j = 0..l
};

/// L applied to a polynomial; the drift must be polynomial.
model::Poly apply_wf_operator(const wf::DriftSpec& d, const model::Poly& p);

/// sum_{j<l} t^j L^j f / j! for polynomial f and drift.
SeriesSolution series_solution(const wf::DriftSpec& d, const model::Poly& f, double t, int l,
                               const numerics::Grid& grid);

struct MaxPrincipleReport {
  bool ok = true;
  double initial_max = 0.0, initial_min = 0.0;
  double slab_max = 0.0, slab_min = 0.0;
  double excess = 0.0;  ///< largest violation beyond the tolerance band, 0 when ok
  double x = 0.0, t = 0.0;  ///< where the worst value occurs
  std::string message;
};

/// max over the slab <= max of the first slice + tol and min >= min of the first slice - tol.
MaxPrincipleReport max_principle_check(const perturbation::SpaceTimeField& u, double tol = 1e-9);

}  // namespace degenheat::oracles
