#include "degenheat/oracles.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "degenheat/error.hpp"

namespace degenheat::oracles {

using numerics::Grid;
using numerics::SampledField;

// ---------------------------------------------------------------- random numbers

Philox::Philox(std::uint64_t seed)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

Philox::Counter Philox::operator()(Counter c) const {
  constexpr std::uint64_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  std::uint32_t k0 = key_[0], k1 = key_[1];
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = M0 * c[0], p1 = M1 * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0, static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1, static_cast<std::uint32_t>(p0)};
    k0 += W0;
    k1 += W1;
  }
  return c;
}

double BinomialSampler::next_uniform() {
  if (used_ == 4) {
    buf_ = rng_({static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32),
                 static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32)});
    ++block_;
    used_ = 0;
  }
  return Philox::uniform(buf_[static_cast<std::size_t>(used_++)]);
}

std::int64_t BinomialSampler::operator()(std::int64_t n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  const bool flip = p > 0.5;
  const double q = flip ? 1.0 - p : p;
  const double nd = static_cast<double>(n);
  std::int64_t k = 0;
  if (nd * q < inversion_cutoff) {
    const double u = next_uniform();
    double pk = std::pow(1.0 - q, nd), cdf = pk;
    const double ratio = q / (1.0 - q);
    while (u > cdf && k < n) {
      pk *= static_cast<double>(n - k) / static_cast<double>(k + 1) * ratio;
      ++k;
      cdf += pk;
    }
  } else {
    const double u1 = next_uniform(), u2 = next_uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    const double v = std::floor(nd * q + std::sqrt(nd * q * (1.0 - q)) * z + 0.5);
    k = static_cast<std::int64_t>(std::clamp(v, 0.0, nd));
  }
  return flip ? n - k : k;
}

// ---------------------------------------------------------------- Wright-Fisher chain

ChainParams chain_for_diffusion(double mu12, double mu21, double s, std::int64_t N, double t, double x0,
                                std::int64_t replicates, std::uint64_t seed) {
  require(N >= 100, ErrorKind::domain, "chain: N must be >= 100");
  require(t >= 0.0, ErrorKind::domain, "chain: t must be >= 0");
  ChainParams p;
  const double twoN = 2.0 * static_cast<double>(N);
  p.N = N;
  p.u12 = mu12 / twoN;
  p.u21 = mu21 / twoN;
  p.sigma = s / twoN;
  p.x0 = x0;
  p.generations = static_cast<std::int64_t>(std::llround(t * twoN));
  p.replicates = replicates;
  p.seed = seed;
  return p;
}

double diffusion_time_map(std::int64_t N, std::int64_t generations) {
  require(N >= 100, ErrorKind::domain, "diffusion_time_map: N must be >= 100");
  return static_cast<double>(generations) / (2.0 * static_cast<double>(N));
}

double ChainResult::atom0() const { return static_cast<double>(counts.front()) / static_cast<double>(replicates); }
double ChainResult::atom1() const { return static_cast<double>(counts.back()) / static_cast<double>(replicates); }

double ChainResult::mean() const {
  double s = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) s += static_cast<double>(k) * static_cast<double>(counts[k]);
  return s / (static_cast<double>(N) * static_cast<double>(replicates));
}

double ChainResult::cdf(double x) const {
  if (x < 0.0) return 0.0;
  const auto kmax = std::min<std::int64_t>(N, static_cast<std::int64_t>(std::floor(x * static_cast<double>(N) + 1e-9)));
  std::int64_t c = 0;
  for (std::int64_t k = 0; k <= kmax; ++k) c += counts[static_cast<std::size_t>(k)];
  return static_cast<double>(c) / static_cast<double>(replicates);
}

Histogram ChainResult::histogram(int bins) const {
  require(bins >= 1, ErrorKind::domain, "histogram: need at least one bin");
  Histogram h;
  for (int i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / bins);
  h.mass.assign(static_cast<std::size_t>(bins), 0.0);
  const double R = static_cast<double>(replicates);
  h.atom0 = atom0();
  h.atom1 = atom1();
  for (std::int64_t k = 1; k < N; ++k) {
    const double x = static_cast<double>(k) / static_cast<double>(N);
    const auto b = std::min<std::size_t>(static_cast<std::size_t>(x * bins), static_cast<std::size_t>(bins) - 1);
    h.mass[b] += static_cast<double>(counts[static_cast<std::size_t>(k)]) / R;
  }
  return h;
}

ChainResult mc_wright_fisher(const ChainParams& p, int threads) {
  require(p.N >= 100, ErrorKind::domain, "mc_wright_fisher: N must be >= 100");
  require(p.u12 >= 0.0 && p.u21 >= 0.0, ErrorKind::domain, "mc_wright_fisher: mutation rates must be >= 0");
  require(p.x0 >= 0.0 && p.x0 <= 1.0, ErrorKind::domain, "mc_wright_fisher: x0 must lie in [0,1]");
  require(p.generations >= 0 && p.replicates >= 1, ErrorKind::domain,
          "mc_wright_fisher: need generations >= 0 and replicates >= 1");
  const double Nd = static_cast<double>(p.N);
  auto pi = [&p](double x) { return x + p.u12 * (1.0 - x) - p.u21 * x + p.sigma * x * (1.0 - x); };
  for (std::int64_t k = 0; k <= p.N; ++k) {
    const double v = pi(static_cast<double>(k) / Nd);
    if (v < -0.1 || v > 1.1)
      fail(ErrorKind::input, "mc_wright_fisher: resampling probability leaves [0,1] by more than 0.1; "
                             "the rates are too large for the diffusion scaling");
  }
  const bool absorb0 = pi(0.0) <= 0.0, absorb1 = pi(1.0) >= 1.0;
  const auto X0 = static_cast<std::int64_t>(std::llround(p.x0 * Nd));
  const Philox rng(p.seed);

  const int T = std::max(1, threads);
  std::vector<std::vector<std::int64_t>> local(static_cast<std::size_t>(T),
                                               std::vector<std::int64_t>(static_cast<std::size_t>(p.N) + 1, 0));
  auto work = [&](int id) {
    auto& counts = local[static_cast<std::size_t>(id)];
    for (std::int64_t r = id; r < p.replicates; r += T) {
      BinomialSampler draw(rng, static_cast<std::uint64_t>(r));
      std::int64_t X = X0;
      for (std::int64_t g = 0; g < p.generations; ++g) {
        if ((X == 0 && absorb0) || (X == p.N && absorb1)) break;
        X = draw(p.N, std::clamp(pi(static_cast<double>(X) / Nd), 0.0, 1.0));
      }
      ++counts[static_cast<std::size_t>(X)];
    }
  };
  if (T == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int id = 0; id < T; ++id) pool.emplace_back(work, id);
    for (auto& th : pool) th.join();
  }
  ChainResult out;
  out.N = p.N;
  out.replicates = p.replicates;
  out.counts.assign(static_cast<std::size_t>(p.N) + 1, 0);
  for (const auto& c : local)
    for (std::size_t k = 0; k < c.size(); ++k) out.counts[k] += c[k];
  return out;
}

double ks_distance(const ChainResult& chain, const wf::SolutionMeasure& m) {
  const std::int64_t N = chain.N;
  const double Nd = static_cast<double>(N), R = static_cast<double>(chain.replicates);
  double F = m.atom0;  // solver CDF at x_k
  std::int64_t below = 0;
  double D = 0.0;
  const numerics::Rule gl = numerics::gauss_legendre(6, 0.0, 1.0);
  for (std::int64_t k = 0; k <= N; ++k) {
    const double x = static_cast<double>(k) / Nd;
    if (k > 0) {
      const double a = static_cast<double>(k - 1) / Nd;
      numerics::Rule r;
      if (k == 1 || k == N) {
        r = numerics::graded_rule(a, x, 10, k == 1, k == N, 30, 0.2);
      } else {
        r = gl;
        for (std::size_t q = 0; q < r.size(); ++q) {
          r.x[q] = a + r.x[q] / Nd;
          r.w[q] /= Nd;
        }
      }
      for (std::size_t q = 0; q < r.size(); ++q) F += r.w[q] * m.density_at(r.x[q]);
    }
    const double Fx = k == N ? F + m.atom1 : F;
    const double emp_left = static_cast<double>(below) / R;
    below += chain.counts[static_cast<std::size_t>(k)];
    const double emp = static_cast<double>(below) / R;
    D = std::max({D, std::abs(emp - Fx), std::abs(emp_left - (k == 0 ? 0.0 : F))});
  }
  return D;
}

// ---------------------------------------------------------------- finite differences

SampledField fd_solve(const wf::DriftSpec& d, const numerics::Function& f, double t, const Grid& grid, FdOptions opt) {
  require(t >= 0.0, ErrorKind::domain, "fd_solve: t must be >= 0");
  require(grid.size() >= 5 && grid.front() == 0.0 && grid.back() == 1.0, ErrorKind::domain,
          "fd_solve: grid must span [0,1] with at least 5 nodes");
  require(opt.steps >= 2 && opt.rannacher_steps >= 0, ErrorKind::domain, "fd_solve: need at least two steps");
  const std::size_t M = grid.size();
  const auto n = static_cast<Eigen::Index>(M);
  Eigen::VectorXd u(n);
  for (std::size_t i = 0; i < M; ++i) u[static_cast<Eigen::Index>(i)] = f(grid[i]);
  if (t == 0.0) return SampledField(grid, std::vector<double>(u.data(), u.data() + n));
  const double fmax = u.cwiseAbs().maxCoeff();

  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < M; ++i) {
    const double x = grid[i];
    std::size_t lo;
    if (i == 0) lo = 0;
    else if (i + 1 == M) lo = M - 3;
    else lo = i - 1;
    const double nodes[3] = {grid[lo], grid[lo + 1], grid[lo + 2]};
    const auto w = numerics::fornberg_weights(x, nodes, 2);
    const double a = (i == 0 || i + 1 == M) ? 0.0 : x * (1.0 - x);
    const double b = d(x);
    for (int l = 0; l < 3; ++l)
      trip.emplace_back(static_cast<int>(i), static_cast<int>(lo) + l,
                        a * w[2][static_cast<std::size_t>(l)] + b * w[1][static_cast<std::size_t>(l)]);
  }
  Eigen::SparseMatrix<double> A(n, n), I(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  I.setIdentity();

  auto factor = [&](double theta_dt) {
    Eigen::SparseMatrix<double> lhs = I - theta_dt * A;
    auto lu = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu->compute(lhs);
    require(lu->info() == Eigen::Success, ErrorKind::numerical, "fd_solve: factorization failed");
    return lu;
  };
  auto monitor = [&](const Eigen::VectorXd& v) {
    if (!(v.cwiseAbs().maxCoeff() <= 1.01 * fmax + 1e-12))
      fail(ErrorKind::numerical, "fd_solve: solution grew beyond its initial sup norm; use more time steps");
  };

  const double dt = t / opt.steps;
  int done = 0;
  if (opt.rannacher_steps > 0 && opt.steps >= 2) {
    // implicit Euler substeps over the first two steps damp the nonsmooth start
    const double h = 2.0 * dt / opt.rannacher_steps;
    const auto lu = factor(h);
    for (int k = 0; k < opt.rannacher_steps; ++k) {
      u = lu->solve(u);
      monitor(u);
    }
    done = 2;
  }
  const auto lu = factor(0.5 * dt);
  const Eigen::SparseMatrix<double> rhs = I + (0.5 * dt) * A;
  for (int k = done; k < opt.steps; ++k) {
    u = lu->solve(rhs * u);
    monitor(u);
  }
  return SampledField(grid, std::vector<double>(u.data(), u.data() + n));
}

// ---------------------------------------------------------------- L-power series

model::Poly apply_wf_operator(const wf::DriftSpec& d, const model::Poly& p) {
  require(d.is_polynomial(), ErrorKind::domain, "series: the drift must be polynomial");
  const auto& b = d.coefficients();
  const model::Poly d1 = p.derivative(), d2 = d1.derivative();
  model::Poly out;
  out.c.assign(std::max(d2.c.size() + 2, d1.c.size() + b.size()), 0.0);
  for (std::size_t k = 0; k < d2.c.size(); ++k) {
    out.c[k + 1] += d2.c[k];
    out.c[k + 2] -= d2.c[k];
  }
  for (std::size_t k = 0; k < d1.c.size(); ++k)
    for (std::size_t j = 0; j < b.size(); ++j) out.c[k + j] += b[j] * d1.c[k];
  while (out.c.size() > 1 && out.c.back() == 0.0) out.c.pop_back();
  return out;
}

SeriesSolution series_solution(const wf::DriftSpec& d, const model::Poly& f, double t, int l, const Grid& grid) {
  require(l >= 1, ErrorKind::domain, "series_solution: l must be >= 1");
  require(l <= 40, ErrorKind::domain, "series_solution: l too large; the factorial weights lose all precision");
  require(t >= 0.0, ErrorKind::domain, "series_solution: t must be >= 0");
  SeriesSolution s{SampledField(grid, std::vector<double>(grid.size(), 0.0)), 0.0, {f}};
  for (int j = 1; j <= l; ++j) s.powers.push_back(apply_wf_operator(d, s.powers.back()));
  double coef = 1.0;
  for (int j = 0; j < l; ++j) {
    for (std::size_t i = 0; i < grid.size(); ++i) s.value.values[i] += coef * s.powers[static_cast<std::size_t>(j)](grid[i]);
    coef *= t / (j + 1.0);
  }
  double sup = 0.0;
  for (int k = 0; k <= 4000; ++k) sup = std::max(sup, std::abs(s.powers.back()(k / 4000.0)));
  s.remainder_bound = coef * sup * (1.0 + 1e-6);
  return s;
}

// ---------------------------------------------------------------- maximum principle

MaxPrincipleReport max_principle_check(const perturbation::SpaceTimeField& u, double tol) {
  const std::size_t M = u.grid.size(), K = u.times.size();
  MaxPrincipleReport r;
  r.initial_max = -INFINITY;
  r.initial_min = INFINITY;
  for (std::size_t m = 0; m < M; ++m) {
    r.initial_max = std::max(r.initial_max, u.at(0, m));
    r.initial_min = std::min(r.initial_min, u.at(0, m));
  }
  r.slab_max = r.initial_max;
  r.slab_min = r.initial_min;
  for (std::size_t k = 1; k < K; ++k) {
    for (std::size_t m = 0; m < M; ++m) {
      const double v = u.at(k, m);
      r.slab_max = std::max(r.slab_max, v);
      r.slab_min = std::min(r.slab_min, v);
      const double over = std::max(v - r.initial_max - tol, r.initial_min - tol - v);
      if (over > r.excess) {
        r.excess = over;
        r.x = u.grid[m];
        r.t = u.times[k];
      }
    }
  }
  r.ok = r.excess <= 0.0;
  if (!r.ok) {
    std::ostringstream os;
    os.precision(17);
    os << "maximum principle violated by " << r.excess << " at x=" << r.x << ", t=" << r.t;
    r.message = os.str();
  }
  return r;
}

}  // namespace degenheat::oracles
