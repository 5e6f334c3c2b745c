#include "zlab/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstring>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "atomic_file.hpp"
#include "volterra.hpp"
#include "zlab/date.hpp"
#include "zlab/error.hpp"
#include "zlab/quadrature.hpp"

namespace zlab {

using detail::require;

std::size_t SimConfig::memory_estimate() const {
  std::size_t padded = 1;
  while (padded < static_cast<std::size_t>(total_steps())) padded *= 2;
  const std::size_t chunk = static_cast<std::size_t>(std::min<std::int64_t>(chunk_paths, n_paths));
  const std::size_t result = static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(n_days) * 2 * sizeof(double);
  const std::size_t scratch = 4 * padded * chunk * sizeof(double);
  return result + static_cast<std::size_t>(std::max(threads, 1)) * scratch;
}

void SimConfig::validate() const {
  require(n_paths > 0, "n_paths must be positive");
  require(steps_per_day > 0, "steps_per_day must be positive");
  require(n_days > 0, "n_days must be positive");
  require(std::isfinite(delta) && delta > 0.0, "delta must be positive");
  require(threads >= 1, "threads must be >= 1");
  require(chunk_paths >= 1, "chunk_paths must be >= 1");
  require(!antithetic || n_paths % 2 == 0, "antithetic sampling needs an even number of paths");
  require(total_steps() <= (std::int64_t{1} << 26), "too many time steps");
}

namespace {

std::uint64_t fnv1a(const std::vector<double>& v) {
  std::uint64_t h = 1469598103934665603ull;
  for (double x : v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &x, sizeof x);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace

KernelWeights precompute_kernel_weights(const ModelParams& p, const SimConfig& config) {
  p.validate();
  config.validate();
  KernelWeights kw;
  const double D = config.step();
  const auto N = static_cast<std::size_t>(config.total_steps());
  kw.step = D;
  kw.level.assign(N + 1, 0.0);
  if (p.nu == 0.0) {
    if (config.scheme == Scheme::IntegratedVariance) kw.integrated.assign(N + 1, 0.0);
    kw.checksum = fnv1a(config.scheme == Scheme::Euler ? kw.level : kw.integrated);
    return kw;
  }
  special::MittagLefflerLaw law(p.ml());
  const double c = p.nu / p.lambda;
  for (std::size_t m = 1; m <= N; ++m) kw.level[m] = c * law.cdf_increment((m - 1) * D, D) / D;

  if (config.scheme == Scheme::IntegratedVariance) {
    kw.integrated.assign(N + 1, 0.0);
    kw.integrated[0] = c * law.cdf_integral(D) / D;
    // Second differences of G written as int_{(d-1)D}^{dD} (F(v+D) - F(v)) dv,
    // which keeps full relative accuracy at long lags.
    quad::Options opt;
    opt.rel_tol = 1e-12;
    auto dF = [&](double v) { return law.cdf_increment(v, D); };
    const double first_pts[] = {0.0, 1e-9 * D, 1e-6 * D, 1e-3 * D, 0.5 * D, D};
    kw.integrated[1] = c / D * quad::integrate_or_throw(dF, first_pts, opt, "kernel weights");
    for (std::size_t d = 2; d <= N; ++d)
      kw.integrated[d] = c / D * quad::integrate_or_throw(dF, (d - 1) * D, d * D, opt, "kernel weights");
  }
  kw.checksum = fnv1a(config.scheme == Scheme::Euler ? kw.level : kw.integrated);
  return kw;
}

PathBatch::PathBatch(const ModelParams& p, const SimConfig& c) : params_(p), config_(c) {
  const std::size_t n = static_cast<std::size_t>(c.n_paths) * static_cast<std::size_t>(c.n_days);
  r_.assign(n, 0.0);
  s2_.assign(n, 0.0);
}

std::size_t PathBatch::index(std::int64_t path, int day) const {
  return static_cast<std::size_t>(path) * static_cast<std::size_t>(config_.n_days) + static_cast<std::size_t>(day - 1);
}

double PathBatch::truncated_fraction() const {
  return static_cast<double>(truncated_steps) /
         (static_cast<double>(config_.n_paths) * static_cast<double>(config_.total_steps()));
}

namespace {

// Per-path random streams for one chunk. With antithetic sampling, paths
// 2q and 2q+1 share stream q; the odd path mirrors the even one's draws.
class ChunkStreams {
 public:
  ChunkStreams(std::uint64_t seed, std::int64_t first_path, std::size_t paths, bool antithetic)
      : anti_(antithetic), n1_(paths), u_(paths), n2_(paths) {
    for (std::size_t q = 0; q < paths; ++q) {
      const std::int64_t path = first_path + static_cast<std::int64_t>(q);
      if (antithetic && path % 2 == 1) {
        gens_.emplace_back();
        continue;
      }
      const auto stream = static_cast<std::uint64_t>(antithetic ? path / 2 : path);
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
      gens_.emplace_back(seq);
    }
    normals_.resize(paths);
  }

  // Draws (n1, u, n2) for every path of the chunk for one step.
  void draw(bool need_uniform, bool mirror_n1) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t q = 0; q < n1_.size(); ++q) {
      if (anti_ && q % 2 == 1) {
        n1_[q] = mirror_n1 ? -n1_[q - 1] : n1_[q - 1];
        u_[q] = 1.0 - u_[q - 1];
        n2_[q] = -n2_[q - 1];
        continue;
      }
      n1_[q] = normals_[q](gens_[q]);
      if (need_uniform) u_[q] = unif(gens_[q]);
      n2_[q] = normals_[q](gens_[q]);
    }
  }

  double n1(std::size_t q) const { return n1_[q]; }
  double u(std::size_t q) const { return u_[q]; }
  double n2(std::size_t q) const { return n2_[q]; }

 private:
  bool anti_;
  std::vector<std::mt19937_64> gens_;
  std::vector<std::normal_distribution<double>> normals_;
  std::vector<double> n1_, u_, n2_;
};

// Inverse Gaussian with mean m and shape m^2 / kappa^2 (variance kappa^2 m),
// Michael-Schucany-Haas with the smaller root written without cancellation.
inline double inverse_gaussian(double m, double kappa, double n, double u) {
  const double a = n * n * kappa * kappa / (2.0 * m);
  const double x = m / (1.0 + a + std::sqrt(a * (a + 2.0)));
  return u <= m / (m + x) ? x : m * m / x;
}

}  // namespace

PathBatch simulate_paths(const ModelParams& p, const ForwardVarianceCurve& xi, const SimConfig& config) {
  p.validate();
  config.validate();
  if (config.memory_estimate() > config.memory_limit) {
    throw ResourceError("simulation needs about " + std::to_string(config.memory_estimate() >> 20) +
                        " MiB, above the configured limit of " + std::to_string(config.memory_limit >> 20) + " MiB");
  }
  const auto N = static_cast<std::size_t>(config.total_steps());
  const double D = config.step();
  const int spd = config.steps_per_day;
  const bool ivi = config.scheme == Scheme::IntegratedVariance;

  const KernelWeights kw = precompute_kernel_weights(p, config);
  const double kappa = ivi ? kw.integrated[0] : 0.0;
  std::vector<double> drift(N);
  for (std::size_t i = 0; i < N; ++i) drift[i] = ivi ? xi.integral(i * D, (i + 1) * D) : xi(i * D);

  detail::CausalConvolver conv(ivi ? kw.integrated : kw.level, N);

  PathBatch batch(p, config);
  batch.kernel_checksum = kw.checksum;

  std::int64_t chunk = std::min<std::int64_t>(config.chunk_paths, config.n_paths);
  if (config.antithetic && chunk % 2 == 1) ++chunk;
  const std::int64_t n_chunks = (config.n_paths + chunk - 1) / chunk;
  const std::int64_t last = config.n_paths - (n_chunks - 1) * chunk;
  conv.prepare(static_cast<std::size_t>(chunk));
  conv.prepare(static_cast<std::size_t>(last));

  const double rho = p.rho;
  const double rho_bar = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  const double sqrt_D = std::sqrt(D);

  std::atomic<std::int64_t> next{0};
  std::atomic<std::int64_t> truncated{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    try {
      auto ws = conv.make_workspace(static_cast<std::size_t>(chunk));
      std::vector<double> day_r(static_cast<std::size_t>(chunk)), day_s2(static_cast<std::size_t>(chunk));
      for (;;) {
        const std::int64_t c = next.fetch_add(1);
        if (c >= n_chunks) break;
        {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (failure) break;
        }
        const std::int64_t p0 = c * chunk;
        const auto P = static_cast<std::size_t>(c == n_chunks - 1 ? last : chunk);
        ChunkStreams rng(config.seed, p0, P, config.antithetic);
        std::fill(day_r.begin(), day_r.end(), 0.0);
        std::fill(day_s2.begin(), day_s2.end(), 0.0);
        std::int64_t frozen = 0;

        conv.run(ws, P, [&](std::size_t i, const double* past, double* dz) {
          rng.draw(ivi, !ivi);
          for (std::size_t q = 0; q < P; ++q) {
            double x, dZ, dR;
            if (ivi) {
              const double m = drift[i] + past[q];
              if (!(m > 0.0)) {
                if (!std::isfinite(m)) throw NumericalError("non-finite variance in simulation at step " + std::to_string(i));
                ++frozen;
                x = 0.0, dZ = 0.0, dR = 0.0;
              } else {
                if (kappa > 0.0) {
                  x = inverse_gaussian(m, kappa, rng.n1(q), rng.u(q));
                  dZ = (x - m) / kappa;
                } else {
                  x = m;
                  dZ = std::sqrt(m) * rng.n1(q);
                }
                dR = rho * dZ + rho_bar * std::sqrt(x) * rng.n2(q);
              }
            } else {
              const double v = drift[i] + past[q];
              if (!std::isfinite(v)) throw NumericalError("non-finite variance in simulation at step " + std::to_string(i));
              if (v < 0.0) ++frozen;
              const double vp = std::max(v, 0.0), sv = std::sqrt(vp);
              const double dB = sqrt_D * rng.n1(q);
              dZ = sv * dB;
              dR = sv * (rho * dB + rho_bar * sqrt_D * rng.n2(q));
              x = vp * D;
            }
            dz[q] = dZ;
            day_r[q] += dR;
            day_s2[q] += x;
          }
          if ((i + 1) % static_cast<std::size_t>(spd) == 0) {
            const int day = static_cast<int>((i + 1) / spd);
            for (std::size_t q = 0; q < P; ++q) {
              batch.r(p0 + static_cast<std::int64_t>(q), day) = day_r[q];
              batch.s2(p0 + static_cast<std::int64_t>(q), day) = day_s2[q];
              day_r[q] = 0.0;
              day_s2[q] = 0.0;
            }
          }
        });
        truncated += frozen;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  const int n_threads = static_cast<int>(std::min<std::int64_t>(config.threads, n_chunks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  batch.truncated_steps = truncated.load();
  return batch;
}

// ---------------------------------------------------------------------------
// Estimators

namespace {

// Mean shifted by the first element, so that identical inputs give exactly
// that value back.
double shifted_mean(const std::vector<double>& x) {
  const double x0 = x.front();
  double s = 0.0;
  for (double v : x) s += v - x0;
  return x0 + s / static_cast<double>(x.size());
}

// Standard error of the mean of per-path values, treating antithetic pairs
// as single units.
Estimate mean_with_error(const std::vector<double>& v, bool paired) {
  std::vector<double> units;
  if (paired) {
    for (std::size_t i = 0; i + 1 < v.size(); i += 2) units.push_back(0.5 * (v[i] + v[i + 1]));
  } else {
    units = v;
  }
  const double m = shifted_mean(units);
  double ss = 0.0;
  for (double u : units) ss += (u - m) * (u - m);
  const double n = static_cast<double>(units.size());
  return {shifted_mean(v), std::sqrt(ss / (n - 1.0) / n)};
}

void check_days(const PathBatch& b, int t_day, int k) {
  require(k >= 0, "lag must be non-negative");
  require(t_day >= 1 && t_day + k <= b.n_days(),
          "batch has " + std::to_string(b.n_days()) + " days, need day " + std::to_string(t_day + k));
  const std::int64_t units = b.config().antithetic ? b.n_paths() / 2 : b.n_paths();
  require(units >= 2, "need at least two independent paths for an estimate");
}

}  // namespace

ZumbachEstimate estimate_zumbach_mc(const PathBatch& b, int t_day, int k) {
  require(k >= 1, "lag must be >= 1");
  check_days(b, t_day, k);
  const auto n = static_cast<std::size_t>(b.n_paths());
  std::vector<double> a(n), bb(n), c(n), e(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto path = static_cast<std::int64_t>(i);
    a[i] = b.r(path, t_day) * b.r(path, t_day);
    bb[i] = b.s2(path, t_day + k);
    c[i] = b.r(path, t_day + k) * b.r(path, t_day + k);
    e[i] = b.s2(path, t_day);
  }
  const double ma = shifted_mean(a), mb = shifted_mean(bb), mc = shifted_mean(c), me = shifted_mean(e);
  std::vector<double> psi(n), prod(n);
  double cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    psi[i] = (a[i] - ma) * (bb[i] - mb) - (c[i] - mc) * (e[i] - me);
    cov += psi[i];
    prod[i] = a[i] * bb[i] - c[i] * e[i];
  }
  const bool paired = b.config().antithetic;
  ZumbachEstimate out;
  out.cov.value = cov / (static_cast<double>(n) - 1.0);
  out.cov.std_error = mean_with_error(psi, paired).std_error;
  out.expectation = mean_with_error(prod, paired);
  out.samples = paired ? b.n_paths() / 2 : b.n_paths();
  return out;
}

MomentEstimate estimate_moments_mc(const PathBatch& b, int t_day) {
  check_days(b, t_day, 0);
  const auto n = static_cast<std::size_t>(b.n_paths());
  std::vector<double> s2(n), r2(n), r4(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto path = static_cast<std::int64_t>(i);
    s2[i] = b.s2(path, t_day);
    const double r = b.r(path, t_day);
    r2[i] = r * r;
    r4[i] = r2[i] * r2[i];
  }
  const bool paired = b.config().antithetic;
  MomentEstimate out;
  out.mean_sigma2 = mean_with_error(s2, paired);
  out.mean_r2 = mean_with_error(r2, paired);
  out.fourth_moment_r = mean_with_error(r4, paired);
  const double m = out.mean_sigma2.value;
  std::vector<double> dev(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dev[i] = (s2[i] - m) * (s2[i] - m);
    ss += dev[i];
  }
  out.var_sigma2.value = ss / (static_cast<double>(n) - 1.0);
  out.var_sigma2.std_error = mean_with_error(dev, paired).std_error;
  out.samples = paired ? b.n_paths() / 2 : b.n_paths();
  return out;
}

// ---------------------------------------------------------------------------
// Export

void write_path_csv(const PathBatch& b, const std::string& path) {
  detail::AtomicFile f(path);
  auto& out = f.stream();
  out << "path_id,day,r,sigma2\n";
  char buf[96];
  for (std::int64_t i = 0; i < b.n_paths(); ++i) {
    for (int d = 1; d <= b.n_days(); ++d) {
      std::snprintf(buf, sizeof buf, "%" PRId64 ",%d,%.17g,%.17g\n", i, d, b.r(i, d), b.s2(i, d));
      out << buf;
    }
  }
  f.commit();
}

void write_generic_csv(const PathBatch& b, const std::string& path, const std::string& prefix) {
  detail::AtomicFile f(path);
  auto& out = f.stream();
  out << "index_id,date,r,s2\n";
  std::vector<std::string> dates;
  for (int d = 0; d < b.n_days(); ++d) dates.push_back(Date::business_day(d).str());
  char buf[96];
  for (std::int64_t i = 0; i < b.n_paths(); ++i) {
    const std::string id = prefix + std::to_string(i);
    for (int d = 1; d <= b.n_days(); ++d) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", b.r(i, d), b.s2(i, d));
      out << id << ',' << dates[static_cast<std::size_t>(d - 1)] << buf;
    }
  }
  f.commit();
}

}  // namespace zlab
