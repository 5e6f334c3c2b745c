#pragma once

// Monte Carlo simulation of the rough Heston variance in its Volterra form
//
//   V_t = xi_0(t) + (nu/lambda) int_0^t f(t-s) dZ_s,   dZ = sqrt(V) dB,
//
// with daily returns r = sum sqrt(V) dW and integrated variances
// sigma^2 = int V over each day.
//
// Two schemes share one convolution engine:
//
//  * IntegratedVariance (default). Works with X_l = int over step l of V.
//    Given the past, X_l = m_l + kappa dZ_l where m_l collects xi_0 and the
//    kernel-weighted past increments, and X_l is drawn from the inverse
//    Gaussian law with mean m_l and variance kappa^2 m_l, which is
//    positive by construction. Returns use dR = rho dZ + sqrt(1-rho^2)
//    sqrt(X) N. When m_l <= 0 the step is frozen (X = dZ = 0) and counted as
//    truncated.
//  * Euler. V_i = xi_0(t_i) + sum_{j<i} w_{i-j} sqrt(V_j^+) dB_j with
//    integrated-kernel weights w_m = (nu/lambda)(F(m D) - F((m-1) D))/D and
//    full truncation V^+ = max(V, 0).
//
// Each path owns an RNG stream seeded from (seed, path index), so results do
// not depend on the thread count or chunking.

#include <cstdint>
#include <string>
#include <vector>

#include "zlab/curve.hpp"
#include "zlab/model.hpp"

namespace zlab {

enum class Scheme { IntegratedVariance, Euler };

struct SimConfig {
  std::int64_t n_paths = 10000;
  int steps_per_day = 20;
  int n_days = 252;
  double delta = kTradingDay;  // years per day
  std::uint64_t seed = 1;
  bool antithetic = false;
  Scheme scheme = Scheme::IntegratedVariance;
  int threads = 1;
  int chunk_paths = 8;  // small chunks keep the convolution buffers in cache
  std::size_t memory_limit = std::size_t{3} << 30;  // bytes

  double step() const { return delta / steps_per_day; }
  std::int64_t total_steps() const { return static_cast<std::int64_t>(n_days) * steps_per_day; }
  // Bytes held by the result plus per-thread scratch.
  std::size_t memory_estimate() const;
  void validate() const;
};

struct KernelWeights {
  double step = 0.0;
  // level[m] = w_m for m >= 1 (level[0] = 0): Euler weights on V.
  std::vector<double> level;
  // integrated[d] for d >= 0: weight of dZ_{l-d} in X_l, i.e.
  // (nu/lambda)(G((d+1)D) - 2 G(dD) + G((d-1)D)) / D with G = int F, G(<0) = 0.
  // Only filled for the integrated-variance scheme.
  std::vector<double> integrated;
  std::uint64_t checksum = 0;  // FNV-1a over the weights used by the scheme
};

KernelWeights precompute_kernel_weights(const ModelParams& p, const SimConfig& config);

// Daily aggregates for every path. Days are numbered 1..n_days; day d covers
// ((d-1) delta, d delta].
class PathBatch {
 public:
  PathBatch(const ModelParams& p, const SimConfig& c);

  std::int64_t n_paths() const { return config_.n_paths; }
  int n_days() const { return config_.n_days; }
  const SimConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }

  double r(std::int64_t path, int day) const { return r_[index(path, day)]; }
  double s2(std::int64_t path, int day) const { return s2_[index(path, day)]; }
  double& r(std::int64_t path, int day) { return r_[index(path, day)]; }
  double& s2(std::int64_t path, int day) { return s2_[index(path, day)]; }

  std::uint64_t kernel_checksum = 0;
  std::int64_t truncated_steps = 0;
  double truncated_fraction() const;

 private:
  std::size_t index(std::int64_t path, int day) const;

  ModelParams params_;
  SimConfig config_;
  std::vector<double> r_, s2_;
};

PathBatch simulate_paths(const ModelParams& p, const ForwardVarianceCurve& xi, const SimConfig& config);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct ZumbachEstimate {
  // Cov[r_t^2, s2_{t+k}] - Cov[r_{t+k}^2, s2_t] with unbiased sample covariances.
  Estimate cov;
  // E[r_t^2 s2_{t+k}] - E[r_{t+k}^2 s2_t] as plain sample means.
  Estimate expectation;
  std::int64_t samples = 0;  // independent units behind the standard errors
};

ZumbachEstimate estimate_zumbach_mc(const PathBatch& batch, int t_day, int k);

struct MomentEstimate {
  Estimate mean_sigma2;
  Estimate mean_r2;
  Estimate var_sigma2;
  Estimate fourth_moment_r;
  std::int64_t samples = 0;
};

MomentEstimate estimate_moments_mc(const PathBatch& batch, int t_day);

// path_id,day,r,sigma2
void write_path_csv(const PathBatch& batch, const std::string& path);

// index_id,date,r,s2 with one synthetic index per path, named prefix + path
// number and dated on consecutive business days from 2000-01-03.
void write_generic_csv(const PathBatch& batch, const std::string& path, const std::string& prefix = "SIM");

}  // namespace zlab
