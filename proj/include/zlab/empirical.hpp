#pragma once

// Empirical time-reversal statistics from daily return / realized-variance
// series.
//
//   C2(tau)  = < (s2_t - <s2_t>) r^2_{t-tau} >
//   rho(tau) = C2(tau) / sqrt(<(s2_t - <s2_t>)^2> <(r^2_{t-tau} - <r^2_{t-tau}>)^2>)
//   Z(tau)   = C2(tau) - C2(-tau)
//   Delta(tau) = sum_{i=1..tau} (rho(i) - rho(-i))
//
// Positive tau means returns lead variance. Averages run over the valid
// pairs (t, t - tau) with divisor n; the centring mean and both variances
// use the same pair set. Lags count rows of the index's own calendar: a row
// dropped during cleaning leaves a hole, and pairs with a leg in a hole are
// skipped.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "zlab/date.hpp"

namespace zlab {

struct DailySeries {
  std::string index_id;
  std::vector<Date> dates;          // strictly increasing
  std::vector<double> r;            // open-to-close log return
  std::vector<double> s2;           // realized variance, daily units, >= 0
  std::vector<std::int64_t> slots;  // calendar row of each observation, strictly increasing
  std::vector<Date> gaps;           // dates of rows dropped while cleaning

  std::size_t size() const { return r.size(); }
  // Fills slots with 0..n-1 when empty and checks the invariants above.
  void validate();
};

enum class InputFormat { Oxford, Generic };

struct IngestOptions {
  InputFormat format = InputFormat::Generic;
  std::string variance_column = "rk_parzen";  // Oxford format only
};

struct IngestResult {
  std::vector<DailySeries> series;  // in order of first appearance
  std::vector<std::string> warnings;
};

// Oxford-style input: header row with (at least) Symbol, a date column
// ("date" or an unnamed first column), open_price, close_price and the
// variance column; r = log(close / open). Generic input: index_id,date,r,s2.
// Rows with a missing or invalid field are dropped and recorded as gaps.
IngestResult ingest(const std::string& path, const IngestOptions& opt = {});
IngestResult ingest(std::istream& in, const IngestOptions& opt = {});

struct EmpiricalOptions {
  std::size_t min_pairs = 30;   // fewer valid pairs at some lag is an error
  bool demean = false;          // subtract the sample mean return before squaring
  double winsorize = 0.0;       // clip r and s2 to their [q, 1-q] quantiles when q > 0
  bool annualize = false;       // multiply s2 by 252
  int threads = 1;
};

// Applies demean / winsorize / annualize; the other options are ignored.
DailySeries prepare(const DailySeries& s, const EmpiricalOptions& opt);

double c2(const DailySeries& s, int tau, std::size_t min_pairs = 30);

struct TraCurve {
  std::vector<int> taus;  // 1..tau_max
  std::vector<double> c2_fwd, c2_bwd;
  std::vector<double> rho_fwd, rho_bwd;
  std::vector<double> z;  // c2_fwd - c2_bwd
  // Valid pairs per lag for a single series; contributing curves for an average.
  std::vector<std::int64_t> n_obs;

  std::size_t size() const { return taus.size(); }
};

TraCurve rho_curve(const DailySeries& s, int tau_max, std::size_t min_pairs = 30);

// Runs prepare + rho_curve for every series, in parallel when opt.threads > 1.
// Output order follows the input.
std::vector<TraCurve> rho_curves(const std::vector<DailySeries>& series, int tau_max, const EmpiricalOptions& opt);

// Pointwise mean of every column; the curves must share the tau grid.
TraCurve cross_index_average(const std::vector<TraCurve>& curves);

double integrated_difference(const TraCurve& curve, int tau);
std::vector<double> integrated_differences(const TraCurve& curve);

// tau,c2_fwd,c2_bwd,rho_fwd,rho_bwd,z,delta_cum,n_obs
void write_tra_csv(const TraCurve& curve, const std::string& path);
void write_tra_json(const TraCurve& curve, const std::string& path);
std::string tra_json(const TraCurve& curve);

// Reads a file written by write_tra_csv.
TraCurve read_tra_csv(const std::string& path);

}  // namespace zlab
