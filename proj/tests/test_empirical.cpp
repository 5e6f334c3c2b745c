#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "zlab/empirical.hpp"
#include "zlab/error.hpp"
#include "zlab/simulate.hpp"
#include "oracles/pair_oracle.hpp"

using namespace zlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

DailySeries make_series(std::vector<double> r, std::vector<double> s2, std::vector<std::int64_t> slots = {}) {
  DailySeries s;
  s.index_id = "T";
  s.r = std::move(r);
  s.s2 = std::move(s2);
  if (slots.empty()) {
    for (std::size_t i = 0; i < s.r.size(); ++i) slots.push_back(static_cast<std::int64_t>(i));
  }
  s.slots = slots;
  for (auto slot : slots) s.dates.push_back(Date::business_day(slot));
  return s;
}

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << content;
  return path.string();
}

DailySeries reversed(const DailySeries& s) {
  std::vector<double> r(s.r.rbegin(), s.r.rend()), s2(s.s2.rbegin(), s.s2.rend());
  std::vector<std::int64_t> slots;
  for (auto it = s.slots.rbegin(); it != s.slots.rend(); ++it) slots.push_back(s.slots.back() - *it);
  return make_series(r, s2, slots);
}

}  // namespace

TEST_CASE("ingest computes open-to-close log returns", "[empirical]") {
  std::istringstream in(
      ",Symbol,open_price,close_price,rk_parzen,rv5\n"
      "2000-01-03 00:00:00+01:00,.AEX,100,101,0.0001,0.0002\n"
      "2000-01-04 00:00:00+01:00,.AEX,101,100,0.0003,0.0002\n");
  IngestOptions opt;
  opt.format = InputFormat::Oxford;
  const auto res = ingest(in, opt);
  REQUIRE(res.series.size() == 1);
  const auto& s = res.series[0];
  CHECK(s.index_id == ".AEX");
  REQUIRE(s.size() == 2);
  CHECK_THAT(s.r[0], WithinAbs(0.00995033085, 1e-11));
  CHECK(s.r[0] == std::log(101.0 / 100.0));
  CHECK(s.s2[1] == 0.0003);
  CHECK(s.dates[0].str() == "2000-01-03");

  opt.variance_column = "rv5";
  std::istringstream again(
      "date,Symbol,open_price,close_price,rv5\n2001-02-05,.SPX,10,10,0.5\n");
  CHECK(ingest(again, opt).series[0].s2[0] == 0.5);
}

TEST_CASE("rows with missing values are dropped and leave a gap", "[empirical]") {
  std::istringstream in(
      "date,Symbol,open_price,close_price,rk_parzen\n"
      "2000-01-03,.FTSE,100,101,0.0001\n"
      "2000-01-04,.FTSE,100,101,NaN\n"
      "2000-01-05,.FTSE,100,99,0.0002\n"
      "2000-01-03,XYZ,5,5,0.1\n");
  IngestOptions opt;
  opt.format = InputFormat::Oxford;
  const auto res = ingest(in, opt);
  REQUIRE(res.series.size() == 2);
  const auto& s = res.series[0];
  CHECK(s.size() == 2);
  REQUIRE(s.gaps.size() == 1);
  CHECK(s.gaps[0].str() == "2000-01-04");
  CHECK(s.slots == std::vector<std::int64_t>{0, 2});
  CHECK(res.series[1].index_id == "XYZ");  // unknown symbols pass through
  CHECK_FALSE(res.warnings.empty());
}

TEST_CASE("ingest sorts each index by date", "[empirical]") {
  std::istringstream in("index_id,date,r,s2\nA,2000-01-05,0.3,3\nA,2000-01-03,0.1,1\nB,2000-01-03,1,1\nA,2000-01-04,0.2,2\n");
  const auto res = ingest(in);
  REQUIRE(res.series.size() == 2);
  CHECK(res.series[0].r == std::vector<double>{0.1, 0.2, 0.3});
}

TEST_CASE("ingest reports malformed input with line numbers", "[empirical]") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      ingest(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("index_id,date,r,s2\nA,2000-01-03,0.1,1\n\nA,2000-01-04,abc,1\n") == 4);
  CHECK(line_of("index_id,date,r,s2\nA,2000-13-03,0.1,1\n") == 2);
  CHECK(line_of("index_id,date,r,s2\nA,2000-01-03,0.1\n") == 2);
  CHECK(line_of("index_id,date,r,s2\nA,2000-01-03,0.1,1\nA,2000-01-03,0.2,1\n") == 3);
  CHECK(line_of("index_id,date,r\nA,2000-01-03,0.1\n") == 1);
  CHECK(line_of("") == 1);
  CHECK_THROWS_AS(ingest(std::string("/nonexistent/input.csv")), IoError);

  std::istringstream empty_series("index_id,date,r,s2\nA,2000-01-03,nan,1\n");
  const auto res = ingest(empty_series);
  CHECK(res.series.empty());
  CHECK_FALSE(res.warnings.empty());
}

TEST_CASE("simulated exports round-trip through ingest", "[empirical]") {
  SimConfig c;
  c.n_paths = 3;
  c.n_days = 30;
  c.steps_per_day = 5;
  const auto batch = simulate_paths(ModelParams{}, ForwardVarianceCurve::flat(0.025), c);
  const auto path = (std::filesystem::temp_directory_path() / "zlab_roundtrip.csv").string();
  write_generic_csv(batch, path, "SYN");
  const auto res = ingest(path);
  REQUIRE(res.series.size() == 3);
  for (std::int64_t i = 0; i < 3; ++i) {
    const auto& s = res.series[static_cast<std::size_t>(i)];
    CHECK(s.index_id == "SYN" + std::to_string(i));
    REQUIRE(s.size() == 30);
    for (int d = 1; d <= 30; ++d) {
      REQUIRE(s.r[static_cast<std::size_t>(d - 1)] == batch.r(i, d));
      REQUIRE(s.s2[static_cast<std::size_t>(d - 1)] == batch.s2(i, d));
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("c2 on hand-sized series", "[empirical]") {
  const auto constant = make_series({0.1, -0.3, 0.2, 0.5, -0.1, 0.3}, std::vector<double>(6, 0.1));
  for (int tau : {-3, -1, 1, 2, 4}) CHECK(c2(constant, tau, 1) == 0.0);

  // Pairs (s2_t, r_{t-1}^2): (2,1), (3,4), (4,9), (5,16); mean s2 = 3.5.
  const auto s = make_series({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5});
  CHECK_THAT(c2(s, 1, 1), WithinRel(6.25, 1e-15));
  // Pairs (s2_t, r_{t+1}^2): (1,4), (2,9), (3,16), (4,25); mean s2 = 2.5.
  CHECK_THAT(c2(s, -1, 1), WithinRel((-1.5 * 4 - 0.5 * 9 + 0.5 * 16 + 1.5 * 25) / 4, 1e-15));
}

TEST_CASE("c2 and rho match a brute-force pair enumeration", "[empirical]") {
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> len(12, 50);
  std::bernoulli_distribution hole(0.1);
  double worst_c2 = 0.0, worst_rho = 0.0;
  int checked = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int n = len(gen);
    std::vector<double> r, s2;
    std::vector<std::int64_t> slots;
    for (std::int64_t slot = 0; static_cast<int>(r.size()) < n; ++slot) {
      if (rep % 2 == 1 && hole(gen)) continue;
      r.push_back(0.01 * n01(gen));
      s2.push_back(1e-4 * std::exp(n01(gen)));
      slots.push_back(slot);
    }
    const auto s = make_series(r, s2, slots);
    int tau_max = 0;
    while (tau_max + 1 < n && oracle::oracle_lag(s, tau_max + 1).n >= 3 && oracle::oracle_lag(s, -(tau_max + 1)).n >= 3) ++tau_max;
    REQUIRE(tau_max >= 1);
    const auto curve = rho_curve(s, tau_max, 3);
    for (int tau = 1; tau <= tau_max; ++tau) {
      const auto f = oracle::oracle_lag(s, tau), b = oracle::oracle_lag(s, -tau);
      const auto i = static_cast<std::size_t>(tau - 1);
      // Relative to |c2| or, when c2 is near zero, to its natural scale sd(s2) sd(r^2).
      const double scale_f = std::max(std::abs(f.c2), std::abs(f.c2 / f.rho));
      const double scale_b = std::max(std::abs(b.c2), std::abs(b.c2 / b.rho));
      worst_c2 = std::max({worst_c2, std::abs(curve.c2_fwd[i] - f.c2) / scale_f,
                           std::abs(curve.c2_bwd[i] - b.c2) / scale_b});
      worst_rho = std::max({worst_rho, std::abs(curve.rho_fwd[i] - f.rho), std::abs(curve.rho_bwd[i] - b.rho)});
      REQUIRE(curve.n_obs[i] == static_cast<std::int64_t>(f.n));
      REQUIRE(curve.z[i] == curve.c2_fwd[i] - curve.c2_bwd[i]);
      REQUIRE(std::abs(curve.rho_fwd[i]) <= 1.0);
      CHECK_THAT(c2(s, tau, 3), WithinRel(curve.c2_fwd[i], 1e-15));
      ++checked;
    }
  }
  INFO("lags checked: " << checked);
  CHECK(worst_c2 < 1e-12);
  CHECK(worst_rho < 1e-12);
}

TEST_CASE("time reversal swaps leading and lagging", "[empirical]") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n01;
  std::vector<double> r, s2;
  std::vector<std::int64_t> slots;
  for (std::int64_t slot = 0; r.size() < 400; ++slot) {
    if (slot % 17 == 5) continue;
    r.push_back(n01(gen));
    s2.push_back(std::exp(n01(gen)));
    slots.push_back(slot);
  }
  const auto s = make_series(r, s2, slots);
  const auto rev = reversed(s);
  const auto a = rho_curve(s, 20), b = rho_curve(rev, 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK_THAT(b.c2_fwd[i], WithinRel(a.c2_bwd[i], 1e-12));
    CHECK_THAT(b.c2_bwd[i], WithinRel(a.c2_fwd[i], 1e-12));
    CHECK_THAT(b.z[i], WithinAbs(-a.z[i], 1e-12 * std::abs(a.c2_fwd[i])));
  }
}

TEST_CASE("scaling returns scales c2 and leaves rho unchanged", "[empirical]") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> n01;
  std::vector<double> r(300), s2(300);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = n01(gen);
    s2[i] = std::exp(0.5 * n01(gen));
  }
  const auto s = make_series(r, s2);
  const double k = 3.7;
  for (auto& x : r) x *= k;
  const auto scaled = make_series(r, s2);
  const auto a = rho_curve(s, 15), b = rho_curve(scaled, 15);
  for (std::size_t i = 0; i < 15; ++i) {
    CHECK_THAT(b.c2_fwd[i], WithinRel(k * k * a.c2_fwd[i], 1e-12));
    CHECK_THAT(b.c2_bwd[i], WithinRel(k * k * a.c2_bwd[i], 1e-12));
    CHECK_THAT(b.rho_fwd[i], WithinAbs(a.rho_fwd[i], 1e-12));
    CHECK_THAT(b.rho_bwd[i], WithinAbs(a.rho_bwd[i], 1e-12));
  }
}

TEST_CASE("with s2 = r^2 rho(1) is the lag-one autocorrelation of r^2", "[empirical]") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n01;
  std::vector<double> r(500), s2(500);
  double v = 1.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    v = 0.2 + 0.7 * v + 0.1 * (i ? r[i - 1] * r[i - 1] : 0.0);
    r[i] = std::sqrt(v) * n01(gen);
    s2[i] = r[i] * r[i];
  }
  const auto curve = rho_curve(make_series(r, s2), 1);
  double mx = 0, my = 0;
  const std::size_t n = r.size() - 1;
  for (std::size_t t = 1; t <= n; ++t) mx += s2[t], my += s2[t - 1];
  mx /= n;
  my /= n;
  double c = 0, vx = 0, vy = 0;
  for (std::size_t t = 1; t <= n; ++t) {
    c += (s2[t] - mx) * (s2[t - 1] - my);
    vx += (s2[t] - mx) * (s2[t] - mx);
    vy += (s2[t - 1] - my) * (s2[t - 1] - my);
  }
  CHECK_THAT(curve.rho_fwd[0], WithinAbs(c / std::sqrt(vx * vy), 1e-12));
}

TEST_CASE("independent and shuffled series show no asymmetry", "[empirical]") {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> n01;
  const std::size_t n = 4000;
  std::vector<double> r(n), s2(n);
  for (std::size_t i = 0; i < n; ++i) {
    s2[i] = 0.01 * std::exp(0.5 * n01(gen));
    r[i] = std::sqrt(s2[i]) * n01(gen);
  }
  const double band = 3.0 / std::sqrt(static_cast<double>(n));
  auto within_band = [&](const TraCurve& c) {
    for (std::size_t i = 0; i < c.size(); ++i)
      if (std::abs(c.rho_fwd[i]) >= band || std::abs(c.rho_bwd[i]) >= band) return false;
    return true;
  };
  CHECK(within_band(rho_curve(make_series(r, s2), 10)));

  // A dependent simulated series, then the same data with its days shuffled.
  ModelParams p;
  p.hurst = 0.1;
  SimConfig c;
  c.n_paths = 1;
  c.n_days = static_cast<int>(n);
  c.steps_per_day = 2;
  c.seed = 4;
  const auto batch = simulate_paths(p, ForwardVarianceCurve::flat(0.025), c);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 shuffle_gen(31);
  std::shuffle(order.begin(), order.end(), shuffle_gen);
  std::vector<double> rs(n), vs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rs[i] = batch.r(0, static_cast<int>(order[i]) + 1);
    vs[i] = batch.s2(0, static_cast<int>(order[i]) + 1);
  }
  CHECK(within_band(rho_curve(make_series(rs, vs), 10)));
}

TEST_CASE("degenerate inputs are rejected", "[empirical]") {
  std::vector<double> r(40), s2(40);
  for (std::size_t i = 0; i < 40; ++i) r[i] = std::sin(1.0 + i), s2[i] = 1.0 + std::cos(2.0 * i);
  const auto s = make_series(r, s2);
  CHECK_NOTHROW(c2(s, 10));
  CHECK_THROWS_AS(c2(s, 11), DomainError);  // 29 pairs
  CHECK_THROWS_AS(c2(s, 40, 1), DomainError);
  CHECK_THROWS_AS(c2(s, 0, 1), DomainError);
  CHECK_THROWS_AS(rho_curve(s, 0), DomainError);
  CHECK_THROWS_AS(rho_curve(make_series(r, std::vector<double>(40, 2.0)), 3), DomainError);
  auto bad = make_series(r, s2);
  bad.s2[3] = -1.0;
  CHECK_THROWS_AS(c2(bad, 1), DomainError);
}

TEST_CASE("series preparation options", "[empirical]") {
  const auto s = make_series({0.1, 0.3, -0.2, 0.6, 0.2}, {1, 2, 3, 4, 100});
  EmpiricalOptions opt;
  opt.demean = true;
  const auto d = prepare(s, opt);
  double m = 0;
  for (double x : d.r) m += x;
  CHECK_THAT(m, WithinAbs(0.0, 1e-15));
  CHECK_THAT(d.r[0], WithinAbs(0.1 - 0.2, 1e-15));

  opt = {};
  opt.annualize = true;
  CHECK(prepare(s, opt).s2[1] == 2.0 * 252.0);

  opt = {};
  opt.winsorize = 0.25;
  const auto w = prepare(s, opt);
  CHECK(w.s2[4] == 4.0);  // upper quartile of {1,2,3,4,100}
  CHECK(w.s2[0] == 2.0);

  opt.winsorize = 0.5;
  CHECK_THROWS_AS(prepare(s, opt), DomainError);
}

TEST_CASE("cross-index averaging and integrated difference", "[empirical]") {
  TraCurve a;
  a.taus = {1, 2};
  a.c2_fwd = {1, 2};
  a.c2_bwd = {0, 1};
  a.rho_fwd = {0.3, 0.2};
  a.rho_bwd = {0.1, 0.1};
  a.z = {1, 1};
  a.n_obs = {100, 99};
  CHECK_THAT(integrated_difference(a, 2), WithinAbs(0.3, 1e-15));
  CHECK_THAT(integrated_difference(a, 1), WithinAbs(0.2, 1e-15));
  CHECK_THROWS_AS(integrated_difference(a, 3), DomainError);

  const auto one = cross_index_average({a});
  CHECK(one.rho_fwd == a.rho_fwd);
  CHECK(one.c2_bwd == a.c2_bwd);
  CHECK(one.n_obs == std::vector<std::int64_t>{1, 1});

  TraCurve b = a;
  b.rho_fwd = {0.5, 0.0};
  b.rho_bwd = b.rho_fwd;
  b.z = {3, -1};
  CHECK(integrated_difference(b, 2) == 0.0);
  const auto two = cross_index_average({a, b});
  CHECK_THAT(two.rho_fwd[0], WithinAbs(0.4, 1e-15));
  CHECK_THAT(two.rho_fwd[1], WithinAbs(0.1, 1e-15));
  CHECK_THAT(two.z[1], WithinAbs(0.0, 1e-15));
  CHECK(two.n_obs == std::vector<std::int64_t>{2, 2});

  TraCurve c = a;
  c.taus = {1, 3};
  CHECK_THROWS_AS(cross_index_average({a, c}), GridMismatchError);
  CHECK_THROWS_AS(cross_index_average({}), DomainError);
}

TEST_CASE("per-index curves are independent of the thread count", "[empirical]") {
  std::mt19937_64 gen(77);
  std::normal_distribution<double> n01;
  std::vector<DailySeries> all;
  for (int j = 0; j < 5; ++j) {
    std::vector<double> r(200), s2(200);
    for (std::size_t i = 0; i < 200; ++i) r[i] = n01(gen), s2[i] = std::exp(n01(gen));
    all.push_back(make_series(r, s2));
  }
  EmpiricalOptions opt;
  const auto serial = rho_curves(all, 12, opt);
  opt.threads = 3;
  const auto parallel = rho_curves(all, 12, opt);
  for (std::size_t j = 0; j < all.size(); ++j) CHECK(serial[j].rho_fwd == parallel[j].rho_fwd);

  all[2].r.resize(20);
  all[2].s2.resize(20);
  all[2].dates.resize(20);
  all[2].slots.resize(20);
  CHECK_THROWS_AS(rho_curves(all, 12, opt), DomainError);
}

TEST_CASE("curve files round-trip", "[empirical]") {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n01;
  std::vector<double> r(120), s2(120);
  for (std::size_t i = 0; i < 120; ++i) r[i] = n01(gen), s2[i] = std::exp(n01(gen));
  const auto curve = rho_curve(make_series(r, s2), 7);
  const auto dir = std::filesystem::temp_directory_path();
  const auto csv = (dir / "zlab_curve.csv").string();
  write_tra_csv(curve, csv);
  const auto back = read_tra_csv(csv);
  CHECK(back.taus == curve.taus);
  CHECK(back.c2_fwd == curve.c2_fwd);
  CHECK(back.rho_bwd == curve.rho_bwd);
  CHECK(back.n_obs == curve.n_obs);

  const auto json = (dir / "zlab_curve.json").string();
  write_tra_json(curve, json);
  std::ifstream in(json);
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("tau").size() == 7);
  CHECK(j.at("delta_cum").back().get<double>() == integrated_differences(curve).back());
  CHECK(j.at("z")[3].get<double>() == curve.z[3]);

  CHECK_THROWS_AS(read_tra_csv(write_temp("zlab_not_curve.csv", "a,b\n1,2\n")), ParseError);
  std::filesystem::remove(csv);
  std::filesystem::remove(json);
}
