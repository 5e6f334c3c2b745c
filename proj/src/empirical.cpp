#include "zlab/empirical.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include <json.hpp>

#include "atomic_file.hpp"
#include "zlab/error.hpp"

namespace zlab {

using detail::require;

void DailySeries::validate() {
  const std::size_t n = r.size();
  require(s2.size() == n && dates.size() == n, "series '" + index_id + "': arrays differ in length");
  if (slots.empty()) {
    slots.resize(n);
    for (std::size_t i = 0; i < n; ++i) slots[i] = static_cast<std::int64_t>(i);
  }
  require(slots.size() == n, "series '" + index_id + "': slot array differs in length");
  for (std::size_t i = 0; i < n; ++i) {
    require(std::isfinite(r[i]), "series '" + index_id + "': non-finite return at " + dates[i].str());
    require(std::isfinite(s2[i]) && s2[i] >= 0.0,
            "series '" + index_id + "': variance must be finite and >= 0 at " + dates[i].str());
    if (i > 0) {
      require(dates[i - 1] < dates[i], "series '" + index_id + "': dates not strictly increasing at " + dates[i].str());
      require(slots[i - 1] < slots[i], "series '" + index_id + "': slots not strictly increasing");
    }
  }
  require(n == 0 || slots.front() >= 0, "series '" + index_id + "': negative slot");
}

// ---------------------------------------------------------------------------
// Ingest

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_missing(std::string_view s) {
  const std::string l = lower(s);
  return l.empty() || l == "nan" || l == "na" || l == "null" || l == "n/a" || l == "-nan";
}

// nullopt for a missing marker; throws on anything else that is not a number.
std::optional<double> parse_number(std::string_view s, std::size_t line, const char* column) {
  if (is_missing(s)) return std::nullopt;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("cannot parse " + std::string(column) + " value '" + std::string(s) + "'", line);
  return v;
}

struct RawRow {
  Date date;
  std::size_t line = 0;
  double r = 0.0, s2 = 0.0;
  bool valid = false;
};

struct Columns {
  std::size_t id = 0, date = 0, a = 0, b = 0, c = 0;  // generic: r = a, s2 = b; oxford: open, close, rv
  std::size_t width = 0;
};

Columns locate_columns(const std::vector<std::string_view>& header, const IngestOptions& opt) {
  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (lower(header[i]) == lower(name)) return i;
    return std::nullopt;
  };
  auto need = [&](const std::string& name) {
    auto i = find(name);
    if (!i) throw ParseError("missing column '" + name + "' in header", 1);
    return *i;
  };
  Columns c;
  if (opt.format == InputFormat::Generic) {
    c.id = need("index_id");
    c.date = need("date");
    c.a = need("r");
    c.b = need("s2");
  } else {
    c.id = need("symbol");
    if (auto d = find("date")) {
      c.date = *d;
    } else if (header.front().empty()) {
      c.date = 0;
    } else {
      throw ParseError("missing column 'date' in header", 1);
    }
    c.a = need("open_price");
    c.b = need("close_price");
    c.c = need(opt.variance_column);
  }
  c.width = std::max({c.id, c.date, c.a, c.b, c.c}) + 1;
  return c;
}

}  // namespace

IngestResult ingest(std::istream& in, const IngestOptions& opt) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  std::optional<Columns> cols;
  std::vector<std::string> order;
  std::map<std::string, std::vector<RawRow>> rows;
  std::size_t invalid_values = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split(line);
    if (!cols) {
      cols = locate_columns(fields, opt);
      continue;
    }
    if (fields.size() < cols->width)
      throw ParseError("expected at least " + std::to_string(cols->width) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    const std::string id(fields[cols->id]);
    if (id.empty()) throw ParseError("empty index identifier", line_no);
    const auto date = Date::parse(fields[cols->date]);
    if (!date) throw ParseError("cannot parse date '" + std::string(fields[cols->date]) + "'", line_no);

    RawRow row;
    row.date = *date;
    row.line = line_no;
    if (opt.format == InputFormat::Generic) {
      const auto r = parse_number(fields[cols->a], line_no, "r");
      const auto s2 = parse_number(fields[cols->b], line_no, "s2");
      row.valid = r && s2 && std::isfinite(*r) && std::isfinite(*s2) && *s2 >= 0.0;
      if (r && s2 && !row.valid) ++invalid_values;
      if (row.valid) row.r = *r, row.s2 = *s2;
    } else {
      const auto open = parse_number(fields[cols->a], line_no, "open_price");
      const auto close = parse_number(fields[cols->b], line_no, "close_price");
      const auto rv = parse_number(fields[cols->c], line_no, opt.variance_column.c_str());
      row.valid = open && close && rv && *open > 0.0 && *close > 0.0 && std::isfinite(*open) &&
                  std::isfinite(*close) && std::isfinite(*rv) && *rv >= 0.0;
      if (open && close && rv && !row.valid) ++invalid_values;
      if (row.valid) row.r = std::log(*close / *open), row.s2 = *rv;
    }
    auto [it, inserted] = rows.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(row);
  }
  if (!cols) throw ParseError("input is empty", line_no == 0 ? 1 : line_no);
  if (invalid_values > 0)
    result.warnings.push_back(std::to_string(invalid_values) + " rows with out-of-range values were dropped");

  for (const auto& id : order) {
    auto& raw = rows[id];
    std::stable_sort(raw.begin(), raw.end(), [](const RawRow& a, const RawRow& b) { return a.date < b.date; });
    DailySeries s;
    s.index_id = id;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (i > 0 && raw[i].date == raw[i - 1].date) {
        const std::size_t at = std::max(raw[i].line, raw[i - 1].line);
        throw ParseError("duplicate date " + raw[i].date.str() + " for index '" + id + "'", at);
      }
      if (!raw[i].valid) {
        s.gaps.push_back(raw[i].date);
        continue;
      }
      s.dates.push_back(raw[i].date);
      s.r.push_back(raw[i].r);
      s.s2.push_back(raw[i].s2);
      s.slots.push_back(static_cast<std::int64_t>(i));
    }
    if (s.size() == 0) {
      result.warnings.push_back("index '" + id + "' has no valid rows and was skipped");
      continue;
    }
    if (!s.gaps.empty())
      result.warnings.push_back("index '" + id + "': " + std::to_string(s.gaps.size()) + " incomplete rows dropped");
    result.series.push_back(std::move(s));
  }
  if (result.series.empty()) result.warnings.push_back("no usable series in input");
  return result;
}

IngestResult ingest(const std::string& path, const IngestOptions& opt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return ingest(in, opt);
}

// ---------------------------------------------------------------------------
// Statistics

namespace {

double shifted_mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  const double x0 = x.front();
  double s = 0.0;
  for (double v : x) s += v - x0;
  return x0 + s / static_cast<double>(x.size());
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void clip(std::vector<double>& v, double q) {
  const double lo = quantile(v, q), hi = quantile(v, 1.0 - q);
  for (auto& x : v) x = std::clamp(x, lo, hi);
}

// Valid pairs (variance at t, squared return at t - tau) for one lag.
class PairSet {
 public:
  PairSet(const DailySeries& s, int tau) {
    const std::int64_t last = s.slots.empty() ? 0 : s.slots.back();
    std::vector<std::int64_t> pos(static_cast<std::size_t>(last + 1), -1);
    for (std::size_t i = 0; i < s.size(); ++i) pos[static_cast<std::size_t>(s.slots[i])] = static_cast<std::int64_t>(i);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::int64_t partner = s.slots[i] - tau;
      if (partner < 0 || partner > last) continue;
      const std::int64_t j = pos[static_cast<std::size_t>(partner)];
      if (j < 0) continue;
      const double rj = s.r[static_cast<std::size_t>(j)];
      x.push_back(s.s2[i]);
      y.push_back(rj * rj);
    }
  }

  std::vector<double> x, y;
};

struct LagStats {
  double c2 = 0.0, rho = 0.0;
  std::size_t n = 0;
};

LagStats lag_stats(const DailySeries& s, int tau, std::size_t min_pairs, bool want_rho) {
  require(tau != 0, "lag must be non-zero");
  require(static_cast<std::size_t>(std::abs(tau)) < s.size(),
          "lag " + std::to_string(tau) + " is not shorter than series '" + s.index_id + "' (" +
              std::to_string(s.size()) + " observations)");
  const PairSet p(s, tau);
  LagStats out;
  out.n = p.x.size();
  if (out.n < std::max<std::size_t>(min_pairs, 1))
    throw DomainError("series '" + s.index_id + "' has " + std::to_string(out.n) + " valid pairs at lag " +
                      std::to_string(tau) + ", need at least " + std::to_string(min_pairs));
  const double n = static_cast<double>(out.n);
  const double mx = shifted_mean(p.x);
  double c = 0.0;
  for (std::size_t i = 0; i < out.n; ++i) c += (p.x[i] - mx) * p.y[i];
  out.c2 = c / n;
  if (want_rho) {
    const double my = shifted_mean(p.y);
    double vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < out.n; ++i) {
      vx += (p.x[i] - mx) * (p.x[i] - mx);
      vy += (p.y[i] - my) * (p.y[i] - my);
    }
    if (vx == 0.0 || vy == 0.0)
      throw DomainError("series '" + s.index_id + "': zero sample variance of " +
                        std::string(vx == 0.0 ? "s2" : "squared returns") + " at lag " + std::to_string(tau));
    out.rho = std::clamp(out.c2 / std::sqrt((vx / n) * (vy / n)), -1.0, 1.0);
  }
  return out;
}

}  // namespace

DailySeries prepare(const DailySeries& s, const EmpiricalOptions& opt) {
  require(opt.winsorize >= 0.0 && opt.winsorize < 0.5, "winsorize quantile must be in [0, 0.5)");
  DailySeries out = s;
  out.validate();
  if (out.size() == 0) return out;
  if (opt.demean) {
    const double m = shifted_mean(out.r);
    for (auto& x : out.r) x -= m;
  }
  if (opt.winsorize > 0.0) {
    clip(out.r, opt.winsorize);
    clip(out.s2, opt.winsorize);
  }
  if (opt.annualize)
    for (auto& x : out.s2) x *= 252.0;
  return out;
}

double c2(const DailySeries& s, int tau, std::size_t min_pairs) {
  DailySeries v = s;
  v.validate();
  return lag_stats(v, tau, min_pairs, false).c2;
}

TraCurve rho_curve(const DailySeries& s, int tau_max, std::size_t min_pairs) {
  require(tau_max >= 1, "tau_max must be >= 1");
  DailySeries v = s;
  v.validate();
  TraCurve c;
  for (int tau = 1; tau <= tau_max; ++tau) {
    const LagStats f = lag_stats(v, tau, min_pairs, true);
    const LagStats b = lag_stats(v, -tau, min_pairs, true);
    c.taus.push_back(tau);
    c.c2_fwd.push_back(f.c2);
    c.c2_bwd.push_back(b.c2);
    c.rho_fwd.push_back(f.rho);
    c.rho_bwd.push_back(b.rho);
    c.z.push_back(f.c2 - b.c2);
    c.n_obs.push_back(static_cast<std::int64_t>(f.n));
  }
  return c;
}

std::vector<TraCurve> rho_curves(const std::vector<DailySeries>& series, int tau_max, const EmpiricalOptions& opt) {
  std::vector<TraCurve> out(series.size());
  std::vector<std::exception_ptr> errors(series.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < series.size(); i = next++) {
      try {
        out[i] = rho_curve(prepare(series[i], opt), tau_max, opt.min_pairs);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(opt.threads, 1)), series.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

TraCurve cross_index_average(const std::vector<TraCurve>& curves) {
  require(!curves.empty(), "cannot average an empty set of curves");
  const auto& grid = curves.front().taus;
  for (const auto& c : curves) {
    if (c.taus != grid) throw GridMismatchError("curves have different tau grids");
    const std::size_t n = grid.size();
    require(c.c2_fwd.size() == n && c.c2_bwd.size() == n && c.rho_fwd.size() == n && c.rho_bwd.size() == n &&
                c.z.size() == n,
            "curve columns differ in length");
  }
  TraCurve avg;
  avg.taus = grid;
  const std::size_t n = grid.size();
  for (auto* col : {&avg.c2_fwd, &avg.c2_bwd, &avg.rho_fwd, &avg.rho_bwd, &avg.z}) col->assign(n, 0.0);
  avg.n_obs.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t count = 0;
    double sums[5] = {0, 0, 0, 0, 0};
    for (const auto& c : curves) {
      const double v[5] = {c.c2_fwd[i], c.c2_bwd[i], c.rho_fwd[i], c.rho_bwd[i], c.z[i]};
      if (!std::all_of(std::begin(v), std::end(v), [](double x) { return std::isfinite(x); })) continue;
      for (int k = 0; k < 5; ++k) sums[k] += v[k];
      ++count;
    }
    const double inv = count > 0 ? 1.0 / static_cast<double>(count) : std::nan("");
    avg.c2_fwd[i] = sums[0] * inv;
    avg.c2_bwd[i] = sums[1] * inv;
    avg.rho_fwd[i] = sums[2] * inv;
    avg.rho_bwd[i] = sums[3] * inv;
    avg.z[i] = sums[4] * inv;
    avg.n_obs[i] = count;
  }
  return avg;
}

double integrated_difference(const TraCurve& curve, int tau) {
  require(tau >= 1 && static_cast<std::size_t>(tau) <= curve.size(),
          "tau must be in 1.." + std::to_string(curve.size()));
  double d = 0.0;
  for (int i = 0; i < tau; ++i) d += curve.rho_fwd[static_cast<std::size_t>(i)] - curve.rho_bwd[static_cast<std::size_t>(i)];
  return d;
}

std::vector<double> integrated_differences(const TraCurve& curve) {
  std::vector<double> out(curve.size());
  double d = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    d += curve.rho_fwd[i] - curve.rho_bwd[i];
    out[i] = d;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

void write_tra_csv(const TraCurve& c, const std::string& path) {
  const auto delta = integrated_differences(c);
  detail::AtomicFile f(path);
  auto& out = f.stream();
  out << "tau,c2_fwd,c2_bwd,rho_fwd,rho_bwd,z,delta_cum,n_obs\n";
  char buf[256];
  for (std::size_t i = 0; i < c.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld\n", c.taus[i], c.c2_fwd[i],
                  c.c2_bwd[i], c.rho_fwd[i], c.rho_bwd[i], c.z[i], delta[i], static_cast<long long>(c.n_obs[i]));
    out << buf;
  }
  f.commit();
}

std::string tra_json(const TraCurve& c) {
  nlohmann::json j;
  j["tau"] = c.taus;
  j["c2_fwd"] = c.c2_fwd;
  j["c2_bwd"] = c.c2_bwd;
  j["rho_fwd"] = c.rho_fwd;
  j["rho_bwd"] = c.rho_bwd;
  j["z"] = c.z;
  j["delta_cum"] = integrated_differences(c);
  j["n_obs"] = c.n_obs;
  return j.dump(2);
}

void write_tra_json(const TraCurve& c, const std::string& path) {
  detail::AtomicFile f(path);
  f.stream() << tra_json(c) << '\n';
  f.commit();
}

TraCurve read_tra_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  TraCurve c;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (!header) {
      if (f.size() < 8 || f[0] != "tau" || f[1] != "c2_fwd" || f[5] != "z")
        throw ParseError("expected a curve header 'tau,c2_fwd,c2_bwd,rho_fwd,rho_bwd,z,delta_cum,n_obs'", line_no);
      header = true;
      continue;
    }
    if (f.size() < 8) throw ParseError("expected 8 fields", line_no);
    auto num = [&](std::size_t k, const char* name) {
      const auto v = parse_number(f[k], line_no, name);
      return v ? *v : std::nan("");
    };
    const double tau = num(0, "tau");
    if (!(tau >= 1.0) || tau != std::floor(tau)) throw ParseError("tau must be a positive integer", line_no);
    c.taus.push_back(static_cast<int>(tau));
    c.c2_fwd.push_back(num(1, "c2_fwd"));
    c.c2_bwd.push_back(num(2, "c2_bwd"));
    c.rho_fwd.push_back(num(3, "rho_fwd"));
    c.rho_bwd.push_back(num(4, "rho_bwd"));
    c.z.push_back(num(5, "z"));
    const double n_obs = num(7, "n_obs");
    c.n_obs.push_back(std::isfinite(n_obs) ? static_cast<std::int64_t>(n_obs) : 0);
  }
  if (!header) throw ParseError("curve file is empty", line_no == 0 ? 1 : line_no);
  return c;
}

}  // namespace zlab
