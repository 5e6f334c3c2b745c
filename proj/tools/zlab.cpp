// zlab command-line front end. Everything numerical goes through the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "atomic_file.hpp"
#include "zlab/zlab.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kParseOrIo = 2, kNumerical = 3, kContract = 4 };

struct Failure : std::runtime_error {
  Failure(zlab_status s, const std::string& msg) : std::runtime_error(msg), status(s) {}
  zlab_status status;
};

void check(zlab_status s) {
  if (s != ZLAB_OK) throw Failure(s, zlab_last_error());
}

[[noreturn]] void contract(const std::string& msg) { throw Failure(ZLAB_ERR_DOMAIN, msg); }

int exit_code(zlab_status s) {
  switch (s) {
    case ZLAB_ERR_PARSE:
    case ZLAB_ERR_IO: return kParseOrIo;
    case ZLAB_ERR_NUMERICAL:
    case ZLAB_ERR_INTERNAL: return kNumerical;
    default: return kContract;
  }
}

using CurvePtr = std::unique_ptr<zlab_curve, decltype(&zlab_curve_free)>;
using PathsPtr = std::unique_ptr<zlab_paths, decltype(&zlab_paths_free)>;
using DatasetPtr = std::unique_ptr<zlab_dataset, decltype(&zlab_dataset_free)>;
using TraPtr = std::unique_ptr<zlab_tra, decltype(&zlab_tra_free)>;

// ---------------------------------------------------------------------------
// Tables

enum class Format { Csv, Json };

Format format_for(const std::string& path, const std::string& flag) {
  if (flag == "csv") return Format::Csv;
  if (flag == "json") return Format::Json;
  return fs::path(path).extension() == ".json" ? Format::Json : Format::Csv;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;
  json meta = json::object();

  void add(std::vector<std::optional<double>> row) { rows.push_back(std::move(row)); }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_table(const Table& t, const std::string& path, Format f) {
  zlab::detail::AtomicFile file(path);
  auto& out = file.stream();
  if (f == Format::Csv) {
    for (const auto& [key, value] : t.meta.items()) out << "# " << key << " = " << value.dump() << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << (row[i] ? fmt(*row[i]) : "");
      out << '\n';
    }
  } else {
    json j;
    j["meta"] = t.meta;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      json col = json::array();
      for (const auto& row : t.rows) col.push_back(row[c] ? json(*row[c]) : json(nullptr));
      j[t.columns[c]] = col;
    }
    out << j.dump(2) << '\n';
  }
  file.commit();
}

void print_table(const Table& t, std::ostream& os) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "  " : "") << std::setw(14) << t.columns[i];
  os << '\n';
  char buf[32];
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!row[i]) {
        std::snprintf(buf, sizeof buf, "%14s", "-");
      } else if (*row[i] == std::floor(*row[i]) && std::abs(*row[i]) < 1e9) {
        std::snprintf(buf, sizeof buf, "%14.0f", *row[i]);
      } else {
        std::snprintf(buf, sizeof buf, "%14.6e", *row[i]);
      }
      os << (i ? "  " : "") << buf;
    }
    os << '\n';
  }
}

// Reads a numeric CSV written by write_table: '#' metadata lines, a header,
// then rows. Empty cells are nullopt.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;
  std::map<std::string, std::string> meta;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    return std::nullopt;
  }
};

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure(ZLAB_ERR_IO, "cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) t.meta[line.substr(2, eq - 2)] = line.substr(eq + 3);
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line);
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != t.columns.size())
      throw Failure(ZLAB_ERR_PARSE, path + ": line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(t.columns.size()) + " fields");
    std::vector<std::optional<double>> row;
    for (const auto& c : cells) {
      if (c.empty()) {
        row.emplace_back();
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end != c.c_str() + c.size())
        throw Failure(ZLAB_ERR_PARSE, path + ": line " + std::to_string(line_no) + ": bad number '" + c + "'");
      row.emplace_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw Failure(ZLAB_ERR_PARSE, path + ": file is empty");
  return t;
}

void write_text(const std::string& path, const std::string& text) {
  zlab::detail::AtomicFile file(path);
  file.stream() << text;
  file.commit();
}

std::string gnuplot_path(const std::string& data) { return fs::path(data).replace_extension(".gp").string(); }

// ---------------------------------------------------------------------------
// Shared options

struct ModelOptions {
  double hurst = 0.05;
  double lambda = 0.3;
  double nu = 0.45;
  double rho = -0.7;
  double xi = 0.025;
  std::string xi_file;
  double delta = 1.0 / 252.0;

  zlab_model_params params() const { return {hurst, lambda, nu, rho}; }

  void add_to(CLI::App* app) {
    app->add_option("--h,--hurst", hurst, "Hurst exponent H, in (0, 0.5]")->capture_default_str();
    app->add_option("--lambda", lambda, "mean-reversion speed lambda [1/year], > 0")->capture_default_str();
    app->add_option("--nu", nu, "vol of vol nu, >= 0 (time measured in years)")
        ->capture_default_str();
    app->add_option("--rho", rho, "spot-vol correlation, in [-1, 1]")->capture_default_str();
    app->add_option("--xi", xi, "flat forward variance level xi_0 [annualized variance, 1/year]")
        ->capture_default_str();
    app->add_option("--xi-file", xi_file,
                    "forward variance curve as 't,xi' rows (t in years, xi annualized); overrides --xi");
    app->add_option("--delta", delta, "day length delta [years]")->capture_default_str();
  }

  // Validates every model flag and builds the curve before any computation.
  CurvePtr prepare() const {
    const auto p = params();
    check(zlab_model_params_validate(&p));
    if (!(std::isfinite(delta) && delta > 0.0)) contract("--delta must be a positive number of years");
    zlab_curve* c = nullptr;
    check(xi_file.empty() ? zlab_curve_flat(xi, &c) : zlab_curve_load(xi_file.c_str(), &c));
    return CurvePtr(c, zlab_curve_free);
  }

  json meta() const {
    json m = {{"hurst", hurst}, {"lambda", lambda}, {"nu", nu}, {"rho", rho}, {"delta", delta}};
    if (xi_file.empty()) {
      m["xi"] = xi;
    } else {
      m["xi_file"] = xi_file;
    }
    return m;
  }
};

struct OutputOptions {
  std::string path;
  std::string format = "auto";
  bool gnuplot = false;

  void add_to(CLI::App* app, const std::string& what, bool required = true) {
    auto* o = app->add_option("-o,--output", path, what);
    if (required) o->required();
    app->add_option("--format", format, "output format: csv, json or auto (from the file extension)")
        ->check(CLI::IsMember({"auto", "csv", "json"}))
        ->capture_default_str();
    app->add_flag("--gnuplot", gnuplot, "also write a gnuplot script next to the output");
  }
};

// ---------------------------------------------------------------------------
// model

struct ModelCommand {
  ModelOptions model;
  OutputOptions out;
  double t = 2.0;
  int k_max = 10;
  bool compare_h = false;

  CLI::App* setup(CLI::App& root) {
    auto* app = root.add_subcommand("model", "Zumbach covariance Z_t(k) and its small-delta equivalent");
    model.add_to(app);
    app->add_option("--t", t, "observation time t [years]; day t ends at t")->capture_default_str();
    app->add_option("--k-max", k_max, "largest lag k [days]")->capture_default_str();
    app->add_flag("--compare-h", compare_h, "add a companion run at H = 0.5 and the ratio Z(H) / Z(0.5)");
    out.add_to(app, "output table (.csv or .json)");
    return app;
  }

  void run() {
    auto xi = model.prepare();
    if (k_max < 1) contract("--k-max must be >= 1");
    if (!(std::isfinite(t) && t >= model.delta)) contract("--t must be at least one day (--delta)");
    const auto p = model.params();
    auto h05 = p;
    h05.hurst = 0.5;

    Table table;
    table.columns = {"k", "tau_years", "z", "z_asymptotic"};
    if (compare_h) table.columns.insert(table.columns.end(), {"z_h05", "ratio_to_h05"});
    table.meta = model.meta();
    table.meta["t"] = t;
    for (int k = 1; k <= k_max; ++k) {
      double z = 0.0, za = 0.0;
      check(zlab_zumbach_cov(&p, xi.get(), t, k, model.delta, &z));
      check(zlab_zumbach_asymptotic(&p, xi.get(), t, k, model.delta, &za));
      std::vector<std::optional<double>> row = {double(k), k * model.delta, z, za};
      if (compare_h) {
        double zh = 0.0;
        check(zlab_zumbach_cov(&h05, xi.get(), t, k, model.delta, &zh));
        row.emplace_back(zh);
        row.emplace_back(zh != 0.0 ? std::optional<double>(z / zh) : std::nullopt);
      }
      table.add(std::move(row));
    }
    write_table(table, out.path, format_for(out.path, out.format));
    if (out.gnuplot) write_text(gnuplot_path(out.path), gnuplot_script());
    print_table(table, std::cout);
  }

  std::string gnuplot_script() const {
    std::ostringstream s;
    s << "set datafile separator ','\nset logscale y\nset xlabel 'k [days]'\nset ylabel 'Z'\n"
      << "plot '" << fs::path(out.path).filename().string() << "' using 1:3 with linespoints title 'Z_t(k)', \\\n"
      << "     '' using 1:4 with lines title 'small-delta'";
    if (compare_h) s << ", \\\n     '' using 1:5 with linespoints title 'H = 0.5'";
    s << '\n';
    return s.str();
  }
};

// ---------------------------------------------------------------------------
// simulate

struct SimulateCommand {
  ModelOptions model;
  OutputOptions out;
  std::int64_t paths = 10000;
  int steps_per_day = 20;
  int days = 756;
  std::uint64_t seed = 1;
  bool antithetic = false;
  std::string scheme = "ivi";
  int t_day = 504;
  std::vector<int> lags = {1, 2, 5, 10};
  double memory_mib = 3072;
  std::string dump_paths, export_generic, prefix = "SIM", moments_path;
  const int* threads = nullptr;

  CLI::App* setup(CLI::App& root, const int* thread_count) {
    threads = thread_count;
    auto* app = root.add_subcommand("simulate", "Monte Carlo estimates of Z and daily moments");
    model.add_to(app);
    app->add_option("--paths", paths, "number of simulated paths")->capture_default_str();
    app->add_option("--steps-per-day", steps_per_day, "time steps per day")->capture_default_str();
    app->add_option("--days", days, "simulated horizon [days]")->capture_default_str();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
    app->add_flag("--antithetic", antithetic, "antithetic path pairs (needs an even --paths)");
    app->add_option("--scheme", scheme, "ivi (integrated-variance, default) or euler")
        ->check(CLI::IsMember({"ivi", "euler"}))
        ->capture_default_str();
    app->add_option("--t-day", t_day, "estimation day t (1-based; t = t_day * delta years)")->capture_default_str();
    app->add_option("--lags", lags, "lags k [days]")->delimiter(',')->capture_default_str();
    app->add_option("--memory-limit", memory_mib, "refuse runs needing more memory than this [MiB]")
        ->capture_default_str();
    app->add_option("--dump-paths", dump_paths, "write every path as path_id,day,r,sigma2");
    app->add_option("--export-generic", export_generic,
                    "write paths as index_id,date,r,s2 (one synthetic index per path)");
    app->add_option("--prefix", prefix, "index name prefix for --export-generic")->capture_default_str();
    app->add_option("--moments", moments_path, "write daily moment estimates at t_day to this file");
    out.add_to(app, "Z estimate table (.csv or .json)");
    return app;
  }

  void run() {
    auto xi = model.prepare();
    zlab_sim_config c;
    zlab_sim_config_default(&c);
    c.n_paths = paths;
    c.steps_per_day = steps_per_day;
    c.n_days = days;
    c.delta = model.delta;
    c.seed = seed;
    c.antithetic = antithetic ? 1 : 0;
    c.scheme = scheme == "euler" ? ZLAB_SCHEME_EULER : ZLAB_SCHEME_INTEGRATED_VARIANCE;
    c.threads = *threads;
    if (!(memory_mib > 0.0)) contract("--memory-limit must be positive");
    c.memory_limit = static_cast<std::size_t>(memory_mib * 1024.0 * 1024.0);
    check(zlab_sim_config_validate(&c));
    if (lags.empty()) contract("--lags must not be empty");
    for (int k : lags) {
      if (k < 1) contract("lags must be >= 1");
      if (t_day < 1 || t_day + k > days)
        contract("--t-day " + std::to_string(t_day) + " with lag " + std::to_string(k) + " exceeds --days " +
                 std::to_string(days));
    }
    const auto p = model.params();

    zlab_paths* raw = nullptr;
    check(zlab_simulate(&p, xi.get(), &c, &raw));
    PathsPtr batch(raw, zlab_paths_free);
    double truncated = 0.0;
    std::uint64_t checksum = 0;
    check(zlab_paths_info(batch.get(), nullptr, nullptr, &truncated, &checksum));

    Table table;
    table.columns = {"k", "delta", "t_day", "t", "z_mc", "z_mc_se", "z_expectation", "z_expectation_se"};
    table.meta = model.meta();
    table.meta["paths"] = paths;
    table.meta["steps_per_day"] = steps_per_day;
    table.meta["days"] = days;
    table.meta["seed"] = seed;
    table.meta["antithetic"] = antithetic;
    table.meta["scheme"] = scheme;
    table.meta["truncated_fraction"] = truncated;
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(checksum));
    table.meta["kernel_checksum"] = hex;
    for (int k : lags) {
      zlab_estimate cov, ex;
      check(zlab_paths_zumbach(batch.get(), t_day, k, &cov, &ex));
      table.add({double(k), model.delta, double(t_day), t_day * model.delta, cov.value, cov.std_error, ex.value,
                 ex.std_error});
    }

    zlab_moments m;
    check(zlab_paths_moments(batch.get(), t_day, &m));
    Table moments;
    moments.columns = {"t_day", "mean_sigma2", "mean_sigma2_se", "mean_r2", "mean_r2_se", "var_sigma2",
                       "var_sigma2_se", "fourth_moment_r", "fourth_moment_r_se"};
    moments.meta = table.meta;
    moments.add({double(t_day), m.mean_sigma2.value, m.mean_sigma2.std_error, m.mean_r2.value, m.mean_r2.std_error,
                 m.var_sigma2.value, m.var_sigma2.std_error, m.fourth_moment_r.value, m.fourth_moment_r.std_error});

    write_table(table, out.path, format_for(out.path, out.format));
    if (!moments_path.empty()) write_table(moments, moments_path, format_for(moments_path, out.format));
    if (!dump_paths.empty()) check(zlab_paths_write_csv(batch.get(), dump_paths.c_str()));
    if (!export_generic.empty()) check(zlab_paths_write_generic(batch.get(), export_generic.c_str(), prefix.c_str()));
    if (out.gnuplot) {
      std::ostringstream s;
      s << "set datafile separator ','\nset xlabel 'k [days]'\nset ylabel 'Z'\n"
        << "plot '" << fs::path(out.path).filename().string()
        << "' using 1:5:6 with yerrorbars title 'Monte Carlo Z (1 s.e.)'\n";
      write_text(gnuplot_path(out.path), s.str());
    }
    print_table(table, std::cout);
    std::cout << "\nmoments at day " << t_day << " (" << m.samples << " independent samples)\n";
    print_table(moments, std::cout);
    std::cout << "truncated steps: " << truncated << '\n';
  }
};

// ---------------------------------------------------------------------------
// empirical

std::string safe_name(const std::string& id) {
  std::string s;
  for (char ch : id) s += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') ? ch : '_';
  return s.empty() ? "index" : s;
}

struct EmpiricalCommand {
  std::string input;
  std::string input_format = "generic";
  std::string rv_column = "rk_parzen";
  std::string out_dir;
  int tau_max = 100;
  std::size_t min_pairs = 30;
  bool demean = false, annualize = false, per_index = false, gnuplot = false;
  double winsorize = 0.0;
  const int* threads = nullptr;

  CLI::App* setup(CLI::App& root, const int* thread_count) {
    threads = thread_count;
    auto* app = root.add_subcommand("empirical", "time-reversal asymmetry curves from daily data");
    app->add_option("-i,--input", input, "input CSV")->required();
    app->add_option("--input-format", input_format,
                    "generic (index_id,date,r,s2) or oxford (Symbol,date,open_price,close_price,<rv column>)")
        ->check(CLI::IsMember({"generic", "oxford"}))
        ->capture_default_str();
    app->add_option("--rv-column", rv_column, "realized variance column for oxford input [daily variance]")
        ->capture_default_str();
    app->add_option("-o,--out-dir", out_dir, "output directory")->required();
    app->add_option("--tau-max", tau_max, "largest lag tau [days]")->capture_default_str();
    app->add_option("--min-pairs", min_pairs, "minimum valid pairs per lag")->capture_default_str();
    app->add_flag("--demean", demean, "subtract each index's mean return before squaring");
    app->add_option("--winsorize", winsorize, "clip r and s2 to their [q, 1-q] quantiles (0 = off)")
        ->capture_default_str();
    app->add_flag("--annualize", annualize, "multiply s2 by 252 (daily to annualized variance)");
    app->add_flag("--per-index", per_index, "also write one curve per index");
    app->add_flag("--gnuplot", gnuplot, "also write tra_average.gp");
    return app;
  }

  void run() {
    if (tau_max < 1) contract("--tau-max must be >= 1");
    if (min_pairs < 1) contract("--min-pairs must be >= 1");
    if (!(winsorize >= 0.0 && winsorize < 0.5)) contract("--winsorize must be in [0, 0.5)");
    zlab_dataset* raw = nullptr;
    check(zlab_dataset_load(input.c_str(), input_format == "oxford" ? ZLAB_FORMAT_OXFORD : ZLAB_FORMAT_GENERIC,
                            rv_column.c_str(), &raw));
    DatasetPtr data(raw, zlab_dataset_free);
    for (std::size_t i = 0; i < zlab_dataset_warning_count(data.get()); ++i)
      std::cerr << "warning: " << zlab_dataset_warning(data.get(), i) << '\n';
    if (zlab_dataset_size(data.get()) == 0) throw Failure(ZLAB_ERR_PARSE, "no usable series in '" + input + "'");

    // Series too short for tau_max are skipped rather than failing the run.
    zlab_dataset* kept_raw = nullptr;
    check(zlab_dataset_create(&kept_raw));
    DatasetPtr kept(kept_raw, zlab_dataset_free);
    std::vector<std::size_t> kept_index;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < zlab_dataset_size(data.get()); ++i) {
      const char* id = nullptr;
      std::size_t n = 0;
      check(zlab_dataset_series_info(data.get(), i, &id, &n, nullptr));
      if (n < static_cast<std::size_t>(tau_max) + min_pairs) {
        if (++skipped <= 5)
          std::cerr << "warning: index '" << id << "' has " << n << " observations, fewer than tau-max + min-pairs = "
                    << tau_max + min_pairs << "; skipped\n";
        continue;
      }
      kept_index.push_back(i);
    }
    if (skipped > 5) std::cerr << "warning: " << skipped - 5 << " more short indices skipped\n";
    if (kept_index.empty()) contract("no index has enough observations for --tau-max " + std::to_string(tau_max));

    zlab_empirical_options o;
    zlab_empirical_options_default(&o);
    o.min_pairs = min_pairs;
    o.demean = demean;
    o.winsorize = winsorize;
    o.annualize = annualize;
    o.threads = *threads;

    std::vector<TraPtr> curves;
    std::vector<const zlab_tra*> views;
    std::vector<std::string> ids;
    {
      // Compute only the kept series, keeping dataset order.
      for (std::size_t i : kept_index) {
        zlab_tra* c = nullptr;
        check(zlab_tra_compute(data.get(), i, tau_max, &o, &c));
        curves.emplace_back(c, zlab_tra_free);
        views.push_back(c);
        const char* id = nullptr;
        check(zlab_dataset_series_info(data.get(), i, &id, nullptr, nullptr));
        ids.emplace_back(id);
      }
    }
    zlab_tra* avg_raw = nullptr;
    check(zlab_tra_average(views.data(), views.size(), &avg_raw));
    TraPtr avg(avg_raw, zlab_tra_free);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    check(zlab_tra_write(avg.get(), (dir / "tra_average.csv").c_str(), 0));
    check(zlab_tra_write(avg.get(), (dir / "tra_average.json").c_str(), 1));
    if (per_index) {
      for (std::size_t j = 0; j < curves.size(); ++j) {
        const std::string base = "tra_" + safe_name(ids[j]);
        check(zlab_tra_write(curves[j].get(), (dir / (base + ".csv")).c_str(), 0));
        check(zlab_tra_write(curves[j].get(), (dir / (base + ".json")).c_str(), 1));
      }
    }
    if (gnuplot) {
      write_text((dir / "tra_average.gp").string(),
                 "set datafile separator ','\nset multiplot layout 1,2\nset xlabel 'tau [days]'\n"
                 "plot 'tra_average.csv' using 1:4 with lines lc rgb 'red' title 'rho(tau)', \\\n"
                 "     '' using 1:5 with lines lc rgb 'blue' title 'rho(-tau)'\n"
                 "plot 'tra_average.csv' using 1:7 with lines title 'Delta(tau)'\nunset multiplot\n");
    }

    double delta = 0.0;
    check(zlab_tra_integrated_difference(avg.get(), tau_max, &delta));
    zlab_tra_row first;
    check(zlab_tra_get(avg.get(), 0, &first));
    std::cout << "indices: " << curves.size() << " used of " << zlab_dataset_size(data.get()) << '\n'
              << "rho(1) = " << first.rho_fwd << ", rho(-1) = " << first.rho_bwd << '\n'
              << "Delta(" << tau_max << ") = " << delta << '\n';
  }
};

// ---------------------------------------------------------------------------
// compare

struct CompareCommand {
  ModelOptions model;
  OutputOptions out;
  double t = 2.0;
  int k_max = 10;
  std::string empirical, mc;
  std::string empirical_column = "z";
  double empirical_delta = 1.0 / 252.0;

  CLI::App* setup(CLI::App& root) {
    auto* app = root.add_subcommand("compare", "join empirical, analytic and Monte Carlo Z on the lag grid");
    model.add_to(app);
    app->add_option("--t", t, "observation time t for the model [years]")->capture_default_str();
    app->add_option("--k-max", k_max, "largest lag k [days]")->capture_default_str();
    app->add_option("--empirical", empirical, "curve file written by 'zlab empirical' (tra_*.csv)");
    app->add_option("--empirical-column", empirical_column,
                    "column of the curve file compared with Z (z, c2_fwd, ...) [daily variance units]")
        ->capture_default_str();
    app->add_option("--empirical-delta", empirical_delta, "day length of the empirical data [years]")
        ->capture_default_str();
    app->add_option("--mc", mc, "estimate table written by 'zlab simulate' (.csv)");
    out.add_to(app, "joined table (.csv or .json)");
    return app;
  }

  static bool same(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

  void run() {
    auto xi = model.prepare();
    if (k_max < 1) contract("--k-max must be >= 1");
    if (!(std::isfinite(t) && t >= model.delta)) contract("--t must be at least one day (--delta)");
    const auto p = model.params();

    std::vector<std::optional<double>> emp(k_max + 1);
    if (!empirical.empty()) {
      if (!same(empirical_delta, model.delta))
        throw Failure(ZLAB_ERR_GRID_MISMATCH, "empirical data are on delta = " + fmt(empirical_delta) +
                                                  " but the model uses delta = " + fmt(model.delta));
      const auto table = read_csv_table(empirical);
      const auto tau = table.column("tau"), col = table.column(empirical_column);
      if (!tau || !col) throw Failure(ZLAB_ERR_PARSE, empirical + ": needs columns tau and " + empirical_column);
      for (const auto& row : table.rows)
        if (row[*tau] && *row[*tau] >= 1 && *row[*tau] <= k_max) emp[static_cast<int>(*row[*tau])] = row[*col];
      for (int k = 1; k <= k_max; ++k)
        if (!emp[k]) throw Failure(ZLAB_ERR_GRID_MISMATCH, empirical + ": no value at tau = " + std::to_string(k));
    }

    std::vector<std::optional<double>> mc_value(k_max + 1), mc_se(k_max + 1);
    if (!mc.empty()) {
      const auto table = read_csv_table(mc);
      const auto k = table.column("k"), d = table.column("delta"), v = table.column("z_mc"),
                 se = table.column("z_mc_se"), tt = table.column("t");
      if (!k || !d || !v || !se || !tt) throw Failure(ZLAB_ERR_PARSE, mc + ": not a 'zlab simulate' table");
      for (const auto& row : table.rows) {
        if (!row[*d] || !same(*row[*d], model.delta))
          throw Failure(ZLAB_ERR_GRID_MISMATCH, mc + ": simulated with delta = " + (row[*d] ? fmt(*row[*d]) : "?") +
                                                    " but the model uses delta = " + fmt(model.delta));
        if (!row[*tt] || std::abs(*row[*tt] - t) > 1e-9 * t)
          throw Failure(ZLAB_ERR_GRID_MISMATCH, mc + ": estimated at t = " + (row[*tt] ? fmt(*row[*tt]) : "?") +
                                                    " but the model uses t = " + fmt(t));
        if (row[*k] && *row[*k] >= 1 && *row[*k] <= k_max) {
          mc_value[static_cast<int>(*row[*k])] = row[*v];
          mc_se[static_cast<int>(*row[*k])] = row[*se];
        }
      }
    }

    Table table;
    table.columns = {"k",   "tau_years", "z_model", "z_asymptotic", "z_empirical", "gap_empirical",
                     "z_mc", "z_mc_se",  "gap_mc",  "gap_mc_in_se"};
    table.meta = model.meta();
    table.meta["t"] = t;
    if (!empirical.empty()) table.meta["empirical"] = empirical;
    if (!mc.empty()) table.meta["mc"] = mc;
    for (int k = 1; k <= k_max; ++k) {
      double z = 0.0, za = 0.0;
      check(zlab_zumbach_cov(&p, xi.get(), t, k, model.delta, &z));
      check(zlab_zumbach_asymptotic(&p, xi.get(), t, k, model.delta, &za));
      auto rel = [&](const std::optional<double>& x) -> std::optional<double> {
        if (!x || z == 0.0) return std::nullopt;
        return (*x - z) / std::abs(z);
      };
      std::optional<double> in_se;
      if (mc_value[k] && mc_se[k] && *mc_se[k] > 0.0) in_se = (*mc_value[k] - z) / *mc_se[k];
      table.add({double(k), k * model.delta, z, za, emp[k], rel(emp[k]), mc_value[k], mc_se[k], rel(mc_value[k]),
                 in_se});
    }
    write_table(table, out.path, format_for(out.path, out.format));
    if (out.gnuplot) {
      std::ostringstream s;
      s << "set datafile separator ','\nset xlabel 'k [days]'\nset ylabel 'Z'\n"
        << "plot '" << fs::path(out.path).filename().string() << "' using 1:3 with linespoints title 'model', \\\n"
        << "     '' using 1:4 with lines title 'small-delta', \\\n"
        << "     '' using 1:5 with points pt 7 lc rgb 'dark-green' title 'empirical', \\\n"
        << "     '' using 1:7:8 with yerrorbars title 'Monte Carlo'\n";
      write_text(gnuplot_path(out.path), s.str());
    }
    print_table(table, std::cout);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zlab: Zumbach effect under rough Heston (empirical, analytic, Monte Carlo)"};
  // --h is the Hurst exponent, so help is long-form only.
  app.set_help_flag("--help", "print this help and exit");
  app.set_config("--config", "", "read options from a key=value file ([subcommand] sections or subcommand.key=value)");
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  auto* threads_opt = app.add_option("--threads", threads,
                                     "worker threads for simulation and per-index work (default: $ZLAB_THREADS or 1)")
                          ->check(CLI::Range(1, 1024));

  ModelCommand model_cmd;
  SimulateCommand sim_cmd;
  EmpiricalCommand emp_cmd;
  CompareCommand cmp_cmd;
  auto* model_app = model_cmd.setup(app);
  auto* sim_app = sim_cmd.setup(app, &threads);
  auto* emp_app = emp_cmd.setup(app, &threads);
  auto* cmp_app = cmp_cmd.setup(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  try {
    // CLI11 drops invalid environment values silently, so ZLAB_THREADS is read here.
    if (threads_opt->count() == 0) {
      if (const char* env = std::getenv("ZLAB_THREADS"); env && *env) {
        const std::string v = env;
        std::size_t used = 0;
        try {
          threads = std::stoi(v, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != v.size() || threads < 1 || threads > 1024) contract("ZLAB_THREADS must be an integer in [1, 1024]");
      }
    }
    if (*model_app) model_cmd.run();
    if (*sim_app) sim_cmd.run();
    if (*emp_app) emp_cmd.run();
    if (*cmp_app) cmp_cmd.run();
  } catch (const Failure& e) {
    std::cerr << "zlab: " << zlab_status_name(e.status) << ": " << e.what() << '\n';
    return exit_code(e.status);
  } catch (const zlab::IoError& e) {
    std::cerr << "zlab: i/o error: " << e.what() << '\n';
    return kParseOrIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "zlab: i/o error: " << e.what() << '\n';
    return kParseOrIo;
  } catch (const std::exception& e) {
    std::cerr << "zlab: internal error: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
