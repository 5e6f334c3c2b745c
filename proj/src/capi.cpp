#include "zlab/zlab.h"

#include <cmath>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "zlab/curve.hpp"
#include "zlab/empirical.hpp"
#include "zlab/error.hpp"
#include "zlab/model.hpp"
#include "zlab/simulate.hpp"
#include "zlab/special.hpp"

struct zlab_curve {
  zlab::ForwardVarianceCurve curve;
};

struct zlab_paths {
  zlab::PathBatch batch;
};

struct zlab_dataset {
  std::vector<zlab::DailySeries> series;
  std::vector<std::string> warnings;
};

struct zlab_tra {
  zlab::TraCurve curve;
  std::vector<double> delta;
};

namespace {

thread_local std::string g_last_error;
thread_local std::size_t g_last_line = 0;

zlab_status fail(zlab_status s, const std::string& msg, std::size_t line = 0) {
  g_last_error = msg;
  g_last_line = line;
  return s;
}

zlab_status status_of(zlab::ErrorKind k) {
  switch (k) {
    case zlab::ErrorKind::Domain: return ZLAB_ERR_DOMAIN;
    case zlab::ErrorKind::Parse: return ZLAB_ERR_PARSE;
    case zlab::ErrorKind::Io: return ZLAB_ERR_IO;
    case zlab::ErrorKind::Numerical: return ZLAB_ERR_NUMERICAL;
    case zlab::ErrorKind::GridMismatch: return ZLAB_ERR_GRID_MISMATCH;
    case zlab::ErrorKind::Resource: return ZLAB_ERR_RESOURCE;
  }
  return ZLAB_ERR_INTERNAL;
}

template <class F>
zlab_status guard(F&& f) {
  try {
    f();
    return ZLAB_OK;
  } catch (const zlab::ParseError& e) {
    return fail(ZLAB_ERR_PARSE, e.what(), e.line());
  } catch (const zlab::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(ZLAB_ERR_RESOURCE, "out of memory");
  } catch (const std::exception& e) {
    return fail(ZLAB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(ZLAB_ERR_INTERNAL, "unknown error");
  }
}

template <class... P>
bool any_null(P*... p) {
  return ((p == nullptr) || ...);
}

#define ZLAB_REQUIRE_ARGS(...) \
  if (any_null(__VA_ARGS__)) return fail(ZLAB_ERR_NULL_ARGUMENT, std::string(__func__) + ": NULL argument")

zlab::ModelParams to_cpp(const zlab_model_params& p) {
  zlab::ModelParams m;
  m.hurst = p.hurst;
  m.lambda = p.lambda;
  m.nu = p.nu;
  m.rho = p.rho;
  return m;
}

zlab::SimConfig to_cpp(const zlab_sim_config& c) {
  zlab::SimConfig s;
  s.n_paths = c.n_paths;
  s.steps_per_day = c.steps_per_day;
  s.n_days = c.n_days;
  s.delta = c.delta;
  s.seed = c.seed;
  s.antithetic = c.antithetic != 0;
  if (c.scheme != ZLAB_SCHEME_INTEGRATED_VARIANCE && c.scheme != ZLAB_SCHEME_EULER)
    throw zlab::DomainError("unknown simulation scheme");
  s.scheme = c.scheme == ZLAB_SCHEME_EULER ? zlab::Scheme::Euler : zlab::Scheme::IntegratedVariance;
  s.threads = c.threads;
  s.chunk_paths = c.chunk_paths;
  s.memory_limit = c.memory_limit;
  return s;
}

zlab::EmpiricalOptions to_cpp(const zlab_empirical_options* o) {
  zlab::EmpiricalOptions e;
  if (!o) return e;
  e.min_pairs = o->min_pairs;
  e.demean = o->demean != 0;
  e.winsorize = o->winsorize;
  e.annualize = o->annualize != 0;
  e.threads = o->threads;
  return e;
}

zlab_estimate to_c(const zlab::Estimate& e) { return {e.value, e.std_error}; }

zlab_tra* wrap(zlab::TraCurve c) {
  auto* t = new zlab_tra{std::move(c), {}};
  t->delta = zlab::integrated_differences(t->curve);
  return t;
}

const zlab::DailySeries& series_at(const zlab_dataset* d, std::size_t i) {
  if (i >= d->series.size())
    throw zlab::DomainError("series index " + std::to_string(i) + " out of range (" +
                            std::to_string(d->series.size()) + " series)");
  return d->series[i];
}

}  // namespace

extern "C" {

const char* zlab_version(void) { return "1.0.0"; }
const char* zlab_last_error(void) { return g_last_error.c_str(); }
size_t zlab_last_error_line(void) { return g_last_line; }

const char* zlab_status_name(zlab_status s) {
  switch (s) {
    case ZLAB_OK: return "ok";
    case ZLAB_ERR_DOMAIN: return "domain error";
    case ZLAB_ERR_PARSE: return "parse error";
    case ZLAB_ERR_IO: return "i/o error";
    case ZLAB_ERR_NUMERICAL: return "numerical error";
    case ZLAB_ERR_GRID_MISMATCH: return "grid mismatch";
    case ZLAB_ERR_RESOURCE: return "resource limit";
    case ZLAB_ERR_NULL_ARGUMENT: return "null argument";
    case ZLAB_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---- special

zlab_status zlab_ml_neg(double alpha, double beta, double x, double* out) {
  ZLAB_REQUIRE_ARGS(out);
  return guard([&] {
    zlab::detail::require(std::isfinite(x) && x >= 0.0, "x must be finite and >= 0");
    *out = zlab::special::MittagLefflerNeg(alpha, beta)(x);
  });
}

zlab_status zlab_ml_density(double alpha, double lambda, double x, double* out) {
  ZLAB_REQUIRE_ARGS(out);
  return guard([&] { *out = zlab::special::ml_density({alpha, lambda}, x); });
}

zlab_status zlab_ml_cdf(double alpha, double lambda, double x, double* out) {
  ZLAB_REQUIRE_ARGS(out);
  return guard([&] { *out = zlab::special::ml_cdf({alpha, lambda}, x); });
}

zlab_status zlab_l2_norm_f_squared(double alpha, double lambda, double* out) {
  ZLAB_REQUIRE_ARGS(out);
  return guard([&] { *out = zlab::special::l2_norm_f_squared({alpha, lambda}); });
}

// ---- curve

zlab_status zlab_curve_flat(double level, zlab_curve** out) {
  ZLAB_REQUIRE_ARGS(out);
  return guard([&] { *out = new zlab_curve{zlab::ForwardVarianceCurve::flat(level)}; });
}

zlab_status zlab_curve_piecewise(const double* t, const double* xi, size_t n, zlab_curve** out) {
  ZLAB_REQUIRE_ARGS(t, xi, out);
  return guard([&] {
    std::vector<zlab::ForwardVarianceCurve::Knot> knots(n);
    for (size_t i = 0; i < n; ++i) knots[i] = {t[i], xi[i]};
    *out = new zlab_curve{zlab::ForwardVarianceCurve::piecewise_linear(std::move(knots))};
  });
}

zlab_status zlab_curve_load(const char* path, zlab_curve** out) {
  ZLAB_REQUIRE_ARGS(path, out);
  return guard([&] { *out = new zlab_curve{zlab::ForwardVarianceCurve::load(path)}; });
}

zlab_status zlab_curve_eval(const zlab_curve* c, double t, double* out) {
  ZLAB_REQUIRE_ARGS(c, out);
  return guard([&] { *out = c->curve(t); });
}

zlab_status zlab_curve_integral(const zlab_curve* c, double a, double b, double* out) {
  ZLAB_REQUIRE_ARGS(c, out);
  return guard([&] { *out = c->curve.integral(a, b); });
}

void zlab_curve_free(zlab_curve* c) { delete c; }

// ---- model

void zlab_model_params_default(zlab_model_params* p) {
  if (!p) return;
  const zlab::ModelParams d;
  *p = {d.hurst, d.lambda, d.nu, d.rho};
}

zlab_status zlab_model_params_validate(const zlab_model_params* p) {
  ZLAB_REQUIRE_ARGS(p);
  return guard([&] { to_cpp(*p).validate(); });
}

zlab_status zlab_zumbach_cov(const zlab_model_params* p, const zlab_curve* xi, double t, int k, double delta,
                             double* out) {
  ZLAB_REQUIRE_ARGS(p, xi, out);
  return guard([&] { *out = zlab::zumbach_cov(to_cpp(*p), xi->curve, t, k, delta); });
}

zlab_status zlab_zumbach_asymptotic(const zlab_model_params* p, const zlab_curve* xi, double t, int k,
                                    double delta, double* out) {
  ZLAB_REQUIRE_ARGS(p, xi, out);
  return guard([&] { *out = zlab::zumbach_asymptotic(to_cpp(*p), xi->curve, t, k, delta); });
}

zlab_status zlab_g_alpha(double alpha, int k, double* out) {
  ZLAB_REQUIRE_ARGS(out);
  return guard([&] { *out = zlab::g_alpha(alpha, k); });
}

zlab_status zlab_g0(const zlab_model_params* p, const zlab_curve* xi, double t, double* out) {
  ZLAB_REQUIRE_ARGS(p, xi, out);
  return guard([&] { *out = zlab::g0(to_cpp(*p), xi->curve, t); });
}

zlab_status zlab_var_sigma2(const zlab_model_params* p, const zlab_curve* xi, double t, double delta,
                            double* out) {
  ZLAB_REQUIRE_ARGS(p, xi, out);
  return guard([&] { *out = zlab::var_sigma2(to_cpp(*p), xi->curve, t, delta); });
}

zlab_status zlab_fourth_moment_r(const zlab_model_params* p, const zlab_curve* xi, double t, double delta,
                                 double* out) {
  ZLAB_REQUIRE_ARGS(p, xi, out);
  return guard([&] { *out = zlab::fourth_moment_r(to_cpp(*p), xi->curve, t, delta); });
}

zlab_status zlab_stationary_var_sigma2(const zlab_model_params* p, double xi_inf, double delta, double* out) {
  ZLAB_REQUIRE_ARGS(p, out);
  return guard([&] { *out = zlab::stationary_var_sigma2(to_cpp(*p), xi_inf, delta); });
}

zlab_status zlab_stationary_fourth_moment_r(const zlab_model_params* p, double xi_inf, double delta,
                                            double* out) {
  ZLAB_REQUIRE_ARGS(p, out);
  return guard([&] { *out = zlab::stationary_fourth_moment_r(to_cpp(*p), xi_inf, delta); });
}

zlab_status zlab_zumbach_correl(const zlab_model_params* p, double xi_inf, int k, double delta,
                                zlab_correl* out) {
  ZLAB_REQUIRE_ARGS(p, out);
  return guard([&] {
    const auto c = zlab::zumbach_correl(to_cpp(*p), xi_inf, k, delta);
    *out = {c.value, c.small_delta, c.cov, c.var_sigma2, c.var_r2, std::abs(c.value) > 1.0 ? 1 : 0};
  });
}

// ---- simulation

void zlab_sim_config_default(zlab_sim_config* c) {
  if (!c) return;
  const zlab::SimConfig d;
  c->n_paths = d.n_paths;
  c->steps_per_day = d.steps_per_day;
  c->n_days = d.n_days;
  c->delta = d.delta;
  c->seed = d.seed;
  c->antithetic = d.antithetic ? 1 : 0;
  c->scheme = ZLAB_SCHEME_INTEGRATED_VARIANCE;
  c->threads = d.threads;
  c->chunk_paths = d.chunk_paths;
  c->memory_limit = d.memory_limit;
}

zlab_status zlab_sim_config_validate(const zlab_sim_config* c) {
  ZLAB_REQUIRE_ARGS(c);
  return guard([&] { to_cpp(*c).validate(); });
}

zlab_status zlab_sim_memory_estimate(const zlab_sim_config* c, size_t* bytes) {
  ZLAB_REQUIRE_ARGS(c, bytes);
  return guard([&] { *bytes = to_cpp(*c).memory_estimate(); });
}

zlab_status zlab_simulate(const zlab_model_params* p, const zlab_curve* xi, const zlab_sim_config* c,
                          zlab_paths** out) {
  ZLAB_REQUIRE_ARGS(p, xi, c, out);
  return guard([&] { *out = new zlab_paths{zlab::simulate_paths(to_cpp(*p), xi->curve, to_cpp(*c))}; });
}

zlab_status zlab_paths_info(const zlab_paths* b, int64_t* n_paths, int* n_days, double* truncated_fraction,
                            uint64_t* kernel_checksum) {
  ZLAB_REQUIRE_ARGS(b);
  if (n_paths) *n_paths = b->batch.n_paths();
  if (n_days) *n_days = b->batch.n_days();
  if (truncated_fraction) *truncated_fraction = b->batch.truncated_fraction();
  if (kernel_checksum) *kernel_checksum = b->batch.kernel_checksum;
  return ZLAB_OK;
}

zlab_status zlab_paths_get(const zlab_paths* b, int64_t path, int day, double* r, double* s2) {
  ZLAB_REQUIRE_ARGS(b);
  return guard([&] {
    zlab::detail::require(path >= 0 && path < b->batch.n_paths(), "path index out of range");
    zlab::detail::require(day >= 1 && day <= b->batch.n_days(), "day out of range");
    if (r) *r = b->batch.r(path, day);
    if (s2) *s2 = b->batch.s2(path, day);
  });
}

zlab_status zlab_paths_zumbach(const zlab_paths* b, int t_day, int k, zlab_estimate* cov,
                               zlab_estimate* expectation) {
  ZLAB_REQUIRE_ARGS(b);
  return guard([&] {
    const auto z = zlab::estimate_zumbach_mc(b->batch, t_day, k);
    if (cov) *cov = to_c(z.cov);
    if (expectation) *expectation = to_c(z.expectation);
  });
}

zlab_status zlab_paths_moments(const zlab_paths* b, int t_day, zlab_moments* out) {
  ZLAB_REQUIRE_ARGS(b, out);
  return guard([&] {
    const auto m = zlab::estimate_moments_mc(b->batch, t_day);
    *out = {to_c(m.mean_sigma2), to_c(m.mean_r2), to_c(m.var_sigma2), to_c(m.fourth_moment_r), m.samples};
  });
}

zlab_status zlab_paths_write_csv(const zlab_paths* b, const char* path) {
  ZLAB_REQUIRE_ARGS(b, path);
  return guard([&] { zlab::write_path_csv(b->batch, path); });
}

zlab_status zlab_paths_write_generic(const zlab_paths* b, const char* path, const char* prefix) {
  ZLAB_REQUIRE_ARGS(b, path);
  return guard([&] { zlab::write_generic_csv(b->batch, path, prefix ? prefix : "SIM"); });
}

void zlab_paths_free(zlab_paths* b) { delete b; }

// ---- empirical

zlab_status zlab_dataset_load(const char* path, zlab_format format, const char* variance_column,
                              zlab_dataset** out) {
  ZLAB_REQUIRE_ARGS(path, out);
  return guard([&] {
    zlab::IngestOptions opt;
    if (format != ZLAB_FORMAT_GENERIC && format != ZLAB_FORMAT_OXFORD) throw zlab::DomainError("unknown input format");
    opt.format = format == ZLAB_FORMAT_OXFORD ? zlab::InputFormat::Oxford : zlab::InputFormat::Generic;
    if (variance_column) opt.variance_column = variance_column;
    auto res = zlab::ingest(std::string(path), opt);
    *out = new zlab_dataset{std::move(res.series), std::move(res.warnings)};
  });
}

zlab_status zlab_dataset_create(zlab_dataset** out) {
  ZLAB_REQUIRE_ARGS(out);
  return guard([&] { *out = new zlab_dataset{}; });
}

zlab_status zlab_dataset_add_series(zlab_dataset* d, const char* index_id, const double* r, const double* s2,
                                    size_t n) {
  ZLAB_REQUIRE_ARGS(d, index_id, r, s2);
  return guard([&] {
    zlab::DailySeries s;
    s.index_id = index_id;
    s.r.assign(r, r + n);
    s.s2.assign(s2, s2 + n);
    for (size_t i = 0; i < n; ++i) s.dates.push_back(zlab::Date::business_day(static_cast<long>(i)));
    s.validate();
    d->series.push_back(std::move(s));
  });
}

size_t zlab_dataset_size(const zlab_dataset* d) { return d ? d->series.size() : 0; }

zlab_status zlab_dataset_series_info(const zlab_dataset* d, size_t i, const char** index_id, size_t* n_obs,
                                     size_t* n_gaps) {
  ZLAB_REQUIRE_ARGS(d);
  return guard([&] {
    const auto& s = series_at(d, i);
    if (index_id) *index_id = s.index_id.c_str();
    if (n_obs) *n_obs = s.size();
    if (n_gaps) *n_gaps = s.gaps.size();
  });
}

size_t zlab_dataset_warning_count(const zlab_dataset* d) { return d ? d->warnings.size() : 0; }

const char* zlab_dataset_warning(const zlab_dataset* d, size_t i) {
  if (!d || i >= d->warnings.size()) return nullptr;
  return d->warnings[i].c_str();
}

void zlab_dataset_free(zlab_dataset* d) { delete d; }

void zlab_empirical_options_default(zlab_empirical_options* o) {
  if (!o) return;
  const zlab::EmpiricalOptions e;
  *o = {e.min_pairs, e.demean ? 1 : 0, e.winsorize, e.annualize ? 1 : 0, e.threads};
}

zlab_status zlab_c2(const zlab_dataset* d, size_t index, int tau, const zlab_empirical_options* o, double* out) {
  ZLAB_REQUIRE_ARGS(d, out);
  return guard([&] {
    const auto opt = to_cpp(o);
    *out = zlab::c2(zlab::prepare(series_at(d, index), opt), tau, opt.min_pairs);
  });
}

zlab_status zlab_tra_compute(const zlab_dataset* d, size_t index, int tau_max, const zlab_empirical_options* o,
                             zlab_tra** out) {
  ZLAB_REQUIRE_ARGS(d, out);
  return guard([&] {
    const auto opt = to_cpp(o);
    *out = wrap(zlab::rho_curve(zlab::prepare(series_at(d, index), opt), tau_max, opt.min_pairs));
  });
}

zlab_status zlab_tra_compute_all(const zlab_dataset* d, int tau_max, const zlab_empirical_options* o,
                                 zlab_tra** out) {
  ZLAB_REQUIRE_ARGS(d, out);
  return guard([&] {
    auto curves = zlab::rho_curves(d->series, tau_max, to_cpp(o));
    for (size_t i = 0; i < curves.size(); ++i) out[i] = wrap(std::move(curves[i]));
  });
}

zlab_status zlab_tra_average(const zlab_tra* const* curves, size_t n, zlab_tra** out) {
  ZLAB_REQUIRE_ARGS(curves, out);
  return guard([&] {
    std::vector<zlab::TraCurve> all;
    for (size_t i = 0; i < n; ++i) {
      if (!curves[i]) throw zlab::DomainError("NULL curve in average");
      all.push_back(curves[i]->curve);
    }
    *out = wrap(zlab::cross_index_average(all));
  });
}

size_t zlab_tra_size(const zlab_tra* c) { return c ? c->curve.size() : 0; }

zlab_status zlab_tra_get(const zlab_tra* c, size_t i, zlab_tra_row* row) {
  ZLAB_REQUIRE_ARGS(c, row);
  if (i >= c->curve.size()) return fail(ZLAB_ERR_DOMAIN, "curve row out of range");
  const auto& t = c->curve;
  *row = {t.taus[i], t.c2_fwd[i], t.c2_bwd[i], t.rho_fwd[i], t.rho_bwd[i], t.z[i], c->delta[i], t.n_obs[i]};
  return ZLAB_OK;
}

zlab_status zlab_tra_integrated_difference(const zlab_tra* c, int tau, double* out) {
  ZLAB_REQUIRE_ARGS(c, out);
  return guard([&] { *out = zlab::integrated_difference(c->curve, tau); });
}

zlab_status zlab_tra_write(const zlab_tra* c, const char* path, int format) {
  ZLAB_REQUIRE_ARGS(c, path);
  return guard([&] {
    if (format == 0) {
      zlab::write_tra_csv(c->curve, path);
    } else if (format == 1) {
      zlab::write_tra_json(c->curve, path);
    } else {
      throw zlab::DomainError("unknown curve output format");
    }
  });
}

zlab_status zlab_tra_read_csv(const char* path, zlab_tra** out) {
  ZLAB_REQUIRE_ARGS(path, out);
  return guard([&] { *out = wrap(zlab::read_tra_csv(path)); });
}

void zlab_tra_free(zlab_tra* c) { delete c; }

}  // extern "C"
