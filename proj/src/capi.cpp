#include "gluekit/gluekit.h"

#include <cstring>
#include <new>
#include <string>

#include "gluekit/error.hpp"
#include "gluekit/glue.hpp"
#include "gluekit/harness.hpp"
#include "gluekit/io.hpp"
#include "gluekit/sim_capacity.hpp"
#include "gluekit/theory.hpp"

struct gk_config {
  gluekit::Json json;
};

struct gk_report {
  gluekit::ReportBundle bundle;
};

struct gk_ensemble {
  gluekit::ManifoldEnsemble ensemble;
};

namespace {

thread_local std::string last_error;

gk_status fail(gk_status code, const std::string& what) {
  last_error = what;
  return code;
}

template <class Fn>
gk_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return GK_OK;
  } catch (const gluekit::Error& e) {
    return fail(static_cast<gk_status>(static_cast<int>(e.code())), e.what());
  } catch (const gluekit::Json::exception& e) {
    return fail(GK_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(GK_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(GK_ERR_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define GK_REQUIRE(ptr)                                                  \
  do {                                                                   \
    if (!(ptr)) return fail(GK_ERR_CONFIG, "null argument: " #ptr);      \
  } while (0)

unsigned threads_or_default(unsigned threads) {
  return threads ? threads : gluekit::resolve_threads(gluekit::Json::object());
}

}  // namespace

extern "C" {

const char* gk_version(void) {
  static const std::string v = gluekit::version_string();
  return v.c_str();
}

const char* gk_last_error(void) { return last_error.c_str(); }

void gk_string_free(char* s) { delete[] s; }

size_t gk_kind_count(void) { return gluekit::experiment_kinds().size(); }

const char* gk_kind_name(size_t i) {
  const auto& k = gluekit::experiment_kinds();
  return i < k.size() ? k[i].c_str() : nullptr;
}

size_t gk_preset_count(void) { return gluekit::preset_names().size(); }

const char* gk_preset_name(size_t i) {
  const auto& k = gluekit::preset_names();
  return i < k.size() ? k[i].c_str() : nullptr;
}

gk_status gk_config_new(const char* kind, gk_config** out) {
  GK_REQUIRE(kind);
  GK_REQUIRE(out);
  return guarded([&] {
    gluekit::Json j{{"kind", kind}};
    gluekit::validate_config(j);
    *out = new gk_config{std::move(j)};
  });
}

gk_status gk_config_from_file(const char* path, gk_config** out) {
  GK_REQUIRE(path);
  GK_REQUIRE(out);
  return guarded([&] { *out = new gk_config{gluekit::load_config(path)}; });
}

gk_status gk_config_from_json(const char* text, gk_config** out) {
  GK_REQUIRE(text);
  GK_REQUIRE(out);
  return guarded([&] {
    try {
      *out = new gk_config{gluekit::Json::parse(text)};
    } catch (const gluekit::Json::parse_error& e) {
      throw gluekit::ConfigError(e.what());
    }
  });
}

gk_status gk_config_from_preset(const char* name, gk_config** out) {
  GK_REQUIRE(name);
  GK_REQUIRE(out);
  return guarded([&] { *out = new gk_config{gluekit::preset(name)}; });
}

gk_status gk_config_set(gk_config* config, const char* assignment) {
  GK_REQUIRE(config);
  GK_REQUIRE(assignment);
  return guarded([&] { gluekit::apply_override(config->json, assignment); });
}

gk_status gk_config_resolved(const gk_config* config, char** json_out) {
  GK_REQUIRE(config);
  GK_REQUIRE(json_out);
  return guarded([&] { *json_out = copy_string(gluekit::validate_config(config->json).dump(2)); });
}

void gk_config_free(gk_config* config) { delete config; }

gk_status gk_run(const gk_config* config, gk_report** out) {
  GK_REQUIRE(config);
  GK_REQUIRE(out);
  return guarded([&] { *out = new gk_report{gluekit::run_experiment(config->json)}; });
}

gk_status gk_report_emit(const gk_report* report, const char* dir) {
  GK_REQUIRE(report);
  GK_REQUIRE(dir);
  return guarded([&] { gluekit::emit_reports(report->bundle, dir); });
}

gk_status gk_report_summary(const gk_report* report, char** text_out) {
  GK_REQUIRE(report);
  GK_REQUIRE(text_out);
  return guarded([&] { *text_out = copy_string(gluekit::summary_text(report->bundle)); });
}

size_t gk_report_table_count(const gk_report* report) { return report ? report->bundle.tables.size() : 0; }

const char* gk_report_table_name(const gk_report* report, size_t i) {
  if (!report || i >= report->bundle.tables.size()) return nullptr;
  return report->bundle.tables[i].name.c_str();
}

gk_status gk_report_table_shape(const gk_report* report, const char* table, size_t* rows, size_t* cols) {
  GK_REQUIRE(report);
  GK_REQUIRE(table);
  return guarded([&] {
    const auto& t = report->bundle.table(table);
    if (rows) *rows = t.rows.size();
    if (cols) *cols = t.columns.size();
  });
}

gk_status gk_report_value(const gk_report* report, const char* table, size_t row, const char* column, double* out) {
  GK_REQUIRE(report);
  GK_REQUIRE(table);
  GK_REQUIRE(column);
  GK_REQUIRE(out);
  return guarded([&] {
    const auto& t = report->bundle.table(table);
    if (row >= t.rows.size()) throw gluekit::ConfigError("row index out of range");
    *out = t.at(row, column);
  });
}

void gk_report_free(gk_report* report) { delete report; }

gk_status gk_ensemble_load(const char* path, const char* labels_path, gk_ensemble** out) {
  GK_REQUIRE(path);
  GK_REQUIRE(labels_path);
  GK_REQUIRE(out);
  return guarded([&] {
    *out = new gk_ensemble{gluekit::load_activations(path, gluekit::format_from_path(path), labels_path)};
  });
}

gk_status gk_ensemble_from_array(const double* data, size_t rows, size_t cols, const int64_t* labels,
                                 gk_ensemble** out) {
  GK_REQUIRE(data);
  GK_REQUIRE(labels);
  GK_REQUIRE(out);
  return guarded([&] {
    const gluekit::Matrix x = Eigen::Map<const gluekit::Matrix>(data, rows, cols);
    std::vector<std::int64_t> l(labels, labels + rows);
    *out = new gk_ensemble{gluekit::build_ensemble(x, l)};
  });
}

gk_status gk_ensemble_shape(const gk_ensemble* ensemble, size_t* manifolds, size_t* dim, size_t* points) {
  GK_REQUIRE(ensemble);
  if (manifolds) *manifolds = ensemble->ensemble.num_manifolds();
  if (dim) *dim = ensemble->ensemble.ambient_dim();
  if (points) *points = ensemble->ensemble.total_points();
  return GK_OK;
}

void gk_ensemble_free(gk_ensemble* ensemble) { delete ensemble; }

gk_status gk_glue_estimate(const gk_ensemble* ensemble, size_t n_draws, uint64_t seed, unsigned threads,
                           gk_glue_result* out) {
  GK_REQUIRE(ensemble);
  GK_REQUIRE(out);
  return guarded([&] {
    gluekit::GlueOptions opts;
    opts.n_draws = n_draws;
    opts.threads = threads_or_default(threads);
    const auto r = gluekit::estimate_geometry(ensemble->ensemble, opts, gluekit::RngStream(seed));
    *out = gk_glue_result{r.capacity.value,     r.capacity.std_err,     r.dimension.value,
                          r.dimension.std_err,  r.radius.value,         r.radius.std_err,
                          r.center_align.value, r.center_align.std_err, r.axis_align.value,
                          r.axis_align.std_err, r.center_axis_align.value, r.center_axis_align.std_err,
                          r.n_draws,            r.degenerate ? 1 : 0};
  });
}

gk_status gk_simulated_capacity(const gk_ensemble* ensemble, size_t trials, uint64_t seed, unsigned threads,
                                double* alpha, size_t* critical_dim) {
  GK_REQUIRE(ensemble);
  GK_REQUIRE(alpha);
  return guarded([&] {
    const auto r = gluekit::simulated_capacity(ensemble->ensemble, trials, gluekit::RngStream(seed),
                                               gluekit::SimMethod::BinarySearch, threads_or_default(threads));
    *alpha = r.alpha_sim;
    if (critical_dim) *critical_dim = r.critical_dim;
  });
}

gk_status gk_cover_prob(size_t dim, size_t points, double* out) {
  GK_REQUIRE(out);
  return guarded([&] { *out = gluekit::cover_prob(dim, points); });
}

}  // extern "C"
