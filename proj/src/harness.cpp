#include "gluekit/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "gluekit/error.hpp"
#include "gluekit/glue.hpp"
#include "gluekit/io.hpp"
#include "gluekit/parallel.hpp"
#include "gluekit/sim_capacity.hpp"
#include "gluekit/synth.hpp"
#include "gluekit/theory.hpp"
#include "gluekit/two_layer.hpp"

#ifndef GLUEKIT_VERSION
#define GLUEKIT_VERSION "0.0.0"
#endif

namespace gluekit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string> kTopLevel = {"kind", "seed", "threads", "params"};

Json defaults_for(const std::string& kind) {
  if (kind == "glue")
    return {{"activations", ""}, {"labels", ""}, {"format", "auto"}, {"n_draws", 200},
            {"qp_tol", kDefaultQpTol}, {"absolute_alignments", false}};
  if (kind == "simcap")
    return {{"activations", ""}, {"labels", ""}, {"format", "auto"}, {"trials", 100}, {"method", "bisection"}};
  if (kind == "synth-sweep")
    return {{"generator", "spherical"}, {"P", 2},           {"M", 200},         {"D", 2},
            {"R", 1.0},                 {"d", 1000},        {"noise_eps", 1e-2}, {"rho_center", 0.0},
            {"rho_axis", 0.0},          {"psi", 0.0},       {"sweep", "D"},     {"values", {2, 4, 6, 8, 10}},
            {"seeds", 3},               {"n_draws", 200},   {"absolute_alignments", false}};
  if (kind == "theory-curve")
    return {{"psi1", 1.0},        {"psi2", 2.0},         {"activation", "relu"},
            {"link", "logistic"}, {"link_param", 4.0},   {"etas", {0.0, 0.5, 1.0, 2.0, 4.0}},
            {"normal_order", 128}, {"moment_order", 128}, {"mp_points", 4000}};
  if (kind == "cover-check")
    return {{"N", 60}, {"P", {60, 90, 108, 120, 132, 150}}, {"trials", 1000}, {"capacity_points", 120},
            {"capacity_trials", 100}};
  if (kind == "train2l")
    return {{"data", "gaussian"},
            {"P", 20},
            {"M", 15},
            {"D", 8},
            {"R", 0.5},
            {"d", 200},
            {"noise_eps", 1e-2},
            {"N", 300},
            {"K", 1},
            {"activation", "relu"},
            {"loss", "mse"},
            {"c", 0.0},
            {"eta", {50.0}},
            {"alpha", {1.0}},
            {"eta_bar", Json::array()},
            {"eta_bar_norm", 1.0},
            {"epochs", 10000},
            {"checkpoints", Json::array()},
            {"glue_draws", 100},
            {"glue_draws_final", 200},
            {"glue_endpoints_only", false},
            {"seeds", 8}};
  if (kind == "one-step")
    return {{"d", 400},         {"psi1", 1.0},         {"psi2", 2.0},          {"etas", {0.0, 0.5, 1.0, 2.0, 4.0}},
            {"reps", 20},       {"activation", "relu"}, {"link", "logistic"},   {"link_param", 4.0},
            {"n_test", 4000},   {"capacity", false},   {"capacity_trials", 50}};
  throw ConfigError("unknown experiment kind '" + kind + "'");
}

bool same_type(const Json& def, const Json& v) {
  if (def.is_number()) return v.is_number();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  return false;
}

std::size_t get_size(const Json& p, const char* key) {
  const Json& v = p.at(key);
  if (!v.is_number_integer() && !(v.is_number() && v.get<double>() == std::floor(v.get<double>())))
    throw ConfigError(std::string(key) + " must be an integer");
  const double d = v.get<double>();
  if (d < 0) throw ConfigError(std::string(key) + " must be non-negative");
  return static_cast<std::size_t>(d);
}

double get_num(const Json& p, const char* key) { return p.at(key).get<double>(); }

std::vector<double> get_nums(const Json& p, const char* key) {
  std::vector<double> out;
  for (const auto& v : p.at(key)) {
    if (!v.is_number()) throw ConfigError(std::string(key) + " must be a list of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? kNaN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

LabelFunction link_from(const Json& p) {
  const std::string name = p.at("link");
  if (name == "logistic") return logistic_link(get_num(p, "link_param"));
  if (name == "constant") return constant_link(get_num(p, "link_param"));
  if (name == "sign") return sign_link();
  throw ConfigError("unknown link function '" + name + "'");
}

ManifoldEnsemble load_from(const Json& p) {
  const std::string act = p.at("activations"), labels = p.at("labels"), fmt = p.at("format");
  if (act.empty() || labels.empty()) throw ConfigError("activations and labels paths are required");
  ArrayFormat format;
  if (fmt == "auto") format = format_from_path(act);
  else if (fmt == "csv") format = ArrayFormat::Csv;
  else if (fmt == "npy") format = ArrayFormat::Npy;
  else throw ConfigError("format must be auto, csv or npy");
  return load_activations(act, format, labels);
}

std::vector<Column> glue_columns() {
  return {{"capacity", "mean-field manifold capacity alpha_M (manifolds per dimension)"},
          {"capacity_se", "standard error of capacity"},
          {"dimension", "effective manifold dimension D_M"},
          {"dimension_se", "standard error of dimension"},
          {"radius", "effective manifold radius R_M (relative to center norm)"},
          {"radius_se", "standard error of radius"},
          {"center_align", "center alignment rho^c_M (cosine)"},
          {"center_align_se", "standard error of center alignment"},
          {"axis_align", "axis alignment rho^a_M (cosine)"},
          {"axis_align_se", "standard error of axis alignment"},
          {"center_axis_align", "center-axis alignment psi_M (cosine)"},
          {"center_axis_align_se", "standard error of center-axis alignment"},
          {"approx_capacity", "(1 + R_M^-2) / D_M; nan when degenerate"}};
}

std::vector<double> glue_row(const GlueReport& r) {
  double approx = kNaN;
  if (!r.degenerate && r.dimension.value > 0 && r.radius.value > 0)
    approx = capacity_from_geometry(r.dimension.value, r.radius.value);
  return {r.capacity.value,     r.capacity.std_err,     r.dimension.value,         r.dimension.std_err,
          r.radius.value,       r.radius.std_err,       r.center_align.value,      r.center_align.std_err,
          r.axis_align.value,   r.axis_align.std_err,   r.center_axis_align.value, r.center_axis_align.std_err,
          approx};
}

void run_glue(const Json& p, std::uint64_t seed, unsigned threads, ReportBundle& out) {
  const ManifoldEnsemble e = load_from(p);
  GlueOptions opts;
  opts.n_draws = get_size(p, "n_draws");
  opts.qp_tol = get_num(p, "qp_tol");
  opts.threads = threads;
  opts.absolute_alignments = p.at("absolute_alignments");
  const GlueReport r = estimate_geometry(e, opts, RngStream(seed));

  Table t{"geometry", glue_columns(), {}};
  t.columns.push_back({"P", "number of manifolds"});
  t.columns.push_back({"N", "ambient dimension"});
  t.columns.push_back({"n_draws", "anchor draws"});
  auto row = glue_row(r);
  row.insert(row.end(), {double(e.num_manifolds()), double(e.ambient_dim()), double(r.n_draws)});
  t.rows.push_back(row);
  out.tables.push_back(t);
  out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
  out.summary.push_back("P = " + std::to_string(e.num_manifolds()) + ", N = " + std::to_string(e.ambient_dim()));
  out.summary.push_back("capacity " + fixed(r.capacity.value) + " +- " + fixed(r.capacity.std_err));
  out.summary.push_back("dimension " + fixed(r.dimension.value) + ", radius " + fixed(r.radius.value));
  out.summary.push_back("alignments: center " + fixed(r.center_align.value) + ", axis " + fixed(r.axis_align.value) +
                        ", center-axis " + fixed(r.center_axis_align.value));
}

void run_simcap(const Json& p, std::uint64_t seed, unsigned threads, ReportBundle& out) {
  const ManifoldEnsemble e = load_from(p);
  const std::string m = p.at("method");
  SimMethod method;
  if (m == "bisection") method = SimMethod::BinarySearch;
  else if (m == "sum") method = SimMethod::SumForm;
  else throw ConfigError("method must be bisection or sum");
  const auto r = simulated_capacity(e, get_size(p, "trials"), RngStream(seed), method, threads);

  out.tables.push_back({"capacity",
                        {{"alpha_sim", "simulated capacity P / n*"},
                         {"critical_dim", "projection dimension n* with p(n*) >= 0.5"},
                         {"P", "number of manifolds"},
                         {"N", "ambient dimension"}},
                        {{r.alpha_sim, double(r.critical_dim), double(e.num_manifolds()), double(e.ambient_dim())}}});
  Table curve{"curve", {{"n", "projection dimension"}, {"p_hat", "separable fraction"}, {"trials", "trials"}}, {}};
  for (const auto& pt : r.curve.entries) curve.rows.push_back({double(pt.n), pt.p_hat, double(pt.trials)});
  out.tables.push_back(curve);
  out.plots.push_back({"separability", "curve", "", "n", "p_hat", ""});
  out.summary.push_back("simulated capacity " + fixed(r.alpha_sim) + " (n* = " + std::to_string(r.critical_dim) +
                        ", P = " + std::to_string(e.num_manifolds()) + ")");
}

void run_synth_sweep(const Json& p, std::uint64_t seed, unsigned threads, ReportBundle& out) {
  const std::string generator = p.at("generator"), sweep = p.at("sweep");
  static const std::vector<std::string> sweepable = {"D", "R", "rho_center", "rho_axis", "psi", "P", "M", "d"};
  if (std::find(sweepable.begin(), sweepable.end(), sweep) == sweepable.end())
    throw ConfigError("cannot sweep '" + sweep + "'");
  if (generator != "spherical" && generator != "gaussian") throw ConfigError("generator must be spherical or gaussian");
  const auto values = get_nums(p, "values");
  const std::size_t seeds = get_size(p, "seeds");
  if (values.empty() || seeds == 0) throw ConfigError("sweep needs values and at least one seed");

  std::vector<Column> cols = {{"value", "swept parameter " + sweep}, {"seed", "replicate index"}};
  for (const auto& c : glue_columns()) cols.push_back(c);
  Table runs{"runs", cols, {}};

  GlueOptions opts;
  opts.n_draws = get_size(p, "n_draws");
  opts.absolute_alignments = p.at("absolute_alignments");
  opts.threads = threads;
  const RngStream root(seed);
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    Json q = p;
    q[sweep] = values[vi];
    for (std::size_t s = 0; s < seeds; ++s) {
      const RngStream rng = root.substream(vi).substream(s);
      SyntheticEnsembles data;
      if (generator == "gaussian") {
        data = gen_isotropic_gaussian(get_size(q, "P"), get_size(q, "M"), get_num(q, "R"), get_size(q, "d"),
                                      rng.substream(1));
      } else {
        SphericalSpec spec;
        spec.P = get_size(q, "P");
        spec.M = get_size(q, "M");
        spec.D = get_size(q, "D");
        spec.R = get_num(q, "R");
        spec.d = get_size(q, "d");
        spec.noise_eps = get_num(q, "noise_eps");
        CorrelationSpec corr{get_num(q, "rho_center"), get_num(q, "rho_axis"), get_num(q, "psi")};
        data = apply_correlations(spec, corr, rng.substream(1));
      }
      const GlueReport r = estimate_geometry(data.train, opts, rng.substream(2));
      auto row = glue_row(r);
      row.insert(row.begin(), {values[vi], double(s)});
      runs.rows.push_back(row);
    }
  }

  // seed-averaged curve; standard errors are across seeds
  std::vector<Column> mcols = {{"value", "swept parameter " + sweep}};
  static const std::vector<std::string> metrics = {"capacity",   "dimension",         "radius",
                                                   "center_align", "axis_align",     "center_axis_align",
                                                   "approx_capacity"};
  for (const auto& m : metrics) {
    mcols.push_back({m, "seed mean of " + m});
    mcols.push_back({m + "_se", "standard error across seeds of " + m});
  }
  Table curve{"sweep", mcols, {}};
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    std::vector<double> row = {values[vi]};
    for (const auto& m : metrics) {
      std::vector<double> xs;
      for (std::size_t s = 0; s < seeds; ++s) xs.push_back(runs.at(vi * seeds + s, m));
      row.push_back(mean_of(xs));
      row.push_back(se_of(xs));
    }
    curve.rows.push_back(row);
  }
  out.tables.push_back(curve);
  out.tables.push_back(runs);
  for (const auto& m : metrics)
    if (m != "approx_capacity") out.plots.push_back({m + "_vs_" + sweep, "sweep", "", "value", m, m + "_se"});
  for (std::size_t vi = 0; vi < values.size(); ++vi)
    out.summary.push_back(sweep + " = " + format_number(values[vi]) + ": capacity " +
                          fixed(curve.at(vi, "capacity")) + ", D_M " + fixed(curve.at(vi, "dimension")) + ", R_M " +
                          fixed(curve.at(vi, "radius")));
}

void run_theory_curve(const Json& p, ReportBundle& out) {
  const double psi1 = get_num(p, "psi1"), psi2 = get_num(p, "psi2");
  const auto F = link_from(p);
  const auto act = activation_from_name(p.at("activation"));
  TheoryOptions opts;
  opts.normal_order = get_size(p, "normal_order");
  opts.moment_order = get_size(p, "moment_order");
  opts.mp_points = get_size(p, "mp_points");
  Table t{"theory",
          {{"eta", "one-step learning rate"},
           {"capacity", "asymptotic storage capacity"},
           {"accuracy", "asymptotic test accuracy"},
           {"theta3", "teacher alignment parameter"}},
          {}};
  for (double eta : get_nums(p, "etas")) {
    const auto g = gauss_equiv_params(psi1, psi2, eta, F, act, opts);
    t.rows.push_back({eta, capacity_theory(psi1, psi2, eta, F, act, opts), accuracy_theory(psi1, psi2, eta, F, act, opts),
                      g.theta3});
  }
  out.tables.push_back(t);
  out.plots.push_back({"capacity_vs_eta", "theory", "", "eta", "capacity", ""});
  out.plots.push_back({"accuracy_vs_eta", "theory", "", "eta", "accuracy", ""});
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    out.summary.push_back("eta = " + format_number(t.rows[i][0]) + ": capacity " + fixed(t.rows[i][1]) +
                          ", accuracy " + fixed(t.rows[i][2]));
}

ManifoldEnsemble gaussian_points(std::size_t P, std::size_t N, RngStream rng) {
  std::vector<PointCloudManifold> ms;
  for (std::size_t i = 0; i < P; ++i) ms.push_back({int(i), sample_gaussian_matrix(1, N, 1.0, rng)});
  return ManifoldEnsemble(std::move(ms));
}

void run_cover_check(const Json& p, std::uint64_t seed, unsigned threads, ReportBundle& out) {
  const std::size_t N = get_size(p, "N"), trials = get_size(p, "trials");
  const RngStream root(seed);
  Table t{"cover",
          {{"P", "number of points"},
           {"load", "P / N"},
           {"p_empirical", "fraction of separable random dichotomies"},
           {"p_cover", "closed-form separability probability"},
           {"trials", "dichotomies sampled"}},
          {}};
  const auto Ps = get_nums(p, "P");
  for (std::size_t i = 0; i < Ps.size(); ++i) {
    const auto P = static_cast<std::size_t>(Ps[i]);
    const auto pts = gaussian_points(P, N, root.substream(1).substream(i));
    const double emp = est_prob(pts, N, trials, root.substream(2).substream(i), threads);
    t.rows.push_back({double(P), double(P) / double(N), emp, cover_prob(N, P), double(trials)});
  }
  out.tables.push_back(t);
  out.plots.push_back({"cover_empirical", "cover", "", "load", "p_empirical", ""});
  out.plots.push_back({"cover_closed_form", "cover", "", "load", "p_cover", ""});

  const std::size_t cp = get_size(p, "capacity_points");
  if (cp > 0) {
    const auto pts = gaussian_points(cp, N, root.substream(3));
    const auto r = simulated_capacity(pts, get_size(p, "capacity_trials"), root.substream(4),
                                      SimMethod::BinarySearch, threads);
    out.tables.push_back({"points_capacity",
                          {{"P", "number of points"},
                           {"N", "ambient dimension"},
                           {"alpha_sim", "simulated capacity"},
                           {"critical_dim", "critical projection dimension"}},
                          {{double(cp), double(N), r.alpha_sim, double(r.critical_dim)}}});
    out.summary.push_back("simulated capacity of " + std::to_string(cp) + " points in R^" + std::to_string(N) +
                          ": " + fixed(r.alpha_sim));
  }
  double worst = 0;
  for (const auto& r : t.rows) worst = std::max(worst, std::abs(r[2] - r[3]));
  out.summary.push_back("largest |p_empirical - p_cover| = " + fixed(worst));
}

struct Run2l {
  double eta, alpha, eta_bar;
};

void run_train2l(const Json& p, std::uint64_t seed, unsigned threads, ReportBundle& out) {
  const auto etas = get_nums(p, "eta"), alphas = get_nums(p, "alpha"), eta_bars = get_nums(p, "eta_bar");
  const double norm = get_num(p, "eta_bar_norm");
  if (!(norm > 0)) throw ConfigError("eta_bar_norm must be positive");
  std::vector<Run2l> runs;
  if (!eta_bars.empty()) {
    for (double eta : etas)
      for (double eb : eta_bars) {
        if (!(eb > 0)) throw ConfigError("eta_bar must be positive");
        runs.push_back({eta, eta / (norm * eb), eb});
      }
  } else {
    for (double eta : etas)
      for (double a : alphas) {
        if (!(a > 0)) throw ConfigError("alpha must be positive");
        runs.push_back({eta, a, eta / (a * norm)});
      }
  }
  if (runs.empty()) throw ConfigError("no runs: eta list is empty");
  const std::size_t seeds = get_size(p, "seeds");
  if (seeds == 0) throw ConfigError("seeds must be positive");

  const std::string data_kind = p.at("data"), loss_name = p.at("loss");
  if (data_kind != "gaussian" && data_kind != "spherical") throw ConfigError("data must be gaussian or spherical");
  if (loss_name != "mse" && loss_name != "bce") throw ConfigError("loss must be mse or bce");
  const auto act = activation_from_name(p.at("activation"));
  const std::size_t P = get_size(p, "P"), M = get_size(p, "M"), d = get_size(p, "d"), N = get_size(p, "N"),
                    K = get_size(p, "K");

  TrainConfig base;
  base.readout_lr_factor = get_num(p, "c");
  base.loss = loss_name == "mse" ? Loss::Mse : Loss::Bce;
  base.epochs = get_size(p, "epochs");
  for (double e : get_nums(p, "checkpoints")) base.checkpoint_epochs.push_back(static_cast<std::size_t>(e));
  base.glue_draws = get_size(p, "glue_draws");
  base.glue_draws_final = get_size(p, "glue_draws_final");
  base.glue_endpoints_only = p.at("glue_endpoints_only");
  base.threads = 1;

  const RngStream root(seed);
  const std::size_t jobs = runs.size() * seeds;
  std::vector<MetricTrace> traces(jobs);
  parallel_for(jobs, threads, [&](std::size_t job) {
    const std::size_t r = job / seeds, s = job % seeds;
    // data, labels and initial weights depend on the seed index only
    const RngStream rng = root.substream(s);
    SyntheticEnsembles data;
    if (data_kind == "gaussian") {
      data = gen_isotropic_gaussian(P, M, get_num(p, "R"), d, rng.substream(1));
    } else {
      SphericalSpec spec{P, M, get_size(p, "D"), get_num(p, "R"), d, get_num(p, "noise_eps")};
      data = gen_isotropic_spherical(spec, rng.substream(1));
    }
    RngStream label_rng = rng.substream(2);
    Matrix labels(P, K);
    for (std::size_t j = 0; j < K; ++j) labels.col(j) = assign_labels(P, label_rng);
    const auto train_set = label_ensemble(data.train, labels), test_set = label_ensemble(data.test, labels);
    auto net = init_two_layer(d, N, K, runs[r].alpha, act, rng.substream(3));
    TrainConfig cfg = base;
    cfg.eta = runs[r].eta;
    cfg.seed = rng.substream(4).engine()();
    traces[job] = train(net, train_set, test_set, cfg);
  });

  std::vector<Column> cols = {{"run", "run index"},
                              {"eta", "base learning rate"},
                              {"alpha", "output scale factor"},
                              {"eta_bar", "normalized effective learning rate"},
                              {"seed", "replicate index"},
                              {"epoch", "epoch"},
                              {"train_accuracy", "train accuracy (fraction)"},
                              {"test_accuracy", "test accuracy (fraction)"},
                              {"loss", "scaled training loss"},
                              {"weight_change", "|W_t - W_0|_F / |W_0|_F"},
                              {"activation_stability", "fraction of positive hidden features (test)"},
                              {"rep_similarity", "cosine of feature Grams vs init"},
                              {"ntk_change", "|K_t - K_0|_F / |K_0|_F"},
                              {"kernel_alignment", "cosine of NTK vs init"},
                              {"cka_rep_label", "CKA(feature Gram, label Gram)"},
                              {"cka_ntk_label", "CKA(NTK, label Gram)"}};
  for (const auto& c : glue_columns()) cols.push_back(c);
  Table trace{"trace", cols, {}};

  Table summary{"runs",
                {{"run", "run index"},
                 {"eta", "base learning rate"},
                 {"alpha", "output scale factor"},
                 {"eta_bar", "normalized effective learning rate"},
                 {"capacity_init", "seed mean capacity at epoch 0"},
                 {"capacity_final", "seed mean capacity at the last checkpoint"},
                 {"capacity_gain", "seed mean of final minus initial capacity"},
                 {"capacity_gain_se", "standard error across seeds"},
                 {"weight_change", "seed mean final weight change"},
                 {"train_accuracy", "seed mean final train accuracy"},
                 {"test_accuracy", "seed mean final test accuracy"},
                 {"diverged", "number of diverged seeds"}},
                {}};

  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::vector<double> cap0, cap1, gain, wc, tra, tea;
    double diverged = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto& tr = traces[r * seeds + s];
      if (tr.diverged) {
        diverged += 1;
        out.warnings.push_back("run " + std::to_string(r) + " seed " + std::to_string(s) + " diverged");
      }
      for (const auto& cp : tr.checkpoints) {
        std::vector<double> row = {double(r),          runs[r].eta,
                                   runs[r].alpha,      runs[r].eta_bar,
                                   double(s),          double(cp.epoch),
                                   cp.train_accuracy,  cp.test_accuracy,
                                   cp.loss,            cp.weight_change,
                                   cp.activation_stability, cp.align.rep_similarity,
                                   cp.align.ntk_change, cp.align.kernel_alignment,
                                   cp.align.cka_rep_label, cp.align.cka_ntk_label};
        if (cp.glue) {
          const auto g = glue_row(*cp.glue);
          row.insert(row.end(), g.begin(), g.end());
        } else {
          row.insert(row.end(), glue_columns().size(), kNaN);
        }
        trace.rows.push_back(row);
      }
      if (tr.diverged || tr.checkpoints.empty()) continue;
      const auto& first = tr.checkpoints.front();
      const auto& last = tr.checkpoints.back();
      if (first.glue && last.glue) {
        cap0.push_back(first.glue->capacity.value);
        cap1.push_back(last.glue->capacity.value);
        gain.push_back(last.glue->capacity.value - first.glue->capacity.value);
      }
      wc.push_back(last.weight_change);
      tra.push_back(last.train_accuracy);
      tea.push_back(last.test_accuracy);
    }
    summary.rows.push_back({double(r), runs[r].eta, runs[r].alpha, runs[r].eta_bar, mean_of(cap0), mean_of(cap1),
                            mean_of(gain), se_of(gain), mean_of(wc), mean_of(tra), mean_of(tea), diverged});
    out.summary.push_back("eta_bar " + format_number(runs[r].eta_bar) + " (eta " + format_number(runs[r].eta) +
                          ", alpha " + format_number(runs[r].alpha) + "): capacity gain " + fixed(mean_of(gain)) +
                          ", weight change " + fixed(mean_of(wc)) + ", train accuracy " + fixed(mean_of(tra)));
  }
  out.tables.push_back(summary);
  out.tables.push_back(trace);
  out.plots.push_back({"capacity_gain_vs_eta_bar", "runs", "", "eta_bar", "capacity_gain", "capacity_gain_se"});
  out.plots.push_back({"capacity_vs_epoch", "trace", "eta_bar", "epoch", "capacity", ""});
  out.plots.push_back({"dimension_vs_radius", "trace", "eta_bar", "radius", "dimension", ""});
  out.plots.push_back({"weight_change_vs_epoch", "trace", "eta_bar", "epoch", "weight_change", ""});
  out.plots.push_back({"cka_rep_label_vs_epoch", "trace", "eta_bar", "epoch", "cka_rep_label", ""});
}

void run_one_step(const Json& p, std::uint64_t seed, unsigned threads, ReportBundle& out) {
  const auto etas = get_nums(p, "etas");
  const std::size_t reps = get_size(p, "reps");
  if (reps == 0) throw ConfigError("reps must be positive");
  const auto F = link_from(p);
  const auto act = activation_from_name(p.at("activation"));
  OneStepConfig base;
  base.d = get_size(p, "d");
  base.psi1 = get_num(p, "psi1");
  base.psi2 = get_num(p, "psi2");
  base.n_test = get_size(p, "n_test");
  const bool with_capacity = p.at("capacity");
  const std::size_t cap_trials = get_size(p, "capacity_trials");

  const RngStream root(seed);
  const std::size_t jobs = etas.size() * reps;
  std::vector<double> acc(jobs), cap(jobs, kNaN);
  parallel_for(jobs, threads, [&](std::size_t job) {
    OneStepConfig cfg = base;
    cfg.eta = etas[job / reps];
    const RngStream rng = root.substream(job / reps).substream(job % reps);
    const auto r = one_step_experiment(cfg, F, act, rng.substream(1));
    acc[job] = r.accuracy;
    if (with_capacity) cap[job] = one_step_capacity(r, F, act, cap_trials, rng.substream(2)).alpha;
  });

  Table t{"one_step",
          {{"eta", "one-step learning rate"},
           {"accuracy", "mean empirical test accuracy"},
           {"accuracy_se", "standard error across replicates"},
           {"accuracy_theory", "asymptotic test accuracy"},
           {"capacity_theory", "asymptotic storage capacity"},
           {"capacity", "mean empirical storage capacity (nan if not run)"},
           {"capacity_se", "standard error across replicates"}},
          {}};
  for (std::size_t e = 0; e < etas.size(); ++e) {
    std::vector<double> a(acc.begin() + e * reps, acc.begin() + (e + 1) * reps);
    std::vector<double> c(cap.begin() + e * reps, cap.begin() + (e + 1) * reps);
    const double at = accuracy_theory(base.psi1, base.psi2, etas[e], F, act);
    const double ct = capacity_theory(base.psi1, base.psi2, etas[e], F, act);
    t.rows.push_back({etas[e], mean_of(a), se_of(a), at, ct, with_capacity ? mean_of(c) : kNaN,
                      with_capacity ? se_of(c) : kNaN});
    out.summary.push_back("eta = " + format_number(etas[e]) + ": accuracy " + fixed(mean_of(a)) + " (theory " +
                          fixed(at) + "), capacity theory " + fixed(ct));
  }
  out.tables.push_back(t);
  out.plots.push_back({"accuracy_empirical", "one_step", "", "eta", "accuracy", "accuracy_se"});
  out.plots.push_back({"accuracy_theory", "one_step", "", "eta", "accuracy_theory", ""});
  out.plots.push_back({"capacity_theory", "one_step", "", "eta", "capacity_theory", ""});
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string table_csv(const Table& t) {
  std::string s;
  for (std::size_t j = 0; j < t.columns.size(); ++j) s += (j ? "," : "") + t.columns[j].name;
  s += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) s += (j ? "," : "") + format_number(row[j]);
    s += '\n';
  }
  return s;
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"glue",    "simcap",  "synth-sweep", "theory-curve",
                                                 "cover-check", "train2l", "one-step"};
  return kinds;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"fig3a",  "fig4a",           "fig4b", "fig4b-flattening",
                                                 "cover", "glue-validation", "numerical-check"};
  return names;
}

Json preset(const std::string& name) {
  if (name == "fig3a")
    return {{"kind", "train2l"},
            {"seed", 1},
            {"params",
             {{"data", "gaussian"},
              {"R", 0.5},
              {"M", 15},
              {"P", 20},
              {"d", 200},
              {"N", 300},
              {"K", 1},
              {"eta", {50.0}},
              {"eta_bar", {1, 4, 16, 64, 128}},
              {"eta_bar_norm", 5.0},
              {"epochs", 10000},
              {"seeds", 8}}}};
  if (name == "fig4a")
    return {{"kind", "train2l"},
            {"seed", 2},
            {"params",
             {{"data", "spherical"},
              {"R", 1.0},
              {"D", 8},
              {"M", 15},
              {"P", 20},
              {"d", 200},
              {"N", 300},
              {"K", 5},
              {"eta", {10.0}},
              {"alpha", {1.0}},
              {"epochs", 10000},
              {"seeds", 8}}}};
  if (name == "fig4b")
    return {{"kind", "train2l"},
            {"seed", 3},
            {"params",
             {{"data", "spherical"},
              {"R", 1.0},
              {"D", 8},
              {"M", 15},
              {"P", 20},
              {"d", 200},
              {"N", 300},
              {"K", 27},
              {"eta", {1, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120, 130, 140, 150}},
              {"alpha", {1.0}},
              {"epochs", 10000},
              {"glue_endpoints_only", true},
              {"seeds", 8}}}};
  if (name == "fig4b-flattening")
    return {{"kind", "train2l"},
            {"seed", 4},
            {"params",
             {{"data", "spherical"},
              {"R", 0.5},
              {"D", 8},
              {"M", 15},
              {"P", 20},
              {"d", 200},
              {"N", 300},
              {"K", 3},
              {"eta", {80, 90, 100, 110, 120, 130, 140, 150, 160, 170}},
              {"alpha", {1.0}},
              {"epochs", 10000},
              {"glue_endpoints_only", true},
              {"seeds", 8}}}};
  if (name == "cover") return {{"kind", "cover-check"}, {"seed", 5}, {"params", Json::object()}};
  if (name == "glue-validation")
    return {{"kind", "synth-sweep"},
            {"seed", 6},
            {"params",
             {{"generator", "spherical"},
              {"P", 2},
              {"M", 200},
              {"d", 1000},
              {"R", 1.0},
              {"D", 2},
              {"sweep", "D"},
              {"values", {2, 4, 6, 8, 10}},
              {"seeds", 3}}}};
  if (name == "numerical-check")
    return {{"kind", "one-step"},
            {"seed", 7},
            {"params", {{"d", 400}, {"psi1", 1.0}, {"psi2", 2.0}, {"reps", 20}, {"link_param", 4.0}}}};
  throw ConfigError("unknown preset '" + name + "'");
}

Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Json validate_config(const Json& config) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : config.items())
    if (std::find(kTopLevel.begin(), kTopLevel.end(), key) == kTopLevel.end())
      throw ConfigError("unknown config field '" + key + "'");
  if (!config.contains("kind") || !config["kind"].is_string()) throw ConfigError("config needs a string 'kind'");
  const std::string kind = config["kind"];
  Json out;
  out["kind"] = kind;
  out["seed"] = 0;
  out["threads"] = 0;
  if (config.contains("seed")) {
    if (!config["seed"].is_number_integer() || config["seed"].get<std::int64_t>() < 0) throw ConfigError("seed must be a non-negative integer");
    out["seed"] = config["seed"];
  }
  if (config.contains("threads")) {
    if (!config["threads"].is_number_integer() || config["threads"].get<std::int64_t>() < 0) throw ConfigError("threads must be a non-negative integer");
    out["threads"] = config["threads"];
  }
  Json params = defaults_for(kind);
  if (config.contains("params")) {
    if (!config["params"].is_object()) throw ConfigError("params must be an object");
    for (const auto& [key, value] : config["params"].items()) {
      if (!params.contains(key)) throw ConfigError(kind + ": unknown parameter '" + key + "'");
      const Json& def = params[key];
      if (def.is_array() && value.is_number()) {
        params[key] = Json::array({value});
      } else if (!same_type(def, value)) {
        throw ConfigError(kind + ": parameter '" + key + "' has the wrong type");
      } else {
        params[key] = value;
      }
    }
  }
  out["params"] = params;
  return out;
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  if (std::find(kTopLevel.begin(), kTopLevel.end(), key.substr(0, key.find('.'))) == kTopLevel.end())
    key = "params." + key;
  Json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("bad override key " + key);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!(*node)[part].is_object()) (*node)[part] = Json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

unsigned resolve_threads(const Json& config) {
  if (const char* env = std::getenv("GLUEKIT_THREADS"); env && *env) {
    unsigned v = 0;
    const auto [ptr, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), v);
    if (ec != std::errc() || *ptr != '\0' || v == 0) throw ConfigError("GLUEKIT_THREADS must be a positive integer");
    return v;
  }
  if (config.contains("threads") && config["threads"].is_number_integer() && config["threads"].get<std::int64_t>() > 0)
    return config["threads"].get<unsigned>();
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string config_hash(const Json& config) {
  // FNV-1a over the canonical (sorted-key) dump
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::size_t Table::index(const std::string& column) const {
  for (std::size_t j = 0; j < columns.size(); ++j)
    if (columns[j].name == column) return j;
  throw ConfigError("table " + name + " has no column " + column);
}

const Table& ReportBundle::table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return t;
  throw ConfigError("report has no table " + name);
}

std::string version_string() { return GLUEKIT_VERSION; }

ReportBundle run_experiment(const Json& raw) {
  const Json config = validate_config(raw);
  ReportBundle out;
  out.kind = config["kind"];
  out.config = config;
  out.config_hash = config_hash(config);
  out.seed = config["seed"];
  const unsigned threads = resolve_threads(config);
  const Json& p = config["params"];
  try {
    if (out.kind == "glue") run_glue(p, out.seed, threads, out);
    else if (out.kind == "simcap") run_simcap(p, out.seed, threads, out);
    else if (out.kind == "synth-sweep") run_synth_sweep(p, out.seed, threads, out);
    else if (out.kind == "theory-curve") run_theory_curve(p, out);
    else if (out.kind == "cover-check") run_cover_check(p, out.seed, threads, out);
    else if (out.kind == "train2l") run_train2l(p, out.seed, threads, out);
    else if (out.kind == "one-step") run_one_step(p, out.seed, threads, out);
  } catch (const Error& e) {
    throw Error(e.code(), out.kind + ": " + e.what());
  } catch (const Json::exception& e) {
    throw ConfigError(out.kind + ": " + e.what());
  }
  return out;
}

std::string summary_text(const ReportBundle& b) {
  std::string s;
  if (!b.kind.empty()) {
    s += "experiment: " + b.kind + "\n";
    s += "seed: " + std::to_string(b.seed) + "\n";
    s += "config hash: " + b.config_hash + "\n";
    s += "version: " + version_string() + "\n";
  }
  if (!b.summary.empty()) s += "\n";
  for (const auto& line : b.summary) s += line + "\n";
  if (!b.warnings.empty()) s += "\nwarnings:\n";
  for (const auto& w : b.warnings) s += "  " + w + "\n";
  return s;
}

std::vector<std::string> emit_reports(const ReportBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& text) {
    const fs::path path = fs::path(dir) / name;
    write_text(path, text);
    written.push_back(path.string());
  };

  put("summary.txt", summary_text(b));
  if (b.kind.empty() && b.tables.empty()) return written;

  Json meta;
  meta["kind"] = b.kind;
  meta["seed"] = b.seed;
  meta["config"] = b.config;
  meta["config_hash"] = b.config_hash;
  meta["version"] = version_string();
  meta["tables"] = Json::array();
  for (const auto& t : b.tables) {
    Json cols = Json::array();
    for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"description", c.description}});
    meta["tables"].push_back({{"name", t.name}, {"file", t.name + ".csv"}, {"rows", t.rows.size()}, {"columns", cols}});
    put(t.name + ".csv", table_csv(t));
  }
  meta["plots"] = Json::array();
  for (const auto& pl : b.plots) {
    const Table& t = b.table(pl.table);
    const std::size_t xi = t.index(pl.x), yi = t.index(pl.y);
    const bool has_series = !pl.series.empty(), has_err = !pl.err.empty();
    const std::size_t si = has_series ? t.index(pl.series) : 0, ei = has_err ? t.index(pl.err) : 0;
    std::string s = "series,x,y,err\n";
    for (const auto& row : t.rows) {
      s += (has_series ? format_number(row[si]) : std::string("0")) + "," + format_number(row[xi]) + "," +
           format_number(row[yi]) + "," + (has_err ? format_number(row[ei]) : std::string("0")) + "\n";
    }
    put("plot_" + pl.figure + ".csv", s);
    meta["plots"].push_back({{"figure", pl.figure},
                             {"file", "plot_" + pl.figure + ".csv"},
                             {"table", pl.table},
                             {"series", pl.series},
                             {"x", pl.x},
                             {"y", pl.y},
                             {"err", pl.err}});
  }
  meta["warnings"] = b.warnings;
  put("report.json", meta.dump(2) + "\n");
  return written;
}

}  // namespace gluekit
