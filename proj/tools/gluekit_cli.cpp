#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gluekit/gluekit.h"

namespace {

struct Options {
  std::string config_path;
  std::string preset;
  std::vector<std::string> overrides;
  std::string out_dir;
  int threads = -1;
  long long seed = -1;
  std::string activations;
  std::string labels;
  bool dry_run = false;
  bool quiet = false;
};

int report_failure(gk_status status) {
  std::fprintf(stderr, "gluekit: %s\n", gk_last_error());
  return static_cast<int>(status);
}

// Builds the config from preset/file/kind defaults, then applies flags and overrides in order.
gk_status make_config(const std::string& kind, const Options& o, gk_config** cfg) {
  gk_status s;
  if (!o.config_path.empty()) s = gk_config_from_file(o.config_path.c_str(), cfg);
  else if (!o.preset.empty()) s = gk_config_from_preset(o.preset.c_str(), cfg);
  else s = gk_config_new(kind.c_str(), cfg);
  if (s != GK_OK) return s;

  std::vector<std::string> sets;
  if (!kind.empty()) sets.push_back("kind=\"" + kind + "\"");
  if (o.seed >= 0) sets.push_back("seed=" + std::to_string(o.seed));
  if (o.threads >= 0) sets.push_back("threads=" + std::to_string(o.threads));
  if (!o.activations.empty()) sets.push_back("activations=" + o.activations);
  if (!o.labels.empty()) sets.push_back("labels=" + o.labels);
  sets.insert(sets.end(), o.overrides.begin(), o.overrides.end());
  for (const auto& a : sets)
    if ((s = gk_config_set(*cfg, a.c_str())) != GK_OK) return s;
  return GK_OK;
}

int execute(const std::string& kind, const Options& o) {
  gk_config* cfg = nullptr;
  gk_status s = make_config(kind, o, &cfg);
  if (s != GK_OK) {
    gk_config_free(cfg);
    return report_failure(s);
  }
  if (o.dry_run) {
    char* text = nullptr;
    s = gk_config_resolved(cfg, &text);
    gk_config_free(cfg);
    if (s != GK_OK) return report_failure(s);
    std::cout << text << "\n";
    gk_string_free(text);
    return 0;
  }
  gk_report* report = nullptr;
  s = gk_run(cfg, &report);
  gk_config_free(cfg);
  if (s != GK_OK) return report_failure(s);

  const std::string dir = o.out_dir.empty() ? "gluekit-results" : o.out_dir;
  s = gk_report_emit(report, dir.c_str());
  if (s == GK_OK && !o.quiet) {
    char* text = nullptr;
    s = gk_report_summary(report, &text);
    if (s == GK_OK) {
      std::cout << text << "\nreports written to " << dir << "\n";
      gk_string_free(text);
    }
  }
  gk_report_free(report);
  return s == GK_OK ? 0 : report_failure(s);
}

void add_common(CLI::App* cmd, Options& o, bool with_inputs) {
  if (cmd->get_name() != "run") {
    cmd->add_option("-c,--config", o.config_path, "JSON experiment config");
    cmd->add_option("-p,--preset", o.preset, "shipped config to start from");
  }
  cmd->add_option("-s,--set", o.overrides, "override, key=value (repeatable)");
  cmd->add_option("-o,--out", o.out_dir, "report directory (default gluekit-results)");
  cmd->add_option("-j,--threads", o.threads, "worker threads (0 = all cores)");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_flag("--dry-run", o.dry_run, "print the resolved config and exit");
  cmd->add_flag("-q,--quiet", o.quiet, "do not print the summary");
  if (with_inputs) {
    cmd->add_option("-a,--activations", o.activations, "activation matrix (.csv or .npy)");
    cmd->add_option("-l,--labels", o.labels, "labels file, one integer per line");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manifold capacity and geometry analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gk_version()));

  Options opts;
  std::string chosen;

  auto* run = app.add_subcommand("run", "run an experiment described by a config file");
  run->add_option("config", opts.config_path, "JSON experiment config")->required();
  add_common(run, opts, true);
  run->callback([&] { chosen = "run"; });

  for (std::size_t i = 0; i < gk_kind_count(); ++i) {
    const std::string kind = gk_kind_name(i);
    auto* cmd = app.add_subcommand(kind, "run a " + kind + " experiment");
    add_common(cmd, opts, kind == "glue" || kind == "simcap");
    cmd->callback([&chosen, kind] { chosen = kind; });
  }

  auto* presets = app.add_subcommand("presets", "list shipped configs");
  presets->callback([&] { chosen = "presets"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(GK_ERR_CONFIG);
  }

  if (chosen == "presets") {
    for (std::size_t i = 0; i < gk_preset_count(); ++i) std::cout << gk_preset_name(i) << "\n";
    return 0;
  }
  return execute(chosen == "run" ? std::string() : chosen, opts);
}
