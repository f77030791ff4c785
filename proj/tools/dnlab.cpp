// dnlab: command-line driver for the doubly nonlinear diffusion laboratory.

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <iostream>

#include "dnl/dnl.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  int threads = 0;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Options& o, bool needs_config) {
  auto* c = cmd->add_option("--config", o.config, "JSON run configuration");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  else c->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "run directory (default: the config's output key)");
  cmd->add_option("--threads", o.threads, "OpenMP threads, 0 for the runtime default")->check(CLI::NonNegativeNumber);
  cmd->add_option("--override", o.overrides, "dot-path key=value, repeatable")->take_all();
}

dnl::RunConfig resolve(const Options& o, const std::string& experiment) {
  dnl::json doc = o.config.empty() ? dnl::json::object() : dnl::read_json(o.config);
  doc["experiment"] = experiment;
  for (const auto& kv : o.overrides) dnl::apply_override(doc, kv);
  auto cfg = dnl::parse_config(doc);
  dnl::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dnlab: numerical laboratory for doubly nonlinear nonlocal diffusion"};
  app.require_subcommand(1);

  Options o;
  auto* exps = app.add_subcommand("exponents", "derive and print the exponent set");
  auto* march = app.add_subcommand("march", "run the implicit time stepper");
  auto* extract = app.add_subcommand("extract", "extract the self-similar profile");
  auto* barrier = app.add_subcommand("barrier", "build the global barrier and check domination");
  auto* verify = app.add_subcommand("verify", "run the property suite; exit code counts failures");
  auto* report = app.add_subcommand("report", "print the table of a finished run");
  add_common(exps, o, false);
  for (auto* c : {march, extract, barrier, verify}) add_common(c, o, true);
  std::string report_dir;
  report->add_option("dir", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);
#ifdef _OPENMP
  if (o.threads > 0) omp_set_num_threads(o.threads);
#endif

  try {
    if (*report) return dnl::emit_report(report_dir) > 0 ? 1 : 0;

    const std::pair<CLI::App*, const char*> kinds[] = {
        {exps, "exponents"}, {march, "march"}, {extract, "extract"}, {barrier, "barrier"}, {verify, "verify-suite"}};
    for (const auto& [cmd, name] : kinds) {
      if (!*cmd) continue;
      auto cfg = resolve(o, name);
      if (cmd == exps && o.out.empty()) {
        std::cout << dnl::to_json(dnl::derive_exponents(cfg.params)).dump(2) << '\n';
        return 0;
      }
      auto res = dnl::run_experiment(cfg, o.out);
      if (cmd == exps) return 0;
      dnl::emit_report(res.dir);
      return cmd == verify ? res.failed() : 0;
    }
  } catch (const dnl::Error& e) {
    std::cerr << "dnlab: " << e.kind() << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
