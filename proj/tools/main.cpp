#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "prevalence/cli.hpp"

namespace fs = std::filesystem;
using namespace prevalence;

namespace {

struct Options {
  std::string units, edges, config, out, q_out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<double> alphas;
};

RunConfig load_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? parse_config(nlohmann::json::object()) : read_config(o.config);
  apply_overrides(cfg, o.seed, o.threads, o.alphas);
  return cfg;
}

Dataset load_data(const Options& o) {
  if (o.units.empty() || o.edges.empty()) throw InputError("--units and --edges are required");
  return read_dataset(o.units, o.edges);
}

template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  write(out);
}

void emit_json(const std::string& path, const nlohmann::ordered_json& j) {
  emit(path, [&](std::ostream& os) { os << j.dump(2) << "\n"; });
}

int cmd_estimate(const Options& o) {
  const RunConfig cfg = load_config(o);
  emit_json(o.out, estimate_report(load_data(o), cfg));
  return 0;
}

int cmd_propensity(const Options& o) {
  const RunConfig cfg = load_config(o);
  const Dataset data = load_data(o);
  const Problem p = build_problem(data, cfg);
  const PropensityTable table = build_propensity_table(p.design, p.graph, p.spec, cfg.analysis.engine);
  emit(o.out, [&](std::ostream& os) { write_propensity_csv(data, table, os); });
  if (!o.q_out.empty()) {
    const UDefinition u{cfg.analysis.variant, &table};
    const QMatrix q = build_Q(p.design, p.graph, p.spec, u, data.treatment, cfg.analysis.engine);
    emit(o.q_out, [&](std::ostream& os) { write_q_csv(data, q, os); });
  }
  return 0;
}

int cmd_simulate(const Options& o) {
  const RunConfig cfg = load_config(o);
  const nlohmann::ordered_json report = simulate_report(cfg);
  emit_json(o.out, report);
  if (!o.out.empty()) {
    const std::string csv = fs::path(o.out).replace_extension(".csv").string();
    emit(csv, [&](std::ostream& os) { write_simulation_csv(report, os); });
  }
  return 0;
}

int cmd_validate(const Options& o) {
  const RunConfig cfg = load_config(o);
  const auto checks = run_validation(cfg.validation);
  const nlohmann::ordered_json report = validation_report(cfg, checks);
  emit_json(o.out, report);
  for (const auto& f : report.at("failures"))
    std::cerr << "FAIL " << f.at("check").get<std::string>() << " (instance seed " << f.at("instance_seed").dump()
              << "): " << f.at("detail").get<std::string>() << "\n";
  return report.at("passed").get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lower confidence bounds on the prevalence of indirect effects"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool data) {
    if (data) {
      sub->add_option("--units", o.units, "units CSV (id, treatment, outcome[, stratum][, cluster])");
      sub->add_option("--edges", o.edges, "edges CSV (src, dst)");
    }
    sub->add_option("--config", o.config, "JSON configuration");
    sub->add_option("--out", o.out, "output path (stdout when omitted)");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--alpha", o.alphas, "significance level, repeatable")->allow_extra_args(false);
  };
  auto* est = app.add_subcommand("estimate", "point estimate and lower bounds");
  common(est, true);
  auto* sim = app.add_subcommand("simulate", "Monte Carlo experiments");
  common(sim, false);
  auto* val = app.add_subcommand("validate", "oracle cross-checks on small instances");
  common(val, false);
  auto* prop = app.add_subcommand("propensity", "dump the propensity table");
  common(prop, true);
  prop->add_option("--q-out", o.q_out, "also write Q at the observed assignment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*est) return cmd_estimate(o);
    if (*prop) return cmd_propensity(o);
    if (*sim) return cmd_simulate(o);
    return cmd_validate(o);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 2;
}
