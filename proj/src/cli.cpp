#include "prevalence/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace prevalence {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<int, std::vector<std::string>>> rows;  // (line number, fields)
};

CsvTable read_csv(std::istream& in, const std::string& name, bool allow_empty) {
  CsvTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_csv(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw InputError(name + " line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                       " fields, got " + std::to_string(fields.size()));
    t.rows.emplace_back(line_no, std::move(fields));
  }
  if (t.header.empty() && !allow_empty) throw InputError(name + ": file is empty");
  return t;
}

int column(const CsvTable& t, const std::string& name, const std::string& file, bool required) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) {
    if (required) throw InputError(file + ": missing column '" + name + "'");
    return -1;
  }
  return static_cast<int>(it - t.header.begin());
}

std::uint8_t parse_binary(const std::string& v, const std::string& file, int line, const std::string& col) {
  if (v == "0") return 0;
  if (v == "1") return 1;
  throw InputError(file + " line " + std::to_string(line) + ": " + col + " must be 0 or 1, got '" + v + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw InputError("config: unknown key '" + key + "' in " + where);
}

Variant parse_variant(const std::string& s) {
  if (s == "ipw") return Variant::ipw;
  if (s == "alt") return Variant::alt;
  throw InputError("config: statistic must be 'ipw' or 'alt', got '" + s + "'");
}

void parse_engine(const json& j, EngineConfig& e) {
  reject_unknown(j, {"exact_cap", "mc_replications"}, "engine");
  e.exact_cap = get_or(j, "exact_cap", e.exact_cap);
  e.mc_replications = get_or(j, "mc_replications", e.mc_replications);
  if (e.exact_cap < 0) throw InputError("config: engine.exact_cap must be nonnegative");
  if (e.mc_replications < 1) throw InputError("config: engine.mc_replications must be positive");
}

void parse_solver(const json& j, SolverConfig& s) {
  reject_unknown(j,
                 {"psd_tol", "constraint_tol", "objective_tol", "max_iterations", "barrier_initial_weight",
                  "barrier_decrease", "refine_majorizer", "refine_max_iterations"},
                 "solver");
  s.psd_tol = get_or(j, "psd_tol", s.psd_tol);
  s.constraint_tol = get_or(j, "constraint_tol", s.constraint_tol);
  s.objective_tol = get_or(j, "objective_tol", s.objective_tol);
  s.max_iterations = get_or(j, "max_iterations", s.max_iterations);
  s.barrier_initial_weight = get_or(j, "barrier_initial_weight", s.barrier_initial_weight);
  s.barrier_decrease = get_or(j, "barrier_decrease", s.barrier_decrease);
  s.refine_majorizer = get_or(j, "refine_majorizer", s.refine_majorizer);
  s.refine_max_iterations = get_or(j, "refine_max_iterations", s.refine_max_iterations);
  if (!(s.psd_tol > 0 && s.constraint_tol > 0 && s.objective_tol > 0))
    throw InputError("config: solver tolerances must be positive");
  if (!(s.barrier_decrease > 0 && s.barrier_decrease < 1))
    throw InputError("config: solver.barrier_decrease must lie in (0, 1)");
  if (!(s.barrier_initial_weight > 0)) throw InputError("config: solver.barrier_initial_weight must be positive");
  if (s.max_iterations < 1) throw InputError("config: solver.max_iterations must be positive");
}

void parse_model(const json& j, ModelConfig& m) {
  reject_unknown(j,
                 {"baseline", "direct", "spillover", "spillover_share", "exposure", "threshold"}, "simulation.model");
  auto range = [&](const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2 || v[0] > v[1]) throw InputError(std::string("config: model.") + key + " must be [lo, hi]");
    lo = v[0];
    hi = v[1];
  };
  range("baseline", m.baseline_lo, m.baseline_hi);
  range("direct", m.direct_lo, m.direct_hi);
  range("spillover", m.spillover_lo, m.spillover_hi);
  m.spillover_share = get_or(j, "spillover_share", m.spillover_share);
  m.exposure = get_or(j, "exposure", m.exposure);
  m.threshold = get_or(j, "threshold", m.threshold);
}

void parse_simulation(const json& j, SimConfig& s) {
  reject_unknown(j,
                 {"experiment", "graph", "d_max", "mean_degree", "cluster_size", "cluster_radius", "treated_fraction",
                  "misspecify_fraction", "model", "n_grid", "replications", "seeds", "variance_multiplier",
                  "enumeration_cap"},
                 "simulation");
  s.experiment = get_or(j, "experiment", s.experiment);
  s.graph = get_or(j, "graph", s.graph);
  s.d_max = get_or(j, "d_max", s.d_max);
  s.mean_degree = get_or(j, "mean_degree", s.mean_degree);
  s.cluster_size = get_or(j, "cluster_size", s.cluster_size);
  s.cluster_radius = get_or(j, "cluster_radius", s.cluster_radius);
  s.treated_fraction = get_or(j, "treated_fraction", s.treated_fraction);
  s.misspecify_fraction = get_or(j, "misspecify_fraction", s.misspecify_fraction);
  if (j.contains("model")) parse_model(j.at("model"), s.model);
  s.n_grid = get_or(j, "n_grid", s.n_grid);
  s.replications = get_or(j, "replications", s.replications);
  s.seeds = get_or(j, "seeds", s.seeds);
  s.variance_multiplier = get_or(j, "variance_multiplier", s.variance_multiplier);
  s.enumeration_cap = get_or(j, "enumeration_cap", s.enumeration_cap);
}

void parse_validation(const json& j, ValidationConfig& v) {
  reject_unknown(j, {"instances", "mc_replications", "perturb_propensity"}, "validation");
  v.instances = get_or(j, "instances", v.instances);
  v.mc_replications = get_or(j, "mc_replications", v.mc_replications);
  v.perturb_propensity = get_or(j, "perturb_propensity", v.perturb_propensity);
  if (v.instances < 1 || v.mc_replications < 1) throw InputError("config: validation counts must be positive");
}

ordered_json model_json(const ModelConfig& m) {
  ordered_json j;
  j["baseline"] = {m.baseline_lo, m.baseline_hi};
  j["direct"] = {m.direct_lo, m.direct_hi};
  j["spillover"] = {m.spillover_lo, m.spillover_hi};
  j["spillover_share"] = m.spillover_share;
  j["exposure"] = m.exposure;
  j["threshold"] = m.threshold;
  return j;
}

template <typename T>
int first_appearance(std::vector<std::string>& names, std::map<std::string, int>& index, const T& name) {
  const auto [it, inserted] = index.emplace(name, static_cast<int>(names.size()));
  if (inserted) names.push_back(name);
  return it->second;
}

std::vector<int> treated_counts(const DesignConfig& cfg, const std::vector<std::string>& names,
                                const std::vector<int>& observed) {
  if (cfg.treated_per_stratum.empty()) return observed;
  std::vector<int> out(names.size(), -1);
  for (const auto& [name, count] : cfg.treated_per_stratum) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InputError("config: design.treated names unknown stratum '" + name + "'");
    out[static_cast<std::size_t>(it - names.begin())] = count;
  }
  for (std::size_t s = 0; s < out.size(); ++s)
    if (out[s] < 0) throw InputError("config: design.treated has no entry for stratum '" + names[s] + "'");
  return out;
}

void check_observed(const std::vector<int>& expected, const std::vector<int>& observed,
                    const std::vector<std::string>& names, const std::string& what) {
  for (std::size_t s = 0; s < expected.size(); ++s)
    if (expected[s] != observed[s])
      throw InputError("data: stratum '" + names[s] + "' has " + std::to_string(observed[s]) + " treated " + what +
                       " but the design specifies " + std::to_string(expected[s]));
}

ordered_json nullable(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

}  // namespace

int Dataset::index_of(const std::string& id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  return it == ids.end() ? -1 : static_cast<int>(it - ids.begin());
}

Dataset parse_dataset(std::istream& units, std::istream& edges, const std::string& units_name,
                      const std::string& edges_name) {
  const CsvTable u = read_csv(units, units_name, false);
  for (const auto& h : u.header)
    if (h != "id" && h != "treatment" && h != "outcome" && h != "stratum" && h != "cluster")
      throw InputError(units_name + ": unknown column '" + h + "'");
  const int c_id = column(u, "id", units_name, true);
  const int c_x = column(u, "treatment", units_name, true);
  const int c_y = column(u, "outcome", units_name, true);
  const int c_s = column(u, "stratum", units_name, false);
  const int c_c = column(u, "cluster", units_name, false);

  Dataset d;
  d.has_stratum = c_s >= 0;
  d.has_cluster = c_c >= 0;
  std::map<std::string, int> index;
  for (const auto& [line, f] : u.rows) {
    const std::string& id = f[static_cast<std::size_t>(c_id)];
    if (id.empty()) throw InputError(units_name + " line " + std::to_string(line) + ": empty id");
    if (!index.emplace(id, d.size()).second)
      throw InputError(units_name + " line " + std::to_string(line) + ": duplicate id '" + id + "'");
    d.ids.push_back(id);
    d.treatment.push_back(parse_binary(f[static_cast<std::size_t>(c_x)], units_name, line, "treatment"));
    d.outcome.push_back(parse_binary(f[static_cast<std::size_t>(c_y)], units_name, line, "outcome"));
    if (d.has_stratum) d.stratum.push_back(f[static_cast<std::size_t>(c_s)]);
    if (d.has_cluster) d.cluster.push_back(f[static_cast<std::size_t>(c_c)]);
  }
  if (d.ids.empty()) throw InputError(units_name + ": no units");

  const CsvTable e = read_csv(edges, edges_name, true);
  if (!e.header.empty()) {
    for (const auto& h : e.header)
      if (h != "src" && h != "dst") throw InputError(edges_name + ": unknown column '" + h + "'");
    const int c_src = column(e, "src", edges_name, true);
    const int c_dst = column(e, "dst", edges_name, true);
    for (const auto& [line, f] : e.rows) {
      const std::string& a = f[static_cast<std::size_t>(c_src)];
      const std::string& b = f[static_cast<std::size_t>(c_dst)];
      const auto ia = index.find(a);
      const auto ib = index.find(b);
      if (ia == index.end()) throw InputError(edges_name + " line " + std::to_string(line) + ": unknown id '" + a + "'");
      if (ib == index.end()) throw InputError(edges_name + " line " + std::to_string(line) + ": unknown id '" + b + "'");
      if (ia->second == ib->second)
        throw InputError(edges_name + " line " + std::to_string(line) + ": self-edge on '" + a + "'");
      d.edge_ids.emplace_back(a, b);
      d.edges.emplace_back(ia->second, ib->second);
    }
  }
  return d;
}

Dataset read_dataset(const std::string& units_path, const std::string& edges_path) {
  std::ifstream units(units_path);
  if (!units) throw InputError("cannot open units file '" + units_path + "'");
  std::ifstream edges(edges_path);
  if (!edges) throw InputError("cannot open edges file '" + edges_path + "'");
  return parse_dataset(units, edges, units_path, edges_path);
}

void write_dataset(const Dataset& data, std::ostream& units, std::ostream& edges) {
  units << "id,treatment,outcome";
  if (data.has_stratum) units << ",stratum";
  if (data.has_cluster) units << ",cluster";
  units << "\n";
  for (int i = 0; i < data.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    units << data.ids[k] << ',' << int(data.treatment[k]) << ',' << int(data.outcome[k]);
    if (data.has_stratum) units << ',' << data.stratum[k];
    if (data.has_cluster) units << ',' << data.cluster[k];
    units << "\n";
  }
  edges << "src,dst\n";
  for (const auto& [a, b] : data.edge_ids) edges << a << ',' << b << "\n";
}

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  try {
    reject_unknown(j,
                   {"design", "exposure", "statistic", "positivity_floor", "rho", "alphas", "seed", "engine", "solver",
                    "simulation", "validation"},
                   "the top level");
    if (j.contains("design")) {
      const json& d = j.at("design");
      reject_unknown(d, {"kind", "treated"}, "design");
      cfg.design.kind = get_or(d, "kind", cfg.design.kind);
      if (cfg.design.kind != "complete" && cfg.design.kind != "stratified" && cfg.design.kind != "cluster")
        throw InputError("config: design.kind must be complete, stratified or cluster");
      if (d.contains("treated")) {
        const json& t = d.at("treated");
        if (t.is_number_integer()) {
          if (cfg.design.kind != "complete") throw InputError("config: design.treated must map strata to counts");
          cfg.design.treated = t.get<int>();
        } else if (t.is_object()) {
          for (const auto& [name, count] : t.items()) cfg.design.treated_per_stratum.emplace_back(name, count.get<int>());
        } else {
          throw InputError("config: design.treated must be an integer or an object");
        }
      }
    }
    if (j.contains("exposure")) {
      const json& e = j.at("exposure");
      reject_unknown(e, {"mode", "threshold", "w_empty"}, "exposure");
      cfg.exposure.mode = get_or(e, "mode", cfg.exposure.mode);
      cfg.exposure.threshold = get_or(e, "threshold", cfg.exposure.threshold);
      cfg.exposure.w_empty = get_or(e, "w_empty", cfg.exposure.w_empty);
      if (cfg.exposure.mode != "count" && cfg.exposure.mode != "fraction")
        throw InputError("config: exposure.mode must be count or fraction");
      if (cfg.exposure.w_empty != 0 && cfg.exposure.w_empty != 1)
        throw InputError("config: exposure.w_empty must be 0 or 1");
    }
    if (j.contains("statistic")) cfg.analysis.variant = parse_variant(j.at("statistic").get<std::string>());
    cfg.analysis.engine.positivity_floor = get_or(j, "positivity_floor", cfg.analysis.engine.positivity_floor);
    if (!(cfg.analysis.engine.positivity_floor >= 0 && cfg.analysis.engine.positivity_floor < 0.5))
      throw InputError("config: positivity_floor must lie in [0, 0.5)");
    cfg.rho = get_or(j, "rho", cfg.rho);
    cfg.analysis.alphas = get_or(j, "alphas", cfg.analysis.alphas);
    for (double a : cfg.analysis.alphas)
      if (!(a > 0 && a < 0.5)) throw InputError("config: every alpha must lie in (0, 0.5)");
    cfg.seed = get_or(j, "seed", cfg.seed);
    if (j.contains("engine")) parse_engine(j.at("engine"), cfg.analysis.engine);
    if (j.contains("solver")) parse_solver(j.at("solver"), cfg.analysis.solver);
    if (j.contains("simulation")) parse_simulation(j.at("simulation"), cfg.simulation);
    if (j.contains("validation")) parse_validation(j.at("validation"), cfg.validation);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  cfg.simulation.analysis = cfg.analysis;
  cfg.simulation.alphas = cfg.analysis.alphas;
  try {
    validate_sim_config(cfg.simulation);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("config: simulation: ") + e.what());
  }
  apply_overrides(cfg, std::nullopt, std::nullopt, {});
  return cfg;
}

RunConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  return parse_config(j);
}

void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed, std::optional<unsigned> threads,
                     const std::vector<double>& alphas) {
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = std::max(1u, *threads);
  if (!alphas.empty()) {
    for (double a : alphas)
      if (!(a > 0 && a < 0.5)) throw InputError("--alpha must lie in (0, 0.5)");
    cfg.analysis.alphas = alphas;
  }
  cfg.analysis.engine.seed = cfg.seed;
  cfg.analysis.engine.threads = cfg.threads;
  cfg.simulation.analysis = cfg.analysis;
  cfg.simulation.alphas = cfg.analysis.alphas;
  cfg.simulation.seed = cfg.seed;
  cfg.simulation.threads = cfg.threads;
  cfg.validation.seed = cfg.seed;
  cfg.validation.threads = cfg.threads;
}

ordered_json config_to_json(const RunConfig& cfg) {
  ordered_json j;
  ordered_json design;
  design["kind"] = cfg.design.kind;
  if (cfg.design.treated) {
    design["treated"] = *cfg.design.treated;
  } else if (!cfg.design.treated_per_stratum.empty()) {
    ordered_json t = ordered_json::object();
    for (const auto& [name, count] : cfg.design.treated_per_stratum) t[name] = count;
    design["treated"] = t;
  } else {
    design["treated"] = "inferred from data";
  }
  j["design"] = design;
  j["exposure"] = {{"mode", cfg.exposure.mode}, {"threshold", cfg.exposure.threshold}, {"w_empty", cfg.exposure.w_empty}};
  j["statistic"] = to_string(cfg.analysis.variant);
  j["positivity_floor"] = cfg.analysis.engine.positivity_floor;
  j["rho"] = cfg.rho;
  j["alphas"] = cfg.analysis.alphas;
  j["seed"] = cfg.seed;
  j["engine"] = {{"exact_cap", cfg.analysis.engine.exact_cap}, {"mc_replications", cfg.analysis.engine.mc_replications}};
  const SolverConfig& s = cfg.analysis.solver;
  j["solver"] = {{"psd_tol", s.psd_tol},
                 {"constraint_tol", s.constraint_tol},
                 {"objective_tol", s.objective_tol},
                 {"max_iterations", s.max_iterations},
                 {"barrier_initial_weight", s.barrier_initial_weight},
                 {"barrier_decrease", s.barrier_decrease},
                 {"refine_majorizer", s.refine_majorizer},
                 {"refine_max_iterations", s.refine_max_iterations}};
  const SimConfig& m = cfg.simulation;
  ordered_json sim;
  sim["experiment"] = m.experiment;
  sim["graph"] = m.graph;
  sim["d_max"] = m.d_max;
  sim["mean_degree"] = m.mean_degree;
  sim["cluster_size"] = m.cluster_size;
  sim["cluster_radius"] = m.cluster_radius;
  sim["treated_fraction"] = m.treated_fraction;
  sim["misspecify_fraction"] = m.misspecify_fraction;
  sim["model"] = model_json(m.model);
  sim["n_grid"] = m.n_grid;
  sim["replications"] = m.replications;
  sim["seeds"] = m.seeds;
  sim["variance_multiplier"] = m.variance_multiplier;
  sim["enumeration_cap"] = m.enumeration_cap;
  j["simulation"] = sim;
  j["validation"] = {{"instances", cfg.validation.instances},
                     {"mc_replications", cfg.validation.mc_replications},
                     {"perturb_propensity", cfg.validation.perturb_propensity}};
  return j;
}

Problem build_problem(const Dataset& data, const RunConfig& cfg) {
  const int n = data.size();
  const std::string& kind = cfg.design.kind;
  std::vector<std::string> names;
  std::map<std::string, int> index;
  std::optional<Design> design;
  try {
    if (kind == "complete") {
      names = {"all"};
      const int observed = static_cast<int>(std::count(data.treatment.begin(), data.treatment.end(), 1));
      const int t = cfg.design.treated.value_or(observed);
      check_observed({t}, {observed}, names, "units");
      design.emplace(Design::complete(n, t));
    } else if (kind == "stratified") {
      if (!data.has_stratum) throw InputError("stratified design needs a 'stratum' column");
      std::vector<int> stratum_of;
      for (const auto& s : data.stratum) stratum_of.push_back(first_appearance(names, index, s));
      std::vector<int> observed(names.size(), 0);
      for (int i = 0; i < n; ++i) observed[static_cast<std::size_t>(stratum_of[static_cast<std::size_t>(i)])] += data.treatment[static_cast<std::size_t>(i)];
      const std::vector<int> t = treated_counts(cfg.design, names, observed);
      check_observed(t, observed, names, "units");
      design.emplace(StratifiedRandomization{stratum_of, t});
    } else {
      if (!data.has_cluster) throw InputError("cluster design needs a 'cluster' column");
      std::vector<std::string> clusters;
      std::map<std::string, int> cluster_index;
      std::vector<int> cluster_of;
      for (const auto& c : data.cluster) cluster_of.push_back(first_appearance(clusters, cluster_index, c));
      std::vector<int> stratum_of_cluster(clusters.size(), -1);
      std::vector<int> cluster_treatment(clusters.size(), -1);
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const auto c = static_cast<std::size_t>(cluster_of[k]);
        const int s = data.has_stratum ? first_appearance(names, index, data.stratum[k]) : first_appearance(names, index, std::string("all"));
        if (stratum_of_cluster[c] >= 0 && stratum_of_cluster[c] != s)
          throw InputError("data: cluster '" + clusters[c] + "' spans several strata");
        stratum_of_cluster[c] = s;
        if (cluster_treatment[c] >= 0 && cluster_treatment[c] != data.treatment[k])
          throw InputError("data: cluster '" + clusters[c] + "' has inconsistent treatment (unit '" + data.ids[k] + "')");
        cluster_treatment[c] = data.treatment[k];
      }
      std::vector<int> observed(names.size(), 0);
      for (std::size_t c = 0; c < clusters.size(); ++c)
        observed[static_cast<std::size_t>(stratum_of_cluster[c])] += cluster_treatment[c];
      const std::vector<int> t = treated_counts(cfg.design, names, observed);
      check_observed(t, observed, names, "clusters");
      design.emplace(ClusterRandomization{cluster_of, stratum_of_cluster, t});
    }
  } catch (const InputError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("design: ") + e.what());
  }

  AdjacencyGraph graph = build_graph(data.edges, n);
  ExposureSpec spec = cfg.exposure.mode == "count"
                          ? ExposureSpec::count(n, static_cast<int>(std::lround(cfg.exposure.threshold)))
                          : ExposureSpec::fraction(n, cfg.exposure.threshold);
  spec.w_empty = static_cast<std::uint8_t>(cfg.exposure.w_empty);
  try {
    validate_exposure(graph, spec);
    if (design->clustered()) validate_cluster_graph(graph, *design);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return Problem{std::move(*design), std::move(graph), std::move(spec), std::move(names)};
}

ordered_json estimate_report(const Dataset& data, const RunConfig& cfg) {
  const Problem p = build_problem(data, cfg);
  const PropensityTable table = build_propensity_table(p.design, p.graph, p.spec, cfg.analysis.engine);
  if (table.excluded_count() == table.size())
    throw InputError("no informative units: every unit is excluded by the exposure or positivity rules");
  const Analysis a = analyze(p.design, p.graph, p.spec, table, data.treatment, data.outcome, cfg.analysis);
  const int n = data.size();

  ordered_json r;
  r["schema_version"] = kReportSchemaVersion;
  r["command"] = "estimate";
  r["config"] = config_to_json(cfg);

  ordered_json d;
  d["n_units"] = n;
  d["n_edges"] = p.graph.edge_count();
  d["n_treated"] = std::count(data.treatment.begin(), data.treatment.end(), 1);
  d["n_outcome_one"] = std::count(data.outcome.begin(), data.outcome.end(), 1);
  d["max_degree"] = p.graph.max_degree();
  d["design_kind"] = p.design.kind();
  d["n_blocks"] = p.design.n_blocks();
  d["n_strata"] = p.design.n_strata();
  d["support_size"] = support_size(p.design).str();
  ordered_json rho = ordered_json::array();
  for (int s : p.design.rho_violations(cfg.rho)) rho.push_back(p.stratum_names[static_cast<std::size_t>(s)]);
  d["rho_violations"] = rho;
  r["data"] = d;

  r["point_estimate"] = {{"units", a.point.units}, {"fraction", a.point.fraction}};

  ordered_json intervals = ordered_json::array();
  for (const IntervalResult& iv : a.intervals) {
    ordered_json j;
    j["alpha"] = iv.alpha;
    j["confidence_level"] = iv.confidence_level;
    j["z_quantile"] = iv.z_quantile;
    j["lower_bound_units"] = iv.lower_bound_units;
    j["lower_bound_fraction"] = iv.lower_bound_fraction;
    j["upper_bound_units"] = n;
    j["active_program"] = iv.active_program;
    j["relaxation_value"] = iv.relaxation_value;
    j["backup_value"] = iv.backup_value;
    j["solver"] = {{"status", iv.relaxation.status},
                   {"iterations", iv.relaxation.iterations},
                   {"primal_value", iv.relaxation.primal_value},
                   {"gap", iv.relaxation.gap},
                   {"constraint_residual", iv.relaxation.constraint_residual}};
    intervals.push_back(j);
  }
  r["intervals"] = intervals;

  const PsdCertificate& cert = a.majorizer.certificate;
  r["majorizer"] = {{"method", a.majorizer.method},
                    {"trace", a.majorizer.trace()},
                    {"gershgorin_trace", a.q.q.cwiseAbs().sum()},
                    {"lambda_max", cert.lambda_max},
                    {"power_iterations", cert.power_iterations},
                    {"cholesky_verified", cert.cholesky_verified},
                    {"psd_tol", cert.tolerance}};

  double p_min = 1.0, p_max = 0.0, max_se = 0.0;
  int exact = 0, mc = 0;
  for (const UnitPropensity& u : table.units) {
    if (u.method == Method::exact) ++exact;
    if (u.method == Method::monte_carlo) ++mc;
    max_se = std::max({max_se, u.std_error[0], u.std_error[1]});
    if (u.excluded) continue;
    p_min = std::min({p_min, u.p1[0], u.p1[1]});
    p_max = std::max({p_max, u.p1[0], u.p1[1]});
  }
  r["propensity"] = {{"min", p_min},
                     {"max", p_max},
                     {"excluded_units", table.excluded_count()},
                     {"exact_units", exact},
                     {"monte_carlo_units", mc},
                     {"max_std_error", max_se}};
  r["q_matrix"] = {{"exact_entries", a.q.exact_entries},
                   {"monte_carlo_entries", a.q.mc_entries},
                   {"zero_entries", a.q.zero_entries},
                   {"max_std_error", a.q.max_std_error}};

  ordered_json cells = ordered_json::array();
  for (int w = 1; w >= 0; --w)
    for (int x = 1; x >= 0; --x) {
      int units = 0, ones = 0;
      std::set<std::string> clusters;
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (a.w[k] != w || data.treatment[k] != x) continue;
        ++units;
        ones += data.outcome[k];
        if (data.has_cluster) clusters.insert(data.cluster[k]);
      }
      ordered_json c;
      c["w"] = w;
      c["x"] = x;
      c["n_units"] = units;
      c["n_clusters"] = data.has_cluster ? ordered_json(clusters.size()) : ordered_json(nullptr);
      c["mean_outcome"] = units ? ordered_json(static_cast<double>(ones) / units) : ordered_json(nullptr);
      cells.push_back(c);
    }
  r["exposure_cells"] = cells;
  return r;
}

void write_propensity_csv(const Dataset& data, const PropensityTable& table, std::ostream& out) {
  out << "unit_id,p_w1_x0,p_w1_x1,method,replications,std_error\n";
  out.precision(17);
  for (int i = 0; i < table.size(); ++i) {
    const UnitPropensity& u = table.units[static_cast<std::size_t>(i)];
    const std::string method = u.excluded ? "excluded" : to_string(u.method);
    out << data.ids[static_cast<std::size_t>(i)] << ',' << u.p1[0] << ',' << u.p1[1] << ',' << method << ',';
    if (u.method == Method::monte_carlo) out << u.replications << ',' << std::max(u.std_error[0], u.std_error[1]);
    else out << ',';
    out << "\n";
  }
}

void write_q_csv(const Dataset& data, const QMatrix& q, std::ostream& out) {
  out.precision(17);
  out << "unit_id";
  for (const auto& id : data.ids) out << ',' << id;
  out << "\n";
  for (int i = 0; i < q.size(); ++i) {
    out << data.ids[static_cast<std::size_t>(i)];
    for (int j = 0; j < q.size(); ++j) out << ',' << q.q(i, j);
    out << "\n";
  }
}

ordered_json simulate_report(const RunConfig& cfg) {
  const SimConfig& s = cfg.simulation;
  ordered_json r;
  r["schema_version"] = kReportSchemaVersion;
  r["command"] = "simulate";
  r["config"] = config_to_json(cfg);
  r["experiment"] = s.experiment;
  ordered_json cells = ordered_json::array();
  if (s.experiment == "coverage") {
    for (const CoverageCell& c : run_coverage(s).cells)
      cells.push_back({{"n", c.n},
                       {"alpha", c.alpha},
                       {"confidence_level", c.confidence_level},
                       {"replications", c.replications},
                       {"misses", c.misses},
                       {"coverage", c.coverage},
                       {"coverage_se", c.coverage_se},
                       {"mean_bound", c.mean_bound},
                       {"mean_bound_se", c.mean_bound_se},
                       {"mean_point_estimate", c.mean_point_estimate},
                       {"mean_psi", c.mean_psi},
                       {"backup_share", c.backup_share},
                       {"excluded_units", c.excluded_units},
                       {"monte_carlo_entries", c.mc_entries}});
  } else if (s.experiment == "normality") {
    for (const NormalityCell& c : run_normality(s).cells)
      cells.push_back({{"n", c.n},
                       {"replications", c.replications},
                       {"variance_method", c.variance_method},
                       {"var_tau", c.var_tau},
                       {"mean_tau", c.mean_tau},
                       {"variance_floor", c.variance_floor},
                       {"degenerate", c.degenerate},
                       {"ks", nullable(c.ks)},
                       {"ks_per_seed", c.ks_per_seed}});
  } else {
    const ConsistencyReport rep = run_consistency(s);
    for (const ConsistencyCell& c : rep.cells)
      cells.push_back({{"n", c.n},
                       {"replications", c.replications},
                       {"median", c.median},
                       {"q10", c.q10},
                       {"q90", c.q90},
                       {"mean_psi_fraction", c.mean_psi_fraction}});
    r["ratio"] = nullable(rep.ratio);
  }
  r["cells"] = cells;
  return r;
}

void write_simulation_csv(const ordered_json& report, std::ostream& out) {
  const auto& cells = report.at("cells");
  if (cells.empty()) return;
  std::vector<std::string> keys;
  for (const auto& [key, value] : cells.front().items())
    if (!value.is_array()) keys.push_back(key);
  for (std::size_t k = 0; k < keys.size(); ++k) out << (k ? "," : "") << keys[k];
  out << "\n";
  for (const auto& cell : cells) {
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const auto& v = cell.at(keys[k]);
      out << (k ? "," : "") << (v.is_string() ? v.get<std::string>() : v.dump());
    }
    out << "\n";
  }
}

ordered_json validation_report(const RunConfig& cfg, const std::vector<ValidationCheck>& checks) {
  ordered_json r;
  r["schema_version"] = kReportSchemaVersion;
  r["command"] = "validate";
  r["config"] = config_to_json(cfg);
  int failed = 0;
  ordered_json failures = ordered_json::array();
  for (const ValidationCheck& c : checks) {
    if (c.passed) continue;
    ++failed;
    failures.push_back({{"check", c.name},
                        {"instance_seed", c.instance_seed},
                        {"error", c.error},
                        {"tolerance", c.tolerance},
                        {"detail", c.detail}});
  }
  r["passed"] = failed == 0;
  r["n_checks"] = checks.size();
  r["n_failed"] = failed;
  r["failures"] = failures;
  return r;
}

}  // namespace prevalence
