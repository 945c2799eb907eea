#include "driftlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "driftlab/fields.hpp"
#include "driftlab/mollify.hpp"
#include "driftlab/pde.hpp"
#include "driftlab/report.hpp"
#include "driftlab/sde.hpp"

namespace driftlab {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Shared field-parameter keys (defaults match the catalog).
const std::map<std::string, std::string>& field_defaults() {
  static const std::map<std::string, std::string> kDefaults = {
      {"field", "hardy"}, {"d", "3"},         {"delta", "0.04"},
      {"sign", "1"},      {"coef", "0.1"},    {"C", "1"},
      {"a", "0.5"},       {"c", "2"},         {"amp", "0.5"},
      {"nu", "0.4"},      {"R", "1"},         {"t0", "0.35"},
      {"sigma_t", "0.15"},{"qx", "6"},        {"eps_split", "0.5"},
      {"omega", "6.283185307179586"},         {"tsing_amp", "0.2"},
      {"gamma_t", "1"},
  };
  return kDefaults;
}

const std::map<std::string, std::string>& mollifier_defaults() {
  static const std::map<std::string, std::string> kDefaults = {
      {"m", "16"},          {"divisions", "192"}, {"box_cap", "6"},
      {"gamma0", "1"},      {"gamma_pow", "1"},
  };
  return kDefaults;
}

const std::map<std::string, std::string>& grid_defaults() {
  static const std::map<std::string, std::string> kDefaults = {
      {"grid_L", "4"},   {"grid_n", "96"},   {"grid_steps", "200"},
      {"grid_T", "0.25"},{"kappa", "2.5"},   {"theta", "3"},
  };
  return kDefaults;
}

std::map<std::string, std::string> defaults_for(const std::string& kind) {
  std::map<std::string, std::string> d = {
      {"out", ""}, {"seed", "1"}, {"plots", "0"}};
  auto merge = [&d](const std::map<std::string, std::string>& src) {
    d.insert(src.begin(), src.end());
  };
  if (kind == "formbound") {
    merge(field_defaults());
    d.insert({{"budget", "32"},
              {"pattern", "auto"},
              {"base_radius", "1"},
              {"morrey_s", "0"},
              {"morrey_cubes", "12"}});
  } else if (kind == "mollify") {
    merge(field_defaults());
    merge(mollifier_defaults());
    d.insert({{"region_halfwidth", "2"},
              {"region_T", "1"},
              {"spacing", "0.25"},
              {"export", "0"}});
  } else if (kind == "solve") {
    merge(field_defaults());
    merge(mollifier_defaults());
    merge(grid_defaults());
    d.insert({{"sigma0", "0.8"},
              {"q", "0"},
              {"source", "none"},
              {"h_radius", "1.5"},
              {"store_stride", "1"},
              {"export", "0"}});
  } else if (kind == "simulate") {
    merge(field_defaults());
    merge(mollifier_defaults());
    d.insert({{"ht", "0.001953125"},
              {"T", "1"},
              {"N", "10000"},
              {"substep", "4"},
              {"start_x", "0"},
              {"start_y", "0"},
              {"start_z", "0"},
              {"radius", "0"},
              {"beta", "0"},
              {"modulus_h", "0"},
              {"zero_noise", "0"},
              {"export", "0"}});
  } else if (kind == "verify" || kind.rfind("verify-", 0) == 0) {
    d.insert({{"level", "quick"}, {"criteria", ""}});
  } else {
    throw ConfigInvalid("unknown experiment kind '" + kind + "'");
  }
  return d;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::make(const std::string& kind) {
  ExperimentConfig cfg;
  cfg.kind_ = kind;
  cfg.values_ = defaults_for(kind);
  return cfg;
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text,
                                             const std::string& origin) {
  // First pass: find the kind, then materialize defaults and apply lines.
  std::istringstream pre(text);
  std::string line, kind;
  int lineno = 0;
  while (std::getline(pre, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid(origin + ":" + std::to_string(lineno) +
                          ": expected key = value");
    if (trim(t.substr(0, eq)) == "kind") kind = trim(t.substr(eq + 1));
  }
  if (kind.empty())
    throw ConfigInvalid(origin + ": missing required key 'kind'");
  ExperimentConfig cfg = make(kind);
  std::istringstream in(text);
  lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "kind") continue;
    try {
      cfg.set(key, value);
    } catch (const ConfigInvalid& e) {
      throw ConfigInvalid(origin + ":" + std::to_string(lineno) + ": " +
                          e.what());
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigInvalid("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str(), path);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigInvalid("unknown key '" + key + "' for kind '" + kind_ + "'");
  it->second = value;
}

const std::string& ExperimentConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigInvalid("missing key '" + key + "'");
  return it->second;
}

double ExperimentConfig::num(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigInvalid("key '" + key + "' is not numeric: '" + v + "'");
  }
}

long ExperimentConfig::integer(const std::string& key) const {
  const double v = num(key);
  const long r = std::lround(v);
  if (std::abs(v - r) > 1e-9)
    throw ConfigInvalid("key '" + key + "' is not an integer");
  return r;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "kind = " << kind_ << "\n";
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const {
  std::ostringstream os;
  os << "kind = " << kind_ << "\n";
  for (const auto& [k, v] : values_)
    if (k != "out") os << k << " = " << v << "\n";
  return fnv1a(os.str());
}

void ExperimentConfig::write_file(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigInvalid("cannot write config " + path);
  f << canonical();
}

// ---------------------------------------------------------------------------
// RunManifest
// ---------------------------------------------------------------------------

std::string RunManifest::to_json(const ExperimentConfig& cfg) const {
  json j;
  std::ostringstream hx;
  hx << std::hex << config_hash;
  j["config_hash"] = hx.str();
  j["tool_version"] = tool_version;
  j["wall_seconds"] = wall_seconds;
  j["config"] = json::object();
  j["config"]["kind"] = cfg.kind();
  for (const auto& [k, v] : cfg.values()) j["config"][k] = v;
  j["constants"] = constants;
  j["outputs"] = outputs;
  if (!criteria.empty()) {
    json arr = json::array();
    for (const auto& c : criteria) {
      json e;
      e["index"] = c.index;
      e["name"] = c.name;
      e["pass"] = c.pass;
      e["detail"] = c.detail;
      e["seconds"] = c.seconds;
      arr.push_back(e);
    }
    j["criteria"] = arr;
  }
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::string& path,
                        const ExperimentConfig& cfg) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigInvalid("cannot write manifest " + path);
  f << to_json(cfg);
}

std::string output_root() {
  const char* env = std::getenv("DRIFTLAB_OUT");
  return env && *env ? env : "out";
}

// ---------------------------------------------------------------------------
// Field construction from config
// ---------------------------------------------------------------------------

namespace {

FieldPtr field_from_config(const ExperimentConfig& cfg) {
  std::map<std::string, double> p;
  p["d"] = cfg.num("d");
  p["delta"] = cfg.num("delta");
  p["sign"] = cfg.num("sign");
  p["coef"] = cfg.num("coef");
  p["C"] = cfg.num("C");
  p["a"] = cfg.num("a");
  p["c"] = cfg.num("c");
  p["amp"] = cfg.num("amp");
  p["nu"] = cfg.num("nu");
  p["R"] = cfg.num("R");
  p["t0"] = cfg.num("t0");
  p["sigma"] = cfg.num("sigma_t");
  p["q"] = cfg.num("qx");
  p["eps"] = cfg.num("eps_split");
  p["omega"] = cfg.num("omega");
  p["tsing_amp"] = cfg.num("tsing_amp");
  p["gamma"] = cfg.num("gamma_t");
  return make_field(cfg.str("field"), p);
}

MollifyConfig mollify_from_config(const ExperimentConfig& cfg) {
  MollifyConfig m;
  m.divisions = static_cast<int>(cfg.integer("divisions"));
  m.box_cap = cfg.num("box_cap");
  return m;
}

GammaRule gamma_from_config(const ExperimentConfig& cfg) {
  const double g0 = cfg.num("gamma0");
  const double pw = cfg.num("gamma_pow");
  return [g0, pw](int m) { return g0 / std::pow(m, pw); };
}

std::string ensure_out_dir(const ExperimentConfig& cfg) {
  std::string dir = cfg.str("out");
  if (dir.empty()) {
    std::ostringstream os;
    os << output_root() << "/" << cfg.kind() << "-" << std::hex << cfg.hash();
    dir = os.str();
  }
  if (!make_directories(dir)) throw ConfigInvalid("cannot create " + dir);
  return dir;
}

FormBoundCertificate cert_or_zero(const FieldPtr& f) {
  return f->certificate() ? *f->certificate()
                          : FormBoundCertificate{0.0, GFunction::zero(),
                                                 Provenance::NumericEstimate};
}

CsvWriter functional_csv() {
  return CsvWriter({"functional", "field_id", "m", "h_t", "N", "lhs", "rhs",
                    "ratio", "stderr"});
}

void add_functional_row(CsvWriter& csv, const FunctionalReport& rep,
                        const std::string& field_id, int m, double ht, int N) {
  csv.add_row({rep.functional, field_id, std::to_string(m),
               CsvWriter::num(ht), std::to_string(N), CsvWriter::num(rep.lhs),
               CsvWriter::num(rep.rhs), CsvWriter::num(rep.ratio),
               CsvWriter::num(rep.stderr_est)});
}

void common_constants(RunManifest& man, int d) {
  man.constants["C_S"] = sharp_sobolev_constant(d);
  const auto r = strichartz_delta_readings(1.0, d);
  man.constants["omega_d_standard"] = r.omega_standard;
  man.constants["omega_d_printed"] = r.omega_alt;
}

// ---------------------------------------------------------------------------
// Individual experiments
// ---------------------------------------------------------------------------

void run_formbound(const ExperimentConfig& cfg, const std::string& dir,
                   RunManifest& man) {
  FieldPtr field = field_from_config(cfg);
  const int d = field->dim();
  TestFunctionFamily fam;
  fam.d = d;
  fam.anchor = Vec::zero(d);
  fam.base_radius = cfg.num("base_radius");
  fam.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  std::string pattern = cfg.str("pattern");
  if (pattern == "auto") {
    pattern = "generic";
    for (const auto& part : field->locus().parts) {
      if (part.kind == SingularLocus::Kind::Point) {
        pattern = "origin";
        fam.anchor = part.center;
        break;
      }
      if (part.kind == SingularLocus::Kind::Sphere) {
        pattern = "shell";
        fam.anchor = part.center;
        fam.sphere_radius = part.radius;
      }
    }
  }
  fam.pattern = pattern == "origin"
                    ? TestFunctionFamily::Pattern::OriginConcentrating
                    : pattern == "shell" ? TestFunctionFamily::Pattern::ShellProbing
                                         : TestFunctionFamily::Pattern::Generic;

  const int budget = static_cast<int>(cfg.integer("budget"));
  const double estimate = estimate_form_bound(*field, fam, budget);
  const double cert_delta =
      field->certificate() ? field->certificate()->delta : -1.0;

  CsvWriter csv({"config_hash", "field_id", "d", "budget", "pattern",
                 "estimate", "cert_delta", "morrey_s", "morrey_value"});
  double morrey_v = 0;
  const double morrey_s = cfg.num("morrey_s");
  if (morrey_s > 1) {
    CubeSampler sampler;
    sampler.d = d;
    sampler.domain_center = Vec::zero(d);
    sampler.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    morrey_v = morrey_seminorm(*field, morrey_s, sampler,
                               static_cast<int>(cfg.integer("morrey_cubes")));
  }
  std::ostringstream hx;
  hx << std::hex << cfg.hash();
  csv.add_row({hx.str(), field->id(), std::to_string(d),
               std::to_string(budget), pattern, CsvWriter::num(estimate),
               CsvWriter::num(cert_delta), CsvWriter::num(morrey_s),
               CsvWriter::num(morrey_v)});
  csv.write(dir + "/formbound.csv");
  man.outputs["formbound"] = dir + "/formbound.csv";
  common_constants(man, d);
}

void run_mollify(const ExperimentConfig& cfg, const std::string& dir,
                 RunManifest& man) {
  FieldPtr field = field_from_config(cfg);
  auto [bm, sched] = build_approximation(field, cert_or_zero(field),
                                         static_cast<int>(cfg.integer("m")),
                                         gamma_from_config(cfg),
                                         mollify_from_config(cfg));
  const double hw = cfg.num("region_halfwidth");
  Region reg{Vec{-hw, -hw, -hw}, Vec{hw, hw, hw}, 0.0, cfg.num("region_T")};
  const double dist = l2loc_distance(*field, *bm, reg, cfg.num("spacing"));

  CsvWriter csv({"config_hash", "field_id", "m", "eps_m", "gamma_m", "c_m",
                 "delta_m", "C_S", "r", "lattice_sup", "l2loc_vs_raw"});
  std::ostringstream hx;
  hx << std::hex << cfg.hash();
  csv.add_row({hx.str(), field->id(), std::to_string(sched.m),
               CsvWriter::num(sched.eps_m), CsvWriter::num(sched.gamma_m),
               CsvWriter::num(sched.c_m), CsvWriter::num(sched.delta_m),
               CsvWriter::num(sched.C_S), std::to_string(sched.r),
               CsvWriter::num(bm->lattice_sup()), CsvWriter::num(dist)});
  csv.write(dir + "/mollify.csv");
  man.outputs["mollify"] = dir + "/mollify.csv";
  if (cfg.integer("export") != 0) {
    std::ofstream f(dir + "/lattice.bin", std::ios::binary);
    bm->export_block(f);
    man.outputs["lattice"] = dir + "/lattice.bin";
  }
  man.constants["C_S"] = sched.C_S;
}

SpaceTimeGrid grid_from_config(const ExperimentConfig& cfg) {
  SpaceTimeGrid g;
  g.L = cfg.num("grid_L");
  g.n = static_cast<int>(cfg.integer("grid_n"));
  g.steps = static_cast<int>(cfg.integer("grid_steps"));
  g.T = cfg.num("grid_T");
  return g;
}

void run_solve(const ExperimentConfig& cfg, const std::string& dir,
               RunManifest& man) {
  const SpaceTimeGrid grid = grid_from_config(cfg);
  grid.validate();
  const Weight w(cfg.num("kappa"), cfg.num("theta"));
  grid.validate_weight(w);

  FieldPtr raw = field_from_config(cfg);
  FieldPtr drift;
  MollifiedPtr bm;
  if (cfg.str("field") != "zero") {
    auto built = build_approximation(raw, cert_or_zero(raw),
                                     static_cast<int>(cfg.integer("m")),
                                     gamma_from_config(cfg),
                                     mollify_from_config(cfg));
    bm = built.first;
    drift = bm;
  }

  const double sigma0 = cfg.num("sigma0");
  SpatialFn f0 = gaussian_profile(sigma0, Vec::zero(3));

  SourceTerm src;
  TestFunction hbump(3, 0.5 * (grid.s + grid.T), Vec::zero(3),
                     cfg.num("h_radius"), grid.T - grid.s + 1.0);
  if (cfg.str("source") == "field-bump") {
    src.f_mag = raw.get();
    src.h = [&hbump](double, const Vec& x) { return hbump.space_factor(x); };
  } else if (cfg.str("source") != "none") {
    throw ConfigInvalid("source must be 'none' or 'field-bump'");
  }

  SolveOptions opts;
  opts.store_stride = static_cast<int>(cfg.integer("store_stride"));
  GridSolution sol =
      solve_forward_cauchy(drift ? drift.get() : nullptr, f0, src, grid, opts);

  // per-level norms
  CsvWriter norms({"t", "sup", "l2", "l4"});
  for (int k = 0; k < sol.levels(); ++k)
    norms.add_row_numeric(
        {sol.time(k), sol.sup_norm(k), sol.lp_norm(k, 2), sol.lp_norm(k, 4)});
  norms.write(dir + "/norms.csv");
  man.outputs["norms"] = dir + "/norms.csv";

  double heat_err = -1;
  if (cfg.str("field") == "zero")
    heat_err = heat_oracle_rel_error(grid, sigma0);

  CsvWriter csv({"config_hash", "field_id", "m", "grid_n", "grid_steps",
                 "grid_T", "sigma0", "max_rel_err", "final_sup",
                 "boundary_leak", "source_jitter"});
  std::ostringstream hx;
  hx << std::hex << cfg.hash();
  csv.add_row({hx.str(), drift ? drift->id() : "zero",
               std::to_string(cfg.integer("m")), std::to_string(grid.n),
               std::to_string(grid.steps), CsvWriter::num(grid.T),
               CsvWriter::num(sigma0), CsvWriter::num(heat_err),
               CsvWriter::num(sol.sup_norm(sol.levels() - 1)),
               CsvWriter::num(sol.boundary_leak()),
               std::to_string(sol.source_jitter_count())});
  csv.write(dir + "/solve.csv");
  man.outputs["solve"] = dir + "/solve.csv";

  const double q = cfg.num("q");
  if (q > 0) {
    const EnergyReport rep = energy_report(sol, q, w, src, f0);
    CsvWriter ecsv({"field_id", "m", "q", "kappa", "theta", "lhs_v",
                    "lhs_grad", "lhs_grad_pow", "rhs_source", "rhs_grad_f",
                    "rhs_f", "ratio", "grid_n", "grid_steps", "grid_T"});
    ecsv.add_row({raw->id(), std::to_string(cfg.integer("m")),
                  CsvWriter::num(rep.q), CsvWriter::num(rep.kappa),
                  CsvWriter::num(rep.theta), CsvWriter::num(rep.lhs_v),
                  CsvWriter::num(rep.lhs_grad), CsvWriter::num(rep.lhs_grad_pow),
                  CsvWriter::num(rep.rhs_source), CsvWriter::num(rep.rhs_grad_f),
                  CsvWriter::num(rep.rhs_f), CsvWriter::num(rep.ratio),
                  std::to_string(grid.n), std::to_string(grid.steps),
                  CsvWriter::num(grid.T)});
    ecsv.write(dir + "/energy.csv");
    man.outputs["energy"] = dir + "/energy.csv";
  }

  if (cfg.integer("plots") != 0) {
    SvgSeries s;
    s.label = "sup |v(t)|";
    for (int k = 0; k < sol.levels(); ++k) {
      s.x.push_back(sol.time(k));
      s.y.push_back(sol.sup_norm(k));
    }
    write_svg_plot(dir + "/norms.svg", "solution sup norm vs time", {s});
    man.outputs["plot"] = dir + "/norms.svg";
  }
  if (cfg.integer("export") != 0) {
    std::ofstream f(dir + "/solution.bin", std::ios::binary);
    sol.export_block(f);
    man.outputs["solution"] = dir + "/solution.bin";
  }
  common_constants(man, 3);
}

void run_simulate(const ExperimentConfig& cfg, const std::string& dir,
                  RunManifest& man) {
  FieldPtr raw = field_from_config(cfg);
  FieldPtr drift = raw;
  if (cfg.str("field") != "zero") {
    auto built = build_approximation(raw, cert_or_zero(raw),
                                     static_cast<int>(cfg.integer("m")),
                                     gamma_from_config(cfg),
                                     mollify_from_config(cfg));
    drift = built.first;
  }
  SimConfig sc;
  sc.ht = cfg.num("ht");
  sc.T = cfg.num("T");
  sc.n_paths = static_cast<int>(cfg.integer("N"));
  sc.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  sc.substep = static_cast<int>(cfg.integer("substep"));
  sc.zero_noise = cfg.integer("zero_noise") != 0;
  Vec x0{cfg.num("start_x"), cfg.num("start_y"), cfg.num("start_z")};

  PathEnsemble ens = simulate_euler(drift, x0, sc);

  // Brownian-style baseline statistics.
  const int K = ens.steps();
  double msd = 0;
  for (int p = 0; p < sc.n_paths; ++p) {
    const Vec xT = ens.point(p, K);
    msd += (xT - x0).norm2();
  }
  msd /= sc.n_paths;

  double inc_mean_max = 0, inc_var = 0;
  long inc_count = 0;
  for (int a = 0; a < 3; ++a) {
    double mean = 0;
    long cnt = 0;
    for (int p = 0; p < sc.n_paths; ++p)
      for (int k = 0; k < K; ++k) {
        mean += ens.coord(p, k + 1, a) - ens.coord(p, k, a);
        ++cnt;
      }
    mean /= cnt;
    inc_mean_max = std::max(inc_mean_max, std::abs(mean));
    for (int p = 0; p < sc.n_paths; ++p)
      for (int k = 0; k < K; ++k) {
        const double d = ens.coord(p, k + 1, a) - ens.coord(p, k, a) - mean;
        inc_var += d * d;
        ++inc_count;
      }
  }
  inc_var /= inc_count;

  CsvWriter csv({"config_hash", "field_id", "m", "ht", "T", "N", "seed",
                 "substep", "msd", "expected_msd", "inc_mean_max", "inc_var",
                 "expected_inc_var", "occupation", "modulus_lhs",
                 "modulus_fitted_c"});
  double occ = -1;
  if (cfg.num("radius") > 0)
    occ = occupation_near_origin(ens, cfg.num("radius"), Window{0, sc.T});
  double mod_lhs = -1, mod_c = -1;
  if (cfg.num("beta") > 0 && cfg.num("modulus_h") > 0) {
    const auto rep =
        modulus_of_continuity(ens, cfg.num("beta"), cfg.num("modulus_h"));
    mod_lhs = rep.lhs;
    mod_c = rep.ratio;
  }
  std::ostringstream hx;
  hx << std::hex << cfg.hash();
  csv.add_row({hx.str(), drift->id(), std::to_string(cfg.integer("m")),
               CsvWriter::num(sc.ht), CsvWriter::num(sc.T),
               std::to_string(sc.n_paths), std::to_string(sc.seed),
               std::to_string(sc.substep), CsvWriter::num(msd),
               CsvWriter::num(sc.zero_noise ? 0.0 : 6.0 * sc.T),
               CsvWriter::num(inc_mean_max), CsvWriter::num(inc_var),
               CsvWriter::num(sc.zero_noise ? 0.0 : 2.0 * sc.ht),
               CsvWriter::num(occ), CsvWriter::num(mod_lhs),
               CsvWriter::num(mod_c)});
  csv.write(dir + "/simulate.csv");
  man.outputs["simulate"] = dir + "/simulate.csv";

  CsvWriter fcsv = functional_csv();
  if (cfg.num("beta") > 0 && cfg.num("modulus_h") > 0) {
    const auto rep =
        modulus_of_continuity(ens, cfg.num("beta"), cfg.num("modulus_h"));
    add_functional_row(fcsv, rep, drift->id(),
                       static_cast<int>(cfg.integer("m")), sc.ht, sc.n_paths);
  }
  fcsv.write(dir + "/functionals.csv");
  man.outputs["functionals"] = dir + "/functionals.csv";
  if (cfg.integer("export") != 0) {
    std::ofstream f(dir + "/paths.bin", std::ios::binary);
    ens.export_block(f);
    man.outputs["paths"] = dir + "/paths.bin";
  }
  common_constants(man, 3);
}

}  // namespace

// ---------------------------------------------------------------------------
// Verify suite
// ---------------------------------------------------------------------------

namespace {

struct VerifyParams {
  int grid_n, grid_steps;
  int div;
  double cap;
  int n_paths;
  std::vector<int> pres_levels;
  std::vector<int> feller_levels;
  int budget_raw = 32;
  int budget_moll = 16;
  double l2_spacing;
  int c9_n, c9_steps;
  int c10_n, c10_steps;
  double c12_T;
  int c12_paths;
};

VerifyParams params_for(VerifyLevel level) {
  if (level == VerifyLevel::Full)
    return {96, 200, 192, 6.0, 10000, {4, 8, 16}, {4, 8, 16, 32},
            32, 16, 0.125, 64, 320, 96, 400, 1.0, 10000};
  return {48, 100, 96, 4.0, 2000, {4, 8}, {4, 8, 16},
          32, 8, 0.25, 40, 128, 48, 128, 0.5, 1500};
}

struct VerifyContext {
  VerifyLevel level;
  VerifyParams p;
  std::string dir;
  FieldPtr hardy04 = make_hardy_drift(3, 0.04, 1);
  FieldPtr hardy01 = make_hardy_drift(3, 0.01, 1);

  MollifyConfig mcfg(int div_override = 0, double cap_override = 0) const {
    MollifyConfig m;
    m.divisions = div_override ? div_override : p.div;
    m.box_cap = cap_override > 0 ? cap_override : p.cap;
    return m;
  }
  SpaceTimeGrid base_grid() const {
    return SpaceTimeGrid{4.0, p.grid_n, 0.0, 0.25, p.grid_steps, 1.25};
  }
  TestFunctionFamily origin_family() const {
    TestFunctionFamily fam;
    fam.pattern = TestFunctionFamily::Pattern::OriginConcentrating;
    fam.d = 3;
    fam.anchor = Vec::zero(3);
    return fam;
  }
};

std::string fmt2(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

CriterionResult c1_heat(VerifyContext& ctx) {
  const double rel = heat_oracle_rel_error(ctx.base_grid(), 0.8);
  return {1, "heat-kernel-oracle", rel <= 0.02,
          "max_rel_err=" + fmt2(rel) + " <= 0.02", 0};
}

CriterionResult c2_formbound(VerifyContext& ctx) {
  const double est =
      estimate_form_bound(*ctx.hardy04, ctx.origin_family(), ctx.p.budget_raw);
  const bool pass = est >= 0.02 && est <= 0.04 * 1.05;
  return {2, "form-bound-soundness", pass,
          "estimate=" + fmt2(est) + " in [0.02, 0.042]", 0};
}

CriterionResult c3_preservation(VerifyContext& ctx) {
  auto sched = build_schedule(ctx.hardy04, *ctx.hardy04->certificate(),
                              ctx.p.pres_levels, default_gamma_rule(),
                              ctx.mcfg());
  std::string detail;
  bool pass = true;
  Region reg{Vec{-2, -2, -2}, Vec{2, 2, 2}, 0.0, 1.0};
  double prev_dist = std::numeric_limits<double>::infinity();
  for (const auto& [bm, s] : sched) {
    const double est =
        estimate_form_bound(*bm, ctx.origin_family(), ctx.p.budget_moll);
    const double dist = l2loc_distance(*ctx.hardy04, *bm, reg,
                                       ctx.p.l2_spacing);
    if (est > 0.042) pass = false;
    if (dist >= prev_dist) pass = false;
    prev_dist = dist;
    detail += "m" + std::to_string(s.m) + ":est=" + fmt2(est) +
              ",dist=" + fmt2(dist) + " ";
  }
  return {3, "delta-preservation", pass, detail + "(est<=0.042, dist strictly dec)", 0};
}

CriterionResult c4_feller(VerifyContext& ctx) {
  auto sched = build_schedule(ctx.hardy04, *ctx.hardy04->certificate(),
                              ctx.p.feller_levels, default_gamma_rule(),
                              ctx.mcfg());
  const FellerReport rep =
      feller_convergence(sched, gaussian_profile(0.8, Vec::zero(3)),
                         ctx.base_grid());
  bool dec = true;
  for (std::size_t i = 1; i < rep.gaps.size(); ++i)
    if (rep.gaps[i] >= rep.gaps[i - 1]) dec = false;
  const double final_rel = rep.gaps.back() / rep.f_sup;
  const bool pass = dec && final_rel <= 0.05 && rep.max_principle_ok;
  std::string detail = "gaps=";
  for (double g : rep.gaps) detail += fmt2(g) + " ";
  detail += "final/supf=" + fmt2(final_rel) + "<=0.05, max-principle " +
            (rep.max_principle_ok ? "ok" : "VIOLATED");
  return {4, "feller-convergence", pass, detail, 0};
}

CriterionResult c5_energy(VerifyContext& ctx) {
  auto sched = build_schedule(ctx.hardy01, *ctx.hardy01->certificate(),
                              {4, 8, 16}, default_gamma_rule(), ctx.mcfg());
  const SpaceTimeGrid grid = ctx.base_grid();
  const Weight w(2.5, 3.0);
  grid.validate_weight(w);
  TestFunction hbump(3, 0.125, Vec::zero(3), 1.5, 10.0);
  SourceTerm src;
  src.f_mag = ctx.hardy01.get();
  src.h = [&hbump](double, const Vec& x) { return hbump.space_factor(x); };
  SpatialFn f0 = gaussian_profile(0.8, Vec::zero(3));
  std::vector<double> ratios;
  std::string detail;
  for (const auto& [bm, s] : sched) {
    GridSolution sol = solve_forward_cauchy(bm.get(), f0, src, grid, {});
    const EnergyReport rep = energy_report(sol, 4.0, w, src, f0);
    ratios.push_back(rep.ratio);
    detail += "m" + std::to_string(s.m) + ":ratio=" + fmt2(rep.ratio) + " ";
  }
  const double mx = *std::max_element(ratios.begin(), ratios.end());
  const double mn = *std::min_element(ratios.begin(), ratios.end());
  const bool pass = std::isfinite(mx) && mn > 0 && (mx - mn) / mn <= 0.20;
  return {5, "energy-estimate-stability", pass,
          detail + "spread=" + fmt2((mx - mn) / mn) + "<=0.2", 0};
}

CriterionResult c6_contraction(VerifyContext& ctx) {
  auto built = build_approximation(ctx.hardy04, *ctx.hardy04->certificate(),
                                   16, default_gamma_rule(), ctx.mcfg());
  GridSolution sol = solve_forward_cauchy(
      built.first.get(), gaussian_profile(0.8, Vec::zero(3)), SourceTerm{},
      ctx.base_grid(), {});
  const ContractionReport rep =
      lp_contraction_check(sol, 4.0, *ctx.hardy04->certificate(), 0.05);
  return {6, "lp-quasi-contraction", rep.pass,
          "lhs=" + fmt2(rep.lhs) + " <= 1.05*rhs=" + fmt2(1.05 * rep.rhs), 0};
}

CriterionResult c7_smoothing(VerifyContext& ctx) {
  const SpaceTimeGrid grid = ctx.base_grid();
  SpatialFn f0 = homogeneous_profile(3, 2.0, 2.5, 3.5);
  GridSolution sol0 =
      solve_forward_cauchy(nullptr, f0, SourceTerm{}, grid, {});
  const SlopeFit fit0 = smoothing_exponent_fit(sol0, 2.0, 4.0, 0.06, 0.24);
  const double target = -1.5 * (0.5 - 0.25);
  const bool pass0 = std::abs(fit0.slope - target) <= 0.15 * std::abs(target);

  auto built = build_approximation(ctx.hardy04, *ctx.hardy04->certificate(),
                                   16, default_gamma_rule(), ctx.mcfg());
  GridSolution sol1 = solve_forward_cauchy(built.first.get(), f0, SourceTerm{},
                                           grid, {});
  const SlopeFit fit1 = smoothing_exponent_fit(sol1, 2.0, 4.0, 0.06, 0.24);
  const bool pass1 = fit1.slope >= target - 0.15;
  return {7, "smoothing-exponent", pass0 && pass1,
          "zero-drift slope=" + fmt2(fit0.slope) + " (target " + fmt2(target) +
              " +-15%), drift slope=" + fmt2(fit1.slope) + " >= " +
              fmt2(target - 0.15),
          0};
}

CriterionResult c8_krylov(VerifyContext& ctx) {
  auto sched = build_schedule(ctx.hardy04, *ctx.hardy04->certificate(),
                              {8, 16}, default_gamma_rule(), ctx.mcfg());
  TestFunction h(3, 0.25, Vec::zero(3), 1.5, 0.25);
  std::vector<double> ratios;
  std::string detail;
  CsvWriter fcsv = functional_csv();
  for (const auto& [bm, s] : sched) {
    for (double ht : {1.0 / 128, 1.0 / 256, 1.0 / 512}) {
      SimConfig sc;
      sc.ht = ht;
      sc.T = 0.5;
      sc.n_paths = ctx.p.n_paths;
      sc.seed = 21;
      sc.substep = 4;
      PathEnsemble ens = simulate_euler(bm, Vec{0.2, 0, 0}, sc);
      const FunctionalReport rep = krylov_functional(ens, *bm, h, 4.0);
      add_functional_row(fcsv, rep, bm->id(), s.m, ht, sc.n_paths);
      ratios.push_back(rep.ratio);
    }
    detail += "m" + std::to_string(s.m) + ":[" + fmt2(ratios[ratios.size() - 3]) +
              "," + fmt2(ratios[ratios.size() - 2]) + "," +
              fmt2(ratios.back()) + "] ";
  }
  fcsv.write(ctx.dir + "/krylov.csv");
  const double mx = *std::max_element(ratios.begin(), ratios.end());
  const double mn = *std::min_element(ratios.begin(), ratios.end());
  const bool pass = mn > 0 && mx / mn <= 1.2;
  return {8, "krylov-ratio-stability", pass,
          detail + "band=" + fmt2(mx / mn) + "<=1.2", 0};
}

CriterionResult c9_drift_integral(VerifyContext& ctx) {
  auto built = build_approximation(ctx.hardy04, *ctx.hardy04->certificate(),
                                   16, default_gamma_rule(), ctx.mcfg());
  const auto& bm = built.first;
  SimConfig sc;
  sc.ht = 1.0 / 512;
  sc.T = 1.0;
  sc.n_paths = ctx.p.n_paths;
  sc.seed = 31;
  sc.substep = 4;
  PathEnsemble ens = simulate_euler(bm, Vec{1, 0, 0}, sc);

  SpaceTimeGrid g9{4.0, ctx.p.c9_n, 0.0, 1.0, ctx.p.c9_steps, 1.25};
  const double rel = heat_oracle_rel_error(g9, 0.8);

  bool pass = true;
  std::string detail = "calib=" + fmt2(rel) + " ";
  std::vector<double> per_unit;
  CsvWriter fcsv = functional_csv();
  for (double r : {0.25, 0.5, 1.0}) {
    SpaceTimeGrid g = g9;
    g.steps = std::max(16, static_cast<int>(std::lround(ctx.p.c9_steps * r)));
    FunctionalReport rep = expected_drift_integral(
        ens, *bm, *ctx.hardy04->certificate(), Window{0, r}, &g, 0.0);
    const double budget = 2.0 * rel * std::max(rep.cross_sup, rep.cross_value);
    const bool ok =
        std::abs(rep.lhs - rep.cross_value) <= 3.0 * rep.stderr_est + budget;
    if (!ok) pass = false;
    per_unit.push_back(rep.lhs / r);
    add_functional_row(fcsv, rep, bm->id(), 16, sc.ht, sc.n_paths);
    detail += "r=" + fmt2(r) + ":lhs=" + fmt2(rep.lhs) + ",pde=" +
              fmt2(rep.cross_value) + (ok ? " " : " MISMATCH ");
  }
  fcsv.write(ctx.dir + "/drift_integral.csv");
  const double mx = *std::max_element(per_unit.begin(), per_unit.end());
  const double mn = *std::min_element(per_unit.begin(), per_unit.end());
  if (!(mn > 0) || mx / mn > 1.5) pass = false;
  detail += "lhs/(r-s) band=" + fmt2(mx / mn) + "<=1.5";
  return {9, "drift-integral-bound", pass, detail, 0};
}

CriterionResult c10_duality(VerifyContext& ctx) {
  auto built = build_approximation(ctx.hardy04, *ctx.hardy04->certificate(),
                                   16, default_gamma_rule(), ctx.mcfg());
  const auto& bm = built.first;
  SpaceTimeGrid g{4.0, ctx.p.c10_n, 0.0, 0.5, ctx.p.c10_steps, 1.25};
  const double budget = heat_oracle_rel_error(g, 0.8);

  SimConfig sc;
  sc.ht = 1.0 / 512;
  sc.T = 0.5;
  sc.n_paths = ctx.p.n_paths;
  sc.seed = 41;
  sc.substep = 4;
  const FunctionalReport rep = duality_check(
      Vec::zero(3), gaussian_profile(0.8, Vec::zero(3)), 0.5, bm, g, sc,
      budget);

  GridSolution w1 = solve_backward_terminal(
      bm.get(), [](const Vec&) { return 1.0; }, SourceTerm{}, g, 0.5,
      SolveOptions{1, true});
  const double w0 = w1.interp(w1.levels() - 1, Vec::zero(3));
  const bool conservative = std::abs(w0 - 1.0) <= 1e-3;

  const bool pass = rep.pass && conservative;
  return {10, "duality-conservativeness", pass,
          "mc=" + fmt2(rep.lhs) + " pde=" + fmt2(rep.rhs) + " gap=" +
              fmt2(std::abs(rep.lhs - rep.rhs)) + " <= 3se+" + fmt2(budget) +
              "; w(0,x)|f=1 = " + fmt2(w0) + " (|.-1|<=1e-3)",
          0};
}

CriterionResult c11_schedule_independence(VerifyContext& ctx) {
  auto bA = build_approximation(ctx.hardy04, *ctx.hardy04->certificate(), 16,
                                default_gamma_rule(), ctx.mcfg());
  auto bB = build_approximation(
      ctx.hardy04, *ctx.hardy04->certificate(), 16,
      [](int m) { return 0.7 / std::pow(m, 1.2); },
      ctx.mcfg(ctx.p.div * 2 / 3));
  SimConfig sc;
  sc.ht = 1.0 / 256;
  sc.T = 0.5;
  sc.n_paths = ctx.p.n_paths;
  sc.substep = 4;
  auto sim = [&](const MollifiedPtr& f, std::uint64_t seed) {
    SimConfig c = sc;
    c.seed = seed;
    return simulate_euler(f, Vec{0.5, 0, 0}, c);
  };
  PathEnsemble A1 = sim(bA.first, 51), A2 = sim(bA.first, 52),
               A3 = sim(bA.first, 53), A4 = sim(bA.first, 54),
               B2 = sim(bB.first, 52);
  double baseline = 0, cross = 0;
  for (double t : {0.25, 0.5}) {
    baseline = std::max(baseline, marginal_distance(A1, A2, t));
    baseline = std::max(baseline, marginal_distance(A3, A4, t));
    cross = std::max(cross, marginal_distance(A1, B2, t));
  }
  const bool pass = cross <= 2.0 * baseline;
  return {11, "schedule-independence", pass,
          "cross-KS=" + fmt2(cross) + " <= 2*baseline=" + fmt2(2 * baseline),
          0};
}

CriterionResult c12_stickiness(VerifyContext& ctx) {
  const double dcrit = 4.0 * std::pow(3.0 / (3.0 - 2.0), 2);  // 36 at d=3
  const std::vector<double> deltas = {0.5 / 9.0, dcrit, 1.5 * dcrit};
  std::vector<double> occ;
  std::string detail;
  for (double delta : deltas) {
    FieldPtr hardy = make_hardy_drift(3, delta, 1);
    const double sd = std::sqrt(delta);
    auto built = build_approximation(
        hardy, *hardy->certificate(), 48,
        [sd](int m) { return 16.0 * std::max(sd, 0.05) / m; },
        ctx.mcfg(0, 4.0));
    SimConfig sc;
    sc.ht = 1.0 / 512;
    sc.T = ctx.p.c12_T;
    sc.n_paths = ctx.p.c12_paths;
    sc.seed = 61;
    sc.substep = 16;
    PathEnsemble ens = simulate_euler(built.first, Vec::zero(3), sc);
    occ.push_back(occupation_near_origin(ens, 0.1, Window{0, sc.T}));
    detail += "delta=" + fmt2(delta) + ":occ=" + fmt2(occ.back()) + " ";
  }
  const bool monotone = occ[0] < occ[1] && occ[1] < occ[2];
  const bool ratio10 = occ[2] >= 10.0 * occ[0];
  return {12, "stickiness-dichotomy", monotone && ratio10,
          detail + "(monotone, super>=10x sub)", 0};
}

CriterionResult c13_determinism(VerifyContext& ctx) {
  auto run_pair = [&](ExperimentConfig cfg, const std::string& tag,
                      const std::string& csv_name) {
    cfg.set("out", ctx.dir + "/det-" + tag + "-1");
    run_experiment(cfg);
    std::ifstream f1(ctx.dir + "/det-" + tag + "-1/" + csv_name,
                     std::ios::binary);
    std::stringstream s1;
    s1 << f1.rdbuf();
    cfg.set("out", ctx.dir + "/det-" + tag + "-2");
    run_experiment(cfg);
    std::ifstream f2(ctx.dir + "/det-" + tag + "-2/" + csv_name,
                     std::ios::binary);
    std::stringstream s2;
    s2 << f2.rdbuf();
    return !s1.str().empty() && s1.str() == s2.str();
  };

  ExperimentConfig fb = ExperimentConfig::make("formbound");
  fb.set("budget", "6");
  const bool ok1 = run_pair(fb, "formbound", "formbound.csv");

  ExperimentConfig sim = ExperimentConfig::make("simulate");
  sim.set("field", "zero");
  sim.set("N", "500");
  sim.set("T", "0.25");
  sim.set("ht", "0.0078125");
  const bool ok2 = run_pair(sim, "simulate", "simulate.csv");

  return {13, "determinism", ok1 && ok2,
          std::string("formbound csv identical: ") + (ok1 ? "yes" : "NO") +
              ", simulate csv identical: " + (ok2 ? "yes" : "NO"),
          0};
}

}  // namespace

int criterion_count() { return 13; }

std::string criterion_name(int index) {
  static const char* kNames[] = {
      "heat-kernel-oracle",    "form-bound-soundness", "delta-preservation",
      "feller-convergence",    "energy-estimate-stability",
      "lp-quasi-contraction",  "smoothing-exponent",   "krylov-ratio-stability",
      "drift-integral-bound",  "duality-conservativeness",
      "schedule-independence", "stickiness-dichotomy", "determinism"};
  if (index < 1 || index > 13) throw InvalidParameter("criterion index 1..13");
  return kNames[index - 1];
}

CriterionResult verify_criterion(int index, VerifyLevel level,
                                 const std::string& out_dir) {
  VerifyContext ctx{level, params_for(level), out_dir};
  make_directories(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  switch (index) {
    case 1: r = c1_heat(ctx); break;
    case 2: r = c2_formbound(ctx); break;
    case 3: r = c3_preservation(ctx); break;
    case 4: r = c4_feller(ctx); break;
    case 5: r = c5_energy(ctx); break;
    case 6: r = c6_contraction(ctx); break;
    case 7: r = c7_smoothing(ctx); break;
    case 8: r = c8_krylov(ctx); break;
    case 9: r = c9_drift_integral(ctx); break;
    case 10: r = c10_duality(ctx); break;
    case 11: r = c11_schedule_independence(ctx); break;
    case 12: r = c12_stickiness(ctx); break;
    case 13: r = c13_determinism(ctx); break;
    default: throw InvalidParameter("criterion index 1..13");
  }
  const auto t1 = std::chrono::steady_clock::now();
  r.seconds = std::chrono::duration<double>(t1 - t0).count();
  return r;
}

std::vector<CriterionResult> verify_suite(VerifyLevel level,
                                          const std::string& out_dir,
                                          const std::vector<int>& subset) {
  std::vector<int> todo = subset;
  if (todo.empty())
    for (int i = 1; i <= criterion_count(); ++i) todo.push_back(i);
  make_directories(out_dir);

  std::vector<CriterionResult> results;
  for (int idx : todo) {
    CriterionResult r = verify_criterion(idx, level, out_dir);
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << "criterion " << r.index
              << ": " << r.name << " (" << r.detail << ") ["
              << CsvWriter::num(r.seconds).substr(0, 6) << "s]\n";
    std::cout.flush();
    results.push_back(std::move(r));
  }

  CsvWriter csv({"index", "name", "pass", "detail", "seconds"});
  for (const auto& r : results)
    csv.add_row({std::to_string(r.index), r.name, r.pass ? "1" : "0",
                 r.detail, CsvWriter::num(r.seconds)});
  csv.write(out_dir + "/verify.csv");
  return results;
}

// ---------------------------------------------------------------------------
// run_experiment dispatch
// ---------------------------------------------------------------------------

RunManifest run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest man;
  man.config_hash = cfg.hash();

  const std::string dir = ensure_out_dir(cfg);

  if (cfg.kind() == "formbound") {
    run_formbound(cfg, dir, man);
  } else if (cfg.kind() == "mollify") {
    run_mollify(cfg, dir, man);
  } else if (cfg.kind() == "solve") {
    run_solve(cfg, dir, man);
  } else if (cfg.kind() == "simulate") {
    run_simulate(cfg, dir, man);
  } else if (cfg.kind() == "verify" || cfg.kind().rfind("verify-", 0) == 0) {
    const VerifyLevel level =
        cfg.str("level") == "full" ? VerifyLevel::Full : VerifyLevel::Quick;
    std::vector<int> subset;
    if (cfg.kind().rfind("verify-", 0) == 0)
      subset.push_back(std::stoi(cfg.kind().substr(7)));
    std::istringstream cs(cfg.str("criteria"));
    std::string tok;
    while (std::getline(cs, tok, ','))
      if (!trim(tok).empty()) subset.push_back(std::stoi(trim(tok)));
    man.criteria = verify_suite(level, dir, subset);
    common_constants(man, 3);
  } else {
    throw ConfigInvalid("unknown experiment kind '" + cfg.kind() + "'");
  }

  const auto t1 = std::chrono::steady_clock::now();
  man.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  man.write(dir + "/manifest.json", cfg);
  // The materialized config rides along for reproducibility audits.
  cfg.write_file(dir + "/config.cfg");
  return man;
}

}  // namespace driftlab
