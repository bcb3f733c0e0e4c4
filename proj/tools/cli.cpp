#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "winstat/baselines.hpp"
#include "winstat/censoring_km.hpp"
#include "winstat/data_model.hpp"
#include "winstat/estimators.hpp"
#include "winstat/inference.hpp"
#include "winstat/parallel.hpp"
#include "winstat/scenario.hpp"
#include "winstat/simulator.hpp"
#include "winstat/types.hpp"
#include "winstat/win_kernel.hpp"

// Command layer. Every command renders its primary output (JSON or CSV)
// deterministically: fixed key order, fixed 17-significant-digit number
// formatting, no timestamps. When --out is given, a sidecar
// <out>.manifest.json records the invocation, input digests, resolved
// settings, and wall time; the sidecar is the only place nondeterministic
// values (wall time) appear.

namespace winstat::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Minimal pretty-printing JSON emitter with deterministic formatting.
class Json {
 public:
  void obj_open() {
    value_prefix();
    out_ += '{';
    levels_.push_back({true});
  }
  void obj_close() { close('}'); }
  void arr_open() {
    value_prefix();
    out_ += '[';
    levels_.push_back({true});
  }
  void arr_close() { close(']'); }
  void key(const char* k) {
    item_prefix();
    out_ += '"';
    escape_into(k);
    out_ += "\": ";
    pending_ = true;
  }
  void str_val(const std::string& s) {
    value_prefix();
    out_ += '"';
    escape_into(s);
    out_ += '"';
  }
  void num(double v) {
    value_prefix();
    if (std::isfinite(v))
      out_ += fmt_double(v);
    else
      out_ += "null";
  }
  void num_uint(std::uint64_t v) {
    value_prefix();
    out_ += std::to_string(v);
  }
  void boolean(bool b) {
    value_prefix();
    out_ += b ? "true" : "false";
  }
  void null() {
    value_prefix();
    out_ += "null";
  }
  std::string take() {
    out_ += '\n';
    return std::move(out_);
  }

 private:
  struct Level {
    bool first = true;
  };

  void indent() { out_.append(2 * levels_.size(), ' '); }
  void item_prefix() {
    if (!levels_.back().first) out_ += ',';
    levels_.back().first = false;
    out_ += '\n';
    indent();
  }
  void value_prefix() {
    if (pending_) {
      pending_ = false;
      return;
    }
    if (levels_.empty()) return;
    item_prefix();
  }
  void close(char ch) {
    const bool empty = levels_.back().first;
    levels_.pop_back();
    if (!empty) {
      out_ += '\n';
      indent();
    }
    out_ += ch;
  }
  void escape_into(const std::string& s) {
    for (char ch : s) {
      switch (ch) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\r': out_ += "\\r"; break;
        case '\t': out_ += "\\t"; break;
        default:
          if (static_cast<unsigned char>(ch) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x",
                          static_cast<unsigned>(static_cast<unsigned char>(ch)));
            out_ += buf;
          } else {
            out_ += ch;
          }
      }
    }
  }

  std::string out_;
  std::vector<Level> levels_;
  bool pending_ = false;
};

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::uint64_t h = 1469598103934665603ull;
  char buf[65536];
  for (;;) {
    in.read(buf, sizeof buf);
    const std::streamsize got = in.gcount();
    if (got <= 0) break;
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(h));
  return hex;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse number '" + t + "'");
  }
  if (used != t.size())
    throw ConfigError(what + ": cannot parse number '" + t + "'");
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

HazardMode hazard_from_name(const std::string& name) {
  if (name == "km") return HazardMode::neg_log_km;
  if (name == "na") return HazardMode::nelson_aalen;
  throw ConfigError("unknown hazard mode '" + name + "'; expected km or na");
}

VarianceMode variance_from_name(const std::string& name) {
  if (name == "delta") return VarianceMode::delta_method;
  if (name == "null") return VarianceMode::null_variance;
  throw ConfigError("unknown variance mode '" + name +
                    "'; expected delta or null");
}

const char* hazard_name(HazardMode m) {
  return m == HazardMode::neg_log_km ? "km" : "na";
}

const char* variance_name(VarianceMode m) {
  return m == VarianceMode::delta_method ? "delta" : "null";
}

Method method_from_name(const std::string& name) {
  for (Method m : {Method::ipcw, Method::naive, Method::logrank,
                   Method::true_common, Method::true_joint})
    if (name == method_name(m)) return m;
  throw ConfigError("unknown method '" + name +
                    "'; expected ipcw, naive, logrank, true_common, or "
                    "true_joint");
}

void emit_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + out_path + "' for writing");
  f << text;
  f.flush();
  if (!f) throw IoError("failed while writing '" + out_path + "'");
}

// Invocation context shared by the manifest writers.
struct Ctx {
  std::vector<std::string> argv;
  std::chrono::steady_clock::time_point start;
};

void write_manifest(const Ctx& ctx, const std::string& out_path,
                    const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::optional<std::uint64_t>& seed,
                    const std::function<void(Json&)>& config_echo) {
  if (out_path.empty()) return;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    ctx.start)
          .count();
  Json j;
  j.obj_open();
  j.key("tool");
  j.str_val("winstat");
  j.key("version");
  j.str_val(kVersion);
  j.key("command");
  j.str_val(command);
  j.key("argv");
  j.arr_open();
  for (const std::string& a : ctx.argv) j.str_val(a);
  j.arr_close();
  j.key("inputs");
  j.arr_open();
  for (const std::string& p : inputs) {
    j.obj_open();
    j.key("path");
    j.str_val(p);
    j.key("fnv1a64");
    j.str_val(fnv1a64_file(p));
    j.obj_close();
  }
  j.arr_close();
  j.key("output");
  j.str_val(out_path);
  j.key("threads");
  j.num_uint(thread_count());
  if (seed) {
    j.key("seed");
    j.num_uint(*seed);
  }
  j.key("config");
  config_echo(j);
  j.key("wall_seconds");
  j.num(wall);
  emit_output(std::move(j).take(), out_path + ".manifest.json");
}

void append_inference(Json& j, const char* name,
                      const std::optional<StatisticInference>& s) {
  j.key(name);
  if (!s) {
    j.null();
    return;
  }
  j.obj_open();
  j.key("estimate");
  j.num(s->estimate);
  j.key("se");
  j.num(s->se);
  j.key("ci_low");
  j.num(s->ci_low);
  j.key("ci_high");
  j.num(s->ci_high);
  j.key("z");
  j.num(s->z);
  j.key("p_two_sided");
  j.num(s->p_two_sided);
  j.key("p_one_sided");
  j.num(s->p_one_sided);
  j.obj_close();
}

void append_logrank(Json& j, const LogrankResult& lr) {
  j.key("logrank");
  j.obj_open();
  j.key("chi2");
  j.num(lr.chi2);
  j.key("z");
  j.num(lr.z);
  j.key("p_two_sided");
  j.num(lr.p_two_sided);
  j.key("p_one_sided");
  j.num(lr.p_one_sided);
  j.obj_close();
}

// ----- analyze -----

struct AnalyzeOpts {
  std::string input;
  std::string config_file;
  std::string out;
  double tau = 0.0;
  double tau_quantile = 0.0;
  double zeta = 0.0;
  std::string margins_csv;
  double alpha = 0.05;
  std::string hazard = "km";
  std::string variance = "delta";
  bool no_renormalize = false;
  bool naive = false;
  bool with_logrank = false;
  std::string sweep;
};

// Settings file for analyze: "key = value" lines, '#' comments. Flags
// given on the command line win over file entries.
void apply_config_file(const CLI::App* sub, AnalyzeOpts& o) {
  std::ifstream in(o.config_file);
  if (!in) throw IoError("cannot open '" + o.config_file + "' for reading");
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(o.config_file + " line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!kv.emplace(key, value).second)
      throw ConfigError(o.config_file + ": duplicate key '" + key + "'");
  }
  auto flag_given = [sub](const char* flag) { return sub->count(flag) > 0; };
  auto take = [&kv](const char* key, std::string& dst) {
    auto it = kv.find(key);
    if (it == kv.end()) return false;
    dst = it->second;
    kv.erase(it);
    return true;
  };
  std::string v;
  if (take("tau", v) && !flag_given("--tau"))
    o.tau = parse_double(v, o.config_file + ": tau");
  if (take("tau_quantile", v) && !flag_given("--tau-auto"))
    o.tau_quantile = parse_double(v, o.config_file + ": tau_quantile");
  if (take("zeta", v) && !flag_given("--zeta"))
    o.zeta = parse_double(v, o.config_file + ": zeta");
  if (take("margins", v) && !flag_given("--margins")) o.margins_csv = v;
  if (take("alpha", v) && !flag_given("--alpha"))
    o.alpha = parse_double(v, o.config_file + ": alpha");
  if (take("hazard", v) && !flag_given("--hazard")) o.hazard = trim(v);
  if (take("variance", v) && !flag_given("--variance")) o.variance = trim(v);
  if (take("renormalize", v) && !flag_given("--no-renormalize")) {
    const std::string b = trim(v);
    if (b == "true" || b == "1")
      o.no_renormalize = false;
    else if (b == "false" || b == "0")
      o.no_renormalize = true;
    else
      throw ConfigError(o.config_file + ": renormalize must be true or false");
  }
  if (!kv.empty())
    throw ConfigError(o.config_file + ": unknown key '" + kv.begin()->first +
                      "'");
}

std::vector<double> resolve_margins(const CLI::App* sub, const AnalyzeOpts& o,
                                    int n_endpoints) {
  const bool have_zeta = sub->count("--zeta") > 0 || o.zeta != 0.0;
  const bool have_margins = !o.margins_csv.empty();
  if (have_zeta && have_margins)
    throw ConfigError("give either --zeta or --margins, not both");
  std::vector<double> margins(static_cast<std::size_t>(n_endpoints), 0.0);
  if (have_margins) {
    const std::vector<std::string> parts = split(o.margins_csv, ',');
    if (parts.size() != margins.size())
      throw ConfigError("--margins needs one value per endpoint; the data has " +
                        std::to_string(n_endpoints));
    for (std::size_t l = 0; l < parts.size(); ++l)
      margins[l] = parse_double(parts[l], "--margins");
  } else if (have_zeta) {
    margins.assign(margins.size(), o.zeta);
  }
  return margins;
}

std::vector<double> parse_zeta_grid(const std::string& text) {
  const std::vector<std::string> parts = split(text, ':');
  if (parts.size() == 1) return {parse_double(parts[0], "--sweep-zeta")};
  if (parts.size() != 3)
    throw ConfigError("--sweep-zeta expects start:stop:step");
  const double a = parse_double(parts[0], "--sweep-zeta start");
  const double b = parse_double(parts[1], "--sweep-zeta stop");
  const double step = parse_double(parts[2], "--sweep-zeta step");
  if (!(step > 0.0) || b < a)
    throw ConfigError("--sweep-zeta needs stop >= start and step > 0");
  std::vector<double> grid;
  for (double z = a; z <= b + 1e-9 * step; z += step)
    grid.push_back(std::min(z, b));
  return grid;
}

int cmd_analyze(const Ctx& ctx, const CLI::App* sub, AnalyzeOpts& o) {
  if (!o.config_file.empty()) apply_config_file(sub, o);
  const bool have_tau = sub->count("--tau") > 0 || o.tau > 0.0;
  const bool have_q = sub->count("--tau-auto") > 0 || o.tau_quantile > 0.0;
  if (have_tau && have_q)
    throw ConfigError("give either --tau or --tau-auto, not both");
  const TauSpec tspec = have_tau
                            ? TauSpec::fixed(o.tau)
                            : TauSpec::auto_quantile(
                                  have_q ? o.tau_quantile : 0.05);

  const Dataset raw = read_dataset_csv(o.input);
  const double tau = resolve_tau(raw, tspec);
  const Dataset data = truncate_at_horizon(raw, tau);

  AnalysisConfig config;
  config.n_endpoints = data.n_endpoints;
  config.tau = TauSpec::fixed(tau);
  config.alpha = o.alpha;
  config.hazard_mode = hazard_from_name(o.hazard);
  config.variance_mode = variance_from_name(o.variance);
  config.renormalize = !o.no_renormalize;

  const char* weights = o.naive ? "none" : "km";
  auto run_one = [&](const std::vector<double>& margins) {
    AnalysisConfig c = config;
    c.margins = margins;
    if (o.naive) return analyze_naive(data, c);
    return analyze_dataset(data, c);
  };

  std::vector<std::string> inputs = {o.input};
  if (!o.config_file.empty()) inputs.push_back(o.config_file);

  if (!o.sweep.empty()) {
    if (sub->count("--zeta") > 0 || sub->count("--margins") > 0)
      throw ConfigError("--sweep-zeta replaces --zeta and --margins");
    const std::vector<double> grid = parse_zeta_grid(o.sweep);
    std::string csv = "zeta,pi_t,pi_c,pi_tie,wr,ci_low,ci_high,p_two_sided\n";
    for (double z : grid) {
      const AnalysisResult res = run_one(
          std::vector<double>(static_cast<std::size_t>(data.n_endpoints), z));
      csv += fmt_double(z) + "," + fmt_double(res.probs.pi_t) + "," +
             fmt_double(res.probs.pi_c) + "," + fmt_double(res.probs.pi_tie);
      if (res.wr) {
        csv += "," + fmt_double(res.wr->estimate) + "," +
               fmt_double(res.wr->ci_low) + "," + fmt_double(res.wr->ci_high) +
               "," + fmt_double(res.wr->p_two_sided);
      } else {
        csv += ",,,,";
      }
      csv += "\n";
    }
    emit_output(csv, o.out);
    write_manifest(ctx, o.out, "analyze", inputs, std::nullopt, [&](Json& j) {
      j.obj_open();
      j.key("tau");
      j.num(tau);
      j.key("sweep_zeta");
      j.arr_open();
      for (double z : grid) j.num(z);
      j.arr_close();
      j.key("alpha");
      j.num(o.alpha);
      j.key("hazard");
      j.str_val(o.hazard);
      j.key("variance");
      j.str_val(o.variance);
      j.key("renormalize");
      j.boolean(!o.no_renormalize);
      j.key("weights");
      j.str_val(weights);
      j.obj_close();
    });
    return 0;
  }

  const std::vector<double> margins =
      resolve_margins(sub, o, data.n_endpoints);
  const AnalysisResult res = run_one(margins);
  std::optional<LogrankResult> lr;
  if (o.with_logrank) lr = logrank_test(data);

  auto config_echo = [&](Json& j) {
    j.obj_open();
    j.key("tau");
    j.num(tau);
    j.key("margins");
    j.arr_open();
    for (double m : margins) j.num(m);
    j.arr_close();
    j.key("alpha");
    j.num(o.alpha);
    j.key("hazard");
    j.str_val(o.hazard);
    j.key("variance");
    j.str_val(o.variance);
    j.key("renormalize");
    j.boolean(!o.no_renormalize);
    j.key("weights");
    j.str_val(weights);
    j.obj_close();
  };

  Json j;
  j.obj_open();
  j.key("tool");
  j.str_val("winstat");
  j.key("version");
  j.str_val(kVersion);
  j.key("command");
  j.str_val("analyze");
  j.key("input");
  j.str_val(o.input);
  j.key("n_endpoints");
  j.num_uint(static_cast<std::uint64_t>(data.n_endpoints));
  j.key("n_t");
  j.num_uint(res.probs.n_t);
  j.key("n_c");
  j.num_uint(res.probs.n_c);
  j.key("config");
  config_echo(j);
  j.key("probabilities");
  j.obj_open();
  j.key("pi_t");
  j.num(res.probs.pi_t);
  j.key("pi_c");
  j.num(res.probs.pi_c);
  j.key("pi_tie");
  j.num(res.probs.pi_tie);
  j.key("raw_pi_t");
  j.num(res.probs.raw_pi_t);
  j.key("raw_pi_c");
  j.num(res.probs.raw_pi_c);
  j.key("raw_pi_tie");
  j.num(res.probs.raw_pi_tie);
  j.key("renormalized");
  j.boolean(res.probs.renormalized);
  j.obj_close();
  j.key("covariance");
  j.obj_open();
  j.key("s_tt");
  j.num(res.cov.s_tt);
  j.key("s_cc");
  j.num(res.cov.s_cc);
  j.key("s_tc");
  j.num(res.cov.s_tc);
  j.obj_close();
  append_inference(j, "win_ratio", res.wr);
  append_inference(j, "win_odds", res.wo);
  append_inference(j, "net_benefit", res.nb);
  j.key("win_ratio_null");
  if (res.null_var_log_wr) {
    j.obj_open();
    j.key("variance");
    j.num(*res.null_var_log_wr);
    j.key("z");
    if (res.wr_null_z)
      j.num(*res.wr_null_z);
    else
      j.null();
    j.key("p_two_sided");
    if (res.wr_null_p_two_sided)
      j.num(*res.wr_null_p_two_sided);
    else
      j.null();
    j.key("p_one_sided");
    if (res.wr_null_p_one_sided)
      j.num(*res.wr_null_p_one_sided);
    else
      j.null();
    j.obj_close();
  } else {
    j.null();
  }
  if (lr) append_logrank(j, *lr);
  j.key("diagnostics");
  j.obj_open();
  j.key("hazard_jumps_dropped");
  j.num_uint(res.diagnostics.hazard_jumps_dropped);
  j.obj_close();
  j.obj_close();
  emit_output(std::move(j).take(), o.out);
  write_manifest(ctx, o.out, "analyze", inputs, std::nullopt, config_echo);
  return 0;
}

// ----- simulate -----

struct SimulateOpts {
  std::string scenario;
  std::string out;
  std::uint64_t reps = 0;
  std::string methods = "ipcw";
  double alpha = 0.05;
  std::string hazard = "km";
  std::string variance = "delta";
  bool no_renormalize = false;
  bool one_sided = false;
  std::uint64_t truth_samples = 1000000;
  std::uint64_t seed = 0;
};

void append_truth(Json& j, const TrueValues& tv) {
  j.key("truth");
  j.obj_open();
  j.key("pi_t");
  j.num(tv.pi_t);
  j.key("se_pi_t");
  j.num(tv.se_pi_t);
  j.key("pi_c");
  j.num(tv.pi_c);
  j.key("se_pi_c");
  j.num(tv.se_pi_c);
  j.key("pi_tie");
  j.num(tv.pi_tie);
  j.key("wr");
  j.num(tv.wr);
  j.key("wo");
  j.num(tv.wo);
  j.key("nb");
  j.num(tv.nb);
  j.key("samples");
  j.num_uint(tv.samples);
  j.obj_close();
}

int cmd_simulate(const Ctx& ctx, const CLI::App* sub, SimulateOpts& o) {
  ScenarioSpec spec = parse_scenario_file(o.scenario);
  if (sub->count("--seed") > 0) spec.seed = o.seed;

  SimulationOptions opt;
  opt.reps = o.reps;
  for (const std::string& name : split(o.methods, ','))
    opt.methods.push_back(method_from_name(trim(name)));
  opt.alpha = o.alpha;
  opt.test_side = o.one_sided ? TestSide::one_sided : TestSide::two_sided;
  opt.hazard_mode = hazard_from_name(o.hazard);
  opt.variance_mode = variance_from_name(o.variance);
  opt.renormalize = !o.no_renormalize;
  opt.truth_samples = o.truth_samples;

  const SimulationResult res = run_replications(spec, opt);

  auto config_echo = [&](Json& j) {
    j.obj_open();
    j.key("n_endpoints");
    j.num_uint(static_cast<std::uint64_t>(spec.n_endpoints));
    j.key("n_t");
    j.num_uint(spec.n_t);
    j.key("n_c");
    j.num_uint(spec.n_c);
    j.key("tau");
    j.num(spec.tau);
    j.key("margins");
    j.arr_open();
    for (double m : spec.margins) j.num(m);
    j.arr_close();
    j.key("reps");
    j.num_uint(o.reps);
    j.key("methods");
    j.arr_open();
    for (Method m : opt.methods) j.str_val(method_name(m));
    j.arr_close();
    j.key("alpha");
    j.num(o.alpha);
    j.key("test_side");
    j.str_val(o.one_sided ? "one_sided" : "two_sided");
    j.key("hazard");
    j.str_val(o.hazard);
    j.key("variance");
    j.str_val(o.variance);
    j.key("renormalize");
    j.boolean(!o.no_renormalize);
    j.key("truth_samples");
    j.num_uint(o.truth_samples);
    j.obj_close();
  };

  Json j;
  j.obj_open();
  j.key("tool");
  j.str_val("winstat");
  j.key("version");
  j.str_val(kVersion);
  j.key("command");
  j.str_val("simulate");
  j.key("scenario");
  j.str_val(o.scenario);
  j.key("seed");
  j.num_uint(spec.seed);
  j.key("config");
  config_echo(j);
  append_truth(j, res.truth);
  j.key("methods");
  j.arr_open();
  for (const MethodSummary& s : res.methods) {
    j.obj_open();
    j.key("method");
    j.str_val(method_name(s.method));
    j.key("n_used");
    j.num_uint(s.n_used);
    j.key("n_degenerate");
    j.num_uint(s.n_degenerate);
    if (s.method == Method::logrank) {
      j.key("reject");
      j.num(s.reject);
    } else {
      j.key("n_wr_missing");
      j.num_uint(s.n_wr_missing);
      j.key("mean_pi_t");
      j.num(s.mean_pi_t);
      j.key("mean_pi_c");
      j.num(s.mean_pi_c);
      j.key("mean_pi_tie");
      j.num(s.mean_pi_tie);
      j.key("win_ratio");
      j.obj_open();
      j.key("mean");
      j.num(s.mean_wr);
      j.key("mean_log");
      j.num(s.mean_log_wr);
      j.key("ese_log");
      j.num(s.ese_log_wr);
      j.key("ase_log");
      j.num(s.ase_log_wr);
      j.key("coverage");
      j.num(s.cp_wr);
      j.key("reject");
      j.num(s.reject_wr);
      j.obj_close();
      j.key("net_benefit");
      j.obj_open();
      j.key("mean");
      j.num(s.mean_nb);
      j.key("ese");
      j.num(s.ese_nb);
      j.key("ase");
      j.num(s.ase_nb);
      j.key("coverage");
      j.num(s.cp_nb);
      j.key("reject");
      j.num(s.reject_nb);
      j.obj_close();
      j.key("win_odds");
      j.obj_open();
      j.key("mean");
      j.num(s.mean_wo);
      j.key("ese_log");
      j.num(s.ese_log_wo);
      j.key("ase_log");
      j.num(s.ase_log_wo);
      j.key("coverage");
      j.num(s.cp_wo);
      j.key("reject");
      j.num(s.reject_wo);
      j.obj_close();
    }
    j.obj_close();
  }
  j.arr_close();
  j.obj_close();
  emit_output(std::move(j).take(), o.out);
  write_manifest(ctx, o.out, "simulate", {o.scenario}, spec.seed, config_echo);
  return 0;
}

// ----- true-values -----

struct TrueValuesOpts {
  std::string scenario;
  std::string out;
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 0;
};

int cmd_true_values(const Ctx& ctx, const CLI::App* sub, TrueValuesOpts& o) {
  if (o.samples < 100000)
    throw ConfigError("--samples must be at least 100000 for a usable truth");
  ScenarioSpec spec = parse_scenario_file(o.scenario);
  const std::uint64_t seed = sub->count("--seed") > 0 ? o.seed : spec.seed;
  const TrueValues tv = true_values_mc(spec, o.samples, seed);

  auto config_echo = [&](Json& j) {
    j.obj_open();
    j.key("n_endpoints");
    j.num_uint(static_cast<std::uint64_t>(spec.n_endpoints));
    j.key("tau");
    j.num(spec.tau);
    j.key("margins");
    j.arr_open();
    for (double m : spec.margins) j.num(m);
    j.arr_close();
    j.key("samples");
    j.num_uint(o.samples);
    j.obj_close();
  };

  Json j;
  j.obj_open();
  j.key("tool");
  j.str_val("winstat");
  j.key("version");
  j.str_val(kVersion);
  j.key("command");
  j.str_val("true-values");
  j.key("scenario");
  j.str_val(o.scenario);
  j.key("seed");
  j.num_uint(seed);
  j.key("config");
  config_echo(j);
  append_truth(j, tv);
  j.obj_close();
  emit_output(std::move(j).take(), o.out);
  write_manifest(ctx, o.out, "true-values", {o.scenario}, seed, config_echo);
  return 0;
}

// ----- dump-censoring-curve -----

struct DumpCurveOpts {
  std::string input;
  std::string group;
  std::string out;
  double tau = 0.0;
};

int cmd_dump_curve(const Ctx& ctx, const CLI::App* sub, DumpCurveOpts& o) {
  Dataset data = read_dataset_csv(o.input);
  if (sub->count("--tau") > 0) {
    if (!(o.tau > 0.0)) throw ConfigError("--tau must be positive");
    data = truncate_at_horizon(data, o.tau);
  }
  validate_dataset(data);
  if (!o.group.empty() && o.group != "t" && o.group != "c")
    throw ConfigError("--group must be t or c");

  std::string csv = "group,time,survival,at_risk,events\n";
  for (const char* gname : {"t", "c"}) {
    if (!o.group.empty() && o.group != gname) continue;
    const Group g = gname[0] == 't' ? Group::treatment : Group::control;
    const std::vector<CensoringRecord> recs = censoring_records(data, g);
    const StepSurvival curve = fit_censoring_survival(recs);
    csv += std::string(gname) + ",0,1," + std::to_string(recs.size()) + ",0\n";
    for (std::size_t k = 0; k < curve.jump_times.size(); ++k) {
      csv += std::string(gname) + "," + fmt_double(curve.jump_times[k]) + "," +
             fmt_double(curve.values[k]) + "," +
             std::to_string(curve.n_at_risk[k]) + "," +
             std::to_string(curve.n_events[k]) + "\n";
    }
  }
  emit_output(csv, o.out);
  write_manifest(ctx, o.out, "dump-censoring-curve", {o.input}, std::nullopt,
                 [&](Json& j) {
                   j.obj_open();
                   j.key("tau");
                   if (sub->count("--tau") > 0)
                     j.num(o.tau);
                   else
                     j.null();
                   j.key("group");
                   j.str_val(o.group.empty() ? "both" : o.group);
                   j.obj_close();
                 });
  return 0;
}

// ----- dump-terms -----

struct DumpTermsOpts {
  std::string out;
  int n_endpoints = 1;
  double zeta = 0.0;
  std::string margins_csv;
};

std::string render_term(const KernelTerm& term) {
  const char* winner = term.weighted == Group::control ? "t" : "c";
  const char* weighted = term.weighted == Group::control ? "c" : "t";
  std::string cmp;
  for (const TermComparison& c : term.comparisons) {
    if (!cmp.empty()) cmp += "; ";
    const std::string e = std::to_string(c.endpoint + 1);
    if (c.kind == ComparisonKind::equals_tau) {
      cmp += std::string("t[") + e + "] = c[" + e + "] = tau";
    } else {
      cmp += std::string(winner) + "[" + e + "] > " + weighted + "[" + e + "]";
      if (c.shift > 0.0) {
        cmp += " + " + fmt_double(c.shift);
      } else if (c.shift < 0.0) {
        cmp += " - " + fmt_double(-c.shift);
      }
    }
  }
  std::string req;
  for (int k : term.delta_mask) {
    if (!req.empty()) req += "; ";
    req += std::string("d_") + weighted + "[" + std::to_string(k + 1) + "]=1";
  }
  const char* dir = term.direction == TermDirection::t_wins   ? "t_wins"
                    : term.direction == TermDirection::c_wins ? "c_wins"
                                                              : "tie";
  return std::string(dir) + "," + std::to_string(term.sign) + "," +
         std::to_string(term.priority) + "," + weighted + "," + cmp + "," +
         req;
}

int cmd_dump_terms(const Ctx& ctx, const CLI::App* sub, DumpTermsOpts& o) {
  if (o.n_endpoints < 1)
    throw ConfigError("--endpoints must be a positive integer");
  const bool have_zeta = sub->count("--zeta") > 0;
  const bool have_margins = sub->count("--margins") > 0;
  if (have_zeta && have_margins)
    throw ConfigError("give either --zeta or --margins, not both");
  std::vector<double> margins(static_cast<std::size_t>(o.n_endpoints), 0.0);
  if (have_zeta) margins.assign(margins.size(), o.zeta);
  if (have_margins) {
    const std::vector<std::string> parts = split(o.margins_csv, ',');
    if (parts.size() != margins.size())
      throw ConfigError("--margins needs one value per endpoint");
    for (std::size_t l = 0; l < parts.size(); ++l)
      margins[l] = parse_double(parts[l], "--margins");
  }
  const MarginMode mode = classify_margins(margins);

  std::string csv = "direction,sign,priority,weighted,comparisons,requires\n";
  for (const KernelTerm& t :
       enumerate_win_terms(o.n_endpoints, margins, mode, TermDirection::t_wins))
    csv += render_term(t) + "\n";
  for (const KernelTerm& t :
       enumerate_win_terms(o.n_endpoints, margins, mode, TermDirection::c_wins))
    csv += render_term(t) + "\n";
  if (mode == MarginMode::positive)
    for (const KernelTerm& t : enumerate_tie_terms(o.n_endpoints, margins))
      csv += render_term(t) + "\n";
  emit_output(csv, o.out);
  write_manifest(ctx, o.out, "dump-terms", {}, std::nullopt, [&](Json& j) {
    j.obj_open();
    j.key("n_endpoints");
    j.num_uint(static_cast<std::uint64_t>(o.n_endpoints));
    j.key("margins");
    j.arr_open();
    for (double m : margins) j.num(m);
    j.arr_close();
    j.obj_close();
  });
  return 0;
}

// ----- logrank -----

struct LogrankOpts {
  std::string input;
  std::string out;
  double tau = 0.0;
};

int cmd_logrank(const Ctx& ctx, const CLI::App* sub, LogrankOpts& o) {
  Dataset data = read_dataset_csv(o.input);
  if (sub->count("--tau") > 0) {
    if (!(o.tau > 0.0)) throw ConfigError("--tau must be positive");
    data = truncate_at_horizon(data, o.tau);
  }
  const LogrankResult lr = logrank_test(data);

  Json j;
  j.obj_open();
  j.key("tool");
  j.str_val("winstat");
  j.key("version");
  j.str_val(kVersion);
  j.key("command");
  j.str_val("logrank");
  j.key("input");
  j.str_val(o.input);
  j.key("n_t");
  j.num_uint(data.count(Group::treatment));
  j.key("n_c");
  j.num_uint(data.count(Group::control));
  j.key("tau");
  if (sub->count("--tau") > 0)
    j.num(o.tau);
  else
    j.null();
  append_logrank(j, lr);
  j.obj_close();
  emit_output(std::move(j).take(), o.out);
  write_manifest(ctx, o.out, "logrank", {o.input}, std::nullopt, [&](Json& j) {
    j.obj_open();
    j.key("tau");
    if (sub->count("--tau") > 0)
      j.num(o.tau);
    else
      j.null();
    j.obj_close();
  });
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  Ctx ctx;
  ctx.argv.assign(argv, argv + argc);
  ctx.start = std::chrono::steady_clock::now();

  CLI::App app{"win statistics for prioritized time-to-event endpoints"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  int threads = -1;
  app.add_option("--threads", threads,
                 "worker threads (0 = all cores; default honors "
                 "WINSTAT_THREADS)");

  AnalyzeOpts ao;
  CLI::App* a = app.add_subcommand(
      "analyze", "estimate win statistics from a CSV dataset");
  a->fallthrough();
  a->add_option("--input", ao.input, "dataset CSV (id,group,x*,d*[,c*])")
      ->required();
  a->add_option("--config", ao.config_file,
                "'key = value' settings file; flags win over file entries");
  a->add_option("--tau", ao.tau, "fixed analysis horizon");
  a->add_option("--tau-auto", ao.tau_quantile,
                "derive the horizon from the censoring curves at this "
                "quantile (default 0.05)");
  a->add_option("--zeta", ao.zeta, "one equivalence margin for every endpoint");
  a->add_option("--margins", ao.margins_csv,
                "comma-separated per-endpoint margins");
  a->add_option("--alpha", ao.alpha, "two-sided level (default 0.05)");
  a->add_option("--hazard", ao.hazard, "censoring hazard mode: km or na");
  a->add_option("--variance", ao.variance, "variance mode: delta or null");
  a->add_flag("--no-renormalize", ao.no_renormalize,
              "keep raw probabilities even when they sum past 1");
  a->add_flag("--naive", ao.naive,
              "pairwise fall-through comparison of observed times "
              "(no censoring adjustment)");
  a->add_flag("--logrank", ao.with_logrank,
              "append a first-event log-rank test to the result");
  a->add_option("--sweep-zeta", ao.sweep,
                "margin grid start:stop:step; emits CSV instead of JSON");
  a->add_option("--out", ao.out, "write the result here instead of stdout");

  SimulateOpts so;
  CLI::App* s = app.add_subcommand(
      "simulate", "replicate trials from a scenario and summarize");
  s->fallthrough();
  s->add_option("--scenario", so.scenario, "scenario file")->required();
  s->add_option("--reps", so.reps, "number of replicates (at least 2)")
      ->required();
  s->add_option("--methods", so.methods,
                "comma list: ipcw,naive,logrank,true_common,true_joint");
  s->add_option("--alpha", so.alpha, "test level (default 0.05)");
  s->add_flag("--one-sided", so.one_sided,
              "count rejections with one-sided p values (treatment better)");
  s->add_option("--hazard", so.hazard, "censoring hazard mode: km or na");
  s->add_option("--variance", so.variance, "variance mode: delta or null");
  s->add_flag("--no-renormalize", so.no_renormalize,
              "keep raw probabilities even when they sum past 1");
  s->add_option("--truth-samples", so.truth_samples,
                "pairs for the truth stream (default 1000000)");
  s->add_option("--seed", so.seed, "override the scenario seed");
  s->add_option("--out", so.out, "write the result here instead of stdout");

  TrueValuesOpts to;
  CLI::App* t = app.add_subcommand(
      "true-values", "estimand values by large-sample pair simulation");
  t->fallthrough();
  t->add_option("--scenario", to.scenario, "scenario file")->required();
  t->add_option("--samples", to.samples,
                "simulated pairs (default 1000000, minimum 100000)");
  t->add_option("--seed", to.seed, "override the scenario seed");
  t->add_option("--out", to.out, "write the result here instead of stdout");

  DumpCurveOpts co;
  CLI::App* c = app.add_subcommand(
      "dump-censoring-curve", "censoring survival curves as CSV");
  c->fallthrough();
  c->add_option("--input", co.input, "dataset CSV")->required();
  c->add_option("--group", co.group, "restrict to one group: t or c");
  c->add_option("--tau", co.tau, "truncate at this horizon first");
  c->add_option("--out", co.out, "write the result here instead of stdout");

  DumpTermsOpts do_;
  CLI::App* d = app.add_subcommand(
      "dump-terms", "list the signed comparison terms for a configuration");
  d->fallthrough();
  d->add_option("--endpoints", do_.n_endpoints, "number of endpoints")
      ->required();
  d->add_option("--zeta", do_.zeta, "one margin for every endpoint");
  d->add_option("--margins", do_.margins_csv,
                "comma-separated per-endpoint margins");
  d->add_option("--out", do_.out, "write the result here instead of stdout");

  LogrankOpts lo;
  CLI::App* l = app.add_subcommand(
      "logrank", "first-event log-rank test from a CSV dataset");
  l->fallthrough();
  l->add_option("--input", lo.input, "dataset CSV")->required();
  l->add_option("--tau", lo.tau, "truncate at this horizon first");
  l->add_option("--out", lo.out, "write the result here instead of stdout");

  try {
    app.parse(argc, argv);
    if (threads >= 0) set_thread_count(static_cast<unsigned>(threads));
    if (*a) return cmd_analyze(ctx, a, ao);
    if (*s) return cmd_simulate(ctx, s, so);
    if (*t) return cmd_true_values(ctx, t, to);
    if (*c) return cmd_dump_curve(ctx, c, co);
    if (*d) return cmd_dump_terms(ctx, d, do_);
    if (*l) return cmd_logrank(ctx, l, lo);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "winstat: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "winstat: %s\n", e.what());
    return 3;
  } catch (const DegenerateError& e) {
    std::fprintf(stderr, "winstat: %s\n", e.what());
    return 4;
  } catch (const IoError& e) {
    std::fprintf(stderr, "winstat: %s\n", e.what());
    return 5;
  }
}

}  // namespace winstat::cli
