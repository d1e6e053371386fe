#include "adpmpc/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace adpmpc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad number for '" + key + "': '" + v + "'");
  return out;
}

long parse_int(const std::string& key, const std::string& v) {
  long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad integer for '" + key + "': '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("bad boolean for '" + key + "': '" + v + "'");
}

// One entry per key: how to read it and how to print it.
struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Get>
Field real_field(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_double(k, v); },
          [get](const RunConfig& c) { return fmt_double(get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Field int_field(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) {
            get(c) = static_cast<std::remove_reference_t<decltype(get(c))>>(parse_int(k, v));
          },
          [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

// Ordered so write_config output is stable.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"name", {[](RunConfig& c, const std::string&, const std::string& v) { c.name = v; },
                [](const RunConfig& c) { return c.name; }}},
      {"controller",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "adp") c.controller = ControllerKind::Adp;
          else if (v == "dmpc") c.controller = ControllerKind::Dmpc;
          else throw ConfigError("bad value for '" + k + "': '" + v + "' (adp or dmpc)");
        },
        [](const RunConfig& c) { return std::string(c.controller == ControllerKind::Adp ? "adp" : "dmpc"); }}},
      {"profile",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "float") c.profile = NumericProfile::Float;
          else if (v == "fixed") c.profile = NumericProfile::Fixed;
          else throw ConfigError("bad value for '" + k + "': '" + v + "' (float or fixed)");
        },
        [](const RunConfig& c) { return std::string(c.profile == NumericProfile::Float ? "float" : "fixed"); }}},
      {"horizon", int_field([](RunConfig& c) -> int& { return c.horizon; })},
      {"lambda_u", real_field([](RunConfig& c) -> double& { return c.lambda_u; })},
      {"parallel", {[](RunConfig& c, const std::string& k, const std::string& v) { c.parallel = parse_bool(k, v); },
                    [](const RunConfig& c) { return std::string(c.parallel ? "1" : "0"); }}},
      {"Rs", real_field([](RunConfig& c) -> double& { return c.params.Rs; })},
      {"Rr", real_field([](RunConfig& c) -> double& { return c.params.Rr; })},
      {"Xls", real_field([](RunConfig& c) -> double& { return c.params.Xls; })},
      {"Xlr", real_field([](RunConfig& c) -> double& { return c.params.Xlr; })},
      {"Xm", real_field([](RunConfig& c) -> double& { return c.params.Xm; })},
      {"Vdc", real_field([](RunConfig& c) -> double& { return c.params.Vdc; })},
      {"omega_r", real_field([](RunConfig& c) -> double& { return c.params.omega_r; })},
      {"Ts", real_field([](RunConfig& c) -> double& { return c.params.Ts; })},
      {"omega_b", real_field([](RunConfig& c) -> double& { return c.params.omega_b; })},
      {"gamma", real_field([](RunConfig& c) -> double& { return c.tuning.gamma; })},
      {"delta", real_field([](RunConfig& c) -> double& { return c.tuning.delta; })},
      {"fsw_target", real_field([](RunConfig& c) -> double& { return c.tuning.fsw_target; })},
      {"r1", real_field([](RunConfig& c) -> double& { return c.tuning.r1; })},
      {"r2", real_field([](RunConfig& c) -> double& { return c.tuning.r2; })},
      {"max_torque", real_field([](RunConfig& c) -> double& { return c.limits.max_torque; })},
      {"rated_amplitude", real_field([](RunConfig& c) -> double& { return c.limits.rated_amplitude; })},
      {"periods", int_field([](RunConfig& c) -> int& { return c.scenario.periods; })},
      {"warmup_periods", int_field([](RunConfig& c) -> int& { return c.scenario.warmup_periods; })},
      {"initial_torque", real_field([](RunConfig& c) -> double& { return c.scenario.initial_torque; })},
      {"initial_angle", real_field([](RunConfig& c) -> double& { return c.scenario.initial_angle; })},
      {"sanity_limit", real_field([](RunConfig& c) -> double& { return c.scenario.sanity_limit; })},
      {"settling_band", real_field([](RunConfig& c) -> double& { return c.scenario.settling_band; })},
      {"fundamental_hz", real_field([](RunConfig& c) -> double& { return c.scenario.fundamental_hz; })},
      {"bellman_iterations", int_field([](RunConfig& c) -> int& { return c.bellman_iterations; })},
      {"ci_bellman_iterations", int_field([](RunConfig& c) -> int& { return c.ci_bellman_iterations; })},
      {"measure", {[](RunConfig& c, const std::string& k, const std::string& v) {
                     if (v != "orbit" && v != "isotropic")
                       throw ConfigError("bad value for '" + k + "': '" + v + "' (orbit or isotropic)");
                     c.measure.kind = v;
                   },
                   [](const RunConfig& c) { return c.measure.kind; }}},
      {"measure_spread", real_field([](RunConfig& c) -> double& { return c.measure.spread; })},
      {"u_prev_variance", real_field([](RunConfig& c) -> double& { return c.measure.u_prev_variance; })},
      {"solver_tolerance", real_field([](RunConfig& c) -> double& { return c.solver_tolerance; })},
      {"seed", {[](RunConfig& c, const std::string& k, const std::string& v) {
                  const long s = parse_int(k, v);
                  if (s < 0) throw ConfigError("seed must be non-negative");
                  c.seed = static_cast<std::uint64_t>(s);
                },
                [](const RunConfig& c) { return std::to_string(c.seed); }}},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return &f;
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  try {
    params.validate();
    tuning.validate();
    scenario.validate(params);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (horizon < 1 || horizon > kMaxHorizon) throw ConfigError("horizon must be between 1 and 3");
  if (!(lambda_u >= 0.0)) throw ConfigError("lambda_u must be non-negative");
  if (bellman_iterations < 1 || ci_bellman_iterations < 1) throw ConfigError("Bellman iterations must be positive");
  if (!(measure.spread >= 0.0) || !(measure.u_prev_variance >= 0.0))
    throw ConfigError("measure variances must be non-negative");
  if (!(solver_tolerance > 0.0)) throw ConfigError("solver_tolerance must be positive");
  if (!(limits.max_torque > 0.0) || !(limits.rated_amplitude >= 0.0)) throw ConfigError("bad reference limits");
  if (std::abs(scenario.initial_torque) > limits.max_torque) throw ConfigError("initial torque exceeds max_torque");
  for (const auto& s : scenario.steps)
    if (std::abs(s.t_star) > limits.max_torque) throw ConfigError("torque step exceeds max_torque");
  if (profile == NumericProfile::Fixed && controller != ControllerKind::Adp)
    throw ConfigError("the fixed-point profile exists for the ADP controller only");
}

std::vector<std::string> preset_names() { return {"table2-n1", "table2-n2", "dmpc-n1", "dmpc-n2", "fig6-steps"}; }

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.name = name;
  // N=2 uses 1.275 times the N=1 delta (5.1 / 4 in the reference tuning);
  // N=1 is scaled so that it switches near 300 Hz with this model and measure.
  if (name == "table2-n1") {
    c.horizon = 1;
    c.tuning.delta = 6.0;
  } else if (name == "table2-n2") {
    c.horizon = 2;
    c.tuning.delta = 7.65;
  } else if (name == "dmpc-n1") {
    c.controller = ControllerKind::Dmpc;
    c.horizon = 1;
    c.lambda_u = 0.00235;
  } else if (name == "dmpc-n2") {
    c.controller = ControllerKind::Dmpc;
    c.horizon = 2;
    c.lambda_u = 0.00690;
  } else if (name == "fig6-steps") {
    c.horizon = 1;
    c.tuning.delta = 6.0;
    c.scenario.periods = 4;
    c.scenario.warmup_periods = 1;
    c.scenario.steps = {{0.030, 0.0}, {0.050, 1.0}};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

RunConfig parse_config(std::istream& is) {
  RunConfig c;
  std::string line;
  int lineno = 0;
  bool any = false;
  bool steps_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "preset") {
      if (any) throw ConfigError("line " + std::to_string(lineno) + ": preset must be the first key");
      c = preset(value);
    } else if (key == "step") {
      std::istringstream ss(value);
      std::string a, b, extra;
      if (!(ss >> a >> b) || (ss >> extra))
        throw ConfigError("line " + std::to_string(lineno) + ": step needs '<time_s> <torque>'");
      if (!steps_seen) c.scenario.steps.clear();
      steps_seen = true;
      c.scenario.steps.push_back({parse_double(key, a), parse_double(key, b)});
    } else if (key == "steps" && value == "none") {
      c.scenario.steps.clear();
      steps_seen = true;
    } else if (const Field* f = find_field(key)) {
      f->set(c, key, value);
    } else {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    any = true;
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

void write_config(const RunConfig& cfg, std::ostream& os) {
  for (const auto& [key, f] : fields()) os << key << " = " << f.get(cfg) << "\n";
  if (cfg.scenario.steps.empty()) os << "steps = none\n";
  for (const auto& s : cfg.scenario.steps) os << "step = " << fmt_double(s.time) << " " << fmt_double(s.t_star) << "\n";
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t config_fingerprint(const RunConfig& cfg) {
  std::ostringstream os;
  write_config(cfg, os);
  return fnv1a(os.str());
}

std::uint64_t tail_fingerprint(const RunConfig& cfg) {
  const PerUnitParams& p = cfg.params;
  const ControllerTuning& t = cfg.tuning;
  std::string s;
  for (double v : {p.Rs, p.Rr, p.Xls, p.Xlr, p.Xm, p.Vdc, p.omega_r, p.Ts, p.omega_b, t.gamma, t.delta, t.fsw_target,
                   t.r1, t.r2, cfg.measure.spread, cfg.measure.u_prev_variance})
    s += fmt_double(v) + ";";
  s += cfg.measure.kind;
  // The orbit measure is built around the rated reference amplitude.
  if (cfg.measure.kind == "orbit") s += ";" + fmt_double(cfg.limits.rated_amplitude);
  return fnv1a(s);
}

BellmanSdp bellman_sdp_for(const RunConfig& cfg, bool ci) {
  BellmanSdp sdp;
  sdp.iterations = ci ? cfg.ci_bellman_iterations : cfg.bellman_iterations;
  if (cfg.measure.kind == "orbit") {
    sdp.moments = MeasureMoments::steady_state_orbit(cfg.params, cfg.limits.rated_amplitude, cfg.measure.spread,
                                                     cfg.measure.u_prev_variance);
  } else {
    sdp.moments = MeasureMoments::operating_point(cfg.measure.spread, cfg.measure.u_prev_variance);
  }
  return sdp;
}

void write_tail(const TailArtifact& a, const RunConfig& cfg, std::ostream& os) {
  const PerUnitParams& p = cfg.params;
  const ControllerTuning& t = cfg.tuning;
  os << "# quadratic tail cost V(z) = z'Pz + 2q'z + r\n";
  os << "fingerprint " << hex64(a.fingerprint) << "\n";
  os << "gamma " << fmt_double(t.gamma) << "\ndelta " << fmt_double(t.delta) << "\nfsw_target "
     << fmt_double(t.fsw_target) << "\nr1 " << fmt_double(t.r1) << "\nr2 " << fmt_double(t.r2) << "\nomega_r "
     << fmt_double(p.omega_r) << "\nVdc " << fmt_double(p.Vdc) << "\n";
  os << "measure " << cfg.measure.kind << "\nmeasure_spread " << fmt_double(cfg.measure.spread)
     << "\nu_prev_variance " << fmt_double(cfg.measure.u_prev_variance) << "\n";
  os << "bellman_iterations " << a.bellman_iterations << "\nobjective " << fmt_double(a.objective) << "\nstatus "
     << a.status << "\n";
  os << "P\n";
  for (int i = 0; i < layout::kNx; ++i) {
    for (int j = 0; j < layout::kNx; ++j) os << (j ? " " : "") << fmt_double(a.tail.P(i, j));
    os << "\n";
  }
  os << "q\n";
  for (int i = 0; i < layout::kNx; ++i) os << (i ? " " : "") << fmt_double(a.tail.q[i]);
  os << "\nr\n" << fmt_double(a.tail.r) << "\n";
}

TailArtifact read_tail(std::istream& is) {
  TailArtifact a;
  std::map<std::string, std::string> header;
  std::string line;
  auto bad = [](const std::string& what) { return ConfigError("malformed tail artifact: " + what); };
  auto read_numbers = [&](int count) {
    std::vector<double> v;
    std::string tok;
    while (static_cast<int>(v.size()) < count && is >> tok) v.push_back(parse_double("tail", tok));
    if (static_cast<int>(v.size()) != count) throw bad("truncated matrix data");
    return v;
  };
  bool have_p = false, have_q = false, have_r = false;
  while (is >> std::ws && std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line == "P") {
      const auto v = read_numbers(layout::kNx * layout::kNx);
      for (int i = 0; i < layout::kNx; ++i)
        for (int j = 0; j < layout::kNx; ++j) a.tail.P(i, j) = v[static_cast<std::size_t>(i * layout::kNx + j)];
      have_p = true;
    } else if (line == "q") {
      const auto v = read_numbers(layout::kNx);
      for (int i = 0; i < layout::kNx; ++i) a.tail.q[i] = v[static_cast<std::size_t>(i)];
      have_q = true;
    } else if (line == "r") {
      a.tail.r = read_numbers(1)[0];
      have_r = true;
    } else {
      const auto sp = line.find(' ');
      if (sp == std::string::npos) throw bad("header line '" + line + "'");
      header[line.substr(0, sp)] = trim(line.substr(sp + 1));
    }
  }
  if (!have_p || !have_q || !have_r) throw bad("missing P, q or r");
  if (!header.count("fingerprint")) throw bad("missing fingerprint");
  const std::string& fp = header["fingerprint"];
  std::uint64_t h = 0;
  const auto [ptr, ec] = std::from_chars(fp.data(), fp.data() + fp.size(), h, 16);
  if (ec != std::errc() || ptr != fp.data() + fp.size()) throw bad("fingerprint '" + fp + "'");
  a.fingerprint = h;
  if (header.count("bellman_iterations"))
    a.bellman_iterations = static_cast<int>(parse_int("bellman_iterations", header["bellman_iterations"]));
  if (header.count("objective")) a.objective = parse_double("objective", header["objective"]);
  if (header.count("status")) a.status = header["status"];
  if (!a.tail.P.allFinite() || !a.tail.q.allFinite() || !std::isfinite(a.tail.r)) throw bad("non-finite entries");
  if (!a.tail.P.isApprox(a.tail.P.transpose(), 1e-9)) throw bad("P is not symmetric");
  return a;
}

TailArtifact load_tail(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tail artifact '" + path + "'");
  return read_tail(in);
}

void check_tail(const TailArtifact& artifact, const RunConfig& cfg) {
  const std::uint64_t expect = tail_fingerprint(cfg);
  if (artifact.fingerprint != expect) {
    throw FingerprintMismatch("tail cost was trained for fingerprint " + hex64(artifact.fingerprint) +
                              " but the configuration has " + hex64(expect) + "; retrain the tail cost");
  }
}

}  // namespace adpmpc
