#include "mrac/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mrac {

namespace {

const char* const kSchemes[] = {"direct_gradient", "indirect_gradient", "lyapunov_direct",
                                "lyapunov_indirect"};

// Collects problems while walking the document so that one pass reports all
// of them.
class Reader {
 public:
  std::vector<std::string> issues;

  void fail(const std::string& path, const std::string& what) {
    issues.push_back(path + ": " + what);
  }

  void known(const Json& obj, const std::string& path, std::set<std::string> keys) {
    if (!obj.is_object()) return;
    for (const auto& [k, v] : obj.items())
      if (!keys.count(k)) fail(path.empty() ? k : path + "." + k, "unknown field");
  }

  bool number(const Json& j, const std::string& path, double& out) {
    if (!j.is_number()) {
      fail(path, "expected a number");
      return false;
    }
    out = j.get<double>();
    if (!std::isfinite(out)) {
      fail(path, "must be finite");
      return false;
    }
    return true;
  }

  // number -> 1x1, flat array -> column, array of arrays -> row-major matrix
  bool matrix(const Json& j, const std::string& path, Matrix& out) {
    if (j.is_number()) {
      double v = 0;
      if (!number(j, path, v)) return false;
      out = Matrix::Constant(1, 1, v);
      return true;
    }
    if (!j.is_array() || j.empty()) {
      fail(path, "expected a number, an array, or an array of rows");
      return false;
    }
    if (!j[0].is_array()) {
      out.resize(static_cast<Index>(j.size()), 1);
      for (std::size_t i = 0; i < j.size(); ++i)
        if (!number(j[i], path + "[" + std::to_string(i) + "]", out(static_cast<Index>(i), 0)))
          return false;
      return true;
    }
    const std::size_t cols = j[0].size();
    if (cols == 0) {
      fail(path, "rows must not be empty");
      return false;
    }
    out.resize(static_cast<Index>(j.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string rp = path + "[" + std::to_string(i) + "]";
      if (!j[i].is_array() || j[i].size() != cols) {
        fail(rp, "every row needs " + std::to_string(cols) + " entries");
        return false;
      }
      for (std::size_t c = 0; c < cols; ++c)
        if (!number(j[i][c], rp + "[" + std::to_string(c) + "]",
                    out(static_cast<Index>(i), static_cast<Index>(c))))
          return false;
    }
    return true;
  }

  bool vector(const Json& j, const std::string& path, Vector& out) {
    Matrix m;
    if (!matrix(j, path, m)) return false;
    if (m.cols() != 1) {
      fail(path, "expected a number or a flat array");
      return false;
    }
    out = m.col(0);
    return true;
  }

  bool boolean(const Json& j, const std::string& path, bool& out) {
    if (!j.is_boolean()) {
      fail(path, "expected true or false");
      return false;
    }
    out = j.get<bool>();
    return true;
  }
};

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(row);
  }
  return rows;
}

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Scheme scheme_from(const std::string& s, bool& ok) {
  ok = true;
  for (int i = 0; i < 4; ++i)
    if (s == kSchemes[i]) return static_cast<Scheme>(i);
  ok = false;
  return Scheme::direct_gradient;
}

void parse_signal(Reader& rd, const Json& j, ReferenceSignal& sig) {
  rd.known(j, "signal", {"channels"});
  if (!j.contains("channels") || !j["channels"].is_array()) {
    rd.fail("signal.channels", "missing required array");
    return;
  }
  for (std::size_t c = 0; c < j["channels"].size(); ++c) {
    const Json& ch = j["channels"][c];
    const std::string path = "signal.channels[" + std::to_string(c) + "]";
    ChannelSignal out;
    const std::string type = ch.value("type", std::string());
    if (type == "sinusoids") {
      rd.known(ch, path, {"type", "terms"});
      out.kind = ChannelSignal::Kind::sinusoids;
      if (!ch.contains("terms") || !ch["terms"].is_array()) {
        rd.fail(path + ".terms", "missing required array");
        continue;
      }
      for (std::size_t t = 0; t < ch["terms"].size(); ++t) {
        const Json& term = ch["terms"][t];
        const std::string tp = path + ".terms[" + std::to_string(t) + "]";
        rd.known(term, tp, {"amplitude", "frequency", "phase"});
        Sinusoid s;
        if (term.contains("amplitude")) rd.number(term["amplitude"], tp + ".amplitude", s.amplitude);
        if (term.contains("frequency")) rd.number(term["frequency"], tp + ".frequency", s.frequency);
        if (term.contains("phase")) rd.number(term["phase"], tp + ".phase", s.phase);
        out.terms.push_back(s);
      }
    } else if (type == "constant") {
      rd.known(ch, path, {"type", "level"});
      out.kind = ChannelSignal::Kind::constant;
      if (ch.contains("level")) rd.number(ch["level"], path + ".level", out.level);
      else rd.fail(path + ".level", "missing required field");
    } else if (type == "samples") {
      rd.known(ch, path, {"type", "values"});
      out.kind = ChannelSignal::Kind::samples;
      Vector v;
      if (!ch.contains("values")) rd.fail(path + ".values", "missing required field");
      else if (rd.vector(ch["values"], path + ".values", v))
        out.samples.assign(v.data(), v.data() + v.size());
    } else {
      rd.fail(path + ".type", "expected sinusoids, constant or samples");
    }
    sig.channels.push_back(std::move(out));
  }
}

Json signal_json(const ReferenceSignal& sig) {
  Json chans = Json::array();
  for (const auto& ch : sig.channels) {
    Json c;
    switch (ch.kind) {
      case ChannelSignal::Kind::sinusoids: {
        c["type"] = "sinusoids";
        Json terms = Json::array();
        for (const auto& s : ch.terms)
          terms.push_back({{"amplitude", s.amplitude}, {"frequency", s.frequency}, {"phase", s.phase}});
        c["terms"] = terms;
        break;
      }
      case ChannelSignal::Kind::constant:
        c["type"] = "constant";
        c["level"] = ch.level;
        break;
      case ChannelSignal::Kind::samples:
        c["type"] = "samples";
        c["values"] = ch.samples;
        break;
    }
    chans.push_back(c);
  }
  return {{"channels", chans}};
}

}  // namespace

ScenarioConfig parse_config(const Json& doc) {
  Reader rd;
  ScenarioConfig cfg;
  if (!doc.is_object()) throw ConfigError({"document: expected a JSON object"});
  rd.known(doc, "", {"name", "scheme", "time_domain", "seed", "random_system", "plant", "reference",
                     "signal", "gains", "projection", "init", "horizon", "ct_step", "integrator",
                     "output"});

  if (doc.contains("name")) {
    if (doc["name"].is_string()) cfg.name = doc["name"].get<std::string>();
    else rd.fail("name", "expected a string");
  }
  if (!doc.contains("scheme")) {
    rd.fail("scheme", "missing required field");
  } else {
    bool ok = doc["scheme"].is_string();
    if (ok) cfg.scheme = scheme_from(doc["scheme"].get<std::string>(), ok);
    if (!ok)
      rd.fail("scheme",
              "expected direct_gradient, indirect_gradient, lyapunov_direct or lyapunov_indirect");
  }
  if (doc.contains("time_domain")) {
    const Json& d = doc["time_domain"];
    if (d == "discrete") cfg.domain = TimeDomain::discrete;
    else if (d == "continuous") cfg.domain = TimeDomain::continuous;
    else rd.fail("time_domain", "expected discrete or continuous");
  } else if (cfg.scheme == Scheme::lyapunov_direct || cfg.scheme == Scheme::lyapunov_indirect) {
    cfg.domain = TimeDomain::continuous;
  }
  if (doc.contains("seed")) {
    if (doc["seed"].is_number_unsigned()) cfg.seed = doc["seed"].get<std::uint64_t>();
    else rd.fail("seed", "expected a nonnegative integer");
  }

  if (doc.contains("random_system")) {
    const Json& r = doc["random_system"];
    RandomFamily f;
    rd.known(r, "random_system", {"states", "inputs", "am_range", "am_radius_max", "bm_range",
                                  "bm_min_singular", "k1_range", "k2_min", "k2_max"});
    for (const char* key : {"states", "inputs"})
      if (r.contains(key)) {
        if (r[key].is_number_unsigned() && r[key].get<long>() >= 1)
          (std::string(key) == "states" ? f.states : f.inputs) = r[key].get<Index>();
        else rd.fail(std::string("random_system.") + key, "expected a positive integer");
      }
    const std::pair<const char*, double*> reals[] = {
        {"am_range", &f.am_range},   {"am_radius_max", &f.am_radius_max},
        {"bm_range", &f.bm_range},   {"bm_min_singular", &f.bm_min_singular},
        {"k1_range", &f.k1_range},   {"k2_min", &f.k2_min},
        {"k2_max", &f.k2_max}};
    for (const auto& [key, dst] : reals)
      if (r.contains(key)) rd.number(r[key], std::string("random_system.") + key, *dst);
    cfg.random = f;
  } else {
    if (!doc.contains("plant")) {
      rd.fail("plant", "missing required section");
    } else {
      const Json& p = doc["plant"];
      rd.known(p, "plant", {"A", "B"});
      if (p.contains("A")) rd.matrix(p["A"], "plant.A", cfg.plant.A);
      else rd.fail("plant.A", "missing required field");
      if (p.contains("B")) rd.matrix(p["B"], "plant.B", cfg.plant.B);
      else rd.fail("plant.B", "missing required field");
    }
    if (!doc.contains("reference")) {
      rd.fail("reference", "missing required section");
    } else {
      const Json& p = doc["reference"];
      rd.known(p, "reference", {"A_m", "B_m"});
      if (p.contains("A_m")) rd.matrix(p["A_m"], "reference.A_m", cfg.ref.A);
      else rd.fail("reference.A_m", "missing required field");
      if (p.contains("B_m")) rd.matrix(p["B_m"], "reference.B_m", cfg.ref.B);
      else rd.fail("reference.B_m", "missing required field");
    }
  }
  cfg.plant.domain = cfg.ref.domain = cfg.domain;

  if (doc.contains("signal")) parse_signal(rd, doc["signal"], cfg.signal);
  else if (!cfg.random) rd.fail("signal", "missing required section");

  if (doc.contains("gains")) {
    const Json& g = doc["gains"];
    rd.known(g, "gains", {"Gamma", "gamma", "signs", "k2_lower", "enforce_diagonal", "xi_in_m",
                          "Gamma1", "Gamma2", "sp_gammas", "alternate_theta1_law", "Q"});
    if (g.contains("Gamma")) {
      const Json& G = g["Gamma"];
      // one matrix, or a list of per-input matrices
      const bool list = G.is_array() && !G.empty() && G[0].is_array() && !G[0].empty() &&
                        G[0][0].is_array();
      if (list) {
        for (std::size_t i = 0; i < G.size(); ++i) {
          Matrix m;
          if (rd.matrix(G[i], "gains.Gamma[" + std::to_string(i) + "]", m))
            cfg.gains.Gamma.push_back(m);
        }
      } else {
        Matrix m;
        if (rd.matrix(G, "gains.Gamma", m)) cfg.gains.Gamma.push_back(m);
      }
    }
    if (g.contains("gamma")) rd.vector(g["gamma"], "gains.gamma", cfg.gains.gamma);
    if (g.contains("signs")) rd.vector(g["signs"], "gains.signs", cfg.gains.signs);
    if (g.contains("k2_lower")) rd.vector(g["k2_lower"], "gains.k2_lower", cfg.gains.k2_lower);
    if (g.contains("sp_gammas")) rd.vector(g["sp_gammas"], "gains.sp_gammas", cfg.gains.sp_gammas);
    if (g.contains("Gamma1")) rd.matrix(g["Gamma1"], "gains.Gamma1", cfg.gains.Gamma1);
    if (g.contains("Gamma2")) rd.matrix(g["Gamma2"], "gains.Gamma2", cfg.gains.Gamma2);
    if (g.contains("Q")) rd.matrix(g["Q"], "gains.Q", cfg.gains.Q);
    bool b = false;
    if (g.contains("enforce_diagonal") && rd.boolean(g["enforce_diagonal"], "gains.enforce_diagonal", b))
      cfg.gains.enforce_diagonal = b;
    if (g.contains("xi_in_m") && rd.boolean(g["xi_in_m"], "gains.xi_in_m", b)) cfg.gains.xi_in_m = b;
    if (g.contains("alternate_theta1_law"))
      rd.boolean(g["alternate_theta1_law"], "gains.alternate_theta1_law",
                 cfg.gains.alternate_theta1_law);
  }

  if (doc.contains("projection")) {
    const Json& p = doc["projection"];
    rd.known(p, "projection", {"enabled", "theta2_lower", "k2_upper", "signs"});
    cfg.projection.present = true;
    if (p.contains("enabled")) rd.boolean(p["enabled"], "projection.enabled", cfg.projection.enabled);
    if (p.contains("theta2_lower"))
      rd.vector(p["theta2_lower"], "projection.theta2_lower", cfg.projection.theta2_lower);
    if (p.contains("k2_upper")) rd.vector(p["k2_upper"], "projection.k2_upper", cfg.projection.k2_upper);
    if (p.contains("signs")) rd.vector(p["signs"], "projection.signs", cfg.projection.signs);
  }

  if (doc.contains("init")) {
    const Json& in = doc["init"];
    rd.known(in, "init", {"x0", "xm0", "x_hat0", "theta0", "rho0", "theta_scale", "rho_scale"});
    if (in.contains("x0")) rd.vector(in["x0"], "init.x0", cfg.init.x0);
    if (in.contains("xm0")) rd.vector(in["xm0"], "init.xm0", cfg.init.xm0);
    if (in.contains("x_hat0")) rd.vector(in["x_hat0"], "init.x_hat0", cfg.init.x_hat0);
    if (in.contains("theta0")) rd.matrix(in["theta0"], "init.theta0", cfg.init.theta0);
    if (in.contains("rho0")) rd.vector(in["rho0"], "init.rho0", cfg.init.rho0);
    double v = 0;
    if (in.contains("theta_scale") && rd.number(in["theta_scale"], "init.theta_scale", v))
      cfg.init.theta_scale = v;
    if (in.contains("rho_scale") && rd.number(in["rho_scale"], "init.rho_scale", v))
      cfg.init.rho_scale = v;
  }

  if (doc.contains("horizon")) {
    if (doc["horizon"].is_number_integer() && doc["horizon"].get<long>() >= 0)
      cfg.horizon = doc["horizon"].get<long>();
    else rd.fail("horizon", "expected a nonnegative integer");
  }
  if (doc.contains("ct_step")) {
    if (rd.number(doc["ct_step"], "ct_step", cfg.ct_step) && !(cfg.ct_step > 0.0))
      rd.fail("ct_step", "must be positive");
  }
  if (doc.contains("integrator")) {
    const Json& m = doc["integrator"];
    if (m == "rk4") cfg.integrator = Integrator::rk4;
    else if (m == "euler") cfg.integrator = Integrator::euler;
    else rd.fail("integrator", "expected rk4 or euler");
  }
  if (doc.contains("output")) {
    const Json& o = doc["output"];
    rd.known(o, "output", {"trace", "summary", "plot", "params"});
    if (o.contains("trace")) rd.boolean(o["trace"], "output.trace", cfg.output.trace);
    if (o.contains("summary")) rd.boolean(o["summary"], "output.summary", cfg.output.summary);
    if (o.contains("plot")) rd.boolean(o["plot"], "output.plot", cfg.output.plot);
    if (o.contains("params")) rd.boolean(o["params"], "output.params", cfg.output.params);
  }

  if (!rd.issues.empty()) throw ConfigError(std::move(rd.issues));
  return cfg;
}

ScenarioConfig parse_config_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& err) {
    const std::size_t upto = std::min<std::size_t>(err.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    std::string msg = err.what();
    const auto cut = msg.find("parse error");
    if (cut != std::string::npos) msg = msg.substr(cut);
    throw ConfigError({"line " + std::to_string(line) + ": " + msg});
  }
  return parse_config(doc);
}

Json to_json(const ScenarioConfig& cfg) {
  Json j;
  j["name"] = cfg.name;
  j["scheme"] = to_string(cfg.scheme);
  j["time_domain"] = to_string(cfg.domain);
  j["seed"] = cfg.seed;
  if (cfg.random) {
    const RandomFamily& f = *cfg.random;
    j["random_system"] = {{"states", f.states},         {"inputs", f.inputs},
                          {"am_range", f.am_range},     {"am_radius_max", f.am_radius_max},
                          {"bm_range", f.bm_range},     {"bm_min_singular", f.bm_min_singular},
                          {"k1_range", f.k1_range},     {"k2_min", f.k2_min},
                          {"k2_max", f.k2_max}};
  } else {
    j["plant"] = {{"A", matrix_json(cfg.plant.A)}, {"B", matrix_json(cfg.plant.B)}};
    j["reference"] = {{"A_m", matrix_json(cfg.ref.A)}, {"B_m", matrix_json(cfg.ref.B)}};
  }
  if (!cfg.signal.channels.empty()) j["signal"] = signal_json(cfg.signal);

  Json g = Json::object();
  if (cfg.gains.Gamma.size() == 1) g["Gamma"] = matrix_json(cfg.gains.Gamma[0]);
  else if (cfg.gains.Gamma.size() > 1) {
    Json list = Json::array();
    for (const auto& G : cfg.gains.Gamma) list.push_back(matrix_json(G));
    g["Gamma"] = list;
  }
  if (cfg.gains.gamma.size()) g["gamma"] = vector_json(cfg.gains.gamma);
  if (cfg.gains.signs.size()) g["signs"] = vector_json(cfg.gains.signs);
  if (cfg.gains.k2_lower.size()) g["k2_lower"] = vector_json(cfg.gains.k2_lower);
  if (cfg.gains.sp_gammas.size()) g["sp_gammas"] = vector_json(cfg.gains.sp_gammas);
  if (cfg.gains.Gamma1.size()) g["Gamma1"] = matrix_json(cfg.gains.Gamma1);
  if (cfg.gains.Gamma2.size()) g["Gamma2"] = matrix_json(cfg.gains.Gamma2);
  if (cfg.gains.Q.size()) g["Q"] = matrix_json(cfg.gains.Q);
  if (cfg.gains.enforce_diagonal) g["enforce_diagonal"] = *cfg.gains.enforce_diagonal;
  if (cfg.gains.xi_in_m) g["xi_in_m"] = *cfg.gains.xi_in_m;
  if (cfg.gains.alternate_theta1_law) g["alternate_theta1_law"] = true;
  if (!g.empty()) j["gains"] = g;

  if (cfg.projection.present) {
    Json p = {{"enabled", cfg.projection.enabled}};
    if (cfg.projection.theta2_lower.size())
      p["theta2_lower"] = vector_json(cfg.projection.theta2_lower);
    if (cfg.projection.k2_upper.size()) p["k2_upper"] = vector_json(cfg.projection.k2_upper);
    if (cfg.projection.signs.size()) p["signs"] = vector_json(cfg.projection.signs);
    j["projection"] = p;
  }

  Json in = Json::object();
  if (cfg.init.x0.size()) in["x0"] = vector_json(cfg.init.x0);
  if (cfg.init.xm0.size()) in["xm0"] = vector_json(cfg.init.xm0);
  if (cfg.init.x_hat0.size()) in["x_hat0"] = vector_json(cfg.init.x_hat0);
  if (cfg.init.theta0.size()) in["theta0"] = matrix_json(cfg.init.theta0);
  if (cfg.init.rho0.size()) in["rho0"] = vector_json(cfg.init.rho0);
  if (cfg.init.theta_scale) in["theta_scale"] = *cfg.init.theta_scale;
  if (cfg.init.rho_scale) in["rho_scale"] = *cfg.init.rho_scale;
  if (!in.empty()) j["init"] = in;

  j["horizon"] = cfg.horizon;
  j["ct_step"] = cfg.ct_step;
  j["integrator"] = to_string(cfg.integrator);
  j["output"] = {{"trace", cfg.output.trace},
                 {"summary", cfg.output.summary},
                 {"plot", cfg.output.plot},
                 {"params", cfg.output.params}};
  return j;
}

std::string serialize(const ScenarioConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

bool ScenarioConfig::operator==(const ScenarioConfig& other) const {
  return to_json(*this) == to_json(other);
}

// ---------------------------------------------------------------------------

namespace {

Vector replicate(const Vector& v, Index M) {
  if (v.size() == 1 && M > 1) return Vector::Constant(M, v(0));
  return v;
}

Vector signs_of(const Vector& v) {
  return v.unaryExpr([](double d) { return d >= 0.0 ? 1.0 : -1.0; });
}

Matrix scaled_or(const std::optional<double>& scale, const Matrix& truth, bool have_truth,
                 const Matrix& explicit_value, const char* field, std::vector<std::string>& issues) {
  if (explicit_value.size()) return explicit_value;
  if (!scale) return Matrix();
  if (!have_truth) {
    issues.push_back(std::string("init.") + field +
                     ": the scale shorthand needs a matchable plant");
    return Matrix();
  }
  return *scale * truth;
}

}  // namespace

ResolvedScenario resolve(const ScenarioConfig& cfg) {
  ResolvedScenario out;
  out.scheme = cfg.scheme;
  std::vector<std::string> issues;

  PlantModel plant = cfg.plant;
  ReferenceModel ref = cfg.ref;
  ReferenceSignal signal = cfg.signal;
  if (cfg.random) {
    if (cfg.domain != TimeDomain::discrete)
      throw ValidationError({"random_system: the random family is discrete-time only"});
    const RandomSystem sys = random_matchable_system(cfg.seed, *cfg.random);
    plant = sys.plant;
    ref = sys.ref;
    if (signal.channels.empty()) signal = mimo_reference(ref.inputs());
  }
  plant.domain = ref.domain = cfg.domain;

  {
    auto pi = plant_issues(plant);
    auto ri = reference_issues(ref);
    pi.insert(pi.end(), ri.begin(), ri.end());
    if (pi.empty() && (plant.states() != ref.states() || plant.inputs() != ref.inputs()))
      pi.push_back("plant and reference model dimensions differ");
    if (!pi.empty()) throw ValidationError(std::move(pi));
  }
  const Index n = ref.states();
  const Index M = ref.inputs();

  try {
    MatchingSolution m = solve_matching(plant, ref);
    if (m.matchable) {
      Matrix off = m.K2;
      off.diagonal().setZero();
      if (M > 1 && off.cwiseAbs().maxCoeff() > 1e-9)
        out.notes.push_back("K2* is not diagonal; truth-based diagnostics are disabled");
      else
        out.matching = m;
    } else {
      out.notes.push_back("plant not matchable (residual " + std::to_string(m.residual) +
                          "); V columns are not available");
    }
  } catch (const Error& err) {
    out.notes.push_back(std::string("matching unavailable: ") + err.what());
  }
  const bool truth = out.matching.has_value();
  const Vector k2diag = truth ? Vector(out.matching->K2.diagonal()) : Vector();
  const Matrix Q = cfg.gains.Q.size() ? cfg.gains.Q : Matrix(Matrix::Identity(n, n));
  const bool diag_default = cfg.gains.enforce_diagonal.value_or(true);

  auto projection = [&]() {
    ProjectionConfig p;
    const auto& c = cfg.projection;
    if (c.present && !c.enabled) {
      p.enabled = false;
      if (c.theta2_lower.size()) p.theta2_lower = replicate(c.theta2_lower, M);
      return p;
    }
    if (c.theta2_lower.size()) p.theta2_lower = replicate(c.theta2_lower, M);
    else if (c.k2_upper.size()) p.theta2_lower = replicate(c.k2_upper, M).cwiseInverse();
    else if (truth) p.theta2_lower = 0.5 * k2diag.cwiseAbs().cwiseInverse();
    if (c.signs.size()) p.signs = replicate(c.signs, M);
    else if (cfg.gains.signs.size()) p.signs = replicate(cfg.gains.signs, M);
    else if (truth) p.signs = signs_of(k2diag);
    if (!p.theta2_lower.size() || !p.signs.size()) {
      if (c.present) issues.push_back("projection: needs theta2_lower (or k2_upper) and signs");
      p.enabled = false;
    }
    return p;
  };

  switch (cfg.scheme) {
    case Scheme::direct_gradient: {
      DirectScenario sc;
      sc.plant = plant;
      sc.ref = ref;
      sc.signal = signal;
      DirectGainConfig& g = sc.gains;
      g.domain = cfg.domain;
      g.enforce_diagonal = diag_default;
      const bool defaults = cfg.random && cfg.gains.Gamma.empty() && !cfg.gains.gamma.size();
      if (defaults) {
        const RandomSystem sys = random_matchable_system(cfg.seed, *cfg.random);
        const DirectScenario d = random_direct_scenario(sys, cfg.horizon);
        g = d.gains;
        g.enforce_diagonal = diag_default;
      } else {
        g.Gamma = cfg.gains.Gamma;
        if (g.Gamma.size() == 1 && M > 1) g.Gamma.assign(static_cast<std::size_t>(M), g.Gamma[0]);
        g.gamma = replicate(cfg.gains.gamma, M);
        if (cfg.gains.signs.size()) g.signs = replicate(cfg.gains.signs, M);
        else if (truth) g.signs = signs_of(k2diag);
        if (cfg.gains.k2_lower.size()) g.k2_lower = replicate(cfg.gains.k2_lower, M);
        else if (truth) g.k2_lower = k2diag.cwiseAbs();
        if (g.Gamma.empty()) issues.push_back("gains.Gamma: missing required field");
        if (!g.gamma.size()) issues.push_back("gains.gamma: missing required field");
        if (!g.signs.size()) issues.push_back("gains.signs: required when the plant is not matchable");
      }
      if (truth) sc.truth = direct_truth(*out.matching);
      const DirectTruth t = truth ? *sc.truth : DirectTruth{};
      sc.theta0 = scaled_or(cfg.init.theta_scale, t.theta, truth, cfg.init.theta0, "theta_scale", issues);
      const Matrix rho0 =
          scaled_or(cfg.init.rho_scale ? cfg.init.rho_scale : cfg.init.theta_scale, Matrix(t.rho),
                    truth, Matrix(cfg.init.rho0), "rho_scale", issues);
      if (rho0.size()) sc.rho0 = rho0.col(0);
      if (defaults && !cfg.init.theta0.size() && !cfg.init.theta_scale && truth) {
        sc.theta0 = 1.25 * t.theta;
        sc.rho0 = 1.25 * t.rho;
      }
      sc.x0 = cfg.init.x0;
      sc.xm0 = cfg.init.xm0;
      sc.horizon = cfg.horizon;
      sc.h = cfg.ct_step;
      sc.integrator = cfg.integrator;
      out.body = std::move(sc);
      break;
    }
    case Scheme::indirect_gradient: {
      IndirectScenario sc;
      sc.plant = plant;
      sc.ref = ref;
      sc.signal = signal;
      IndirectGainConfig& g = sc.gains;
      g.domain = cfg.domain;
      g.enforce_diagonal = diag_default;
      g.xi_in_m = cfg.gains.xi_in_m;
      const bool defaults = cfg.random && cfg.gains.Gamma.empty() && !cfg.gains.Gamma1.size();
      if (defaults) {
        const RandomSystem sys = random_matchable_system(cfg.seed, *cfg.random);
        const IndirectScenario d = random_indirect_scenario(sys, cfg.horizon);
        g.Gamma = d.gains.Gamma;
        if (!cfg.projection.present) sc.projection = d.projection;
        else sc.projection = projection();
      } else {
        g.Gamma = cfg.gains.Gamma;
        if (g.Gamma.empty() && cfg.gains.Gamma1.size() && cfg.gains.Gamma2.size()) {
          Matrix G2 = cfg.gains.Gamma2;
          if (G2.cols() == 1 && G2.rows() == M && M > 1) G2 = Matrix(G2.col(0).asDiagonal());
          if (cfg.gains.Gamma1.rows() == n && G2.rows() == M && G2.cols() == M) {
            Matrix G = Matrix::Zero(n + M, n + M);
            G.topLeftCorner(n, n) = cfg.gains.Gamma1;
            G.bottomRightCorner(M, M) = G2;
            g.Gamma.assign(static_cast<std::size_t>(M), G);
          } else {
            issues.push_back("gains: Gamma1 must be n x n and Gamma2 M x M");
          }
        }
        if (g.Gamma.size() == 1 && M > 1) g.Gamma.assign(static_cast<std::size_t>(M), g.Gamma[0]);
        if (g.Gamma.empty()) issues.push_back("gains.Gamma: missing required field");
        sc.projection = projection();
      }
      if (truth) sc.truth = indirect_truth(*out.matching);
      sc.theta0 = scaled_or(cfg.init.theta_scale, truth ? sc.truth->theta : Matrix(), truth,
                            cfg.init.theta0, "theta_scale", issues);
      if (defaults && !cfg.init.theta0.size() && !cfg.init.theta_scale && truth)
        sc.theta0 = 1.25 * sc.truth->theta;
      sc.x0 = cfg.init.x0;
      sc.xm0 = cfg.init.xm0;
      sc.x_hat0 = cfg.init.x_hat0;
      sc.horizon = cfg.horizon;
      sc.h = cfg.ct_step;
      sc.integrator = cfg.integrator;
      out.body = std::move(sc);
      break;
    }
    case Scheme::lyapunov_direct:
    case Scheme::lyapunov_indirect: {
      if (cfg.domain != TimeDomain::continuous)
        throw ValidationError({"time_domain: Lyapunov schemes are continuous-time only"});
      LyapunovScenario sc;
      sc.plant = plant;
      sc.ref = ref;
      sc.signal = signal;
      sc.Q = Q;
      sc.horizon = cfg.horizon;
      sc.h = cfg.ct_step;
      sc.integrator = cfg.integrator;
      sc.x0 = cfg.init.x0;
      sc.xm0 = cfg.init.xm0;
      sc.x_hat0 = cfg.init.x_hat0;
      if (truth) sc.truth = out.matching;
      Matrix theta_star;
      if (cfg.scheme == Scheme::lyapunov_direct) {
        sc.variant = LyapunovVariant::direct;
        auto& g = sc.direct;
        g.Gamma1 = cfg.gains.Gamma1.size() ? cfg.gains.Gamma1
                   : cfg.gains.Gamma.size() ? cfg.gains.Gamma[0]
                                            : Matrix(Matrix::Identity(n, n));
        if (cfg.gains.Gamma2.size()) g.Gamma2 = cfg.gains.Gamma2;
        else if (cfg.gains.gamma.size()) g.Gamma2 = Matrix(replicate(cfg.gains.gamma, M).asDiagonal());
        else g.Gamma2 = Matrix::Identity(M, M);
        Vector signs = cfg.gains.signs.size() ? replicate(cfg.gains.signs, M)
                       : truth               ? signs_of(k2diag)
                                             : Vector();
        if (!signs.size()) {
          issues.push_back("gains.signs: required when the plant is not matchable");
          signs = Vector::Ones(M);
        }
        const Vector spg = cfg.gains.sp_gammas.size() ? replicate(cfg.gains.sp_gammas, M)
                                                      : Vector(Vector::Ones(M));
        if (spg.size() == signs.size()) g.Sp = make_sp(signs, spg);
        else issues.push_back("gains.sp_gammas: need one entry per input");
        if (truth) {
          theta_star.resize(n + M, M);
          theta_star.topRows(n) = out.matching->K1;
          theta_star.bottomRows(M) = out.matching->K2.transpose();
        }
      } else {
        sc.variant = LyapunovVariant::indirect;
        auto& g = sc.indirect;
        g.alternate_theta1_law = cfg.gains.alternate_theta1_law;
        g.enforce_diagonal = diag_default;
        const Index g1 = g.alternate_theta1_law ? M : n;
        g.Gamma1 = cfg.gains.Gamma1.size() ? cfg.gains.Gamma1 : Matrix(Matrix::Identity(g1, g1));
        if (cfg.gains.Gamma2.size()) {
          g.Gamma2 = cfg.gains.Gamma2;
          if (g.Gamma2.cols() == 1 && g.Gamma2.rows() == M && M > 1)
            g.Gamma2 = Matrix(g.Gamma2.col(0).asDiagonal());
        } else if (cfg.gains.gamma.size()) {
          g.Gamma2 = Matrix(replicate(cfg.gains.gamma, M).asDiagonal());
        } else {
          g.Gamma2 = Matrix::Identity(M, M);
        }
        sc.projection = projection();
        if (truth) theta_star = indirect_truth(*out.matching).theta;
      }
      sc.theta0 = scaled_or(cfg.init.theta_scale, theta_star, truth, cfg.init.theta0,
                            "theta_scale", issues);
      out.body = std::move(sc);
      break;
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return out;
}

std::vector<std::string> config_issues(const ScenarioConfig& cfg) {
  std::vector<std::string> issues;
  const bool lyap = cfg.scheme == Scheme::lyapunov_direct || cfg.scheme == Scheme::lyapunov_indirect;
  if (lyap && cfg.domain != TimeDomain::continuous)
    issues.push_back("time_domain: Lyapunov schemes are continuous-time only");
  if (!issues.empty()) return issues;
  ResolvedScenario r;
  try {
    r = resolve(cfg);
  } catch (const ValidationError& err) {
    return err.issues();
  } catch (const Error& err) {
    return {err.what()};
  }
  std::visit([&](const auto& sc) { issues = scenario_issues(sc); }, r.body);
  return issues;
}

ScenarioConfig load_config_json(const Json& doc) {
  ScenarioConfig cfg = parse_config(doc);
  auto issues = config_issues(cfg);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return cfg;
}

ScenarioConfig load_config_text(const std::string& text) {
  ScenarioConfig cfg = parse_config_text(text);
  auto issues = config_issues(cfg);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open file"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str());
}

// ---------------------------------------------------------------------------

InvariantReport check_invariants(const SimulationTrace& trace, const ResolvedScenario& sc) {
  InvariantReport rep;
  const Index n = trace.states;
  const Index M = trace.inputs;
  if (trace.has_V) {
    rep.evaluated = true;
    const double tol = trace.domain == TimeDomain::discrete ? kDiscreteDeltaVTolerance
                                                            : kContinuousDeltaVTolerance;
    const auto chk = check_delta_V(lyapunov_series(trace), trace.gamma0, tol);
    if (!chk.pass) {
      rep.delta_v = false;
      rep.violations.push_back("Lyapunov increment bound violated first at step " +
                               std::to_string(chk.first_violation));
    }
  }

  const ProjectionConfig* proj = nullptr;
  bool diag = false;
  if (const auto* d = std::get_if<DirectScenario>(&sc.body)) diag = d->gains.enforce_diagonal;
  if (const auto* i = std::get_if<IndirectScenario>(&sc.body)) {
    diag = i->gains.enforce_diagonal;
    proj = &i->projection;
  }
  if (const auto* l = std::get_if<LyapunovScenario>(&sc.body)) {
    if (l->variant == LyapunovVariant::indirect) {
      diag = l->indirect.enforce_diagonal;
      proj = &l->projection;
    }
  }
  diag = diag && M > 1;

  for (const auto& r : trace.records) {
    if (proj && proj->enabled && rep.projection) {
      for (Index j = 0; j < M; ++j) {
        const double v = r.theta(n + j, j);
        if (!(proj->signs(j) * v >= proj->theta2_lower(j))) {
          rep.projection = false;
          rep.violations.push_back("theta2 left the admissible set at step " +
                                   std::to_string(r.step));
          break;
        }
      }
      if (rep.projection && !std::isnan(r.proj_product) && r.proj_product > kProjectionTolerance) {
        rep.projection = false;
        rep.violations.push_back("projection inequality violated at step " + std::to_string(r.step));
      }
    }
    if (diag && rep.diagonal) {
      for (Index j = 0; j < M; ++j)
        for (Index k = 0; k < M; ++k)
          if (k != j && r.theta(n + k, j) != 0.0) rep.diagonal = false;
      if (!rep.diagonal)
        rep.violations.push_back("off-diagonal gain entry nonzero at step " + std::to_string(r.step));
    }
  }
  return rep;
}

RunOutcome run(const ResolvedScenario& sc) {
  RunOutcome out;
  out.notes = sc.notes;
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, DirectScenario>) out.trace = run_direct_scenario(body);
        else if constexpr (std::is_same_v<T, IndirectScenario>) out.trace = run_indirect_scenario(body);
        else out.trace = run_lyapunov_scenario(body);
      },
      sc.body);
  out.invariants = check_invariants(out.trace, sc);
  return out;
}

RunOutcome run(const ScenarioConfig& cfg) { return run(resolve(cfg)); }

Json paper_example_config() {
  return Json::parse(R"({
  "name": "paper_direct",
  "scheme": "direct_gradient",
  "time_domain": "discrete",
  "plant": {"A": [[1, -1], [2, 1]], "B": [[0], [2]]},
  "reference": {"A_m": [[1, -1], [1.05, -1.2]], "B_m": [[0], [1]]},
  "signal": {"channels": [{"type": "sinusoids", "terms": [{"amplitude": 1, "frequency": 0.13, "phase": 0}]}]},
  "gains": {"Gamma": [[0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5]], "gamma": 1.5, "signs": [1], "k2_lower": [0.5]},
  "init": {"x0": [0, 0], "xm0": [0, 0], "theta_scale": 1.25, "rho_scale": 1.25},
  "horizon": 5000,
  "output": {"trace": true, "summary": true, "plot": false, "params": false}
})");
}

}  // namespace mrac
