#pragma once

// Command-line front end: configuration, commands, sweep emission.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ahgeo/capacity.hpp"
#include "ahgeo/collar.hpp"
#include "ahgeo/curvature.hpp"
#include "ahgeo/relvol.hpp"

namespace ahgeo::cli {

enum ExitCode : int { kOk = 0, kAuditFailure = 1, kUsage = 2, kNumeric = 3 };

/// Bad configuration or arguments; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  nlohmann::json model;
  std::string command;
  std::string audit;                  // audit: lipschitz | rigidity | height | upper | capacity | einstein
  nlohmann::json point = "core";      // "core", "pole", a number t, or {"t", "angle", "direction"}
  std::optional<double> p;
  std::optional<std::string> t_grid;  // a:b:step
  std::optional<double> eps;
  int samples = 50;
  int N = 1024;
  std::string method = "auto";        // relvol: auto | boundary | extrapolate
  std::string format = "json";
  std::string out;
  std::uint64_t seed = 0;
  std::optional<double> tol_quad, tol_ode;

  nlohmann::json to_json() const {
    nlohmann::json j{{"model", model},     {"command", command}, {"point", point},   {"samples", samples},
                     {"N", N},             {"method", method},   {"format", format}, {"out", out},
                     {"seed", seed}};
    if (!audit.empty()) j["audit"] = audit;
    if (p) j["p"] = *p;
    if (t_grid) j["t_grid"] = *t_grid;
    if (eps) j["eps"] = *eps;
    if (tol_quad) j["tol_quad"] = *tol_quad;
    if (tol_ode) j["tol_ode"] = *tol_ode;
    return j;
  }

  static RunConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    static const std::vector<std::string> known{"model",  "command", "audit",  "point", "p",        "t_grid",
                                                "eps",    "samples", "N",      "method", "format",  "out",
                                                "seed",   "tol_quad", "tol_ode"};
    for (const auto& [k, v] : j.items()) {
      if (std::find(known.begin(), known.end(), k) == known.end()) throw UsageError("config: unknown key \"" + k + "\"");
    }
    RunConfig c;
    auto str = [&](const char* k, std::string& dst) {
      if (!j.contains(k)) return;
      if (!j.at(k).is_string()) throw UsageError(std::string("config: \"") + k + "\" must be a string");
      dst = j.at(k).get<std::string>();
    };
    auto num = [&](const char* k, std::optional<double>& dst) {
      if (!j.contains(k)) return;
      if (!j.at(k).is_number()) throw UsageError(std::string("config: \"") + k + "\" must be a number");
      dst = j.at(k).get<double>();
    };
    auto integer = [&](const char* k, int& dst) {
      if (!j.contains(k)) return;
      if (!j.at(k).is_number_integer()) throw UsageError(std::string("config: \"") + k + "\" must be an integer");
      dst = j.at(k).get<int>();
    };
    if (j.contains("model")) c.model = j.at("model");
    str("command", c.command);
    str("audit", c.audit);
    if (j.contains("point")) c.point = j.at("point");
    num("p", c.p);
    if (j.contains("t_grid")) {
      if (!j.at("t_grid").is_string()) throw UsageError("config: \"t_grid\" must be a string a:b:step");
      c.t_grid = j.at("t_grid").get<std::string>();
    }
    num("eps", c.eps);
    integer("samples", c.samples);
    integer("N", c.N);
    str("method", c.method);
    str("format", c.format);
    str("out", c.out);
    if (j.contains("seed")) {
      if (!j.at("seed").is_number_unsigned()) throw UsageError("config: \"seed\" must be a nonnegative integer");
      c.seed = j.at("seed").get<std::uint64_t>();
    }
    num("tol_quad", c.tol_quad);
    num("tol_ode", c.tol_ode);
    return c;
  }
};

/// Accepts a JSON descriptor or the shorthand hyperbolic:n, fermi:n:lambda, ads:m.
inline nlohmann::json parse_model_arg(const std::string& s) {
  if (!s.empty() && s.front() == '{') {
    try {
      return nlohmann::json::parse(s);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("--model: ") + e.what());
    }
  }
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
  auto number = [&](std::size_t i) {
    try {
      std::size_t used = 0;
      const double v = std::stod(parts.at(i), &used);
      if (used != parts[i].size()) throw std::invalid_argument(parts[i]);
      return v;
    } catch (const std::exception&) {
      throw UsageError("--model: cannot read \"" + s + "\"");
    }
  };
  if (parts.size() == 2 && parts[0] == "hyperbolic") return {{"model", "hyperbolic"}, {"n", static_cast<int>(number(1))}};
  if (parts.size() == 3 && parts[0] == "fermi") {
    return {{"model", "fermi"}, {"n", static_cast<int>(number(1))}, {"lambda", number(2)}};
  }
  if (parts.size() == 2 && parts[0] == "ads") return {{"model", "ads"}, {"m", number(1)}};
  throw UsageError("--model: expected JSON or hyperbolic:n | fermi:n:lambda | ads:m, got \"" + s + "\"");
}

/// Inclusive grid a, a + step, ..., b.
inline std::vector<double> parse_grid(const std::string& s) {
  double a = 0, b = 0, h = 0;
  char c1 = 0, c2 = 0;
  std::istringstream is(s);
  if (!(is >> a >> c1 >> b >> c2 >> h) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof()) {
    throw UsageError("--t-grid: expected a:b:step, got \"" + s + "\"");
  }
  if (!(h > 0.0) || !(b >= a) || !std::isfinite(a) || !std::isfinite(b)) {
    throw UsageError("--t-grid: need step > 0 and b >= a");
  }
  const auto count = static_cast<long>(std::floor((b - a) / h + 1e-9)) + 1;
  if (count > 100000) throw UsageError("--t-grid: too many points");
  std::vector<double> g;
  for (long i = 0; i < count; ++i) g.push_back(a + i * h);
  return g;
}

inline ModelPoint parse_point(const ModelMetric& model, const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "core" || s == "pole") return make_point(model, 0.0);
    if (!s.empty() && s.front() == '{') {
      try {
        return parse_point(model, nlohmann::json::parse(s));
      } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(std::string("--point: ") + e.what());
      }
    }
    try {
      std::size_t used = 0;
      const double t = std::stod(s, &used);
      if (used == s.size()) return parse_point(model, nlohmann::json(t));
    } catch (const std::exception&) {
    }
    throw UsageError("--point: expected core, pole, a radius, or a JSON object; got \"" + s + "\"");
  }
  ModelPoint q;
  try {
    if (j.is_number()) {
      q = make_point(model, j.get<double>());
    } else if (j.is_object()) {
      q = make_point(model, j.value("t", 0.0), j.value("angle", 0.0));
      if (j.contains("direction")) q.direction = j.at("direction").get<std::vector<double>>();
    } else {
      throw UsageError("point must be a string, number or object");
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("point: ") + e.what());
  }
  validate(model, q);
  return q;
}

inline nlohmann::json point_json(const ModelPoint& q) {
  return {{"t", q.t}, {"angle", q.angle}, {"direction", q.direction}};
}

// ---------------------------------------------------------------------------
// Determinism and parallelism

/// Uniform doubles and normals from the raw mt19937_64 stream, so the draws
/// do not depend on the standard library's distribution implementations.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double normal() {
    double u = 0.0;
    while (u == 0.0) u = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * pi * uniform());
  }
  ModelPoint point(const ModelMetric& model, double t_max) {
    ModelPoint q = make_point(model, t_max * uniform(), 2.0 * pi * uniform());
    double s = 0.0;
    for (auto& x : q.direction) {
      x = normal();
      s += x * x;
    }
    for (auto& x : q.direction) x /= std::sqrt(s);
    return q;
  }
  /// A point near x: Gaussian steps of size `scale` in t, angle and direction.
  ModelPoint near(const ModelPoint& x, double scale) {
    ModelPoint q = x;
    q.t = std::abs(x.t + scale * normal());
    q.angle = wrap_angle(x.angle + scale * normal());
    double s = 0.0;
    for (auto& v : q.direction) {
      v += scale * normal();
      s += v * v;
    }
    for (auto& v : q.direction) v /= std::sqrt(s);
    return q;
  }

 private:
  std::mt19937_64 gen_;
};

inline unsigned thread_cap() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("AHGEO_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw UsageError("AHGEO_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return hw;
}

/// f(i) for i < count on up to thread_cap() workers; results in index order.
/// The first exception by index is rethrown.
template <class F>
auto parallel_map(std::size_t count, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < count;) {
      try {
        slots[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(thread_cap(), count);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Sweep records

namespace detail {
inline nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
inline std::optional<double> opt(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}
}  // namespace detail

struct CapacityRow {
  double t = 0.0;
  std::optional<double> lower, variational;
  double upper = 0.0, ratio = 0.0;
  bool sandwich = false;

  static const std::vector<std::string>& columns() {
    static const std::vector<std::string> c{"t", "lower", "variational", "upper", "ratio", "sandwich"};
    return c;
  }
  nlohmann::json to_json() const {
    return {{"t", t},         {"lower", detail::opt(lower)}, {"variational", detail::opt(variational)},
            {"upper", upper}, {"ratio", ratio},              {"sandwich", sandwich}};
  }
  static CapacityRow from_json(const nlohmann::json& j) {
    return {j.at("t").get<double>(),     detail::opt(j.at("lower")), detail::opt(j.at("variational")),
            j.at("upper").get<double>(), j.at("ratio").get<double>(), j.at("sandwich").get<bool>()};
  }
  bool operator==(const CapacityRow&) const = default;
};

struct RelvolRow {
  double t0 = 0.0;
  std::optional<double> lower_bound;
  double value = 0.0, err = 0.0;

  static const std::vector<std::string>& columns() {
    static const std::vector<std::string> c{"t0", "lower_bound", "value", "err"};
    return c;
  }
  nlohmann::json to_json() const {
    return {{"t0", t0}, {"lower_bound", detail::opt(lower_bound)}, {"value", value}, {"err", err}};
  }
  static RelvolRow from_json(const nlohmann::json& j) {
    return {j.at("t0").get<double>(), detail::opt(j.at("lower_bound")), j.at("value").get<double>(),
            j.at("err").get<double>()};
  }
  bool operator==(const RelvolRow&) const = default;
};

inline std::string csv_cell(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) {
    std::ostringstream os;
    os << std::setprecision(12) << v.get<double>();
    return os.str();
  }
  return v.dump();
}

/// Writes rows as CSV (header = JSON field names, 12 significant digits) or
/// as JSON {columns, meta, rows}.
template <class Row>
void emit_sweep(const std::vector<Row>& rows, const std::string& format, std::ostream& os,
                const nlohmann::json& meta = nlohmann::json::object()) {
  if (rows.empty()) throw UsageError("refusing to write an empty sweep");
  const auto& cols = Row::columns();
  if (format == "csv") {
    for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
    os << '\n';
    for (const auto& r : rows) {
      const auto j = r.to_json();
      for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << csv_cell(j.at(cols[k]));
      os << '\n';
    }
  } else if (format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back(r.to_json());
    os << nlohmann::json{{"columns", cols}, {"meta", meta}, {"rows", arr}}.dump(2) << '\n';
  } else {
    throw UsageError("unknown format \"" + format + "\"");
  }
}

template <class Row>
std::vector<Row> read_sweep_json(const nlohmann::json& j) {
  std::vector<Row> rows;
  for (const auto& r : j.at("rows")) rows.push_back(Row::from_json(r));
  return rows;
}

// ---------------------------------------------------------------------------
// Commands

struct Outcome {
  int code = kOk;
  std::string artifact;  // exact bytes written to --out or stdout
  std::vector<std::pair<std::string, std::string>> summary;
};

namespace detail {

struct Context {
  const RunConfig& cfg;
  ModelMetric model;
  BoundaryQuadrature quad;
  SphereAreaOptions area;
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(8) << v;
  return os.str();
}

inline void require_json(const RunConfig& c, const char* what) {
  if (c.format != "json") throw UsageError(std::string(what) + " writes JSON only; csv is for sweeps");
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline RelVolEstimate relvol_at(const Context& cx, const ModelPoint& q) {
  const auto& m = cx.cfg.method;
  if (m == "boundary") return relvol_boundary(cx.model, q, cx.quad);
  if (m == "extrapolate") {
    ExtrapolationOptions eo;
    eo.area = cx.area;
    std::vector<double> grid;
    for (int k = 6; k <= 12; ++k) grid.push_back(q.t + k);
    return relvol_extrapolate(cx.model, q, grid, eo);
  }
  if (m != "auto") throw UsageError("--method must be auto, boundary or extrapolate");
  // The hyperbolic value is the same at every point.
  if (cx.model.is_hyperbolic()) return relvol_compact(cx.model, CompactSetDescriptor::core_point());
  return relvol_boundary(cx.model, q, cx.quad);
}

inline Outcome model_info(const Context& cx) {
  require_json(cx.cfg, "model-info");
  const auto& m = cx.model;
  const auto c = collar_data(m);
  nlohmann::json j{{"model", m.to_json()},
                   {"n", m.n()},
                   {"dimension", m.n() + 1},
                   {"omega_n", unit_sphere_volume(m.n())},
                   {"collar", {{"delta", c.delta}, {"boundary_volume", c.boundary_volume}, {"diameter", c.diameter}}}};
  if (m.is_ads()) {
    const auto& a = m.as_ads();
    j["horizon"] = a.horizon;
    j["lambda"] = a.lambda;
    j["scale"] = a.scale;
  }
  Outcome o;
  o.artifact = dump(j);
  o.summary = {{"model", m.to_json().dump()},
               {"n", std::to_string(m.n())},
               {"delta", fmt(c.delta)},
               {"Vol(dX)", fmt(c.boundary_volume)},
               {"diam", fmt(c.diameter)}};
  return o;
}

inline Outcome relvol(const Context& cx) {
  Outcome o;
  if (cx.cfg.t_grid) {
    const auto grid = parse_grid(*cx.cfg.t_grid);
    const auto base = parse_point(cx.model, cx.cfg.point);
    auto rows = parallel_map(grid.size(), [&](std::size_t i) {
      ModelPoint q = base;
      q.t = grid[i];
      const auto a = relvol_at(cx, q);
      RelvolRow r{q.t, std::nullopt, a.value, a.error};
      if (cx.model.is_fermi() || (cx.model.is_ads() && q.t > 0.0)) r.lower_bound = noncenter_lower_bound(cx.model, q.t);
      return r;
    });
    std::ostringstream os;
    emit_sweep(rows, cx.cfg.format, os, {{"model", cx.model.to_json()}, {"command", "relvol"}});
    o.artifact = os.str();
    o.summary = {{"model", cx.model.to_json().dump()},
                 {"rows", std::to_string(rows.size())},
                 {"first", fmt(rows.front().value)},
                 {"last", fmt(rows.back().value)}};
    return o;
  }
  require_json(cx.cfg, "relvol at a single point");
  const auto q = parse_point(cx.model, cx.cfg.point);
  const auto a = relvol_at(cx, q);
  auto j = a.to_json();
  j["model"] = cx.model.to_json();
  j["point"] = point_json(q);
  j["omega_n"] = unit_sphere_volume(cx.model.n());
  o.artifact = dump(j);
  o.summary = {{"model", cx.model.to_json().dump()},
               {"t", fmt(q.t)},
               {"A(q)", fmt(a.value)},
               {"error", fmt(a.error)},
               {"method", a.method}};
  return o;
}

inline RadialProfile profile_for(const Context& cx, const ModelPoint& q, double s_max) {
  const double step = 0.05;
  const auto count = static_cast<std::size_t>(std::floor(s_max / step + 1e-9));
  RadialProfile prof;
  prof.n = cx.model.n();
  prof.areas = parallel_map(count, [&](std::size_t i) { return sphere_area(cx.model, q, step * (i + 1), cx.area).area; });
  for (std::size_t i = 0; i < count; ++i) prof.radii.push_back(step * (i + 1));
  prof.tail_constant = relvol_at(cx, q).value;
  prof.validate();
  return prof;
}

inline double require_p(const RunConfig& c, double fallback) {
  const double p = c.p.value_or(fallback);
  if (!(p > 1.0) || !std::isfinite(p)) throw UsageError("--p must be > 1");
  return p;
}

inline Outcome capacity(const Context& cx) {
  const double p = require_p(cx.cfg, 2.0);
  if (!cx.cfg.t_grid) throw UsageError("capacity needs --t-grid a:b:step");
  const auto grid = parse_grid(*cx.cfg.t_grid);
  if (grid.front() <= 0.0) throw UsageError("capacity: radii must be positive");
  if (cx.cfg.N < 0 || cx.cfg.N == 1) throw UsageError("--N must be 0 (skip) or >= 2");
  const auto q = parse_point(cx.model, cx.cfg.point);
  const auto prof = profile_for(cx, q, std::max(grid.back() + 8.0, 1.0));
  const auto valid = isocap_validity(cx.model);
  const int n = cx.model.n();
  auto rows = parallel_map(grid.size(), [&](std::size_t i) {
    const double t = grid[i];
    CapacityEstimate e;
    e.p = p;
    e.t = t;
    e.upper = cap_upper_radial(prof, p, t);
    if (valid.valid) e.lower = cap_lower_isocap(cx.model, q, p, t, cx.area).value;
    if (cx.cfg.N > 0) {
      const auto v = cap_variational(prof, p, t, cx.cfg.N);
      e.variational = v.value;
      e.variational_error =
          std::abs(v.value - cap_variational_series(prof, p, t, cx.cfg.N / 2)) + std::abs(v.reference - e.upper);
    }
    return CapacityRow{t, e.lower, e.variational, e.upper, e.ratio_to_e_nt(n), e.sandwich(1e-9 * e.upper)};
  });
  Outcome o;
  std::ostringstream os;
  const nlohmann::json meta{{"model", cx.model.to_json()},
                            {"command", "capacity"},
                            {"p", p},
                            {"point", point_json(q)},
                            {"N", cx.cfg.N},
                            {"asymptotic_constant", cap_asymconst(n, p, prof.tail_constant)},
                            {"isocapacitary_lower_valid", {{"valid", valid.valid}, {"reason", valid.reason}}}};
  emit_sweep(rows, cx.cfg.format, os, meta);
  o.artifact = os.str();
  const bool all = std::all_of(rows.begin(), rows.end(), [](const CapacityRow& r) { return r.sandwich; });
  o.code = all ? kOk : kAuditFailure;
  o.summary = {{"model", cx.model.to_json().dump()},
               {"p", fmt(p)},
               {"rows", std::to_string(rows.size())},
               {"ratio at t_max", fmt(rows.back().ratio)},
               {"asymptotic constant", fmt(meta["asymptotic_constant"].get<double>())},
               {"sandwich", all ? "all true" : "violated"}};
  if (!valid.valid) o.summary.emplace_back("lower bound", "omitted: " + valid.reason);
  return o;
}

inline Outcome collar(const Context& cx) {
  require_json(cx.cfg, "collar");
  const double p = require_p(cx.cfg, 2.0);
  const double eps = cx.cfg.eps.value_or(0.01);
  const auto c = collar_data(cx.model);
  if (!(eps > 0.0) || eps >= c.delta) throw UsageError("--eps must lie in (0, delta)");
  const int n = cx.model.n();
  const auto q = make_point(cx.model, 0.0);
  const auto hb = audit_height_bounds(cx.model, q, [&](const ModelPoint& x) { return relvol_at(cx, x); });
  const auto ub = audit_upper_bound(cx.model);
  const double upper = collar_cap_upper(cx.model, p, eps);
  const double exact = collar_cap_exact(cx.model, p, eps);
  const double limit = c.boundary_volume * std::pow(n / (p - 1.0), p - 1.0);
  nlohmann::json j{{"model", cx.model.to_json()},
                   {"p", p},
                   {"eps", eps},
                   {"collar", {{"delta", c.delta}, {"boundary_volume", c.boundary_volume}, {"diameter", c.diameter}}},
                   {"height_bounds", hb.to_json()},
                   {"upper_bound", ub.to_json()},
                   {"cap_upper", upper},
                   {"cap_exact", exact},
                   {"normalized_upper", std::pow(eps, n) * upper},
                   {"limit", limit}};
  Outcome o;
  o.artifact = dump(j);
  o.code = hb.pass() && ub.pass() ? kOk : kAuditFailure;
  o.summary = {{"model", cx.model.to_json().dump()},
               {"delta", fmt(c.delta)},
               {"height bounds", hb.pass() ? "pass" : "FAIL"},
               {"upper bound", ub.checks.front().applicable ? (ub.pass() ? "pass" : "FAIL") : "not applicable"},
               {"eps^n cap", fmt(std::pow(eps, n) * upper)},
               {"limit", fmt(limit)}};
  return o;
}

inline Outcome audit(const Context& cx) {
  require_json(cx.cfg, "audit");
  const auto& kind = cx.cfg.audit;
  const auto& m = cx.model;
  if (cx.cfg.samples < 1) throw UsageError("--samples must be positive");
  const auto count = static_cast<std::size_t>(cx.cfg.samples);
  Sampler rng(cx.cfg.seed);
  Outcome o;
  nlohmann::json j;
  bool pass = false;
  std::vector<std::pair<std::string, std::string>> extra;

  if (kind == "lipschitz" || kind == "rigidity") {
    std::vector<ModelPoint> pts;
    const std::size_t npts = kind == "lipschitz" ? 2 * count : count;
    for (std::size_t i = 0; i < npts; ++i) {
      // Lipschitz pairs are local, where the ratio is largest.
      pts.push_back(kind == "lipschitz" && i % 2 == 1 ? rng.near(pts.back(), 0.3) : rng.point(m, 2.0));
    }
    const auto values = parallel_map(pts.size(), [&](std::size_t i) { return relvol_at(cx, pts[i]); });
    auto cached = [&](const ModelPoint& x) {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].t == x.t && pts[i].angle == x.angle && pts[i].direction == x.direction) return values[i];
      }
      return relvol_at(cx, x);
    };
    AuditReport rep;
    if (kind == "lipschitz") {
      std::vector<std::pair<ModelPoint, ModelPoint>> pairs;
      for (std::size_t i = 0; i < count; ++i) pairs.emplace_back(pts[2 * i], pts[2 * i + 1]);
      rep = lipschitz_audit(m, pairs, cached);
      extra = {{"max ratio", fmt(rep.max_ratio)}, {"bound n", std::to_string(m.n())}};
    } else {
      rep = rigidity_audit(m, pts, cached);
      double worst = 0.0;
      for (const auto& e : rep.entries) worst = std::max(worst, e.lhs);
      extra = {{"max A(q)", fmt(worst)}, {"omega_n", fmt(unit_sphere_volume(m.n()))}};
    }
    j = rep.to_json();
    pass = rep.pass();
  } else if (kind == "height" || kind == "upper") {
    const auto rep = kind == "height"
                         ? audit_height_bounds(m, make_point(m, 0.0), [&](const ModelPoint& x) { return relvol_at(cx, x); })
                         : audit_upper_bound(m);
    j = rep.to_json();
    pass = rep.pass();
    for (const auto& c : rep.checks) extra.emplace_back(c.inequality_id, !c.applicable ? "not applicable" : c.pass ? "pass" : "FAIL");
  } else if (kind == "capacity") {
    const double p = require_p(cx.cfg, 2.0);
    const auto grid = parse_grid(cx.cfg.t_grid.value_or("2:12:1"));
    if (grid.back() < 10.0) throw UsageError("capacity audit: grid max must be >= 10");
    const auto q = parse_point(m, cx.cfg.point);
    const auto prof = profile_for(cx, q, grid.back() + 8.0);
    const auto rep = cap_limit_audit(m, q, p, grid, prof, cx.cfg.N);
    j = rep.to_json(m.n());
    pass = rep.pass();
    extra = {{"target", fmt(rep.target)},
             {"max ratio", fmt(rep.max_ratio)},
             {"bounded", rep.bounded ? "yes" : "no"},
             {"converging", rep.hypotheses_hold ? (rep.converging ? "yes" : "no") : "not claimed"}};
  } else if (kind == "einstein") {
    std::vector<ModelPoint> pts;
    for (std::size_t i = 0; i < count; ++i) pts.push_back(rng.point(m, 2.0));
    const auto dev = parallel_map(pts.size(), [&](std::size_t i) { return ricci_deviation(m, pts[i]); });
    nlohmann::json arr = nlohmann::json::array();
    double worst = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      arr.push_back({{"point", point_json(pts[i])}, {"deviation", dev[i]}});
      worst = std::max(worst, dev[i]);
    }
    pass = worst < 1e-4;
    j = {{"audit", "einstein"}, {"tolerance", 1e-4}, {"max_deviation", worst}, {"pass", pass}, {"samples", arr}};
    extra = {{"max |Ric + n g|", fmt(worst)}};
  } else {
    throw UsageError("--audit must be lipschitz, rigidity, height, upper, capacity or einstein");
  }
  j["model"] = m.to_json();
  j["seed"] = cx.cfg.seed;
  o.artifact = dump(j);
  o.code = pass ? kOk : kAuditFailure;
  o.summary = {{"model", m.to_json().dump()}, {"audit", kind}};
  o.summary.insert(o.summary.end(), extra.begin(), extra.end());
  o.summary.emplace_back("result", pass ? "pass" : "FAIL");
  return o;
}

}  // namespace detail

inline void print_summary(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& rows) {
  std::size_t w = 0;
  for (const auto& r : rows) w = std::max(w, r.first.size());
  for (const auto& [k, v] : rows) os << "  " << std::left << std::setw(static_cast<int>(w)) << k << "  " << v << '\n';
}

/// Executes the configured command. Exit status: 0 ok, 1 audit failure,
/// 2 usage, 3 numeric failure (with a diagnostics file next to --out).
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::ofstream file;
  auto fail_file = [&] {
    if (file.is_open()) {
      file.close();
      std::error_code ec;
      std::filesystem::remove(cfg.out, ec);
    }
  };
  try {
    if (cfg.model.is_null()) throw UsageError("missing --model");
    if (cfg.command.empty()) throw UsageError("missing command");
    if (cfg.format != "json" && cfg.format != "csv") throw UsageError("--format must be json or csv");
    if ((cfg.tol_quad && !(*cfg.tol_quad > 0.0)) || (cfg.tol_ode && !(*cfg.tol_ode > 0.0))) {
      throw UsageError("tolerances must be positive");
    }
    thread_cap();
    detail::Context cx{cfg, ModelMetric::hyperbolic(1), {}, {}};
    try {
      cx.model = ModelMetric::from_json(cfg.model);
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    if (cfg.tol_quad) {
      cx.quad.rel_tol = *cfg.tol_quad;
      cx.area.rel_tol = *cfg.tol_quad;
    }
    if (cfg.tol_ode) {
      cx.area.distance.shooting.flow.tol = *cfg.tol_ode;
      cx.quad.busemann.distance.shooting.flow.tol = *cfg.tol_ode;
    }
    if (!cfg.out.empty()) {
      file.open(cfg.out, std::ios::binary | std::ios::trunc);
      if (!file) throw UsageError("cannot write to \"" + cfg.out + "\"");
    }

    Outcome o;
    if (cfg.command == "model-info") o = detail::model_info(cx);
    else if (cfg.command == "relvol") o = detail::relvol(cx);
    else if (cfg.command == "capacity") o = detail::capacity(cx);
    else if (cfg.command == "collar") o = detail::collar(cx);
    else if (cfg.command == "audit") o = detail::audit(cx);
    else throw UsageError("unknown command \"" + cfg.command + "\"");

    std::ostream& summary = file.is_open() ? out : err;
    if (file.is_open()) {
      file << o.artifact;
      file.close();
      if (!file) throw UsageError("failed writing \"" + cfg.out + "\"");
    } else {
      out << o.artifact;
    }
    summary << cfg.command << (cfg.audit.empty() ? "" : " " + cfg.audit) << '\n';
    print_summary(summary, o.summary);
    if (file.is_open() || !cfg.out.empty()) summary << "  written  " << cfg.out << '\n';
    return o.code;
  } catch (const UsageError& e) {
    fail_file();
    err << "ahgeo: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    fail_file();
    err << "ahgeo: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    // NumericError, or anything thrown from inside the solvers.
    fail_file();
    const auto* ne = dynamic_cast<const NumericError*>(&e);
    const std::string diag = cfg.out.empty() ? std::string("ahgeo-diagnostics.json") : cfg.out + ".diagnostics.json";
    std::ofstream d(diag);
    d << nlohmann::json{{"error", e.what()}, {"diagnostics", ne ? ne->diagnostics() : std::string()},
                        {"config", cfg.to_json()}}
             .dump(2)
      << '\n';
    err << "ahgeo: numeric failure: " << e.what() << " (diagnostics in " << diag << ")\n";
    return kNumeric;
  }
}

/// Parses flags (over an optional --config JSON file; flags win) and runs.
inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Relative volume, capacity and collar computations on asymptotically hyperbolic models", "ahgeo"};
  std::string config_path, command_pos;
  std::optional<std::string> model, command, audit, point, t_grid, method, format, outp;
  std::optional<double> p, eps, tol_quad, tol_ode;
  std::optional<int> samples, N;
  std::optional<std::uint64_t> seed;
  app.add_option("subcommand", command_pos, "model-info | relvol | capacity | collar | audit");
  app.add_option("--config", config_path, "JSON file with the same keys; flags override it");
  app.add_option("--model", model, "JSON descriptor or hyperbolic:n | fermi:n:lambda | ads:m");
  app.add_option("--command", command, "same as the positional command");
  app.add_option("--audit", audit, "lipschitz | rigidity | height | upper | capacity | einstein");
  app.add_option("--point", point, "core | pole | radius | JSON {t, angle, direction}");
  app.add_option("--p", p, "capacity exponent, > 1");
  app.add_option("--t-grid", t_grid, "a:b:step, inclusive");
  app.add_option("--eps", eps, "collar sublevel x >= eps");
  app.add_option("--samples", samples, "random samples for audits");
  app.add_option("--N", N, "variational cells (0 skips)");
  app.add_option("--method", method, "relvol route: auto | boundary | extrapolate");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", outp, "artifact path (stdout if absent)");
  app.add_option("--format", format, "json | csv");
  app.add_option("--tol-quad", tol_quad, "quadrature relative tolerance");
  app.add_option("--tol-ode", tol_ode, "geodesic flow tolerance");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "ahgeo: " << e.what() << '\n';
    return kUsage;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw UsageError("cannot read config \"" + config_path + "\"");
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(f);
      } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
      }
      cfg = RunConfig::from_json(j);
    }
    if (model) cfg.model = parse_model_arg(*model);
    if (!command_pos.empty()) cfg.command = command_pos;
    if (command) cfg.command = *command;
    if (audit) cfg.audit = *audit;
    if (point) cfg.point = *point;
    if (p) cfg.p = p;
    if (t_grid) cfg.t_grid = t_grid;
    if (eps) cfg.eps = eps;
    if (samples) cfg.samples = *samples;
    if (N) cfg.N = *N;
    if (method) cfg.method = *method;
    if (seed) cfg.seed = *seed;
    if (outp) cfg.out = *outp;
    if (format) cfg.format = *format;
    if (tol_quad) cfg.tol_quad = tol_quad;
    if (tol_ode) cfg.tol_ode = tol_ode;
    if (cfg.model.is_string()) cfg.model = parse_model_arg(cfg.model.get<std::string>());
  } catch (const UsageError& e) {
    err << "ahgeo: " << e.what() << '\n';
    return kUsage;
  }
  return run(cfg, out, err);
}

}  // namespace ahgeo::cli
