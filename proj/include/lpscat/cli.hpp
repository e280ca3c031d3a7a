#pragma once
// Command-line front end: config file + flag overrides, validation with
// aggregated errors, atomic artifact writes and a hashed manifest.

#include <fftw3.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "lpscat/bench.hpp"
#include "lpscat/cgo.hpp"
#include "lpscat/errors.hpp"
#include "lpscat/grid.hpp"
#include "lpscat/io.hpp"
#include "lpscat/norms.hpp"
#include "lpscat/potentials.hpp"
#include "lpscat/resolvent.hpp"
#include "lpscat/scattering.hpp"

namespace lpscat::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputEnv = "LPSCAT_OUTPUT_DIR";

using ojson = nlohmann::ordered_json;

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"grid-info", "norm", "direct-solve", "data-gen", "invert", "bench"};
  return c;
}

inline std::string version_string() {
  return std::string("lpscat ") + kVersion + " (C++" + std::to_string(__cplusplus / 100 % 100) + ", " + fftw_version +
         ", Eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION) + "); default LP basis: " + basis_name(LPBasis{}.kind);
}

// ---------------------------------------------------------------- hashing

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &n, EVP_sha256(), nullptr) != 1) throw IoError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < n; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------- config

struct RunConfig {
  std::string command;
  ojson config;                    // normalized, defaults filled
  std::vector<std::string> defaulted;  // keys filled from defaults
  std::string source;              // config file path, if any
};

namespace detail {

class Normalizer {
 public:
  Normalizer(const nlohmann::json& in, RunConfig& rc) : in_(in), rc_(rc) {}

  std::vector<std::string> errors;

  void error(const std::string& key, const std::string& msg) { errors.push_back(key + ": " + msg); }

  bool has(const std::string& key) const { return lookup(key) != nullptr; }

  std::optional<double> number(const std::string& key, std::optional<double> def, bool required = false,
                               bool positive = false) {
    const nlohmann::json* v = lookup(key);
    if (!v) {
      if (required) {
        error(key, "missing (required for " + rc_.command + ")");
        return std::nullopt;
      }
      if (def) put(key, *def, true);
      return def;
    }
    if (!v->is_number()) {
      error(key, "must be a number");
      return std::nullopt;
    }
    const double x = v->get<double>();
    if (!std::isfinite(x) || (positive && !(x > 0.0))) {
      error(key, positive ? "must be positive" : "must be finite");
      return std::nullopt;
    }
    put(key, x, false);
    return x;
  }

  std::optional<long long> integer(const std::string& key, std::optional<long long> def, bool required = false) {
    const nlohmann::json* v = lookup(key);
    if (!v) {
      if (required) {
        error(key, "missing (required for " + rc_.command + ")");
        return std::nullopt;
      }
      if (def) put(key, *def, true);
      return def;
    }
    if (!v->is_number_integer() && !v->is_number_unsigned()) {
      error(key, "must be an integer");
      return std::nullopt;
    }
    const long long x = v->get<long long>();
    put(key, x, false);
    return x;
  }

  std::optional<std::uint64_t> seed(const std::string& key, std::uint64_t def) {
    const nlohmann::json* v = lookup(key);
    if (!v) {
      put(key, def, true);
      return def;
    }
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      error(key, "must be a non-negative 64-bit integer");
      return std::nullopt;
    }
    const auto x = v->get<std::uint64_t>();
    put(key, x, false);
    return x;
  }

  std::optional<std::string> string(const std::string& key, std::optional<std::string> def, bool required = false) {
    const nlohmann::json* v = lookup(key);
    if (!v) {
      if (required) {
        error(key, "missing (required for " + rc_.command + ")");
        return std::nullopt;
      }
      if (def) put(key, *def, true);
      return def;
    }
    if (!v->is_string()) {
      error(key, "must be a string");
      return std::nullopt;
    }
    put(key, v->get<std::string>(), false);
    return v->get<std::string>();
  }

  std::optional<bool> boolean(const std::string& key, bool def) {
    const nlohmann::json* v = lookup(key);
    if (!v) {
      put(key, def, true);
      return def;
    }
    if (!v->is_boolean()) {
      error(key, "must be true or false");
      return std::nullopt;
    }
    put(key, v->get<bool>(), false);
    return v->get<bool>();
  }

  std::optional<std::vector<double>> numbers(const std::string& key, bool required, bool increasing) {
    const nlohmann::json* v = lookup(key);
    if (!v) {
      if (required) error(key, "missing (required for " + rc_.command + ")");
      return std::nullopt;
    }
    std::vector<double> out;
    if (v->is_number()) {
      out.push_back(v->get<double>());
    } else if (v->is_array() && std::all_of(v->begin(), v->end(), [](const auto& e) { return e.is_number(); })) {
      out = v->get<std::vector<double>>();
    } else {
      error(key, "must be a number or an array of numbers");
      return std::nullopt;
    }
    if (out.empty()) {
      error(key, "must not be empty");
      return std::nullopt;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!(out[i] > 0.0) || !std::isfinite(out[i])) {
        error(key, "entries must be positive");
        return std::nullopt;
      }
      if (increasing && i && !(out[i] > out[i - 1])) {
        error(key, "entries must be strictly increasing");
        return std::nullopt;
      }
    }
    put(key, out, false);
    return out;
  }

  // Existing file; relative paths resolve against the config file's directory.
  std::optional<std::string> path(const std::string& key, bool required, const std::vector<std::string>& suffixes = {""}) {
    auto s = string(key, std::nullopt, required);
    if (!s) return std::nullopt;
    const std::string p = resolve_path(*s);
    for (const auto& suf : suffixes)
      if (!std::filesystem::exists(p + suf)) {
        error(key, "file not found: " + p + suf);
        return std::nullopt;
      }
    put(key, p, false);
    return p;
  }

  std::string resolve_path(const std::string& p) const {
    if (p.empty() || std::filesystem::path(p).is_absolute() || rc_.source.empty()) return p;
    const auto base = std::filesystem::path(rc_.source).parent_path();
    return base.empty() ? p : (base / p).lexically_normal().string();
  }

  const nlohmann::json* lookup(const std::string& key) const {
    const nlohmann::json* cur = &in_;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!cur->is_object() || !cur->contains(part) || (*cur)[part].is_null()) return nullptr;
      cur = &(*cur)[part];
      if (dot == std::string::npos) return cur;
      start = dot + 1;
    }
  }

  template <class T>
  void put(const std::string& key, const T& v, bool defaulted) {
    ojson* cur = &rc_.config;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      if (dot == std::string::npos) {
        (*cur)[key.substr(start)] = v;
        break;
      }
      cur = &(*cur)[key.substr(start, dot - start)];
      start = dot + 1;
    }
    if (defaulted) rc_.defaulted.push_back(key);
  }

 private:
  const nlohmann::json& in_;
  RunConfig& rc_;
};

inline std::string default_output() {
  const char* e = std::getenv(kOutputEnv);
  return e && *e ? e : "lpscat_out";
}

// Potential description: {"volume": {...}, "shell": {...}}; validated against the grid.
inline void check_potential_spec(const nlohmann::json& j, const std::string& ctx, std::vector<std::string>& errs) {
  if (!j.is_object()) {
    errs.push_back(ctx + ": potential must be a JSON object");
    return;
  }
  for (const auto& [k, v] : j.items())
    if (k != "volume" && k != "shell") errs.push_back(ctx + ": unknown key '" + k + "'");
  if (j.contains("volume")) {
    const auto& v = j["volume"];
    const std::string t = v.value("type", "");
    if (t != "zero" && t != "gaussian" && t != "bump" && t != "field")
      errs.push_back(ctx + ".volume.type: expected zero, gaussian, bump or field");
    if ((t == "gaussian" || t == "bump") && !v.contains("amplitude")) errs.push_back(ctx + ".volume.amplitude: missing");
    if (t == "gaussian" && !v.contains("width")) errs.push_back(ctx + ".volume.width: missing");
    if (t == "bump" && !v.contains("radius")) errs.push_back(ctx + ".volume.radius: missing");
    if (t == "field" && !v.contains("path")) errs.push_back(ctx + ".volume.path: missing");
  }
  if (j.contains("shell")) {
    const auto& s = j["shell"];
    const std::string t = s.value("type", s.contains("nodes") ? "surface" : "");
    if (t != "sphere" && t != "box" && t != "file" && t != "surface")
      errs.push_back(ctx + ".shell.type: expected sphere, box, file or an inline surface");
    if ((t == "sphere" || t == "box") && !s.contains("alpha")) errs.push_back(ctx + ".shell.alpha: missing");
    if (t == "sphere" && !s.contains("radius")) errs.push_back(ctx + ".shell.radius: missing");
    if (t == "box" && !s.contains("half")) errs.push_back(ctx + ".shell.half: missing");
    if (t == "file" && !s.contains("path")) errs.push_back(ctx + ".shell.path: missing");
  }
}

inline nlohmann::json read_json_file(const std::string& path, const std::string& ctx) {
  std::ifstream in(path);
  if (!in) throw IoError(ctx + ": cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError(ctx + ": invalid JSON in " + path + ": " + e.what());
  }
}

inline Vec3 vec_of(const nlohmann::json& j, int d) {
  Vec3 v{0, 0, 0};
  if (j.is_null()) return v;
  const auto a = j.get<std::vector<double>>();
  if (static_cast<int>(a.size()) != d) throw ParameterError("point has " + std::to_string(a.size()) + " entries, expected " + std::to_string(d));
  for (int i = 0; i < d; ++i) v[i] = a[i];
  return v;
}

}  // namespace detail

// Builds the potential on grid g; relative paths are resolved against base_dir.
inline Potential load_potential(const nlohmann::json& j, const Grid& g, double R0, const std::string& base_dir,
                                const std::string& ctx) {
  std::vector<std::string> errs;
  detail::check_potential_spec(j, ctx, errs);
  if (!errs.empty()) throw ParameterError(errs.front());
  auto rel = [&](const std::string& p) {
    return std::filesystem::path(p).is_absolute() || base_dir.empty() ? p : (std::filesystem::path(base_dir) / p).string();
  };
  Potential V{zero_potential(g), std::nullopt};
  try {
    if (j.contains("volume")) {
      const auto& v = j["volume"];
      const std::string t = v["type"];
      const Vec3 c = detail::vec_of(v.value("center", nlohmann::json()), g.d);
      if (t == "gaussian") V.V0 = gaussian_potential(g, v["amplitude"].get<double>(), v["width"].get<double>(), c);
      if (t == "bump") V.V0 = bump_potential(g, v["amplitude"].get<double>(), v["radius"].get<double>(), c);
      if (t == "field") {
        const ComplexField f = read_field(rel(v["path"].get<std::string>()));
        if (!(f.grid == g)) throw ParameterError("potential field grid does not match the configured grid");
        V.V0 = make_grid_potential(f, R0);
      }
    }
    if (j.contains("shell")) {
      const auto& s = j["shell"];
      const std::string t = s.value("type", s.contains("nodes") ? "surface" : "");
      if (t == "sphere") {
        const auto S = sphere_quadrature(g.d, s["radius"].get<double>(), detail::vec_of(s.value("center", nlohmann::json()), g.d),
                                         s.value("n", g.d == 3 ? 8 : 32), R0);
        V.shell = constant_shell(S, s["alpha"].get<double>());
      } else if (t == "box") {
        const auto S = box_quadrature(g.d, detail::vec_of(s["half"], g.d), detail::vec_of(s.value("center", nlohmann::json()), g.d),
                                      s.value("n", 4), R0);
        V.shell = constant_shell(S, s["alpha"].get<double>());
      } else if (t == "file") {
        V.shell = shell_from_json(detail::read_json_file(rel(s["path"].get<std::string>()), ctx + ".shell.path"));
      } else {
        V.shell = shell_from_json(s);
      }
      if (V.shell && V.shell->surface.d != g.d) throw ParameterError("shell dimension does not match the grid");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(ctx + ": " + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(ctx + ": " + e.what());
  }
  return V;
}

// Normalizes a raw config object (already merged with flag overrides).
inline RunConfig validate_config(const nlohmann::json& raw, const std::string& source = "") {
  RunConfig rc;
  rc.source = source;
  detail::Normalizer n(raw, rc);
  if (!raw.is_object()) throw ParameterError("config: top level must be a JSON object");
  const auto cmd = n.string("command", std::nullopt, true);
  if (cmd && std::find(commands().begin(), commands().end(), *cmd) == commands().end())
    n.error("command", "unknown command '" + *cmd + "'");
  rc.command = cmd.value_or("");
  static const std::vector<std::string> known = {
      "command", "grid", "output", "threads", "seed", "basis", "lambda", "tau", "M", "s", "p", "space", "field",
      "sign", "R0", "potential", "sources", "receivers", "backend", "tol", "max_iter", "lambdas", "potentials",
      "kappa_grid", "taus", "seeds", "cgo", "ineq", "params", "family", "samples", "delta", "R", "surface_radius",
      "chi", "chi_radius", "keep_witness", "keep_fields"};
  for (const auto& [k, v] : raw.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) n.error(k, "unknown key");

  n.string("output", detail::default_output());
  if (auto t = n.integer("threads", 1); t && *t < 1) n.error("threads", "must be >= 1");
  n.seed("seed", 1);
  if (auto b = n.string("basis", "smooth"); b && *b != "smooth" && *b != "c2poly")
    n.error("basis", "expected smooth or c2poly");

  std::optional<Grid> grid;
  if (rc.command != "norm") {
    const auto d = n.integer("grid.d", 3), N = n.integer("grid.N", 32);
    const auto L = n.number("grid.L", 4.0, false, true);
    if (d && N && L) {
      try {
        grid = make_grid(static_cast<int>(*d), *L, static_cast<int>(*N));
      } catch (const ParameterError& e) {
        n.error("grid", e.what());
      }
    }
  }

  auto scattering_common = [&]() {
    const auto R0 = n.number("R0", 1.0, false, true);
    if (R0 && grid) {
      if (*R0 < 1.0) n.error("R0", "must be >= 1");
      if (*R0 > grid->L / 4.0)
        n.error("R0", "margin violation: R0 = " + num(*R0) + " exceeds L/4 = " + num(grid->L / 4.0));
    }
    if (auto s = n.integer("sign", 1); s && *s != 1 && *s != -1) n.error("sign", "must be +1 or -1");
    if (auto c = n.integer("sources", grid && grid->d == 2 ? 8 : 2); c && *c < 1) n.error("sources", "must be >= 1");
    if (!n.has("receivers") && n.has("sources"))
      n.put("receivers", raw["sources"], true);
    else if (auto c = n.integer("receivers", grid && grid->d == 2 ? 8 : 2); c && *c < 1)
      n.error("receivers", "must be >= 1");
    if (auto b = n.string("backend", grid ? std::optional<std::string>(backend_name(default_backend(grid->d))) : std::nullopt)) {
      try {
        const Backend be = parse_backend(*b);
        if (be == Backend::green3d && grid && grid->d != 3) n.error("backend", "green3d requires d = 3");
      } catch (const ParameterError& e) {
        n.error("backend", e.what());
      }
    }
    n.number("tol", 1e-12, false, true);
    if (auto m = n.integer("max_iter", 60); m && *m < 1) n.error("max_iter", "must be >= 1");
    n.boolean("keep_fields", false);
    if (const auto* p = n.lookup("potential")) {
      if (p->is_string()) {
        const std::string path = n.resolve_path(p->get<std::string>());
        if (!std::filesystem::exists(path)) {
          n.error("potential", "file not found: " + path);
        } else {
          n.put("potential", path, false);
          try {
            detail::check_potential_spec(detail::read_json_file(path, "potential"), "potential", n.errors);
          } catch (const Error& e) {
            n.error("potential", e.what());
          }
        }
      } else {
        detail::check_potential_spec(*p, "potential", n.errors);
        n.put("potential", *p, false);
      }
    } else {
      n.put("potential", nlohmann::json::object(), true);
    }
  };

  if (rc.command == "grid-info") {
    n.number("lambda", std::nullopt, false, true);
  } else if (rc.command == "norm") {
    static const std::vector<std::string> spaces = {"ah", "ah_dual", "y", "y_star", "z", "z_star", "x_star",
                                                    "x_upper", "bourgain", "ytm", "lp"};
    const auto space = n.string("space", std::nullopt, true);
    if (space && std::find(spaces.begin(), spaces.end(), *space) == spaces.end()) {
      std::string all;
      for (const auto& s : spaces) all += (all.empty() ? "" : ", ") + s;
      n.error("space", "unknown space '" + *space + "' (expected one of: " + all + ")");
    }
    n.path("field", true, {".json", ".bin"});
    const std::string sp = space.value_or("");
    const bool lam = sp == "y" || sp == "y_star" || sp == "z" || sp == "z_star" || sp == "x_star" || sp == "x_upper";
    n.number("lambda", std::nullopt, lam, true);
    n.number("tau", std::nullopt, sp == "bourgain" || sp == "ytm", true);
    n.number("M", std::nullopt, sp == "ytm", true);
    n.number("s", std::nullopt, sp == "bourgain" || sp == "ytm");
    n.number("p", std::nullopt, sp == "z" || sp == "z_star" || sp == "lp", true);
  } else if (rc.command == "direct-solve") {
    n.number("lambda", std::nullopt, true, true);
    scattering_common();
  } else if (rc.command == "data-gen") {
    n.numbers("lambdas", true, true);
    scattering_common();
  } else if (rc.command == "invert") {
    const auto* p = n.lookup("potentials");
    if (!p) {
      n.error("potentials", "missing (required for invert)");
    } else if (!p->is_array() || p->size() != 2) {
      n.error("potentials", "expected exactly two potential descriptions");
    } else {
      nlohmann::json out = nlohmann::json::array();
      for (int i = 0; i < 2; ++i) {
        const std::string ctx = "potentials[" + std::to_string(i) + "]";
        const auto& e = (*p)[i];
        if (e.is_string()) {
          const std::string path = n.resolve_path(e.get<std::string>());
          if (!std::filesystem::exists(path)) {
            n.error(ctx, "file not found: " + path);
          } else {
            try {
              detail::check_potential_spec(detail::read_json_file(path, ctx), ctx, n.errors);
            } catch (const Error& err) {
              n.error(ctx, err.what());
            }
          }
          out.push_back(path);
        } else {
          detail::check_potential_spec(e, ctx, n.errors);
          out.push_back(e);
        }
      }
      n.put("potentials", out, false);
    }
    if (grid && grid->d != 3) n.error("grid.d", "invert requires d = 3");
    n.number("kappa_grid.kmax", 4.0 / std::sqrt(3.0), false, true);
    if (auto k = n.integer("kappa_grid.n", 3); k && *k < 1) n.error("kappa_grid.n", "must be >= 1");
    n.numbers("taus", true, true);
    if (auto s = n.integer("seeds", 3); s && *s < 1) n.error("seeds", "must be >= 1");
    n.number("lambda", 1.0, false, true);
    n.number("R0", grid ? std::optional<double>(grid->L / 4.0) : std::nullopt, false, true);
    n.number("cgo.tol", 1e-12, false, true);
    if (auto m = n.integer("cgo.max_iter", 200); m && *m < 1) n.error("cgo.max_iter", "must be >= 1");
  } else if (rc.command == "bench") {
    const auto ineq = n.string("ineq", std::nullopt, true);
    if (ineq) try {
        parse_ineq(*ineq);
      } catch (const ParameterError& e) {
        n.error("ineq", e.what());
      }
    n.numbers("params", true, true);
    if (auto f = n.string("family", "band_limited")) try {
        parse_family(*f);
      } catch (const ParameterError& e) {
        n.error("family", e.what());
      }
    if (auto s = n.integer("samples", 50); s && *s < 50) n.error("samples", "must be >= 50");
    if (auto s = n.integer("sign", 1); s && *s != 1 && *s != -1) n.error("sign", "must be +1 or -1");
    if (auto b = n.string("backend", grid ? std::optional<std::string>(backend_name(default_backend(grid->d))) : std::nullopt))
      try {
        parse_backend(*b);
      } catch (const ParameterError& e) {
        n.error("backend", e.what());
      }
    n.number("p", 0.0);
    n.number("delta", 0.75, false, true);
    n.number("M", 64.0, false, true);
    n.number("R", 1.0, false, true);
    n.number("surface_radius", 1.0, false, true);
    if (auto c = n.string("chi", "lp"); c && *c != "lp" && *c != "gaussian") n.error("chi", "expected lp or gaussian");
    n.number("chi_radius", 1.0, false, true);
    n.boolean("keep_witness", false);
  }
  if (!n.errors.empty()) {
    std::string msg = "invalid configuration (" + std::to_string(n.errors.size()) + " error" +
                      (n.errors.size() > 1 ? "s" : "") + "):";
    for (const auto& e : n.errors) msg += "\n  - " + e;
    throw ParameterError(msg);
  }
  return rc;
}

inline RunConfig validate_config_file(const std::string& path, const nlohmann::json& overrides = nlohmann::json::object()) {
  nlohmann::json raw = detail::read_json_file(path, "config");
  if (!raw.is_object()) throw ParameterError("config: top level must be a JSON object");
  raw.merge_patch(overrides);
  return validate_config(raw, path);
}

// ---------------------------------------------------------------- run

class Artifacts {
 public:
  explicit Artifacts(std::string dir) : dir_(std::move(dir)) {}

  std::string write(const std::string& name, const std::string& bytes) {
    const std::string path = (std::filesystem::path(dir_) / name).string();
    atomic_write(path, bytes);
    list_.push_back({{"path", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    return path;
  }

  void field(const std::string& base, const ComplexField& f) {
    write(base + ".bin", field_bytes(f));
    write(base + ".json", field_sidecar(f).dump(2) + "\n");
  }

  void manifest(const RunConfig& rc, int exit_code) {
    ojson m;
    m["tool"] = std::string("lpscat ") + kVersion;
    m["command"] = rc.command;
    m["config"] = rc.config;
    m["defaulted"] = rc.defaulted;
    m["exit_code"] = exit_code;
    m["artifacts"] = list_;
    atomic_write((std::filesystem::path(dir_) / "manifest.json").string(), m.dump(2) + "\n");
  }

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  ojson list_ = ojson::array();
};

namespace detail {

inline Grid config_grid(const ojson& c) {
  return make_grid(c["grid"]["d"].get<int>(), c["grid"]["L"].get<double>(), c["grid"]["N"].get<int>());
}

inline std::string base_dir(const RunConfig& rc) {
  return rc.source.empty() ? std::string() : std::filesystem::path(rc.source).parent_path().string();
}

inline Potential potential_from(const RunConfig& rc, const nlohmann::json& spec, const Grid& g, double R0,
                                const std::string& ctx) {
  if (spec.is_string()) {
    const std::string path = spec.get<std::string>();
    return load_potential(read_json_file(path, ctx), g, R0, std::filesystem::path(path).parent_path().string(), ctx);
  }
  return load_potential(spec, g, R0, base_dir(rc), ctx);
}

inline ScatteringProblem scattering_problem(const RunConfig& rc, double lambda) {
  const ojson& c = rc.config;
  ScatteringProblem p;
  p.grid = config_grid(c);
  p.R0 = c["R0"];
  const Potential V = potential_from(rc, nlohmann::json::parse(c["potential"].dump()), p.grid, p.R0, "potential");
  p.V0 = V.V0;
  p.shell = V.shell;
  p.lambda = lambda;
  p.sign = c["sign"];
  p.sources = boundary_points(p.grid.d, p.R0, c["sources"].get<int>());
  p.receivers = boundary_points(p.grid.d, p.R0, c["receivers"].get<int>());
  p.backend = parse_backend(c["backend"].get<std::string>());
  p.tol = c["tol"];
  p.max_iter = c["max_iter"];
  p.keep_fields = c["keep_fields"];
  return p;
}

inline std::string points_csv(const std::vector<Vec3>& pts, int d) {
  std::string s = d == 3 ? "index,x,y,z\n" : "index,x,y\n";
  char b[96];
  for (std::size_t i = 0; i < pts.size(); ++i) {
    s += std::to_string(i);
    for (int a = 0; a < d; ++a) {
      std::snprintf(b, sizeof b, ",%.17g", pts[i][a]);
      s += b;
    }
    s += "\n";
  }
  return s;
}

inline std::string fourier_csv(const std::vector<FourierRow>& rows) {
  std::string s =
      "kappa_x,kappa_y,kappa_z,tau,present,direct_re,direct_im,estimate_re,estimate_im,remainder_re,remainder_im,"
      "remainder_abs,remainder_std\n";
  char b[512];
  for (const auto& r : rows) {
    std::snprintf(b, sizeof b, "%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.kappa[0], r.kappa[1], r.kappa[2], r.tau, r.present ? 1 : 0, r.direct.real(), r.direct.imag(),
                  r.estimate.real(), r.estimate.imag(), r.remainder.real(), r.remainder.imag(), r.remainder_abs,
                  r.remainder_std);
    s += b;
  }
  return s;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers; results are indexed, so order is fixed.
template <class Fn>
inline void parallel_for(int n, int threads, Fn&& fn) {
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto work = [&]() {
    for (int i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
        next = n;
      }
    }
  };
  const int nt = std::max(1, std::min(threads, n));
  if (nt == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

// Executes a validated config; writes artifacts and the manifest under config.output.
inline int run(const RunConfig& rc, std::ostream& log = std::cerr) {
  const ojson& c = rc.config;
  Artifacts art(c["output"].get<std::string>());
  const int threads = c["threads"];
  const LPBasis basis{parse_basis(c["basis"].get<std::string>())};
  int code = 0;
  try {
    if (rc.command == "grid-info") {
      const Grid g = detail::config_grid(c);
      ojson j;
      j["d"] = g.d;
      j["L"] = g.L;
      j["N"] = g.N;
      j["dx"] = g.dx();
      j["dxi"] = g.dxi();
      j["xi_max"] = g.xi_max();
      j["points"] = g.size();
      j["annulus_top"] = annulus_top(g);
      j["annulus_flags"] = annulus_flags(g);
      j["top_block"] = top_block(g);
      j["basis"] = basis_name(basis.kind);
      if (c.contains("lambda")) {
        const auto ci = critical_index(c["lambda"].get<double>());
        j["lambda"] = c["lambda"];
        j["k_lambda"] = ci.k_lambda;
        j["critical_blocks"] = std::vector<int>(ci.I.begin(), ci.I.end());
      }
      art.write("grid_info.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << "\n";
    } else if (rc.command == "norm") {
      const ComplexField f = read_field(c["field"].get<std::string>());
      const std::string sp = c["space"];
      auto opt = [&](const char* k) { return c.contains(k) ? c[k].get<double>() : 0.0; };
      NormReport r;
      if (sp == "ah") r = ah_norm(f);
      else if (sp == "ah_dual") r = ah_dual_norm(f);
      else if (sp == "y") r = y_norm(f, opt("lambda"), basis);
      else if (sp == "y_star") r = y_star_norm(f, opt("lambda"), basis);
      else if (sp == "z") r = z_norm(f, opt("lambda"), opt("p"), basis);
      else if (sp == "z_star") r = z_star_norm(f, opt("lambda"), opt("p"), basis);
      else if (sp == "x_star") r = x_star_norm(f, opt("lambda"), basis);
      else if (sp == "x_upper") r = x_norm_upper(f, opt("lambda"), basis);
      else if (sp == "bourgain") r = bourgain_norm(f, opt("tau"), opt("s"));
      else if (sp == "ytm") r = ytm_norm(f, opt("tau"), opt("M"), opt("s"));
      else if (sp == "lp") {
        r.name = "lp";
        r.value = lp_norm(f, opt("p"));
        r.params["p"] = opt("p");
      }
      art.write("norm_" + sp + ".json", r.to_json().dump(2) + "\n");
      std::cout << r.to_json().dump(2) << "\n";
    } else if (rc.command == "direct-solve") {
      const auto p = detail::scattering_problem(rc, c["lambda"]);
      const auto sol = solve_scattering(p);
      art.write("data.csv", sol.data.to_csv());
      art.write("sources.csv", detail::points_csv(sol.data.sources, p.grid.d));
      art.write("receivers.csv", detail::points_csv(sol.data.receivers, p.grid.d));
      ojson diag = ojson::parse(sol.info.dump());
      if (sol.data.values.rows() == sol.data.values.cols()) {
        const auto rep = reciprocity_check(sol.data);
        diag["reciprocity_defect"] = rep.defect;
        diag["max_abs"] = rep.max_abs;
      }
      art.write("diagnostics.json", diag.dump(2) + "\n");
      for (std::size_t s = 0; s < sol.u_sc.size(); ++s) art.field("u_sc_" + std::to_string(s), sol.u_sc[s]);
    } else if (rc.command == "data-gen") {
      const auto lams = c["lambdas"].get<std::vector<double>>();
      std::vector<ScatteringSolution> sols(lams.size());
      detail::parallel_for(static_cast<int>(lams.size()), threads,
                           [&](int i) { sols[i] = solve_scattering(detail::scattering_problem(rc, lams[i])); });
      ojson diag = ojson::array();
      for (std::size_t i = 0; i < lams.size(); ++i) {
        art.write("data_" + std::to_string(i) + ".csv", sols[i].data.to_csv());
        ojson d = ojson::parse(sols[i].info.dump());
        d["lambda"] = lams[i];
        diag.push_back(d);
      }
      art.write("diagnostics.json", diag.dump(2) + "\n");
    } else if (rc.command == "invert") {
      const Grid g = detail::config_grid(c);
      const double R0 = c["R0"];
      const auto specs = nlohmann::json::parse(c["potentials"].dump());
      const Potential V1 = detail::potential_from(rc, specs[0], g, R0, "potentials[0]");
      const Potential V2 = detail::potential_from(rc, specs[1], g, R0, "potentials[1]");
      FourierSpec fs;
      fs.kappas = kappa_grid(3, c["kappa_grid"]["kmax"], c["kappa_grid"]["n"]);
      fs.taus = c["taus"].get<std::vector<double>>();
      fs.seeds = c["seeds"];
      fs.seed = c["seed"];
      fs.lambda = c["lambda"];
      fs.cgo.tol = c["cgo"]["tol"];
      fs.cgo.max_iter = c["cgo"]["max_iter"];
      std::vector<std::vector<FourierRow>> parts(fs.kappas.size());
      detail::parallel_for(static_cast<int>(fs.kappas.size()), threads, [&](int i) {
        FourierSpec one = fs;
        one.kappas = {fs.kappas[i]};
        parts[i] = reconstruct_fourier(V1, V2, one);
      });
      std::vector<FourierRow> rows;
      for (auto& p : parts) rows.insert(rows.end(), p.begin(), p.end());
      art.write("fourier.csv", detail::fourier_csv(rows));
      int absent = 0;
      for (const auto& r : rows) absent += !r.present;
      if (absent) log << "invert: " << absent << " cell(s) absent (correction failed); see fourier.csv\n";
    } else if (rc.command == "bench") {
      BenchSpec s;
      s.ineq = parse_ineq(c["ineq"]);
      s.params = c["params"].get<std::vector<double>>();
      s.family = parse_family(c["family"]);
      s.samples = c["samples"];
      s.seed = c["seed"];
      s.grid = detail::config_grid(c);
      s.sign = c["sign"];
      s.backend = parse_backend(c["backend"].get<std::string>());
      s.p = c["p"];
      s.delta = c["delta"];
      s.M = c["M"];
      s.R = c["R"];
      s.surface_radius = c["surface_radius"];
      s.chi = c["chi"];
      s.chi_radius = c["chi_radius"];
      s.basis = basis;
      s.threads = threads;
      s.keep_witness = c["keep_witness"];
      const BenchResult r = bench(s);
      const SweepSummary sum = sweep_report(r);
      art.write("bench.csv", r.to_csv());
      ojson j;
      j["result"] = r.to_json();
      j["summary"] = sum.to_json();
      art.write("bench_summary.json", j.dump(2) + "\n");
      for (std::size_t i = 0; i < r.rows.size(); ++i)
        if (r.rows[i].witness_field) art.field("witness_" + std::to_string(i), *r.rows[i].witness_field);
      if (!sum.reason.empty()) log << "bench: " << sum.reason << "\n";
      if (sum.violations) log << "bench: " << sum.violations << " sample(s) violate the inequality direction\n";
    }
  } catch (const Error& e) {
    code = static_cast<int>(e.code());
    log << "error: " << e.what() << "\n";
  }
  try {
    art.manifest(rc, code);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    if (code == 0) code = static_cast<int>(e.code());
  }
  return code;
}

// ---------------------------------------------------------------- argv

inline int main(int argc, char** argv) {
  CLI::App app{"Spectral direct and inverse scattering toolkit"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  std::string config_path;
  nlohmann::json ov = nlohmann::json::object();
  std::map<std::string, std::string> str;
  std::map<std::string, double> dbl;
  std::map<std::string, long long> ints;
  std::map<std::string, std::vector<double>> lists;
  std::vector<std::string> pots;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "JSON config file");
    s->add_option("--output", str["output"], "output directory");
    s->add_option("--threads", ints["threads"], "worker threads");
    s->add_option("--seed", ints["seed"], "random seed");
    s->add_option("--basis", str["basis"], "LP basis: smooth or c2poly");
  };
  auto box = [&](CLI::App* s) {
    s->add_option("--d", ints["grid.d"], "dimension");
    s->add_option("--L", dbl["grid.L"], "box half-width");
    s->add_option("--N", ints["grid.N"], "points per axis");
  };
  auto scat = [&](CLI::App* s) {
    s->add_option("--R0", dbl["R0"], "measurement sphere radius");
    s->add_option("--potential", str["potential"], "potential JSON file");
    s->add_option("--sources", ints["sources"], "source rule resolution");
    s->add_option("--receivers", ints["receivers"], "receiver rule resolution");
    s->add_option("--backend", str["backend"], "resolvent backend");
    s->add_option("--sign", ints["sign"], "+1 outgoing, -1 incoming");
    s->add_option("--tol", dbl["tol"], "Neumann tolerance");
    s->add_option("--max-iter", ints["max_iter"], "Neumann iteration cap");
  };

  auto* gi = app.add_subcommand("grid-info", "grid spacings, annuli and critical blocks");
  common(gi);
  box(gi);
  gi->add_option("--lambda", dbl["lambda"], "spectral parameter");

  auto* nm = app.add_subcommand("norm", "evaluate a norm of a field file");
  common(nm);
  nm->add_option("--space", str["space"], "norm identifier");
  nm->add_option("--field", str["field"], "field file base (without .json/.bin)");
  for (const char* k : {"lambda", "tau", "M", "s", "p"}) nm->add_option(std::string("--") + k, dbl[k], k);

  auto* ds = app.add_subcommand("direct-solve", "scattering data for one lambda");
  common(ds);
  box(ds);
  scat(ds);
  ds->add_option("--lambda", dbl["lambda"], "spectral parameter");

  auto* dg = app.add_subcommand("data-gen", "scattering data over a lambda list");
  common(dg);
  box(dg);
  scat(dg);
  dg->add_option("--lambdas", lists["lambdas"], "lambda values")->delimiter(',');

  auto* iv = app.add_subcommand("invert", "CGO Fourier table of V1 - V2");
  common(iv);
  box(iv);
  iv->add_option("--potentials", pots, "two potential JSON files")->expected(2);
  iv->add_option("--kappa-grid", lists["kappa_grid"], "kmax,n")->delimiter(',')->expected(1, 2);
  iv->add_option("--taus", lists["taus"], "tau values")->delimiter(',');
  iv->add_option("--seeds", ints["seeds"], "orientation seeds per cell");
  iv->add_option("--lambda", dbl["lambda"], "spectral parameter");
  iv->add_option("--R0", dbl["R0"], "support radius");

  auto* bn = app.add_subcommand("bench", "empirical inequality constants");
  common(bn);
  box(bn);
  bn->add_option("--ineq", str["ineq"], "inequality id");
  bn->add_option("--grid", lists["params"], "lambda or tau values")->delimiter(',');
  bn->add_option("--family", str["family"], "gaussian, band_limited, annulus or shell_source");
  bn->add_option("--samples", ints["samples"], "samples per grid point (>= 50)");
  bn->add_option("--backend", str["backend"], "resolvent backend");
  for (const char* k : {"p", "delta", "M", "R"}) bn->add_option(std::string("--") + k, dbl[k], k);
  bn->add_option("--chi-radius", dbl["chi_radius"], "localisation cutoff radius");
  bn->add_option("--surface-radius", dbl["surface_radius"], "trace sphere radius");
  bn->add_option("--chi", str["chi"], "lp or gaussian");
  bn->add_flag("--keep-witness", "write witness fields");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::config);
  }

  CLI::App* sub = app.get_subcommands().front();
  ov["command"] = sub->get_name();
  auto set = [&](const std::string& key, const nlohmann::json& v) {
    nlohmann::json* cur = &ov;
    std::size_t start = 0;
    for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1)
      cur = &(*cur)[key.substr(start, dot - start)];
    (*cur)[key.substr(start)] = v;
  };
  auto given = [&](const std::string& flag) {
    const auto* o = sub->get_option_no_throw(flag);
    return o && o->count() > 0;
  };
  auto flag_of = [](std::string k) {
    if (k.rfind("grid.", 0) == 0) k = k.substr(5);
    if (k == "params") return std::string("--grid");
    if (k == "max_iter") return std::string("--max-iter");
    if (k == "surface_radius") return std::string("--surface-radius");
    if (k == "chi_radius") return std::string("--chi-radius");
    if (k == "kappa_grid") return std::string("--kappa-grid");
    return "--" + k;
  };
  for (const auto& [k, v] : str)
    if (given(flag_of(k))) set(k, v);
  for (const auto& [k, v] : dbl)
    if (given(flag_of(k))) set(k, v);
  for (const auto& [k, v] : ints)
    if (given(flag_of(k))) set(k, v);
  for (const auto& [k, v] : lists) {
    if (!given(flag_of(k))) continue;
    if (k == "kappa_grid") {
      set("kappa_grid.kmax", v[0]);
      if (v.size() > 1) set("kappa_grid.n", static_cast<long long>(std::llround(v[1])));
    } else {
      set(k, v);
    }
  }
  if (!pots.empty()) ov["potentials"] = pots;
  if (given("--keep-witness")) ov["keep_witness"] = true;

  try {
    RunConfig rc;
    if (!config_path.empty()) {
      // Flags win over the file, but the subcommand on the command line always decides.
      nlohmann::json raw = detail::read_json_file(config_path, "config");
      if (raw.is_object() && raw.contains("command") && raw["command"] != ov["command"])
        std::cerr << "note: config command '" << raw["command"].get<std::string>() << "' replaced by '"
                  << ov["command"].get<std::string>() << "'\n";
      rc = validate_config_file(config_path, ov);
    } else {
      rc = validate_config(ov);
    }
    return run(rc);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lpscat::cli
