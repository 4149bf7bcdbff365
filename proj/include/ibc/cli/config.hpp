#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ibc/errors.hpp"
#include "ibc/ibc_family.hpp"

namespace ibc::cli {

/// Every problem found in a config document, one message per entry.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& m : v) s += (s.empty() ? "" : "\n") + m;
    return s;
  }
  std::vector<std::string> violations_;
};

enum class ValueKind { number, integer, text, number_list, choice };

struct KeySpec {
  std::string key;
  ValueKind kind;
  std::string fallback;  // empty: no default
  std::vector<std::string> commands;  // empty: every command
  std::vector<std::string> choices;
  std::string doc;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"evolve-toy", "sample-bohmian", "radial-spectrum",
                                          "fock-ground", "renorm-scan",    "currents"};
  return c;
}

/// The full key table. configs/SCHEMA.md documents the same entries.
inline const std::vector<KeySpec>& schema() {
  using K = ValueKind;
  const std::vector<std::string> toy{"evolve-toy", "sample-bohmian", "currents"};
  const std::vector<std::string> radial{"radial-spectrum", "fock-ground", "renorm-scan"};
  const std::vector<std::string> fock{"fock-ground", "renorm-scan"};
  static const std::vector<KeySpec> s{
      {"command", K::choice, "", {}, commands(), "pipeline to run"},
      {"seed", K::integer, "0", {}, {}, "root of every random stream"},
      {"output.dir", K::text, "out", {}, {}, "artifact directory"},
      {"constants.hbar", K::number, "1", {}, {}, ""},
      {"constants.mass", K::number, "1", {}, {}, ""},
      {"constants.coupling", K::number, "1", {}, {}, "g"},
      {"constants.e0", K::number, "0.5", radial, {}, "creation energy E0"},
      {"grid.width", K::number, "8", toy, {}, "line width, walls at +-width/2"},
      {"grid.height", K::number, "8", toy, {}, "half-plane height"},
      {"grid.length", K::number, "8", radial, {}, "radial box length"},
      {"grid.spacing", K::number, "0.0625", {}, {}, "node spacing, all axes"},
      {"ibc.family", K::choice, "dirichlet", toy, {"dirichlet", "neumann", "robin"}, ""},
      {"ibc.alpha", K::number, "", toy, {}, "robin only"},
      {"ibc.beta", K::number, "", toy, {}, "robin only"},
      {"ibc.gamma", K::number, "", toy, {}, "robin only"},
      {"ibc.delta", K::number, "", toy, {}, "robin only"},
      {"packet.x0", K::number, "0", toy, {}, ""},
      {"packet.y0", K::number, "3", toy, {}, ""},
      {"packet.sx", K::number, "0.7", toy, {}, ""},
      {"packet.sy", K::number, "0.7", toy, {}, ""},
      {"packet.kx", K::number, "0", toy, {}, ""},
      {"packet.ky", K::number, "-4", toy, {}, ""},
      {"packet.amplitude", K::number, "1", toy, {}, "sector-2 packet amplitude"},
      {"packet.line_width", K::number, "0", toy, {}, "sector-1 Gaussian width, 0 = none"},
      {"packet.layer_width", K::number, "0", toy, {}, "boundary layer width, 0 = none"},
      {"packet.layer_k", K::number, "0", toy, {}, "boundary layer wavenumber"},
      {"run.dt", K::number, "0.001", toy, {}, ""},
      {"run.horizon", K::number, "1", toy, {}, ""},
      {"run.record_every", K::integer, "10", {"evolve-toy"}, {}, "steps between series rows"},
      {"run.n_traj", K::integer, "10000", {"sample-bohmian"}, {}, ""},
      {"run.probes", K::number_list, "0.2,0.4,0.6,0.8,1.0", {"sample-bohmian"}, {}, "probe times"},
      {"run.csv_trajectories", K::integer, "100", {"sample-bohmian"}, {}, "trajectories written out"},
      {"run.n_eigen", K::integer, "3", {"radial-spectrum"}, {}, ""},
      {"run.n_max", K::integer, "2", fock, {}, "highest particle number"},
      {"run.widths", K::number_list, "0.8,0.4,0.2,0.1", {"renorm-scan"}, {}, "cutoff widths s"},
      {"cutoff.shape", K::choice, "gaussian", {"renorm-scan"}, {"gaussian"}, ""},
      {"run.sources", K::integer, "1", {"fock-ground"}, {}, "sources for the closed-form check (1 or 2)"},
      {"run.separation", K::number, "2", {"fock-ground"}, {}, "source distance R when run.sources = 2"},
      {"run.residual_configs", K::integer, "100", {"fock-ground"}, {}, "configurations per sector"},
      {"run.memory_cap_mb", K::integer, "2048", fock, {}, "assembly memory cap"},
  };
  return s;
}

inline const KeySpec* find_key(std::string_view key) {
  for (const auto& k : schema())
    if (k.key == key) return &k;
  return nullptr;
}

inline bool applies(const KeySpec& k, const std::string& command) {
  return k.commands.empty() || std::find(k.commands.begin(), k.commands.end(), command) != k.commands.end();
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1])});
      diag = up;
    }
  }
  return row[b.size()];
}

inline std::string nearest_key(std::string_view key) {
  std::string best;
  std::size_t d = std::string::npos;
  for (const auto& k : schema()) {
    const auto e = edit_distance(key, k.key);
    if (e < d) d = e, best = k.key;
  }
  return best;
}

inline std::optional<double> parse_number(std::string_view s) {
  // a plain decimal or a ratio such as 1/16
  auto one = [](std::string_view t) -> std::optional<double> {
    double v = 0.0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc{} || r.ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  };
  const auto slash = s.find('/');
  if (slash == std::string_view::npos) return one(s);
  const auto a = one(s.substr(0, slash)), b = one(s.substr(slash + 1));
  if (!a || !b || *b == 0.0) return std::nullopt;
  return *a / *b;
}

inline std::optional<std::int64_t> parse_integer(std::string_view s) {
  std::int64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::optional<std::vector<double>> parse_list(std::string_view s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    const auto v = parse_number(item);
    if (!v) return std::nullopt;
    out.push_back(*v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Validated config: every key that applies to the command, defaults filled in.
struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::map<std::string, std::string> values;  // canonical text per applicable key

  bool has(const std::string& key) const { return values.count(key) > 0; }
  const std::string& text(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw StructuralError("config key '" + key + "' is not set for " + command);
    return it->second;
  }
  double number(const std::string& key) const { return *parse_number(text(key)); }
  std::int64_t integer(const std::string& key) const { return *parse_integer(text(key)); }
  std::vector<double> list(const std::string& key) const { return *parse_list(text(key)); }

  IbcFamily family() const {
    const auto& f = text("ibc.family");
    if (f == "neumann") return IbcFamily::neumann();
    if (f == "robin")
      return IbcFamily::robin(number("ibc.alpha"), number("ibc.beta"), number("ibc.gamma"), number("ibc.delta"));
    return IbcFamily::dirichlet();
  }

  /// Resolved values with their types, keys sorted.
  nlohmann::json echo() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values) {
      const auto* spec = find_key(k);
      switch (spec->kind) {
        case ValueKind::number: j[k] = number(k); break;
        case ValueKind::integer: j[k] = integer(k); break;
        case ValueKind::number_list: j[k] = list(k); break;
        default: j[k] = v;
      }
    }
    j["seed"] = seed;
    j["output.dir"] = output_dir;
    return j;
  }
};

namespace detail {

inline void check_semantics(const ExperimentConfig& c, const std::map<std::string, int>& line_of,
                            std::vector<std::string>& bad) {
  auto where = [&](const std::string& k) {
    const auto it = line_of.find(k);
    return it == line_of.end() ? std::string(" (default)") : " (line " + std::to_string(it->second) + ")";
  };
  auto positive = [&](const std::string& k) {
    if (c.has(k) && !(c.number(k) > 0.0)) bad.push_back(k + " must be positive" + where(k));
  };
  for (const char* k : {"constants.hbar", "constants.mass", "grid.width", "grid.height", "grid.length", "grid.spacing",
                        "run.dt"})
    positive(k);
  if (c.has("constants.coupling") && c.number("constants.coupling") < 0.0)
    bad.push_back("constants.coupling must be non-negative" + where("constants.coupling"));
  if (c.has("constants.e0") && !(c.number("constants.e0") > 0.0))
    bad.push_back("constants.e0 must be positive" + where("constants.e0"));

  auto divides = [&](const std::string& len, const std::string& step) {
    if (!c.has(len) || !c.has(step) || !(c.number(len) > 0) || !(c.number(step) > 0)) return;
    const double r = c.number(len) / c.number(step);
    if (std::abs(r - std::round(r)) > 1e-9 * r) bad.push_back(step + " must divide " + len + where(step));
  };
  divides("grid.width", "grid.spacing");
  divides("grid.height", "grid.spacing");
  divides("grid.length", "grid.spacing");
  if (c.has("run.horizon")) {
    if (c.number("run.horizon") < 0.0) bad.push_back("run.horizon must be non-negative" + where("run.horizon"));
    else if (c.number("run.horizon") > 0.0) divides("run.horizon", "run.dt");
  }

  if (c.has("ibc.family")) {
    const bool robin = c.text("ibc.family") == "robin";
    for (const char* k : {"ibc.alpha", "ibc.beta", "ibc.gamma", "ibc.delta"}) {
      if (robin && !c.has(k)) bad.push_back(std::string(k) + " is required when ibc.family = robin");
      if (!robin && line_of.count(k)) bad.push_back(std::string(k) + " is only used with ibc.family = robin" + where(k));
    }
    if (robin && c.has("ibc.alpha") && c.has("ibc.beta") && c.has("ibc.gamma") && c.has("ibc.delta")) {
      const auto r = validate_robin(c.number("ibc.alpha"), c.number("ibc.beta"), c.number("ibc.gamma"),
                                    c.number("ibc.delta"));
      if (!r.ok)
        bad.push_back("validate_robin: alpha*delta - beta*gamma = " + std::to_string(r.defect - 1.0) +
                      ", must be -1" + where("ibc.alpha"));
    }
  }
  for (const char* k : {"packet.sx", "packet.sy"}) positive(k);
  for (const char* k : {"packet.line_width", "packet.layer_width"})
    if (c.has(k) && c.number(k) < 0.0) bad.push_back(std::string(k) + " must be non-negative" + where(k));

  auto at_least = [&](const std::string& k, std::int64_t lo, std::int64_t hi) {
    if (c.has(k) && (c.integer(k) < lo || c.integer(k) > hi))
      bad.push_back(k + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]" + where(k));
  };
  at_least("seed", 0, INT64_MAX);
  at_least("run.record_every", 1, INT64_MAX);
  at_least("run.n_traj", 1, INT64_MAX);
  at_least("run.csv_trajectories", 0, INT64_MAX);
  at_least("run.n_eigen", 1, 50);
  at_least("run.n_max", 1, 8);
  at_least("run.sources", 1, 2);
  at_least("run.residual_configs", 1, 100000);
  at_least("run.memory_cap_mb", 1, INT64_MAX);
  positive("run.separation");

  if (c.has("run.probes") && c.has("run.horizon") && c.has("run.dt") && c.number("run.dt") > 0) {
    for (double t : c.list("run.probes")) {
      const double n = t / c.number("run.dt");
      if (t < 0.0 || t > c.number("run.horizon") + 1e-12 || std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
        bad.push_back("run.probes: " + std::to_string(t) + " is not a multiple of run.dt inside [0, run.horizon]" +
                      where("run.probes"));
    }
  }
  if (c.has("run.widths"))
    for (double s : c.list("run.widths"))
      if (!(s > 0.0)) bad.push_back("run.widths entries must be positive" + where("run.widths"));
}

}  // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Collects every violation
/// before throwing ConfigError.
inline ExperimentConfig parse_config(std::string_view text) {
  std::vector<std::string> bad;
  std::map<std::string, std::string> raw;
  std::map<std::string, int> line_of;
  std::istringstream in{std::string(text)};
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      bad.push_back("line " + std::to_string(no) + ": expected 'key = value', got '" + body + "'");
      continue;
    }
    const auto key = trim(std::string_view(body).substr(0, eq));
    const auto value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty() || value.empty()) {
      bad.push_back("line " + std::to_string(no) + ": empty key or value");
      continue;
    }
    if (line_of.count(key)) {
      bad.push_back("line " + std::to_string(no) + ": duplicate key '" + key + "' (first on line " +
                    std::to_string(line_of[key]) + ")");
      continue;
    }
    line_of[key] = no;
    raw[key] = value;
  }

  ExperimentConfig c;
  const auto cmd = raw.find("command");
  bool command_ok = false;
  if (cmd == raw.end()) {
    bad.push_back("missing required key 'command'");
  } else if (std::find(commands().begin(), commands().end(), cmd->second) == commands().end()) {
    bad.push_back("line " + std::to_string(line_of["command"]) + ": unknown command '" + cmd->second + "'");
  } else {
    c.command = cmd->second;
    command_ok = true;
  }

  for (const auto& [key, value] : raw) {
    const auto at = "line " + std::to_string(line_of[key]) + ": ";
    const auto* spec = find_key(key);
    if (!spec) {
      bad.push_back(at + "unknown key '" + key + "', did you mean '" + nearest_key(key) + "'?");
      continue;
    }
    if (command_ok && !applies(*spec, c.command)) {
      bad.push_back(at + "key '" + key + "' is not used by command " + c.command);
      continue;
    }
    bool ok = true;
    switch (spec->kind) {
      case ValueKind::number: ok = parse_number(value).has_value(); break;
      case ValueKind::integer: ok = parse_integer(value).has_value(); break;
      case ValueKind::number_list: ok = parse_list(value).has_value(); break;
      case ValueKind::choice:
        ok = std::find(spec->choices.begin(), spec->choices.end(), value) != spec->choices.end();
        break;
      case ValueKind::text: break;
    }
    if (!ok) {
      std::string want = spec->kind == ValueKind::number    ? "a number"
                         : spec->kind == ValueKind::integer ? "an integer"
                         : spec->kind == ValueKind::number_list ? "a comma-separated list of numbers"
                                                                : "one of";
      if (spec->kind == ValueKind::choice)
        for (const auto& ch : spec->choices) want += " " + ch;
      bad.push_back(at + key + " = '" + value + "' is not " + want);
      continue;
    }
    if (key != "command") c.values[key] = value;
  }

  if (command_ok) {
    for (const auto& spec : schema()) {
      if (spec.key == "command" || !applies(spec, c.command) || c.values.count(spec.key)) continue;
      if (raw.count(spec.key)) continue;  // present but rejected above
      if (!spec.fallback.empty()) c.values[spec.key] = spec.fallback;
    }
    detail::check_semantics(c, line_of, bad);
  }
  if (!bad.empty()) throw ConfigError(bad);
  c.seed = static_cast<std::uint64_t>(c.integer("seed"));
  c.output_dir = c.text("output.dir");
  c.values.erase("seed");
  c.values.erase("output.dir");
  return c;
}

}  // namespace ibc::cli
