#include "carat/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>

namespace carat {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

class ValueParser {
 public:
  explicit ValueParser(std::string_view text) : text_(text) {}

  ConfigValue parse() {
    ConfigValue v = value();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing text");
    return v;
  }

 private:
  ConfigValue value() {
    skip_ws();
    ConfigValue v;
    if (peek() == '[') {
      ++pos_;
      v.is_list = true;
      skip_ws();
      if (peek() == ']') {
        ++pos_;
        return v;
      }
      while (true) {
        v.items.push_back(value());
        skip_ws();
        const char c = peek();
        ++pos_;
        if (c == ']') break;
        if (c != ',') fail("expected ',' or ']'");
      }
      return v;
    }
    const auto start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' && text_[pos_] != '[') ++pos_;
    v.scalar = std::string(trim(text_.substr(start, pos_ - start)));
    if (v.scalar.empty()) fail("empty value");
    return v;
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("cannot parse value '" + std::string(text_) + "': " + what);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

ConfigValue parse_value(std::string_view text) { return ValueParser(trim(text)).parse(); }

std::string ConfigValue::as_string() const {
  if (is_list) throw ConfigError("expected a scalar, got a list");
  return scalar;
}

double ConfigValue::as_real() const {
  const std::string s = as_string();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

long long ConfigValue::as_integer() const {
  const std::string s = as_string();
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

std::vector<ConfigValue> ConfigValue::as_list() const {
  if (is_list) return items;
  return {*this};
}

std::vector<double> ConfigValue::as_reals() const {
  std::vector<double> out;
  for (const ConfigValue& v : as_list()) out.push_back(v.as_real());
  return out;
}

std::vector<std::string> ConfigValue::as_strings() const {
  std::vector<std::string> out;
  for (const ConfigValue& v : as_list()) out.push_back(v.as_string());
  return out;
}

// ---------------------------------------------------------------------------

Config Config::parse(std::istream& in, const std::string& source) {
  Config config;
  std::map<std::string, ConfigValue>* current = &config.globals_;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
    std::string_view body(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    if (body.front() == '[' && body.back() == ']' && body.find('=') == std::string_view::npos) {
      const std::string name(trim(body.substr(1, body.size() - 2)));
      if (name.empty()) throw ConfigError(where() + "empty section name");
      config.sections_.push_back(Section{name, {}});
      current = &config.sections_.back().entries;
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where() + "expected 'key = value'");
    const std::string key(trim(body.substr(0, eq)));
    if (key.empty()) throw ConfigError(where() + "missing key");
    try {
      (*current)[key] = parse_value(body.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
  }
  return config;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

std::vector<Config::Section> Config::resolved() const {
  if (sections_.empty()) return {Section{"", globals_}};
  std::vector<Section> out;
  for (const Section& s : sections_) {
    Section merged{s.name, globals_};
    for (const auto& [k, v] : s.entries) merged.entries[k] = v;
    out.push_back(std::move(merged));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const std::set<std::string> kKnownKeys = {
    "family", "link",   "phi",      "mu",           "delta",        "beta",   "factors", "probs",
    "n",      "design", "block_size", "coin_p",     "ps_criterion", "hh_weights", "seed", "replications",
    "alpha",  "methods", "mc_b",
};

class SectionReader {
 public:
  explicit SectionReader(const Config::Section& s) : s_(s) {
    for (const auto& [k, v] : s.entries)
      if (!kKnownKeys.contains(k)) fail("unknown key '" + k + "'");
  }

  bool has(const std::string& key) const { return s_.entries.contains(key); }

  const ConfigValue& get(const std::string& key) const {
    const auto it = s_.entries.find(key);
    if (it == s_.entries.end()) fail("missing required key '" + key + "'");
    return it->second;
  }

  template <class F>
  auto read(const std::string& key, F&& convert) const {
    try {
      return convert(get(key));
    } catch (const ConfigError& e) {
      fail("key '" + key + "': " + e.what());
    }
  }

  std::size_t count(const std::string& key, long long fallback) const {
    const long long v = has(key) ? read(key, [](const ConfigValue& c) { return c.as_integer(); }) : fallback;
    if (v < 0) fail("key '" + key + "' must be nonnegative");
    return static_cast<std::size_t>(v);
  }

  double real(const std::string& key, double fallback) const {
    return has(key) ? read(key, [](const ConfigValue& c) { return c.as_real(); }) : fallback;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError((s_.name.empty() ? std::string() : "[" + s_.name + "] ") + what);
  }

 private:
  const Config::Section& s_;
};

std::vector<FamilyTag> read_families(const SectionReader& r) {
  std::vector<FamilyTag> out;
  const auto names = r.read("family", [](const ConfigValue& c) { return c.as_strings(); });
  const std::string link = r.has("link") ? r.read("link", [](const ConfigValue& c) { return c.as_string(); }) : "";
  for (const std::string& name : names) {
    std::string full = name;
    if (!link.empty() && name.find('_') == std::string::npos) full = name + "_" + link;
    out.push_back(parse_family(full));
  }
  return out;
}

std::vector<Method> read_methods(const SectionReader& r, DesignTag design) {
  std::vector<std::string> names{"wald", "adjusted"};
  if (r.has("methods")) names = r.read("methods", [](const ConfigValue& c) { return c.as_strings(); });
  std::vector<Method> out;
  for (const std::string& name : names) {
    const Method m = name == "adjusted" ? adjusted_method_for(design) : parse_method(name);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) r.fail("methods list is empty");
  return out;
}

CovariateSpace read_space(const SectionReader& r) {
  std::vector<int> levels;
  for (double v : r.read("factors", [](const ConfigValue& c) { return c.as_reals(); })) {
    if (v != std::floor(v)) r.fail("factor level counts must be integers");
    levels.push_back(static_cast<int>(v));
  }
  if (!r.has("probs")) return CovariateSpace::uniform(levels);
  std::vector<std::vector<double>> probs;
  for (const ConfigValue& row : r.get("probs").as_list()) probs.push_back(row.as_reals());
  return {levels, probs};
}

}  // namespace

ExperimentPlan plan_from_config(const Config& config) {
  ExperimentPlan plan;
  bool seeded = false;
  for (const Config::Section& section : config.resolved()) {
    const SectionReader r(section);
    const auto seed = r.read("seed", [](const ConfigValue& c) { return c.as_integer(); });
    if (seeded && static_cast<std::uint64_t>(seed) != plan.seed) r.fail("all sections must share one seed");
    plan.seed = static_cast<std::uint64_t>(seed);
    seeded = true;

    Scenario base;
    base.space = read_space(r);
    base.phi = r.real("phi", 1.0);
    base.mu = r.read("mu", [](const ConfigValue& c) { return c.as_real(); });
    base.beta = r.read("beta", [](const ConfigValue& c) { return c.as_reals(); });
    base.design.block_size = static_cast<int>(r.count("block_size", 4));
    base.design.coin_p = r.real("coin_p", 0.75);
    if (r.has("ps_criterion"))
      base.design.ps_criterion = parse_criterion(r.read("ps_criterion", [](const ConfigValue& c) { return c.as_string(); }));
    if (r.has("hh_weights")) base.design.hh_weights = r.read("hh_weights", [](const ConfigValue& c) { return c.as_reals(); });

    const auto families = read_families(r);
    const auto designs = r.read("design", [](const ConfigValue& c) { return c.as_strings(); });
    std::vector<std::size_t> sizes;
    for (double v : r.read("n", [](const ConfigValue& c) { return c.as_reals(); })) {
      if (v < 0 || v != std::floor(v)) r.fail("sample sizes must be nonnegative integers");
      sizes.push_back(static_cast<std::size_t>(v));
    }
    const std::vector<double> deltas =
        r.has("delta") ? r.read("delta", [](const ConfigValue& c) { return c.as_reals(); }) : std::vector<double>{0.0};

    const std::size_t replications = r.count("replications", 5000);
    const double alpha = r.real("alpha", 0.05);
    const std::size_t mc_b = r.count("mc_b", 500);

    for (FamilyTag family : families) {
      for (std::size_t n : sizes) {
        for (const std::string& design_name : designs) {
          for (double delta : deltas) {
            CellSpec cell;
            cell.scenario = base;
            cell.scenario.family = family;
            cell.scenario.n = n;
            cell.scenario.delta = delta;
            cell.scenario.design.tag = parse_design(design_name);
            try {
              cell.scenario.validate();
            } catch (const ConfigError& e) {
              r.fail(e.what());
            }
            cell.methods = read_methods(r, cell.scenario.design.tag);
            cell.replications = replications;
            cell.alpha = alpha;
            cell.mc_b = mc_b;
            cell.label = section.name;
            if (!(alpha > 0.0 && alpha < 1.0)) r.fail("alpha must lie in (0, 1)");
            if (replications < 1) r.fail("replications must be at least 1");
            plan.cells.push_back(std::move(cell));
          }
        }
      }
    }
  }
  return plan;
}

Scenario scenario_from_config(const Config& config) {
  const ExperimentPlan plan = plan_from_config(config);
  if (plan.cells.size() != 1)
    throw ConfigError("a scenario file must describe exactly one cell; this one expands to " +
                      std::to_string(plan.cells.size()));
  return plan.cells.front().scenario;
}

}  // namespace carat
