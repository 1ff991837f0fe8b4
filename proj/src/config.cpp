#include "lkgrf/config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lkgrf/error.hpp"

namespace lkgrf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"model", {"name", "d", "param", "path"}},
      {"experiment",
       {"m", "u", "N", "h", "replicates", "n_flats", "epsilon", "seed", "estimator", "bootstrap", "bound_tolerance",
        "normality_alpha", "max_suspect_fraction", "threads"}},
      {"chaos", {"max_order", "gh_nodes", "qmc_points", "qmc_shifts", "seed", "cache"}},
      {"variance", {"Q", "flat_samples", "radial_nodes", "radius", "angles", "seed"}},
  };
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  require(res.ec == std::errc() && res.ptr == end, ErrorCode::parse, "config: '" + key + "' is not a number: " + v);
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  require(res.ec == std::errc() && res.ptr == end, ErrorCode::parse, "config: '" + key + "' is not an integer: " + v);
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  require(res.ec == std::errc() && res.ptr == end, ErrorCode::parse,
          "config: '" + key + "' is not an unsigned integer: " + v);
  return out;
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& v, F convert) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<T>(convert(key, trim(item))));
  require(!out.empty(), ErrorCode::parse, "config: '" + key + "' is an empty list");
  return out;
}

}  // namespace

bool IniDocument::has(const std::string& section, const std::string& key) const { return find(section, key); }

const std::string* IniDocument::find(const std::string& section, const std::string& key) const {
  const auto s = sections.find(section);
  if (s == sections.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

void IniDocument::set(const std::string& section, const std::string& key, const std::string& value) {
  sections[section][key] = trim(value);
}

std::string IniDocument::canonical() const {
  std::string out;
  for (const auto& [name, entries] : sections) {
    out += "[" + name + "]\n";
    for (const auto& [k, v] : entries) out += k + "=" + v + "\n";
  }
  return out;
}

std::string IniDocument::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

IniDocument parse_ini(const std::string& text) {
  IniDocument doc;
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::parse, where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      require(schema().count(section), ErrorCode::parse, where + "unknown section [" + section + "]");
      doc.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::parse, where + "expected key = value");
    require(!section.empty(), ErrorCode::parse, where + "key outside a section");
    const std::string key = trim(line.substr(0, eq));
    require(schema().at(section).count(key), ErrorCode::parse,
            where + "unknown key '" + key + "' in [" + section + "]");
    require(!doc.has(section, key), ErrorCode::parse, where + "duplicate key '" + key + "'");
    doc.set(section, key, line.substr(eq + 1));
  }
  return doc;
}

IniDocument load_ini(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ini(ss.str());
}

RunConfig interpret(const IniDocument& doc, const std::string& base_dir) {
  RunConfig rc;
  rc.document = doc;
  auto get = [&](const char* s, const char* k) { return doc.find(s, k); };

  if (auto v = get("model", "name")) rc.model.name = *v;
  if (auto v = get("model", "d")) rc.model.d = static_cast<int>(to_int("d", *v));
  if (auto v = get("model", "param")) rc.model.param = to_double("param", *v);
  if (auto v = get("model", "path"); v && !v->empty()) {
    std::filesystem::path p(*v);
    rc.model.path = p.is_absolute() ? p.string() : (std::filesystem::path(base_dir) / p).string();
  }

  ExperimentConfig& e = rc.experiment;
  e.model = rc.model.name;
  e.model_param = rc.model.param;
  e.model_path = rc.model.path;
  e.d = rc.model.d;
  if (auto v = get("experiment", "m")) e.m = to_list<int>("m", *v, to_int);
  if (auto v = get("experiment", "u")) e.u = to_list<double>("u", *v, to_double);
  if (auto v = get("experiment", "N")) e.N = to_list<double>("N", *v, to_double);
  if (auto v = get("experiment", "h")) e.h = to_double("h", *v);
  if (auto v = get("experiment", "replicates")) e.replicates = static_cast<int>(to_int("replicates", *v));
  if (auto v = get("experiment", "n_flats")) e.n_flats = to_u64("n_flats", *v);
  if (auto v = get("experiment", "epsilon")) e.epsilon = to_list<double>("epsilon", *v, to_double);
  if (auto v = get("experiment", "seed")) e.seed = to_u64("seed", *v);
  if (auto v = get("experiment", "estimator")) e.estimator = parse_estimator(*v);
  if (auto v = get("experiment", "bootstrap")) e.bootstrap_resamples = static_cast<int>(to_int("bootstrap", *v));
  if (auto v = get("experiment", "bound_tolerance")) e.bound_tolerance = to_double("bound_tolerance", *v);
  if (auto v = get("experiment", "normality_alpha")) e.normality_alpha = to_double("normality_alpha", *v);
  if (auto v = get("experiment", "max_suspect_fraction"))
    e.max_suspect_fraction = to_double("max_suspect_fraction", *v);
  if (auto v = get("experiment", "threads")) e.threads = static_cast<unsigned>(to_u64("threads", *v));

  ChaosConfig& c = rc.chaos;
  if (auto v = get("chaos", "max_order")) c.max_order = static_cast<int>(to_int("max_order", *v));
  if (auto v = get("chaos", "gh_nodes")) c.options.gh_nodes = static_cast<int>(to_int("gh_nodes", *v));
  if (auto v = get("chaos", "qmc_points")) c.options.qmc_points = to_u64("qmc_points", *v);
  if (auto v = get("chaos", "qmc_shifts")) c.options.qmc_shifts = static_cast<int>(to_int("qmc_shifts", *v));
  if (auto v = get("chaos", "seed")) c.options.seed = to_u64("seed", *v);
  if (auto v = get("chaos", "cache"); v && !v->empty()) {
    std::filesystem::path p(*v);
    c.cache = p.is_absolute() ? p.string() : (std::filesystem::path(base_dir) / p).string();
  }

  VarianceConfig& var = rc.variance;
  if (auto v = get("variance", "Q")) var.Q = static_cast<int>(to_int("Q", *v));
  if (auto v = get("variance", "flat_samples")) var.options.flat_samples = static_cast<int>(to_int("flat_samples", *v));
  if (auto v = get("variance", "radial_nodes")) var.options.grid.nodes = static_cast<int>(to_int("radial_nodes", *v));
  if (auto v = get("variance", "radius")) var.options.grid.radius = to_double("radius", *v);
  if (auto v = get("variance", "angles")) var.options.grid.angles = static_cast<int>(to_int("angles", *v));
  if (auto v = get("variance", "seed")) var.options.seed = to_u64("seed", *v);
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig rc = interpret(load_ini(path), std::filesystem::path(path).parent_path().string().empty()
                                               ? std::string(".")
                                               : std::filesystem::path(path).parent_path().string());
  rc.source_path = path;
  return rc;
}

CovarianceModel make_model(const ModelConfig& model) {
  return make_model(model.name, model.d, model.param, model.path);
}

}  // namespace lkgrf
