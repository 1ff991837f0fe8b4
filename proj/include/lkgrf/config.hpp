#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "lkgrf/chaos.hpp"
#include "lkgrf/experiments.hpp"
#include "lkgrf/variance.hpp"

namespace lkgrf {

/// key = value text with [section] headers; '#' and ';' start comments.
struct IniDocument {
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has(const std::string& section, const std::string& key) const;
  const std::string* find(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);
  /// Sorted sections and keys, trimmed values, one "key=value" per line.
  std::string canonical() const;
  /// FNV-1a 64 of the canonical text as 16 hex digits.
  std::string hash() const;
};

IniDocument parse_ini(const std::string& text);
IniDocument load_ini(const std::string& path);

struct ModelConfig {
  std::string name = "gaussian";
  int d = 1;
  double param = 1.0;
  std::string path;  // table CSV, resolved against the config directory
};

struct ChaosConfig {
  int max_order = 1;
  CoefficientOptions options;
  std::string cache;  // empty: no cache file
};

struct VarianceConfig {
  int Q = 1;
  TruncatedOptions options;
};

struct RunConfig {
  IniDocument document;
  std::string source_path;
  ModelConfig model;
  ExperimentConfig experiment;
  ChaosConfig chaos;
  VarianceConfig variance;
  std::string hash() const { return document.hash(); }
};

/// Typed view of a document. Unknown sections or keys and malformed numbers
/// raise parse errors; `base_dir` resolves relative table paths.
RunConfig interpret(const IniDocument& doc, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

CovarianceModel make_model(const ModelConfig& model);

}  // namespace lkgrf
