#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kerrcat/common.hpp"

namespace kerrcat::io {

/// Flat key = value configuration; '#' starts a comment. All values numeric.
struct RunConfig {
  std::string experiment;
  std::map<std::string, double> values;
  std::uint64_t seed = 1;
  std::string outDir = ".";
  int jobs = 1;
  std::optional<int> fockDim;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  double get(const std::string& key) const;
  double getOr(const std::string& key, double fallback) const;
};

struct Diagnostic {
  enum class Level { error, warning } level;
  std::string key;
  std::string message;
};

/// Keys every experiment accepts plus the experiment-specific ones.
const std::vector<std::string>& knownKeys(const std::string& experiment);

std::map<std::string, double> parseConfigFile(const std::string& path);

/// All key checks without running the experiment.
std::vector<Diagnostic> validateConfig(const std::string& path, const std::string& experiment);

struct ExperimentInfo {
  std::string name;
  std::string figure;
  std::string description;
};

/// Registry in stable order; names double as CLI subcommands.
const std::vector<ExperimentInfo>& experimentRegistry();

void writeFile(const std::string& path, const std::string& contents);

}  // namespace kerrcat::io
