#pragma once

#include <map>
#include <string>
#include <vector>

namespace ctxnet {

inline constexpr const char* kVersion = "0.1.0";

std::string sha256_file(const std::string& path);

// Written next to every CLI run's outputs: command, full config echo, seed,
// input/output digests and wall time, so any output can be reproduced.
struct RunManifest {
  std::string command;
  std::string config_json;  // serialized configuration echo
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, std::string> output_digests;
  double wall_seconds = 0.0;

  void add_input(const std::string& path) { input_digests[path] = sha256_file(path); }
  void add_output(const std::string& path) { output_digests[path] = sha256_file(path); }
  void save(const std::string& path) const;
};

}  // namespace ctxnet
