#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "binilasso/errors.hpp"

#ifndef BINILASSO_VERSION_STRING
#define BINILASSO_VERSION_STRING "0.0.0-dev"
#endif

namespace binilasso {

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for digest: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  char buf[24];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

inline std::string iso_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Every output file gets a sidecar manifest carrying the full resolved
/// configuration, seed, version and input digests, so the artifact is
/// reproducible from the manifest alone. Timestamps and timings live here
/// and only here; the result files themselves stay byte-reproducible.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string version = BINILASSO_VERSION_STRING;
  std::map<std::string, std::string> input_digests;
  std::string started_at;
  std::string finished_at;
  double wall_time_seconds = 0.0;

  nlohmann::json to_json() const {
    return {{"command", command},
            {"argv", argv},
            {"config", config},
            {"seed", seed},
            {"version", version},
            {"input_digests", input_digests},
            {"started_at", started_at},
            {"finished_at", finished_at},
            {"wall_time_seconds", wall_time_seconds}};
  }

  void write(const std::string& output_path) const {
    std::ofstream out(output_path + ".manifest.json");
    if (!out) throw Error("cannot write manifest: " + output_path + ".manifest.json");
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace binilasso
