#include "instadet/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <stdexcept>
#include <vector>

#include "instadet/util.hpp"
#include "json.hpp"

namespace instadet {

namespace {

std::string utc_now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunManifest make_manifest(const std::string& command,
                          const std::map<std::string, std::string>& flags,
                          std::uint64_t seed, const std::vector<std::string>& input_paths) {
  RunManifest m;
  m.command = command;
  m.flags = flags;
  m.seed = seed;
  for (const auto& path : input_paths) m.input_hashes[path] = fnv1a64_file_hex(path);
  return m;
}

std::string manifest_path_for(const std::string& artifact_path) {
  return artifact_path + ".manifest.json";
}

std::string failed_marker_for(const std::string& artifact_path) {
  return artifact_path + ".failed";
}

void write_manifest(const std::string& artifact_path, const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["flags"] = manifest.flags;
  j["inputs"] = manifest.input_hashes;
  j["seed"] = manifest.seed;
  j["timestamp"] = manifest.timestamp.empty() ? utc_now_iso8601() : manifest.timestamp;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  if (std::FILE* f = std::fopen(artifact_path.c_str(), "rb")) {
    std::fclose(f);
    j["artifact_hash"] = fnv1a64_file_hex(artifact_path);
  }
  write_file(manifest_path_for(artifact_path), j.dump() + "\n");
}

RunManifest load_manifest_for(const std::string& artifact_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest_path_for(artifact_path)));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(manifest_path_for(artifact_path) + ": bad manifest: " + e.what());
  }
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.flags = j.at("flags").get<std::map<std::string, std::string>>();
  m.input_hashes = j.at("inputs").get<std::map<std::string, std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.timestamp = j.at("timestamp").get<std::string>();
  return m;
}

void write_artifact(const std::string& artifact_path, const RunManifest& manifest,
                    const std::function<void()>& produce) {
  try {
    produce();
  } catch (const std::exception& e) {
    write_file(failed_marker_for(artifact_path),
               std::string("command: ") + manifest.command + "\nerror: " + e.what() + "\n");
    throw;
  }
  write_manifest(artifact_path, manifest);
  std::remove(failed_marker_for(artifact_path).c_str());
}

}  // namespace instadet
