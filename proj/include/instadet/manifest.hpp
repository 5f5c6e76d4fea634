#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace instadet {

inline constexpr const char* kToolName = "instadet";
inline constexpr const char* kToolVersion = "0.1.0";

// Reproducibility sidecar: everything needed to re-run the command that
// produced an artifact.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::string> input_hashes;  // path -> fnv1a64 hex
  std::uint64_t seed = 0;
  std::string timestamp;  // ISO-8601 UTC, filled at write time when empty
};

RunManifest make_manifest(const std::string& command,
                          const std::map<std::string, std::string>& flags,
                          std::uint64_t seed, const std::vector<std::string>& input_paths);

std::string manifest_path_for(const std::string& artifact_path);
std::string failed_marker_for(const std::string& artifact_path);

void write_manifest(const std::string& artifact_path, const RunManifest& manifest);
RunManifest load_manifest_for(const std::string& artifact_path);

// Runs `produce`, then writes the manifest sidecar and clears any stale
// `.failed` marker. If `produce` throws, a `.failed` marker with the error
// text is left next to the artifact and the exception propagates.
void write_artifact(const std::string& artifact_path, const RunManifest& manifest,
                    const std::function<void()>& produce);

}  // namespace instadet
