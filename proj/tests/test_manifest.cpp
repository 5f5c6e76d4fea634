#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "instadet/manifest.hpp"
#include "instadet/util.hpp"

using namespace instadet;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/instadet_manifest_") + name;
}

bool exists(const std::string& path) {
  std::ifstream in(path);
  return in.good();
}

}  // namespace

TEST_CASE("manifest round trips through its sidecar") {
  std::string input = temp_path("input.txt");
  write_file(input, "raw bytes\n");
  std::string artifact = temp_path("artifact.json");
  write_file(artifact, "{}\n");

  RunManifest m = make_manifest("split", {{"target_retention", "0.90"}, {"no_filter", "false"}},
                                42, {input});
  CHECK(m.input_hashes.at(input) == fnv1a64_file_hex(input));

  write_manifest(artifact, m);
  CHECK(exists(manifest_path_for(artifact)));

  RunManifest r = load_manifest_for(artifact);
  CHECK(r.command == "split");
  CHECK(r.flags.at("target_retention") == "0.90");
  CHECK(r.input_hashes == m.input_hashes);
  CHECK(r.seed == 42);
  CHECK_FALSE(r.timestamp.empty());

  std::string raw = read_file(manifest_path_for(artifact));
  CHECK(raw.find("\"tool\":\"instadet\"") != std::string::npos);
  CHECK(raw.find("\"version\":\"0.1.0\"") != std::string::npos);
  CHECK(raw.find("\"artifact_hash\"") != std::string::npos);

  std::remove(input.c_str());
  std::remove(artifact.c_str());
  std::remove(manifest_path_for(artifact).c_str());
}

TEST_CASE("write_artifact clears old failure markers on success") {
  std::string artifact = temp_path("good.json");
  write_file(failed_marker_for(artifact), "stale\n");

  RunManifest m = make_manifest("gen-variants", {}, 7, {});
  write_artifact(artifact, m, [&] { write_file(artifact, "payload\n"); });

  CHECK(exists(artifact));
  CHECK(exists(manifest_path_for(artifact)));
  CHECK_FALSE(exists(failed_marker_for(artifact)));

  std::remove(artifact.c_str());
  std::remove(manifest_path_for(artifact).c_str());
}

TEST_CASE("write_artifact leaves a failure marker when production throws") {
  std::string artifact = temp_path("bad.json");
  RunManifest m = make_manifest("eval", {}, 9, {});

  CHECK_THROWS_AS(write_artifact(artifact, m,
                                 [&] {
                                   write_file(artifact, "partial");
                                   throw std::runtime_error("disk full, allegedly");
                                 }),
                  std::runtime_error);

  CHECK(exists(failed_marker_for(artifact)));
  std::string marker = read_file(failed_marker_for(artifact));
  CHECK(marker.find("eval") != std::string::npos);
  CHECK(marker.find("disk full") != std::string::npos);
  CHECK_FALSE(exists(manifest_path_for(artifact)));

  std::remove(artifact.c_str());
  std::remove(failed_marker_for(artifact).c_str());
}

TEST_CASE("manifest hashing rejects missing inputs") {
  CHECK_THROWS(make_manifest("split", {}, 1, {temp_path("nope_does_not_exist")}));
}
