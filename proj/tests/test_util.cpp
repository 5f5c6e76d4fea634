#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "instadet/util.hpp"

using namespace instadet;

TEST_CASE("normalize_token lowercases and underscores whitespace") {
  CHECK(normalize_token("George Washington") == "george_washington");
  CHECK(normalize_token("  New   York  ") == "new_york");
  CHECK(normalize_token("ALREADY_FINE") == "already_fine");
  CHECK(normalize_token("one\ttwo") == "one_two");
  CHECK(normalize_token("") == "");
  CHECK(normalize_token("   ") == "");
}

TEST_CASE("normalize_token is idempotent") {
  for (const char* s : {"A b  C", "x", "Mult  i\tword ", "_a_b_"}) {
    auto once = normalize_token(s);
    CHECK(normalize_token(once) == once);
  }
}

TEST_CASE("split handles empties and separators") {
  CHECK(split("a|b|c", '|') == std::vector<std::string>{"a", "b", "c"});
  CHECK(split("a||c", '|') == std::vector<std::string>{"a", "", "c"});
  CHECK(split("", '|') == std::vector<std::string>{""});
  CHECK(split("abc", '|') == std::vector<std::string>{"abc"});
  CHECK(split("|", '|') == std::vector<std::string>{"", ""});
}

TEST_CASE("file round trip") {
  auto dir = std::filesystem::temp_directory_path() / "instadet_util_test";
  std::filesystem::create_directories(dir);
  auto p = (dir / "t.txt").string();
  write_file(p, "hello\nworld\n");
  CHECK(read_file(p) == "hello\nworld\n");
  CHECK_THROWS_AS(read_file((dir / "missing.txt").string()), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("content hash is stable and content-sensitive") {
  auto dir = std::filesystem::temp_directory_path() / "instadet_util_hash";
  std::filesystem::create_directories(dir);
  auto p1 = (dir / "a.txt").string();
  auto p2 = (dir / "b.txt").string();
  write_file(p1, "same");
  write_file(p2, "same");
  CHECK(fnv1a64_file_hex(p1) == fnv1a64_file_hex(p2));
  CHECK(fnv1a64_file_hex(p1) == fnv1a64_hex("same"));
  write_file(p2, "diff");
  CHECK(fnv1a64_file_hex(p1) != fnv1a64_file_hex(p2));
  CHECK(fnv1a64_hex("").size() == 16);
  std::filesystem::remove_all(dir);
}

TEST_CASE("format_double is fixed-point with pinned decimals") {
  CHECK(format_double(0.5, 4) == "0.5000");
  CHECK(format_double(2.0 / 3.0, 4) == "0.6667");
  CHECK(format_double(-1.25, 2) == "-1.25");
  CHECK(format_double(0.0, 3) == "0.000");
}

TEST_CASE("parallel_for covers every index exactly once") {
  for (int jobs : {1, 2, 4, 8}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(1000, jobs, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  // Zero-length loop is a no-op.
  parallel_for(0, 4, [](std::size_t) { throw std::logic_error("must not run"); });
}

TEST_CASE("parallel_for propagates worker exceptions") {
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [](std::size_t i) {
                                 if (i == 57) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
