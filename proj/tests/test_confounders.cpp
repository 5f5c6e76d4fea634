#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "instadet/confounders.hpp"
#include "instadet/util.hpp"

using namespace instadet;

namespace {

PairRecord pos(const std::string& e, const std::string& c, const std::string& cls) {
  return {e, c, cls, Label::POSITIVE, NegType::NONE};
}

std::filesystem::path scratch_dir() {
  auto d = std::filesystem::temp_directory_path() / "instadet_conf_test";
  std::filesystem::create_directories(d);
  return d;
}

// A positive set with two classes and a skewed category distribution.
std::vector<PairRecord> demo_positives() {
  std::vector<PairRecord> ps;
  ps.push_back(pos("george_washington", "potus", "person"));
  ps.push_back(pos("george_washington", "general", "person"));
  ps.push_back(pos("peter_behrens", "architect", "person"));
  ps.push_back(pos("edwin_hubble", "astronomer", "person"));
  ps.push_back(pos("mumbai", "city", "location"));
  ps.push_back(pos("vicksburg", "city", "location"));
  ps.push_back(pos("amazon", "river", "location"));
  return ps;
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (Variant v : all_variants()) {
    CHECK(variant_from_name(variant_name(v)) == v);
  }
  CHECK(variant_name(Variant::POS_UNION_GLOBAL) == "pos_union_global");
  CHECK(is_union_variant(Variant::POS_UNION_INCLASS));
  CHECK_FALSE(is_union_variant(Variant::POS_INVERSE));
  CHECK_THROWS_AS(variant_from_name("pos_bogus"), std::runtime_error);
}

TEST_CASE("gen_inverse swaps the pair and is an involution") {
  auto p = pos("george_washington", "potus", "person");
  auto inv = gen_inverse(p);
  CHECK(inv.entity == "potus");
  CHECK(inv.category == "george_washington");
  CHECK(inv.onto_class == "person");
  CHECK(inv.label == Label::NEGATIVE);
  CHECK(inv.neg_type == NegType::INVERSE);
  auto back = gen_inverse(inv);
  CHECK(back.entity == p.entity);
  CHECK(back.category == p.category);
}

TEST_CASE("gen_inst2inst draws uniformly from the class excluding self") {
  auto pools = make_pools(demo_positives());
  auto p = pos("george_washington", "potus", "person");
  Rng rng(derive_stream(7, "i2i"));
  std::map<std::string, int> counts;
  const int n = 30000;
  for (int i = 0; i < n; ++i) {
    auto neg = gen_inst2inst(p, pools, rng);
    REQUIRE(neg.has_value());
    CHECK(neg->entity == "george_washington");
    CHECK(neg->neg_type == NegType::INST2INST);
    CHECK(neg->category != "george_washington");
    counts[neg->category]++;
  }
  // person entities: edwin_hubble, george_washington, peter_behrens; minus
  // self leaves 2 targets, each expected n/2 with sd = sqrt(n/4).
  CHECK(counts.size() == 2);
  double sd = std::sqrt(n * 0.25);
  for (const auto& [tok, c] : counts) {
    INFO(tok);
    CHECK(std::fabs(c - n / 2.0) < 4 * sd);
  }
}

TEST_CASE("gen_inst2inst fails when the class pool is a singleton") {
  std::vector<PairRecord> ps = {pos("solo", "thing", "widget"),
                                pos("a", "b", "person"), pos("c", "d", "person")};
  auto pools = make_pools(ps);
  Rng rng(1);
  CHECK_FALSE(gen_inst2inst(pos("solo", "thing", "widget"), pools, rng).has_value());
}

TEST_CASE("gen_inst2inst never reproduces a positive pair") {
  // george_washington's gold set includes an entity-like token.
  std::vector<PairRecord> ps = {
      pos("george_washington", "peter_behrens", "person"),  // contrived gold
      pos("peter_behrens", "architect", "person"),
      pos("edwin_hubble", "astronomer", "person"),
  };
  auto pools = make_pools(ps);
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    auto neg = gen_inst2inst(pos("george_washington", "peter_behrens", "person"), pools, rng);
    REQUIRE(neg.has_value());
    CHECK(neg->category == "edwin_hubble");  // only non-self, non-gold person entity
  }
}

TEST_CASE("gen_notinst global follows the datapoint frequency distribution") {
  auto pools = make_pools(demo_positives());
  // amazon's only gold category is river; eligible mass: potus 1, general 1,
  // architect 1, astronomer 1, city 2 (total 6).
  auto p = pos("amazon", "river", "location");
  Rng rng(derive_stream(11, "glob"));
  std::map<std::string, int> counts;
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    auto neg = gen_notinst(p, pools, NotInstMode::GLOBAL, rng);
    REQUIRE(neg.has_value());
    CHECK(neg->neg_type == NegType::NOTINST_GLOBAL);
    CHECK(neg->entity == "amazon");
    CHECK(neg->category != "river");
    counts[neg->category]++;
  }
  CHECK(counts["city"] > 0);
  // city carries 2/6 of the eligible mass; singletons carry 1/6 each.
  double sd2 = std::sqrt(n * (2.0 / 6.0) * (4.0 / 6.0));
  CHECK(std::fabs(counts["city"] - n / 3.0) < 4 * sd2);
  double sd1 = std::sqrt(n * (1.0 / 6.0) * (5.0 / 6.0));
  CHECK(std::fabs(counts["potus"] - n / 6.0) < 4 * sd1);
}

TEST_CASE("gen_notinst inclass is uniform over the class's distinct categories") {
  auto pools = make_pools(demo_positives());
  auto p = pos("peter_behrens", "architect", "person");
  Rng rng(derive_stream(13, "inclass"));
  std::map<std::string, int> counts;
  const int n = 30000;
  for (int i = 0; i < n; ++i) {
    auto neg = gen_notinst(p, pools, NotInstMode::INCLASS, rng);
    REQUIRE(neg.has_value());
    CHECK(neg->neg_type == NegType::NOTINST_INCLASS);
    counts[neg->category]++;
  }
  // person categories: architect (gold, excluded), astronomer, general, potus.
  CHECK(counts.size() == 3);
  CHECK(counts.count("architect") == 0);
  double sd = std::sqrt(n * (1.0 / 3.0) * (2.0 / 3.0));
  for (const auto& [tok, c] : counts) {
    INFO(tok);
    CHECK(std::fabs(c - n / 3.0) < 4 * sd);
  }
}

TEST_CASE("multi-category entities never see any of their gold categories") {
  auto pools = make_pools(demo_positives());
  // george_washington holds two gold categories.
  auto p = pos("george_washington", "potus", "person");
  Rng rng(17);
  for (int i = 0; i < 3000; ++i) {
    auto g = gen_notinst(p, pools, NotInstMode::GLOBAL, rng);
    auto c = gen_notinst(p, pools, NotInstMode::INCLASS, rng);
    REQUIRE(g.has_value());
    REQUIRE(c.has_value());
    CHECK(g->category != "potus");
    CHECK(g->category != "general");
    CHECK(c->category != "potus");
    CHECK(c->category != "general");
  }
}

TEST_CASE("build_variant keeps exact ratios") {
  auto ps = demo_positives();
  for (Variant v : all_variants()) {
    auto vd = build_variant(ps, v, 99);
    INFO(variant_name(v));
    CHECK(vd.skipped_positives == 0);
    CHECK(vd.positive_count() == ps.size());
    auto types = variant_neg_types(v);
    CHECK(vd.negative_count() == ps.size() * types.size());
    // Each positive appears exactly once.
    std::map<std::string, int> pos_seen;
    for (const auto& r : vd.records) {
      if (r.label == Label::POSITIVE) pos_seen[r.entity + "\t" + r.category]++;
    }
    for (const auto& [k, c] : pos_seen) CHECK(c == 1);
    // Negative types match the variant's allowed set.
    std::set<NegType> allowed(types.begin(), types.end());
    auto pools = make_pools(ps);
    for (const auto& r : vd.records) {
      if (r.label == Label::NEGATIVE) {
        CHECK(allowed.count(r.neg_type) == 1);
        CHECK_FALSE(pools.is_positive_pair(r.entity, r.category));
        CHECK(r.entity != r.category);
        if (r.neg_type == NegType::NOTINST_INCLASS) {
          const auto& cats = pools.categories_by_class.at(r.onto_class);
          CHECK(std::binary_search(cats.begin(), cats.end(), r.category));
        }
      }
    }
  }
}

TEST_CASE("build_variant is deterministic per seed") {
  auto ps = demo_positives();
  auto dir = scratch_dir();
  auto a = build_variant(ps, Variant::POS_UNION_GLOBAL, 42);
  auto b = build_variant(ps, Variant::POS_UNION_GLOBAL, 42);
  auto pa = (dir / "a.jsonl").string();
  auto pb = (dir / "b.jsonl").string();
  save_variant(pa, a);
  save_variant(pb, b);
  CHECK(read_file(pa) == read_file(pb));

  auto c = build_variant(ps, Variant::POS_UNION_GLOBAL, 43);
  auto pc = (dir / "c.jsonl").string();
  save_variant(pc, c);
  CHECK(read_file(pa) != read_file(pc));
}

TEST_CASE("skip-with-positive keeps ratios exact on degenerate classes") {
  std::vector<PairRecord> ps = {
      pos("solo", "thing", "widget"),  // inst2inst cannot succeed
      pos("a", "b", "person"),
      pos("c", "d", "person"),
  };
  auto vd = build_variant(ps, Variant::POS_INST2INST, 5);
  CHECK(vd.skipped_positives == 1);
  CHECK(vd.positive_count() == 2);
  CHECK(vd.negative_count() == 2);
  // The skipped positive is absent entirely.
  for (const auto& r : vd.records) CHECK(r.entity != "solo");

  auto vu = build_variant(ps, Variant::POS_UNION_INCLASS, 5);
  CHECK(vu.skipped_positives == 1);
  CHECK(vu.positive_count() == 2);
  CHECK(vu.negative_count() == 6);
}

TEST_CASE("inverse collisions with genuine positives are skipped") {
  // Both (e,c) and (c,e) are positive; the inverse of each collides.
  std::vector<PairRecord> ps = {
      pos("alpha", "beta", "person"),
      pos("beta", "alpha", "person"),
      pos("gamma", "delta", "person"),
  };
  auto vd = build_variant(ps, Variant::POS_INVERSE, 9);
  CHECK(vd.skipped_positives == 2);
  CHECK(vd.positive_count() == 1);
  CHECK(vd.negative_count() == 1);
}

TEST_CASE("variant file round trips with header intact") {
  auto dir = scratch_dir();
  auto vd = build_variant(demo_positives(), Variant::POS_NOTINST_INCLASS, 1234);
  auto p = (dir / "variant.jsonl").string();
  save_variant(p, vd);
  auto loaded = load_variant(p);
  CHECK(loaded.variant == vd.variant);
  CHECK(loaded.seed == vd.seed);
  CHECK(loaded.skipped_positives == vd.skipped_positives);
  CHECK(loaded.records == vd.records);

  // First line is a header object, not a record.
  auto first = read_file(p).substr(0, read_file(p).find('\n'));
  CHECK(first.find("\"variant\"") != std::string::npos);
  CHECK(first.find("\"seed\"") != std::string::npos);
}
