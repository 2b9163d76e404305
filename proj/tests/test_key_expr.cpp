#include <doctest.h>

#include <random>
#include <regex>
#include <string>
#include <vector>

#include "avp/msgbus/key_expr.hpp"

using namespace avp::msgbus;

namespace {

// Independent matcher: translate the pattern into an ECMAScript regex over
// "/"-prefixed keys, so each segment is "/<text>".
bool regex_matches(const std::vector<std::string>& pattern, const std::string& key) {
  std::string re;
  for (const auto& seg : pattern) {
    if (seg == "*") {
      re += "/[^/]+";
    } else if (seg == "**") {
      re += "(/[^/]+)*";
    } else {
      re += "/" + seg;
    }
  }
  return std::regex_match("/" + key, std::regex(re));
}

std::string join(const std::vector<std::string>& segs) {
  std::string out;
  for (std::size_t i = 0; i < segs.size(); ++i) out += (i ? "/" : "") + segs[i];
  return out;
}

}  // namespace

TEST_SUITE("key_expr") {
  TEST_CASE("parse rejects malformed expressions") {
    CHECK_THROWS_AS(KeyExpr::parse(""), KeyExprError);
    CHECK_THROWS_AS(KeyExpr::parse("a//b"), KeyExprError);
    CHECK_THROWS_AS(KeyExpr::parse("/a"), KeyExprError);
    CHECK_THROWS_AS(KeyExpr::parse("a/"), KeyExprError);
    CHECK_THROWS_AS(KeyExpr::parse("a/**/b/**"), KeyExprError);
    CHECK_THROWS_AS(KeyExpr::parse("a/b*"), KeyExprError);
    CHECK_THROWS_AS(parse_literal_key("a/*"), KeyExprError);
    CHECK(KeyExpr::parse("avp/*/status").wildcard_count() == 1);
    CHECK(KeyExpr::parse("avp/**").has_double_wildcard());
    CHECK(KeyExpr::parse("avp/v1/status").is_literal());
    CHECK(KeyExpr::parse("avp/*/x").str() == "avp/*/x");
  }

  TEST_CASE("hand-picked matches") {
    CHECK(key_matches("avp/*/status", "avp/v1/status"));
    CHECK_FALSE(key_matches("avp/*/status", "avp/v1/x/status"));
    CHECK(key_matches("avp/**", "avp"));
    CHECK(key_matches("avp/**", "avp/a/b/c"));
    CHECK(key_matches("**", "x"));
    CHECK(key_matches("a/**/z", "a/z"));
    CHECK(key_matches("a/**/z", "a/b/c/z"));
    CHECK_FALSE(key_matches("a/**/z", "a/b/c"));
    CHECK_FALSE(key_matches("avp/v1", "avp/v2"));
  }

  TEST_CASE("matcher agrees with a regex oracle on random pairs") {
    std::mt19937_64 rng(20240611);
    const std::vector<std::string> alphabet{"a", "b", "c"};
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    int positives = 0;
    for (int i = 0; i < 1000; ++i) {
      std::vector<std::string> pattern;
      const std::size_t plen = 1 + pick(4);
      bool has_dd = false;
      for (std::size_t s = 0; s < plen; ++s) {
        const auto r = pick(6);
        if (r == 0) {
          pattern.push_back("*");
        } else if (r == 1 && !has_dd) {
          pattern.push_back("**");
          has_dd = true;
        } else {
          pattern.push_back(alphabet[pick(alphabet.size())]);
        }
      }
      std::vector<std::string> key;
      const std::size_t klen = 1 + pick(5);
      for (std::size_t s = 0; s < klen; ++s) key.push_back(alphabet[pick(alphabet.size())]);

      const bool expected = regex_matches(pattern, join(key));
      positives += expected ? 1 : 0;
      INFO("pattern=", join(pattern), " key=", join(key));
      CHECK(key_matches(join(pattern), join(key)) == expected);
    }
    // The generator must exercise both outcomes.
    CHECK(positives > 50);
    CHECK(positives < 950);
  }

  TEST_CASE("captures") {
    const auto caps = match_captures(KeyExpr::parse("avp/*/x/**"), KeyExpr::parse("avp/v1/x/a/b"));
    REQUIRE(caps);
    CHECK(*caps == std::vector<std::string>{"v1", "a/b"});
    const auto empty = match_captures(KeyExpr::parse("a/**"), KeyExpr::parse("a"));
    REQUIRE(empty);
    CHECK(*empty == std::vector<std::string>{""});
    CHECK_FALSE(match_captures(KeyExpr::parse("a/*"), KeyExpr::parse("b/c")));
  }

  TEST_CASE("remap round trip restores the original key") {
    const auto fwd = RemapRule::make("fleet/*/telemetry/**", "avp/*/tel/**");
    const auto back = RemapRule::make("avp/*/tel/**", "fleet/*/telemetry/**");
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
      std::vector<std::string> tail;
      const int n = static_cast<int>(rng() % 4);
      for (int k = 0; k < n; ++k) tail.push_back("s" + std::to_string(rng() % 10));
      std::string key = "fleet/v" + std::to_string(rng() % 100) + "/telemetry";
      if (!tail.empty()) key += "/" + join(tail);
      const auto mid = fwd.apply(key);
      REQUIRE(mid);
      CHECK(mid->starts_with("avp/"));
      const auto round = back.apply(*mid);
      REQUIRE(round);
      CHECK(*round == key);
    }
    CHECK_FALSE(fwd.apply("other/v1/telemetry"));
  }

  TEST_CASE("remap by capture index") {
    const auto swap = RemapRule::make("a/*/*", "b/$2/$1");
    CHECK(swap.apply("a/x/y") == std::optional<std::string>("b/y/x"));
    CHECK_THROWS_AS(RemapRule::make("a/*/*", "b/$1"), KeyExprError);
    CHECK_THROWS_AS(RemapRule::make("a/*", "b/**"), KeyExprError);
    CHECK_THROWS_AS(RemapRule::make("a/*", "b/$3"), KeyExprError);
  }
}
