#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace avp::msgbus {

class KeyExprError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A `/`-separated key expression. Tokens are literals, `*` (exactly one
/// segment) or `**` (zero or more segments, at most once per expression).
class KeyExpr {
 public:
  static KeyExpr parse(std::string_view text);

  const std::vector<std::string>& segments() const { return segments_; }
  bool is_literal() const { return wildcard_count() == 0; }
  std::size_t wildcard_count() const;
  bool has_double_wildcard() const;
  std::string str() const;

  bool operator==(const KeyExpr&) const = default;

 private:
  explicit KeyExpr(std::vector<std::string> segments) : segments_(std::move(segments)) {}

  std::vector<std::string> segments_;
};

/// Parses `text` and rejects wildcards.
KeyExpr parse_literal_key(std::string_view text);

bool key_matches(const KeyExpr& pattern, const KeyExpr& key);
bool key_matches(std::string_view pattern, std::string_view key);

/// Captured text for each wildcard of `pattern`, in order. A `**` capture is
/// the matched segments joined with `/` and may be empty.
std::optional<std::vector<std::string>> match_captures(const KeyExpr& pattern, const KeyExpr& key);

/// Re-keys envelopes matching an external pattern into an internal template.
///
/// The template refers to captures either positionally (`*` / `**` tokens in
/// the same order and kind as the external pattern) or by index (`$1`, `$2`
/// ...). Every capture must be used exactly as often as the external pattern
/// declares wildcards, otherwise construction fails.
class RemapRule {
 public:
  static RemapRule make(std::string_view external, std::string_view internal);

  const KeyExpr& external() const { return external_; }
  const std::string& internal_template() const { return internal_text_; }

  /// The re-keyed key, or nullopt when `key` is outside the external pattern.
  std::optional<std::string> apply(const KeyExpr& key) const;
  std::optional<std::string> apply(std::string_view key) const;

 private:
  struct Token {
    std::string literal;
    int capture = -1;  // index into captures when >= 0
  };

  RemapRule(KeyExpr external, std::string internal_text, std::vector<Token> tokens)
      : external_(std::move(external)), internal_text_(std::move(internal_text)), tokens_(std::move(tokens)) {}

  KeyExpr external_;
  std::string internal_text_;
  std::vector<Token> tokens_;
};

}  // namespace avp::msgbus
