#include "avp/msgbus/key_expr.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace avp::msgbus {
namespace {

bool is_wildcard(const std::string& token) { return token == "*" || token == "**"; }

std::vector<std::string> split(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto slash = text.find('/', start);
    if (slash == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      break;
    }
    out.emplace_back(text.substr(start, slash - start));
    start = slash + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i != begin) out += '/';
    out += parts[i];
  }
  return out;
}

bool segment_matches(const std::string& pattern, const std::string& key) {
  return pattern == "*" || pattern == key;
}

}  // namespace

KeyExpr KeyExpr::parse(std::string_view text) {
  if (text.empty()) throw KeyExprError("empty key expression");
  auto segments = split(text);
  int double_count = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    if (seg.empty()) {
      throw KeyExprError("empty segment at position " + std::to_string(i) + " in '" + std::string(text) + "'");
    }
    if (seg == "**") {
      if (++double_count > 1) throw KeyExprError("'**' appears more than once in '" + std::string(text) + "'");
      continue;
    }
    if (seg != "*" && seg.find('*') != std::string::npos) {
      throw KeyExprError("segment '" + seg + "' mixes literal characters with '*'");
    }
  }
  return KeyExpr(std::move(segments));
}

std::size_t KeyExpr::wildcard_count() const {
  return static_cast<std::size_t>(std::count_if(segments_.begin(), segments_.end(), is_wildcard));
}

bool KeyExpr::has_double_wildcard() const {
  return std::find(segments_.begin(), segments_.end(), "**") != segments_.end();
}

std::string KeyExpr::str() const { return join(segments_, 0, segments_.size()); }

KeyExpr parse_literal_key(std::string_view text) {
  auto key = KeyExpr::parse(text);
  if (!key.is_literal()) throw KeyExprError("key '" + std::string(text) + "' must not contain wildcards");
  return key;
}

std::optional<std::vector<std::string>> match_captures(const KeyExpr& pattern, const KeyExpr& key) {
  if (!key.is_literal()) throw KeyExprError("key '" + key.str() + "' must not contain wildcards");
  const auto& p = pattern.segments();
  const auto& k = key.segments();
  std::vector<std::string> captures;

  const auto dbl = std::find(p.begin(), p.end(), "**");
  if (dbl == p.end()) {
    if (p.size() != k.size()) return std::nullopt;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!segment_matches(p[i], k[i])) return std::nullopt;
      if (p[i] == "*") captures.push_back(k[i]);
    }
    return captures;
  }

  const auto prefix = static_cast<std::size_t>(dbl - p.begin());
  const auto suffix = p.size() - prefix - 1;
  if (k.size() < prefix + suffix) return std::nullopt;
  for (std::size_t i = 0; i < prefix; ++i) {
    if (!segment_matches(p[i], k[i])) return std::nullopt;
    if (p[i] == "*") captures.push_back(k[i]);
  }
  captures.push_back(join(k, prefix, k.size() - suffix));
  for (std::size_t i = 0; i < suffix; ++i) {
    const auto& ps = p[prefix + 1 + i];
    const auto& ks = k[k.size() - suffix + i];
    if (!segment_matches(ps, ks)) return std::nullopt;
    if (ps == "*") captures.push_back(ks);
  }
  return captures;
}

bool key_matches(const KeyExpr& pattern, const KeyExpr& key) { return match_captures(pattern, key).has_value(); }

bool key_matches(std::string_view pattern, std::string_view key) {
  return key_matches(KeyExpr::parse(pattern), parse_literal_key(key));
}

RemapRule RemapRule::make(std::string_view external, std::string_view internal) {
  auto ext = KeyExpr::parse(external);
  std::vector<std::string> kinds;
  for (const auto& seg : ext.segments()) {
    if (is_wildcard(seg)) kinds.push_back(seg);
  }

  if (internal.empty()) throw KeyExprError("empty remap template");
  const auto parts = split(internal);
  std::vector<Token> tokens;
  std::size_t positional = 0;
  std::vector<int> indexed;
  for (const auto& part : parts) {
    if (part.empty()) throw KeyExprError("empty segment in remap template '" + std::string(internal) + "'");
    if (is_wildcard(part)) {
      if (positional >= kinds.size() || kinds[positional] != part) {
        throw KeyExprError("remap template '" + std::string(internal) + "' wildcard '" + part +
                           "' does not correspond to a wildcard of '" + ext.str() + "'");
      }
      tokens.push_back({{}, static_cast<int>(positional++)});
    } else if (part.front() == '$') {
      int index = 0;
      const auto* begin = part.data() + 1;
      const auto* end = part.data() + part.size();
      const auto [ptr, ec] = std::from_chars(begin, end, index);
      if (ec != std::errc{} || ptr != end || index < 1 || static_cast<std::size_t>(index) > kinds.size()) {
        throw KeyExprError("remap template token '" + part + "' does not name a capture of '" + ext.str() + "'");
      }
      indexed.push_back(index - 1);
      tokens.push_back({{}, index - 1});
    } else {
      if (part.find('*') != std::string::npos) throw KeyExprError("segment '" + part + "' mixes literal characters with '*'");
      tokens.push_back({part, -1});
    }
  }

  if (positional > 0 && !indexed.empty()) {
    throw KeyExprError("remap template '" + std::string(internal) + "' mixes positional and indexed captures");
  }
  const std::size_t used = positional > 0 ? positional : std::set<int>(indexed.begin(), indexed.end()).size();
  const std::size_t refs = positional > 0 ? positional : indexed.size();
  if (used != kinds.size() || refs != kinds.size()) {
    throw KeyExprError("wildcard count mismatch: '" + ext.str() + "' has " + std::to_string(kinds.size()) +
                       " wildcard(s), template '" + std::string(internal) + "' uses " + std::to_string(refs));
  }
  return RemapRule(std::move(ext), std::string(internal), std::move(tokens));
}

std::optional<std::string> RemapRule::apply(const KeyExpr& key) const {
  const auto captures = match_captures(external_, key);
  if (!captures) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& token : tokens_) {
    const std::string& text = token.capture >= 0 ? (*captures)[static_cast<std::size_t>(token.capture)] : token.literal;
    // an empty `**` capture contributes no segment
    if (!text.empty()) out.push_back(text);
  }
  if (out.empty()) return std::nullopt;
  return join(out, 0, out.size());
}

std::optional<std::string> RemapRule::apply(std::string_view key) const { return apply(parse_literal_key(key)); }

}  // namespace avp::msgbus
