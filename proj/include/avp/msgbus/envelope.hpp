#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace avp::msgbus {

using json = nlohmann::json;

inline constexpr std::size_t kDefaultMaxFrameBytes = 1u << 20;
inline constexpr std::string_view kControlPrefix = "_ctl/";

class BusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FrameTooLarge : public BusError {
 public:
  using BusError::BusError;
};

struct Envelope {
  std::string key;
  std::string sender_id;
  std::uint64_t seq = 0;
  std::int64_t timestamp_ns = 0;
  json payload;

  bool is_control() const { return key.starts_with(kControlPrefix); }
};

json to_json(const Envelope& env);
Envelope envelope_from_json(const json& doc);

std::int64_t wall_clock_ns();

/// 4-byte big-endian length prefix followed by the JSON text of the envelope.
std::string encode_frame(const Envelope& env);

/// Incremental decoder for the length-prefixed stream.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::size_t max_frame_bytes = kDefaultMaxFrameBytes) : max_frame_bytes_(max_frame_bytes) {}

  void feed(std::string_view bytes) { buffer_.append(bytes); }

  /// Next complete envelope. Throws FrameTooLarge when a declared length
  /// exceeds the limit and BusError on malformed JSON.
  std::optional<Envelope> next();

  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::size_t max_frame_bytes_;
  std::string buffer_;
};

}  // namespace avp::msgbus
