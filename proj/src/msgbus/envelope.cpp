#include "avp/msgbus/envelope.hpp"

#include <chrono>

namespace avp::msgbus {

json to_json(const Envelope& env) {
  return json{{"key", env.key},
              {"sender_id", env.sender_id},
              {"seq", env.seq},
              {"timestamp_ns", env.timestamp_ns},
              {"payload", env.payload}};
}

Envelope envelope_from_json(const json& doc) {
  if (!doc.is_object()) throw BusError("envelope must be a JSON object");
  try {
    Envelope env;
    env.key = doc.at("key").get<std::string>();
    env.sender_id = doc.at("sender_id").get<std::string>();
    env.seq = doc.at("seq").get<std::uint64_t>();
    env.timestamp_ns = doc.at("timestamp_ns").get<std::int64_t>();
    env.payload = doc.contains("payload") ? doc.at("payload") : json();
    return env;
  } catch (const json::exception& e) {
    throw BusError(std::string("malformed envelope: ") + e.what());
  }
}

std::int64_t wall_clock_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string encode_frame(const Envelope& env) {
  const std::string body = to_json(env).dump();
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string frame;
  frame.reserve(4 + body.size());
  frame.push_back(static_cast<char>((n >> 24) & 0xff));
  frame.push_back(static_cast<char>((n >> 16) & 0xff));
  frame.push_back(static_cast<char>((n >> 8) & 0xff));
  frame.push_back(static_cast<char>(n & 0xff));
  frame += body;
  return frame;
}

std::optional<Envelope> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const auto byte = [this](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])); };
  const std::uint32_t n = (byte(0) << 24) | (byte(1) << 16) | (byte(2) << 8) | byte(3);
  if (n > max_frame_bytes_) {
    throw FrameTooLarge("frame of " + std::to_string(n) + " bytes exceeds limit " + std::to_string(max_frame_bytes_));
  }
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  json doc;
  try {
    doc = json::parse(buffer_.begin() + 4, buffer_.begin() + 4 + n);
  } catch (const json::exception& e) {
    buffer_.erase(0, 4 + n);
    throw BusError(std::string("frame is not valid JSON: ") + e.what());
  }
  buffer_.erase(0, 4 + n);
  return envelope_from_json(doc);
}

}  // namespace avp::msgbus
