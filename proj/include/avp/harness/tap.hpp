#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "avp/msgbus/envelope.hpp"

namespace avp::harness {

/// One recorded bus message and when the recorder received it.
struct TapRecord {
  msgbus::Envelope env;
  std::int64_t recv_ns = 0;
};

/// The envelope's JSON object with an added `recv_ns` field.
msgbus::json to_json(const TapRecord& record);
TapRecord tap_record_from_json(const msgbus::json& doc);

/// Reads an NDJSON tap; blank lines are skipped. Throws std::runtime_error
/// naming the line number on a malformed line.
std::vector<TapRecord> read_tap(const std::filesystem::path& path);
void write_tap(const std::filesystem::path& path, const std::vector<TapRecord>& records);

/// Appends records to an NDJSON file as they arrive.
class TapWriter {
 public:
  explicit TapWriter(const std::filesystem::path& path);
  void append(const TapRecord& record);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

}  // namespace avp::harness
