#include "avp/harness/tap.hpp"

#include <stdexcept>
#include <string>

namespace avp::harness {

using msgbus::json;

json to_json(const TapRecord& record) {
  auto doc = msgbus::to_json(record.env);
  doc["recv_ns"] = record.recv_ns;
  return doc;
}

TapRecord tap_record_from_json(const json& doc) {
  return TapRecord{msgbus::envelope_from_json(doc), doc.at("recv_ns").get<std::int64_t>()};
}

std::vector<TapRecord> read_tap(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tap file " + path.string());
  std::vector<TapRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(tap_record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad tap record: " + e.what());
    }
  }
  return records;
}

void write_tap(const std::filesystem::path& path, const std::vector<TapRecord>& records) {
  TapWriter writer(path);
  for (const auto& r : records) writer.append(r);
}

TapWriter::TapWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw std::runtime_error("cannot write tap file " + path.string());
}

void TapWriter::append(const TapRecord& record) { out_ << to_json(record).dump() << '\n'; }

}  // namespace avp::harness
