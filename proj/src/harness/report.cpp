#include "avp/harness/report.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "avp/runtime/node.hpp"

namespace avp::harness {

namespace {

bool is_vehicle_topic(const std::string& key, const std::string& topic) {
  if (!key.starts_with("avp/") || !key.ends_with("/" + topic)) return false;
  const auto ns = runtime::namespace_of(key);
  return !ns.empty() && ns != "coord" && ns != "sim" && ns != "rsu" && ns != "probe" && !ns.starts_with('_') &&
         key == "avp/" + ns + "/" + topic;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

RunReport build_report(std::span<const TapRecord> tap) {
  RunReport report;
  std::map<std::string, std::string> last_state;
  std::set<std::pair<SpotId, std::string>> holders;

  for (const auto& rec : tap) {
    const auto& env = rec.env;
    const auto& p = env.payload;
    try {
      if (is_vehicle_topic(env.key, "status")) {
        const auto ns = runtime::namespace_of(env.key);
        TransitionRecord t;
        t.t_ns = rec.recv_ns;
        t.ns = ns;
        t.from = last_state.contains(ns) ? last_state[ns] : std::string();
        t.to = p.at("state").get<std::string>();
        t.seq = p.at("seq").get<std::uint64_t>();
        t.failed = p.value("failed", false);
        if (p.contains("spot") && p.at("spot").is_number()) t.spot = p.at("spot").get<SpotId>();
        last_state[ns] = t.to;
        report.transitions.push_back(std::move(t));
      } else if (env.key == "avp/coord/reserved") {
        std::set<std::pair<SpotId, std::string>> now;
        for (const auto& h : p.at("holders")) now.emplace(h.at("spot").get<SpotId>(), h.at("ns").get<std::string>());
        for (const auto& [spot, ns] : holders) {
          if (!now.contains({spot, ns})) report.reservations.push_back({rec.recv_ns, "release", ns, spot});
        }
        for (const auto& [spot, ns] : now) {
          if (!holders.contains({spot, ns})) report.reservations.push_back({rec.recv_ns, "grant", ns, spot});
        }
        holders = std::move(now);
      } else if (env.key == "avp/sim/collision") {
        ++report.collisions;
      } else if (env.key.starts_with("avp/probe/rtt/")) {
        const auto ns = env.key.substr(std::string("avp/probe/rtt/").size());
        report.rtt[ns + "->" + p.value("peer", std::string("?"))] = msgbus::rtt_stats_from_json(p);
      }
    } catch (const json::exception&) {
      // malformed payloads are reported by the assertion suite, not here
    }
  }
  report.final_states = std::move(last_state);
  if (!tap.empty()) {
    report.started_ns = tap.front().recv_ns;
    report.finished_ns = tap.back().recv_ns;
  }
  return report;
}

json to_json(const RunReport& r) {
  json transitions = json::array();
  for (const auto& t : r.transitions) {
    transitions.push_back({{"t_ns", t.t_ns},
                           {"ns", t.ns},
                           {"from", t.from},
                           {"to", t.to},
                           {"seq", t.seq},
                           {"failed", t.failed},
                           {"spot", t.spot ? json(*t.spot) : json(nullptr)}});
  }
  json reservations = json::array();
  for (const auto& x : r.reservations) {
    reservations.push_back({{"t_ns", x.t_ns}, {"event", x.event}, {"ns", x.ns}, {"spot", x.spot}});
  }
  json rtt = json::object();
  for (const auto& [pair, stats] : r.rtt) rtt[pair] = msgbus::to_json(stats);
  json assertions = json::array();
  for (const auto& a : r.assertions) assertions.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  json kills = json::array();
  for (const auto& k : r.kills) kills.push_back({{"ns", k.ns}, {"at_ns", k.at_ns}});
  return json{{"scenario", r.scenario},
              {"mode", r.mode},
              {"seed", r.seed},
              {"completed", r.completed},
              {"abort_reason", r.abort_reason},
              {"started_ns", r.started_ns},
              {"finished_ns", r.finished_ns},
              {"transitions", transitions},
              {"reservations", reservations},
              {"collisions", r.collisions},
              {"rtt", rtt},
              {"assertions", assertions},
              {"final_states", r.final_states},
              {"kills", kills},
              {"info", r.info}};
}

RunReport report_from_json(const json& doc) {
  RunReport r;
  r.scenario = doc.at("scenario").get<std::string>();
  r.mode = doc.at("mode").get<std::string>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.completed = doc.at("completed").get<bool>();
  r.abort_reason = doc.at("abort_reason").get<std::string>();
  r.started_ns = doc.at("started_ns").get<std::int64_t>();
  r.finished_ns = doc.at("finished_ns").get<std::int64_t>();
  for (const auto& t : doc.at("transitions")) {
    TransitionRecord x;
    x.t_ns = t.at("t_ns").get<std::int64_t>();
    x.ns = t.at("ns").get<std::string>();
    x.from = t.at("from").get<std::string>();
    x.to = t.at("to").get<std::string>();
    x.seq = t.at("seq").get<std::uint64_t>();
    x.failed = t.at("failed").get<bool>();
    if (!t.at("spot").is_null()) x.spot = t.at("spot").get<SpotId>();
    r.transitions.push_back(std::move(x));
  }
  for (const auto& x : doc.at("reservations")) {
    r.reservations.push_back({x.at("t_ns").get<std::int64_t>(), x.at("event").get<std::string>(),
                              x.at("ns").get<std::string>(), x.at("spot").get<SpotId>()});
  }
  r.collisions = doc.at("collisions").get<std::uint64_t>();
  for (const auto& [pair, stats] : doc.at("rtt").items()) r.rtt[pair] = msgbus::rtt_stats_from_json(stats);
  for (const auto& a : doc.at("assertions")) {
    r.assertions.push_back({a.at("name").get<std::string>(), a.at("passed").get<bool>(), a.at("detail").get<std::string>()});
  }
  r.final_states = doc.at("final_states").get<std::map<std::string, std::string>>();
  for (const auto& k : doc.at("kills")) r.kills.push_back({k.at("ns").get<std::string>(), k.at("at_ns").get<std::int64_t>()});
  r.info = doc.at("info");
  return r;
}

std::string canonical_logs(const RunReport& r) {
  std::ostringstream out;
  for (const auto& t : r.transitions) {
    out << "T " << t.ns << ' ' << (t.from.empty() ? "-" : t.from) << ' ' << t.to << ' ' << t.seq << ' '
        << (t.failed ? "failed" : "ok") << ' ' << (t.spot ? std::to_string(*t.spot) : "-") << '\n';
  }
  for (const auto& x : r.reservations) out << "R " << x.event << ' ' << x.ns << ' ' << x.spot << '\n';
  return out.str();
}

std::string report_csv(const RunReport& r) {
  std::ostringstream out;
  out << "pair,rtt_ms,std_ms,max_rtt_ms,samples\n";
  for (const auto& [pair, s] : r.rtt) {
    out << csv_field(pair) << ',' << fmt::format("{:.2f},{:.2f},{:.2f}", s.mean_ms, s.std_ms, s.max_ms) << ','
        << s.samples << '\n';
  }
  out << "\nassertion,result,detail\n";
  for (const auto& a : r.assertions) {
    out << csv_field(a.name) << ',' << (a.passed ? "PASS" : "FAIL") << ',' << csv_field(a.detail) << '\n';
  }
  return out.str();
}

bool all_passed(const std::vector<AssertionResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const auto& a) { return a.passed; });
}

}  // namespace avp::harness
