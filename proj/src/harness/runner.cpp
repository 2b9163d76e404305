#include "avp/harness/runner.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "avp/coordination/managers.hpp"
#include "avp/harness/assertions.hpp"
#include "avp/harness/operator.hpp"
#include "avp/msgbus/transport.hpp"
#include "avp/node/vehicle_node.hpp"
#include "avp/perception/occupancy.hpp"
#include "avp/runtime/drivers.hpp"
#include "avp/world/world.hpp"

namespace avp::harness {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t seconds_to_ns(double s) { return static_cast<std::int64_t>(std::llround(s * 1e9)); }

/// Scenario progress as seen from the tap: latest vehicle states, which
/// state-triggered faults are due, and whether the run may end.
class Progress {
 public:
  explicit Progress(const Scenario& s) : scenario_(s), fired_(s.faults.size(), false) {}

  /// Namespaces whose state-triggered kill fires because of `rec`.
  std::vector<std::string> observe(const TapRecord& rec) {
    std::vector<std::string> kills;
    const auto& key = rec.env.key;
    if (!key.starts_with("avp/") || !key.ends_with("/status")) return kills;
    const auto ns = runtime::namespace_of(key);
    if (key != "avp/" + ns + "/status" || !rec.env.payload.is_object()) return kills;
    const auto state = rec.env.payload.value("state", std::string());
    states_[ns] = state;
    for (std::size_t i = 0; i < scenario_.faults.size(); ++i) {
      const auto& f = scenario_.faults[i];
      if (fired_[i] || f.kill != ns || !f.when_state || node::to_string(*f.when_state) != state) continue;
      fired_[i] = true;
      kills.push_back(ns);
    }
    return kills;
  }

  void mark_killed(const std::string& ns) { killed_.insert(ns); }
  bool killed(const std::string& ns) const { return killed_.contains(ns); }

  bool done() const {
    const auto target = node::to_string(scenario_.end_state);
    for (const auto& v : scenario_.vehicles) {
      if (killed_.contains(v.ns)) continue;
      auto it = states_.find(v.ns);
      if (it == states_.end() || it->second != target) return false;
    }
    return true;
  }

 private:
  const Scenario& scenario_;
  std::vector<bool> fired_;
  std::map<std::string, std::string> states_;
  std::set<std::string> killed_;
};

void finish_report(RunReport& report, const Scenario& s, const std::vector<TapRecord>& tap, const world::LotMap& map) {
  auto derived = build_report(tap);
  report.transitions = std::move(derived.transitions);
  report.reservations = std::move(derived.reservations);
  report.collisions = derived.collisions;
  report.rtt = std::move(derived.rtt);
  report.final_states = std::move(derived.final_states);
  report.scenario = s.name;
  report.seed = s.seed;
  report.assertions = assert_suite(tap, &map);
}

void write_outputs(const RunOptions& options, const RunResult& result) {
  if (!options.out_dir) return;
  std::filesystem::create_directories(*options.out_dir);
  write_tap(*options.out_dir / "tap.ndjson", result.tap);
  std::ofstream out(*options.out_dir / "report.json");
  out << to_json(result.report).dump(2) << '\n';
}

// --- virtual time ----------------------------------------------------------

RunResult run_virtual(const Scenario& s, const world::LotMap& map, const RunOptions& options) {
  RunResult result;
  result.report.mode = to_string(RunMode::Virtual);
  runtime::VirtualKernel kernel;
  Progress progress(s);

  const auto kill = [&](const std::string& ns) {
    if (!kernel.has(ns) || progress.killed(ns)) return;
    kernel.remove(ns);
    progress.mark_killed(ns);
    result.report.kills.push_back({ns, kernel.now_ns()});
  };
  kernel.set_tap([&](const runtime::Envelope& env, std::int64_t recv_ns) {
    result.tap.push_back({env, recv_ns});
    for (const auto& ns : progress.observe(result.tap.back())) kernel.schedule(kernel.now_ns(), [&kill, ns] { kill(ns); });
  });

  kernel.add(std::make_shared<world::WorldNode>(map, world::WorldNodeOptions{std::chrono::milliseconds(50), s.seed}));
  kernel.add(std::make_shared<perception::RsuNode>(map, s.detector, perception::RsuOptions{10.0, s.theta}));
  coordination::ManagerConfig config;
  config.policy = s.policy;
  config.map = map;
  kernel.add(std::make_shared<coordination::ManagerNode>(config));
  for (const auto& v : s.vehicles) {
    node::VehicleOptions vo;
    vo.ns = v.ns;
    vo.spawn_index = v.spawn_index;
    vo.vehicle_class = v.vehicle_class;
    vo.max_speed_mps = v.max_speed_mps;
    kernel.add(std::make_shared<node::VehicleNode>(map, vo));
  }
  kernel.add(std::make_shared<OperatorNode>(s));

  const auto t0 = kernel.now_ns();
  for (const auto& f : s.faults) {
    if (f.at_s) kernel.schedule(t0 + seconds_to_ns(*f.at_s), [&kill, ns = f.kill] { kill(ns); });
  }
  result.report.started_ns = t0;
  kernel.run_until(t0 + seconds_to_ns(s.duration_s), [&] { return progress.done(); });
  result.report.completed = progress.done();
  result.report.finished_ns = kernel.now_ns();

  finish_report(result.report, s, result.tap, map);
  result.report.started_ns = t0;
  result.report.finished_ns = kernel.now_ns();
  (void)options;
  return result;
}

// --- processes -------------------------------------------------------------

struct Child {
  std::string name;
  pid_t pid = -1;
  bool reaped = false;
  int status = 0;
};

pid_t spawn_child(const std::filesystem::path& exe, const std::vector<std::string>& args, const std::filesystem::path& log) {
  std::vector<std::string> argv_storage;
  argv_storage.push_back(exe.string());
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  argv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    ::prctl(PR_SET_PDEATHSIG, SIGTERM);
    const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      ::dup2(fd, STDOUT_FILENO);
      ::dup2(fd, STDERR_FILENO);
      ::close(fd);
    }
    ::execv(argv[0], argv.data());
    ::_exit(127);
  }
  return pid;
}

bool poll_exit(Child& c) {
  if (c.reaped) return true;
  int status = 0;
  if (::waitpid(c.pid, &status, WNOHANG) == c.pid) {
    c.reaped = true;
    c.status = status;
  }
  return c.reaped;
}

void terminate_child(Child& c, std::chrono::milliseconds grace) {
  if (poll_exit(c)) return;
  ::kill(c.pid, SIGTERM);
  const auto deadline = Clock::now() + grace;
  while (Clock::now() < deadline) {
    if (poll_exit(c)) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(c.pid, SIGKILL);
  int status = 0;
  ::waitpid(c.pid, &status, 0);
  c.reaped = true;
  c.status = status;
}

json sample_process(pid_t pid) {
  json out = json::object();
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  std::string text((std::istreambuf_iterator<char>(stat)), std::istreambuf_iterator<char>());
  const auto close = text.rfind(')');
  if (close != std::string::npos) {
    std::istringstream rest(text.substr(close + 2));
    std::vector<std::string> fields{std::istream_iterator<std::string>(rest), std::istream_iterator<std::string>()};
    if (fields.size() > 12) {
      const double tick = static_cast<double>(::sysconf(_SC_CLK_TCK));
      out["cpu_s"] = (std::stod(fields[11]) + std::stod(fields[12])) / tick;
    }
  }
  std::ifstream status("/proc/" + std::to_string(pid) + "/status");
  std::string line;
  while (std::getline(status, line)) {
    if (line.starts_with("VmHWM:")) out["max_rss_kb"] = std::stol(line.substr(6));
  }
  return out;
}

std::string format_p_miss(const perception::DetectorModel& model) {
  std::string out;
  for (const auto& [cls, p] : model.p_miss) out += (out.empty() ? "" : ",") + fmt::format("{}={}", cls, p);
  return out;
}

class ProcessRun {
 public:
  ProcessRun(const Scenario& s, const world::LotMap& map, const RunOptions& options)
      : s_(s), map_(map), options_(options), progress_(s) {
    bin_dir_ = options.bin_dir.empty() ? default_bin_dir() : options.bin_dir;
    if (options.out_dir) {
      work_dir_ = *options.out_dir;
    } else {
      static std::atomic<int> counter{0};
      work_dir_ = std::filesystem::temp_directory_path() / fmt::format("avp-run-{}-{}", ::getpid(), counter++);
    }
    std::filesystem::create_directories(work_dir_ / "logs");
  }

  ~ProcessRun() { teardown(); }

  RunResult run() {
    result_.report.mode = to_string(RunMode::Process);
    try {
      launch_all();
      play();
    } catch (const std::exception& e) {
      result_.report.abort_reason = e.what();
      spdlog::error("run aborted: {}", e.what());
    }
    teardown();
    result_.report.completed = completed_;
    {
      std::lock_guard lock(mu_);
      result_.tap = tap_;
    }
    const auto started = result_.report.started_ns;
    const auto kills = result_.report.kills;
    const auto info = result_.report.info;
    finish_report(result_.report, s_, result_.tap, map_);
    result_.report.started_ns = started;
    result_.report.finished_ns = msgbus::wall_clock_ns();
    result_.report.kills = kills;
    result_.report.info = info;
    return std::move(result_);
  }

 private:
  std::filesystem::path log_path(const std::string& name) const { return work_dir_ / "logs" / (name + ".log"); }

  Child& launch(const std::string& name, const std::string& exe, const std::vector<std::string>& args) {
    const auto path = bin_dir_ / exe;
    if (!std::filesystem::exists(path)) throw std::runtime_error("component executable not found: " + path.string());
    children_.push_back(Child{name, spawn_child(path, args, log_path(name))});
    return children_.back();
  }

  void wait_ready(const std::string& name) {
    const auto deadline = Clock::now() + options_.ready_timeout;
    std::unique_lock lock(mu_);
    while (!ready_.contains(name)) {
      if (cv_.wait_until(lock, std::min(deadline, Clock::now() + std::chrono::milliseconds(50))) ==
              std::cv_status::timeout &&
          Clock::now() >= deadline) {
        throw std::runtime_error(fmt::format("component '{}' not ready within {} ms", name, options_.ready_timeout.count()));
      }
      for (auto& c : children_) {
        if (c.name == name && poll_exit(c)) {
          throw std::runtime_error(fmt::format("component '{}' exited during startup (see {})", name, log_path(name).string()));
        }
      }
    }
  }

  void launch_all() {
    const auto port_file = work_dir_ / "logs" / "router.port";
    std::filesystem::remove(port_file);
    launch("router", "router", {"--listen", "127.0.0.1:0", "--port-file", port_file.string()});
    const auto deadline = Clock::now() + options_.ready_timeout;
    std::string port;
    while (port.empty()) {
      if (Clock::now() > deadline) throw std::runtime_error("router did not report its port");
      std::ifstream in(port_file);
      if (in) std::getline(in, port);
      if (port.empty()) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    address_ = "127.0.0.1:" + port;

    tap_session_ = msgbus::Session::connect(address_, "tap");
    auto stream = tap_session_->subscribe("**");
    tap_session_->sync();
    if (options_.out_dir) tap_writer_.emplace(*options_.out_dir / "tap.ndjson");
    tap_thread_ = std::thread([this, stream] { tap_loop(stream); });
    result_.report.started_ns = msgbus::wall_clock_ns();

    const auto map_arg = s_.map_file.string();
    launch("world", "world",
           {"--router", address_, "--map", map_arg, "--tick-ms", "50", "--seed", std::to_string(s_.seed)});
    wait_ready("world");
    launch("rsu", "rsu",
           {"--router", address_, "--map", map_arg, "--p-miss", format_p_miss(s_.detector), "--sigma",
            fmt::format("{}", s_.detector.pos_noise_sigma_m), "--seed", std::to_string(s_.detector.seed), "--theta",
            fmt::format("{}", s_.theta)});
    wait_ready("rsu");
    launch("managers", "managers", {"--router", address_, "--map", map_arg, "--policy", coordination::to_string(s_.policy)});
    wait_ready("managers");
    for (const auto& v : s_.vehicles) {
      launch(v.ns, "vehicle",
             {"--router", address_, "--ns", v.ns, "--map", map_arg, "--spawn-index", std::to_string(v.spawn_index),
              "--class", v.vehicle_class, "--max-speed", fmt::format("{}", v.max_speed_mps), "--rtt-peer", "managers",
              "--rtt-interval-ms", std::to_string(options_.rtt_interval.count())});
      wait_ready(v.ns);
    }
    if (options_.gateway_port) {
      launch("gateway", "avp", {"gateway", "--router", address_, "--port", std::to_string(*options_.gateway_port)});
      wait_ready("gateway");
    }
  }

  void tap_loop(const std::shared_ptr<msgbus::MessageStream>& stream) {
    while (true) {
      auto env = stream->pop_for(std::chrono::milliseconds(50));
      if (!env) {
        if (stop_tap_ || stream->closed()) return;
        continue;
      }
      TapRecord rec{std::move(*env), msgbus::wall_clock_ns()};
      {
        std::lock_guard lock(mu_);
        if (rec.env.key.starts_with("avp/_ready/")) ready_.insert(rec.env.key.substr(11));
        for (auto& ns : progress_.observe(rec)) due_kills_.push_back(std::move(ns));
        if (tap_writer_) tap_writer_->append(rec);
        tap_.push_back(std::move(rec));
      }
      cv_.notify_all();
    }
  }

  void kill_vehicle(const std::string& ns) {
    for (auto& c : children_) {
      if (c.name != ns || poll_exit(c)) continue;
      ::kill(c.pid, SIGKILL);
      ::waitpid(c.pid, &c.status, 0);
      c.reaped = true;
      result_.report.kills.push_back({ns, msgbus::wall_clock_ns()});
      spdlog::info("killed vehicle '{}'", ns);
      std::lock_guard lock(mu_);
      progress_.mark_killed(ns);
    }
  }

  void play() {
    operator_session_ = msgbus::Session::connect(address_, "operator");
    operator_node_ = std::make_unique<OperatorNode>(s_);
    operator_thread_ = std::thread([this] { runtime::run_on_session(*operator_node_, *operator_session_, stop_operator_); });

    const auto t0 = Clock::now();
    std::vector<std::pair<Clock::time_point, std::string>> timed;
    for (const auto& f : s_.faults) {
      if (f.at_s) timed.emplace_back(t0 + std::chrono::nanoseconds(seconds_to_ns(*f.at_s)), f.kill);
    }
    const auto deadline = t0 + std::chrono::nanoseconds(seconds_to_ns(s_.duration_s));
    while (Clock::now() < deadline) {
      std::vector<std::string> kills;
      {
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, std::chrono::milliseconds(20));
        kills.swap(due_kills_);
      }
      const auto now = Clock::now();
      for (auto it = timed.begin(); it != timed.end();) {
        if (it->first <= now) {
          kills.push_back(it->second);
          it = timed.erase(it);
        } else {
          ++it;
        }
      }
      for (const auto& ns : kills) kill_vehicle(ns);
      {
        std::lock_guard lock(mu_);
        if (progress_.done()) {
          completed_ = true;
          return;
        }
      }
      for (auto& c : children_) {
        if ((c.name == "router" || c.name == "world" || c.name == "rsu" || c.name == "managers") && poll_exit(c)) {
          throw std::runtime_error(fmt::format("component '{}' exited unexpectedly (see {})", c.name, log_path(c.name).string()));
        }
      }
    }
  }

  void teardown() {
    if (torn_down_) return;
    torn_down_ = true;
    stop_operator_ = true;
    if (operator_thread_.joinable()) operator_thread_.join();
    if (operator_session_) operator_session_->close();

    json processes = json::object();
    for (auto& c : children_) {
      if (!poll_exit(c)) processes[c.name] = sample_process(c.pid);
    }
    result_.report.info["processes"] = processes;

    const auto is_infra = [](const std::string& n) {
      return n == "router" || n == "world" || n == "rsu" || n == "managers" || n == "gateway";
    };
    for (auto& c : children_) {
      if (!is_infra(c.name) && !c.reaped) ::kill(c.pid, SIGTERM);
    }
    for (auto& c : children_) {
      if (!is_infra(c.name)) terminate_child(c, std::chrono::milliseconds(3000));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(300));  // let final RTT reports reach the tap
    for (const auto* name : {"gateway", "managers", "rsu", "world"}) {
      for (auto& c : children_) {
        if (c.name == name) terminate_child(c, std::chrono::milliseconds(2000));
      }
    }
    stop_tap_ = true;
    if (tap_thread_.joinable()) tap_thread_.join();
    if (tap_session_) tap_session_->close();
    for (auto& c : children_) {
      if (c.name == "router") terminate_child(c, std::chrono::milliseconds(2000));
    }
    if (tap_writer_) tap_writer_->flush();
  }

  const Scenario& s_;
  const world::LotMap& map_;
  RunOptions options_;
  Progress progress_;
  std::filesystem::path bin_dir_;
  std::filesystem::path work_dir_;
  std::string address_;
  std::vector<Child> children_;

  std::unique_ptr<msgbus::Session> tap_session_;
  std::optional<TapWriter> tap_writer_;
  std::thread tap_thread_;
  std::atomic<bool> stop_tap_{false};

  std::unique_ptr<msgbus::Session> operator_session_;
  std::unique_ptr<OperatorNode> operator_node_;
  std::thread operator_thread_;
  std::atomic<bool> stop_operator_{false};

  std::mutex mu_;  // guards tap_, ready_, due_kills_, progress_
  std::condition_variable cv_;
  std::vector<TapRecord> tap_;
  std::set<std::string> ready_;
  std::vector<std::string> due_kills_;

  RunResult result_;
  bool completed_ = false;
  bool torn_down_ = false;
};

}  // namespace

std::filesystem::path default_bin_dir() {
  if (const char* env = std::getenv("AVP_BIN_DIR"); env && *env) return env;
  std::error_code ec;
  const auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::filesystem::current_path() : self.parent_path();
}

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  const auto map = world::load_map_file(scenario.map_file);
  for (const auto& v : scenario.vehicles) {
    if (v.spawn_index >= map.spawn_points.size()) {
      throw ScenarioError(fmt::format("vehicle '{}': spawn index {} out of range (map has {})", v.ns, v.spawn_index,
                                      map.spawn_points.size()));
    }
  }
  const auto mode = options.mode_override.value_or(scenario.mode);
  RunResult result;
  if (mode == RunMode::Virtual) {
    result = run_virtual(scenario, map, options);
    write_outputs(options, result);
  } else {
    ProcessRun run(scenario, map, options);
    result = run.run();
    if (options.out_dir) {
      std::ofstream out(*options.out_dir / "report.json");
      out << to_json(result.report).dump(2) << '\n';
    }
  }
  return result;
}

}  // namespace avp::harness
