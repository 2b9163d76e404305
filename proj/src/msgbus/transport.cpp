#include "avp/msgbus/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <set>

#include <spdlog/spdlog.h>

namespace avp::msgbus {
namespace {

void send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BusError(std::string("send failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

/// Returns 0 on orderly shutdown.
ssize_t recv_some(int fd, char* buf, std::size_t len) {
  while (true) {
    const ssize_t n = ::recv(fd, buf, len, 0);
    if (n < 0 && errno == EINTR) continue;
    return n;
  }
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

addrinfo* resolve(const Address& addr, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(addr.port);
  const int rc = ::getaddrinfo(addr.host.empty() ? nullptr : addr.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) throw BusError("cannot resolve '" + addr.str() + "': " + ::gai_strerror(rc));
  return res;
}

Envelope control(const std::string& key, const std::string& sender, json payload) {
  return Envelope{key, sender, 0, wall_clock_ns(), std::move(payload)};
}

}  // namespace

Address parse_address(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw BusError("address '" + std::string(text) + "' must be host:port");
  Address addr;
  addr.host = std::string(text.substr(0, colon));
  if (addr.host.empty()) addr.host = "127.0.0.1";
  const auto port_text = std::string(text.substr(colon + 1));
  try {
    std::size_t used = 0;
    const int port = std::stoi(port_text, &used);
    if (used != port_text.size() || port < 0 || port > 65535) throw std::out_of_range("port");
    addr.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw BusError("invalid port in address '" + std::string(text) + "'");
  }
  return addr;
}

// --- MessageStream ---------------------------------------------------------

void MessageStream::push(Envelope env) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    queue_.push_back(std::move(env));
  }
  cv_.notify_one();
}

std::optional<Envelope> MessageStream::try_pop() {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  auto env = std::move(queue_.front());
  queue_.pop_front();
  return env;
}

std::optional<Envelope> MessageStream::pop_until(std::chrono::steady_clock::time_point deadline) {
  std::unique_lock lock(mu_);
  cv_.wait_until(lock, deadline, [&] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  auto env = std::move(queue_.front());
  queue_.pop_front();
  return env;
}

void MessageStream::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool MessageStream::closed() const {
  std::lock_guard lock(mu_);
  return closed_ && queue_.empty();
}

std::size_t MessageStream::size() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

// --- Router ----------------------------------------------------------------

struct Router::Connection {
  int fd = -1;
  std::string client_id;  // empty until hello
  std::mutex out_mu;
  std::condition_variable out_cv;
  std::deque<std::string> outq;
  bool close_after_flush = false;
  bool dead = false;
  std::atomic<bool> finished{false};
  std::thread reader;
  std::thread writer;
};

Router::Router(RouterOptions options) : options_(std::move(options)) {}

Router::~Router() { stop(); }

std::string Router::address() const { return "127.0.0.1:" + std::to_string(port_); }

void Router::start() {
  const auto addr = parse_address(options_.listen);
  addrinfo* res = resolve(addr, true);
  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (listen_fd_ < 0) {
    ::freeaddrinfo(res);
    throw BusError(std::string("socket: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 64) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw BusError("cannot listen on " + addr.str() + ": " + why);
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  spdlog::info("router listening on {}:{}", addr.host, port_);
}

void Router::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(mu_);
    conns = connections_;
  }
  for (auto& c : conns) {
    ::shutdown(c->fd, SHUT_RDWR);
    {
      std::lock_guard lock(c->out_mu);
      c->dead = true;
    }
    c->out_cv.notify_all();
  }
  for (auto& c : conns) {
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
    ::close(c->fd);
  }
  std::lock_guard lock(mu_);
  connections_.clear();
  by_id_.clear();
}

std::vector<std::string> Router::roster() const {
  std::lock_guard lock(mu_);
  return table_.clients();
}

void Router::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    set_nodelay(fd);
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    {
      std::lock_guard lock(mu_);
      connections_.push_back(conn);
    }
    conn->writer = std::thread([this, conn] { writer_loop(conn); });
    conn->reader = std::thread([this, conn] { reader_loop(conn); });
    reap();
  }
}

void Router::reap() {
  std::vector<std::shared_ptr<Connection>> done;
  {
    std::lock_guard lock(mu_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      if ((*it)->finished) {
        done.push_back(*it);
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : done) {
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
    ::close(c->fd);
  }
}

void Router::reader_loop(const std::shared_ptr<Connection>& conn) {
  FrameDecoder decoder(options_.max_frame_bytes);
  std::vector<char> buf(64 * 1024);
  try {
    while (true) {
      const ssize_t n = recv_some(conn->fd, buf.data(), buf.size());
      if (n <= 0) break;
      decoder.feed(std::string_view(buf.data(), static_cast<std::size_t>(n)));
      while (auto env = decoder.next()) handle_frame(conn, std::move(*env));
      {
        std::lock_guard lock(conn->out_mu);
        if (conn->close_after_flush || conn->dead) break;
      }
    }
  } catch (const std::exception& e) {
    spdlog::warn("router: dropping connection '{}': {}", conn->client_id, e.what());
    send_control(*conn, "_ctl/error", json{{"reason", "protocol-error"}, {"detail", e.what()}}, true);
  }
  drop(conn);
}

void Router::writer_loop(const std::shared_ptr<Connection>& conn) {
  while (true) {
    std::string frame;
    {
      std::unique_lock lock(conn->out_mu);
      conn->out_cv.wait(lock, [&] { return !conn->outq.empty() || conn->dead || conn->close_after_flush; });
      if (conn->outq.empty()) {
        if (conn->close_after_flush) ::shutdown(conn->fd, SHUT_RDWR);
        break;
      }
      if (conn->dead) break;
      frame = std::move(conn->outq.front());
      conn->outq.pop_front();
    }
    try {
      send_all(conn->fd, frame);
    } catch (const BusError&) {
      std::lock_guard lock(conn->out_mu);
      conn->dead = true;
      break;
    }
  }
}

void Router::send_control(Connection& conn, const std::string& key, json payload, bool close_after) {
  const auto frame = encode_frame(control(key, "router", std::move(payload)));
  {
    std::lock_guard lock(conn.out_mu);
    if (conn.dead) return;
    conn.outq.push_back(frame);
    if (close_after) conn.close_after_flush = true;
  }
  conn.out_cv.notify_all();
}

void Router::handle_frame(const std::shared_ptr<Connection>& conn, Envelope env) {
  if (conn->client_id.empty()) {
    if (env.key != "_ctl/hello") {
      send_control(*conn, "_ctl/error", json{{"reason", "hello-required"}}, true);
      return;
    }
    const auto id = env.payload.value("client_id", env.sender_id);
    bool accepted = false;
    {
      std::lock_guard lock(mu_);
      if (!id.empty() && table_.add_client(id)) {
        by_id_[id] = conn;
        accepted = true;
      }
    }
    if (!accepted) {
      send_control(*conn, "_ctl/error", json{{"reason", "duplicate-client-id"}, {"client_id", id}}, true);
      return;
    }
    conn->client_id = id;
    send_control(*conn, "_ctl/hello", json{{"ok", true}, {"client_id", id}});
    spdlog::debug("router: client '{}' joined", id);
    return;
  }

  if (env.is_control()) {
    try {
      if (env.key == "_ctl/subscribe") {
        auto pattern = KeyExpr::parse(env.payload.at("pattern").get<std::string>());
        std::lock_guard lock(mu_);
        table_.add_subscription(conn->client_id, std::move(pattern));
      } else if (env.key == "_ctl/remap") {
        auto rule = RemapRule::make(env.payload.at("from").get<std::string>(), env.payload.at("to").get<std::string>());
        std::lock_guard lock(mu_);
        table_.add_remap(conn->client_id, std::move(rule));
      } else if (env.key == "_ctl/sync") {
        send_control(*conn, "_ctl/sync", env.payload);
      } else {
        send_control(*conn, "_ctl/error", json{{"reason", "unknown-control"}, {"key", env.key}});
      }
    } catch (const std::exception& e) {
      send_control(*conn, "_ctl/error", json{{"reason", "invalid-control"}, {"key", env.key}, {"detail", e.what()}});
    }
    return;
  }

  std::optional<KeyExpr> key;
  try {
    key = parse_literal_key(env.key);
  } catch (const KeyExprError& e) {
    send_control(*conn, "_ctl/error", json{{"reason", "invalid-key"}, {"detail", e.what()}});
    return;
  }
  env.sender_id = conn->client_id;

  std::lock_guard lock(mu_);
  for (auto& delivery : table_.route(*key)) {
    auto it = by_id_.find(delivery.client_id);
    if (it == by_id_.end()) continue;
    Envelope out = env;
    out.key = std::move(delivery.key);
    auto frame = encode_frame(out);
    auto& target = *it->second;
    {
      std::lock_guard out_lock(target.out_mu);
      if (target.dead) continue;
      target.outq.push_back(std::move(frame));
    }
    target.out_cv.notify_one();
  }
}

void Router::drop(const std::shared_ptr<Connection>& conn) {
  {
    std::lock_guard lock(mu_);
    if (!conn->client_id.empty()) {
      auto it = by_id_.find(conn->client_id);
      if (it != by_id_.end() && it->second == conn) {
        by_id_.erase(it);
        table_.remove_client(conn->client_id);
      }
    }
  }
  {
    std::lock_guard lock(conn->out_mu);
    if (!conn->close_after_flush) conn->dead = true;
  }
  conn->out_cv.notify_all();
  conn->finished = true;
}

// --- Session ---------------------------------------------------------------

Session::Session(std::string client_id, SessionOptions options)
    : client_id_(std::move(client_id)), options_(options) {}

std::unique_ptr<Session> Session::connect(const std::string& router_address, const std::string& client_id,
                                          SessionOptions options) {
  if (client_id.empty()) throw BusError("client id must not be empty");
  const auto addr = parse_address(router_address);
  addrinfo* res = resolve(addr, false);
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw BusError(std::string("socket: ") + std::strerror(errno));
  }
  if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd);
    throw BusError("cannot connect to router at " + addr.str() + ": " + why);
  }
  ::freeaddrinfo(res);
  set_nodelay(fd);

  std::unique_ptr<Session> session(new Session(client_id, options));
  session->fd_ = fd;
  session->open_ = true;
  session->reader_ = std::thread([s = session.get()] { s->reader_loop(); });
  session->send_control("_ctl/hello", json{{"client_id", client_id}});

  std::unique_lock lock(session->state_mu_);
  const bool done = session->state_cv_.wait_for(lock, options.connect_timeout, [&] {
    return session->hello_done_ || session->error_.has_value() || !session->open_;
  });
  if (!session->hello_done_) {
    const auto why = session->error_.value_or(done ? "connection closed during handshake" : "handshake timed out");
    lock.unlock();
    session->close();
    throw BusError("router rejected client '" + client_id + "': " + why);
  }
  return session;
}

Session::~Session() { close(); }

void Session::close() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  if (reader_.joinable()) reader_.join();
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  open_ = false;
}

std::optional<std::string> Session::last_error() const {
  std::lock_guard lock(state_mu_);
  return error_;
}

void Session::send_frame(const Envelope& env) {
  const auto frame = encode_frame(env);
  if (frame.size() - 4 > options_.max_frame_bytes) {
    throw FrameTooLarge("payload for '" + env.key + "' encodes to " + std::to_string(frame.size() - 4) +
                        " bytes, limit is " + std::to_string(options_.max_frame_bytes));
  }
  if (!open_) throw BusError("session '" + client_id_ + "' is closed");
  send_all(fd_, frame);
}

void Session::send_control(const std::string& key, json payload) {
  std::lock_guard lock(write_mu_);
  send_frame(control(key, client_id_, std::move(payload)));
}

Envelope Session::publish(const std::string& key, json payload) {
  const auto parsed = parse_literal_key(key);
  if (key.starts_with(kControlPrefix)) throw KeyExprError("key prefix '_ctl/' is reserved");
  std::lock_guard lock(write_mu_);
  Envelope env{parsed.str(), client_id_, next_seq_[key] + 1, wall_clock_ns(), std::move(payload)};
  send_frame(env);
  next_seq_[key] = env.seq;
  return env;
}

std::shared_ptr<MessageStream> Session::subscribe(const std::string& pattern, std::shared_ptr<MessageStream> into) {
  auto expr = KeyExpr::parse(pattern);
  if (!into) into = std::make_shared<MessageStream>();
  {
    std::lock_guard lock(state_mu_);
    subscriptions_.push_back({expr, into});
  }
  send_control("_ctl/subscribe", json{{"pattern", expr.str()}});
  return into;
}

void Session::remap(const std::string& external, const std::string& internal) {
  // validate locally so a bad rule is reported to the caller, not the router
  RemapRule::make(external, internal);
  send_control("_ctl/remap", json{{"from", external}, {"to", internal}});
}

void Session::sync(std::chrono::milliseconds timeout) {
  std::uint64_t token = 0;
  {
    std::lock_guard lock(state_mu_);
    token = ++sync_sent_;
  }
  send_control("_ctl/sync", json{{"token", token}});
  std::unique_lock lock(state_mu_);
  if (!state_cv_.wait_for(lock, timeout, [&] { return sync_acked_ >= token || !open_; }) || sync_acked_ < token) {
    throw BusError("sync with router timed out");
  }
}

void Session::reader_loop() {
  FrameDecoder decoder(options_.max_frame_bytes);
  std::vector<char> buf(64 * 1024);
  try {
    while (true) {
      const ssize_t n = recv_some(fd_, buf.data(), buf.size());
      if (n <= 0) break;
      decoder.feed(std::string_view(buf.data(), static_cast<std::size_t>(n)));
      while (auto env = decoder.next()) {
        if (env->is_control()) {
          std::lock_guard lock(state_mu_);
          if (env->key == "_ctl/hello") {
            hello_done_ = true;
          } else if (env->key == "_ctl/error") {
            error_ = env->payload.value("reason", std::string("error"));
            spdlog::warn("session '{}': router error {}", client_id_, env->payload.dump());
          } else if (env->key == "_ctl/sync") {
            sync_acked_ = std::max(sync_acked_, env->payload.value("token", std::uint64_t{0}));
          }
          state_cv_.notify_all();
          continue;
        }
        const auto key = parse_literal_key(env->key);
        std::vector<std::shared_ptr<MessageStream>> targets;
        {
          std::lock_guard lock(state_mu_);
          for (const auto& sub : subscriptions_) {
            if (key_matches(sub.pattern, key) &&
                std::find(targets.begin(), targets.end(), sub.stream) == targets.end()) {
              targets.push_back(sub.stream);
            }
          }
        }
        for (auto& t : targets) t->push(*env);
      }
    }
  } catch (const std::exception& e) {
    spdlog::warn("session '{}': {}", client_id_, e.what());
  }
  open_ = false;
  std::vector<LocalSubscription> subs;
  {
    std::lock_guard lock(state_mu_);
    subs = subscriptions_;
  }
  for (auto& s : subs) s.stream->close();
  state_cv_.notify_all();
}

}  // namespace avp::msgbus
