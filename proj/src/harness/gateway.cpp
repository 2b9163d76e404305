#include "avp/harness/gateway.hpp"

#include <deque>
#include <set>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "avp/node/lifecycle.hpp"
#include "avp/node/vehicle_node.hpp"
#include "avp/runtime/node.hpp"

namespace avp::harness {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using msgbus::json;

std::vector<std::string> gateway_patterns() {
  return {"avp/coord/**", "avp/sim/poses", "avp/rsu/occupancy", "avp/*/status"};
}

std::optional<PanelCommand> parse_panel_command(const std::string& text, std::string& error) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception&) {
    error = "message is not valid JSON";
    return std::nullopt;
  }
  if (!doc.is_object()) {
    error = "message must be a JSON object";
    return std::nullopt;
  }
  if (!doc.contains("kind") || !doc["kind"].is_string() || !node::parse_command_kind(doc["kind"].get<std::string>())) {
    error = "kind must be one of DROPOFF, PARK, RETRIEVE";
    return std::nullopt;
  }
  if (!doc.contains("target_ns") || !doc["target_ns"].is_string()) {
    error = "target_ns must be a string";
    return std::nullopt;
  }
  const auto ns = doc["target_ns"].get<std::string>();
  try {
    node::validate_namespace(ns);
  } catch (const std::invalid_argument& e) {
    error = e.what();
    return std::nullopt;
  }
  return PanelCommand{"avp/" + ns + "/cmd", json{{"kind", doc["kind"]}, {"target_ns", ns}}};
}

class Gateway::Impl {
 public:
  class Client : public std::enable_shared_from_this<Client> {
   public:
    Client(tcp::socket socket, Impl& owner) : ws_(std::move(socket)), owner_(owner) {}

    void run() {
      ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
        if (ec) return;
        self->owner_.join(self);
        self->read();
      });
    }

    void send(std::shared_ptr<const std::string> text) {
      if (closed_) return;
      if (outq_.size() >= owner_.options_.max_backlog) {
        spdlog::warn("gateway: dropping slow client ({} messages behind)", outq_.size());
        close();
        return;
      }
      outq_.push_back(std::move(text));
      if (outq_.size() == 1) write();
    }

    void close() {
      if (closed_) return;
      closed_ = true;
      owner_.leave(shared_from_this());
      beast::get_lowest_layer(ws_).close();
    }

   private:
    void read() {
      ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) {
          self->close();
          return;
        }
        const auto text = beast::buffers_to_string(self->buffer_.data());
        self->buffer_.consume(self->buffer_.size());
        self->send(std::make_shared<const std::string>(self->owner_.handle_inbound(text)));
        self->read();
      });
    }

    void write() {
      ws_.text(true);
      ws_.async_write(net::buffer(*outq_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) {
          self->close();
          return;
        }
        self->outq_.pop_front();
        if (!self->outq_.empty() && !self->closed_) self->write();
      });
    }

    websocket::stream<beast::tcp_stream> ws_;
    Impl& owner_;
    beast::flat_buffer buffer_;
    std::deque<std::shared_ptr<const std::string>> outq_;
    bool closed_ = false;
  };

  Impl(const GatewayOptions& options, std::atomic<std::size_t>& client_count)
      : options_(options), client_count_(client_count), acceptor_(ioc_) {}

  std::uint16_t listen() {
    const tcp::endpoint endpoint(net::ip::make_address(options_.bind), options_.port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen();
    accept();
    return acceptor_.local_endpoint().port();
  }

  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<Client>(std::move(socket), *this)->run();
      accept();
    });
  }

  void join(const std::shared_ptr<Client>& c) {
    clients_.insert(c);
    client_count_ = clients_.size();
  }
  void leave(const std::shared_ptr<Client>& c) {
    clients_.erase(c);
    client_count_ = clients_.size();
  }

  std::string handle_inbound(const std::string& text) {
    std::string error;
    const auto cmd = parse_panel_command(text, error);
    if (!cmd) return json{{"type", "error"}, {"error", error}}.dump();
    try {
      session_->publish(cmd->key, cmd->payload);
    } catch (const msgbus::BusError& e) {
      return json{{"type", "error"}, {"error", std::string("bus: ") + e.what()}}.dump();
    }
    return json{{"type", "ack"}, {"kind", cmd->payload["kind"]}, {"target_ns", cmd->payload["target_ns"]}}.dump();
  }

  void broadcast(std::shared_ptr<const std::string> text) {
    net::post(ioc_, [this, text = std::move(text)] {
      const auto snapshot = clients_;
      for (const auto& c : snapshot) c->send(text);
    });
  }

  void forward_loop() {
    while (running_) {
      auto env = stream_->pop_for(std::chrono::milliseconds(100));
      if (!env) {
        if (stream_->closed()) {
          spdlog::error("gateway: router connection lost");
          {
            std::lock_guard lock(done_mu_);
            lost_ = true;
            running_ = false;
          }
          done_cv_.notify_all();
          return;
        }
        continue;
      }
      broadcast(std::make_shared<const std::string>(msgbus::to_json(*env).dump()));
    }
  }

  GatewayOptions options_;
  std::atomic<std::size_t>& client_count_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  std::set<std::shared_ptr<Client>> clients_;  // io thread only
  std::unique_ptr<msgbus::Session> session_;
  std::shared_ptr<msgbus::MessageStream> stream_;
  std::optional<net::executor_work_guard<net::io_context::executor_type>> work_;
  std::thread io_thread_;
  std::thread forward_thread_;
  std::atomic<bool> running_{false};
  std::atomic<bool> lost_{false};
  std::mutex done_mu_;
  std::condition_variable done_cv_;
};

Gateway::Gateway(std::string router_address, GatewayOptions options)
    : router_address_(std::move(router_address)), options_(std::move(options)) {}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  impl_ = std::make_unique<Impl>(options_, clients_);
  impl_->session_ = msgbus::Session::connect(router_address_, options_.client_id);
  impl_->stream_ = std::make_shared<msgbus::MessageStream>();
  for (const auto& pattern : gateway_patterns()) impl_->session_->subscribe(pattern, impl_->stream_);
  impl_->session_->sync();
  port_ = impl_->listen();
  impl_->running_ = true;
  impl_->work_.emplace(net::make_work_guard(impl_->ioc_));
  impl_->io_thread_ = std::thread([impl = impl_.get()] { impl->ioc_.run(); });
  impl_->forward_thread_ = std::thread([this] { impl_->forward_loop(); });
  impl_->session_->publish(runtime::ready_key(options_.client_id), json{{"name", options_.client_id}, {"port", port_}});
  spdlog::info("gateway: listening on ws://{}:{}", options_.bind, port_);
}

int Gateway::wait() {
  if (!impl_) return 0;
  std::unique_lock lock(impl_->done_mu_);
  impl_->done_cv_.wait(lock, [this] { return !impl_->running_.load(); });
  return impl_->lost_ ? 2 : 0;
}

void Gateway::stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->done_mu_);
    impl_->running_ = false;
  }
  impl_->done_cv_.notify_all();
  if (impl_->forward_thread_.joinable()) impl_->forward_thread_.join();
  net::post(impl_->ioc_, [impl = impl_.get()] {
    beast::error_code ec;
    impl->acceptor_.close(ec);
    const auto snapshot = impl->clients_;
    for (const auto& c : snapshot) c->close();
    impl->work_.reset();
  });
  if (impl_->io_thread_.joinable()) impl_->io_thread_.join();
  if (impl_->session_) impl_->session_->close();
  impl_.reset();
}

}  // namespace avp::harness
