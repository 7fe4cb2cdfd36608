// Network front end: WebSocket /ws for messages, HTTP GET /health,
// GET /scenario and POST /scenario. Runs on its own thread; the simulation
// loop exchanges text messages with it only through the Hub.
#pragma once

#include "ursula/comms/hub.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ursula::comms {

struct HttpReply {
    unsigned status = 200;
    std::string body; ///< JSON
};

/// HTTP callbacks, invoked on the network thread.
struct ServerHandlers {
    std::function<std::string()> health;
    std::function<std::string()> get_scenario;
    std::function<HttpReply(const std::string&)> post_scenario;
};

namespace detail {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

class WsConnection : public std::enable_shared_from_this<WsConnection> {
  public:
    WsConnection(tcp::socket socket, Hub& hub) : ws_(std::move(socket)), hub_(hub) {}

    void start(http::request<http::string_body> req) {
        ws_.text(true);
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            std::weak_ptr<WsConnection> weak = self;
            auto exec = self->ws_.get_executor();
            self->id_ = self->hub_.open([weak, exec] {
                net::post(exec, [weak] {
                    if (auto s = weak.lock()) s->pull();
                });
            });
            self->read();
        });
    }

  private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->hub_.close(self->id_);
                return;
            }
            self->hub_.push_incoming(self->id_, beast::buffers_to_string(self->buffer_.data()));
            self->buffer_.consume(self->buffer_.size());
            self->read();
        });
    }

    void pull() {
        for (auto& m : hub_.take_outgoing(id_)) queue_.push_back(std::move(m));
        write();
    }

    void write() {
        if (writing_ || queue_.empty()) return;
        writing_ = true;
        ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->writing_ = false;
            if (ec) {
                self->hub_.close(self->id_);
                return;
            }
            self->queue_.pop_front();
            self->write();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    Hub& hub_;
    Hub::SessionId id_ = 0;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    bool writing_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
  public:
    HttpConnection(tcp::socket socket, Hub& hub, const ServerHandlers& handlers)
        : stream_(std::move(socket)), hub_(hub), handlers_(handlers) {}

    void read() {
        req_ = {};
        http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            self->handle();
        });
    }

  private:
    void handle() {
        if (websocket::is_upgrade(req_)) {
            if (req_.target() == "/ws") {
                std::make_shared<WsConnection>(stream_.release_socket(), hub_)->start(std::move(req_));
                return;
            }
            return reply({404, R"({"error":"not found"})"});
        }
        const auto target = req_.target();
        const auto method = req_.method();
        if (target == "/health") {
            if (method != http::verb::get) return reply({405, R"({"error":"method not allowed"})"});
            return reply({200, handlers_.health ? handlers_.health() : R"({"status":"ok"})"});
        }
        if (target == "/scenario") {
            if (method == http::verb::get && handlers_.get_scenario) return reply({200, handlers_.get_scenario()});
            if (method == http::verb::post && handlers_.post_scenario) return reply(handlers_.post_scenario(req_.body()));
            return reply({405, R"({"error":"method not allowed"})"});
        }
        reply({404, R"({"error":"not found"})"});
    }

    void reply(HttpReply r) {
        auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(r.status),
                                                                       req_.version());
        res->set(http::field::content_type, "application/json");
        res->keep_alive(req_.keep_alive());
        res->body() = std::move(r.body);
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
            if (ec) return;
            if (res->keep_alive()) return self->read();
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    beast::tcp_stream stream_;
    Hub& hub_;
    const ServerHandlers& handlers_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
};

} // namespace detail

/// Listening server. `start()` binds and spawns the network thread; port 0
/// picks a free port, reported by `port()`.
class Server {
  public:
    Server(Hub& hub, ServerHandlers handlers, std::string host, unsigned short port)
        : hub_(hub), handlers_(std::move(handlers)), host_(std::move(host)), port_(port) {}

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;
    ~Server() { stop(); }

    void start() {
        namespace net = detail::net;
        const auto endpoint = detail::tcp::endpoint(net::ip::make_address(host_), port_);
        acceptor_.open(endpoint.protocol());
        acceptor_.set_option(net::socket_base::reuse_address(true));
        acceptor_.bind(endpoint);
        acceptor_.listen();
        port_ = acceptor_.local_endpoint().port();
        accept();
        thread_ = std::thread([this] { ioc_.run(); });
    }

    void stop() {
        if (!thread_.joinable()) return;
        ioc_.stop();
        thread_.join();
    }

    unsigned short port() const { return port_; }

  private:
    void accept() {
        acceptor_.async_accept([this](detail::beast::error_code ec, detail::tcp::socket socket) {
            if (!ec) std::make_shared<detail::HttpConnection>(std::move(socket), hub_, handlers_)->read();
            if (acceptor_.is_open()) accept();
        });
    }

    Hub& hub_;
    ServerHandlers handlers_;
    std::string host_;
    unsigned short port_;
    detail::net::io_context ioc_{1};
    detail::tcp::acceptor acceptor_{ioc_};
    std::thread thread_;
};

} // namespace ursula::comms
