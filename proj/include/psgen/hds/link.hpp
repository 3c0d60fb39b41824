#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "psgen/common/net.hpp"
#include "psgen/hds/control.hpp"
#include "psgen/hds/protocol.hpp"
#include "psgen/hds/server.hpp"

namespace psgen::hds {

/// Client side of one HDS connection (data plus control channel).
class Link {
 public:
  /// Largest number of timetags sent in one message; longer requests are split.
  static constexpr std::size_t kMaxTagsPerMessage = 16000;

  virtual ~Link() = default;
  virtual Response exchange(std::span<const std::uint32_t> message) = 0;
  virtual std::string control(const std::string& line) = 0;

  /// Full query: keyword header on the first message, continuations after it.
  Response query(std::uint32_t overflow, std::span<const std::uint32_t> tags) {
    Response all;
    all.overflow = overflow;
    all.words.reserve(tags.size());
    std::size_t i = 0;
    bool first = true;
    do {
      const std::size_t n = std::min(kMaxTagsPerMessage, tags.size() - i);
      Response r = first ? exchange(encode_request(overflow, tags.subspan(i, n))) : exchange(tags.subspan(i, n));
      if (!r.ok()) return r;
      if (r.words.size() != n) throw FormatError("response count differs from request count");
      all.words.insert(all.words.end(), r.words.begin(), r.words.end());
      i += n;
      first = false;
    } while (i < tags.size());
    return all;
  }

  Status status() {
    const std::string s = control("STAT?");
    Status st;
    if (std::sscanf(s.c_str(), "OVF=%u TIME=%u FLAGS=0x%x", &st.overflow, &st.current_timetag, &st.flags) != 3)
      throw FormatError("malformed status reply: " + s);
    return st;
  }
};

/// In-process link: calls the server directly with its own session state.
class DirectLink : public Link {
 public:
  explicit DirectLink(HomodyneServer& server, std::string name = "hds") : server_(server), name_(std::move(name)) {}

  Response exchange(std::span<const std::uint32_t> message) override { return server_.handle(session_, message); }
  std::string control(const std::string& line) override { return handle_control(server_, line, name_); }

 private:
  HomodyneServer& server_;
  std::string name_;
  Session session_;
};

/// Serves one HomodyneServer on two loopback ports: binary data and text control.
class TcpServer {
 public:
  explicit TcpServer(HomodyneServer& server, std::string name = "hds") : server_(server), name_(std::move(name)) {}
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;
  ~TcpServer() { stop(); }

  void start(std::uint16_t data_port = 0, std::uint16_t control_port = 0) {
    auto [d, dp] = net::listen_local(data_port);
    auto [c, cp] = net::listen_local(control_port);
    data_listener_ = std::move(d);
    control_listener_ = std::move(c);
    data_port_ = dp;
    control_port_ = cp;
    running_ = true;
    threads_.emplace_back([this] { accept_loop(data_listener_, true); });
    threads_.emplace_back([this] { accept_loop(control_listener_, false); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    data_listener_.shutdown();
    control_listener_.shutdown();
    {
      std::lock_guard lock(mutex_);
      for (auto& s : connections_) s->shutdown();
    }
    for (auto& t : threads_)
      if (t.joinable()) t.join();
    threads_.clear();
    connections_.clear();
  }

  std::uint16_t data_port() const { return data_port_; }
  std::uint16_t control_port() const { return control_port_; }

 private:
  void accept_loop(net::Socket& listener, bool data) {
    while (running_) {
      net::Socket s = net::accept_on(listener);
      if (!s.valid()) break;
      std::lock_guard lock(mutex_);
      if (!running_) break;
      auto sock = std::make_shared<net::Socket>(std::move(s));
      connections_.push_back(sock);
      threads_.emplace_back([this, sock, data] {
        try {
          if (data) serve_data(*sock);
          else serve_control(*sock);
        } catch (const Error&) {
          // Connection dropped mid-frame; the peer sees the closed socket.
        }
      });
    }
  }

  void serve_data(net::Socket& s) {
    Session session;
    std::vector<std::uint32_t> message;
    for (;;) {
      std::uint32_t n = 0;
      if (!s.read_exact(&n, 4)) return;
      if (n > (1u << 24)) throw FormatError("oversized request");
      message.resize(n);
      if (n > 0) s.read_exact(message.data(), 4 * n);
      const std::string out = frame_bytes(encode_response(server_.handle(session, message)));
      s.write_all(out.data(), out.size());
    }
  }

  void serve_control(net::Socket& s) {
    std::string line;
    while (s.read_line(line)) {
      const std::string reply = handle_control(server_, line, name_) + "\n";
      s.write_all(reply.data(), reply.size());
    }
  }

  HomodyneServer& server_;
  std::string name_;
  net::Socket data_listener_, control_listener_;
  std::uint16_t data_port_ = 0, control_port_ = 0;
  std::atomic<bool> running_{false};
  std::mutex mutex_;
  std::list<std::thread> threads_;
  std::vector<std::shared_ptr<net::Socket>> connections_;
};

/// Client over TCP.
class TcpLink : public Link {
 public:
  TcpLink(const std::string& host, std::uint16_t data_port, std::uint16_t control_port)
      : data_(net::connect_to(host, data_port)), control_(net::connect_to(host, control_port)) {}

  Response exchange(std::span<const std::uint32_t> message) override {
    const std::string out = frame_bytes(message);
    data_.write_all(out.data(), out.size());
    std::uint32_t n = 0;
    if (!data_.read_exact(&n, 4)) throw AcquisitionError("HDS closed the data connection");
    std::vector<std::uint32_t> frame(n);
    if (n > 0) data_.read_exact(frame.data(), 4 * n);
    return decode_response(frame);
  }

  std::string control(const std::string& line) override {
    const std::string out = line + "\n";
    control_.write_all(out.data(), out.size());
    std::string reply;
    if (!control_.read_line(reply)) throw AcquisitionError("HDS closed the control connection");
    return reply;
  }

 private:
  net::Socket data_;
  net::Socket control_;
};

}  // namespace psgen::hds
