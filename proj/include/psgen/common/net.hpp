#pragma once

// Minimal blocking TCP helpers over POSIX sockets (loopback use).

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>

#include "psgen/common/error.hpp"

namespace psgen::net {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  /// Unblocks a thread waiting in accept/recv on this socket.
  void shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  void write_all(const void* data, std::size_t n) const {
    const char* p = static_cast<const char*>(data);
    while (n > 0) {
      const ssize_t k = ::send(fd_, p, n, MSG_NOSIGNAL);
      if (k < 0 && errno == EINTR) continue;
      if (k <= 0) throw AcquisitionError(std::string("socket send failed: ") + std::strerror(errno));
      p += k;
      n -= static_cast<std::size_t>(k);
    }
  }

  /// False on orderly close before the first byte; throws on a short read.
  bool read_exact(void* data, std::size_t n) const {
    char* p = static_cast<char*>(data);
    std::size_t got = 0;
    while (got < n) {
      const ssize_t k = ::recv(fd_, p + got, n - got, 0);
      if (k < 0 && errno == EINTR) continue;
      if (k == 0 && got == 0) return false;
      if (k <= 0) throw AcquisitionError("socket closed mid-message");
      got += static_cast<std::size_t>(k);
    }
    return true;
  }

  /// Reads up to '\n' (excluded). False on orderly close with nothing buffered.
  bool read_line(std::string& line) {
    line.clear();
    for (;;) {
      const auto pos = pending_.find('\n');
      if (pos != std::string::npos) {
        line = pending_.substr(0, pos);
        pending_.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
      char buf[4096];
      const ssize_t k = ::recv(fd_, buf, sizeof buf, 0);
      if (k < 0 && errno == EINTR) continue;
      if (k <= 0) {
        if (pending_.empty()) return false;
        line = std::move(pending_);
        pending_.clear();
        return true;
      }
      pending_.append(buf, static_cast<std::size_t>(k));
    }
  }

 private:
  int fd_ = -1;
  std::string pending_;
};

inline void set_nodelay(const Socket& s) {
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

/// Listens on 127.0.0.1:port (0 picks a free port); returns the socket and bound port.
inline std::pair<Socket, std::uint16_t> listen_local(std::uint16_t port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw AcquisitionError("socket() failed");
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw AcquisitionError("bind failed on port " + std::to_string(port) + ": " + std::strerror(errno));
  if (::listen(s.fd(), 8) != 0) throw AcquisitionError("listen failed");
  socklen_t len = sizeof addr;
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  return {std::move(s), ntohs(addr.sin_port)};
}

inline Socket accept_on(const Socket& listener) {
  for (;;) {
    const int fd = ::accept(listener.fd(), nullptr, nullptr);
    if (fd >= 0) {
      Socket s(fd);
      set_nodelay(s);
      return s;
    }
    if (errno != EINTR) return Socket();
  }
}

inline Socket connect_to(const std::string& host, std::uint16_t port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw AcquisitionError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw AcquisitionError("bad IPv4 address " + host);
  if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw AcquisitionError("connect to " + host + ":" + std::to_string(port) + " failed: " + std::strerror(errno));
  set_nodelay(s);
  return s;
}

}  // namespace psgen::net
