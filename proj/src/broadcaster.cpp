// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "emgforge/error.hpp"
#include "emgforge/streaming.hpp"

namespace emgforge {

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos || colon + 1 == endpoint.size()) {
    throw InvalidArgument("endpoint '" + endpoint + "' is not host:port");
  }
  std::string host = endpoint.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(endpoint.substr(colon + 1), &used);
    if (used != endpoint.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw InvalidArgument("endpoint '" + endpoint + "': bad port");
  }
  if (port > 65535) throw InvalidArgument("endpoint '" + endpoint + "': port out of range");
  return {host, static_cast<std::uint16_t>(port)};
}

namespace {

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw IoError("cannot resolve host '" + host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

bool send_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(fd, data, n, MSG_NOSIGNAL);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) return false;
    data += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

}  // namespace

struct Broadcaster::Client {
  int fd = -1;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<WireFrame> queue;
  bool closed = false;
  std::thread sender;

  void close_socket() {
    std::lock_guard lock(mu);
    closed = true;
    cv.notify_all();
  }
};

Broadcaster::Broadcaster(const std::string& endpoint, std::size_t queue_limit) : queue_limit_(queue_limit) {
  const auto [host, port] = parse_endpoint(endpoint);
  const sockaddr_in addr = resolve(host, port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    throw IoError("cannot bind " + endpoint + ": " + why);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

Broadcaster::~Broadcaster() { stop(); }

void Broadcaster::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, 50);
    if (r <= 0 || !(p.revents & POLLIN)) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto client = std::make_shared<Client>();
    client->fd = fd;
    client->sender = std::thread([this, c = client.get()] {
      for (;;) {
        WireFrame frame;
        {
          std::unique_lock lock(c->mu);
          c->cv.wait(lock, [c] { return c->closed || !c->queue.empty(); });
          if (c->closed) break;
          frame = c->queue.front();
          c->queue.pop_front();
        }
        if (!send_all(c->fd, frame.data(), frame.size())) {
          std::lock_guard lock(c->mu);
          if (!c->closed) dropped_clients_ += 1;
          c->closed = true;
          break;
        }
      }
      ::shutdown(c->fd, SHUT_RDWR);
    });
    std::lock_guard lock(mu_);
    clients_.push_back(std::move(client));
  }
}

void Broadcaster::publish(const ForceFrameMsg& msg) {
  const WireFrame frame = encode_frame(msg);
  std::lock_guard lock(mu_);
  for (auto it = clients_.begin(); it != clients_.end();) {
    auto& c = *it;
    bool dead;
    {
      std::lock_guard cl(c->mu);
      if (!c->closed && c->queue.size() >= queue_limit_) {
        // slow subscriber: disconnect instead of stalling the decoder
        c->closed = true;
        dropped_clients_ += 1;
        c->cv.notify_all();
      }
      dead = c->closed;
      if (!dead) {
        c->queue.push_back(frame);
        c->cv.notify_one();
      }
    }
    if (dead) {
      if (c->sender.joinable()) c->sender.join();
      ::close(c->fd);
      it = clients_.erase(it);
    } else {
      ++it;
    }
  }
}

std::size_t Broadcaster::clients() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& c : clients_) {
    std::lock_guard cl(c->mu);
    n += c->closed ? 0 : 1;
  }
  return n;
}

void Broadcaster::stop() {
  if (!running_.exchange(false)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  std::lock_guard lock(mu_);
  for (auto& c : clients_) {
    // let queued frames drain before closing
    {
      std::unique_lock cl(c->mu);
      c->cv.notify_all();
    }
    for (int i = 0; i < 200; ++i) {
      {
        std::lock_guard cl(c->mu);
        if (c->queue.empty() || c->closed) break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    c->close_socket();
    if (c->sender.joinable()) c->sender.join();
    ::close(c->fd);
  }
  clients_.clear();
  ::close(listen_fd_);
  listen_fd_ = -1;
}

std::vector<ForceFrameMsg> receive_frames(const std::string& endpoint, std::size_t count, int timeout_ms) {
  auto [host, port] = parse_endpoint(endpoint);
  if (host == "0.0.0.0") host = "127.0.0.1";
  const sockaddr_in addr = resolve(host, port);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    throw IoError("cannot connect to " + endpoint + ": " + why);
  }
  std::vector<ForceFrameMsg> out;
  WireFrame buf{};
  std::size_t have = 0;
  while (out.size() < count) {
    pollfd p{fd, POLLIN, 0};
    if (::poll(&p, 1, timeout_ms) <= 0) break;
    const ssize_t k = ::recv(fd, buf.data() + have, buf.size() - have, 0);
    if (k <= 0) break;
    have += static_cast<std::size_t>(k);
    if (have == buf.size()) {
      out.push_back(decode_frame(buf));
      have = 0;
    }
  }
  ::close(fd);
  return out;
}

}  // namespace emgforge
