#include "shelfpipe/broker.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <map>
#include <thread>
#include <vector>

#include "shelfpipe/errors.hpp"
#include "shelfpipe/log.hpp"
#include "shelfpipe/util.hpp"

using nlohmann::json;

namespace shelfpipe {

namespace {

enum class FrameStatus { ok, eof, oversized, bad_json };

bool read_exact(int fd, void* buf, std::size_t len) {
  auto* p = static_cast<std::uint8_t*>(buf);
  std::size_t got = 0;
  while (got < len) {
    ssize_t n = ::read(fd, p + got, len - got);
    if (n <= 0) return false;
    got += static_cast<std::size_t>(n);
  }
  return true;
}

bool write_all(int fd, const void* buf, std::size_t len) {
  const auto* p = static_cast<const std::uint8_t*>(buf);
  std::size_t sent = 0;
  while (sent < len) {
    ssize_t n = ::write(fd, p + sent, len - sent);
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

FrameStatus read_frame(int fd, json& out) {
  std::uint8_t hdr[4];
  if (!read_exact(fd, hdr, 4)) return FrameStatus::eof;
  std::uint32_t len = (std::uint32_t(hdr[0]) << 24) | (std::uint32_t(hdr[1]) << 16) |
                      (std::uint32_t(hdr[2]) << 8) | std::uint32_t(hdr[3]);
  if (len > kMaxFrameBytes) return FrameStatus::oversized;
  std::string body(len, '\0');
  if (!read_exact(fd, body.data(), len)) return FrameStatus::eof;
  try {
    out = json::parse(body);
  } catch (const json::exception&) {
    return FrameStatus::bad_json;
  }
  return FrameStatus::ok;
}

bool write_frame(int fd, const json& j) {
  std::string body = j.dump();
  std::uint8_t hdr[4] = {static_cast<std::uint8_t>(body.size() >> 24),
                         static_cast<std::uint8_t>(body.size() >> 16),
                         static_cast<std::uint8_t>(body.size() >> 8),
                         static_cast<std::uint8_t>(body.size())};
  return write_all(fd, hdr, 4) && write_all(fd, body.data(), body.size());
}

std::pair<std::string, int> parse_host_port(const std::string& addr) {
  auto pos = addr.rfind(':');
  if (pos == std::string::npos) throw BrokerError("address must be host:port: " + addr);
  return {addr.substr(0, pos), std::atoi(addr.c_str() + pos + 1)};
}

}  // namespace

struct BrokerSim::Impl {
  struct Conn {
    int fd = -1;
    std::mutex write_mu;
    ~Conn() {
      if (fd >= 0) ::close(fd);
    }
  };

  int listen_fd = -1;
  int port = 0;
  std::string host;
  std::thread accept_thread;
  std::vector<std::thread> readers;
  std::mutex mu;  // conns, subs, readers
  std::vector<std::shared_ptr<Conn>> conns;
  std::map<std::string, std::vector<std::shared_ptr<Conn>>> subs;
  std::atomic<std::uint64_t> published{0}, delivered{0}, dropped{0};
  std::atomic<bool> stopping{false};

  // shutdown() here, close() in ~Conn: a fan-out that already snapshotted
  // this conn may still hold a reference, so the fd must stay valid (writes
  // just fail) until the last shared_ptr drops.
  void drop_conn(const std::shared_ptr<Conn>& conn) {
    std::lock_guard<std::mutex> lock(mu);
    for (auto& [topic, list] : subs) {
      std::erase(list, conn);
    }
    std::erase(conns, conn);
    ::shutdown(conn->fd, SHUT_RDWR);
  }

  void send_error_and_drop(const std::shared_ptr<Conn>& conn, const std::string& message) {
    {
      std::lock_guard<std::mutex> wl(conn->write_mu);
      write_frame(conn->fd, json{{"op", "error"}, {"message", message}});
    }
    drop_conn(conn);
  }

  void reader_loop(std::shared_ptr<Conn> conn) {
    while (!stopping) {
      json frame;
      switch (read_frame(conn->fd, frame)) {
        case FrameStatus::eof:
          drop_conn(conn);
          return;
        case FrameStatus::oversized:
          send_error_and_drop(conn, "frame exceeds 16 MiB");
          return;
        case FrameStatus::bad_json:
          send_error_and_drop(conn, "frame is not valid JSON");
          return;
        case FrameStatus::ok:
          break;
      }
      if (!frame.is_object() || !frame.contains("op")) {
        send_error_and_drop(conn, "missing op");
        return;
      }
      std::string op = frame["op"].get<std::string>();
      if (op == "sub" && frame.contains("topic")) {
        std::lock_guard<std::mutex> lock(mu);
        subs[frame["topic"].get<std::string>()].push_back(conn);
      } else if (op == "pub" && frame.contains("topic") && frame.contains("payload")) {
        published++;
        std::string topic = frame["topic"].get<std::string>();
        std::vector<std::shared_ptr<Conn>> targets;
        {
          std::lock_guard<std::mutex> lock(mu);
          auto it = subs.find(topic);
          if (it != subs.end()) targets = it->second;
        }
        if (targets.empty()) {
          dropped++;
          continue;
        }
        json msg = {{"op", "msg"}, {"topic", topic}, {"payload", frame["payload"]}};
        for (const auto& t : targets) {
          std::lock_guard<std::mutex> wl(t->write_mu);
          if (write_frame(t->fd, msg)) delivered++;
        }
      } else {
        send_error_and_drop(conn, "unknown or malformed op");
        return;
      }
    }
  }

  void accept_loop() {
    while (!stopping) {
      int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) {
        if (stopping) return;
        continue;
      }
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      auto conn = std::make_shared<Conn>();
      conn->fd = fd;
      std::lock_guard<std::mutex> lock(mu);
      if (stopping) return;  // stop() already swapped the lists out
      conns.push_back(conn);
      readers.emplace_back([this, conn] { reader_loop(conn); });
    }
  }
};

BrokerSim::BrokerSim(const std::string& listen_addr) : impl_(std::make_unique<Impl>()) {
  auto [host, port] = parse_host_port(listen_addr);
  impl_->host = host;

  impl_->listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (impl_->listen_fd < 0) throw BrokerError("socket() failed");
  int one = 1;
  setsockopt(impl_->listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw BrokerError("bad listen host: " + host);
  }
  if (::bind(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw BrokerError("bind failed on " + listen_addr);
  }
  socklen_t len = sizeof addr;
  getsockname(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
  impl_->port = ntohs(addr.sin_port);
  if (::listen(impl_->listen_fd, 64) != 0) throw BrokerError("listen failed");

  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
  SHELFPIPE_LOG_INFO("broker listening on %s:%d", host.c_str(), impl_->port);
}

BrokerSim::~BrokerSim() { stop(); }

int BrokerSim::port() const { return impl_->port; }

std::string BrokerSim::addr() const { return impl_->host + ":" + std::to_string(impl_->port); }

void BrokerSim::stop() {
  if (impl_->stopping.exchange(true)) return;
  ::shutdown(impl_->listen_fd, SHUT_RDWR);
  ::close(impl_->listen_fd);
  std::vector<std::shared_ptr<Impl::Conn>> conns;
  std::vector<std::thread> readers;
  {
    std::lock_guard<std::mutex> lock(impl_->mu);
    conns.swap(impl_->conns);
    readers.swap(impl_->readers);
    impl_->subs.clear();
  }
  for (auto& c : conns) ::shutdown(c->fd, SHUT_RDWR);
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  for (auto& t : readers) {
    if (t.joinable()) t.join();
  }
}

std::uint64_t BrokerSim::published() const { return impl_->published; }
std::uint64_t BrokerSim::delivered() const { return impl_->delivered; }
std::uint64_t BrokerSim::dropped() const { return impl_->dropped; }

BrokerClient::~BrokerClient() { close(); }

BrokerClient::BrokerClient(BrokerClient&& other) noexcept {
  fd_ = other.fd_;
  closed_ = other.closed_;
  other.fd_ = -1;
}

BrokerClient& BrokerClient::operator=(BrokerClient&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    closed_ = other.closed_;
    other.fd_ = -1;
  }
  return *this;
}

BrokerClient BrokerClient::connect(const std::string& host_port) {
  auto [host, port] = parse_host_port(host_port);
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw BrokerError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw BrokerError("bad broker host: " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    throw BrokerError("cannot connect to broker at " + host_port);
  }
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  BrokerClient c;
  c.fd_ = fd;
  return c;
}

void BrokerClient::subscribe(const std::string& topic) {
  std::lock_guard<std::mutex> lock(write_mu_);
  if (fd_ < 0 || !write_frame(fd_, json{{"op", "sub"}, {"topic", topic}})) {
    throw BrokerError("subscribe failed");
  }
}

void BrokerClient::publish(const std::string& topic, const json& payload) {
  std::lock_guard<std::mutex> lock(write_mu_);
  if (fd_ < 0 || !write_frame(fd_, json{{"op", "pub"}, {"topic", topic}, {"payload", payload}})) {
    throw BrokerError("publish failed");
  }
}

std::optional<BrokerClient::Msg> BrokerClient::next(int timeout_ms) {
  if (fd_ < 0) {
    closed_ = true;
    return std::nullopt;
  }
  pollfd pfd{fd_, POLLIN, 0};
  int rc = ::poll(&pfd, 1, timeout_ms);
  if (rc == 0) return std::nullopt;
  if (rc < 0) {
    closed_ = true;
    return std::nullopt;
  }
  json frame;
  switch (read_frame(fd_, frame)) {
    case FrameStatus::eof:
      closed_ = true;
      return std::nullopt;
    case FrameStatus::oversized:
    case FrameStatus::bad_json:
      closed_ = true;
      throw BrokerError("broker sent a corrupt frame");
    case FrameStatus::ok:
      break;
  }
  std::string op = frame.value("op", "");
  if (op == "error") {
    closed_ = true;
    throw BrokerError("broker error: " + frame.value("message", "?"));
  }
  if (op != "msg") throw BrokerError("unexpected frame op: " + op);
  return Msg{frame["topic"].get<std::string>(), frame["payload"]};
}

void BrokerClient::shutdown_rd() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RD);
}

void BrokerClient::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
  closed_ = true;
}

}  // namespace shelfpipe
