#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

namespace shelfpipe {

// Wire protocol, bit-exact: every frame is a 4-byte big-endian payload
// length followed by that many bytes of UTF-8 JSON. Ops:
//   {"op":"sub","topic":T}
//   {"op":"pub","topic":T,"payload":P}
//   {"op":"msg","topic":T,"payload":P}   (broker -> subscriber)
//   {"op":"error","message":M}           (broker -> client, then close)
// Frames above 16 MiB are rejected with an error frame and the connection
// is closed.
inline constexpr std::size_t kMaxFrameBytes = 16u * 1024 * 1024;

// In-process stand-in for the store message bus: topic pub/sub over TCP,
// fan-out to all current subscribers, no persistence, at-most-once.
class BrokerSim {
 public:
  explicit BrokerSim(const std::string& listen_addr);  // "host:port", port 0 picks one
  ~BrokerSim();

  BrokerSim(const BrokerSim&) = delete;
  BrokerSim& operator=(const BrokerSim&) = delete;

  int port() const;
  std::string addr() const;  // "host:port" with the bound port

  void stop();

  std::uint64_t published() const;
  std::uint64_t delivered() const;
  std::uint64_t dropped() const;  // publishes that reached zero subscribers

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class BrokerClient {
 public:
  BrokerClient() = default;
  ~BrokerClient();

  BrokerClient(BrokerClient&& other) noexcept;
  BrokerClient& operator=(BrokerClient&& other) noexcept;
  BrokerClient(const BrokerClient&) = delete;
  BrokerClient& operator=(const BrokerClient&) = delete;

  static BrokerClient connect(const std::string& host_port);  // throws BrokerError

  void subscribe(const std::string& topic);
  void publish(const std::string& topic, const nlohmann::json& payload);

  struct Msg {
    std::string topic;
    nlohmann::json payload;
  };

  // Blocks up to timeout_ms (-1 forever). nullopt on timeout or orderly
  // close; check closed() to tell them apart. Broker error frames throw.
  std::optional<Msg> next(int timeout_ms);

  bool connected() const { return fd_ >= 0; }
  bool closed() const { return closed_; }

  // Unblocks a reader stuck in next() without invalidating the fd; safe to
  // call from another thread, unlike close().
  void shutdown_rd();
  void close();

 private:
  int fd_ = -1;
  bool closed_ = false;
  std::mutex write_mu_;
};

}  // namespace shelfpipe
