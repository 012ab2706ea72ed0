#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ciedsim/ciedsim.h"

namespace ciedsim::op {

inline constexpr int kProtocolVersion = 1;
inline constexpr const char* kProtocolName = "ciedsim-op";

class PortInUse : public std::runtime_error {
 public:
  explicit PortInUse(std::uint16_t port)
      : std::runtime_error("port " + std::to_string(port) + " is already in use"), port_(port) {}
  std::uint16_t port() const noexcept { return port_; }

 private:
  std::uint16_t port_;
};

struct ServeOptions {
  std::uint16_t port = 8765;  // 0 picks a free port
  double ticks_per_second = 10.0;
  bool exit_on_finish = false;
  std::string bind_address = "127.0.0.1";
};

// Sec-WebSocket-Accept for a client key.
std::string websocket_accept(const std::string& key);

// Encodes one unfragmented server frame (never masked).
std::string encode_frame(std::uint8_t opcode, const std::string& payload);

// Paced supervised run behind a WebSocket gateway. Single-threaded: the
// engine is only touched from run(); stop() may be called from any thread.
class Server {
 public:
  Server(ciedsim_engine* engine, ServeOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void run();
  void stop() noexcept { stop_ = true; }

 private:
  struct Client;

  void accept_clients();
  bool read_client(Client& c);
  bool handshake(Client& c);
  bool parse_frames(Client& c);
  void on_message(Client& c, const std::string& text);
  void send_text(Client& c, const std::string& text);
  void broadcast(const std::string& text);
  bool flush(Client& c);
  void send_welcome(Client& c);
  std::string snapshot_frame() const;
  std::string full_heatmap_frame() const;
  void after_tick();
  void tick_if_due();

  ciedsim_engine* engine_;
  ServeOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::vector<Client*> clients_;
  std::uint64_t next_client_ = 1;
  std::vector<double> sent_heatmap_;
  std::uint64_t heatmap_seq_ = 0;
  std::size_t log_sent_ = 0;
  bool proposal_open_ = false;
  bool auto_paused_ = false;
  double next_tick_ = 0.0;
  bool finished_announced_ = false;
};

}  // namespace ciedsim::op
