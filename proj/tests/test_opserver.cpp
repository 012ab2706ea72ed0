#include <doctest.h>

#include <json.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ciedsim/ciedsim.h"
#include "opserver.hpp"

using nlohmann::json;
namespace op = ciedsim::op;

namespace {

// Minimal blocking WebSocket client: text frames only, always masked.
class WsClient {
 public:
  explicit WsClient(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  }
  ~WsClient() {
    if (fd_ >= 0) ::close(fd_);
  }

  std::string raw_request(const std::string& req) {
    send_all(req);
    std::string resp;
    while (resp.find("\r\n\r\n") == std::string::npos) {
      char b[512];
      const ssize_t n = recv_some(b, sizeof b);
      if (n <= 0) break;
      resp.append(b, static_cast<std::size_t>(n));
    }
    const std::size_t end = resp.find("\r\n\r\n");
    if (end != std::string::npos) {
      buf_ = resp.substr(end + 4);
      resp.resize(end + 4);
    }
    return resp;
  }

  std::string handshake() {
    return raw_request(
        "GET / HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
        "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n");
  }

  void send_text(const std::string& payload) {
    std::string f;
    f.push_back(static_cast<char>(0x81));
    const std::size_t n = payload.size();
    if (n < 126) {
      f.push_back(static_cast<char>(0x80 | n));
    } else {
      f.push_back(static_cast<char>(0x80 | 126));
      f.push_back(static_cast<char>((n >> 8) & 0xff));
      f.push_back(static_cast<char>(n & 0xff));
    }
    const unsigned char mask[4] = {0x12, 0x34, 0x56, 0x78};
    f.append(reinterpret_cast<const char*>(mask), 4);
    for (std::size_t i = 0; i < n; ++i) f.push_back(static_cast<char>(payload[i] ^ mask[i % 4]));
    send_all(f);
  }

  void send_json(const json& j) { send_text(j.dump()); }

  // Next text frame as JSON, or nullopt after the timeout.
  std::optional<json> next(int timeout_ms = 5000) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
      if (auto f = take_frame()) {
        if (f->first == 1) return json::parse(f->second);
        continue;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) return std::nullopt;
      char b[65536];
      const ssize_t n = recv_some(b, sizeof b);
      if (n <= 0) return std::nullopt;
      buf_.append(b, static_cast<std::size_t>(n));
    }
  }

  json next_of(const std::string& type, int timeout_ms = 5000) {
    for (;;) {
      auto f = next(timeout_ms);
      REQUIRE_MESSAGE(f.has_value(), "timed out waiting for " << type);
      if ((*f)["type"] == type) return *f;
    }
  }

 private:
  void send_all(const std::string& s) {
    std::size_t off = 0;
    while (off < s.size()) {
      const ssize_t n = ::send(fd_, s.data() + off, s.size() - off, MSG_NOSIGNAL);
      REQUIRE(n > 0);
      off += static_cast<std::size_t>(n);
    }
  }
  ssize_t recv_some(char* b, std::size_t n) { return ::recv(fd_, b, n, 0); }

  std::optional<std::pair<int, std::string>> take_frame() {
    if (buf_.size() < 2) return std::nullopt;
    const auto* p = reinterpret_cast<const unsigned char*>(buf_.data());
    std::uint64_t len = p[1] & 0x7f;
    std::size_t hdr = 2;
    if (len == 126) {
      if (buf_.size() < 4) return std::nullopt;
      len = (std::uint64_t{p[2]} << 8) | p[3];
      hdr = 4;
    } else if (len == 127) {
      if (buf_.size() < 10) return std::nullopt;
      len = 0;
      for (int i = 0; i < 8; ++i) len = (len << 8) | p[2 + i];
      hdr = 10;
    }
    if (buf_.size() < hdr + len) return std::nullopt;
    std::pair<int, std::string> out{p[0] & 0x0f, buf_.substr(hdr, len)};
    buf_.erase(0, hdr + len);
    return out;
  }

  int fd_ = -1;
  std::string buf_;
};

struct Fixture {
  ciedsim_scenario* scenario = nullptr;
  ciedsim_engine* engine = nullptr;
  std::optional<op::Server> server;
  std::thread thread;

  explicit Fixture(double tps) {
    ciedsim_gen_params p;
    ciedsim_gen_params_default(&p);
    p.width = 16;
    p.height = 16;
    p.threats = 2;
    REQUIRE(ciedsim_scenario_generate(&p, 3, &scenario) == CIEDSIM_OK);
    ciedsim_run_options o;
    ciedsim_run_options_default(&o);
    o.supervised = 1;
    REQUIRE(ciedsim_engine_create(scenario, &o, &engine) == CIEDSIM_OK);
    op::ServeOptions so;
    so.port = 0;
    so.ticks_per_second = tps;
    server.emplace(engine, so);
    thread = std::thread([this] { server->run(); });
  }
  ~Fixture() {
    server->stop();
    thread.join();
    server.reset();
    ciedsim_engine_free(engine);
    ciedsim_scenario_free(scenario);
  }
};

std::uint64_t frame_tick(const json& f) {
  if (f["type"] == "state_snapshot") return f["state"]["tick"];
  return f.value("tick", std::uint64_t{0});
}

}  // namespace

TEST_CASE("websocket accept key matches the RFC example") {
  CHECK(op::websocket_accept("dGhlIHNhbXBsZSBub25jZQ==") == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
  const std::string f = op::encode_frame(1, "hi");
  CHECK(f == std::string("\x81\x02hi", 4));
}

TEST_CASE("opserver: handshake, hello and welcome state") {
  Fixture fx(50.0);
  WsClient c(fx.server->port());
  const std::string resp = c.handshake();
  CHECK(resp.rfind("HTTP/1.1 101", 0) == 0);
  CHECK(resp.find("s3pPLMBiTxaQ9kYGzzhZRbK+xOo=") != std::string::npos);
  const json hello = c.next_of("hello");
  CHECK(hello["protocol"] == op::kProtocolName);
  CHECK(hello["version"] == op::kProtocolVersion);
  const json snap = c.next_of("state_snapshot");
  CHECK(snap["state"]["robots"].size() == 6);
  const json heat = c.next_of("heatmap_delta");
  CHECK(heat["full"] == true);
  CHECK(heat["cells"].size() == 256);
}

TEST_CASE("opserver: plain HTTP gets 426") {
  Fixture fx(50.0);
  WsClient c(fx.server->port());
  CHECK(c.raw_request("GET / HTTP/1.1\r\nHost: x\r\n\r\n").rfind("HTTP/1.1 426", 0) == 0);
}

TEST_CASE("opserver: commands are acknowledged or rejected") {
  Fixture fx(50.0);
  WsClient c(fx.server->port());
  c.handshake();
  c.next_of("hello");

  c.send_json({{"type", "approve_phase"}, {"id", 1}});
  json err = c.next_of("error");
  CHECK(err["code"] == "InvalidCommand");
  CHECK(err["id"] == 1);

  c.send_json({{"type", "pause"}, {"id", 2}});
  const json ack = c.next_of("ack");
  CHECK(ack["command"] == "pause");
  CHECK(ack["id"] == 2);
  json snap;
  do {
    snap = c.next_of("state_snapshot");
  } while (!snap["state"]["paused"].get<bool>());

  c.send_json({{"type", "teleport"}});
  CHECK(c.next_of("error")["code"] == "protocol");
  c.send_text("{nope");
  CHECK(c.next_of("error")["code"] == "protocol");
  c.send_json({{"type", "set_pace"}, {"ticks_per_second", -1}});
  CHECK(c.next_of("error")["code"] == "invalid_command");
  c.send_json({{"type", "set_pace"}, {"ticks_per_second", 200}});
  CHECK(c.next_of("ack")["command"] == "set_pace");
  c.send_json({{"type", "snapshot_request"}});
  CHECK(c.next_of("state_snapshot")["state"]["paused"] == true);
}

TEST_CASE("opserver: every client sees the same broadcast stream") {
  Fixture fx(40.0);
  WsClient a(fx.server->port()), b(fx.server->port());
  a.handshake();
  b.handshake();
  const std::uint64_t t0 = std::max(a.next_of("state_snapshot")["state"]["tick"].get<std::uint64_t>(),
                                    b.next_of("state_snapshot")["state"]["tick"].get<std::uint64_t>());
  const std::uint64_t t1 = t0 + 6;
  auto collect = [&](WsClient& c) {
    std::vector<std::string> frames;
    for (;;) {
      auto f = c.next();
      REQUIRE(f.has_value());
      const std::string type = (*f)["type"];
      if (type == "hello" || (type == "heatmap_delta" && f->value("full", false))) continue;
      const std::uint64_t t = frame_tick(*f);
      if (t > t0 && t <= t1) frames.push_back(f->dump());
      if (type == "state_snapshot" && t >= t1) break;
    }
    return frames;
  };
  const auto fa = collect(a);
  const auto fb = collect(b);
  CHECK(fa.size() >= 6);
  CHECK(fa == fb);
}

TEST_CASE("opserver: phase proposals pause the run until approved") {
  Fixture fx(2000.0);
  WsClient c(fx.server->port());
  c.handshake();
  const json prop = c.next_of("phase_proposal", 30000);
  CHECK(prop["from"] == "Explore");
  CHECK(prop["to"] == "SpecialisedDetection");
  json snap;
  do {
    snap = c.next_of("state_snapshot");
  } while (!snap["state"]["paused"].get<bool>());
  c.send_json({{"type", "approve_phase"}});
  CHECK(c.next_of("ack")["command"] == "approve_phase");
  do {
    snap = c.next_of("state_snapshot");
  } while (snap["state"]["phase"] != "SpecialisedDetection");
  CHECK(snap["state"]["paused"] == false);
}

TEST_CASE("opserver: a taken port is reported") {
  Fixture fx(10.0);
  ciedsim_engine* e = fx.engine;
  op::ServeOptions so;
  so.port = fx.server->port();
  CHECK_THROWS_AS(op::Server(e, so), op::PortInUse);
}
