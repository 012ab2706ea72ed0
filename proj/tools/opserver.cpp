#include "opserver.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <openssl/sha.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>

#include "json.hpp"

namespace ciedsim::op {

using json = nlohmann::json;

namespace {

constexpr std::size_t kMaxMessage = 1 << 20;
constexpr std::size_t kMaxBacklog = 64u << 20;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  ciedsim_string_free(s);
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string error_frame(const std::string& code, const std::string& message, const json& id) {
  json j{{"type", "error"}, {"code", code}, {"message", message}};
  if (!id.is_null()) j["id"] = id;
  return j.dump();
}

bool is_operator_command(const std::string& t) {
  return t == "approve_phase" || t == "retask" || t == "confirm_candidate" || t == "dismiss_candidate" ||
         t == "pause" || t == "resume" || t == "abort";
}

}  // namespace

std::string websocket_accept(const std::string& key) {
  const std::string src = key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(src.data()), src.size(), digest);
  unsigned char out[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
  const int n = EVP_EncodeBlock(out, digest, SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<char*>(out), static_cast<std::size_t>(n));
}

std::string encode_frame(std::uint8_t opcode, const std::string& payload) {
  std::string f;
  f.push_back(static_cast<char>(0x80 | opcode));
  const std::size_t n = payload.size();
  if (n < 126) {
    f.push_back(static_cast<char>(n));
  } else if (n <= 0xffff) {
    f.push_back(static_cast<char>(126));
    f.push_back(static_cast<char>((n >> 8) & 0xff));
    f.push_back(static_cast<char>(n & 0xff));
  } else {
    f.push_back(static_cast<char>(127));
    for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xff));
  }
  f += payload;
  return f;
}

struct Server::Client {
  int fd = -1;
  std::uint64_t id = 0;
  bool upgraded = false;
  bool closing = false;
  std::string in;
  std::string out;
  std::string fragments;
};

Server::Server(ciedsim_engine* engine, ServeOptions options) : engine_(engine), options_(std::move(options)) {
  if (!(options_.ticks_per_second > 0.0)) throw std::invalid_argument("ticks_per_second must be > 0");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw std::invalid_argument("bad bind address " + options_.bind_address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const int err = errno;
    ::close(listen_fd_);
    if (err == EADDRINUSE) throw PortInUse(options_.port);
    throw std::runtime_error(std::string("bind: ") + std::strerror(err));
  }
  if (::listen(listen_fd_, 16) != 0) {
    const int err = errno;
    ::close(listen_fd_);
    throw std::runtime_error(std::string("listen: ") + std::strerror(err));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  ::fcntl(listen_fd_, F_SETFL, O_NONBLOCK);

  char* state = nullptr;
  ciedsim_engine_state_json(engine_, &state);
  const json s = json::parse(take_string(state));
  sent_heatmap_.assign(static_cast<std::size_t>(s["width"].get<int>() * s["height"].get<int>()), 0.0);
  ciedsim_engine_heatmap(engine_, sent_heatmap_.data(), sent_heatmap_.size());
  log_sent_ = ciedsim_engine_log_size(engine_);
}

Server::~Server() {
  for (Client* c : clients_) {
    ::close(c->fd);
    delete c;
  }
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void Server::accept_clients() {
  for (;;) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) return;
    ::fcntl(fd, F_SETFL, O_NONBLOCK);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto* c = new Client;
    c->fd = fd;
    c->id = next_client_++;
    clients_.push_back(c);
  }
}

bool Server::read_client(Client& c) {
  char buf[16384];
  for (;;) {
    const ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
    if (n > 0) {
      c.in.append(buf, static_cast<std::size_t>(n));
      if (c.in.size() > 2 * kMaxMessage) return false;
      continue;
    }
    if (n == 0) return false;
    if (errno == EAGAIN || errno == EWOULDBLOCK) break;
    if (errno == EINTR) continue;
    return false;
  }
  if (!c.upgraded && !handshake(c)) return false;
  return !c.upgraded || parse_frames(c);
}

bool Server::handshake(Client& c) {
  const auto end = c.in.find("\r\n\r\n");
  if (end == std::string::npos) return c.in.size() < 16384;
  const std::string head = c.in.substr(0, end);
  c.in.erase(0, end + 4);
  std::string key;
  bool upgrade = false;
  std::size_t pos = head.find("\r\n");
  while (pos != std::string::npos) {
    const std::size_t next = head.find("\r\n", pos + 2);
    const std::string line = head.substr(pos + 2, next == std::string::npos ? std::string::npos : next - pos - 2);
    pos = next;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string name = lower(line.substr(0, colon));
    std::string value = line.substr(colon + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    value.erase(value.find_last_not_of(" \t") + 1);
    if (name == "sec-websocket-key") key = value;
    if (name == "upgrade" && lower(value) == "websocket") upgrade = true;
  }
  if (!upgrade || key.empty()) {
    const std::string body = "ciedsim operator gateway: connect with a WebSocket client\n";
    c.out += "HTTP/1.1 426 Upgrade Required\r\nUpgrade: websocket\r\nConnection: close\r\nContent-Type: text/plain\r\n"
             "Content-Length: " +
             std::to_string(body.size()) + "\r\n\r\n" + body;
    c.closing = true;
    return true;
  }
  c.out += "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: " +
           websocket_accept(key) + "\r\n\r\n";
  c.upgraded = true;
  send_welcome(c);
  return true;
}

bool Server::parse_frames(Client& c) {
  for (;;) {
    if (c.in.size() < 2) return true;
    const auto* p = reinterpret_cast<const unsigned char*>(c.in.data());
    const bool fin = (p[0] & 0x80) != 0;
    const std::uint8_t opcode = p[0] & 0x0f;
    const bool masked = (p[1] & 0x80) != 0;
    std::uint64_t len = p[1] & 0x7f;
    std::size_t off = 2;
    if (len == 126) {
      if (c.in.size() < 4) return true;
      len = (static_cast<std::uint64_t>(p[2]) << 8) | p[3];
      off = 4;
    } else if (len == 127) {
      if (c.in.size() < 10) return true;
      len = 0;
      for (int i = 0; i < 8; ++i) len = (len << 8) | p[2 + i];
      off = 10;
    }
    if (!masked || len > kMaxMessage) return false;  // clients must mask
    if (c.in.size() < off + 4 + len) return true;
    const unsigned char* mask = p + off;
    std::string payload(len, '\0');
    for (std::uint64_t i = 0; i < len; ++i) payload[i] = static_cast<char>(p[off + 4 + i] ^ mask[i % 4]);
    c.in.erase(0, off + 4 + len);
    switch (opcode) {
      case 0x0:
      case 0x1:
        c.fragments += payload;
        if (c.fragments.size() > kMaxMessage) return false;
        if (fin) {
          on_message(c, c.fragments);
          c.fragments.clear();
        }
        break;
      case 0x2:
        send_text(c, error_frame("protocol", "binary frames are not supported", nullptr));
        break;
      case 0x8:
        c.out += encode_frame(0x8, payload.substr(0, 2));
        c.closing = true;
        return true;
      case 0x9:
        c.out += encode_frame(0xA, payload);
        break;
      default:
        break;
    }
  }
}

void Server::send_text(Client& c, const std::string& text) {
  if (!c.upgraded || c.closing) return;
  c.out += encode_frame(0x1, text);
}

void Server::broadcast(const std::string& text) {
  const std::string frame = encode_frame(0x1, text);
  for (Client* c : clients_) {
    if (c->upgraded && !c->closing) c->out += frame;
  }
}

bool Server::flush(Client& c) {
  while (!c.out.empty()) {
    const ssize_t n = ::send(c.fd, c.out.data(), c.out.size(), MSG_NOSIGNAL);
    if (n > 0) {
      c.out.erase(0, static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return c.out.size() < kMaxBacklog;
    if (n < 0 && errno == EINTR) continue;
    c.out.clear();
    c.closing = true;
    return false;
  }
  return !c.closing;
}

std::string Server::snapshot_frame() const {
  char* state = nullptr;
  ciedsim_engine_state_json(engine_, &state);
  json j{{"type", "state_snapshot"}};
  j["state"] = json::parse(take_string(state));
  j["heatmap_seq"] = heatmap_seq_;
  return j.dump();
}

std::string Server::full_heatmap_frame() const {
  json cells = json::array();
  for (std::size_t i = 0; i < sent_heatmap_.size(); ++i) cells.push_back({i, sent_heatmap_[i]});
  json j{{"type", "heatmap_delta"}, {"seq", heatmap_seq_}, {"full", true}, {"tick", ciedsim_engine_tick(engine_)}};
  j["cells"] = std::move(cells);
  return j.dump();
}

void Server::send_welcome(Client& c) {
  json hello{{"type", "hello"},
             {"protocol", kProtocolName},
             {"version", kProtocolVersion},
             {"library", ciedsim_version()},
             {"client", c.id},
             {"ticks_per_second", options_.ticks_per_second}};
  send_text(c, hello.dump());
  send_text(c, snapshot_frame());
  send_text(c, full_heatmap_frame());
  if (proposal_open_) {
    char* state = nullptr;
    ciedsim_engine_state_json(engine_, &state);
    const json s = json::parse(take_string(state));
    if (!s["proposal"].is_null()) {
      send_text(c, json{{"type", "phase_proposal"}, {"from", s["phase"]}, {"to", s["proposal"]}, {"tick", s["tick"]}}.dump());
    }
  }
}

void Server::on_message(Client& c, const std::string& text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::exception&) {
    send_text(c, error_frame("protocol", "frame is not valid JSON", nullptr));
    return;
  }
  const json id = msg.is_object() && msg.contains("id") ? msg["id"] : json(nullptr);
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    send_text(c, error_frame("protocol", "frame needs a string 'type'", id));
    return;
  }
  const std::string type = msg["type"].get<std::string>();
  auto ack = [&] {
    json a{{"type", "ack"}, {"command", type}};
    if (!id.is_null()) a["id"] = id;
    send_text(c, a.dump());
  };
  if (type == "set_pace") {
    if (!msg.contains("ticks_per_second") || !msg["ticks_per_second"].is_number() ||
        !(msg["ticks_per_second"].get<double>() > 0.0) || msg["ticks_per_second"].get<double>() > 10000.0) {
      send_text(c, error_frame("invalid_command", "set_pace needs ticks_per_second in (0, 10000]", id));
      return;
    }
    options_.ticks_per_second = msg["ticks_per_second"].get<double>();
    next_tick_ = now_seconds();
    ack();
    return;
  }
  if (type == "snapshot_request") {
    send_text(c, snapshot_frame());
    send_text(c, full_heatmap_frame());
    return;
  }
  if (!is_operator_command(type)) {
    send_text(c, error_frame("protocol", "unknown frame type '" + type + "'", id));
    return;
  }
  const ciedsim_status st = ciedsim_engine_submit(engine_, text.c_str());
  if (st != CIEDSIM_OK) {
    send_text(c, error_frame(ciedsim_status_name(st), ciedsim_last_error(), id));
    return;
  }
  if (type == "approve_phase" && auto_paused_) {
    ciedsim_engine_submit(engine_, R"({"type":"resume"})");
    auto_paused_ = false;
  }
  if (type == "pause" || type == "resume") auto_paused_ = false;
  ack();
}

void Server::after_tick() {
  // Heatmap cells whose log-odds moved since the last frame.
  std::vector<double> cur(sent_heatmap_.size());
  ciedsim_engine_heatmap(engine_, cur.data(), cur.size());
  json cells = json::array();
  for (std::size_t i = 0; i < cur.size(); ++i) {
    if (cur[i] != sent_heatmap_[i]) cells.push_back({i, cur[i]});
  }
  sent_heatmap_ = std::move(cur);
  if (!cells.empty()) {
    ++heatmap_seq_;
    json j{{"type", "heatmap_delta"}, {"seq", heatmap_seq_}, {"tick", ciedsim_engine_tick(engine_)}};
    j["cells"] = std::move(cells);
    broadcast(j.dump());
  }

  char* lines = nullptr;
  ciedsim_engine_log_lines(engine_, log_sent_, &lines);
  log_sent_ = ciedsim_engine_log_size(engine_);
  const std::string text = take_string(lines);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    if (line.empty()) continue;
    json rec = json::parse(line);
    const std::string kind = rec.value("e", "");
    if (kind == "net" || kind == "snapshot") continue;
    broadcast(json{{"type", "event"}, {"tick", rec["t"]}, {"record", std::move(rec)}}.dump());
  }

  char* state = nullptr;
  ciedsim_engine_state_json(engine_, &state);
  const json s = json::parse(take_string(state));
  json snap{{"type", "state_snapshot"}, {"state", s}, {"heatmap_seq", heatmap_seq_}};
  broadcast(snap.dump());

  if (!s["proposal"].is_null()) {
    if (!proposal_open_) {
      proposal_open_ = true;
      broadcast(json{{"type", "phase_proposal"}, {"from", s["phase"]}, {"to", s["proposal"]}, {"tick", s["tick"]}}.dump());
      if (!s["paused"].get<bool>()) {
        ciedsim_engine_submit(engine_, R"({"type":"pause"})");
        auto_paused_ = true;
      }
    }
  } else {
    proposal_open_ = false;
  }

  if (ciedsim_engine_outcome(engine_) != CIEDSIM_RUNNING && !finished_announced_) {
    finished_announced_ = true;
    char* report = nullptr;
    ciedsim_engine_report_json(engine_, &report);
    broadcast(json{{"type", "finished"}, {"outcome", s["outcome"]}, {"report", json::parse(take_string(report))}}.dump());
  }
}

void Server::tick_if_due() {
  if (ciedsim_engine_outcome(engine_) != CIEDSIM_RUNNING) return;
  const double t = now_seconds();
  if (t < next_tick_) return;
  next_tick_ = std::max(next_tick_ + 1.0 / options_.ticks_per_second, t - 1.0);
  const std::uint64_t before = ciedsim_engine_tick(engine_);
  const int paused_before = ciedsim_engine_paused(engine_);
  ciedsim_engine_step(engine_);
  const bool moved = ciedsim_engine_tick(engine_) != before || ciedsim_engine_paused(engine_) != paused_before ||
                     ciedsim_engine_outcome(engine_) != CIEDSIM_RUNNING;
  if (moved) after_tick();
}

void Server::run() {
  next_tick_ = now_seconds();
  std::vector<pollfd> fds;
  while (!stop_) {
    fds.clear();
    fds.push_back({listen_fd_, POLLIN, 0});
    for (Client* c : clients_) {
      short ev = POLLIN;
      if (!c->out.empty()) ev |= POLLOUT;
      fds.push_back({c->fd, ev, 0});
    }
    const double wait = std::clamp(next_tick_ - now_seconds(), 0.0, 0.05);
    ::poll(fds.data(), fds.size(), static_cast<int>(wait * 1000.0));
    if (fds[0].revents & POLLIN) accept_clients();
    for (std::size_t i = 1; i < fds.size(); ++i) {
      Client* c = clients_[i - 1];
      if (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) {
        if (!read_client(*c)) {
          c->closing = true;
          c->out.clear();
        }
      }
    }
    tick_if_due();
    for (auto it = clients_.begin(); it != clients_.end();) {
      Client* c = *it;
      const bool keep = flush(*c);
      if (!keep && (c->out.empty() || c->out.size() >= kMaxBacklog)) {
        ::close(c->fd);
        delete c;
        it = clients_.erase(it);
      } else {
        ++it;
      }
    }
    if (options_.exit_on_finish && ciedsim_engine_outcome(engine_) != CIEDSIM_RUNNING) {
      const bool drained =
          std::all_of(clients_.begin(), clients_.end(), [](const Client* c) { return c->out.empty(); });
      if (drained) break;
    }
  }
}

}  // namespace ciedsim::op
