#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "ciedsim/rng.hpp"
#include "ciedsim/types.hpp"

namespace ciedsim {

struct NetConfig {
  double radio_range = 80.0;  // meters
  double p_link_loss = 0.0;   // per-hop Bernoulli loss
  std::uint32_t base_latency = 1;  // ticks per hop
  Vec2 command_centre_pos{0.5, 0.5};
  std::uint32_t default_ttl = 64;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

void validate(const NetConfig& config);

inline constexpr NodeId kBroadcast = 0xffffffffu;

enum class MessageKind : std::uint8_t { status, reading, map_delta, task, ack, mns_control, operator_cmd };
std::string_view to_string(MessageKind k) noexcept;

// Message bodies are defined by the mission layer; the network only carries
// them and records their size.
struct Payload;

struct Message {
  std::uint64_t id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  MessageKind kind = MessageKind::status;
  std::shared_ptr<const Payload> payload;
  std::uint32_t size_bytes = 0;
  Tick sent_tick = 0;
  std::uint32_t ttl = 64;
  NodeId at = 0;  // current holder
  std::uint32_t hops = 0;
  std::uint32_t hop_progress = 0;  // ticks spent on the current hop
};

// Undirected disk graph over nodes 0..n-1 (0 is the command centre). Absent
// nodes (failed robots) have no edges and are excluded from partitions.
class Topology {
 public:
  Topology() = default;
  explicit Topology(std::size_t nodes);

  std::size_t node_count() const noexcept { return present_.size(); }
  bool present(NodeId n) const noexcept { return n < present_.size() && present_[n]; }
  bool linked(NodeId a, NodeId b) const noexcept { return adj_[a * present_.size() + b] != 0; }
  std::span<const NodeId> neighbours(NodeId n) const noexcept { return neighbours_[n]; }

  void set_present(NodeId n, bool p);
  void connect(NodeId a, NodeId b);
  void disconnect(NodeId a, NodeId b);

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  std::vector<std::uint8_t> present_;
  std::vector<std::uint8_t> adj_;
  std::vector<std::vector<NodeId>> neighbours_;
};

// Links removed on top of the disk model (blackouts, cut links).
struct LinkBlock {
  std::vector<NodeId> isolated;
  std::vector<std::pair<NodeId, NodeId>> cut;
};

// poses[i] is node i's position, or nullopt when the node is absent.
Topology rebuild_topology(std::span<const std::optional<Vec2>> poses, const NetConfig& config,
                          const LinkBlock* block = nullptr);

// Shortest hop path src..dst (inclusive); ties broken by smallest next-node
// id. Empty when src == dst, nullopt when disconnected.
std::optional<std::vector<NodeId>> route(const Topology& topology, NodeId src, NodeId dst);

enum class DropReason : std::uint8_t { loss, ttl, node_down };
std::string_view to_string(DropReason r) noexcept;

struct DroppedMessage {
  Message message;
  DropReason reason = DropReason::loss;
};

struct DeliveryResult {
  std::vector<Message> delivered;
  std::vector<Message> in_flight;
  std::vector<DroppedMessage> dropped;
};

// Advances every message by one tick. Routes are recomputed from the current
// holder each tick, so a message follows topology changes while in flight.
DeliveryResult deliver(std::vector<Message> in_flight, const Topology& topology, double p_link_loss,
                       std::uint32_t base_latency, RngStream& rng, Tick tick);

// Connected components of present nodes, each ascending, ordered by first id.
std::vector<std::vector<NodeId>> partitions(const Topology& topology);

struct BroadcastResult {
  std::vector<NodeId> reached;          // ascending, includes src
  std::vector<std::uint32_t> processed; // per node: times the flood was handled
  std::uint32_t transmissions = 0;
  std::uint32_t duplicates_suppressed = 0;
};

// Flood from src with duplicate suppression and per-transmission loss.
BroadcastResult broadcast(NodeId src, const Topology& topology, double p_link_loss, RngStream& rng);

}  // namespace ciedsim
