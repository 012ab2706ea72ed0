#include "ciedsim/netsim.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "ciedsim/errors.hpp"

namespace ciedsim {

void validate(const NetConfig& config) {
  if (!(config.radio_range > 0.0)) throw Error(ErrorCode::config, "radio_range must be > 0");
  if (!(config.p_link_loss >= 0.0 && config.p_link_loss < 1.0)) {
    throw Error(ErrorCode::config, "p_link_loss must lie in [0,1)");
  }
  if (config.base_latency < 1) throw Error(ErrorCode::config, "base_latency must be >= 1");
  if (config.default_ttl < 1) throw Error(ErrorCode::config, "default_ttl must be >= 1");
}

std::string_view to_string(MessageKind k) noexcept {
  constexpr std::string_view names[] = {"status", "reading", "map_delta", "task", "ack", "mns_control", "operator_cmd"};
  return names[static_cast<std::size_t>(k)];
}

std::string_view to_string(DropReason r) noexcept {
  constexpr std::string_view names[] = {"loss", "ttl", "node_down"};
  return names[static_cast<std::size_t>(r)];
}

Topology::Topology(std::size_t nodes) : present_(nodes, 1), adj_(nodes * nodes, 0), neighbours_(nodes) {}

void Topology::set_present(NodeId n, bool p) {
  present_[n] = p;
  if (p) return;
  for (NodeId m : std::vector<NodeId>(neighbours_[n])) disconnect(n, m);
}

void Topology::connect(NodeId a, NodeId b) {
  if (a == b || linked(a, b)) return;
  const std::size_t n = present_.size();
  adj_[a * n + b] = adj_[b * n + a] = 1;
  auto insert_sorted = [](std::vector<NodeId>& v, NodeId x) { v.insert(std::lower_bound(v.begin(), v.end(), x), x); };
  insert_sorted(neighbours_[a], b);
  insert_sorted(neighbours_[b], a);
}

void Topology::disconnect(NodeId a, NodeId b) {
  if (!linked(a, b)) return;
  const std::size_t n = present_.size();
  adj_[a * n + b] = adj_[b * n + a] = 0;
  std::erase(neighbours_[a], b);
  std::erase(neighbours_[b], a);
}

Topology rebuild_topology(std::span<const std::optional<Vec2>> poses, const NetConfig& config,
                          const LinkBlock* block) {
  Topology t(poses.size());
  for (NodeId i = 0; i < poses.size(); ++i) {
    if (!poses[i]) t.set_present(i, false);
  }
  std::vector<std::uint8_t> isolated(poses.size(), 0);
  if (block) {
    for (NodeId n : block->isolated) {
      if (n < isolated.size()) isolated[n] = 1;
    }
  }
  for (NodeId a = 0; a < poses.size(); ++a) {
    if (!poses[a] || isolated[a]) continue;
    for (NodeId b = a + 1; b < poses.size(); ++b) {
      if (!poses[b] || isolated[b]) continue;
      if (distance(*poses[a], *poses[b]) <= config.radio_range) t.connect(a, b);
    }
  }
  if (block) {
    for (const auto& [a, b] : block->cut) {
      if (a < poses.size() && b < poses.size()) t.disconnect(a, b);
    }
  }
  return t;
}

namespace {

// Hop distance to dst from every node (-1 when unreachable).
std::vector<int> hops_to(const Topology& topology, NodeId dst) {
  std::vector<int> dist(topology.node_count(), -1);
  if (!topology.present(dst)) return dist;
  std::vector<NodeId> queue{dst};
  dist[dst] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const NodeId c = queue[head];
    for (NodeId n : topology.neighbours(c)) {
      if (dist[n] >= 0) continue;
      dist[n] = dist[c] + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

}  // namespace

std::optional<std::vector<NodeId>> route(const Topology& topology, NodeId src, NodeId dst) {
  if (src >= topology.node_count() || dst >= topology.node_count()) return std::nullopt;
  if (src == dst) return std::vector<NodeId>{};
  const std::vector<int> dist = hops_to(topology, dst);
  if (dist[src] < 0) return std::nullopt;
  std::vector<NodeId> path{src};
  NodeId cur = src;
  while (cur != dst) {
    // Neighbour lists are ascending, so the first closer node is the smallest id.
    for (NodeId n : topology.neighbours(cur)) {
      if (dist[n] == dist[cur] - 1) {
        cur = n;
        break;
      }
    }
    path.push_back(cur);
  }
  return path;
}

DeliveryResult deliver(std::vector<Message> in_flight, const Topology& topology, double p_link_loss,
                       std::uint32_t base_latency, RngStream& rng, Tick tick) {
  (void)tick;
  DeliveryResult out;
  std::map<NodeId, std::vector<int>> dist_cache;
  auto next_hop = [&](NodeId at, NodeId dst) -> std::optional<NodeId> {
    auto it = dist_cache.find(dst);
    if (it == dist_cache.end()) it = dist_cache.emplace(dst, hops_to(topology, dst)).first;
    const std::vector<int>& dist = it->second;
    if (dist[at] <= 0) return std::nullopt;
    for (NodeId n : topology.neighbours(at)) {
      if (dist[n] == dist[at] - 1) return n;
    }
    return std::nullopt;
  };

  for (Message& m : in_flight) {
    if (!topology.present(m.at)) {
      out.dropped.push_back({std::move(m), DropReason::node_down});
      continue;
    }
    if (m.at == m.dst) {
      out.delivered.push_back(std::move(m));
      continue;
    }
    const std::optional<NodeId> hop = m.dst < topology.node_count() ? next_hop(m.at, m.dst) : std::nullopt;
    if (!hop) {
      m.hop_progress = 0;
      if (--m.ttl == 0) {
        out.dropped.push_back({std::move(m), DropReason::ttl});
      } else {
        out.in_flight.push_back(std::move(m));
      }
      continue;
    }
    if (++m.hop_progress < base_latency) {
      out.in_flight.push_back(std::move(m));
      continue;
    }
    m.hop_progress = 0;
    if (rng.bernoulli(p_link_loss)) {
      out.dropped.push_back({std::move(m), DropReason::loss});
      continue;
    }
    m.at = *hop;
    ++m.hops;
    --m.ttl;
    if (m.at == m.dst) {
      out.delivered.push_back(std::move(m));
    } else if (m.ttl == 0) {
      out.dropped.push_back({std::move(m), DropReason::ttl});
    } else {
      out.in_flight.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<std::vector<NodeId>> partitions(const Topology& topology) {
  std::vector<std::vector<NodeId>> out;
  std::vector<std::uint8_t> seen(topology.node_count(), 0);
  for (NodeId start = 0; start < topology.node_count(); ++start) {
    if (!topology.present(start) || seen[start]) continue;
    std::vector<NodeId> comp{start};
    seen[start] = 1;
    for (std::size_t head = 0; head < comp.size(); ++head) {
      for (NodeId n : topology.neighbours(comp[head])) {
        if (seen[n]) continue;
        seen[n] = 1;
        comp.push_back(n);
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

BroadcastResult broadcast(NodeId src, const Topology& topology, double p_link_loss, RngStream& rng) {
  BroadcastResult out;
  out.processed.assign(topology.node_count(), 0);
  if (src >= topology.node_count() || !topology.present(src)) return out;
  std::vector<std::uint8_t> reached(topology.node_count(), 0);
  std::vector<NodeId> queue{src};
  reached[src] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const NodeId c = queue[head];
    ++out.processed[c];
    for (NodeId n : topology.neighbours(c)) {
      ++out.transmissions;
      if (rng.bernoulli(p_link_loss)) continue;
      if (reached[n]) {
        ++out.duplicates_suppressed;
        continue;
      }
      reached[n] = 1;
      queue.push_back(n);
    }
  }
  for (NodeId n = 0; n < topology.node_count(); ++n) {
    if (reached[n]) out.reached.push_back(n);
  }
  return out;
}

}  // namespace ciedsim
