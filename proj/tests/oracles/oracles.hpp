#pragma once
// Reference implementations the simulator is checked against. They share no
// code with the library: plain loops, no shortcuts.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

// Shortest 8-connected step counts by repeated relaxation until nothing
// changes (Bellman-Ford on a unit-weight grid). -1 marks unreachable cells.
inline std::vector<int> grid_distances(int w, int h, int from, const std::function<bool(int)>& passable) {
  const int n = w * h;
  std::vector<int> d(n, -1);
  if (!passable(from)) return d;
  d[from] = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int c = 0; c < n; ++c) {
      if (!passable(c)) continue;
      const int cx = c % w, cy = c / w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dx && !dy) continue;
          const int nx = cx + dx, ny = cy + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int m = ny * w + nx;
          if (d[m] < 0) continue;
          if (d[c] < 0 || d[m] + 1 < d[c]) {
            d[c] = d[m] + 1;
            changed = true;
          }
        }
      }
    }
  }
  return d;
}

// Disjoint sets with path halving.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }
  bool same(std::size_t a, std::size_t b) { return find(a) == find(b); }

 private:
  std::vector<std::size_t> parent_;
};

// Hop counts on an adjacency matrix by relaxation; -1 when disconnected.
inline std::vector<int> hop_distances(const std::vector<std::vector<bool>>& adj, std::size_t src) {
  const std::size_t n = adj.size();
  std::vector<int> d(n, -1);
  d[src] = 0;
  for (std::size_t round = 0; round < n; ++round) {
    for (std::size_t a = 0; a < n; ++a) {
      if (d[a] < 0) continue;
      for (std::size_t b = 0; b < n; ++b) {
        if (adj[a][b] && (d[b] < 0 || d[a] + 1 < d[b])) d[b] = d[a] + 1;
      }
    }
  }
  return d;
}

struct Observation {
  double p_det = 0.0;
  double p_fp = 0.0;
  bool detected = false;
};

// P(threat | observations) for one cell by Bayes' rule on the two
// hypotheses, with the likelihoods multiplied out in long double.
inline double posterior(double prior, const std::vector<Observation>& obs) {
  long double yes = prior, no = 1.0L - prior;
  for (const Observation& o : obs) {
    yes *= o.detected ? o.p_det : 1.0L - o.p_det;
    no *= o.detected ? o.p_fp : 1.0L - o.p_fp;
  }
  return static_cast<double>(yes / (yes + no));
}

// Marginal posteriors by enumerating every joint threat configuration of a
// small map (cells independent a priori). Exponential; keep cells <= 12.
inline std::vector<double> joint_posteriors(const std::vector<double>& priors,
                                            const std::vector<std::vector<Observation>>& obs) {
  const std::size_t n = priors.size();
  std::vector<long double> mass(n, 0.0L);
  long double total = 0.0L;
  for (std::uint64_t world = 0; world < (1ull << n); ++world) {
    long double p = 1.0L;
    for (std::size_t c = 0; c < n; ++c) {
      const bool threat = (world >> c) & 1u;
      p *= threat ? priors[c] : 1.0L - priors[c];
      for (const Observation& o : obs[c]) {
        const long double pd = threat ? o.p_det : o.p_fp;
        p *= o.detected ? pd : 1.0L - pd;
      }
    }
    total += p;
    for (std::size_t c = 0; c < n; ++c) {
      if ((world >> c) & 1u) mass[c] += p;
    }
  }
  std::vector<double> out(n);
  for (std::size_t c = 0; c < n; ++c) out[c] = static_cast<double>(mass[c] / total);
  return out;
}

// k-sigma interval for a binomial success count.
inline std::pair<double, double> binomial_band(std::uint64_t n, double p, double k = 3.0) {
  const double mean = static_cast<double>(n) * p;
  const double sd = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
  return {mean - k * sd, mean + k * sd};
}

}  // namespace oracle
