#pragma once

#include <limits>
#include <vector>

#include "pomapf/grid.hpp"

namespace pomapf {

inline constexpr int kUnreachable = std::numeric_limits<int>::max();

// Per-agent fields of shortest-path distances from every cell to that
// agent's goal. dist(i, c) == kUnreachable for cells cut off from goal i
// (obstacles included). max_finite(i) is the largest finite distance on the
// map, clamped to >= 1 so normalization is always well defined.
class HeuristicMapSet {
 public:
  HeuristicMapSet(int width, int height, std::vector<std::vector<int>> dist);

  int agent_count() const { return static_cast<int>(dist_.size()); }
  int width() const { return width_; }
  int height() const { return height_; }

  int dist(int agent, Coord c) const {
    return dist_[agent][c.row * width_ + c.col];
  }
  bool reachable(int agent, Coord c) const {
    return dist(agent, c) != kUnreachable;
  }
  int max_finite(int agent) const { return max_finite_[agent]; }

  const std::vector<int>& field(int agent) const { return dist_[agent]; }

 private:
  int width_;
  int height_;
  std::vector<std::vector<int>> dist_;
  std::vector<int> max_finite_;
};

// Backward uniform-cost search from each goal over the free-cell 4-neighbor
// graph. Unit edge costs, so a breadth-first expansion gives exact distances.
HeuristicMapSet compute_heuristic_maps(const MapfInstance& instance);

// Negated normalized distance in [-1, 0]; unreachable or blocked cells pin
// to the worst value -1.
double normalized_h(const HeuristicMapSet& maps, int agent, Coord cell);

// Non-negated variant in [0, 1] used by the observation heuristic channel;
// unreachable, blocked, and out-of-map cells all read 1.
double normalized_obs_value(const HeuristicMapSet& maps, int agent, Coord cell);

// r + (1 - lambda) * gamma * h_next, with h_next in [-1, 0].
double shape_reward(double r, double h_next, double lambda, double gamma);

}  // namespace pomapf
