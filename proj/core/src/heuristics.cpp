#include "pomapf/heuristics.hpp"

#include <algorithm>
#include <queue>
#include <string>

namespace pomapf {

HeuristicMapSet::HeuristicMapSet(int width, int height,
                                 std::vector<std::vector<int>> dist)
    : width_(width), height_(height), dist_(std::move(dist)) {
  max_finite_.reserve(dist_.size());
  for (const auto& field : dist_) {
    if (static_cast<int>(field.size()) != width_ * height_)
      throw ContractError("HeuristicMapSet: field size mismatch");
    int mx = 0;
    for (int d : field)
      if (d != kUnreachable) mx = std::max(mx, d);
    max_finite_.push_back(std::max(mx, 1));
  }
}

HeuristicMapSet compute_heuristic_maps(const MapfInstance& instance) {
  const GridMap& map = instance.map;
  std::vector<std::vector<int>> dist;
  dist.reserve(instance.agent_count());
  for (int i = 0; i < instance.agent_count(); ++i) {
    const Coord goal = instance.goals[i];
    if (map.blocked(goal))
      throw ContractError("compute_heuristic_maps: goal of agent " +
                          std::to_string(i) + " is blocked");
    std::vector<int> field(map.cell_count(), kUnreachable);
    std::queue<Coord> frontier;
    field[map.index(goal)] = 0;
    frontier.push(goal);
    while (!frontier.empty()) {
      const Coord c = frontier.front();
      frontier.pop();
      const int d = field[map.index(c)];
      for (int a = 0; a < 4; ++a) {
        const Coord n = apply_action(c, static_cast<Action>(a));
        if (map.blocked(n)) continue;
        if (field[map.index(n)] != kUnreachable) continue;
        field[map.index(n)] = d + 1;
        frontier.push(n);
      }
    }
    dist.push_back(std::move(field));
  }
  return HeuristicMapSet(map.width(), map.height(), std::move(dist));
}

double normalized_h(const HeuristicMapSet& maps, int agent, Coord cell) {
  if (cell.row < 0 || cell.row >= maps.height() || cell.col < 0 ||
      cell.col >= maps.width())
    return -1.0;
  const int d = maps.dist(agent, cell);
  if (d == kUnreachable) return -1.0;
  return -static_cast<double>(d) / maps.max_finite(agent);
}

double normalized_obs_value(const HeuristicMapSet& maps, int agent, Coord cell) {
  return -normalized_h(maps, agent, cell);
}

double shape_reward(double r, double h_next, double lambda, double gamma) {
  if (lambda < 0.0 || lambda > 1.0)
    throw ConfigError("shape_reward: lambda must lie in [0, 1]");
  if (gamma <= 0.0 || gamma > 1.0)
    throw ConfigError("shape_reward: gamma must lie in (0, 1]");
  return r + (1.0 - lambda) * gamma * h_next;
}

}  // namespace pomapf
