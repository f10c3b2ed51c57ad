#include "pomapf/grid.hpp"

#include <queue>
#include <string>

namespace pomapf {

MapfInstance::MapfInstance(GridMap m, std::vector<Coord> s, std::vector<Coord> g)
    : map(std::move(m)), starts(std::move(s)), goals(std::move(g)) {
  validate_instance(*this);
}

bool reachable(const GridMap& map, Coord from, Coord to) {
  if (map.blocked(from) || map.blocked(to)) return false;
  if (from == to) return true;
  std::vector<bool> seen(map.cell_count(), false);
  std::queue<Coord> frontier;
  frontier.push(from);
  seen[map.index(from)] = true;
  while (!frontier.empty()) {
    const Coord c = frontier.front();
    frontier.pop();
    for (int a = 0; a < 4; ++a) {
      const Coord n = apply_action(c, static_cast<Action>(a));
      if (map.blocked(n) || seen[map.index(n)]) continue;
      if (n == to) return true;
      seen[map.index(n)] = true;
      frontier.push(n);
    }
  }
  return false;
}

void validate_instance(const MapfInstance& instance) {
  const auto& map = instance.map;
  const int m = instance.agent_count();
  if (m < 1) throw ValidationError("instance: needs at least one agent");
  if (instance.goals.size() != instance.starts.size())
    throw ValidationError("instance: start and goal counts differ");
  for (int i = 0; i < m; ++i) {
    const Coord s = instance.starts[i];
    const Coord g = instance.goals[i];
    if (map.blocked(s))
      throw ValidationError("instance: start of agent " + std::to_string(i) +
                            " is blocked or off-map");
    if (map.blocked(g))
      throw ValidationError("instance: goal of agent " + std::to_string(i) +
                            " is blocked or off-map");
    for (int j = 0; j < i; ++j) {
      if (instance.starts[j] == s)
        throw ValidationError("instance: agents " + std::to_string(j) + " and " +
                              std::to_string(i) + " share a start vertex");
      if (instance.goals[j] == g)
        throw ValidationError("instance: agents " + std::to_string(j) + " and " +
                              std::to_string(i) + " share a goal vertex");
    }
    if (!reachable(map, s, g))
      throw ValidationError("instance: goal of agent " + std::to_string(i) +
                            " is unreachable from its start");
  }
}

}  // namespace pomapf
