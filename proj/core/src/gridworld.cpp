#include "pomapf/gridworld.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace pomapf {

StepOutcome step(const JointState& state, const std::vector<Action>& actions,
                 const MapfInstance& instance) {
  const int m = instance.agent_count();
  if (state.agent_count() != m)
    throw ContractError("step: state has " + std::to_string(state.agent_count()) +
                        " agents, instance has " + std::to_string(m));
  if (static_cast<int>(actions.size()) != m)
    throw ContractError("step: expected " + std::to_string(m) + " actions, got " +
                        std::to_string(actions.size()));
  const GridMap& map = instance.map;
  for (const Coord& p : state.positions)
    if (map.blocked(p))
      throw ContractError("step: state places an agent on a blocked cell");

  const std::vector<Coord>& prev = state.positions;
  std::vector<Coord> next(m);
  std::vector<bool> collided(m, false);

  for (int i = 0; i < m; ++i) {
    const Coord target = apply_action(prev[i], actions[i]);
    if (map.blocked(target)) {
      next[i] = prev[i];
      collided[i] = true;
    } else {
      next[i] = target;
    }
  }

  // Cascading reversion to a conflict-free fixed point. Marking is set-based
  // per round, so the result is independent of agent ordering.
  for (;;) {
    std::vector<bool> revert(m, false);
    bool any = false;

    std::map<int, std::vector<int>> by_cell;
    for (int i = 0; i < m; ++i) by_cell[map.index(next[i])].push_back(i);
    for (const auto& [cell, members] : by_cell) {
      if (members.size() < 2) continue;
      // Every participant is flagged, including agents already in place.
      for (int i : members) {
        collided[i] = true;
        if (next[i] != prev[i]) {
          revert[i] = true;
          any = true;
        }
      }
    }

    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        if (next[i] == prev[j] && next[j] == prev[i] && next[i] != next[j]) {
          collided[i] = collided[j] = true;
          revert[i] = revert[j] = true;
          any = true;
        }

    if (!any) break;
    for (int i = 0; i < m; ++i)
      if (revert[i]) next[i] = prev[i];
  }

  StepOutcome out;
  out.next_state = JointState{next, state.timestep + 1};
  out.base_rewards.resize(m);
  out.collided = collided;
  out.arrival_times.assign(m, std::nullopt);
  bool all_done = true;
  for (int i = 0; i < m; ++i) {
    const Coord goal = instance.goals[i];
    const bool on_goal = next[i] == goal;
    const bool was_on_goal = prev[i] == goal;
    if (collided[i]) {
      out.base_rewards[i] = kRewardCollision;
    } else if (on_goal && !was_on_goal) {
      out.base_rewards[i] = kRewardGoal;
    } else if (next[i] != prev[i]) {
      out.base_rewards[i] = kRewardMove;
    } else {
      out.base_rewards[i] = on_goal ? kRewardWaitOnGoal : kRewardMove;
    }
    if (on_goal && !was_on_goal)
      out.arrival_times[i] = state.timestep + 1;
    all_done = all_done && on_goal;
  }
  out.all_done = all_done;
  return out;
}

ObservationGraph observation_graph(const JointState& state, int fov_size) {
  if (fov_size < 3 || fov_size % 2 == 0)
    throw ConfigError("observation_graph: fov size must be odd and >= 3, got " +
                      std::to_string(fov_size));
  const int m = state.agent_count();
  const int radius = (fov_size - 1) / 2;
  ObservationGraph g;
  g.agent_count = m;
  g.timestep = state.timestep;
  g.adj.assign(static_cast<size_t>(m) * m, false);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const Coord a = state.positions[i];
      const Coord b = state.positions[j];
      const bool visible =
          std::abs(a.row - b.row) <= radius && std::abs(a.col - b.col) <= radius;
      g.adj[i * m + j] = visible;
      g.adj[j * m + i] = visible;
    }
  return g;
}

std::vector<int> subgroup(const ObservationGraph& graph, int agent,
                          const std::vector<Coord>& positions, int K) {
  if (K < 1) throw ContractError("subgroup: K must be >= 1");
  std::vector<int> neighbors;
  for (int j = 0; j < graph.agent_count; ++j)
    if (j != agent && graph.edge(agent, j)) neighbors.push_back(j);
  std::sort(neighbors.begin(), neighbors.end(), [&](int a, int b) {
    const int da = manhattan(positions[agent], positions[a]);
    const int db = manhattan(positions[agent], positions[b]);
    if (da != db) return da < db;
    return a < b;
  });
  std::vector<int> members{agent};
  for (int j : neighbors) {
    if (static_cast<int>(members.size()) >= K) break;
    members.push_back(j);
  }
  return members;
}

Observation observe(const JointState& state, int agent, const GridMap& map,
                    const HeuristicMapSet& heuristics,
                    const ObservationGraph& graph, int K, int fov_size) {
  const int m = state.agent_count();
  if (agent < 0 || agent >= m)
    throw ContractError("observe: agent index out of range");
  if (fov_size < 3 || fov_size % 2 == 0)
    throw ConfigError("observe: fov size must be odd and >= 3");

  const int radius = (fov_size - 1) / 2;
  const Coord center = state.positions[agent];
  const std::vector<int> members = subgroup(graph, agent, state.positions, K);

  Observation obs;
  obs.fov_size = fov_size;
  obs.member_ids.assign(K, -1);
  obs.valid.assign(K, false);

  // Channels 0 and 1 are identical across slots; build them once.
  ad::Tensor base({3, fov_size, fov_size});
  for (int r = 0; r < fov_size; ++r)
    for (int c = 0; c < fov_size; ++c) {
      const Coord cell{center.row - radius + r, center.col - radius + c};
      base.at(0, r, c) = map.blocked(cell) ? 1.0 : 0.0;
    }
  for (const Coord& p : state.positions) {
    const int r = p.row - center.row + radius;
    const int c = p.col - center.col + radius;
    if (r >= 0 && r < fov_size && c >= 0 && c < fov_size) base.at(1, r, c) = 1.0;
  }

  for (int k = 0; k < K; ++k) {
    if (k < static_cast<int>(members.size())) {
      const int member = members[k];
      ad::Tensor t = base;
      for (int r = 0; r < fov_size; ++r)
        for (int c = 0; c < fov_size; ++c) {
          const Coord cell{center.row - radius + r, center.col - radius + c};
          t.at(2, r, c) = normalized_obs_value(heuristics, member, cell);
        }
      obs.feature_maps.push_back(std::move(t));
      obs.member_ids[k] = member;
      obs.valid[k] = true;
    } else {
      obs.feature_maps.emplace_back(
          std::vector<int>{3, fov_size, fov_size});
    }
  }
  return obs;
}

}  // namespace pomapf
