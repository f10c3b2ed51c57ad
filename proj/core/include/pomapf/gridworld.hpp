#pragma once

#include <optional>
#include <vector>

#include "pomapf/grid.hpp"
#include "pomapf/heuristics.hpp"
#include "pomapf/tensor.hpp"

namespace pomapf {

// Base rewards (per-step individual rewards, before shaping).
inline constexpr double kRewardMove = -0.075;
inline constexpr double kRewardWaitOnGoal = 0.0;
inline constexpr double kRewardCollision = -0.5;
inline constexpr double kRewardGoal = 3.0;

struct StepOutcome {
  JointState next_state;
  std::vector<double> base_rewards;
  std::vector<bool> collided;
  bool all_done = false;
  // arrival_times[i] carries t+1 when agent i entered its goal on this step
  // (off-goal -> on-goal transition). The episode driver folds these events
  // into the completion time T_i: the start of the final contiguous on-goal
  // interval.
  std::vector<std::optional<int>> arrival_times;
};

// One synchronous transition. Agents whose intended cell is blocked revert
// in place; vertex conflicts (shared intended cell) and edge conflicts
// (swaps) revert every involved agent, cascading until conflict-free. All
// reverted agents are flagged collided and earn kRewardCollision.
StepOutcome step(const JointState& state, const std::vector<Action>& actions,
                 const MapfInstance& instance);

// Symmetric visibility graph: edge iff two agents lie within each other's
// L x L field of view.
struct ObservationGraph {
  int agent_count = 0;
  int timestep = 0;
  std::vector<bool> adj;  // row-major agent_count x agent_count

  bool edge(int i, int j) const { return adj[i * agent_count + j]; }
};

ObservationGraph observation_graph(const JointState& state, int fov_size);

// Agent i plus its nearest K-1 visible neighbors, ordered by ascending
// Manhattan distance, ties broken by agent index. Result length <= K.
std::vector<int> subgroup(const ObservationGraph& graph, int agent,
                          const std::vector<Coord>& positions, int K);

// Stacked per-member feature maps over agent i's window. Each slot tensor
// has shape {3, L, L}: channel 0 obstacles (out-of-map reads 1), channel 1
// agent positions, channel 2 the member's normalized goal-distance field
// (unreachable and out-of-map cells read 1). Slots beyond the subgroup are
// zero with valid false.
struct Observation {
  int fov_size = 0;
  std::vector<ad::Tensor> feature_maps;  // K tensors {3, L, L}
  std::vector<int> member_ids;           // K entries, -1 for padded slots
  std::vector<bool> valid;               // K entries, slot 0 always true

  int slot_count() const { return static_cast<int>(feature_maps.size()); }
};

Observation observe(const JointState& state, int agent, const GridMap& map,
                    const HeuristicMapSet& heuristics,
                    const ObservationGraph& graph, int K, int fov_size);

}  // namespace pomapf
