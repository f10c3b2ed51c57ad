#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "pomapf/gridworld.hpp"
#include "pomapf/rng.hpp"

using namespace pomapf;

namespace {

MapfInstance open5(std::vector<Coord> starts, std::vector<Coord> goals) {
  return MapfInstance(GridMap::open(5, 5), std::move(starts), std::move(goals));
}

// Reference collision resolver, written queue-style and independently of the
// production fixed-point loop. Used to cross-check positions and flags.
struct RefOutcome {
  std::vector<Coord> next;
  std::vector<bool> collided;
};

RefOutcome reference_resolve(const std::vector<Coord>& prev,
                             const std::vector<Action>& actions,
                             const GridMap& map) {
  const int m = static_cast<int>(prev.size());
  std::vector<Coord> intended(m);
  std::vector<bool> moving(m), collided(m, false);
  for (int i = 0; i < m; ++i) {
    intended[i] = apply_action(prev[i], actions[i]);
    if (map.blocked(intended[i])) {
      intended[i] = prev[i];
      collided[i] = true;
    }
    moving[i] = intended[i] != prev[i];
  }
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Coord> final(m);
    for (int i = 0; i < m; ++i) final[i] = moving[i] ? intended[i] : prev[i];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        if (i == j) continue;
        const bool vertex = final[i] == final[j];
        const bool edge = final[i] == prev[j] && final[j] == prev[i] &&
                          prev[i] != prev[j];
        if (vertex || edge) {
          collided[i] = true;
          if (moving[i]) {
            moving[i] = false;
            changed = true;
          }
        }
      }
  }
  RefOutcome out;
  out.next.resize(m);
  for (int i = 0; i < m; ++i) out.next[i] = moving[i] ? intended[i] : prev[i];
  out.collided = collided;
  return out;
}

GridMap random_map(Rng& rng, int w, int h, double density) {
  std::vector<bool> cells(static_cast<size_t>(w) * h);
  for (size_t i = 0; i < cells.size(); ++i) cells[i] = rng.uniform() < density;
  return GridMap(w, h, std::move(cells));
}

// Random instance with enough free cells; starts and goals coincide so no
// reachability rejection is needed.
MapfInstance random_instance(Rng& rng, int w, int h, double density, int m) {
  for (;;) {
    GridMap map = random_map(rng, w, h, density);
    std::vector<Coord> frees;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (!map.obstacle({r, c})) frees.push_back({r, c});
    if (static_cast<int>(frees.size()) < m) continue;
    std::vector<Coord> picks;
    std::set<int> used;
    while (static_cast<int>(picks.size()) < m) {
      int k = static_cast<int>(rng.uniform_int(0, frees.size() - 1));
      if (used.insert(k).second) picks.push_back(frees[k]);
    }
    return MapfInstance(std::move(map), picks, picks);
  }
}

}  // namespace

TEST_CASE("move into a free non-goal cell costs the move reward") {
  auto inst = open5({{2, 2}}, {{0, 0}});
  JointState s{{{2, 2}}, 0};
  auto out = step(s, {Action::Right}, inst);
  CHECK(out.next_state.positions[0] == Coord{2, 3});
  CHECK(out.base_rewards[0] == doctest::Approx(-0.075));
  CHECK_FALSE(out.collided[0]);
  CHECK_FALSE(out.all_done);
}

TEST_CASE("waiting on the goal is free, waiting elsewhere is not") {
  auto inst = open5({{1, 1}, {3, 3}}, {{1, 1}, {0, 0}});
  JointState s{{{1, 1}, {3, 3}}, 4};
  auto out = step(s, {Action::Wait, Action::Wait}, inst);
  CHECK(out.base_rewards[0] == 0.0);
  CHECK(out.base_rewards[1] == doctest::Approx(-0.075));
  CHECK(out.next_state.positions[0] == Coord{1, 1});
  CHECK(out.next_state.positions[1] == Coord{3, 3});
}

TEST_CASE("swapping agents both revert and both collide") {
  auto inst = open5({{0, 0}, {0, 1}}, {{4, 4}, {4, 3}});
  JointState s{{{0, 0}, {0, 1}}, 0};
  auto out = step(s, {Action::Right, Action::Left}, inst);
  CHECK(out.next_state.positions[0] == Coord{0, 0});
  CHECK(out.next_state.positions[1] == Coord{0, 1});
  CHECK(out.base_rewards[0] == doctest::Approx(-0.5));
  CHECK(out.base_rewards[1] == doctest::Approx(-0.5));
  CHECK(out.collided[0]);
  CHECK(out.collided[1]);
}

TEST_CASE("arriving on the goal earns the goal reward and finishes") {
  auto inst = open5({{2, 1}}, {{2, 2}});
  JointState s{{{2, 1}}, 7};
  auto out = step(s, {Action::Right}, inst);
  CHECK(out.base_rewards[0] == doctest::Approx(3.0));
  CHECK(out.all_done);
  REQUIRE(out.arrival_times[0].has_value());
  CHECK(*out.arrival_times[0] == 8);
}

TEST_CASE("moving into an obstacle or off the map reverts and collides") {
  GridMap map(3, 1, {false, true, false});
  MapfInstance inst(map, {{0, 0}}, {{0, 0}});
  JointState s{{{0, 0}}, 0};
  auto hit = step(s, {Action::Right}, inst);
  CHECK(hit.next_state.positions[0] == Coord{0, 0});
  CHECK(hit.collided[0]);
  CHECK(hit.base_rewards[0] == doctest::Approx(-0.5));
  auto off = step(s, {Action::Left}, inst);
  CHECK(off.collided[0]);
}

TEST_CASE("a waiting agent hit by another is also flagged") {
  auto inst = open5({{1, 1}, {1, 2}}, {{1, 1}, {4, 4}});
  JointState s{{{1, 1}, {1, 2}}, 0};
  auto out = step(s, {Action::Wait, Action::Left}, inst);
  CHECK(out.next_state.positions[0] == Coord{1, 1});
  CHECK(out.next_state.positions[1] == Coord{1, 2});
  CHECK(out.collided[0]);
  CHECK(out.collided[1]);
  CHECK(out.base_rewards[0] == doctest::Approx(-0.5));
}

TEST_CASE("reversion cascades through follower chains") {
  // 0 swaps with 1; 2 follows into 1's vacated cell and must revert too.
  auto inst = open5({{0, 0}, {0, 1}, {0, 2}}, {{4, 4}, {4, 3}, {4, 2}});
  JointState s{{{0, 0}, {0, 1}, {0, 2}}, 0};
  auto out = step(s, {Action::Right, Action::Left, Action::Left}, inst);
  CHECK(out.next_state.positions[0] == Coord{0, 0});
  CHECK(out.next_state.positions[1] == Coord{0, 1});
  CHECK(out.next_state.positions[2] == Coord{0, 2});
  CHECK(out.collided[0]);
  CHECK(out.collided[1]);
  CHECK(out.collided[2]);
}

TEST_CASE("step rejects malformed inputs") {
  auto inst = open5({{0, 0}}, {{4, 4}});
  JointState s{{{0, 0}}, 0};
  CHECK_THROWS_AS(step(s, {Action::Wait, Action::Wait}, inst), ContractError);
  JointState bad{{{0, 0}, {1, 1}}, 0};
  CHECK_THROWS_AS(step(bad, {Action::Wait, Action::Wait}, inst), ContractError);
}

TEST_CASE("determinism and the wait fixed point") {
  Rng rng(11);
  auto inst = random_instance(rng, 8, 8, 0.2, 4);
  JointState s{inst.starts, 0};
  std::vector<Action> acts{Action::Up, Action::Left, Action::Wait, Action::Down};
  auto a = step(s, acts, inst);
  auto b = step(s, acts, inst);
  CHECK(a.next_state.positions == b.next_state.positions);
  CHECK(a.base_rewards == b.base_rewards);
  CHECK(a.collided == b.collided);

  std::vector<Action> waits(4, Action::Wait);
  auto w = step(s, waits, inst);
  CHECK(w.next_state.positions == s.positions);
  CHECK(std::none_of(w.collided.begin(), w.collided.end(), [](bool c) { return c; }));
}

TEST_CASE("10k random steps: conflict-free next states, reference-exact flags") {
  Rng rng(20240917);
  int steps_done = 0;
  while (steps_done < 10000) {
    const int m = static_cast<int>(rng.uniform_int(2, 6));
    auto inst = random_instance(rng, 10, 10, 0.25, m);
    JointState s{inst.starts, 0};
    for (int t = 0; t < 25 && steps_done < 10000; ++t, ++steps_done) {
      std::vector<Action> acts(m);
      for (int i = 0; i < m; ++i)
        acts[i] = static_cast<Action>(rng.uniform_int(0, 4));
      auto out = step(s, acts, inst);

      // Independent scanner: vertex conflicts in the next state.
      std::set<std::pair<int, int>> occupied;
      for (const Coord& p : out.next_state.positions) {
        auto [it, fresh] = occupied.insert({p.row, p.col});
        REQUIRE(fresh);
      }
      // Independent scanner: edge swaps between consecutive states.
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
          const bool swapped = out.next_state.positions[i] == s.positions[j] &&
                               out.next_state.positions[j] == s.positions[i] &&
                               s.positions[i] != s.positions[j];
          REQUIRE_FALSE(swapped);
        }

      auto ref = reference_resolve(s.positions, acts, inst.map);
      REQUIRE(ref.next == out.next_state.positions);
      REQUIRE(ref.collided == out.collided);

      for (double r : out.base_rewards)
        REQUIRE((r == -0.075 || r == 0.0 || r == -0.5 || r == 3.0));

      s = out.next_state;
    }
  }
}

TEST_CASE("relabeling agents permutes the outcome") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 4;
    auto inst = random_instance(rng, 7, 7, 0.2, m);
    JointState s{inst.starts, 3};
    std::vector<Action> acts(m);
    for (int i = 0; i < m; ++i) acts[i] = static_cast<Action>(rng.uniform_int(0, 4));
    auto out = step(s, acts, inst);

    std::vector<int> perm{2, 0, 3, 1};
    std::vector<Coord> pstarts(m), pgoals(m), ppos(m);
    std::vector<Action> pacts(m);
    for (int i = 0; i < m; ++i) {
      pstarts[i] = inst.starts[perm[i]];
      pgoals[i] = inst.goals[perm[i]];
      ppos[i] = s.positions[perm[i]];
      pacts[i] = acts[perm[i]];
    }
    MapfInstance pinst(inst.map, pstarts, pgoals);
    auto pout = step(JointState{ppos, 3}, pacts, pinst);
    for (int i = 0; i < m; ++i) {
      CHECK(pout.next_state.positions[i] == out.next_state.positions[perm[i]]);
      CHECK(pout.base_rewards[i] == out.base_rewards[perm[i]]);
      CHECK(pout.collided[i] == out.collided[perm[i]]);
    }
  }
}

TEST_CASE("observation graph edges follow the FOV box") {
  // L=5: visible iff both offsets are at most 2.
  JointState s{{{0, 0}, {0, 2}, {2, 2}, {3, 3}}, 0};
  auto g = observation_graph(s, 5);
  CHECK(g.edge(0, 1));
  CHECK(g.edge(0, 2));
  CHECK_FALSE(g.edge(0, 3));
  CHECK(g.edge(2, 3));
  for (int i = 0; i < 4; ++i) {
    CHECK_FALSE(g.edge(i, i));
    for (int j = 0; j < 4; ++j) CHECK(g.edge(i, j) == g.edge(j, i));
  }
}

TEST_CASE("single agent yields an edgeless graph; a tight cluster is complete") {
  JointState lone{{{4, 4}}, 0};
  auto g1 = observation_graph(lone, 9);
  CHECK(g1.agent_count == 1);
  CHECK_FALSE(g1.edge(0, 0));

  JointState triple{{{1, 1}, {1, 2}, {2, 1}}, 0};
  auto g3 = observation_graph(triple, 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(g3.edge(i, j));
}

TEST_CASE("even FOV is a configuration error") {
  JointState s{{{0, 0}}, 0};
  CHECK_THROWS_AS(observation_graph(s, 4), ConfigError);
  CHECK_THROWS_AS(observation_graph(s, 1), ConfigError);
}

TEST_CASE("subgroup orders by Manhattan distance with index tie-break") {
  JointState s{{{0, 0}, {1, 0}, {0, 2}, {2, 2}}, 0};
  auto g = observation_graph(s, 9);
  auto sg = subgroup(g, 0, s.positions, 3);
  CHECK(sg == std::vector<int>{0, 1, 2});

  // Two neighbors at equal distance: lower index first.
  JointState tie{{{5, 5}, {9, 9}, {9, 9}, {5, 6}, {6, 5}}, 0};
  // agents 3 and 4 both at distance 1; agents 1, 2 out of a 5x5 FOV
  auto gt = observation_graph(tie, 5);
  auto sgt = subgroup(gt, 0, tie.positions, 3);
  CHECK(sgt == std::vector<int>{0, 3, 4});

  auto only_two = subgroup(gt, 0, tie.positions, 2);
  CHECK(only_two == std::vector<int>{0, 3});

  JointState far{{{0, 0}, {9, 9}}, 0};
  auto gf = observation_graph(far, 5);
  CHECK(subgroup(gf, 0, far.positions, 3) == std::vector<int>{0});
}

TEST_CASE("observe fills slots, masks, and channels") {
  GridMap map = GridMap::open(10, 10);
  MapfInstance inst(map, {{5, 5}, {5, 6}, {7, 7}, {0, 0}},
                    {{1, 1}, {2, 2}, {3, 3}, {9, 9}});
  auto heur = compute_heuristic_maps(inst);
  JointState s{inst.starts, 0};
  auto g = observation_graph(s, 5);
  auto obs = observe(s, 0, inst.map, heur, g, 3, 5);

  CHECK(obs.slot_count() == 3);
  CHECK(obs.valid == std::vector<bool>{true, true, true});
  CHECK(obs.member_ids == std::vector<int>{0, 1, 2});

  // channel 1 marks all agents inside the window, self included
  CHECK(obs.feature_maps[0].at(1, 2, 2) == 1.0);
  CHECK(obs.feature_maps[0].at(1, 2, 3) == 1.0);
  CHECK(obs.feature_maps[0].at(1, 4, 4) == 1.0);

  // channels 0 and 1 identical across valid slots; channel 2 differs
  for (int k : {1, 2})
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) {
        CHECK(obs.feature_maps[k].at(0, r, c) == obs.feature_maps[0].at(0, r, c));
        CHECK(obs.feature_maps[k].at(1, r, c) == obs.feature_maps[0].at(1, r, c));
      }
  bool differs = false;
  for (int r = 0; r < 5 && !differs; ++r)
    for (int c = 0; c < 5 && !differs; ++c)
      differs = obs.feature_maps[0].at(2, r, c) != obs.feature_maps[1].at(2, r, c);
  CHECK(differs);

  // binary channels and a [0,1] heuristic channel
  for (int k = 0; k < 3; ++k)
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) {
        const double c0 = obs.feature_maps[k].at(0, r, c);
        const double c1 = obs.feature_maps[k].at(1, r, c);
        const double c2 = obs.feature_maps[k].at(2, r, c);
        CHECK((c0 == 0.0 || c0 == 1.0));
        CHECK((c1 == 0.0 || c1 == 1.0));
        CHECK(c2 >= 0.0);
        CHECK(c2 <= 1.0);
      }
}

TEST_CASE("lone agent pads the remaining slots with zeros") {
  GridMap map = GridMap::open(6, 6);
  MapfInstance inst(map, {{3, 3}}, {{0, 0}});
  auto heur = compute_heuristic_maps(inst);
  JointState s{inst.starts, 0};
  auto g = observation_graph(s, 5);
  auto obs = observe(s, 0, inst.map, heur, g, 3, 5);
  CHECK(obs.valid == std::vector<bool>{true, false, false});
  CHECK(obs.member_ids == std::vector<int>{0, -1, -1});
  for (int k : {1, 2})
    for (double v : obs.feature_maps[k].values()) CHECK(v == 0.0);
}

TEST_CASE("map corner fills the out-of-map quadrant with obstacle flags") {
  GridMap map = GridMap::open(8, 8);
  MapfInstance inst(map, {{0, 0}}, {{7, 7}});
  auto heur = compute_heuristic_maps(inst);
  JointState s{inst.starts, 0};
  auto g = observation_graph(s, 5);
  auto obs = observe(s, 0, inst.map, heur, g, 3, 5);
  // rows 0-1 and cols 0-1 of the window are off-map
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      const bool off = r < 2 || c < 2;
      CHECK(obs.feature_maps[0].at(0, r, c) == (off ? 1.0 : 0.0));
      if (off) CHECK(obs.feature_maps[0].at(2, r, c) == 1.0);
    }
  CHECK_THROWS_AS(observe(s, 5, inst.map, heur, g, 3, 5), ContractError);
}
