#pragma once

#include <cstdint>
#include <vector>

#include "pomapf/errors.hpp"

namespace pomapf {

struct Coord {
  int row = 0;
  int col = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

inline int manhattan(Coord a, Coord b) {
  return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

// Static obstacle grid. Row-major, true = obstacle. Immutable once built.
class GridMap {
 public:
  GridMap(int width, int height, std::vector<bool> cells)
      : width_(width), height_(height), cells_(std::move(cells)) {
    if (width_ < 1 || height_ < 1)
      throw ContractError("GridMap: width and height must be >= 1");
    if (static_cast<int>(cells_.size()) != width_ * height_)
      throw ContractError("GridMap: cell count must equal width * height");
  }

  static GridMap open(int width, int height) {
    return GridMap(width, height,
                   std::vector<bool>(static_cast<size_t>(width) * height, false));
  }

  int width() const { return width_; }
  int height() const { return height_; }

  bool in_bounds(Coord c) const {
    return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_;
  }
  bool obstacle(Coord c) const { return cells_[index(c)]; }
  // Out-of-map cells count as blocked.
  bool blocked(Coord c) const { return !in_bounds(c) || obstacle(c); }
  bool free(Coord c) const { return !blocked(c); }

  int index(Coord c) const { return c.row * width_ + c.col; }
  int cell_count() const { return width_ * height_; }

  const std::vector<bool>& cells() const { return cells_; }

 private:
  int width_;
  int height_;
  std::vector<bool> cells_;
};

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, Wait = 4 };
inline constexpr int kActionCount = 5;

inline Coord apply_action(Coord c, Action a) {
  switch (a) {
    case Action::Up: return {c.row - 1, c.col};
    case Action::Down: return {c.row + 1, c.col};
    case Action::Left: return {c.row, c.col - 1};
    case Action::Right: return {c.row, c.col + 1};
    case Action::Wait: return c;
  }
  throw ContractError("apply_action: invalid action value");
}

// One MAPF problem: a map plus per-agent start and goal vertices.
struct MapfInstance {
  GridMap map;
  std::vector<Coord> starts;
  std::vector<Coord> goals;

  MapfInstance(GridMap m, std::vector<Coord> s, std::vector<Coord> g);

  int agent_count() const { return static_cast<int>(starts.size()); }
};

// Positions of all agents at one timestep.
struct JointState {
  std::vector<Coord> positions;
  int timestep = 0;

  int agent_count() const { return static_cast<int>(positions.size()); }
};

// Validates distinctness, free cells and per-agent reachability.
// Throws ValidationError naming the offending agent.
void validate_instance(const MapfInstance& instance);

// True iff `to` is reachable from `from` over free cells (4-neighbor BFS).
bool reachable(const GridMap& map, Coord from, Coord to);

}  // namespace pomapf
