#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "formnav/vec2.hpp"

namespace formnav {

// physical footprint of one robot (disc radius, meters)
inline constexpr double kRobotRadius = 0.15;

// obstacle distances are capped here before entering observations
inline constexpr double kObstacleDistanceCap = 10.0;

struct Segment2 {
  Vec2 a;
  Vec2 b;
};

enum class FormationKind { kCircle, kWedge, kLine };

const char* to_string(FormationKind kind);
FormationKind formation_kind_from_string(const std::string& s);

// static 2-d workspace: wall segments plus the corridor metadata the
// metrics need (axis, widths, where the narrow section lives).
struct Scenario {
  std::vector<Segment2> walls;
  Vec2 axis{1.0, 0.0};             // unit vector, corridor direction
  std::vector<Vec2> starts;        // one per robot
  std::vector<Vec2> goals;         // one per robot
  Vec2 start_centroid;
  Vec2 goal_centroid;
  double width_wide = 0.0;
  double width_narrow = 0.0;
  std::array<double, 2> narrow_span{0.0, 0.0};  // stations along axis
  double robot_radius = kRobotRadius;
  int n_robots = 0;
  FormationKind formation = FormationKind::kCircle;
  double formation_scale = 1.0;
  int max_steps = 0;
};

struct CorridorParams {
  int n_robots = 5;
  FormationKind kind = FormationKind::kCircle;
  double scale = 1.0;
  double wide = 6.0;
  double narrow = 2.0;
  double length = 20.0;
  double taper = 4.0;
  double robot_radius = kRobotRadius;
  int max_steps = 300;
};

// straight corridor along +x: wide entry, linear taper down to the narrow
// section, taper back out to an open exit. walls are mirror images across
// the axis. throws std::invalid_argument on infeasible geometry.
Scenario build_corridor(const CorridorParams& params);

double point_segment_distance(Vec2 p, const Segment2& seg);

Vec2 closest_point_on_segment(Vec2 p, const Segment2& seg);

// distance to the closest wall, capped at kObstacleDistanceCap
double nearest_obstacle_distance(Vec2 p, const Scenario& scenario);

struct CollisionReport {
  std::vector<std::uint8_t> robot;  // per robot: hit a wall or another robot
  bool any = false;
};

// wall hit: distance below robot_radius. pair hit: centers closer than
// 2*robot_radius; both robots are flagged.
CollisionReport check_collisions(std::span<const Vec2> positions, const Scenario& scenario);

// same, but robots with active[i] == false neither collide nor block others
CollisionReport check_collisions(std::span<const Vec2> positions,
                                 std::span<const std::uint8_t> active,
                                 const Scenario& scenario);

// corridor width at station s along the axis: lateral gap between the wall
// polylines there. regions with walls on fewer than two sides report the
// wide width.
double local_width_at(const Scenario& scenario, double s);

// recovers the generator parameters of a corridor-shaped scenario, or
// nullopt when the geometry was not produced by build_corridor
std::optional<CorridorParams> corridor_params_from(const Scenario& scenario);

}  // namespace formnav
