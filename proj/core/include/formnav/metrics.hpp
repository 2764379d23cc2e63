#pragma once

#include <map>
#include <span>
#include <vector>

#include "formnav/team.hpp"
#include "formnav/trajectory.hpp"
#include "formnav/vec2.hpp"
#include "formnav/world.hpp"

namespace formnav {

inline constexpr double kCfiBeta = 0.5;
inline constexpr std::array<double, 4> kCfiDeltas{0.5, 0.3, 0.1, 0.03};

struct CfiConfig {
  double tau = 0.0;          // safety threshold (m)
  double delta = 0.5;        // rigidness
  double beta = kCfiBeta;    // gap-usage vs shape-integrity blend
  double robot_width = 2.0 * kRobotRadius;
};

struct EpisodeMetrics {
  double sr = 0.0;                        // percent, 0..100
  std::map<double, double> cfi_by_delta;  // delta -> mean cfi in [0,1]
  double oscillation = 0.0;               // mean |dq|/dt
  int steps = 0;
  bool cfi_used_full_episode = false;     // narrow span never crossed
};

// percent of robots that ended within goal_tol; any collision zeroes the
// whole episode
double success_rate(std::span<const Vec2> final_positions, std::span<const Vec2> goals,
                    double goal_tol, bool any_collision);

// lateral extent of the team perpendicular to the travel axis, plus one
// robot footprint
double formation_width(std::span<const Vec2> positions, Vec2 axis, double robot_width);

// clamped mean relative pairwise-distance error, 1 = exact shape
double shape_integrity(std::span<const Vec2> positions, const DistanceMatrix& desired);

// gap-usage term blended with shape integrity; always in [0,1]
double cfi(double width, const CfiConfig& cfg, double epsilon);

// per-delta mean of per-step cfi over the narrow-span crossing, with
// tau taken from the local corridor width at the team centroid
std::map<double, double> episode_cfi(const Trajectory& traj, const Scenario& scenario,
                                     const FormationSpec& formation,
                                     std::span<const CfiConfig> configs,
                                     bool* used_full_episode = nullptr);

double oscillation_index(const Trajectory& traj, double dt);

// the standard delta sweep with per-step tau filled by episode_cfi
std::vector<CfiConfig> default_cfi_configs(double robot_width = 2.0 * kRobotRadius);

EpisodeMetrics episode_metrics(const Trajectory& traj, const Scenario& scenario,
                               const FormationSpec& formation, double goal_tol);

}  // namespace formnav
