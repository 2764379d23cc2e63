#include "formnav/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace formnav {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double_field(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("trajectory csv: bad numeric field '" + std::string(s) + "'");
  return v;
}

int parse_int_field(std::string_view s) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("trajectory csv: bad integer field '" + std::string(s) + "'");
  return v;
}

}  // namespace

void Trajectory::append(double t, std::span<const RobotState> robots,
                        std::span<const double> rewards,
                        std::span<const std::uint8_t> done,
                        std::span<const std::uint8_t> collided) {
  TrajectoryStep step;
  step.t = t;
  step.robots.resize(robots.size());
  for (size_t i = 0; i < robots.size(); ++i) {
    TrajectorySample& s = step.robots[i];
    s.p = robots[i].p;
    s.q = robots[i].q;
    s.d = robots[i].d;
    s.reward = rewards.empty() ? 0.0 : rewards[i];
    s.done = !done.empty() && done[i] != 0;
    s.collision = !collided.empty() && collided[i] != 0;
  }
  steps.push_back(std::move(step));
}

std::vector<Vec2> Trajectory::positions_at(size_t step) const {
  std::vector<Vec2> out;
  out.reserve(steps[step].robots.size());
  for (const auto& r : steps[step].robots) out.push_back(r.p);
  return out;
}

std::vector<Vec2> Trajectory::velocities_at(size_t step) const {
  std::vector<Vec2> out;
  out.reserve(steps[step].robots.size());
  for (const auto& r : steps[step].robots) out.push_back(r.q);
  return out;
}

bool Trajectory::any_collision() const {
  for (const auto& step : steps)
    for (const auto& r : step.robots)
      if (r.collision) return true;
  return false;
}

std::string trajectory_csv_string(const Trajectory& traj) {
  std::string out = "t,robot,px,py,vx,vy,d_obs,reward,done,collision\n";
  for (const TrajectoryStep& step : traj.steps) {
    for (size_t i = 0; i < step.robots.size(); ++i) {
      const TrajectorySample& r = step.robots[i];
      out += format_double(step.t);
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += format_double(r.p.x);
      out += ',';
      out += format_double(r.p.y);
      out += ',';
      out += format_double(r.q.x);
      out += ',';
      out += format_double(r.q.y);
      out += ',';
      out += format_double(r.d);
      out += ',';
      out += format_double(r.reward);
      out += ',';
      out += r.done ? '1' : '0';
      out += ',';
      out += r.collision ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << trajectory_csv_string(traj);
  if (!f) throw std::runtime_error("write failed: " + path);
}

Trajectory parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "t,robot,px,py,vx,vy,d_obs,reward,done,collision")
    throw std::runtime_error("trajectory csv: missing or wrong header");

  Trajectory traj;
  int max_robot = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    size_t pos = 0;
    const std::string_view lv = line;
    while (true) {
      const size_t c = lv.find(',', pos);
      fields.push_back(lv.substr(pos, c == std::string_view::npos ? c : c - pos));
      if (c == std::string_view::npos) break;
      pos = c + 1;
    }
    if (fields.size() != 10) throw std::runtime_error("trajectory csv: wrong field count");

    const double t = parse_double_field(fields[0]);
    const int robot = parse_int_field(fields[1]);
    if (traj.steps.empty() || traj.steps.back().t != t || robot == 0) {
      if (robot != 0) throw std::runtime_error("trajectory csv: rows out of order");
      traj.steps.push_back({t, {}});
    }
    if (robot != static_cast<int>(traj.steps.back().robots.size()))
      throw std::runtime_error("trajectory csv: rows out of order");
    TrajectorySample s;
    s.p = {parse_double_field(fields[2]), parse_double_field(fields[3])};
    s.q = {parse_double_field(fields[4]), parse_double_field(fields[5])};
    s.d = parse_double_field(fields[6]);
    s.reward = parse_double_field(fields[7]);
    s.done = parse_int_field(fields[8]) != 0;
    s.collision = parse_int_field(fields[9]) != 0;
    traj.steps.back().robots.push_back(s);
    max_robot = std::max(max_robot, robot);
  }
  if (traj.steps.empty()) throw std::runtime_error("trajectory csv: no data rows");
  traj.n_robots = max_robot + 1;
  for (const TrajectoryStep& st : traj.steps)
    if (static_cast<int>(st.robots.size()) != traj.n_robots)
      throw std::runtime_error("trajectory csv: ragged steps");
  if (traj.steps.size() >= 2) traj.dt = traj.steps[1].t - traj.steps[0].t;
  return traj;
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_trajectory_csv(ss.str());
}

}  // namespace formnav
