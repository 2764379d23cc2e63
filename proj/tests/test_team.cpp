#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "formnav/rng.hpp"
#include "formnav/team.hpp"

using namespace formnav;

namespace {
bool close(Vec2 a, Vec2 b, double tol = 1e-12) { return norm(a - b) <= tol; }
}  // namespace

TEST_CASE("line template") {
  const auto o = formation_offsets(FormationKind::kLine, 3, 1.0);
  REQUIRE(o.size() == 3);
  CHECK(close(o[0], {0, -1}));
  CHECK(close(o[1], {0, 0}));
  CHECK(close(o[2], {0, 1}));
}

TEST_CASE("circle template") {
  const auto o = formation_offsets(FormationKind::kCircle, 4, 1.0);
  REQUIRE(o.size() == 4);
  CHECK(close(o[0], {1, 0}, 1e-15));
  CHECK(close(o[1], {0, 1}, 1e-15));
  CHECK(close(o[2], {-1, 0}, 1e-15));
  CHECK(close(o[3], {0, -1}, 1e-15));
}

TEST_CASE("wedge template is the re-centered apex-and-ranks pattern") {
  const auto o = formation_offsets(FormationKind::kWedge, 5, 1.0);
  const Vec2 c{-1.2, 0.0};  // centroid of the pre-centering pattern
  const std::vector<Vec2> pre{{0, 0}, {-1, 1}, {-1, -1}, {-2, 2}, {-2, -2}};
  REQUIRE(o.size() == 5);
  for (size_t i = 0; i < 5; ++i) CHECK(close(o[i], pre[i] - c));
}

TEST_CASE("templates are zero-centroid and reject bad input") {
  Rng rng(3);
  for (FormationKind kind :
       {FormationKind::kCircle, FormationKind::kWedge, FormationKind::kLine}) {
    for (int n : {3, 5, 7, 9}) {
      const double scale = rng.uniform(0.3, 2.0);
      const auto o = formation_offsets(kind, n, scale);
      Vec2 c{};
      for (Vec2 p : o) c += p;
      CHECK(norm(c / n) < 1e-12);
    }
  }
  CHECK_THROWS_AS(formation_offsets(FormationKind::kLine, 1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(formation_offsets(FormationKind::kCircle, 3, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(formation_offsets(FormationKind::kWedge, 4, 1.0), std::invalid_argument);
}

TEST_CASE("desired distances") {
  const auto line = desired_distances(formation_offsets(FormationKind::kLine, 3, 1.0));
  CHECK(line.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(line.at(1, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(line.at(0, 2) == doctest::Approx(2.0).epsilon(1e-12));
  for (int i = 0; i < 3; ++i) CHECK(line.at(i, i) == 0.0);

  const auto wedge = desired_distances(formation_offsets(FormationKind::kWedge, 5, 1.0));
  CHECK(wedge.at(0, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) CHECK(wedge.at(i, j) == wedge.at(j, i));
}

TEST_CASE("formation spec validates separation") {
  CHECK_NOTHROW(FormationSpec::make(FormationKind::kCircle, 5, 1.0, 0.15));
  // scale so small that neighbors would overlap
  CHECK_THROWS_AS(FormationSpec::make(FormationKind::kLine, 3, 0.25, 0.15),
                  std::invalid_argument);
}

TEST_CASE("radius graph basics") {
  const std::vector<Vec2> pos{{0, 0}, {1, 0}, {3, 0}};
  const TeamGraph g = build_radius_graph(pos, 1.5);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0] == std::pair<int, int>{0, 1});
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK_FALSE(g.has_edge(1, 2));

  // inclusive boundary
  const TeamGraph b = build_radius_graph(std::vector<Vec2>{{0, 0}, {1.5, 0}}, 1.5);
  CHECK(b.edges.size() == 1);

  const auto far = formation_offsets(FormationKind::kCircle, 6, 1.0);
  CHECK(build_radius_graph(far, 10.0).edges.size() == 15);  // complete graph
  CHECK(build_radius_graph(far, 1e-3).edges.empty());
}

TEST_CASE("radius graph matches brute force on random inputs") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + rng.uniform_int(8);
    std::vector<Vec2> pos(n);
    for (Vec2& p : pos) p = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const double radius = rng.uniform(0.1, 4.0);
    const TeamGraph g = build_radius_graph(pos, radius);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        CHECK(g.has_edge(i, j) == (norm(pos[i] - pos[j]) <= radius));
  }
}

TEST_CASE("adaptation reward worked cases") {
  // n=2 spring only
  DistanceMatrix d2(2);
  d2.at(0, 1) = d2.at(1, 0) = 2.0;
  const std::vector<Vec2> v0{{0, 0}, {0, 0}};
  CHECK(adaptation_reward(std::vector<Vec2>{{0, 0}, {1.5, 0}}, v0, d2, 1.0) ==
        doctest::Approx(-0.5).epsilon(1e-12));
  // n=2 damper only: distance exact, velocities differ by (1,0)
  CHECK(adaptation_reward(std::vector<Vec2>{{0, 0}, {2, 0}},
                          std::vector<Vec2>{{1, 0}, {0, 0}}, d2, 0.5) ==
        doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("adaptation reward is exactly zero in perfect formation") {
  const auto offsets = formation_offsets(FormationKind::kWedge, 5, 1.3);
  const auto desired = desired_distances(offsets);
  // positions = the template itself, so each pairwise distance is computed
  // from the same difference vectors used to build `desired`
  std::vector<Vec2> pos(offsets.begin(), offsets.end());
  const std::vector<Vec2> vel(pos.size(), Vec2{0.4, -0.2});
  CHECK(adaptation_reward(pos, vel, desired, 0.5) == 0.0);
}

TEST_CASE("adaptation reward properties") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + rng.uniform_int(6);
    std::vector<Vec2> pos(n), vel(n);
    for (int i = 0; i < n; ++i) {
      pos[i] = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
      vel[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    }
    DistanceMatrix desired(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) desired.at(i, j) = 1.0 + 0.1 * (i + j);
    const double alpha = rng.uniform();
    const double r = adaptation_reward(pos, vel, desired, alpha);
    CHECK(r <= 0.0);

    // brute-force pairwise oracle
    double oracle = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        oracle += -alpha * std::abs(desired.at(i, j) - norm(pos[i] - pos[j])) -
                  (1.0 - alpha) * norm(vel[i] - vel[j]);
    CHECK(r == doctest::Approx(oracle).epsilon(1e-12));

    // translation / common-velocity invariance
    const Vec2 dp{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const Vec2 dv{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    std::vector<Vec2> pos2 = pos, vel2 = vel;
    for (Vec2& p : pos2) p += dp;
    for (Vec2& v : vel2) v += dv;
    CHECK(adaptation_reward(pos2, vel2, desired, alpha) == doctest::Approx(r).epsilon(1e-9));

    // relabeling invariance
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    std::vector<Vec2> pos3(n), vel3(n);
    DistanceMatrix desired3(n);
    for (int i = 0; i < n; ++i) {
      pos3[i] = pos[perm[i]];
      vel3[i] = vel[perm[i]];
      for (int j = 0; j < n; ++j) desired3.at(i, j) = desired.at(perm[i], perm[j]);
    }
    CHECK(adaptation_reward(pos3, vel3, desired3, alpha) ==
          doctest::Approx(r).epsilon(1e-12));
  }
  CHECK_THROWS_AS(adaptation_reward(std::vector<Vec2>{{0, 0}, {1, 0}},
                                    std::vector<Vec2>{{0, 0}, {0, 0}},
                                    DistanceMatrix(2), 1.1),
                  std::invalid_argument);
}
