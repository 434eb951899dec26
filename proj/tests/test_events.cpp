#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <deque>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>
#include <nrsw/events.hpp>
#include <nrsw/lattice.hpp>
#include <nrsw/rng.hpp>
#include <nrsw/sampler.hpp>

using namespace nrsw;

namespace {

Coloring coloring_from_bits(const FccLattice& lat,
                            std::vector<std::uint8_t> bits) {
  return Coloring(lat, 0.0, std::move(bits));
}

Coloring random_coloring(const FccLattice& lat, CounterRng& rng,
                         double p_black = 0.5) {
  std::vector<std::uint8_t> bits(std::size_t(lat.nx()) * lat.ny());
  for (auto& b : bits) b = rng.next_unit() < p_black ? 1 : 0;
  return Coloring(lat, 0.0, std::move(bits));
}

// Breadth-first-search oracle over the full neighbor sets; an independent
// route to the same connectivity the union-find events compute.
template <class SrcPred, class DstPred>
bool bfs_connected(const Coloring& col, const EpsRegion& region,
                   bool want_black, SrcPred is_src, DstPred is_dst) {
  const FccLattice& lat = col.lattice();
  std::set<HalfPoint> seen;
  std::deque<HalfPoint> queue;
  for (const HalfPoint v : vertices_in(lat, region)) {
    if (col.colored(v, want_black) && is_src(v)) {
      queue.push_back(v);
      seen.insert(v);
    }
  }
  while (!queue.empty()) {
    const HalfPoint v = queue.front();
    queue.pop_front();
    if (is_dst(v)) return true;
    for (const HalfPoint u : neighbors(lat, v)) {
      if (!region.contains(u) || !col.colored(u, want_black)) continue;
      if (seen.insert(u).second) queue.push_back(u);
    }
  }
  return false;
}

bool bfs_crossing(const Coloring& col, const EpsRegion& rect, Direction dir,
                  Side side) {
  const bool want_black = side == Side::Above;
  if (dir == Direction::LeftRight)
    return bfs_connected(
        col, rect, want_black,
        [&](HalfPoint v) { return v.i == rect.x0(); },
        [&](HalfPoint v) { return v.i == rect.x1(); });
  return bfs_connected(
      col, rect, want_black,
      [&](HalfPoint v) { return v.j == rect.y1(); },
      [&](HalfPoint v) { return v.j == rect.y0(); });
}

bool bfs_arm(const Coloring& col, const EpsRegion& ann, Side side) {
  return bfs_connected(
      col, ann, side == Side::Above,
      [&](HalfPoint v) { return ann.on_inner_boundary(v); },
      [&](HalfPoint v) { return ann.on_outer_boundary(v); });
}

FieldSample field_from_formula(double eps, double x0, double y0, int nx,
                               int ny, const auto& fn) {
  FieldSample f;
  f.grid = make_grid(0.5 * eps, x0, y0, nx, ny);
  f.values.resize(std::size_t(nx) * ny);
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy)
      f.at(ix, iy) = fn(f.grid.x(ix), f.grid.y(iy));
  return f;
}

}  // namespace

TEST_CASE("unit square crossing examples", "[events]") {
  const FccLattice lat = make_lattice(1.0, 0, 0, 1, 1);
  const EpsRegion rect = EpsRegion::rectangle(1.0, 0, 1, 0, 1);

  // black bottom edge: (0,0) and (1,0) cross left to right
  std::vector<std::uint8_t> bits(std::size_t(lat.nx()) * lat.ny(), 0);
  bits[std::size_t(0 * lat.ny() + 0)] = 1;
  bits[std::size_t(2 * lat.ny() + 0)] = 1;
  const Coloring bottom = coloring_from_bits(lat, bits);
  CHECK(crossing(bottom, rect, Direction::LeftRight, Side::Above));
  CHECK_FALSE(crossing(bottom, rect, Direction::TopBottom, Side::Above));
  CHECK(duality_holds(bottom, rect));

  // only the face center black: no black crossing, white crossings both ways
  std::vector<std::uint8_t> center(std::size_t(lat.nx()) * lat.ny(), 0);
  center[std::size_t(1 * lat.ny() + 1)] = 1;
  const Coloring mid = coloring_from_bits(lat, center);
  CHECK_FALSE(crossing(mid, rect, Direction::LeftRight, Side::Above));
  CHECK(crossing(mid, rect, Direction::TopBottom, Side::Below));
  CHECK(crossing(mid, rect, Direction::LeftRight, Side::Below));
  CHECK(duality_holds(mid, rect));

  CHECK_THROWS_AS(
      crossing(mid, EpsRegion::annulus(1.0, 0, 0, 1, 1),
               Direction::LeftRight, Side::Above),
      InvalidRegionError);
}

TEST_CASE("duality holds for every coloring of a small window", "[events]") {
  const FccLattice lat = make_lattice(0.5, 0, 0, 1, 1);
  const EpsRegion rect = EpsRegion::rectangle(0.5, 0, 1, 0, 1);
  std::vector<HalfPoint> verts;
  for (long long i = lat.x0; i <= lat.x1; ++i)
    for (long long j = lat.y0; j <= lat.y1; ++j)
      if (is_vertex({i, j})) verts.push_back({i, j});
  REQUIRE(verts.size() == 13);

  for (std::uint32_t mask = 0; mask < (1u << 13); ++mask) {
    std::vector<std::uint8_t> bits(std::size_t(lat.nx()) * lat.ny(), 0);
    for (std::size_t k = 0; k < verts.size(); ++k)
      if ((mask >> k) & 1u)
        bits[std::size_t(verts[k].i) * lat.ny() +
             std::size_t(verts[k].j)] = 1;
    const Coloring col = coloring_from_bits(lat, bits);
    if (!duality_holds(col, rect)) {
      INFO("mask " << mask);
      REQUIRE(duality_holds(col, rect));
    }
  }
}

TEST_CASE("crossing and arm agree with a BFS oracle", "[events]") {
  const FccLattice lat = make_lattice(0.5, 0, 0, 3, 2);
  const EpsRegion full = EpsRegion::rectangle(0.5, 0, 3, 0, 2);
  const EpsRegion sub = EpsRegion::rectangle(0.5, 0.5, 2.5, 0, 1.5);
  const EpsRegion ann = EpsRegion::annulus(0.5, 1.5, 1, 1, 0.5);
  CounterRng rng(77, 0, stream::vectors);
  for (int rep = 0; rep < 400; ++rep) {
    const Coloring col = random_coloring(lat, rng);
    for (const EpsRegion* rect : {&full, &sub}) {
      for (Direction dir : {Direction::LeftRight, Direction::TopBottom}) {
        for (Side side : {Side::Above, Side::Below}) {
          const bool uf = crossing(col, *rect, dir, side);
          const bool bfs = bfs_crossing(col, *rect, dir, side);
          if (uf != bfs) {
            INFO("rep " << rep);
            REQUIRE(uf == bfs);
          }
        }
      }
    }
    for (Side side : {Side::Above, Side::Below}) {
      const bool uf = arm(col, ann, side);
      const bool bfs = bfs_arm(col, ann, side);
      if (uf != bfs) {
        INFO("rep " << rep);
        REQUIRE(uf == bfs);
      }
      CHECK(circuit(col, ann, side) ==
            !bfs_arm(col, ann, side == Side::Above ? Side::Below
                                                   : Side::Above));
    }
  }
}

TEST_CASE("origin-centered arm convenience overload", "[events]") {
  const FccLattice lat = make_lattice(0.5, -2, -2, 2, 2);
  CounterRng rng(5, 0, stream::vectors);
  for (int rep = 0; rep < 50; ++rep) {
    const Coloring col = random_coloring(lat, rng);
    const EpsRegion ann = EpsRegion::annulus(0.5, 0, 0, 2, 1);
    CHECK(arm(col, 1.0, 2.0, Side::Above) == arm(col, ann, Side::Above));
  }
  CHECK_THROWS_AS(arm(random_coloring(lat, rng),
                      EpsRegion::rectangle(0.5, 0, 1, 0, 1), Side::Above),
                  InvalidRegionError);
}

TEST_CASE("black crossings are monotone under black flips", "[events]") {
  const FccLattice lat = make_lattice(0.5, 0, 0, 2, 2);
  const EpsRegion rect = EpsRegion::rectangle(0.5, 0, 2, 0, 2);
  CounterRng rng(13, 0, stream::vectors);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::uint8_t> bits(std::size_t(lat.nx()) * lat.ny());
    for (auto& b : bits) b = rng.next_unit() < 0.5 ? 1 : 0;
    const Coloring before = coloring_from_bits(lat, bits);
    const bool lr = crossing(before, rect, Direction::LeftRight, Side::Above);
    const bool tb = crossing(before, rect, Direction::TopBottom, Side::Above);

    std::vector<std::uint8_t> flipped = bits;
    const std::size_t pick =
        std::size_t(rng.next() % flipped.size());
    flipped[pick] = 1;
    const Coloring after = coloring_from_bits(lat, flipped);
    if (lr) CHECK(crossing(after, rect, Direction::LeftRight, Side::Above));
    if (tb) CHECK(crossing(after, rect, Direction::TopBottom, Side::Above));
  }
}

TEST_CASE("tassion events nest as their segments nest", "[events]") {
  const FccLattice lat = make_lattice(0.5, -1.5, -1.5, 1.5, 1.5);
  const double s = 3.0;
  CounterRng rng(21, 0, stream::vectors);
  const double alphas[] = {0.0, 0.5, 1.0, 1.5};
  for (int rep = 0; rep < 300; ++rep) {
    const Coloring col = random_coloring(lat, rng);
    for (std::size_t a = 0; a + 1 < 4; ++a) {
      // wider target segment: [0, a] grows with a
      if (tassion_H(col, s, 0.0, alphas[a]))
        CHECK(tassion_H(col, s, 0.0, alphas[a + 1]));
      // [alpha, s/2] shrinks as alpha grows
      if (tassion_H(col, s, alphas[a + 1], 0.5 * s))
        CHECK(tassion_H(col, s, alphas[a], 0.5 * s));
      if (tassion_X(col, s, alphas[a + 1]))
        CHECK(tassion_X(col, s, alphas[a]));
    }
    for (double alpha : alphas)
      if (tassion_X(col, s, alpha)) CHECK(tassion_H(col, s, alpha, 0.5 * s));
    const EpsRegion square = EpsRegion::rectangle(0.5, -1.5, 1.5, -1.5, 1.5);
    if (tassion_H(col, s, 0.0, 0.5 * s))
      CHECK(crossing(col, square, Direction::LeftRight, Side::Above));
  }
  const Coloring col = random_coloring(lat, rng);
  CHECK_THROWS_AS(tassion_H(col, s, 1.0, 0.5), InvalidRegionError);
  CHECK_THROWS_AS(tassion_H(col, s, 0.0, 2.0), InvalidRegionError);
  CHECK_THROWS_AS(tassion_X(col, s, 2.0), InvalidRegionError);
}

TEST_CASE("nodal curves of one circle", "[events]") {
  const auto circle = [](double x, double y) {
    return 1.0 - x * x - y * y;
  };
  const FieldSample f =
      field_from_formula(0.2, -3.6, -2.0, 73, 41, circle);
  const NodalCurveSet curves = trace_nodal(f, 0.2, 0.0);
  REQUIRE(curves.components.size() == 1);
  CHECK(curves.components[0].closed);
  CHECK(curves.segments.size() == curves.components[0].segments.size());

  const EpsRegion rect = EpsRegion::rectangle(0.2, -3, 3, -1.6, 1.6);
  CHECK(count_components(curves, rect) == 1);

  // every curve point hugs the unit circle within one mesh step
  for (const QuarterPoint q : curves.components[0].points) {
    const double x = 0.25 * 0.2 * double(q.i);
    const double y = 0.25 * 0.2 * double(q.j);
    CHECK(std::abs(std::hypot(x, y) - 1.0) < 0.2);
  }

  CHECK_THROWS_AS(
      count_components(curves, EpsRegion::rectangle(0.2, -3.4, 3, -1.6, 1.6)),
      InvalidRegionError);
  CHECK_THROWS_AS(
      count_components(curves, EpsRegion::rectangle(0.25, -3, 3, -1.5, 1.5)),
      SpecMismatchError);
}

TEST_CASE("nodal curves of two disjoint circles", "[events]") {
  const auto two = [](double x, double y) {
    const double a = 1.0 - (x + 1.5) * (x + 1.5) - y * y;
    const double b = 1.0 - (x - 1.5) * (x - 1.5) - y * y;
    return a * b;
  };
  const EpsRegion rect = EpsRegion::rectangle(0.2, -3, 3, -1.6, 1.6);
  const FieldSample f = field_from_formula(0.2, -3.6, -2.0, 73, 41, two);
  const NodalCurveSet curves = trace_nodal(f, 0.2, 0.0);
  CHECK(curves.components.size() == 2);
  CHECK(count_components(curves, rect) == 2);

  // refining the mesh changes nothing for this smooth pair
  const FieldSample f2 = field_from_formula(0.1, -3.6, -2.0, 145, 81, two);
  const EpsRegion rect2 = EpsRegion::rectangle(0.1, -3, 3, -1.6, 1.6);
  CHECK(count_components(trace_nodal(f2, 0.1, 0.0), rect2) == 2);
}

TEST_CASE("window-exiting nodal chains stay open", "[events]") {
  const FieldSample f = field_from_formula(
      0.5, -1, -1, 9, 9, [](double x, double) { return x; });
  const NodalCurveSet curves = trace_nodal(f, 0.5, 0.0);
  REQUIRE(curves.components.size() == 1);
  const NodalComponent& comp = curves.components[0];
  CHECK_FALSE(comp.closed);
  CHECK(comp.segments.size() == curves.segments.size());
  // both endpoints on the top/bottom window boundary (quarter units)
  CHECK(std::abs(comp.points.front().j) == 8);
  CHECK(std::abs(comp.points.back().j) == 8);
  CHECK(comp.points.front().j == -comp.points.back().j);
}

TEST_CASE("component walks partition the segments", "[events]") {
  const FccLattice lat = make_lattice(0.5, 0, 0, 3, 3);
  CounterRng rng(31, 0, stream::vectors);
  for (int rep = 0; rep < 100; ++rep) {
    const Coloring col = random_coloring(lat, rng);
    const NodalCurveSet curves = trace_nodal(col);
    std::vector<int> covered(curves.segments.size(), 0);
    for (const NodalComponent& comp : curves.components) {
      CHECK(comp.points.size() ==
            comp.segments.size() + (comp.closed ? 0 : 1));
      for (std::size_t id : comp.segments) covered[id] += 1;
    }
    for (int c : covered) CHECK(c == 1);
  }
}

TEST_CASE("nodal json export round trips", "[events]") {
  const auto circle = [](double x, double y) {
    return 1.0 - x * x - y * y;
  };
  const FieldSample f =
      field_from_formula(0.2, -3.6, -2.0, 73, 41, circle);
  const NodalCurveSet curves = trace_nodal(f, 0.2, 0.0);
  const nlohmann::json j = nlohmann::json::parse(nodal_to_json(curves));
  CHECK(j["eps"].get<double>() == Catch::Approx(0.2));
  REQUIRE(j["components"].size() == curves.components.size());
  const auto& jc = j["components"][0];
  CHECK(jc["closed"].get<bool>() == curves.components[0].closed);
  REQUIRE(jc["points"].size() == curves.components[0].points.size());
  const QuarterPoint q0 = curves.components[0].points[0];
  CHECK(jc["points"][0][0].get<double>() ==
        Catch::Approx(0.25 * 0.2 * double(q0.i)).margin(1e-15));
  CHECK(jc["points"][0][1].get<double>() ==
        Catch::Approx(0.25 * 0.2 * double(q0.j)).margin(1e-15));
}

TEST_CASE("pivotal alternation patterns", "[events]") {
  const FccLattice lat = make_lattice(0.5, 0, 0, 4, 4);
  const EpsRegion region = EpsRegion::rectangle(0.5, 0, 4, 0, 4);
  const auto with_colors = [&](HalfPoint v,
                               const std::vector<HalfPoint>& offsets,
                               const std::vector<int>& colors) {
    std::vector<std::uint8_t> bits(std::size_t(lat.nx()) * lat.ny(), 0);
    for (std::size_t k = 0; k < offsets.size(); ++k)
      bits[std::size_t(v.i + offsets[k].i) * lat.ny() +
           std::size_t(v.j + offsets[k].j)] = std::uint8_t(colors[k]);
    return coloring_from_bits(lat, bits);
  };

  const std::vector<HalfPoint> ring(kIntegerOffsets.begin(),
                                    kIntegerOffsets.end());
  const HalfPoint vi{8, 8};
  CHECK(pivotal_pattern(with_colors(vi, ring, {1, 0, 1, 0, 1, 0, 1, 0}), vi,
                        region) == PivotalPattern::Alt4Interior);
  CHECK(pivotal_pattern(with_colors(vi, ring, {1, 1, 0, 0, 1, 1, 0, 0}), vi,
                        region) == PivotalPattern::Alt4Interior);
  CHECK(pivotal_pattern(with_colors(vi, ring, {1, 1, 1, 0, 0, 0, 0, 0}), vi,
                        region) == PivotalPattern::None);
  CHECK(pivotal_pattern(with_colors(vi, ring, {1, 1, 1, 1, 1, 1, 1, 1}), vi,
                        region) == PivotalPattern::None);

  const std::vector<HalfPoint> quad(kCenterOffsets.begin(),
                                    kCenterOffsets.end());
  const HalfPoint vc{7, 7};
  CHECK(pivotal_pattern(with_colors(vc, quad, {1, 0, 1, 0}), vc, region) ==
        PivotalPattern::Alt4Interior);
  CHECK(pivotal_pattern(with_colors(vc, quad, {1, 1, 0, 0}), vc, region) ==
        PivotalPattern::None);

  const std::vector<HalfPoint> arc = {{2, 0}, {1, 1}, {0, 2}, {-1, 1},
                                      {-2, 0}};
  const HalfPoint vb{8, 0};
  CHECK(pivotal_pattern(with_colors(vb, arc, {1, 0, 1, 1, 1}), vb, region) ==
        PivotalPattern::Alt3Boundary);
  CHECK(pivotal_pattern(with_colors(vb, arc, {1, 1, 1, 1, 1}), vb, region) ==
        PivotalPattern::None);
  CHECK(pivotal_pattern(with_colors(vb, arc, {0, 1, 1, 1, 1}), vb, region) ==
        PivotalPattern::None);

  const Coloring blank = with_colors(vi, {}, {});
  CHECK_THROWS_AS(pivotal_pattern(blank, {0, 0}, region),
                  UnsupportedVertexError);
  CHECK_THROWS_AS(pivotal_pattern(blank, {16, 16}, region),
                  UnsupportedVertexError);
  CHECK_THROWS_AS(pivotal_pattern(blank, {1, 0}, region), InvalidVertexError);
  CHECK_THROWS_AS(pivotal_pattern(blank, {18, 18}, region),
                  InvalidVertexError);
  CHECK_THROWS_AS(
      pivotal_pattern(blank, vi, EpsRegion::annulus(0.5, 1, 1, 1, 0.5)),
      InvalidRegionError);
  CHECK_THROWS_AS(
      pivotal_pattern(blank, vi, EpsRegion::rectangle(0.5, 0, 5, 0, 5)),
      InvalidRegionError);
}

TEST_CASE("declarative event specs dispatch to the primitives", "[events]") {
  const FccLattice lat = make_lattice(0.5, -1.5, -1.5, 1.5, 1.5);
  const EpsRegion square = EpsRegion::rectangle(0.5, -1.5, 1.5, -1.5, 1.5);
  const EpsRegion ann = EpsRegion::annulus(0.5, 0, 0, 1.5, 0.5);
  CounterRng rng(3, 0, stream::vectors);
  for (int rep = 0; rep < 100; ++rep) {
    const Coloring col = random_coloring(lat, rng);
    CHECK(evaluate_event(col, {square, EventKind::LeftRight, Side::Above}) ==
          crossing(col, square, Direction::LeftRight, Side::Above));
    CHECK(evaluate_event(col, {square, EventKind::TopBottom, Side::Below}) ==
          crossing(col, square, Direction::TopBottom, Side::Below));
    CHECK(evaluate_event(col, {ann, EventKind::Arm, Side::Above}) ==
          arm(col, ann, Side::Above));
    CHECK(evaluate_event(col, {ann, EventKind::Circuit, Side::Above}) ==
          circuit(col, ann, Side::Above));
    CHECK(evaluate_event(
              col, {square, EventKind::TassionH, Side::Above, 0.5, 1.5}) ==
          tassion_H(col, 3.0, 0.5, 1.5));
    CHECK(evaluate_event(
              col, {square, EventKind::TassionX, Side::Above, 1.0, 0.0}) ==
          tassion_X(col, 3.0, 1.0));
  }
  const Coloring col = random_coloring(lat, rng);
  const EpsRegion offcenter = EpsRegion::rectangle(0.5, -1, 1.5, -1.5, 1.5);
  CHECK_THROWS_AS(
      evaluate_event(col, {offcenter, EventKind::TassionH, Side::Above, 0, 1}),
      InvalidRegionError);
}
