#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include <nrsw/kernels.hpp>
#include <nrsw/lattice.hpp>
#include <nrsw/sampler.hpp>

using namespace nrsw;

namespace {

// Field with explicit values on a spacing = eps/2 grid anchored at (x0, y0).
FieldSample make_field(double eps, double x0, double y0, int nx, int ny,
                       double fill = -1.0) {
  FieldSample f;
  f.grid = make_grid(0.5 * eps, x0, y0, nx, ny);
  f.values.assign(std::size_t(nx) * ny, fill);
  return f;
}

Coloring coloring_from_black_list(const FccLattice& lat,
                                  const std::vector<HalfPoint>& black) {
  std::vector<std::uint8_t> bits(std::size_t(lat.nx()) * lat.ny(), 0);
  for (const HalfPoint v : black)
    bits[std::size_t(v.i - lat.x0) * lat.ny() + std::size_t(v.j - lat.y0)] =
        1;
  return Coloring(lat, 0.0, std::move(bits));
}

}  // namespace

TEST_CASE("half-unit conversions", "[lattice]") {
  CHECK(detail::to_half_units(1.0, 0.5, "t") == 4);
  CHECK(detail::to_half_units(-0.75, 0.5, "t") == -3);
  CHECK_THROWS_AS(detail::to_half_units(0.3, 0.5, "t"), InvalidRegionError);
  CHECK(detail::to_eps_units_half(1.0, 0.5, "t") == 4);
  CHECK_THROWS_AS(detail::to_eps_units_half(0.75, 0.5, "t"),
                  InvalidRegionError);
}

TEST_CASE("vertex parity predicates", "[lattice]") {
  CHECK(is_vertex({0, 0}));
  CHECK(is_vertex({1, 1}));
  CHECK_FALSE(is_vertex({1, 0}));
  CHECK(is_integer_vertex({2, 4}));
  CHECK_FALSE(is_integer_vertex({1, 1}));
  CHECK(is_face_center({3, 5}));
}

TEST_CASE("lattice construction and window", "[lattice]") {
  const FccLattice lat = make_lattice(0.5, 0, 0, 3, 2);
  CHECK(lat.x0 == 0);
  CHECK(lat.x1 == 12);
  CHECK(lat.y1 == 8);
  CHECK(lat.nx() == 13);
  CHECK(lat.ny() == 9);
  CHECK(lat.coord_x({4, 0}) == Catch::Approx(1.0));
  CHECK_THROWS_AS(make_lattice(0.5, 0, 0, 0.3, 1), InvalidRegionError);
  CHECK_THROWS_AS(make_lattice(0.5, 1, 0, 0, 1), InvalidRegionError);
  CHECK_THROWS_AS(make_lattice(0.0, 0, 0, 1, 1), InvalidRegionError);
}

TEST_CASE("lattice_of requires spacing eps/2", "[lattice]") {
  const FieldSample f = make_field(0.5, 0, 0, 5, 5);
  const FccLattice lat = lattice_of(f, 0.5);
  CHECK(lat.x0 == 0);
  CHECK(lat.x1 == 4);
  CHECK_THROWS_AS(lattice_of(f, 0.25), SpecMismatchError);
}

TEST_CASE("neighbor sets and anticlockwise order", "[lattice]") {
  const FccLattice lat = make_lattice(0.5, 0, 0, 4, 4);

  const auto integer_nbrs = neighbors(lat, {4, 4});
  REQUIRE(integer_nbrs.size() == 8);
  const std::vector<HalfPoint> expected = {{6, 4}, {5, 5}, {4, 6}, {3, 5},
                                           {2, 4}, {3, 3}, {4, 2}, {5, 3}};
  for (std::size_t k = 0; k < 8; ++k) CHECK(integer_nbrs[k] == expected[k]);

  const auto center_nbrs = neighbors(lat, {5, 5});
  REQUIRE(center_nbrs.size() == 4);
  const std::vector<HalfPoint> expected_c = {{6, 6}, {4, 6}, {4, 4}, {6, 4}};
  for (std::size_t k = 0; k < 4; ++k) CHECK(center_nbrs[k] == expected_c[k]);

  // Window clipping at a corner leaves the three inward neighbors.
  const auto corner = neighbors(lat, {0, 0});
  REQUIRE(corner.size() == 3);
  CHECK(corner[0] == HalfPoint{2, 0});
  CHECK(corner[1] == HalfPoint{1, 1});
  CHECK(corner[2] == HalfPoint{0, 2});
}

TEST_CASE("region construction rules", "[lattice]") {
  CHECK_THROWS_AS(EpsRegion::rectangle(0.5, 1, 0, 0, 1), InvalidRegionError);
  CHECK_THROWS_AS(EpsRegion::rectangle(0.5, 0, 0.75, 0, 1),
                  InvalidRegionError);
  CHECK_THROWS_AS(EpsRegion::annulus(0.5, 0, 0, 1, 0), InvalidRegionError);
  CHECK_THROWS_AS(EpsRegion::annulus(0.5, 0, 0, 0.5, 1), InvalidRegionError);

  const EpsRegion rect = EpsRegion::rectangle(0.5, 0, 2, 0, 1);
  CHECK(rect.kind() == EpsRegion::Kind::Rectangle);
  CHECK(rect.x1() == 8);
  CHECK(rect.contains({8, 4}));
  CHECK_FALSE(rect.contains({9, 4}));
  CHECK(rect.on_boundary({8, 2}));
  CHECK_FALSE(rect.on_boundary({6, 2}));

  const EpsRegion ann = EpsRegion::annulus(0.5, 0, 0, 2, 1);
  CHECK(ann.kind() == EpsRegion::Kind::Annulus);
  CHECK(ann.inner() == 4);
  CHECK(ann.outer() == 8);
  CHECK(ann.contains({4, 0}));
  CHECK(ann.contains({8, 8}));
  CHECK_FALSE(ann.contains({3, 0}));
  CHECK_FALSE(ann.contains({9, 0}));
  CHECK(ann.on_inner_boundary({4, -2}));
  CHECK(ann.on_outer_boundary({8, 0}));
}

TEST_CASE("vertices_in enumerates the unit square example", "[lattice]") {
  const FccLattice lat = make_lattice(1.0, 0, 0, 1, 1);
  const EpsRegion rect = EpsRegion::rectangle(1.0, 0, 1, 0, 1);
  const auto verts = vertices_in(lat, rect);
  REQUIRE(verts.size() == 5);
  const std::vector<HalfPoint> expected = {
      {0, 0}, {0, 2}, {1, 1}, {2, 0}, {2, 2}};
  for (std::size_t k = 0; k < 5; ++k) CHECK(verts[k] == expected[k]);

  const EpsRegion big = EpsRegion::rectangle(1.0, 0, 2, 0, 2);
  CHECK_THROWS_AS(vertices_in(lat, big), InvalidRegionError);
}

TEST_CASE("coloring bitmap must match the window", "[lattice]") {
  const FccLattice lat = make_lattice(0.5, 0, 0, 1, 1);
  CHECK_THROWS_AS(Coloring(lat, 0.0, std::vector<std::uint8_t>(7, 0)),
                  SpecMismatchError);
  CHECK_NOTHROW(Coloring(lat, 0.0, std::vector<std::uint8_t>(25, 0)));
}

TEST_CASE("color rule is the weak inequality f >= -p", "[lattice]") {
  FieldSample f = make_field(0.5, 0, 0, 3, 3);
  const double p = 0.3;
  // row-major ix*3+iy; vertices sit at even ix+iy
  f.values = {-p, 0.0, -p - 1e-9, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0};
  const Coloring col = color_field(f, 0.5, p);
  CHECK(col.level() == p);
  CHECK(col.black({0, 0}));        // f == -p: ties are black
  CHECK_FALSE(col.black({0, 2}));  // just below the level
  CHECK(col.black({1, 1}));
  CHECK(col.black({2, 0}));
  CHECK_FALSE(col.black({2, 2}));
  // explicit rule audit over every vertex
  const FccLattice lat = col.lattice();
  for (long long i = lat.x0; i <= lat.x1; ++i)
    for (long long j = lat.y0; j <= lat.y1; ++j)
      if (is_vertex({i, j}))
        CHECK(col.black({i, j}) ==
              (f.values[std::size_t(i) * 3 + std::size_t(j)] >= -p));
}

TEST_CASE("coloring from explicit bitmap", "[lattice]") {
  const FccLattice lat = make_lattice(0.5, 0, 0, 1, 1);
  const Coloring col = coloring_from_black_list(lat, {{0, 0}, {1, 1}});
  CHECK(col.black({0, 0}));
  CHECK(col.black({1, 1}));
  CHECK_FALSE(col.black({2, 2}));
  CHECK(col.colored({0, 0}, true));
  CHECK(col.colored({2, 2}, false));
  CHECK(col.vertex_count() == 13);  // 9 integer + 4 centers on [0,4]^2 half
}

TEST_CASE("face enumeration emits four triangles per cell", "[lattice]") {
  const FccLattice one = make_lattice(0.5, 0, 0, 0.5, 0.5);
  int faces = 0;
  for_each_face(one, [&](const TriFace& f) {
    ++faces;
    CHECK(is_face_center(f.center));
    CHECK(is_integer_vertex(f.a));
    CHECK(is_integer_vertex(f.b));
  });
  CHECK(faces == 4);

  const FccLattice two = make_lattice(0.5, 0, 0, 1.0, 0.5);
  faces = 0;
  for_each_face(two, [&](const TriFace&) { ++faces; });
  CHECK(faces == 8);

  // A window whose left edge is not cell-aligned holds no complete cell.
  const FccLattice off = make_lattice(0.5, 0.25, 0, 0.75, 0.5);
  faces = 0;
  for_each_face(off, [&](const TriFace&) { ++faces; });
  CHECK(faces == 0);
}
