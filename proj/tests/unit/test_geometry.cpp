#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "meshssm/error.hpp"
#include "meshssm/geometry/box_bump.hpp"
#include "meshssm/geometry/mesh.hpp"
#include "meshssm/geometry/neighbors.hpp"
#include "meshssm/geometry/sampling.hpp"
#include "meshssm/geometry/surface_distance.hpp"
#include "test_support.hpp"

using namespace meshssm;
using namespace meshssm::geometry;
namespace mt = meshssm::testing;

namespace {

Mesh one_triangle() {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  return m;
}

Mesh translated(Mesh m, const Point3& by) {
  for (auto& v : m.vertices)
    for (int q = 0; q < 3; ++q) v[q] += by[q];
  return m;
}

Mesh rotated_z(Mesh m, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  for (auto& v : m.vertices) v = {c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]};
  return m;
}

// Neighbor lists from a full distance table: k smallest, ties by lower index.
std::vector<std::uint32_t> knn_from_table(const std::vector<std::vector<double>>& dist, std::size_t k) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    std::vector<std::uint32_t> idx;
    for (std::uint32_t j = 0; j < dist.size(); ++j)
      if (j != i) idx.push_back(j);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return dist[i][a] < dist[i][b]; });
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

}  // namespace

TEST(MeshIO, MinimalTriangle) {
  std::istringstream in("# one face\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  const auto m = parse_mesh(in);
  EXPECT_EQ(m.vertex_count(), 3u);
  ASSERT_EQ(m.faces.size(), 1u);
  EXPECT_EQ(m.faces[0], (Triangle{0, 1, 2}));
}

TEST(MeshIO, SlashedFaceIndicesKeepVertexIndex) {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n");
  EXPECT_EQ(parse_mesh(in).faces[0], (Triangle{0, 1, 2}));
}

TEST(MeshIO, RoundTripIsExact) {
  nd::Rng rng(1);
  Mesh m = mt::jitter(mt::grid_mesh(4, 5), 0.3, 3);
  std::stringstream full;
  write_mesh(full, m, 17);
  const auto back = parse_mesh(full);
  EXPECT_EQ(back.vertices, m.vertices);
  EXPECT_EQ(back.faces, m.faces);
  // The default 9-digit writer is exact for values with short decimal forms.
  const Mesh grid = mt::grid_mesh(3, 3, 0.25);
  std::stringstream short_form;
  write_mesh(short_form, grid);
  EXPECT_EQ(parse_mesh(short_form).vertices, grid.vertices);
}

TEST(MeshIO, OutOfRangeFaceIsValidationError) {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
  EXPECT_THROW(parse_mesh(in), ValidationError);
}

TEST(MeshIO, DegenerateFaceIsValidationError) {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 2\n");
  EXPECT_THROW(parse_mesh(in), ValidationError);
}

TEST(MeshIO, ParseErrorNamesLine) {
  std::istringstream in("v 0 0 0\nv 1 0 zero\n");
  try {
    parse_mesh(in, "bad.obj");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.obj:2"), std::string::npos) << e.what();
  }
  std::istringstream quad("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n");
  EXPECT_THROW(parse_mesh(quad), ParseError);
}

TEST(MeshIO, MissingFileIsIoError) { EXPECT_THROW(load_mesh("/nonexistent/mesh.obj"), IoError); }

TEST(MeshIO, PointFilesRoundTripExactly) {
  nd::Rng rng(2);
  const auto p = mt::random_points(20, rng, 3.0);
  std::stringstream s;
  write_points(s, p);
  EXPECT_EQ(parse_points(s).points, p.points);
  std::istringstream empty("");
  EXPECT_THROW(parse_points(empty), ParseError);
}

TEST(MeshValidation, Connectivity) {
  EXPECT_TRUE(is_connected(mt::grid_mesh(3, 3)));
  Mesh two = one_triangle();
  Mesh other = translated(one_triangle(), {5, 0, 0});
  for (auto& f : other.faces)
    for (auto& i : f) i += 3;
  two.vertices.insert(two.vertices.end(), other.vertices.begin(), other.vertices.end());
  two.faces.insert(two.faces.end(), other.faces.begin(), other.faces.end());
  EXPECT_FALSE(is_connected(two));
  EXPECT_NO_THROW(validate(two));
}

TEST(CenterMesh, CentroidAtOrigin) {
  const Mesh m = mt::jitter(mt::grid_mesh(4, 4), 0.2, 1);
  const Mesh c = center_mesh(m);
  const auto g = centroid(c.vertices);
  for (double x : g) EXPECT_NEAR(x, 0.0, 1e-9);
  EXPECT_EQ(c.faces, m.faces);
  const Mesh back = center_mesh(translated(c, {5, 0, 0}));
  for (std::size_t i = 0; i < c.vertices.size(); ++i)
    for (int q = 0; q < 3; ++q) EXPECT_NEAR(back.vertices[i][q], c.vertices[i][q], 1e-12);
  const Mesh again = center_mesh(c);
  for (std::size_t i = 0; i < c.vertices.size(); ++i)
    for (int q = 0; q < 3; ++q) EXPECT_NEAR(again.vertices[i][q], c.vertices[i][q], 1e-15);
}

TEST(PadVertices, Contract) {
  const Mesh m = mt::jitter(mt::grid_mesh(3, 4), 0.1, 2);
  EXPECT_EQ(pad_vertices(m, m.vertex_count(), 1).vertices, m.vertices);
  const Mesh p = pad_vertices(m, 30, 7);
  ASSERT_EQ(p.vertex_count(), 30u);
  EXPECT_EQ(p.faces, m.faces);
  const std::set<Point3> original(m.vertices.begin(), m.vertices.end());
  for (std::size_t i = 0; i < 30; ++i) EXPECT_TRUE(original.count(p.vertices[i]));
  EXPECT_TRUE(std::equal(m.vertices.begin(), m.vertices.end(), p.vertices.begin()));
  EXPECT_EQ(pad_vertices(m, 30, 7).vertices, p.vertices);
  EXPECT_THROW(pad_vertices(m, 5, 1), ValidationError);
}

TEST(GeodesicKnn, PathOfEdges) {
  // v0–v1–v2 along x with far-away apices closing the triangles.
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0.5, 10, 0}, {1.5, 10, 0}};
  m.faces = {{0, 1, 3}, {1, 2, 4}};
  EXPECT_EQ(geodesic_knn(m, 1).row(0)[0], 1u);
  EXPECT_DOUBLE_EQ(geodesic_distances(m, 0)[2], 2.0);
  EXPECT_THROW(geodesic_knn(m, 5), ValidationError);
}

TEST(GeodesicKnn, MatchesAllPairsDijkstraOnGrid) {
  // Jitter keeps path lengths tie-free so the index order is unambiguous.
  const Mesh m = mt::jitter(mt::grid_mesh(10, 10), 0.2, 11);
  const auto oracle = mt::all_pairs_dijkstra(m);
  for (std::size_t k : {1, 4, 8}) EXPECT_EQ(geodesic_knn(m, k).indices, knn_from_table(oracle, k)) << "k=" << k;
  const Mesh regular = mt::grid_mesh(10, 10);
  const auto dist = mt::all_pairs_dijkstra(regular);
  for (std::size_t s : {0, 37, 99}) {
    const auto d = geodesic_distances(regular, s);
    for (std::size_t j = 0; j < 100; ++j) EXPECT_NEAR(d[j], dist[s][j], 1e-12);
  }
}

TEST(GeodesicKnn, DistanceProperties) {
  const Mesh m = mt::jitter(mt::grid_mesh(6, 6), 0.2, 5);
  std::vector<std::vector<double>> d;
  for (std::size_t s = 0; s < m.vertex_count(); ++s) d.push_back(geodesic_distances(m, s));
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j) {
      EXPECT_NEAR(d[i][j], d[j][i], 1e-12);
      EXPECT_GE(d[i][j], 0.0);
      EXPECT_EQ(d[i][j] == 0.0, i == j);
      EXPECT_GE(d[i][j], distance(m.vertices[i], m.vertices[j]) - 1e-12);
    }
}

TEST(GeodesicKnn, SmallComponentFallsBackToEuclidean) {
  Mesh m = one_triangle();
  Mesh far = translated(one_triangle(), {10, 0, 0});
  m.vertices.insert(m.vertices.end(), far.vertices.begin(), far.vertices.end());
  m.faces.push_back({3, 4, 5});
  const auto nn = geodesic_knn(m, 3);
  const auto row = nn.row(0);
  EXPECT_EQ(std::set<std::uint32_t>(row.begin(), row.begin() + 2), (std::set<std::uint32_t>{1, 2}));
  EXPECT_EQ(row[2], 3u);
}

TEST(GeodesicKnn, PaddedCopiesAreZeroDistanceNeighbors) {
  const Mesh m = pad_vertices(mt::jitter(mt::grid_mesh(4, 4), 0.1, 3), 18, 4);
  const auto nn = geodesic_knn(m, 1);
  for (std::size_t i = 16; i < 18; ++i) EXPECT_EQ(m.vertices[nn.row(i)[0]], m.vertices[i]);
}

TEST(Knn, CollinearPoints) {
  PointSet p{{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}}};
  EXPECT_EQ(knn(p, 1).indices, (std::vector<std::uint32_t>{1, 0, 1}));
}

TEST(Knn, DuplicatePointIsNearest) {
  PointSet p{{{0, 0, 0}, {5, 0, 0}, {2, 2, 2}, {5, 0, 0}}};
  const auto nn = knn(p, 1);
  EXPECT_EQ(nn.row(1)[0], 3u);
  EXPECT_EQ(nn.row(3)[0], 1u);
}

TEST(Knn, MatchesBruteForce) {
  nd::Rng rng(6);
  const auto p = mt::random_points(50, rng);
  std::vector<std::vector<double>> d(50, std::vector<double>(50));
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 50; ++j) d[i][j] = squared_distance(p.points[i], p.points[j]);
  const auto nn = knn(p, 5);
  EXPECT_EQ(nn.indices, knn_from_table(d, 5));
  EXPECT_EQ(nn.k, 5u);
  for (std::size_t i = 0; i < 50; ++i)
    for (auto j : nn.row(i)) EXPECT_NE(j, i);
}

TEST(Knn, FeatureRowsMatchBruteForce) {
  nd::Rng rng(7);
  const std::size_t n = 40, dim = 9;
  std::vector<double> rows(n * dim);
  for (auto& x : rows) x = rng.uniform();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t q = 0; q < dim; ++q) d[i][j] += std::pow(rows[i * dim + q] - rows[j * dim + q], 2);
  EXPECT_EQ(knn(rows, n, dim, 6).indices, knn_from_table(d, 6));
}

TEST(Knn, RigidMotionInvariant) {
  nd::Rng rng(8);
  const auto p = mt::random_points(40, rng);
  Mesh as_mesh{p.points, {}};
  const Mesh moved = translated(rotated_z(as_mesh, 0.7), {3, -2, 1});
  EXPECT_EQ(knn(p, 4).indices, knn(moved.vertex_set(), 4).indices);
}

TEST(Knn, KOutOfRange) {
  PointSet p{{{0, 0, 0}, {1, 0, 0}}};
  EXPECT_THROW(knn(p, 2), ValidationError);
  EXPECT_THROW(knn(p, 0), ValidationError);
}

TEST(SurfaceSampling, SamplesLieOnTriangles) {
  const Mesh m = mt::jitter(mt::grid_mesh(3, 3), 0.3, 9);
  const auto s = sample_surface_points(m, 500, 1);
  for (const auto& p : s.points) {
    double best = 1e9;
    for (const auto& f : m.faces)
      best = std::min(best, distance(p, closest_point_on_triangle(p, m.vertices[f[0]], m.vertices[f[1]],
                                                                      m.vertices[f[2]])));
    EXPECT_LE(best, 1e-9);
  }
  EXPECT_EQ(sample_surface_points(m, 500, 1).points, s.points);
  EXPECT_EQ(sample_surface_points(m, 256, 2).size(), 256u);
}

TEST(SurfaceSampling, AreaWeighted) {
  // Areas 9 and 1 in separate planes z = 0 and z = 1.
  Mesh m;
  m.vertices = {{0, 0, 0}, {3, 0, 0}, {0, 6, 0}, {0, 0, 1}, {1, 0, 1}, {0, 2, 1}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  const auto s = sample_surface_points(m, 100000, 3);
  const auto low = std::count_if(s.points.begin(), s.points.end(), [](const Point3& p) { return p[2] < 0.5; });
  const double ratio = static_cast<double>(low) / static_cast<double>(100000 - low);
  EXPECT_NEAR(ratio, 9.0, 9.0 * 0.02);
}

TEST(SurfaceSampling, ZeroAreaIsAnError) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  m.faces = {{0, 1, 2}};
  EXPECT_THROW(sample_surface_points(m, 10, 1), ValidationError);
}

TEST(SphereTemplate, OnSphereAndBalanced) {
  for (std::size_t count : {1, 17, 256}) {
    const auto s = sphere_template(count, 2.5);
    ASSERT_EQ(s.size(), count);
    for (const auto& p : s.points) EXPECT_NEAR(std::sqrt(squared_distance(p, {0, 0, 0})), 2.5, 1e-9);
    if (count > 1) {
      const auto g = centroid(s.points);
      EXPECT_LE(std::sqrt(squared_distance(g, {0, 0, 0})), 2.5 / std::sqrt(double(count)));
    }
  }
}

TEST(Medoid, SingleAndIdentical) {
  const Mesh m = mt::grid_mesh(3, 3);
  std::vector<Mesh> one{m};
  EXPECT_EQ(compute_medoid(one), 0u);
  std::vector<Mesh> copies{m, m, m};
  EXPECT_EQ(compute_medoid(copies), 0u);
  EXPECT_THROW(compute_medoid(std::vector<Mesh>{}), ValidationError);
}

TEST(Medoid, TranslatedCopiesPickMiddle) {
  const Mesh base = mt::jitter(mt::grid_mesh(3, 3), 0.2, 4);
  std::vector<Mesh> meshes;
  for (double dx : {-2.0, -1.0, 0.0, 1.0, 2.0}) meshes.push_back(translated(base, {dx, 0, 0}));
  // All-pairs brute-force sums as the oracle.
  std::vector<double> sums(5, 0.0);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      if (i != j) sums[i] += mt::chamfer_oracle(meshes[i].vertex_set(), meshes[j].vertex_set(), true);
  const auto oracle = static_cast<std::size_t>(std::min_element(sums.begin(), sums.end()) - sums.begin());
  EXPECT_EQ(oracle, 2u);
  EXPECT_EQ(compute_medoid(meshes), oracle);
  std::vector<Mesh> moved;
  for (const auto& m : meshes) moved.push_back(translated(rotated_z(m, 1.1), {4, 5, 6}));
  EXPECT_EQ(compute_medoid(moved), oracle);
}

TEST(BoxBump, SymmetricAtHalf) {
  BoxBumpParams params;
  params.resolution = 10;
  const Mesh m = generate_box_bump(0.5, params);
  std::vector<Point3> mirrored;
  for (auto v : m.vertices) mirrored.push_back({-v[0], v[1], v[2]});
  for (const auto& q : mirrored) {
    double best = 1e9;
    for (const auto& v : m.vertices) best = std::min(best, distance(q, v));
    EXPECT_LE(best, 1e-6);
  }
}

TEST(BoxBump, FixedTopologyAcrossT) {
  BoxBumpParams params;
  const Mesh a = generate_box_bump(0.0, params), b = generate_box_bump(0.3, params), c = generate_box_bump(1.0, params);
  EXPECT_EQ(a.vertex_count(), b.vertex_count());
  EXPECT_EQ(a.vertex_count(), c.vertex_count());
  EXPECT_EQ(a.faces, c.faces);
  EXPECT_EQ(a.vertex_count(), 702u);
  EXPECT_NO_THROW(validate(a));
  EXPECT_TRUE(is_connected(a));
}

TEST(BoxBump, PeakFollowsBumpCenter) {
  BoxBumpParams params;
  const double cell = params.length / double(params.resolution);
  for (double t : {0.0, 0.25, 0.6, 1.0}) {
    const Mesh m = generate_box_bump(t, params);
    const auto top = std::max_element(m.vertices.begin(), m.vertices.end(),
                                      [](const Point3& a, const Point3& b) { return a[2] < b[2]; });
    EXPECT_LE(std::abs((*top)[0] - params.bump_center(t)), cell + 1e-12) << "t=" << t;
  }
}

TEST(BoxBump, DeterministicAndRangeChecked) {
  BoxBumpParams params;
  params.noise = 0.01;
  EXPECT_EQ(generate_box_bump(0.4, params, 9).vertices, generate_box_bump(0.4, params, 9).vertices);
  EXPECT_NE(generate_box_bump(0.4, params, 9).vertices, generate_box_bump(0.4, params, 10).vertices);
  EXPECT_THROW(generate_box_bump(1.5, params), ValidationError);
  EXPECT_THROW(generate_box_bump(-0.1, params), ValidationError);
}

TEST(PointToMesh, ClosedForms) {
  const Mesh tri = one_triangle();
  EXPECT_NEAR(point_to_mesh_distance(PointSet{{{0.2, 0.3, 0}}}, tri).mean, 0.0, 1e-15);
  Mesh big;
  big.vertices = {{-100, -100, 0}, {100, -100, 0}, {0, 100, 0}};
  big.faces = {{0, 1, 2}};
  EXPECT_NEAR(point_to_mesh_distance(PointSet{{{1, 2, 3.5}}}, big).mean, 3.5, 1e-12);
  // Beyond the vertex and beyond an edge.
  EXPECT_NEAR(point_to_mesh_distance(PointSet{{{-1, -1, 0}}}, tri).mean, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(point_to_mesh_distance(PointSet{{{0.5, -2, 0}}}, tri).mean, 2.0, 1e-12);
  EXPECT_THROW(point_to_mesh_distance(PointSet{}, tri), ValidationError);
}

TEST(PointToMesh, AgreesWithDenseSampling) {
  BoxBumpParams params;
  params.resolution = 4;
  const Mesh m = generate_box_bump(0.3, params);
  double area = 0.0;
  for (const auto& f : m.faces) area += triangle_area(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
  const std::size_t samples = 1000000;
  const auto dense = sample_surface_points(m, samples, 5).flat();
  nd::Rng rng(12);
  const auto queries = mt::random_points(100, rng, 3.0);
  const auto exact = point_to_mesh_distance(queries, m);
  const double resolution = std::sqrt(area / double(samples));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    double best = 1e18;
    const auto& q = queries.points[i];
    for (std::size_t j = 0; j < samples; ++j) {
      const double dx = q[0] - dense[3 * j], dy = q[1] - dense[3 * j + 1], dz = q[2] - dense[3 * j + 2];
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    best = std::sqrt(best);
    EXPECT_GE(best, exact.per_point[i] - 1e-12);
    EXPECT_LE(best - exact.per_point[i], 5 * resolution);
  }
}
