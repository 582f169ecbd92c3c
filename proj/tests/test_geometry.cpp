#include <doctest.h>

#include <limits>
#include <map>

#include "occuseg/geometry.hpp"
#include "occuseg/oracle.hpp"

using namespace occuseg;

namespace {

PointCloud single_point(double x, double y, double z) {
    PointCloud c;
    c.points.push_back({x, y, z});
    c.colors.push_back({0.5, 0.5, 0.5});
    c.normals.push_back({0, 0, 1});
    return c;
}

}  // namespace

TEST_CASE("voxelize: single point") {
    VoxelGrid g = voxelize(single_point(0.01, 0.01, 0.01), 0.02);
    REQUIRE(g.size() == 1);
    const auto& [coord, cell] = *g.cells.begin();
    CHECK(coord == VoxelCoord{0, 0, 0});
    CHECK(cell.centroid.x == doctest::Approx(0.01));
    CHECK(cell.point_count == 1);
}

TEST_CASE("voxelize: two points share a cell, centroid is the mean") {
    PointCloud c = single_point(0.005, 0.0, 0.0);
    c.points.push_back({0.015, 0.0, 0.0});
    c.colors.push_back({0.5, 0.5, 0.5});
    c.normals.push_back({0, 0, 1});
    VoxelGrid g = voxelize(c, 0.02);
    REQUIRE(g.size() == 1);
    const VoxelCell& cell = g.cells.begin()->second;
    CHECK(cell.centroid.x == doctest::Approx(0.010));
    CHECK(cell.point_count == 2);
}

TEST_CASE("voxelize: point counts are conserved on a synthetic room") {
    SceneSpec spec;
    spec.n_boxes = 2;
    spec.seed = 7;
    SynthScene scene = synth_scene(spec);
    VoxelGrid g = voxelize(scene.cloud, 0.02);
    std::size_t total = 0;
    for (const auto& [coord, cell] : g.cells) total += std::size_t(cell.point_count);
    CHECK(total == scene.cloud.size());
}

TEST_CASE("voxelize: errors") {
    CHECK_THROWS_AS(voxelize(PointCloud{}, 0.02), EmptyInput);
    PointCloud bad = single_point(0, 0, 0);
    bad.points[0].x = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(voxelize(bad, 0.02), InvalidGeometry);
    CHECK_THROWS_AS(voxelize(single_point(0, 0, 0), 0.0), InvalidGeometry);
}

TEST_CASE("voxelize: translation by a resolution multiple keeps relative coords") {
    SceneSpec spec;
    spec.n_boxes = 1;
    spec.include_room = false;
    spec.seed = 3;
    PointCloud cloud = synth_scene(spec).cloud;
    VoxelGrid a = voxelize(cloud, 0.02);

    PointCloud shifted = cloud;
    for (Vec3& p : shifted.points) p += Vec3(0.04, -0.06, 0.02);
    VoxelGrid b = voxelize(shifted, 0.02);

    REQUIRE(a.size() == b.size());
    auto ia = a.cells.begin();
    auto ib = b.cells.begin();
    // the origin snaps to the min corner, so relative coords are unchanged
    CHECK(b.origin.x - a.origin.x == doctest::Approx(0.04).epsilon(1e-9));
    for (; ia != a.cells.end(); ++ia, ++ib) {
        CHECK(ib->first == ia->first);
        CHECK(ib->second.point_count == ia->second.point_count);
        CHECK((ib->second.centroid - ia->second.centroid - Vec3(0.04, -0.06, 0.02)).norm() ==
              doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("voxelize: re-voxelizing cell centroids is idempotent on coordinates") {
    SceneSpec spec;
    spec.n_boxes = 2;
    spec.seed = 11;
    VoxelGrid g = voxelize(synth_scene(spec).cloud, 0.02);

    PointCloud centers;
    for (const auto& [coord, cell] : g.cells) {
        centers.points.push_back(cell.centroid);
        centers.colors.push_back(cell.color);
        centers.normals.push_back(cell.normal);
    }
    VoxelGrid g2 = voxelize(centers, 0.02);
    REQUIRE(g2.size() == g.size());
    auto i1 = g.cells.begin();
    auto i2 = g2.cells.begin();
    for (; i1 != g.cells.end(); ++i1, ++i2) {
        // same relative coordinates once both origins are accounted for
        Vec3 c1 = g.origin + Vec3(double(i1->first[0]), double(i1->first[1]),
                                  double(i1->first[2])) * g.resolution;
        Vec3 c2 = g2.origin + Vec3(double(i2->first[0]), double(i2->first[1]),
                                   double(i2->first[2])) * g2.resolution;
        CHECK((c1 - c2).norm() == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("voxelize: unanimous labels survive, ties go to the smallest id") {
    PointCloud c;
    for (int i = 0; i < 4; ++i) {
        c.points.push_back({0.001 * i, 0, 0});
        c.colors.push_back({0.5, 0.5, 0.5});
        c.normals.push_back({0, 0, 1});
    }
    c.semantic_labels = {3, 3, 3, 3};
    c.instance_labels = {7, 2, 2, 7};
    VoxelGrid g = voxelize(c, 0.02);
    REQUIRE(g.size() == 1);
    CHECK(g.cells.begin()->second.semantic_label == 3);
    CHECK(g.cells.begin()->second.instance_label == 2);  // tie 2 vs 7
}

TEST_CASE("extract_ground_truth: counting and centroids") {
    PointCloud c;
    auto add = [&](double x, int inst) {
        c.points.push_back({x, 0, 0});
        c.colors.push_back({0.5, 0.5, 0.5});
        c.normals.push_back({0, 0, 1});
        c.semantic_labels.push_back(inst == 0 ? 4 : 5);
        c.instance_labels.push_back(inst);
    };
    add(0.01, 0);
    add(0.05, 0);
    add(0.11, 1);
    VoxelGrid g = voxelize(c, 0.02);
    auto gt = extract_ground_truth(g);
    REQUIRE(gt.size() == 2);
    CHECK(gt[0].voxel_count() == 2);
    CHECK(gt[1].voxel_count() == 1);
    CHECK(gt[0].semantic_class == 4);
    CHECK(gt[1].semantic_class == 5);
    CHECK(gt[0].centroid.x == doctest::Approx(0.03));

    VoxelGrid unlabeled = voxelize(single_point(0, 0, 0), 0.02);
    CHECK_THROWS_AS(extract_ground_truth(unlabeled), NoGroundTruth);
}

TEST_CASE("extract_ground_truth: planted boxes match placement records") {
    SceneSpec spec;
    spec.n_boxes = 8;
    spec.seed = 21;
    SynthScene scene = synth_scene(spec);
    VoxelGrid g = voxelize(scene.cloud, 0.02);
    auto gt = extract_ground_truth(g);
    CHECK(gt.size() == scene.shapes.size());  // 5 room surfaces + 8 boxes

    // every labeled voxel count agrees with a direct per-label tally
    std::map<int, std::size_t> tally;
    for (const auto& [coord, cell] : g.cells) tally[cell.instance_label]++;
    for (const auto& inst : gt) CHECK(inst.voxel_count() == tally[inst.instance_id]);
}

TEST_CASE("estimate_normals: flat sheet gets +z normals") {
    PointCloud c;
    for (int x = 0; x < 6; ++x)
        for (int y = 0; y < 6; ++y) {
            c.points.push_back({0.02 * x, 0.02 * y, 0.0});
            c.colors.push_back({0.5, 0.5, 0.5});
        }
    VoxelGrid g = voxelize(c, 0.02);  // no normals: estimated
    for (const auto& [coord, cell] : g.cells) {
        CHECK(cell.normal.z == doctest::Approx(1.0).epsilon(1e-6));
    }
}
