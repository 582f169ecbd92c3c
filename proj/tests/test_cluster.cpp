#include <doctest.h>

#include <cmath>
#include <map>

#include "naive_merge.hpp"
#include "occuseg/cluster.hpp"
#include "occuseg/oracle.hpp"

using namespace occuseg;

namespace {

SuperVoxelStats stats_of(std::vector<std::size_t> members, Vec3 spatial,
                         std::vector<double> feature, double occupancy,
                         double sigma_s, double sigma_d,
                         std::vector<double> histogram = {1.0}) {
    SuperVoxelStats s;
    s.members = std::move(members);
    s.spatial = spatial;
    s.feature = std::move(feature);
    s.occupancy = occupancy;
    s.sigma_s = sigma_s;
    s.sigma_d = sigma_d;
    s.class_histogram = std::move(histogram);
    return s;
}

}  // namespace

TEST_CASE("majority_class: ties go to the smallest class id") {
    SuperVoxelStats s;
    s.class_histogram = {0.0, 2.0, 2.0};
    CHECK(s.majority_class() == 1);
    s.class_histogram = {3.0, 2.0, 3.0};
    CHECK(s.majority_class() == 0);
    s.class_histogram.clear();
    CHECK(s.majority_class() == kUnlabeled);
}

TEST_CASE("merge_stats: size-weighted means and histogram addition") {
    SuperVoxelStats a = stats_of({0}, {0, 0, 0}, {1.0}, 4.0, 0.2, 0.4, {1.0, 0.0});
    SuperVoxelStats b = stats_of({1, 2, 3}, {4, 0, 0}, {5.0}, 8.0, 0.6, 0.8, {0.0, 3.0});
    SuperVoxelStats m = merge_stats(a, b);
    CHECK(m.size() == 4);
    CHECK(m.spatial.x == doctest::Approx(3.0));
    CHECK(m.feature[0] == doctest::Approx(4.0));
    CHECK(m.occupancy == doctest::Approx(7.0));
    CHECK(m.sigma_s == doctest::Approx(0.5));
    CHECK(m.sigma_d == doctest::Approx(0.7));
    CHECK(m.class_histogram[0] == doctest::Approx(1.0));
    CHECK(m.class_histogram[1] == doctest::Approx(3.0));
    CHECK(m.majority_class() == 1);
}

TEST_CASE("cluster_edge_weight: plug-in values") {
    ClusterParams params;

    // identical statistics, O = 2 per side: virtual r = 1, w = 1
    SuperVoxelStats a = stats_of({0}, {0, 0, 0}, {0.5}, 2.0, 1.0, 1.0);
    SuperVoxelStats b = stats_of({1}, {0, 0, 0}, {0.5}, 2.0, 1.0, 1.0);
    CHECK(cluster_edge_weight(a, b, params) == doctest::Approx(1.0));

    // tiny occupancy: r = 0.25 is clamped to 0.5, w = 2
    a.occupancy = b.occupancy = 0.5;
    CHECK(cluster_edge_weight(a, b, params) == doctest::Approx(2.0));

    // one-sigma feature and spatial residuals at r = 1: w = e^-2
    a.occupancy = b.occupancy = 2.0;
    b.feature = {1.5};
    b.spatial = {1.0, 0.0, 0.0};
    CHECK(cluster_edge_weight(a, b, params) == doctest::Approx(std::exp(-2.0)));

    // disabling occupancy forces r = 1 regardless of the counts
    a.occupancy = b.occupancy = 40.0;
    b.feature = {0.5};
    b.spatial = {0, 0, 0};
    CHECK(cluster_edge_weight(a, b, params) < 0.1);
    params.use_occupancy = false;
    CHECK(cluster_edge_weight(a, b, params) == doctest::Approx(1.0));
}

TEST_CASE("cluster_edge_weight: strictly decreasing in r above the clamp") {
    ClusterParams params;
    double prev = -1.0;
    for (double occ : {0.2, 0.6, 1.0, 1.4, 2.0}) {
        SuperVoxelStats a = stats_of({0}, {0, 0, 0}, {0.5}, occ, 1.0, 1.0);
        SuperVoxelStats b = stats_of({1}, {0, 0, 0}, {0.5}, occ, 1.0, 1.0);
        double w = cluster_edge_weight(a, b, params);
        if (occ <= 1.0) CHECK(w == doctest::Approx(2.0));  // r <= 0.5 clamps
        else CHECK(w < prev);
        prev = w;
    }
}

TEST_CASE("cluster_edge_weight: semantic gating vetoes cross-class merges") {
    ClusterParams params;
    params.semantic_gating = true;
    SuperVoxelStats a = stats_of({0}, {0, 0, 0}, {0.5}, 2.0, 1.0, 1.0, {1.0, 0.0});
    SuperVoxelStats b = stats_of({1}, {0, 0, 0}, {0.5}, 2.0, 1.0, 1.0, {0.0, 1.0});
    CHECK(cluster_edge_weight(a, b, params) == 0.0);
    params.semantic_gating = false;
    CHECK(cluster_edge_weight(a, b, params) == doctest::Approx(1.0));
}

TEST_CASE("aggregate: two-voxel segment statistics") {
    VoxelGrid grid;
    VoxelCell c0, c1;
    c0.centroid = {0.01, 0.01, 0.01};
    c1.centroid = {0.03, 0.01, 0.01};
    c0.point_count = c1.point_count = 1;
    grid.cells.emplace(VoxelCoord{0, 0, 0}, c0);
    grid.cells.emplace(VoxelCoord{1, 0, 0}, c1);

    PredictionSet preds;
    preds.num_classes = 2;
    preds.embedding_dim = 1;
    preds.logits = {{0.0, 3.0}, {0.0, 3.0}};
    preds.embeddings = {{1.0}, {3.0}};
    preds.offsets = {{0.01, 0, 0}, {-0.01, 0, 0}};
    preds.sigma_s = {0.2, 0.4};
    preds.sigma_d = {0.6, 0.8};
    preds.occupancy = {std::log(100.0), std::log(100.0)};

    SuperVoxelPartition part;
    part.assignment = {0, 0};
    part.sizes = {2};
    auto stats = aggregate(part, preds, grid);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].size() == 2);
    CHECK(stats[0].spatial.x == doctest::Approx(0.02));
    CHECK(stats[0].feature[0] == doctest::Approx(2.0));
    CHECK(stats[0].sigma_s == doctest::Approx(0.3));
    CHECK(stats[0].sigma_d == doctest::Approx(0.7));
    CHECK(stats[0].occupancy == doctest::Approx(100.0));
    CHECK(stats[0].ratio() == doctest::Approx(50.0));
    CHECK(stats[0].class_histogram[1] == doctest::Approx(2.0));

    part.assignment = {0};
    part.sizes = {1};
    CHECK_THROWS_AS(aggregate(part, preds, grid), AlignmentError);
}

TEST_CASE("aggregate + merge: noise-free object supervoxels carry r = N_c / n") {
    SceneSpec spec;
    spec.n_boxes = 1;
    spec.include_room = false;
    spec.seed = 31;
    SynthScene scene = synth_scene(spec);
    VoxelGrid grid = voxelize(scene.cloud, 0.02);
    auto gt = extract_ground_truth(grid);
    PredictionSet preds = emit_predictions(grid, gt, {});

    auto edges = build_adjacency(grid);
    SuperVoxelPartition part = segment(edges, grid.size(), 0.06, 20);
    auto stats = aggregate(part, preds, grid);
    const double n_c = double(gt[0].voxel_count());

    // merging all supervoxels of the object reproduces the exact ratio 1
    SuperVoxelStats whole = stats[0];
    for (std::size_t i = 1; i < stats.size(); ++i) whole = merge_stats(whole, stats[i]);
    CHECK(whole.size() == gt[0].voxel_count());
    CHECK(whole.occupancy == doctest::Approx(n_c).epsilon(1e-9));
    CHECK(whole.ratio() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("merge_loop: no merges happen when every weight is below t0") {
    ClusterGraph graph;
    graph.vertices = {
        stats_of({0}, {0, 0, 0}, {0.0}, 2.0, 0.3, 0.3),
        stats_of({1}, {5, 0, 0}, {9.0}, 2.0, 0.3, 0.3),
    };
    graph.alive = {1, 1};
    graph.adjacency = {{1}, {0}};
    ClusterParams params;
    merge_loop(graph, params);
    CHECK(graph.merge_log.empty());
    CHECK(graph.alive_count() == 2);

    params.t0 = 2.5;
    CHECK_THROWS_AS(merge_loop(graph, params), ConfigError);
}

TEST_CASE("merge_loop: two halves of one object merge into a unit-ratio vertex") {
    // 40 voxels worth of statistics split into two supervoxels of 20 with the
    // oracle's noise-free occupancy: virtual r = 1, weight = 1 > t0
    std::vector<std::size_t> ma, mb;
    for (std::size_t i = 0; i < 20; ++i) ma.push_back(i), mb.push_back(20 + i);
    ClusterGraph graph;
    graph.vertices = {
        stats_of(ma, {0.1, 0, 0}, {2.0, 0.0}, 40.0, 0.3, 2.0),
        stats_of(mb, {0.1, 0.02, 0}, {2.0, 0.0}, 40.0, 0.3, 2.0),
    };
    graph.alive = {1, 1};
    graph.adjacency = {{1}, {0}};
    ClusterParams params;
    merge_loop(graph, params);
    REQUIRE(graph.merge_log.size() == 1);
    CHECK(graph.merge_log[0].a == 0);
    CHECK(graph.merge_log[0].b == 1);
    CHECK(graph.alive_count() == 1);
    CHECK(graph.vertices[0].size() == 40);
    CHECK(graph.vertices[0].ratio() == doctest::Approx(1.0));
}

TEST_CASE("merge_loop: agrees with the naive full-rescan reference") {
    ClusterParams params;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        Rng rng(seed * 977);
        ClusterGraph lazy = occuseg_test::random_cluster_graph(rng);
        ClusterGraph naive = lazy;
        merge_loop(lazy, params);
        occuseg_test::naive_merge_loop(naive, params);

        REQUIRE(lazy.merge_log.size() == naive.merge_log.size());
        for (std::size_t k = 0; k < lazy.merge_log.size(); ++k) {
            CHECK(lazy.merge_log[k].a == naive.merge_log[k].a);
            CHECK(lazy.merge_log[k].b == naive.merge_log[k].b);
            CHECK(lazy.merge_log[k].weight == naive.merge_log[k].weight);
        }
        CHECK(lazy.alive == naive.alive);
    }
}

TEST_CASE("finalize: ratio filter, confidence, and conservation") {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < 30; ++i) members.push_back(i);
    ClusterGraph graph;
    graph.vertices = {stats_of(members, {0, 0, 0}, {1.0}, 30.0, 0.3, 0.3,
                               {6.0, 24.0})};
    graph.alive = {1};
    graph.adjacency = {{}};
    ClusterParams params;

    InstancePrediction pred = finalize(graph, 30, params);
    REQUIRE(pred.instances.size() == 1);
    CHECK(pred.instances[0].semantic_class == 1);
    CHECK(pred.instances[0].ratio == doctest::Approx(1.0));
    CHECK(pred.instances[0].confidence == doctest::Approx(0.8));  // 24/30 * min(r,1/r)
    for (int v : pred.voxel_instance) CHECK(v == 0);

    // r = 2.5 lands outside (0.3, 2) and is filtered out
    graph.vertices[0].occupancy = 75.0;
    pred = finalize(graph, 30, params);
    CHECK(pred.instances.empty());
    for (int v : pred.voxel_instance) CHECK(v == kRejected);

    // with the filter disabled the vertex survives at reduced confidence
    params.apply_ratio_filter = false;
    pred = finalize(graph, 30, params);
    REQUIRE(pred.instances.size() == 1);
    CHECK(pred.instances[0].confidence == doctest::Approx(0.8 * 0.4));

    // without occupancy the ratio no longer affects confidence
    params.use_occupancy = false;
    pred = finalize(graph, 30, params);
    CHECK(pred.instances[0].confidence == doctest::Approx(0.8));

    // min_voxels prunes small clusters
    params.min_voxels = 31;
    pred = finalize(graph, 30, params);
    CHECK(pred.instances.empty());
}

TEST_CASE("build_cluster_graph: links exactly the touching segments") {
    SceneSpec spec;
    spec.n_boxes = 2;
    spec.include_room = false;
    spec.seed = 41;
    SynthScene scene = synth_scene(spec);
    VoxelGrid grid = voxelize(scene.cloud, 0.02);
    auto gt = extract_ground_truth(grid);
    PredictionSet preds = emit_predictions(grid, gt, {});
    auto edges = build_adjacency(grid);
    SuperVoxelPartition part = segment(edges, grid.size(), 0.06, 20);
    auto stats = aggregate(part, preds, grid);
    ClusterGraph graph = build_cluster_graph(stats, part, grid);

    REQUIRE(graph.vertices.size() == stats.size());
    // symmetric, irreflexive adjacency
    for (std::size_t v = 0; v < graph.adjacency.size(); ++v)
        for (int nb : graph.adjacency[v]) {
            CHECK(std::size_t(nb) != v);
            CHECK(graph.adjacency[std::size_t(nb)].count(int(v)) == 1);
        }

    // segments of different instances never touch in this scene: with the
    // per-voxel instance labels, cross-instance adjacency must be empty
    std::map<int, int> seg_instance;
    std::size_t idx = 0;
    for (const auto& [coord, cell] : grid.cells)
        seg_instance.emplace(part.assignment[idx++], cell.instance_label);
    for (std::size_t v = 0; v < graph.adjacency.size(); ++v)
        for (int nb : graph.adjacency[v])
            CHECK(seg_instance[int(v)] == seg_instance[nb]);
}
