#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "occuseg/losses.hpp"
#include "occuseg/oracle.hpp"

using namespace occuseg;

namespace {

struct SceneFixture {
    SynthScene scene;
    VoxelGrid grid;
    std::vector<InstanceGroundTruth> gt;

    explicit SceneFixture(const SceneSpec& spec)
        : scene(synth_scene(spec)),
          grid(voxelize(scene.cloud, 0.02)),
          gt(extract_ground_truth(grid)) {}
};

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("synth_scene: instance counting") {
    SceneSpec spec;
    spec.n_boxes = 2;
    spec.seed = 4;
    SynthScene s = synth_scene(spec);
    CHECK(s.shapes.size() == 7);  // floor + 4 walls + 2 boxes

    spec.n_boxes = 0;
    CHECK(synth_scene(spec).shapes.size() == 5);

    spec.include_room = false;
    CHECK_THROWS_AS(synth_scene(spec), EmptyInput);
}

TEST_CASE("synth_scene: determinism") {
    SceneSpec spec;
    spec.n_boxes = 4;
    spec.seed = 9;
    SynthScene a = synth_scene(spec);
    SynthScene b = synth_scene(spec);
    REQUIRE(a.cloud.size() == b.cloud.size());
    for (std::size_t i = 0; i < a.cloud.size(); ++i) {
        CHECK(a.cloud.points[i].x == b.cloud.points[i].x);
        CHECK(a.cloud.points[i].y == b.cloud.points[i].y);
        CHECK(a.cloud.points[i].z == b.cloud.points[i].z);
        CHECK(a.cloud.instance_labels[i] == b.cloud.instance_labels[i]);
    }
}

TEST_CASE("synth_scene: every point lies on the shape that labeled it") {
    SceneSpec spec;
    spec.n_boxes = 8;
    spec.seed = 1;
    SynthScene s = synth_scene(spec);
    const double tol = 0.011;  // in-plane jitter is at most 0.2 * spacing
    for (std::size_t i = 0; i < s.cloud.size(); ++i) {
        const ShapeRecord& shape = s.shapes[std::size_t(s.cloud.instance_labels[i])];
        CHECK(shape.contains(s.cloud.points[i], tol));
    }
}

TEST_CASE("oracle_code: separation and capacity") {
    OracleParams params;
    for (int a = 0; a < 10; ++a)
        for (int b = a + 1; b < 10; ++b) {
            auto ca = oracle_code(a, params);
            auto cb = oracle_code(b, params);
            double d2 = 0.0;
            for (std::size_t k = 0; k < ca.size(); ++k)
                d2 += (ca[k] - cb[k]) * (ca[k] - cb[k]);
            CHECK(std::sqrt(d2) >= doctest::Approx(std::sqrt(2.0) * params.code_scale));
        }
    CHECK_THROWS_AS(oracle_code(2 * params.embedding_dim, params), ConfigError);
    CHECK_THROWS_AS(oracle_code(-1, params), ConfigError);
}

TEST_CASE("emit_predictions: noise-free optima") {
    SceneSpec spec;
    spec.n_boxes = 4;
    spec.seed = 2;
    SceneFixture fx(spec);
    PredictionSet preds = emit_predictions(fx.grid, fx.gt, {});
    preds.validate();
    REQUIRE(preds.size() == fx.grid.size());

    LossBreakdown bd = evaluate_losses(preds, fx.grid, fx.gt);
    CHECK(bd.sp == 0.0);
    CHECK(bd.o == 0.0);
    CHECK(bd.var == 0.0);
    CHECK(bd.dist == 0.0);
    CHECK(bd.c < 1e-2);  // logit margin 10: residual ~ (C-1) * e^-10
    CHECK(bd.cov < 1e-5);
    CHECK(bd.reg == doctest::Approx(3.0));  // mean code norm = code_scale

    // every member voxel has p ~ 1 against its own instance
    std::vector<Vec3> positions;
    for (const auto& [c, cell] : fx.grid.cells) positions.push_back(cell.centroid);
    for (const InstanceGroundTruth& inst : fx.gt) {
        InstanceEmbeddingStats stats = instance_embedding_stats(
            preds.embeddings, preds.offsets, positions, preds.sigma_s, preds.sigma_d, inst);
        for (std::size_t i : inst.voxel_indices) {
            double p = probability(preds.embeddings[i], preds.offsets[i], positions[i],
                                   stats).p;
            CHECK(p >= 0.99);
        }
    }
}

TEST_CASE("emit_predictions: deterministic under a fixed seed, coverage enforced") {
    SceneSpec spec;
    spec.n_boxes = 2;
    spec.seed = 6;
    SceneFixture fx(spec);
    OracleNoiseSpec noise;
    noise.sigma_feat = 0.2;
    noise.sigma_off = 0.05;
    noise.sigma_occ = 0.1;
    noise.sigma_logit = 0.5;
    noise.rng_seed = 42;
    PredictionSet a = emit_predictions(fx.grid, fx.gt, noise);
    PredictionSet b = emit_predictions(fx.grid, fx.gt, noise);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.embeddings[i] == b.embeddings[i]);
        CHECK(a.occupancy[i] == b.occupancy[i]);
    }

    auto partial = fx.gt;
    partial.pop_back();
    CHECK_THROWS_AS(emit_predictions(fx.grid, partial, noise), CoverageError);
}

TEST_CASE("emit_predictions: shared class codes collapse same-class instances") {
    SceneSpec spec;
    spec.n_boxes = 3;
    spec.include_room = false;
    spec.seed = 8;
    SceneFixture fx(spec);
    OracleParams params;
    params.shared_class_codes = true;
    PredictionSet preds = emit_predictions(fx.grid, fx.gt, {}, params);
    const std::vector<double>& first = preds.embeddings[0];
    for (std::size_t i = 1; i < preds.size(); ++i) CHECK(preds.embeddings[i] == first);
}

TEST_CASE("emit_predictions: R_c under occupancy noise matches a Monte-Carlo oracle") {
    OracleNoiseSpec noise;
    noise.sigma_occ = 0.1;

    double observed = 0.0, expected = 0.0;
    std::size_t count = 0;
    Rng mc(555);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SceneSpec spec;
        spec.n_boxes = 4;
        spec.seed = 100 + seed;
        SceneFixture fx(spec);
        noise.rng_seed = seed + 1;
        PredictionSet preds = emit_predictions(fx.grid, fx.gt, noise);
        for (const InstanceGroundTruth& inst : fx.gt) {
            std::vector<double> occ;
            for (std::size_t i : inst.voxel_indices) occ.push_back(preds.occupancy[i]);
            observed += relative_error(occ, inst.voxel_count());

            double sigma_bar = noise.sigma_occ / std::sqrt(double(inst.voxel_count()));
            double acc = 0.0;
            for (int t = 0; t < 1000; ++t)
                acc += std::abs(1.0 - std::exp(mc.normal(0.0, sigma_bar)));
            expected += acc / 1000.0;
            ++count;
        }
    }
    observed /= double(count);
    expected /= double(count);
    CHECK(observed == doctest::Approx(expected).epsilon(0.25));
}

TEST_CASE("predictions: binary round-trip and corruption errors") {
    SceneSpec spec;
    spec.n_boxes = 1;
    spec.include_room = false;
    spec.seed = 3;
    SceneFixture fx(spec);
    OracleNoiseSpec noise;
    noise.sigma_feat = 0.1;
    noise.rng_seed = 7;
    PredictionSet preds = emit_predictions(fx.grid, fx.gt, noise);

    std::string path = temp_path("occuseg_test_preds.bin");
    write_predictions(path, preds);
    PredictionSet back = read_predictions(path);
    CHECK(back.num_classes == preds.num_classes);
    CHECK(back.embedding_dim == preds.embedding_dim);
    REQUIRE(back.size() == preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        CHECK(back.logits[i] == preds.logits[i]);
        CHECK(back.embeddings[i] == preds.embeddings[i]);
        CHECK(back.occupancy[i] == preds.occupancy[i]);
        CHECK(back.offsets[i].x == preds.offsets[i].x);
    }

    // truncate the payload
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 16);
    CHECK_THROWS_AS(read_predictions(path), ParseError);

    std::ofstream(path, std::ios::binary) << "NOTMAGIC and then some";
    CHECK_THROWS_AS(read_predictions(path), ParseError);
    std::remove(path.c_str());
}
