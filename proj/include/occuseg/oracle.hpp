#pragma once

#include <cstdint>
#include <vector>

#include "occuseg/geometry.hpp"
#include "occuseg/predictions.hpp"

namespace occuseg {

// Semantic classes used by the synthetic scenes. The logit vector is still
// num_classes long (default 18); only these ids carry ground truth.
enum SceneClass : int {
    kClassFloor = 0,
    kClassWall = 1,
    kClassBox = 2,
    kClassCylinder = 3,
    kClassBoard = 4,
};

enum class ShapeKind { Box, Cylinder, Board };

struct ShapeRecord {
    ShapeKind kind = ShapeKind::Box;
    int instance_id = 0;
    int semantic_class = kClassBox;
    Vec3 center;        // geometric center of the shape
    Vec3 half_extent;   // boxes/boards; cylinders use half_extent.x as radius
    double radius = 0.0;

    bool contains(const Vec3& p, double tol) const;  // membership on the surface
};

struct SceneSpec {
    double room_width = 3.0;
    double room_depth = 3.0;
    double room_height = 2.0;
    int n_boxes = 8;
    int n_cylinders = 0;
    int n_boards = 0;
    bool include_room = true;
    double sample_spacing = 0.02;   // surface sample grid step (meters)
    double surface_gap = 0.06;      // inset separating room surfaces
    double float_height = 0.06;    // objects hover above the floor
    double clearance = 0.12;        // min distance between object footprints
    double min_side = 0.3, max_side = 0.5;
    double min_height = 0.08, max_height = 0.16;
    bool adjacent_pairs = false;    // place boxes as touching same-class pairs
    std::uint64_t seed = 1;
};

struct SynthScene {
    PointCloud cloud;
    std::vector<ShapeRecord> shapes;  // includes the room surfaces
};

SynthScene synth_scene(const SceneSpec& spec);

struct OracleNoiseSpec {
    double sigma_feat = 0.0;   // per-dim std on feature codes
    double sigma_off = 0.0;    // per-component std on spatial offsets (meters)
    double sigma_occ = 0.0;    // std on log-occupancy
    double sigma_logit = 0.0;  // std on logits
    std::uint64_t rng_seed = 1;
};

struct OracleParams {
    int num_classes = 18;
    int embedding_dim = 32;
    double code_scale = 3.0;    // feature codes at +-code_scale * e_k
    double logit_margin = 10.0;
    double sigma_s = 0.3;       // emitted feature covariance
    double sigma_d = 0.3;       // emitted spatial covariance
    bool shared_class_codes = false;  // same-class instances share one code
};

/// Feature code assigned to instance `index` (or to a semantic class when
/// codes are shared). Codes sit on scaled orthant axes with pairwise distance
/// >= sqrt(2) * code_scale.
std::vector<double> oracle_code(int index, const OracleParams& params);

PredictionSet emit_predictions(const VoxelGrid& grid,
                               const std::vector<InstanceGroundTruth>& gt,
                               const OracleNoiseSpec& noise,
                               const OracleParams& params = {});

}  // namespace occuseg
