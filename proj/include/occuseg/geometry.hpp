#pragma once

#include <map>
#include <optional>
#include <vector>

#include "occuseg/common.hpp"

namespace occuseg {

/// Point cloud with optional per-point attributes. All attribute arrays are
/// either empty or the same length as `points`.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> colors;            // RGB in [0,1]
    std::vector<Vec3> normals;           // unit vectors, optional
    std::vector<int> semantic_labels;    // class id or kUnlabeled, optional
    std::vector<int> instance_labels;    // instance id or kUnlabeled, optional

    std::size_t size() const { return points.size(); }
    bool has_normals() const { return !normals.empty(); }
    bool has_semantics() const { return !semantic_labels.empty(); }
    bool has_instances() const { return !instance_labels.empty(); }

    void validate() const;  // throws InvalidGeometry on violated invariants
};

struct VoxelCell {
    Vec3 centroid;
    Vec3 color;
    Vec3 normal;             // zero vector when no normals exist
    int point_count = 0;
    int semantic_label = kUnlabeled;   // majority vote, ties to smallest id
    int instance_label = kUnlabeled;
};

/// Sparse voxel grid. Cells are kept in a std::map so that iteration is
/// deterministic (sorted by coordinate tuple).
struct VoxelGrid {
    double resolution = 0.02;
    Vec3 origin;
    std::map<VoxelCoord, VoxelCell> cells;

    std::size_t size() const { return cells.size(); }

    /// Cells in iteration order; the index into this vector is the canonical
    /// voxel index used throughout the pipeline.
    std::vector<const VoxelCell*> cell_list() const;
    std::vector<VoxelCoord> coord_list() const;
};

struct VoxelCoordHash {
    std::size_t operator()(const VoxelCoord& c) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ull;
        for (std::int64_t v : c) {
            h ^= std::uint64_t(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            h *= 0xbf58476d1ce4e5b9ull;
        }
        return std::size_t(h);
    }
};

struct InstanceGroundTruth {
    int instance_id = 0;
    int semantic_class = kUnlabeled;
    std::vector<std::size_t> voxel_indices;  // indices into grid iteration order
    Vec3 centroid;                           // mean of member voxel centroids

    std::size_t voxel_count() const { return voxel_indices.size(); }
};

VoxelGrid voxelize(const PointCloud& cloud, double resolution);

/// Fills in cell normals by PCA over the centroids of each cell's
/// 26-neighbourhood (smallest-eigenvalue eigenvector, sign oriented toward +z
/// with lexicographic tie-break). Used when the input has no normals.
void estimate_normals(VoxelGrid& grid);

std::vector<InstanceGroundTruth> extract_ground_truth(const VoxelGrid& grid);

}  // namespace occuseg
