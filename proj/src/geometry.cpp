#include "occuseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace occuseg {

void PointCloud::validate() const {
    if (!colors.empty() && colors.size() != points.size())
        throw InvalidGeometry("colors length mismatch");
    if (!normals.empty() && normals.size() != points.size())
        throw InvalidGeometry("normals length mismatch");
    if (!semantic_labels.empty() && semantic_labels.size() != points.size())
        throw InvalidGeometry("semantic_labels length mismatch");
    if (!instance_labels.empty() && instance_labels.size() != points.size())
        throw InvalidGeometry("instance_labels length mismatch");
    for (const Vec3& p : points)
        if (!p.finite()) throw InvalidGeometry("non-finite point coordinate");
    for (const Vec3& n : normals)
        if (std::abs(n.norm() - 1.0) > 1e-6)
            throw InvalidGeometry("normal not unit length");
}

std::vector<const VoxelCell*> VoxelGrid::cell_list() const {
    std::vector<const VoxelCell*> out;
    out.reserve(cells.size());
    for (const auto& [c, cell] : cells) out.push_back(&cell);
    return out;
}

std::vector<VoxelCoord> VoxelGrid::coord_list() const {
    std::vector<VoxelCoord> out;
    out.reserve(cells.size());
    for (const auto& [c, cell] : cells) out.push_back(c);
    return out;
}

namespace {

struct CellAccum {
    Vec3 pos_sum, color_sum, normal_sum;
    int count = 0;
    std::map<int, int> semantic_votes;
    std::map<int, int> instance_votes;
};

int majority(const std::map<int, int>& votes) {
    int best = kUnlabeled;
    int best_count = 0;
    for (const auto& [label, count] : votes) {
        if (label == kUnlabeled) continue;
        if (count > best_count) {  // ties go to the smallest label id
            best = label;
            best_count = count;
        }
    }
    return best;
}

}  // namespace

VoxelGrid voxelize(const PointCloud& cloud, double resolution) {
    if (cloud.size() == 0) throw EmptyInput("voxelize: empty cloud");
    if (!(resolution > 0.0)) throw InvalidGeometry("voxelize: resolution must be > 0");
    cloud.validate();

    Vec3 lo(std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity());
    for (const Vec3& p : cloud.points) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        lo.z = std::min(lo.z, p.z);
    }
    // snap origin to a resolution multiple so grids do not depend on point order
    Vec3 origin(std::floor(lo.x / resolution) * resolution,
                std::floor(lo.y / resolution) * resolution,
                std::floor(lo.z / resolution) * resolution);

    std::map<VoxelCoord, CellAccum> accum;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 p = cloud.points[i];
        VoxelCoord c = {
            std::int64_t(std::floor((p.x - origin.x) / resolution)),
            std::int64_t(std::floor((p.y - origin.y) / resolution)),
            std::int64_t(std::floor((p.z - origin.z) / resolution))};
        CellAccum& a = accum[c];
        a.pos_sum += p;
        if (!cloud.colors.empty()) a.color_sum += cloud.colors[i];
        if (!cloud.normals.empty()) a.normal_sum += cloud.normals[i];
        if (!cloud.semantic_labels.empty()) a.semantic_votes[cloud.semantic_labels[i]]++;
        if (!cloud.instance_labels.empty()) a.instance_votes[cloud.instance_labels[i]]++;
        a.count++;
    }

    VoxelGrid grid;
    grid.resolution = resolution;
    grid.origin = origin;
    for (const auto& [c, a] : accum) {
        VoxelCell cell;
        cell.centroid = a.pos_sum / double(a.count);
        cell.color = a.color_sum / double(a.count);
        cell.normal = a.normal_sum.normalized();
        cell.point_count = a.count;
        cell.semantic_label = majority(a.semantic_votes);
        cell.instance_label = majority(a.instance_votes);
        grid.cells.emplace(c, cell);
    }

    if (!cloud.has_normals()) estimate_normals(grid);
    return grid;
}

namespace {

// Smallest-eigenvalue eigenvector of a 3x3 symmetric matrix via cyclic Jacobi.
Vec3 smallest_eigenvector(double m[3][3]) {
    double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::abs(m[0][1]) + std::abs(m[0][2]) + std::abs(m[1][2]);
        if (off < 1e-15) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(m[p][q]) < 1e-18) continue;
                double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    double mkp = m[k][p], mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for (int k = 0; k < 3; ++k) {
                    double mpk = m[p][k], mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for (int k = 0; k < 3; ++k) {
                    double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (m[i][i] < m[best][best]) best = i;
    return Vec3(v[0][best], v[1][best], v[2][best]).normalized();
}

Vec3 orient(Vec3 n) {
    if (n.z < 0) return n * -1.0;
    if (n.z > 0) return n;
    if (n.x < 0) return n * -1.0;
    if (n.x > 0) return n;
    if (n.y < 0) return n * -1.0;
    return n;
}

}  // namespace

void estimate_normals(VoxelGrid& grid) {
    std::vector<std::pair<VoxelCoord, Vec3>> updates;
    updates.reserve(grid.cells.size());
    for (const auto& [c, cell] : grid.cells) {
        std::vector<Vec3> nbrs;
        nbrs.push_back(cell.centroid);
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    if (dx == 0 && dy == 0 && dz == 0) continue;
                    auto it = grid.cells.find({c[0] + dx, c[1] + dy, c[2] + dz});
                    if (it != grid.cells.end()) nbrs.push_back(it->second.centroid);
                }
        Vec3 n(0, 0, 1);
        if (nbrs.size() >= 3) {
            Vec3 mean;
            for (const Vec3& p : nbrs) mean += p;
            mean = mean / double(nbrs.size());
            double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
            for (const Vec3& p : nbrs) {
                Vec3 d = p - mean;
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) m[a][b] += d[a] * d[b];
            }
            n = smallest_eigenvector(m);
        }
        updates.emplace_back(c, orient(n));
    }
    for (const auto& [c, n] : updates) grid.cells[c].normal = n;
}

std::vector<InstanceGroundTruth> extract_ground_truth(const VoxelGrid& grid) {
    std::map<int, InstanceGroundTruth> by_id;
    std::map<int, std::map<int, int>> class_votes;
    std::size_t index = 0;
    for (const auto& [c, cell] : grid.cells) {
        if (cell.instance_label != kUnlabeled) {
            InstanceGroundTruth& gt = by_id[cell.instance_label];
            gt.instance_id = cell.instance_label;
            gt.voxel_indices.push_back(index);
            gt.centroid += cell.centroid;
            class_votes[cell.instance_label][cell.semantic_label]++;
        }
        ++index;
    }
    if (by_id.empty()) throw NoGroundTruth("extract_ground_truth: no labeled cells");

    std::vector<InstanceGroundTruth> out;
    out.reserve(by_id.size());
    for (auto& [id, gt] : by_id) {
        gt.centroid = gt.centroid / double(gt.voxel_count());
        gt.semantic_class = majority(class_votes[id]);
        out.push_back(std::move(gt));
    }
    return out;
}

}  // namespace occuseg
