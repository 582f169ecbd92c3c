#include "occuseg/supervoxel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace occuseg {

namespace {

struct UnionFind {
    std::vector<std::size_t> parent;
    std::vector<std::size_t> size;
    std::vector<double> internal;  // max internal edge weight per component

    explicit UnionFind(std::size_t n) : parent(n), size(n, 1), internal(n, 0.0) {
        std::iota(parent.begin(), parent.end(), std::size_t(0));
    }

    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    // returns the new root; merged component's internal weight becomes w
    std::size_t unite(std::size_t a, std::size_t b, double w) {
        a = find(a);
        b = find(b);
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
        internal[a] = w;
        return a;
    }
};

}  // namespace

std::vector<AdjacencyEdge> build_adjacency(const VoxelGrid& grid,
                                           const AdjacencyParams& params) {
    if (grid.size() == 0) throw EmptyInput("build_adjacency: empty grid");
    if (params.connectivity != 6 && params.connectivity != 18 && params.connectivity != 26)
        throw ConfigError("build_adjacency: connectivity must be 6, 18 or 26");

    std::unordered_map<VoxelCoord, std::size_t, VoxelCoordHash> index;
    index.reserve(grid.size());
    std::size_t i = 0;
    for (const auto& [c, cell] : grid.cells) index.emplace(c, i++);
    std::vector<const VoxelCell*> cells = grid.cell_list();

    std::vector<AdjacencyEdge> edges;
    std::size_t idx = 0;
    for (const auto& [c, cell_unused] : grid.cells) {
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dz = -1; dz <= 1; ++dz) {
                    int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                    if (manhattan == 0) continue;
                    if (params.connectivity == 6 && manhattan > 1) continue;
                    if (params.connectivity == 18 && manhattan > 2) continue;
                    auto it = index.find({c[0] + dx, c[1] + dy, c[2] + dz});
                    if (it == index.end() || it->second <= idx) continue;  // emit each pair once

                    const VoxelCell& p = *cells[idx];
                    const VoxelCell& q = *cells[it->second];
                    double color_term = (p.color - q.color).norm();
                    double normal_term = 1.0 - p.normal.dot(q.normal);
                    // concave: centroid offset opposes the normal difference
                    bool concave =
                        (p.normal - q.normal).dot(p.centroid - q.centroid) < -1e-12;
                    double factor = concave ? 1.0 / params.gamma_concave : 1.0;
                    double w = params.alpha * color_term + params.beta * normal_term * factor;
                    edges.push_back({idx, it->second, std::max(w, 0.0)});
                }
            }
        }
        ++idx;
    }
    return edges;
}

SuperVoxelPartition segment(const std::vector<AdjacencyEdge>& edges,
                            std::size_t n_voxels, double k, std::size_t min_size) {
    if (n_voxels == 0) throw EmptyInput("segment: no voxels");
    if (!(k > 0.0)) throw ConfigError("segment: k must be > 0");
    if (min_size < 1) throw ConfigError("segment: min_size must be >= 1");

    std::vector<AdjacencyEdge> sorted = edges;
    std::sort(sorted.begin(), sorted.end(),
              [](const AdjacencyEdge& x, const AdjacencyEdge& y) {
                  if (x.dissimilarity != y.dissimilarity)
                      return x.dissimilarity < y.dissimilarity;
                  if (x.a != y.a) return x.a < y.a;
                  return x.b < y.b;
              });

    UnionFind uf(n_voxels);
    for (const AdjacencyEdge& e : sorted) {
        std::size_t ra = uf.find(e.a);
        std::size_t rb = uf.find(e.b);
        if (ra == rb) continue;
        double ta = uf.internal[ra] + k / double(uf.size[ra]);
        double tb = uf.internal[rb] + k / double(uf.size[rb]);
        if (e.dissimilarity <= std::min(ta, tb))
            uf.unite(ra, rb, e.dissimilarity);
    }

    // min-size enforcement: walking edges in the same order merges each small
    // component into its lowest-weight neighbour
    for (const AdjacencyEdge& e : sorted) {
        std::size_t ra = uf.find(e.a);
        std::size_t rb = uf.find(e.b);
        if (ra == rb) continue;
        if (uf.size[ra] < min_size || uf.size[rb] < min_size)
            uf.unite(ra, rb, std::max({uf.internal[ra], uf.internal[rb], e.dissimilarity}));
    }

    SuperVoxelPartition part;
    part.assignment.assign(n_voxels, -1);
    std::unordered_map<std::size_t, int> remap;  // root -> contiguous id in voxel order
    for (std::size_t v = 0; v < n_voxels; ++v) {
        std::size_t r = uf.find(v);
        auto [it, inserted] = remap.emplace(r, int(remap.size()));
        part.assignment[v] = it->second;
        if (inserted) part.sizes.push_back(0);
        part.sizes[std::size_t(it->second)]++;
    }
    return part;
}

}  // namespace occuseg
