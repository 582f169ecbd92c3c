#pragma once

// Reference implementation of the merge loop: full O(V*E) re-scan for the
// global maximum after every merge. Shares only the stats/weight primitives
// with the production loop, not its scheduling.

#include "occuseg/cluster.hpp"

namespace occuseg_test {

inline void naive_merge_loop(occuseg::ClusterGraph& graph,
                             const occuseg::ClusterParams& params) {
    using namespace occuseg;
    while (true) {
        double best_w = 0.0;
        int best_a = -1, best_b = -1;
        for (std::size_t a = 0; a < graph.vertices.size(); ++a) {
            if (!graph.alive[a]) continue;
            for (int nb : graph.adjacency[a]) {
                if (std::size_t(nb) <= a || !graph.alive[std::size_t(nb)]) continue;
                double w = cluster_edge_weight(graph.vertices[a],
                                               graph.vertices[std::size_t(nb)], params);
                if (w <= params.t0) continue;
                bool better = w > best_w ||
                              (w == best_w && (int(a) < best_a ||
                                               (int(a) == best_a && nb < best_b)));
                if (better || best_a < 0) {
                    best_w = w;
                    best_a = int(a);
                    best_b = nb;
                }
            }
        }
        if (best_a < 0) return;

        const std::size_t keep = std::size_t(best_a), drop = std::size_t(best_b);
        graph.vertices[keep] = merge_stats(graph.vertices[keep], graph.vertices[drop]);
        graph.alive[drop] = 0;
        graph.merge_log.push_back({best_a, best_b, best_w, best_a});
        for (int nb : graph.adjacency[drop]) {
            if (std::size_t(nb) == keep) continue;
            graph.adjacency[std::size_t(nb)].erase(int(drop));
            graph.adjacency[std::size_t(nb)].insert(int(keep));
            graph.adjacency[keep].insert(nb);
        }
        graph.adjacency[keep].erase(int(drop));
        graph.adjacency[drop].clear();
    }
}

// Random small graph with plausible supervoxel statistics.
inline occuseg::ClusterGraph random_cluster_graph(occuseg::Rng& rng) {
    using namespace occuseg;
    const std::size_t nv = 2 + rng.uniform_index(29);  // 2..30
    const std::size_t dim = 3;

    ClusterGraph graph;
    graph.vertices.resize(nv);
    graph.alive.assign(nv, 1);
    graph.adjacency.assign(nv, {});

    std::size_t next_member = 0;
    for (std::size_t v = 0; v < nv; ++v) {
        SuperVoxelStats& s = graph.vertices[v];
        std::size_t size = 1 + rng.uniform_index(4);
        for (std::size_t m = 0; m < size; ++m) s.members.push_back(next_member++);
        s.spatial = {rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
        s.feature.resize(dim);
        for (double& f : s.feature) f = rng.normal(0.0, 1.0);
        s.occupancy = rng.uniform(0.5, 3.0 * double(size));
        s.sigma_s = rng.uniform(0.5, 1.5);
        s.sigma_d = rng.uniform(0.5, 1.5);
        s.class_histogram.assign(4, 0.0);
        s.class_histogram[rng.uniform_index(4)] = double(size);
    }
    for (std::size_t a = 0; a < nv; ++a)
        for (std::size_t b = a + 1; b < nv; ++b)
            if (rng.uniform() < 0.35) {
                graph.adjacency[a].insert(int(b));
                graph.adjacency[b].insert(int(a));
            }
    return graph;
}

}  // namespace occuseg_test
