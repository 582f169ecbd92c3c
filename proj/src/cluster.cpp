#include "occuseg/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>

namespace occuseg {

int SuperVoxelStats::majority_class() const {
    int best = kUnlabeled;
    double best_votes = 0.0;
    for (std::size_t c = 0; c < class_histogram.size(); ++c)
        if (class_histogram[c] > best_votes) {  // ties go to the smallest class
            best_votes = class_histogram[c];
            best = int(c);
        }
    return best;
}

std::size_t ClusterGraph::alive_count() const {
    std::size_t n = 0;
    for (char a : alive) n += a ? 1 : 0;
    return n;
}

SuperVoxelStats merge_stats(const SuperVoxelStats& a, const SuperVoxelStats& b) {
    const double na = double(a.size()), nb = double(b.size());
    const double n = na + nb;
    SuperVoxelStats m;
    m.members.reserve(a.members.size() + b.members.size());
    m.members.insert(m.members.end(), a.members.begin(), a.members.end());
    m.members.insert(m.members.end(), b.members.begin(), b.members.end());
    m.spatial = (a.spatial * na + b.spatial * nb) / n;
    m.feature.resize(a.feature.size());
    for (std::size_t i = 0; i < m.feature.size(); ++i)
        m.feature[i] = (a.feature[i] * na + b.feature[i] * nb) / n;
    m.occupancy = (a.occupancy * na + b.occupancy * nb) / n;
    m.sigma_s = (a.sigma_s * na + b.sigma_s * nb) / n;
    m.sigma_d = (a.sigma_d * na + b.sigma_d * nb) / n;
    m.class_histogram.resize(std::max(a.class_histogram.size(), b.class_histogram.size()), 0.0);
    for (std::size_t c = 0; c < a.class_histogram.size(); ++c)
        m.class_histogram[c] += a.class_histogram[c];
    for (std::size_t c = 0; c < b.class_histogram.size(); ++c)
        m.class_histogram[c] += b.class_histogram[c];
    return m;
}

double cluster_edge_weight(const SuperVoxelStats& a, const SuperVoxelStats& b,
                           const ClusterParams& params) {
    if (params.semantic_gating && a.majority_class() != b.majority_class()) return 0.0;

    const double na = double(a.size()), nb = double(b.size());
    const double n = na + nb;
    // covariances and ratio of the virtual merged vertex
    const double ss = (a.sigma_s * na + b.sigma_s * nb) / n;
    const double sd = (a.sigma_d * na + b.sigma_d * nb) / n;
    const double occ = (a.occupancy * na + b.occupancy * nb) / n;
    const double r = params.use_occupancy ? occ / n : 1.0;

    double ds2 = 0.0;
    for (std::size_t i = 0; i < a.feature.size(); ++i) {
        double d = a.feature[i] - b.feature[i];
        ds2 += d * d;
    }
    double dd2 = (a.spatial - b.spatial).norm2();
    return std::exp(-ds2 / (ss * ss) - dd2 / (sd * sd)) / std::max(r, 0.5);
}

std::vector<SuperVoxelStats> aggregate(const SuperVoxelPartition& partition,
                                       const PredictionSet& preds,
                                       const VoxelGrid& grid) {
    preds.validate();
    const std::size_t n = grid.size();
    if (preds.size() != n || partition.assignment.size() != n)
        throw AlignmentError("aggregate: prediction/partition/grid size mismatch");

    std::vector<const VoxelCell*> cells = grid.cell_list();
    std::vector<SuperVoxelStats> stats(std::size_t(partition.segment_count()));
    for (SuperVoxelStats& s : stats) {
        s.feature.assign(std::size_t(preds.embedding_dim), 0.0);
        s.class_histogram.assign(std::size_t(preds.num_classes), 0.0);
    }

    for (std::size_t i = 0; i < n; ++i) {
        SuperVoxelStats& s = stats[std::size_t(partition.assignment[i])];
        s.members.push_back(i);
        s.spatial += cells[i]->centroid + preds.offsets[i];
        for (std::size_t k = 0; k < s.feature.size(); ++k)
            s.feature[k] += preds.embeddings[i][k];
        s.sigma_s += preds.sigma_s[i];
        s.sigma_d += preds.sigma_d[i];
        s.occupancy += preds.occupancy[i];  // accumulates log occupancy
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < preds.logits[i].size(); ++c)
            if (preds.logits[i][c] > preds.logits[i][argmax]) argmax = c;
        s.class_histogram[argmax] += 1.0;
    }

    for (SuperVoxelStats& s : stats) {
        const double m = double(s.size());
        s.spatial = s.spatial / m;
        for (double& v : s.feature) v /= m;
        s.sigma_s /= m;
        s.sigma_d /= m;
        s.occupancy = std::exp(s.occupancy / m);  // log mean -> linear count
    }
    return stats;
}

ClusterGraph build_cluster_graph(const std::vector<SuperVoxelStats>& stats,
                                 const SuperVoxelPartition& partition,
                                 const VoxelGrid& grid) {
    ClusterGraph graph;
    graph.vertices = stats;
    graph.alive.assign(stats.size(), 1);
    graph.adjacency.assign(stats.size(), {});

    std::unordered_map<VoxelCoord, std::size_t, VoxelCoordHash> index;
    index.reserve(grid.size());
    std::size_t i = 0;
    for (const auto& [c, cell] : grid.cells) index.emplace(c, i++);

    std::size_t idx = 0;
    for (const auto& [c, cell] : grid.cells) {
        int sa = partition.assignment[idx];
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    if (dx == 0 && dy == 0 && dz == 0) continue;
                    auto it = index.find({c[0] + dx, c[1] + dy, c[2] + dz});
                    if (it == index.end()) continue;
                    int sb = partition.assignment[it->second];
                    if (sa == sb) continue;
                    graph.adjacency[std::size_t(sa)].insert(sb);
                    graph.adjacency[std::size_t(sb)].insert(sa);
                }
        ++idx;
    }
    return graph;
}

namespace {

struct QueueEntry {
    double weight;
    int a, b;                 // a < b
    std::uint32_t va, vb;     // version stamps at push time

    bool operator<(const QueueEntry& o) const {
        if (weight != o.weight) return weight < o.weight;
        // equal weights: the lexicographically smallest pair wins
        if (a != o.a) return a > o.a;
        return b > o.b;
    }
};

}  // namespace

void merge_loop(ClusterGraph& graph, const ClusterParams& params) {
    if (!(params.t0 > 0.0 && params.t0 < 2.0))
        throw ConfigError("merge_loop: t0 must be in (0, 2)");

    const std::size_t nv = graph.vertices.size();
    std::vector<std::uint32_t> version(nv, 0);
    std::priority_queue<QueueEntry> queue;

    auto push_edge = [&](int a, int b) {
        if (a > b) std::swap(a, b);
        double w = cluster_edge_weight(graph.vertices[std::size_t(a)],
                                       graph.vertices[std::size_t(b)], params);
        if (w > params.t0)
            queue.push({w, a, b, version[std::size_t(a)], version[std::size_t(b)]});
    };

    for (std::size_t v = 0; v < nv; ++v)
        for (int nb : graph.adjacency[v])
            if (std::size_t(nb) > v) push_edge(int(v), nb);

    while (!queue.empty()) {
        QueueEntry e = queue.top();
        queue.pop();
        if (!graph.alive[std::size_t(e.a)] || !graph.alive[std::size_t(e.b)]) continue;
        if (version[std::size_t(e.a)] != e.va || version[std::size_t(e.b)] != e.vb)
            continue;  // stale

        const int keep = e.a, drop = e.b;
        graph.vertices[std::size_t(keep)] = merge_stats(graph.vertices[std::size_t(keep)],
                                                        graph.vertices[std::size_t(drop)]);
        graph.alive[std::size_t(drop)] = 0;
        version[std::size_t(keep)]++;
        graph.merge_log.push_back({e.a, e.b, e.weight, keep});

        std::set<int>& adj_keep = graph.adjacency[std::size_t(keep)];
        std::set<int>& adj_drop = graph.adjacency[std::size_t(drop)];
        for (int nb : adj_drop) {
            if (nb == keep) continue;
            graph.adjacency[std::size_t(nb)].erase(drop);
            graph.adjacency[std::size_t(nb)].insert(keep);
            adj_keep.insert(nb);
        }
        adj_keep.erase(drop);
        adj_drop.clear();

        for (int nb : adj_keep)
            if (graph.alive[std::size_t(nb)]) push_edge(keep, nb);
    }
}

InstancePrediction finalize(const ClusterGraph& graph, std::size_t n_voxels,
                            const ClusterParams& params) {
    InstancePrediction pred;
    pred.voxel_instance.assign(n_voxels, kRejected);

    for (std::size_t v = 0; v < graph.vertices.size(); ++v) {
        if (!graph.alive[v]) continue;
        const SuperVoxelStats& s = graph.vertices[v];
        double r = s.ratio();
        if (params.apply_ratio_filter &&
            !(r > params.ratio_min && r < params.ratio_max))
            continue;
        if (s.size() < params.min_voxels) continue;

        int cls = s.majority_class();
        double votes = cls >= 0 ? s.class_histogram[std::size_t(cls)] : 0.0;
        double vote_frac = votes / double(s.size());
        double ratio_fit = params.use_occupancy ? std::min(r, 1.0 / r) : 1.0;
        double confidence = std::min(vote_frac * ratio_fit, 1.0);

        int id = int(pred.instances.size());
        for (std::size_t m : s.members) {
            if (m >= n_voxels) throw AlignmentError("finalize: member index out of range");
            pred.voxel_instance[m] = id;
        }
        pred.instances.push_back({cls, confidence, s.size(), r});
    }
    return pred;
}

}  // namespace occuseg
