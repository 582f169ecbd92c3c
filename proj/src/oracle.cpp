#include "occuseg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace occuseg {

void PredictionSet::validate() const {
    const std::size_t n = offsets.size();
    if (logits.size() != n || embeddings.size() != n || sigma_s.size() != n ||
        sigma_d.size() != n || occupancy.size() != n)
        throw AlignmentError("PredictionSet: array length mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (int(logits[i].size()) != num_classes)
            throw AlignmentError("PredictionSet: logit length mismatch");
        if (int(embeddings[i].size()) != embedding_dim)
            throw AlignmentError("PredictionSet: embedding length mismatch");
        if (!(sigma_s[i] > 0.0) || !(sigma_d[i] > 0.0))
            throw CovarianceError("PredictionSet: nonpositive covariance");
    }
}

bool ShapeRecord::contains(const Vec3& p, double tol) const {
    if (kind == ShapeKind::Cylinder) {
        double dz = std::abs(p.z - center.z);
        if (dz > half_extent.z + tol) return false;
        double dr = std::hypot(p.x - center.x, p.y - center.y);
        return dr <= radius + tol;
    }
    return std::abs(p.x - center.x) <= half_extent.x + tol &&
           std::abs(p.y - center.y) <= half_extent.y + tol &&
           std::abs(p.z - center.z) <= half_extent.z + tol;
}

namespace {

// 27 well-separated colours; consecutive instances stride through the cube so
// neighbouring ids differ by at least 0.4 in some channel
Vec3 palette_color(int instance_id) {
    static const double level[3] = {0.1, 0.5, 0.9};
    int idx = (instance_id * 7) % 27;
    return {level[idx % 3], level[(idx / 3) % 3], level[(idx / 9) % 3]};
}

struct SceneBuilder {
    const SceneSpec& spec;
    SynthScene scene;
    Rng rng;

    explicit SceneBuilder(const SceneSpec& s) : spec(s), rng(s.seed) {}

    void add_point(const Vec3& p, const Vec3& n, const Vec3& color, int cls, int inst) {
        scene.cloud.points.push_back(p);
        scene.cloud.normals.push_back(n);
        scene.cloud.colors.push_back(color);
        scene.cloud.semantic_labels.push_back(cls);
        scene.cloud.instance_labels.push_back(inst);
    }

    // Centers of the global voxel columns covering [lo, hi].
    std::vector<double> grid_centers(double lo, double hi) const {
        std::vector<double> out;
        double res = spec.sample_spacing;
        double start = (std::floor(lo / res) + 0.5) * res;
        if (start < lo) start += res;
        for (double c = start; c <= hi; c += res) out.push_back(c);
        return out;
    }

    double jitter() { return rng.uniform(-0.2, 0.2) * spec.sample_spacing; }

    // Axis-aligned rectangle: `axis` is the fixed coordinate (0,1,2) at `value`.
    void add_rect(int axis, double value, double ulo, double uhi, double vlo,
                  double vhi, const Vec3& normal, const Vec3& color, int cls, int inst) {
        for (double u : grid_centers(ulo, uhi)) {
            for (double v : grid_centers(vlo, vhi)) {
                Vec3 p;
                double uj = u + jitter(), vj = v + jitter();
                if (axis == 0) p = {value, uj, vj};
                else if (axis == 1) p = {uj, value, vj};
                else p = {uj, vj, value};
                add_point(p, normal, color, cls, inst);
            }
        }
    }

    void add_room() {
        const double g = spec.surface_gap;
        const double w = spec.room_width, d = spec.room_depth, h = spec.room_height;
        int id = int(scene.shapes.size());
        // floor
        add_rect(2, 0.0, g, w - g, g, d - g, {0, 0, 1}, palette_color(id), kClassFloor, id);
        scene.shapes.push_back({ShapeKind::Board, id, kClassFloor,
                                {w / 2, d / 2, 0}, {w / 2, d / 2, 1e-4}, 0.0});
        // walls, normals pointing inward
        struct Wall { int axis; double value; Vec3 n; };
        const Wall walls[4] = {
            {0, 0.0, {1, 0, 0}}, {0, w, {-1, 0, 0}}, {1, 0.0, {0, 1, 0}}, {1, d, {0, -1, 0}}};
        for (const Wall& wall : walls) {
            id = int(scene.shapes.size());
            double span = wall.axis == 0 ? d : w;
            add_rect(wall.axis, wall.value, g, span - g, g, h, wall.n,
                     palette_color(id), kClassWall, id);
            Vec3 c = wall.axis == 0 ? Vec3{wall.value, d / 2, h / 2}
                                    : Vec3{w / 2, wall.value, h / 2};
            Vec3 he = wall.axis == 0 ? Vec3{1e-4, d / 2, h / 2} : Vec3{w / 2, 1e-4, h / 2};
            scene.shapes.push_back({ShapeKind::Board, id, kClassWall, c, he, 0.0});
        }
    }

    void add_box_surface(const Vec3& c, const Vec3& he, const Vec3& color, int cls, int id) {
        // top face plus four sides; bottom open
        add_rect(2, c.z + he.z, c.x - he.x, c.x + he.x, c.y - he.y, c.y + he.y,
                 {0, 0, 1}, color, cls, id);
        add_rect(0, c.x - he.x, c.y - he.y, c.y + he.y, c.z - he.z, c.z + he.z,
                 {-1, 0, 0}, color, cls, id);
        add_rect(0, c.x + he.x, c.y - he.y, c.y + he.y, c.z - he.z, c.z + he.z,
                 {1, 0, 0}, color, cls, id);
        add_rect(1, c.y - he.y, c.x - he.x, c.x + he.x, c.z - he.z, c.z + he.z,
                 {0, -1, 0}, color, cls, id);
        add_rect(1, c.y + he.y, c.x - he.x, c.x + he.x, c.z - he.z, c.z + he.z,
                 {0, 1, 0}, color, cls, id);
    }

    void add_cylinder_surface(const Vec3& c, double radius, double hz,
                              const Vec3& color, int cls, int id) {
        double step = spec.sample_spacing;
        int n_theta = std::max(8, int(std::ceil(2.0 * 3.14159265358979 * radius / step)));
        for (double z : grid_centers(c.z - hz, c.z + hz)) {
            for (int t = 0; t < n_theta; ++t) {
                double a = 2.0 * 3.14159265358979 * (double(t) + 0.5) / double(n_theta);
                Vec3 n(std::cos(a), std::sin(a), 0.0);
                add_point({c.x + radius * n.x, c.y + radius * n.y, z + jitter()}, n,
                          color, cls, id);
            }
        }
        for (double x : grid_centers(c.x - radius, c.x + radius))
            for (double y : grid_centers(c.y - radius, c.y + radius))
                if (std::hypot(x - c.x, y - c.y) <= radius)
                    add_point({x + jitter(), y + jitter(), c.z + hz}, {0, 0, 1},
                              color, cls, id);
    }

    bool overlaps(const Vec3& c, const Vec3& he, int ignore_id = -1) const {
        for (const ShapeRecord& s : scene.shapes) {
            if (s.semantic_class == kClassFloor || s.semantic_class == kClassWall) continue;
            if (s.instance_id == ignore_id) continue;
            double rx = s.kind == ShapeKind::Cylinder ? s.radius : s.half_extent.x;
            double ry = s.kind == ShapeKind::Cylinder ? s.radius : s.half_extent.y;
            if (std::abs(c.x - s.center.x) < he.x + rx + spec.clearance &&
                std::abs(c.y - s.center.y) < he.y + ry + spec.clearance)
                return true;
        }
        return false;
    }

    // footprint must stay clear of the walls
    bool in_room(const Vec3& c, const Vec3& he) const {
        double margin = spec.surface_gap + 0.1;
        return c.x - he.x > margin && c.x + he.x < spec.room_width - margin &&
               c.y - he.y > margin && c.y + he.y < spec.room_depth - margin;
    }

    void place_objects() {
        const int total = spec.n_boxes + spec.n_cylinders + spec.n_boards;
        int placed_boxes = 0;
        for (int obj = 0; obj < total; ++obj) {
            ShapeKind kind = obj < spec.n_boxes ? ShapeKind::Box
                             : obj < spec.n_boxes + spec.n_cylinders ? ShapeKind::Cylinder
                                                                     : ShapeKind::Board;
            bool ok = false;
            for (int attempt = 0; attempt < 400 && !ok; ++attempt) {
                double sx = rng.uniform(spec.min_side, spec.max_side);
                double sy = rng.uniform(spec.min_side, spec.max_side);
                double sz = rng.uniform(spec.min_height, spec.max_height);
                Vec3 he(sx / 2, sy / 2, sz / 2);
                if (kind == ShapeKind::Cylinder) he = {sx / 2, sx / 2, sz / 2};
                if (kind == ShapeKind::Board) he.y = 1e-4;
                bool pair_second = kind == ShapeKind::Box && spec.adjacent_pairs &&
                                   (placed_boxes % 2 == 1);
                Vec3 c;
                if (pair_second) {
                    const ShapeRecord& prev = scene.shapes.back();
                    // faces exactly one voxel apart so the pair is 26-adjacent
                    he.z = prev.half_extent.z;  // same height keeps the pair symmetric
                    c = {prev.center.x + prev.half_extent.x + he.x + spec.sample_spacing,
                         prev.center.y, prev.center.z};
                } else {
                    c = {rng.uniform(0.0, spec.room_width), rng.uniform(0.0, spec.room_depth),
                         spec.float_height + he.z};
                }
                bool pair_first = kind == ShapeKind::Box && spec.adjacent_pairs &&
                                  (placed_boxes % 2 == 0);
                // the first box of a touching pair must leave room for its partner;
                // the second ignores its partner in the overlap test
                Vec3 he_check = pair_first ? Vec3{he.x * 3, he.y, he.z} : he;
                Vec3 c_check = pair_first ? Vec3{c.x + 2 * he.x, c.y, c.z} : c;
                int ignore = pair_second ? scene.shapes.back().instance_id : -1;
                if (!in_room(c_check, he_check) || overlaps(c_check, he_check, ignore))
                    continue;

                int id = int(scene.shapes.size());
                Vec3 color = palette_color(id);
                if (kind == ShapeKind::Box) {
                    add_box_surface(c, he, color, kClassBox, id);
                    scene.shapes.push_back({ShapeKind::Box, id, kClassBox, c, he, 0.0});
                    ++placed_boxes;
                } else if (kind == ShapeKind::Cylinder) {
                    add_cylinder_surface(c, he.x, he.z, color, kClassCylinder, id);
                    scene.shapes.push_back(
                        {ShapeKind::Cylinder, id, kClassCylinder, c, he, he.x});
                } else {
                    add_rect(1, c.y, c.x - he.x, c.x + he.x, c.z - he.z, c.z + he.z,
                             {0, 1, 0}, color, kClassBoard, id);
                    scene.shapes.push_back({ShapeKind::Board, id, kClassBoard, c, he, 0.0});
                }
                ok = true;
            }
            if (!ok) throw PackingFailed("synth_scene: could not place object " +
                                         std::to_string(obj));
        }
    }
};

}  // namespace

SynthScene synth_scene(const SceneSpec& spec) {
    if (!spec.include_room && spec.n_boxes + spec.n_cylinders + spec.n_boards < 1)
        throw EmptyInput("synth_scene: nothing to generate");
    SceneBuilder builder(spec);
    if (spec.include_room) builder.add_room();
    builder.place_objects();
    return std::move(builder.scene);
}

std::vector<double> oracle_code(int index, const OracleParams& params) {
    if (index < 0 || index >= 2 * params.embedding_dim)
        throw ConfigError("oracle_code: too many instances for the embedding dimension");
    std::vector<double> code(std::size_t(params.embedding_dim), 0.0);
    int dim = index % params.embedding_dim;
    double sign = index < params.embedding_dim ? 1.0 : -1.0;
    code[std::size_t(dim)] = sign * params.code_scale;
    return code;
}

PredictionSet emit_predictions(const VoxelGrid& grid,
                               const std::vector<InstanceGroundTruth>& gt,
                               const OracleNoiseSpec& noise,
                               const OracleParams& params) {
    const std::size_t n = grid.size();
    std::vector<int> instance_of(n, -1);  // index into gt
    for (std::size_t g = 0; g < gt.size(); ++g)
        for (std::size_t i : gt[g].voxel_indices) {
            if (i >= n) throw AlignmentError("emit_predictions: gt index out of range");
            instance_of[i] = int(g);
        }
    for (std::size_t i = 0; i < n; ++i)
        if (instance_of[i] < 0)
            throw CoverageError("emit_predictions: voxel " + std::to_string(i) +
                                " not covered by ground truth");

    Rng rng(noise.rng_seed);
    PredictionSet preds;
    preds.num_classes = params.num_classes;
    preds.embedding_dim = params.embedding_dim;
    preds.logits.resize(n);
    preds.embeddings.resize(n);
    preds.offsets.resize(n);
    preds.sigma_s.assign(n, params.sigma_s);
    preds.sigma_d.assign(n, params.sigma_d);
    preds.occupancy.resize(n);

    std::vector<const VoxelCell*> cells = grid.cell_list();
    for (std::size_t i = 0; i < n; ++i) {
        const InstanceGroundTruth& inst = gt[std::size_t(instance_of[i])];
        int cls = inst.semantic_class;
        if (cls < 0 || cls >= params.num_classes)
            throw LabelError("emit_predictions: semantic class out of range");

        std::vector<double> logits(std::size_t(params.num_classes), 0.0);
        logits[std::size_t(cls)] = params.logit_margin;
        for (double& v : logits)
            if (noise.sigma_logit > 0.0) v += rng.normal(0.0, noise.sigma_logit);
        preds.logits[i] = std::move(logits);

        int code_index = params.shared_class_codes ? cls : int(instance_of[i]);
        std::vector<double> code = oracle_code(code_index, params);
        for (double& v : code)
            if (noise.sigma_feat > 0.0) v += rng.normal(0.0, noise.sigma_feat);
        preds.embeddings[i] = std::move(code);

        Vec3 off = inst.centroid - cells[i]->centroid;
        if (noise.sigma_off > 0.0)
            off += Vec3(rng.normal(0.0, noise.sigma_off), rng.normal(0.0, noise.sigma_off),
                        rng.normal(0.0, noise.sigma_off));
        preds.offsets[i] = off;

        double occ = std::log(double(inst.voxel_count()));
        if (noise.sigma_occ > 0.0) occ += rng.normal(0.0, noise.sigma_occ);
        preds.occupancy[i] = occ;
    }
    return preds;
}

namespace {
constexpr char kPredMagic[8] = {'O', 'C', 'C', 'U', 'P', 'R', 'D', '1'};
}

void write_predictions(const std::string& path, const PredictionSet& preds) {
    preds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("predictions: cannot open '" + path + "' for writing");
    out.write(kPredMagic, 8);
    std::uint64_t n = preds.size();
    std::uint32_t c = std::uint32_t(preds.num_classes);
    std::uint32_t k = std::uint32_t(preds.embedding_dim);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&c), 4);
    out.write(reinterpret_cast<const char*>(&k), 4);
    auto wd = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (double v : preds.logits[i]) wd(v);
        for (double v : preds.embeddings[i]) wd(v);
        wd(preds.offsets[i].x);
        wd(preds.offsets[i].y);
        wd(preds.offsets[i].z);
        wd(preds.sigma_s[i]);
        wd(preds.sigma_d[i]);
        wd(preds.occupancy[i]);
    }
}

PredictionSet read_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("predictions: cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kPredMagic, 8) != 0)
        throw ParseError("predictions: bad magic in '" + path + "'");
    std::uint64_t n = 0;
    std::uint32_t c = 0, k = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&c), 4);
    in.read(reinterpret_cast<char*>(&k), 4);
    if (!in) throw ParseError("predictions: truncated header in '" + path + "'");

    PredictionSet preds;
    preds.num_classes = int(c);
    preds.embedding_dim = int(k);
    preds.logits.resize(n);
    preds.embeddings.resize(n);
    preds.offsets.resize(n);
    preds.sigma_s.resize(n);
    preds.sigma_d.resize(n);
    preds.occupancy.resize(n);
    auto rd = [&](std::size_t record) {
        double v;
        in.read(reinterpret_cast<char*>(&v), 8);
        if (!in)
            throw ParseError("predictions: truncated record " + std::to_string(record) +
                             " in '" + path + "'");
        return v;
    };
    for (std::size_t i = 0; i < n; ++i) {
        preds.logits[i].resize(c);
        for (auto& v : preds.logits[i]) v = rd(i);
        preds.embeddings[i].resize(k);
        for (auto& v : preds.embeddings[i]) v = rd(i);
        preds.offsets[i] = {rd(i), rd(i), rd(i)};
        preds.sigma_s[i] = rd(i);
        preds.sigma_d[i] = rd(i);
        preds.occupancy[i] = rd(i);
    }
    preds.validate();
    return preds;
}

}  // namespace occuseg
