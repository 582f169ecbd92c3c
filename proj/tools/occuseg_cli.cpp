#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "occuseg/gradcheck.hpp"
#include "occuseg/pipeline.hpp"

namespace {

using namespace occuseg;

PipelineConfig load_or_default(const std::string& path) {
    if (path.empty()) return PipelineConfig{};
    return load_config(path);
}

// Groups a labeled cloud into eval instances; the point index is the voxel id.
std::vector<EvalInstance> instances_from_cloud(const PointCloud& cloud,
                                               const std::string& what) {
    if (!cloud.has_instances())
        throw NoGroundTruth(what + ": no instance labels in PLY");
    std::map<int, EvalInstance> by_id;
    std::map<int, std::map<int, int>> votes;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        int id = cloud.instance_labels[i];
        if (id == kUnlabeled) continue;
        EvalInstance& inst = by_id[id];
        inst.id = id;
        inst.voxels.push_back(i);
        if (cloud.has_semantics()) votes[id][cloud.semantic_labels[i]]++;
    }
    if (by_id.empty()) throw NoGroundTruth(what + ": all points unlabeled");
    std::vector<EvalInstance> out;
    for (auto& [id, inst] : by_id) {
        int best = kUnlabeled, best_n = 0;
        for (const auto& [cls, n] : votes[id])
            if (cls != kUnlabeled && n > best_n) { best = cls; best_n = n; }
        inst.semantic_class = best;
        out.push_back(std::move(inst));
    }
    return out;
}

void apply_manifest(std::vector<EvalInstance>& preds, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("eval: cannot open manifest '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("eval: manifest: " + std::string(e.what()));
    }
    std::map<int, std::pair<int, double>> info;  // id -> (class, confidence)
    for (const auto& e : j)
        info[e.at("id").get<int>()] = {e.at("class").get<int>(),
                                       e.at("confidence").get<double>()};
    for (EvalInstance& p : preds) {
        auto it = info.find(p.id);
        if (it == info.end()) continue;
        p.semantic_class = it->second.first;
        p.confidence = it->second.second;
    }
}

int cmd_synth(const std::string& config_path, std::uint64_t seed, bool has_seed,
              const std::string& out, bool ascii) {
    PipelineConfig config = load_or_default(config_path);
    SceneSpec scene = config.scene;
    if (has_seed) scene.seed = seed;
    SynthScene s = synth_scene(scene);
    write_ply(out, s.cloud, {}, ascii ? PlyFormat::Ascii : PlyFormat::BinaryLittleEndian);
    std::cout << "points " << s.cloud.size() << "\ninstances " << s.shapes.size()
              << "\nwrote " << out << "\n";
    return 0;
}

int cmd_voxelize(const std::string& in, double res, const std::string& out) {
    PointCloud cloud = read_ply(in).cloud;
    VoxelGrid grid = voxelize(cloud, res);
    std::cout << "points " << cloud.size() << "\ncells " << grid.size() << "\n";
    if (!out.empty()) {
        write_ply(out, grid_to_cloud(grid));
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_segment(const std::string& in, const std::string& config_path,
                const std::string& out) {
    PipelineConfig config = load_or_default(config_path);
    PointCloud cloud = read_ply(in).cloud;
    VoxelGrid grid = voxelize(cloud, config.resolution);
    auto edges = build_adjacency(grid, config.adjacency);
    SuperVoxelPartition part =
        segment(edges, grid.size(), config.supervoxel_k, config.supervoxel_min_size);
    std::cout << "cells " << grid.size() << "\nsupervoxels " << part.segment_count()
              << "\n";
    if (!out.empty()) {
        PlyExtras extras;
        extras.segment.assign(part.assignment.begin(), part.assignment.end());
        write_ply(out, grid_to_cloud(grid), extras);
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_cluster(const std::string& in, const std::string& pred,
                const std::string& config_path, std::uint64_t seed, bool has_seed,
                const std::string& out_dir) {
    PipelineConfig config = load_or_default(config_path);
    if (has_seed) config.seed = seed;
    PipelineInputs inputs;
    inputs.input_ply = in;
    inputs.predictions_file = pred;
    PipelineResult res = run_pipeline(config, inputs, {out_dir});
    std::cout << "cells " << res.grid.size() << "\nsupervoxels "
              << res.partition.segment_count() << "\ninstances "
              << res.prediction.instances.size() << "\nmAP " << res.report.map
              << "\nmAP@0.5 " << res.report.map50 << "\n";
    if (!out_dir.empty()) std::cout << "wrote " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& manifest, const std::string& predictions_bin,
             const std::string& out_json, const std::string& out_text,
             const std::string& cdf_out) {
    PointCloud pred_cloud = read_ply(pred_path).cloud;
    PointCloud gt_cloud = read_ply(gt_path).cloud;
    if (pred_cloud.size() != gt_cloud.size())
        throw AlignmentError("eval: prediction and gt PLYs have different point counts");

    std::vector<EvalInstance> preds = instances_from_cloud(pred_cloud, "prediction");
    std::vector<EvalInstance> gts = instances_from_cloud(gt_cloud, "gt");
    if (!manifest.empty()) apply_manifest(preds, manifest);

    EvalReport report = evaluate(preds, gts);
    if (!predictions_bin.empty()) {
        PredictionSet ps = read_predictions(predictions_bin);
        if (ps.size() != gt_cloud.size())
            throw AlignmentError("eval: predictions file does not match the gt PLY");
        for (const EvalInstance& g : gts) {
            std::vector<double> occ;
            for (std::size_t i : g.voxels) occ.push_back(ps.occupancy[i]);
            report.rc_values.push_back(relative_error(occ, g.voxels.size()));
        }
        report.rc_cdf = occupancy_cdf(report.rc_values);
        for (const CdfSample& s : report.rc_cdf)
            if (s.x == 0.3) report.rc_fraction_at_03 = s.fraction;
    }

    std::cout << report_to_text(report);
    if (!out_json.empty()) std::ofstream(out_json) << report_to_json(report);
    if (!out_text.empty()) std::ofstream(out_text) << report_to_text(report);
    if (!cdf_out.empty()) {
        if (report.rc_cdf.empty())
            throw ConfigError("eval: --cdf-out requires --predictions");
        std::ofstream csv(cdf_out);
        csv << "x,fraction\n";
        for (const CdfSample& s : report.rc_cdf) csv << s.x << "," << s.fraction << "\n";
    }
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, int trials, double tol) {
    GradCheckReport report = run_gradient_checks(seed, trials, tol);
    std::cout << gradcheck_to_text(report);
    return report.all_pass() ? 0 : 1;
}

int cmd_bench(const std::string& config_path, std::size_t target_voxels, int seeds,
              int jobs, const std::string& out_dir) {
    PipelineConfig base = load_or_default(config_path);
    // size the room so floor + walls alone reach the voxel target
    double res = base.resolution;
    double h = base.scene.room_height;
    double area = double(target_voxels) * res * res;
    double side = std::sqrt(4.0 * h * h + area) - 2.0 * h;  // s^2 + 4sh = area
    base.scene.room_width = base.scene.room_depth = std::max(side, 1.0);
    base.scene.include_room = true;
    // small rooms cannot hold the default object count
    double usable = std::max(0.0, base.scene.room_width - 2.0 * 0.26);
    int capacity = int(usable * usable / 0.5);
    base.scene.n_boxes = std::min(base.scene.n_boxes, capacity);
    base.scene.n_cylinders = std::min(base.scene.n_cylinders, std::max(0, capacity - base.scene.n_boxes));

    struct Run {
        EvalReport report;
        std::size_t cells = 0;
        std::size_t instances = 0;
    };
    std::vector<Run> runs(static_cast<std::size_t>(seeds));
    std::vector<std::string> errors(static_cast<std::size_t>(seeds));

    auto work = [&](int s) {
        try {
            PipelineConfig config = base;
            config.seed = base.seed + std::uint64_t(s);
            PipelineOutputs outputs;
            if (!out_dir.empty()) outputs.output_dir = out_dir + "/seed" + std::to_string(s);
            PipelineResult res = run_pipeline(config, {}, outputs);
            runs[std::size_t(s)] = {res.report, res.grid.size(),
                                    res.prediction.instances.size()};
        } catch (const std::exception& e) {
            errors[std::size_t(s)] = e.what();
        }
    };

    jobs = std::max(1, jobs);
    for (int start = 0; start < seeds; start += jobs) {
        std::vector<std::thread> pool;
        for (int s = start; s < std::min(seeds, start + jobs); ++s)
            pool.emplace_back(work, s);
        for (std::thread& t : pool) t.join();
    }

    double map_sum = 0.0;
    for (int s = 0; s < seeds; ++s) {
        if (!errors[std::size_t(s)].empty())
            throw Error("bench: seed " + std::to_string(s) + ": " + errors[std::size_t(s)]);
        const Run& r = runs[std::size_t(s)];
        std::cout << "seed " << s << "  cells " << r.cells << "  instances "
                  << r.instances << "  mAP " << r.report.map << "\n";
        for (const auto& [stage, sec] : r.report.stage_seconds)
            std::cout << "  time[" << stage << "] " << sec << " s\n";
        double core = r.report.stage_seconds.at("supervoxel") +
                      r.report.stage_seconds.at("clustering");
        std::cout << "  supervoxel+clustering " << core << " s\n";
        map_sum += r.report.map;
    }
    std::cout << "mean mAP " << map_sum / double(seeds) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"occupancy-aware 3D instance segmentation pipeline"};
    app.require_subcommand(1);

    std::string config_path, in, out, out_dir, pred, gt, manifest, predictions_bin;
    std::string out_json, out_text, cdf_out;
    std::uint64_t seed = 1;
    double res = 0.02, tol = 1e-4;
    int trials = 100, seeds = 1, jobs = 1;
    std::size_t target_voxels = 100000;
    bool ascii = false;

    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled scene");
    synth->add_option("--config", config_path, "pipeline config JSON");
    auto* synth_seed = synth->add_option("--seed", seed, "scene seed");
    synth->add_option("--out", out, "output PLY")->required();
    synth->add_flag("--ascii", ascii, "write ASCII PLY");

    auto* vox = app.add_subcommand("voxelize", "voxelize a point cloud");
    vox->add_option("--in", in, "input PLY")->required();
    vox->add_option("--res", res, "voxel resolution (m)");
    vox->add_option("--out", out, "output grid PLY (one point per cell)");

    auto* seg = app.add_subcommand("segment", "supervoxel segmentation");
    seg->add_option("--in", in, "input PLY")->required();
    seg->add_option("--config", config_path, "pipeline config JSON");
    seg->add_option("--out", out, "output PLY with segment property");

    auto* clu = app.add_subcommand("cluster", "full clustering pipeline");
    clu->add_option("--in", in, "input PLY (omit to synthesize from config)");
    clu->add_option("--pred", pred, "predictions binary (omit to use the oracle)");
    clu->add_option("--config", config_path, "pipeline config JSON");
    auto* clu_seed = clu->add_option("--seed", seed, "pipeline seed");
    clu->add_option("--out-dir", out_dir, "output directory");

    auto* ev = app.add_subcommand("eval", "evaluate a prediction PLY against gt");
    ev->add_option("--pred", pred, "prediction PLY (instance property)")->required();
    ev->add_option("--gt", gt, "ground-truth PLY (instance property)")->required();
    ev->add_option("--manifest", manifest, "instance manifest JSON (class/confidence)");
    ev->add_option("--predictions", predictions_bin, "predictions binary for R_c");
    ev->add_option("--out", out_json, "report JSON path");
    ev->add_option("--text", out_text, "report text path");
    ev->add_option("--cdf-out", cdf_out, "R_c CDF samples CSV");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gc->add_option("--seed", seed, "rng seed");
    gc->add_option("--trials", trials, "random instances to test");
    gc->add_option("--tol", tol, "relative error tolerance");

    auto* bench = app.add_subcommand("bench", "timing benchmark on large scenes");
    bench->add_option("--config", config_path, "pipeline config JSON");
    bench->add_option("--voxels", target_voxels, "target voxel count");
    bench->add_option("--seeds", seeds, "number of scenes");
    bench->add_option("--jobs", jobs, "parallel scenes");
    bench->add_option("--out-dir", out_dir, "write per-scene artifacts here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth(config_path, seed, synth_seed->count() > 0, out, ascii);
        if (vox->parsed()) return cmd_voxelize(in, res, out);
        if (seg->parsed()) return cmd_segment(in, config_path, out);
        if (clu->parsed())
            return cmd_cluster(in, pred, config_path, seed, clu_seed->count() > 0, out_dir);
        if (ev->parsed())
            return cmd_eval(pred, gt, manifest, predictions_bin, out_json, out_text, cdf_out);
        if (gc->parsed()) return cmd_gradcheck(seed, trials, tol);
        if (bench->parsed())
            return cmd_bench(config_path, target_voxels, seeds, jobs, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
