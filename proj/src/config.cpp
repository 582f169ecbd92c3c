#include "occuseg/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace occuseg {

using nlohmann::ordered_json;

void PipelineConfig::validate() const {
    auto require = [](bool ok, const char* field) {
        if (!ok) throw ConfigError(std::string("config: invalid value for ") + field);
    };
    require(resolution > 0.0, "resolution");
    require(supervoxel_k > 0.0, "supervoxel.k");
    require(supervoxel_min_size >= 1, "supervoxel.min_size");
    require(adjacency.connectivity == 6 || adjacency.connectivity == 18 ||
                adjacency.connectivity == 26,
            "supervoxel.connectivity");
    require(adjacency.alpha >= 0.0, "supervoxel.alpha");
    require(adjacency.beta >= 0.0, "supervoxel.beta");
    require(adjacency.gamma_concave > 0.0, "supervoxel.gamma_concave");
    require(cluster.t0 > 0.0 && cluster.t0 < 2.0, "cluster.t0");
    require(cluster.ratio_min > 0.0 && cluster.ratio_min < cluster.ratio_max,
            "cluster.ratio_min");
    require(losses.delta_v > 0.0, "losses.delta_v");
    require(losses.delta_d > 0.0, "losses.delta_d");
    require(oracle.num_classes > int(kClassBoard), "oracle.num_classes");
    require(oracle.embedding_dim >= 1, "oracle.embedding_dim");
    require(oracle.sigma_s > 0.0, "oracle.sigma_s");
    require(oracle.sigma_d > 0.0, "oracle.sigma_d");
    require(noise.sigma_feat >= 0.0, "noise.sigma_feat");
    require(noise.sigma_off >= 0.0, "noise.sigma_off");
    require(noise.sigma_occ >= 0.0, "noise.sigma_occ");
    require(noise.sigma_logit >= 0.0, "noise.sigma_logit");
    require(scene.room_width > 0.0 && scene.room_depth > 0.0 && scene.room_height > 0.0,
            "scene.room");
    require(scene.sample_spacing > 0.0, "scene.sample_spacing");
}

std::string config_to_json(const PipelineConfig& c) {
    ordered_json j;
    j["resolution"] = c.resolution;
    j["seed"] = c.seed;
    j["supervoxel"] = {{"k", c.supervoxel_k},
                       {"min_size", c.supervoxel_min_size},
                       {"connectivity", c.adjacency.connectivity},
                       {"alpha", c.adjacency.alpha},
                       {"beta", c.adjacency.beta},
                       {"gamma_concave", c.adjacency.gamma_concave}};
    j["cluster"] = {{"t0", c.cluster.t0},
                    {"use_occupancy", c.cluster.use_occupancy},
                    {"semantic_gating", c.cluster.semantic_gating},
                    {"apply_ratio_filter", c.cluster.apply_ratio_filter},
                    {"ratio_min", c.cluster.ratio_min},
                    {"ratio_max", c.cluster.ratio_max},
                    {"min_voxels", c.cluster.min_voxels}};
    j["losses"] = {{"delta_v", c.losses.delta_v},
                   {"delta_d", c.losses.delta_d},
                   {"prob_clamp", c.losses.prob_clamp}};
    j["oracle"] = {{"num_classes", c.oracle.num_classes},
                   {"embedding_dim", c.oracle.embedding_dim},
                   {"code_scale", c.oracle.code_scale},
                   {"logit_margin", c.oracle.logit_margin},
                   {"sigma_s", c.oracle.sigma_s},
                   {"sigma_d", c.oracle.sigma_d},
                   {"shared_class_codes", c.oracle.shared_class_codes}};
    j["noise"] = {{"sigma_feat", c.noise.sigma_feat},
                  {"sigma_off", c.noise.sigma_off},
                  {"sigma_occ", c.noise.sigma_occ},
                  {"sigma_logit", c.noise.sigma_logit},
                  {"rng_seed", c.noise.rng_seed}};
    j["scene"] = {{"room_width", c.scene.room_width},
                  {"room_depth", c.scene.room_depth},
                  {"room_height", c.scene.room_height},
                  {"n_boxes", c.scene.n_boxes},
                  {"n_cylinders", c.scene.n_cylinders},
                  {"n_boards", c.scene.n_boards},
                  {"include_room", c.scene.include_room},
                  {"sample_spacing", c.scene.sample_spacing},
                  {"surface_gap", c.scene.surface_gap},
                  {"float_height", c.scene.float_height},
                  {"clearance", c.scene.clearance},
                  {"min_side", c.scene.min_side},
                  {"max_side", c.scene.max_side},
                  {"min_height", c.scene.min_height},
                  {"max_height", c.scene.max_height},
                  {"adjacent_pairs", c.scene.adjacent_pairs},
                  {"seed", c.scene.seed}};
    return j.dump(2) + "\n";
}

namespace {

template <typename T>
void get_field(const ordered_json& j, const std::string& section, const char* key,
               T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: invalid value for " + section + "." + key);
    }
}

}  // namespace

PipelineConfig config_from_json(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }

    PipelineConfig c;
    get_field(j, "", "resolution", c.resolution);
    get_field(j, "", "seed", c.seed);
    if (j.contains("supervoxel")) {
        const auto& s = j["supervoxel"];
        get_field(s, "supervoxel", "k", c.supervoxel_k);
        get_field(s, "supervoxel", "min_size", c.supervoxel_min_size);
        get_field(s, "supervoxel", "connectivity", c.adjacency.connectivity);
        get_field(s, "supervoxel", "alpha", c.adjacency.alpha);
        get_field(s, "supervoxel", "beta", c.adjacency.beta);
        get_field(s, "supervoxel", "gamma_concave", c.adjacency.gamma_concave);
    }
    if (j.contains("cluster")) {
        const auto& s = j["cluster"];
        get_field(s, "cluster", "t0", c.cluster.t0);
        get_field(s, "cluster", "use_occupancy", c.cluster.use_occupancy);
        get_field(s, "cluster", "semantic_gating", c.cluster.semantic_gating);
        get_field(s, "cluster", "apply_ratio_filter", c.cluster.apply_ratio_filter);
        get_field(s, "cluster", "ratio_min", c.cluster.ratio_min);
        get_field(s, "cluster", "ratio_max", c.cluster.ratio_max);
        get_field(s, "cluster", "min_voxels", c.cluster.min_voxels);
    }
    if (j.contains("losses")) {
        const auto& s = j["losses"];
        get_field(s, "losses", "delta_v", c.losses.delta_v);
        get_field(s, "losses", "delta_d", c.losses.delta_d);
        get_field(s, "losses", "prob_clamp", c.losses.prob_clamp);
    }
    if (j.contains("oracle")) {
        const auto& s = j["oracle"];
        get_field(s, "oracle", "num_classes", c.oracle.num_classes);
        get_field(s, "oracle", "embedding_dim", c.oracle.embedding_dim);
        get_field(s, "oracle", "code_scale", c.oracle.code_scale);
        get_field(s, "oracle", "logit_margin", c.oracle.logit_margin);
        get_field(s, "oracle", "sigma_s", c.oracle.sigma_s);
        get_field(s, "oracle", "sigma_d", c.oracle.sigma_d);
        get_field(s, "oracle", "shared_class_codes", c.oracle.shared_class_codes);
    }
    if (j.contains("noise")) {
        const auto& s = j["noise"];
        get_field(s, "noise", "sigma_feat", c.noise.sigma_feat);
        get_field(s, "noise", "sigma_off", c.noise.sigma_off);
        get_field(s, "noise", "sigma_occ", c.noise.sigma_occ);
        get_field(s, "noise", "sigma_logit", c.noise.sigma_logit);
        get_field(s, "noise", "rng_seed", c.noise.rng_seed);
    }
    if (j.contains("scene")) {
        const auto& s = j["scene"];
        get_field(s, "scene", "room_width", c.scene.room_width);
        get_field(s, "scene", "room_depth", c.scene.room_depth);
        get_field(s, "scene", "room_height", c.scene.room_height);
        get_field(s, "scene", "n_boxes", c.scene.n_boxes);
        get_field(s, "scene", "n_cylinders", c.scene.n_cylinders);
        get_field(s, "scene", "n_boards", c.scene.n_boards);
        get_field(s, "scene", "include_room", c.scene.include_room);
        get_field(s, "scene", "sample_spacing", c.scene.sample_spacing);
        get_field(s, "scene", "surface_gap", c.scene.surface_gap);
        get_field(s, "scene", "float_height", c.scene.float_height);
        get_field(s, "scene", "clearance", c.scene.clearance);
        get_field(s, "scene", "min_side", c.scene.min_side);
        get_field(s, "scene", "max_side", c.scene.max_side);
        get_field(s, "scene", "min_height", c.scene.min_height);
        get_field(s, "scene", "max_height", c.scene.max_height);
        get_field(s, "scene", "adjacent_pairs", c.scene.adjacent_pairs);
        get_field(s, "scene", "seed", c.scene.seed);
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

void save_config(const std::string& path, const PipelineConfig& config) {
    std::ofstream out(path);
    if (!out) throw ParseError("config: cannot open '" + path + "' for writing");
    out << config_to_json(config);
}

}  // namespace occuseg
