#pragma once

#include <optional>
#include <string>

#include "occuseg/config.hpp"
#include "occuseg/eval.hpp"
#include "occuseg/oracle.hpp"
#include "occuseg/ply.hpp"

namespace occuseg {

struct PipelineInputs {
    std::string input_ply;          // empty: synthesize from config.scene
    std::string predictions_file;   // empty: emit oracle predictions
};

struct PipelineOutputs {
    std::string output_dir;         // empty: keep everything in memory
};

struct PipelineResult {
    VoxelGrid grid;
    std::vector<InstanceGroundTruth> gt;
    SuperVoxelPartition partition;
    PredictionSet preds;
    InstancePrediction prediction;
    EvalReport report;
};

/// Full pipeline: scene -> voxelize -> predictions -> supervoxels ->
/// clustering -> evaluation. Stage wall-clock timings land in the report.
/// With an output_dir, writes supervoxels.ply, instances.ply, manifest.json,
/// report.json, report.txt and predictions.bin.
PipelineResult run_pipeline(const PipelineConfig& config,
                            const PipelineInputs& inputs = {},
                            const PipelineOutputs& outputs = {});

std::string instance_manifest_json(const InstancePrediction& pred);

}  // namespace occuseg
