#pragma once

#include <map>
#include <string>
#include <vector>

#include "occuseg/cluster.hpp"
#include "occuseg/geometry.hpp"

namespace occuseg {

struct EvalInstance {
    int id = 0;
    int semantic_class = kUnlabeled;
    double confidence = 1.0;
    std::vector<std::size_t> voxels;  // sorted voxel indices
};

std::vector<EvalInstance> to_eval_instances(const InstancePrediction& pred);
std::vector<EvalInstance> to_eval_instances(const std::vector<InstanceGroundTruth>& gt);

double instance_iou(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

/// ScanNet-style greedy matching: predictions in descending confidence order
/// (ties by id), each taking the unmatched same-class ground truth with the
/// highest IoU >= threshold (ties by gt id). AP is the area under the
/// precision-recall curve with all-point interpolation.
double average_precision(const std::vector<EvalInstance>& preds,
                         const std::vector<EvalInstance>& gts, int semantic_class,
                         double iou_threshold);

struct CdfSample {
    double x = 0.0;
    double fraction = 0.0;
};

/// Empirical CDF at the given abscissae (defaults to 0:0.01:1, extended to the
/// max value when needed).
std::vector<CdfSample> occupancy_cdf(const std::vector<double>& values,
                                     std::vector<double> abscissae = {});

struct EvalReport {
    double map = 0.0;     // mean over IoU thresholds 0.50:0.05:0.95
    double map50 = 0.0;
    double map25 = 0.0;
    std::map<int, double> per_class_ap;    // averaged over the mAP thresholds
    std::map<int, double> per_class_ap50;
    double mprec = 0.0, mrec = 0.0;        // macro-averaged at IoU 0.5
    std::vector<double> rc_values;
    std::vector<CdfSample> rc_cdf;
    double rc_fraction_at_03 = 0.0;
    std::map<std::string, double> stage_seconds;
};

EvalReport evaluate(const std::vector<EvalInstance>& preds,
                    const std::vector<EvalInstance>& gts);

std::string report_to_json(const EvalReport& report);
std::string report_to_text(const EvalReport& report);

}  // namespace occuseg
