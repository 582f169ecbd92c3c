#include "occuseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace occuseg {

std::vector<EvalInstance> to_eval_instances(const InstancePrediction& pred) {
    std::vector<EvalInstance> out(pred.instances.size());
    for (std::size_t i = 0; i < pred.instances.size(); ++i) {
        out[i].id = int(i);
        out[i].semantic_class = pred.instances[i].semantic_class;
        out[i].confidence = pred.instances[i].confidence;
    }
    for (std::size_t v = 0; v < pred.voxel_instance.size(); ++v)
        if (pred.voxel_instance[v] != kRejected)
            out[std::size_t(pred.voxel_instance[v])].voxels.push_back(v);
    return out;
}

std::vector<EvalInstance> to_eval_instances(const std::vector<InstanceGroundTruth>& gt) {
    std::vector<EvalInstance> out(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        out[i].id = int(i);
        out[i].semantic_class = gt[i].semantic_class;
        out[i].voxels = gt[i].voxel_indices;
        std::sort(out[i].voxels.begin(), out[i].voxels.end());
    }
    return out;
}

double instance_iou(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    if (a.empty() && b.empty()) throw EmptyInstance("instance_iou: both sets empty");
    std::size_t inter = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) ++i;
        else if (b[j] < a[i]) ++j;
        else { ++inter; ++i; ++j; }
    }
    std::size_t uni = a.size() + b.size() - inter;
    return double(inter) / double(uni);
}

namespace {

std::vector<std::size_t> confidence_order(const std::vector<EvalInstance>& preds,
                                          int semantic_class) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i].semantic_class == semantic_class) idx.push_back(i);
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
        if (preds[x].confidence != preds[y].confidence)
            return preds[x].confidence > preds[y].confidence;
        return preds[x].id < preds[y].id;
    });
    return idx;
}

// greedy match flags (tp per prediction in confidence order) and gt count
std::vector<char> greedy_match(const std::vector<EvalInstance>& preds,
                               const std::vector<std::size_t>& order,
                               const std::vector<EvalInstance>& gts,
                               int semantic_class, double iou_threshold) {
    std::vector<std::size_t> gt_idx;
    for (std::size_t g = 0; g < gts.size(); ++g)
        if (gts[g].semantic_class == semantic_class) gt_idx.push_back(g);

    std::vector<char> matched(gts.size(), 0);
    std::vector<char> tp(order.size(), 0);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const EvalInstance& p = preds[order[k]];
        double best_iou = 0.0;
        std::size_t best_g = gts.size();
        for (std::size_t g : gt_idx) {
            if (matched[g]) continue;
            double iou = instance_iou(p.voxels, gts[g].voxels);
            if (iou >= iou_threshold && iou > best_iou) {
                best_iou = iou;
                best_g = g;
            }
        }
        if (best_g < gts.size()) {
            matched[best_g] = 1;
            tp[k] = 1;
        }
    }
    return tp;
}

}  // namespace

double average_precision(const std::vector<EvalInstance>& preds,
                         const std::vector<EvalInstance>& gts, int semantic_class,
                         double iou_threshold) {
    for (const EvalInstance& p : preds)
        if (p.confidence < 0.0 || p.confidence > 1.0)
            throw ConfigError("average_precision: confidence outside [0,1]");

    std::size_t n_gt = 0;
    for (const EvalInstance& g : gts)
        if (g.semantic_class == semantic_class) ++n_gt;
    if (n_gt == 0) throw EmptyInput("average_precision: no ground truth of class");

    std::vector<std::size_t> order = confidence_order(preds, semantic_class);
    if (order.empty()) return 0.0;
    std::vector<char> tp = greedy_match(preds, order, gts, semantic_class, iou_threshold);

    std::vector<double> precision(order.size()), recall(order.size());
    std::size_t cum_tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        cum_tp += tp[k] ? 1 : 0;
        precision[k] = double(cum_tp) / double(k + 1);
        recall[k] = double(cum_tp) / double(n_gt);
    }
    // precision envelope, then sum rectangle areas over recall steps
    for (std::size_t k = precision.size(); k-- > 1;)
        precision[k - 1] = std::max(precision[k - 1], precision[k]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        ap += (recall[k] - prev_recall) * precision[k];
        prev_recall = recall[k];
    }
    return ap;
}

std::vector<CdfSample> occupancy_cdf(const std::vector<double>& values,
                                     std::vector<double> abscissae) {
    if (values.empty()) throw EmptyInput("occupancy_cdf: no values");
    for (double v : values)
        if (v < 0.0) throw ConfigError("occupancy_cdf: negative value");

    if (abscissae.empty()) {
        for (int i = 0; i <= 100; ++i) abscissae.push_back(double(i) / 100.0);
        double mx = *std::max_element(values.begin(), values.end());
        if (mx > 1.0) abscissae.push_back(mx);
    }
    std::sort(abscissae.begin(), abscissae.end());

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<CdfSample> out;
    out.reserve(abscissae.size());
    for (double x : abscissae) {
        auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
        out.push_back({x, double(it - sorted.begin()) / double(sorted.size())});
    }
    return out;
}

EvalReport evaluate(const std::vector<EvalInstance>& preds,
                    const std::vector<EvalInstance>& gts) {
    if (gts.empty()) throw NoGroundTruth("evaluate: no ground truth instances");

    std::set<int> classes;
    for (const EvalInstance& g : gts) classes.insert(g.semantic_class);

    std::vector<double> map_thresholds;
    for (int t = 50; t <= 95; t += 5) map_thresholds.push_back(double(t) / 100.0);

    EvalReport report;
    for (int cls : classes) {
        double sum_ap = 0.0;
        for (double t : map_thresholds) {
            double ap = average_precision(preds, gts, cls, t);
            sum_ap += ap;
            if (t == 0.5) report.per_class_ap50[cls] = ap;
        }
        report.per_class_ap[cls] = sum_ap / double(map_thresholds.size());
        report.map += report.per_class_ap[cls];
        report.map50 += report.per_class_ap50[cls];
        report.map25 += average_precision(preds, gts, cls, 0.25);
    }
    const double inv_c = 1.0 / double(classes.size());
    report.map *= inv_c;
    report.map50 *= inv_c;
    report.map25 *= inv_c;

    // macro precision/recall at IoU 0.5
    for (int cls : classes) {
        std::vector<std::size_t> order = confidence_order(preds, cls);
        std::size_t n_gt = 0;
        for (const EvalInstance& g : gts)
            if (g.semantic_class == cls) ++n_gt;
        std::size_t tps = 0;
        if (!order.empty()) {
            std::vector<char> tp = greedy_match(preds, order, gts, cls, 0.5);
            for (char f : tp) tps += f ? 1 : 0;
        }
        report.mprec += order.empty() ? 0.0 : double(tps) / double(order.size());
        report.mrec += double(tps) / double(n_gt);
    }
    report.mprec *= inv_c;
    report.mrec *= inv_c;
    return report;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["mAP"] = report.map;
    j["mAP@0.5"] = report.map50;
    j["mAP@0.25"] = report.map25;
    j["mPrec"] = report.mprec;
    j["mRec"] = report.mrec;
    nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
    for (const auto& [cls, ap] : report.per_class_ap) {
        nlohmann::ordered_json entry;
        entry["AP"] = ap;
        entry["AP@0.5"] = report.per_class_ap50.at(cls);
        per_class[std::to_string(cls)] = entry;
    }
    j["per_class"] = per_class;
    if (!report.rc_values.empty()) {
        j["R_c"] = report.rc_values;
        nlohmann::ordered_json cdf = nlohmann::ordered_json::array();
        for (const CdfSample& s : report.rc_cdf) cdf.push_back({s.x, s.fraction});
        j["R_c_cdf"] = cdf;
        j["R_c_fraction_at_0.3"] = report.rc_fraction_at_03;
    }
    if (!report.stage_seconds.empty()) {
        nlohmann::ordered_json timings = nlohmann::ordered_json::object();
        for (const auto& [stage, sec] : report.stage_seconds) timings[stage] = sec;
        j["stage_seconds"] = timings;
    }
    return j.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& report) {
    std::ostringstream out;
    out << "metric        value\n";
    out << "mAP           " << report.map << "\n";
    out << "mAP@0.5       " << report.map50 << "\n";
    out << "mAP@0.25      " << report.map25 << "\n";
    out << "mPrec         " << report.mprec << "\n";
    out << "mRec          " << report.mrec << "\n";
    for (const auto& [cls, ap] : report.per_class_ap)
        out << "class " << cls << "  AP " << ap << "  AP@0.5 "
            << report.per_class_ap50.at(cls) << "\n";
    if (!report.rc_values.empty())
        out << "R_c CDF(0.3)  " << report.rc_fraction_at_03 << "\n";
    for (const auto& [stage, sec] : report.stage_seconds)
        out << "time[" << stage << "]  " << sec << " s\n";
    return out.str();
}

}  // namespace occuseg
