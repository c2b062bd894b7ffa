// Segmentation and recognition metrics over predicted versus ground-truth
// segments, per-frame accuracy, report assembly from event logs, and the
// ws/te/deadline sweep machinery.
//
// Protocol (documented in every report): predictions match ground-truth
// segments greedily by descending interval IoU among same-class pairs, each
// side matched at most once. A match counts as a true positive when its IoU
// reaches the threshold (default 0.5). The Jaccard index ignores the threshold
// and averages each ground-truth segment's best same-class IoU. Start/end
// localization scores are max(0, 1 - |offset| / gt_length) over matched pairs,
// zero for unmatched ground truth.
#pragma once

#include "spdmotion/online.hpp"
#include "spdmotion/skeleton.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdmotion {

struct MetricsOptions {
    double iou_threshold = 0.5;
};

struct MetricsReport {
    double jaccard = 0.0;
    double f1 = 0.0;
    double sl_score = 0.0;
    double el_score = 0.0;
    double detection_rate = 0.0;
    double fp_rate = 0.0;
    double prediction_accuracy = 0.0;  // per-frame class accuracy, idle included
    double detection_accuracy = 0.0;   // window-level detector state accuracy
};

inline double interval_iou(const Segment& a, const Segment& b) {
    const long inter = std::min(a.end, b.end) - std::max(a.start, b.start);
    if (inter <= 0) return 0.0;
    const long uni = std::max(a.end, b.end) - std::min(a.start, b.start);
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Greedy one-to-one matching by descending IoU among same-class pairs with
/// IoU >= threshold. Returns (pred index, gt index) pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> greedy_match(
    const std::vector<Segment>& pred, const std::vector<Segment>& gt, double iou_threshold) {
    struct Candidate {
        double iou;
        std::size_t p, g;
    };
    std::vector<Candidate> candidates;
    for (std::size_t p = 0; p < pred.size(); ++p)
        for (std::size_t g = 0; g < gt.size(); ++g)
            if (pred[p].class_id == gt[g].class_id) {
                const double iou = interval_iou(pred[p], gt[g]);
                if (iou >= iou_threshold) candidates.push_back({iou, p, g});
            }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.g != b.g) return a.g < b.g;
        return a.p < b.p;
    });
    std::vector<bool> p_used(pred.size(), false), g_used(gt.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> matches;
    for (const Candidate& c : candidates) {
        if (p_used[c.p] || g_used[c.g]) continue;
        p_used[c.p] = true;
        g_used[c.g] = true;
        matches.emplace_back(c.p, c.g);
    }
    return matches;
}

/// Mean over ground-truth segments of the best same-class IoU with any
/// prediction (no threshold; unmatched ground truth contributes zero).
inline double jaccard_index(const std::vector<Segment>& pred, const std::vector<Segment>& gt) {
    if (gt.empty()) throw std::invalid_argument("jaccard_index: empty ground truth");
    double sum = 0.0;
    for (const Segment& g : gt) {
        double best = 0.0;
        for (const Segment& p : pred)
            if (p.class_id == g.class_id) best = std::max(best, interval_iou(p, g));
        sum += best;
    }
    return sum / static_cast<double>(gt.size());
}

inline double f1_score(const std::vector<Segment>& pred, const std::vector<Segment>& gt,
                       double iou_threshold = 0.5) {
    if (pred.empty() || gt.empty()) return 0.0;
    const auto matches = greedy_match(pred, gt, iou_threshold);
    const double tp = static_cast<double>(matches.size());
    const double precision = tp / static_cast<double>(pred.size());
    const double recall = tp / static_cast<double>(gt.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

/// Start/end localization scores: per matched pair max(0, 1 - |offset| / gt
/// length); unmatched ground truth contributes zero; means over ground truth.
inline std::pair<double, double> sl_el_scores(const std::vector<Segment>& pred,
                                              const std::vector<Segment>& gt,
                                              double iou_threshold = 0.5) {
    if (gt.empty()) throw std::invalid_argument("sl_el_scores: empty ground truth");
    for (const Segment& g : gt)
        if (g.end <= g.start) throw std::invalid_argument("sl_el_scores: zero-length ground truth");
    const auto matches = greedy_match(pred, gt, iou_threshold);
    double sl = 0.0, el = 0.0;
    for (const auto& [p, g] : matches) {
        const double len = static_cast<double>(gt[g].end - gt[g].start);
        sl += std::max(0.0, 1.0 - std::abs(static_cast<double>(pred[p].start - gt[g].start)) / len);
        el += std::max(0.0, 1.0 - std::abs(static_cast<double>(pred[p].end - gt[g].end)) / len);
    }
    return {sl / static_cast<double>(gt.size()), el / static_cast<double>(gt.size())};
}

/// detection rate = matched gt / total gt; false-positive rate = unmatched
/// predictions / total predictions (zero when there are no predictions).
inline std::pair<double, double> detection_rate_fp(const std::vector<Segment>& pred,
                                                   const std::vector<Segment>& gt,
                                                   double iou_threshold = 0.5) {
    const auto matches = greedy_match(pred, gt, iou_threshold);
    const double dr = gt.empty()
                          ? 1.0
                          : static_cast<double>(matches.size()) / static_cast<double>(gt.size());
    const double fp =
        pred.empty() ? 0.0
                     : static_cast<double>(pred.size() - matches.size()) /
                           static_cast<double>(pred.size());
    return {dr, fp};
}

inline double frame_accuracy(const std::vector<int>& pred_labels,
                             const std::vector<int>& gt_labels) {
    if (pred_labels.size() != gt_labels.size())
        throw std::invalid_argument("frame_accuracy: label streams differ in length");
    if (pred_labels.empty()) throw std::invalid_argument("frame_accuracy: empty label streams");
    long hits = 0;
    for (std::size_t i = 0; i < pred_labels.size(); ++i)
        if (pred_labels[i] == gt_labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred_labels.size());
}

constexpr int kNoLabel = -1;

/// Per-frame class labels from a segment list; frames outside any segment get
/// kNoLabel (idle).
inline std::vector<int> frame_labels_from_segments(const std::vector<Segment>& segments,
                                                   long total_frames) {
    std::vector<int> labels(static_cast<std::size_t>(total_frames), kNoLabel);
    for (const Segment& s : segments) {
        const long lo = std::max(0L, s.start);
        const long hi = std::min(total_frames, s.end);
        for (long f = lo; f < hi; ++f) labels[static_cast<std::size_t>(f)] = s.class_id;
    }
    return labels;
}

inline std::vector<Segment> to_segments(const std::vector<SegmentPrediction>& preds) {
    std::vector<Segment> out;
    out.reserve(preds.size());
    for (const SegmentPrediction& p : preds) out.push_back({p.start_frame, p.end_frame, p.class_id});
    return out;
}

/// Full report for one stream's event log against its ground truth.
inline MetricsReport report_from_events(const std::vector<DetectorEvent>& events,
                                        const Annotations& truth, DetectorMode mode,
                                        const MetricsOptions& opt = {}) {
    truth.validate();
    const std::vector<Segment> pred = to_segments(predictions_from_events(events));
    const std::vector<Segment>& gt = truth.segments;

    MetricsReport report;
    report.jaccard = gt.empty() ? 0.0 : jaccard_index(pred, gt);
    report.f1 = f1_score(pred, gt, opt.iou_threshold);
    const auto [sl, el] = gt.empty() ? std::pair<double, double>{0.0, 0.0}
                                     : sl_el_scores(pred, gt, opt.iou_threshold);
    report.sl_score = sl;
    report.el_score = el;
    const auto [dr, fp] = detection_rate_fp(pred, gt, opt.iou_threshold);
    report.detection_rate = dr;
    report.fp_rate = fp;
    report.prediction_accuracy =
        frame_accuracy(frame_labels_from_segments(pred, truth.total_frames),
                       frame_labels_from_segments(gt, truth.total_frames));

    // window-level detector accuracy: state samples against the dominant
    // ground-truth state of their window
    const std::vector<int> gt_states = per_frame_states(truth, mode);
    long window_hits = 0, window_total = 0;
    for (const DetectorEvent& e : events) {
        if (e.kind != EventKind::state_sample) continue;
        const long lo = e.payload.at("window_start").get<long>();
        const long hi = std::min(e.payload.at("window_end").get<long>(), truth.total_frames);
        if (hi <= lo) continue;
        const std::vector<int> window(gt_states.begin() + lo, gt_states.begin() + hi);
        ++window_total;
        if (dominant_label(window) == e.payload.at("state").get<int>()) ++window_hits;
    }
    report.detection_accuracy =
        window_total == 0 ? 0.0
                          : static_cast<double>(window_hits) / static_cast<double>(window_total);
    return report;
}

inline MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("mean_report: no reports");
    MetricsReport m;
    for (const MetricsReport& r : reports) {
        m.jaccard += r.jaccard;
        m.f1 += r.f1;
        m.sl_score += r.sl_score;
        m.el_score += r.el_score;
        m.detection_rate += r.detection_rate;
        m.fp_rate += r.fp_rate;
        m.prediction_accuracy += r.prediction_accuracy;
        m.detection_accuracy += r.detection_accuracy;
    }
    const double n = static_cast<double>(reports.size());
    m.jaccard /= n;
    m.f1 /= n;
    m.sl_score /= n;
    m.el_score /= n;
    m.detection_rate /= n;
    m.fp_rate /= n;
    m.prediction_accuracy /= n;
    m.detection_accuracy /= n;
    return m;
}

inline nlohmann::json report_to_json(const MetricsReport& r, const MetricsOptions& opt = {}) {
    return nlohmann::json{
        {"definitions",
         {{"matching", "greedy one-to-one by descending interval IoU among same-class pairs"},
          {"iou_threshold", opt.iou_threshold},
          {"jaccard", "mean over ground truth of best same-class IoU (no threshold)"},
          {"f1", "2PR/(P+R) with TP = matches at the IoU threshold"},
          {"sl_el", "mean over ground truth of max(0, 1 - |boundary offset| / gt length)"},
          {"detection_rate", "matched ground truth / total ground truth"},
          {"fp_rate", "unmatched predictions / total predictions"},
          {"prediction_accuracy", "per-frame class accuracy, idle counted as a class"},
          {"detection_accuracy", "state samples matching the window's dominant true state"}}},
        {"jaccard", r.jaccard},
        {"f1", r.f1},
        {"sl_score", r.sl_score},
        {"el_score", r.el_score},
        {"detection_rate", r.detection_rate},
        {"fp_rate", r.fp_rate},
        {"prediction_accuracy", r.prediction_accuracy},
        {"detection_accuracy", r.detection_accuracy}};
}

// --- sweeps -------------------------------------------------------------------

struct SweepPoint {
    int ws = 0;
    int te = 0;
    std::optional<double> deadline_s;
};

struct SweepCell {
    SweepPoint point;
    MetricsReport report;
    bool ok = false;
    std::string error;
};

/// Runs the factory for every grid point over every stream and averages the
/// per-stream reports. A failing cell records its error and the sweep goes on.
inline std::vector<SweepCell> run_sweep(
    const std::vector<SweepPoint>& grid,
    const std::vector<std::pair<SkeletonSequence, Annotations>>& streams, DetectorMode mode,
    const std::function<std::vector<DetectorEvent>(const SweepPoint&, const SkeletonSequence&)>&
        engine_run,
    const MetricsOptions& opt = {}) {
    std::vector<SweepCell> cells;
    cells.reserve(grid.size());
    for (const SweepPoint& point : grid) {
        SweepCell cell;
        cell.point = point;
        try {
            std::vector<MetricsReport> reports;
            for (const auto& [seq, truth] : streams)
                reports.push_back(report_from_events(engine_run(point, seq), truth, mode, opt));
            cell.report = mean_report(reports);
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
        cells.push_back(std::move(cell));
    }
    return cells;
}

inline std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::ostringstream out;
    out << "ws,te,deadline_s,jaccard,f1,sl_score,el_score,detection_rate,fp_rate,"
           "prediction_accuracy,detection_accuracy,error\n";
    out.precision(10);
    for (const SweepCell& c : cells) {
        out << c.point.ws << ',' << c.point.te << ',';
        if (c.point.deadline_s) out << *c.point.deadline_s;
        out << ',';
        if (c.ok) {
            const MetricsReport& r = c.report;
            out << r.jaccard << ',' << r.f1 << ',' << r.sl_score << ',' << r.el_score << ','
                << r.detection_rate << ',' << r.fp_rate << ',' << r.prediction_accuracy << ','
                << r.detection_accuracy << ',';
        } else {
            out << ",,,,,,,,";
        }
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << err << '\n';
    }
    return out.str();
}

}  // namespace spdmotion
