// Independent brute-force metric implementations used to cross-check the
// production metrics. Built on explicit frame sets and counting loops; kept
// deliberately separate from the implementations under test.
#pragma once

#include "spdmotion/metrics.hpp"

#include <algorithm>
#include <set>
#include <vector>

namespace metrics_oracle {

using spdmotion::Segment;

inline std::set<long> frames_of(const Segment& s) {
    std::set<long> out;
    for (long f = s.start; f < s.end; ++f) out.insert(f);
    return out;
}

inline double iou(const Segment& a, const Segment& b) {
    const std::set<long> fa = frames_of(a), fb = frames_of(b);
    long inter = 0;
    for (long f : fa)
        if (fb.count(f)) ++inter;
    const std::size_t uni = fa.size() + fb.size() - static_cast<std::size_t>(inter);
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double jaccard(const std::vector<Segment>& pred, const std::vector<Segment>& gt) {
    double sum = 0.0;
    for (const Segment& g : gt) {
        double best = 0.0;
        for (const Segment& p : pred)
            if (p.class_id == g.class_id) best = std::max(best, iou(p, g));
        sum += best;
    }
    return sum / static_cast<double>(gt.size());
}

inline std::vector<std::pair<std::size_t, std::size_t>> match(const std::vector<Segment>& pred,
                                                              const std::vector<Segment>& gt,
                                                              double threshold) {
    struct Cand {
        double v;
        std::size_t p, g;
    };
    std::vector<Cand> cands;
    for (std::size_t p = 0; p < pred.size(); ++p)
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (pred[p].class_id != gt[g].class_id) continue;
            const double v = iou(pred[p], gt[g]);
            if (v >= threshold) cands.push_back({v, p, g});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.v != b.v) return a.v > b.v;
        if (a.g != b.g) return a.g < b.g;
        return a.p < b.p;
    });
    std::set<std::size_t> pu, gu;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const Cand& c : cands) {
        if (pu.count(c.p) || gu.count(c.g)) continue;
        pu.insert(c.p);
        gu.insert(c.g);
        out.emplace_back(c.p, c.g);
    }
    return out;
}

}  // namespace metrics_oracle
