// Skeleton sequence representation and the transforms feeding the network:
// normalization, resampling, derivatives, hand/body partitioning, subsequence
// splitting, and labeled window extraction for detector training.
#pragma once

#include "spdmotion/rng.hpp"
#include "spdmotion/spd_ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdmotion {

enum class LayoutKind { hand, body, custom };

inline std::string to_string(LayoutKind k) {
    switch (k) {
        case LayoutKind::hand: return "hand";
        case LayoutKind::body: return "body";
        default: return "custom";
    }
}

inline LayoutKind layout_kind_from_string(const std::string& s) {
    if (s == "hand") return LayoutKind::hand;
    if (s == "body") return LayoutKind::body;
    if (s == "custom") return LayoutKind::custom;
    throw std::invalid_argument("unknown layout kind: " + s);
}

struct JointLayout {
    int joint_count = 0;
    LayoutKind kind = LayoutKind::custom;
    std::vector<std::string> names;  // optional, empty when unnamed

    void validate() const {
        if (joint_count < 2) throw std::invalid_argument("JointLayout: joint_count must be >= 2");
        if (!names.empty() && static_cast<int>(names.size()) != joint_count)
            throw std::invalid_argument("JointLayout: name count mismatch");
    }
};

/// One frame: joint_count x 3 coordinates.
using Frame = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct SkeletonSequence {
    std::vector<Frame> frames;
    double capture_rate = 0.0;  // frames per second
    JointLayout layout;

    Eigen::Index length() const { return static_cast<Eigen::Index>(frames.size()); }

    void validate() const {
        layout.validate();
        if (capture_rate <= 0.0)
            throw std::invalid_argument("SkeletonSequence: capture_rate must be positive");
        if (frames.empty()) throw std::invalid_argument("SkeletonSequence: empty sequence");
        for (const Frame& f : frames)
            if (f.rows() != layout.joint_count)
                throw std::invalid_argument("SkeletonSequence: frame joint count mismatch");
    }
};

/// Ordered joint-index chains; parts may share junction joints.
struct PartitionScheme {
    std::vector<std::vector<int>> parts;

    void validate(const JointLayout& layout) const {
        if (parts.empty()) throw std::invalid_argument("PartitionScheme: no parts");
        for (const auto& part : parts) {
            if (part.empty()) throw std::invalid_argument("PartitionScheme: empty part");
            for (int idx : part)
                if (idx < 0 || idx >= layout.joint_count)
                    throw std::invalid_argument("PartitionScheme: joint index out of range");
        }
    }
};

/// Per-part matrix view of a sequence: for each part with m joints, one m x 3
/// coordinate matrix per frame, aligned with the source frames.
struct PartitionedSequence {
    std::vector<std::vector<Frame>> parts;  // parts[p][frame] is m_p x 3
};

inline PartitionedSequence partition(const SkeletonSequence& seq, const PartitionScheme& scheme) {
    scheme.validate(seq.layout);
    PartitionedSequence out;
    out.parts.resize(scheme.parts.size());
    for (std::size_t p = 0; p < scheme.parts.size(); ++p) {
        const auto& idx = scheme.parts[p];
        out.parts[p].reserve(seq.frames.size());
        for (const Frame& f : seq.frames) {
            Frame part(static_cast<Eigen::Index>(idx.size()), 3);
            for (std::size_t i = 0; i < idx.size(); ++i) part.row(static_cast<Eigen::Index>(i)) = f.row(idx[i]);
            out.parts[p].push_back(std::move(part));
        }
    }
    return out;
}

// --- joint-index conventions ------------------------------------------------
//
// Hand, 22 joints: 0 wrist, 1 palm, then four joints per finger from base to
// tip: thumb 2-5, index 6-9, middle 10-13, ring 14-17, pinky 18-21. Each part
// is one finger chain rooted at the wrist and palm, so the five parts are
// pairwise disjoint except for the shared {wrist, palm} root.
//
// Body, 25 joints (depth-sensor convention): 0 spine_base, 1 spine_mid,
// 2 neck, 3 head, 4 shoulder_l, 5 elbow_l, 6 wrist_l, 7 hand_l, 8 shoulder_r,
// 9 elbow_r, 10 wrist_r, 11 hand_r, 12 hip_l, 13 knee_l, 14 ankle_l,
// 15 foot_l, 16 hip_r, 17 knee_r, 18 ankle_r, 19 foot_r, 20 spine_shoulder,
// 21 hand_tip_l, 22 thumb_l, 23 hand_tip_r, 24 thumb_r.
//
// Body, 21 joints (mocap convention): 0 hips, 1 spine, 2 spine1, 3 spine2,
// 4 spine3, 5 neck, 6 head, 7 shoulder_l, 8 arm_l, 9 forearm_l, 10 hand_l,
// 11 shoulder_r, 12 arm_r, 13 forearm_r, 14 hand_r, 15 upleg_l, 16 leg_l,
// 17 foot_l, 18 upleg_r, 19 leg_r, 20 foot_r.
//
// Both body conventions split into four chains ordered head-down / spine-down:
// upper-right (head to right palm), upper-left (head to left palm),
// lower-right (spine to right foot), lower-left (spine to left foot).

constexpr int kHandJointCount = 22;
constexpr int kBody25JointCount = 25;
constexpr int kBody21JointCount = 21;

/// Skeleton graph edges for the documented conventions (used to check that
/// partition chains are connected paths).
inline std::vector<std::pair<int, int>> skeleton_edges(LayoutKind kind, int joint_count) {
    if (kind == LayoutKind::hand && joint_count == kHandJointCount) {
        std::vector<std::pair<int, int>> e{{0, 1}};
        for (int f = 0; f < 5; ++f) {
            const int base = 2 + 4 * f;
            e.emplace_back(1, base);
            e.emplace_back(base, base + 1);
            e.emplace_back(base + 1, base + 2);
            e.emplace_back(base + 2, base + 3);
        }
        return e;
    }
    if (kind == LayoutKind::body && joint_count == kBody25JointCount) {
        return {{3, 2},  {2, 20},  {20, 8},  {8, 9},   {9, 10},  {10, 11},
                {20, 4}, {4, 5},   {5, 6},   {6, 7},   {20, 1},  {1, 0},
                {0, 16}, {16, 17}, {17, 18}, {18, 19}, {0, 12},  {12, 13},
                {13, 14}, {14, 15}, {7, 21},  {7, 22},  {11, 23}, {11, 24}};
    }
    if (kind == LayoutKind::body && joint_count == kBody21JointCount) {
        return {{6, 5},  {5, 4},   {4, 3},   {3, 2},   {2, 1},   {1, 0},
                {4, 11}, {11, 12}, {12, 13}, {13, 14}, {4, 7},   {7, 8},
                {8, 9},  {9, 10},  {0, 18},  {18, 19}, {19, 20}, {0, 15},
                {15, 16}, {16, 17}};
    }
    throw std::invalid_argument("no documented skeleton graph for this layout");
}

/// Five parts, one per finger, each rooted at the shared wrist and palm.
inline PartitionScheme hand_partition(const JointLayout& layout) {
    if (layout.kind != LayoutKind::hand)
        throw std::invalid_argument("hand_partition: layout kind is not hand");
    if (layout.joint_count != kHandJointCount)
        throw std::invalid_argument("hand_partition: expected the 22-joint hand convention");
    PartitionScheme scheme;
    for (int f = 0; f < 5; ++f) {
        const int base = 2 + 4 * f;
        scheme.parts.push_back({0, 1, base, base + 1, base + 2, base + 3});
    }
    return scheme;
}

/// Four chains: upper-right, upper-left (head down to each palm), lower-right,
/// lower-left (spine down each leg).
inline PartitionScheme body_partition(const JointLayout& layout) {
    if (layout.kind != LayoutKind::body)
        throw std::invalid_argument("body_partition: layout kind is not body");
    if (layout.joint_count == kBody25JointCount) {
        return PartitionScheme{{
            {3, 2, 20, 8, 9, 10, 11},    // head -> right palm
            {3, 2, 20, 4, 5, 6, 7},      // head -> left palm
            {20, 1, 0, 16, 17, 18, 19},  // spine -> right foot
            {20, 1, 0, 12, 13, 14, 15},  // spine -> left foot
        }};
    }
    if (layout.joint_count == kBody21JointCount) {
        return PartitionScheme{{
            {6, 5, 4, 11, 12, 13, 14},
            {6, 5, 4, 7, 8, 9, 10},
            {4, 3, 2, 1, 0, 18, 19, 20},
            {4, 3, 2, 1, 0, 15, 16, 17},
        }};
    }
    throw std::invalid_argument("body_partition: expected the 25- or 21-joint body convention");
}

// --- sequence transforms -----------------------------------------------------

/// Translate each frame so the root joint sits at the origin, then scale the
/// whole sequence so the mean pairwise joint distance over the sequence is 1.
inline SkeletonSequence normalize(const SkeletonSequence& seq, int root_joint = 0) {
    seq.validate();
    if (root_joint < 0 || root_joint >= seq.layout.joint_count)
        throw std::invalid_argument("normalize: root joint out of range");
    SkeletonSequence out = seq;
    for (Frame& f : out.frames) {
        const Eigen::RowVector3d root = f.row(root_joint);
        f.rowwise() -= root;
    }
    const int j = seq.layout.joint_count;
    double dist_sum = 0.0;
    std::int64_t dist_count = 0;
    for (const Frame& f : out.frames) {
        for (int a = 0; a < j; ++a)
            for (int b = a + 1; b < j; ++b) {
                dist_sum += (f.row(a) - f.row(b)).norm();
                ++dist_count;
            }
    }
    const double size = dist_sum / static_cast<double>(dist_count);
    if (size < 1e-12) throw std::invalid_argument("zero-size skeleton");
    for (Frame& f : out.frames) f /= size;
    return out;
}

/// Linear resampling of the time axis to exactly n_frames; endpoints preserved.
inline SkeletonSequence interpolate(const SkeletonSequence& seq, Eigen::Index n_frames) {
    seq.validate();
    if (n_frames < 1) throw std::invalid_argument("interpolate: n_frames must be >= 1");
    const Eigen::Index len = seq.length();
    SkeletonSequence out;
    out.capture_rate = seq.capture_rate;
    out.layout = seq.layout;
    out.frames.reserve(static_cast<std::size_t>(n_frames));
    if (len == 1 || n_frames == 1) {
        for (Eigen::Index i = 0; i < n_frames; ++i) out.frames.push_back(seq.frames[0]);
        return out;
    }
    const double step = static_cast<double>(len - 1) / static_cast<double>(n_frames - 1);
    for (Eigen::Index i = 0; i < n_frames; ++i) {
        const double t = static_cast<double>(i) * step;
        const auto lo = static_cast<Eigen::Index>(std::floor(t));
        const Eigen::Index hi = std::min(lo + 1, len - 1);
        const double w = t - static_cast<double>(lo);
        if (w == 0.0) {
            out.frames.push_back(seq.frames[static_cast<std::size_t>(lo)]);
        } else {
            out.frames.push_back((1.0 - w) * seq.frames[static_cast<std::size_t>(lo)] +
                                 w * seq.frames[static_cast<std::size_t>(hi)]);
        }
    }
    return out;
}

/// Forward frame differences scaled by the capture rate (units: coordinate/s);
/// output has length - 1 frames.
inline SkeletonSequence derivative(const SkeletonSequence& seq) {
    seq.validate();
    if (seq.length() < 2) throw std::invalid_argument("derivative: need at least 2 frames");
    SkeletonSequence out;
    out.capture_rate = seq.capture_rate;
    out.layout = seq.layout;
    out.frames.reserve(seq.frames.size() - 1);
    for (std::size_t i = 0; i + 1 < seq.frames.size(); ++i)
        out.frames.push_back((seq.frames[i + 1] - seq.frames[i]) * seq.capture_rate);
    return out;
}

struct SpanList {
    // half-open [start, end) frame spans
    std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;
};

/// Spans of the six analysis subsequences of a length-L sequence:
/// whole, the two halves, and the three thirds. Floor-based boundaries; the
/// last half/third absorbs the remainder, so halves and thirds each tile [0, L).
inline SpanList subsequence_spans(Eigen::Index length) {
    if (length < 6) throw std::invalid_argument("split_subsequences: need at least 6 frames");
    const Eigen::Index h = length / 2;
    const Eigen::Index t1 = length / 3;
    const Eigen::Index t2 = (2 * length) / 3;
    return {{{0, length}, {0, h}, {h, length}, {0, t1}, {t1, t2}, {t2, length}}};
}

inline SkeletonSequence slice(const SkeletonSequence& seq, Eigen::Index start, Eigen::Index end) {
    if (start < 0 || end > seq.length() || start >= end)
        throw std::invalid_argument("slice: invalid span");
    SkeletonSequence out;
    out.capture_rate = seq.capture_rate;
    out.layout = seq.layout;
    out.frames.assign(seq.frames.begin() + start, seq.frames.begin() + end);
    return out;
}

inline std::vector<SkeletonSequence> split_subsequences(const SkeletonSequence& seq) {
    const SpanList spans = subsequence_spans(seq.length());
    std::vector<SkeletonSequence> out;
    out.reserve(spans.spans.size());
    for (auto [s, e] : spans.spans) out.push_back(slice(seq, s, e));
    return out;
}

// --- annotation and window extraction ----------------------------------------

struct Segment {
    long start = 0;  // inclusive frame
    long end = 0;    // exclusive frame
    int class_id = 0;
};

struct Annotations {
    std::vector<Segment> segments;  // disjoint, sorted
    std::vector<std::string> class_names;
    long total_frames = 0;

    void validate() const {
        long prev_end = 0;
        for (const Segment& s : segments) {
            if (s.start < prev_end || s.start >= s.end || s.end > total_frames)
                throw std::invalid_argument("Annotations: segments must be disjoint, sorted, in range");
            if (s.class_id < 0 || s.class_id >= static_cast<int>(class_names.size()))
                throw std::invalid_argument("Annotations: class id out of range");
            prev_end = s.end;
        }
    }
};

enum class DetectorMode { binary, multiclass };

inline std::string to_string(DetectorMode m) {
    return m == DetectorMode::binary ? "binary" : "multiclass";
}

constexpr int kIdleState = 0;
constexpr int kActiveState = 1;

/// Per-frame state labels. Binary: 1 inside any annotated segment, else 0.
/// Multiclass: the covering segment's class id; every frame must be covered.
inline std::vector<int> per_frame_states(const Annotations& ann, DetectorMode mode) {
    ann.validate();
    std::vector<int> states(static_cast<std::size_t>(ann.total_frames),
                            mode == DetectorMode::binary ? kIdleState : -1);
    for (const Segment& s : ann.segments)
        for (long f = s.start; f < s.end; ++f)
            states[static_cast<std::size_t>(f)] =
                mode == DetectorMode::binary ? kActiveState : s.class_id;
    if (mode == DetectorMode::multiclass)
        for (int v : states)
            if (v < 0)
                throw std::invalid_argument(
                    "per_frame_states: multiclass labeling requires segments to cover all frames");
    return states;
}

/// The state with the largest frame count; ties break toward the state whose
/// last occurrence is latest in the window.
inline int dominant_label(const std::vector<int>& frame_labels) {
    if (frame_labels.empty()) throw std::invalid_argument("dominant_label: empty input");
    std::vector<int> classes, counts;
    std::vector<std::size_t> last_seen;
    for (std::size_t i = 0; i < frame_labels.size(); ++i) {
        const int c = frame_labels[i];
        auto it = std::find(classes.begin(), classes.end(), c);
        if (it == classes.end()) {
            classes.push_back(c);
            counts.push_back(1);
            last_seen.push_back(i);
        } else {
            const auto k = static_cast<std::size_t>(it - classes.begin());
            ++counts[k];
            last_seen[k] = i;
        }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < classes.size(); ++k) {
        if (counts[k] > counts[best] ||
            (counts[k] == counts[best] && last_seen[k] > last_seen[best]))
            best = k;
    }
    return classes[best];
}

struct LabeledWindow {
    long start = 0;  // source span is [start, start + ws)
    int label = 0;
};

/// `count` windows of exactly ws frames at seeded uniform random offsets, each
/// labeled by the dominant per-frame state.
inline std::vector<LabeledWindow> extract_random_windows(const SkeletonSequence& seq,
                                                         const std::vector<int>& frame_states,
                                                         Eigen::Index ws, int count, Rng& rng) {
    seq.validate();
    if (ws < 1 || ws > seq.length())
        throw std::invalid_argument("extract_random_windows: window exceeds sequence length");
    if (frame_states.size() != static_cast<std::size_t>(seq.length()))
        throw std::invalid_argument("extract_random_windows: state labels must cover all frames");
    std::vector<LabeledWindow> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    const auto max_start = static_cast<std::uint64_t>(seq.length() - ws + 1);
    for (int i = 0; i < count; ++i) {
        const long start = static_cast<long>(rng.index(max_start));
        std::vector<int> labels(frame_states.begin() + start, frame_states.begin() + start + ws);
        out.push_back({start, dominant_label(labels)});
    }
    return out;
}

}  // namespace spdmotion
