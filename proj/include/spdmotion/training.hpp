// End-to-end model construction: detector training on randomly extracted
// fixed-size windows labeled by their dominant state, and classifier training
// on the annotated motion segments. Both train the Siamese network on
// preprocessed items and freeze a feature gallery for 1-NN inference.
#pragma once

#include "spdmotion/network_grad.hpp"
#include "spdmotion/online.hpp"
#include "spdmotion/skeleton.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spdmotion {

using AnnotatedStream = std::pair<SkeletonSequence, Annotations>;

/// Built-in partition for hand/body layouts; custom layouts must pass their own.
inline PartitionScheme default_scheme(const JointLayout& layout) {
    if (layout.kind == LayoutKind::hand) return hand_partition(layout);
    if (layout.kind == LayoutKind::body) return body_partition(layout);
    throw std::invalid_argument("custom layouts need an explicit partition scheme");
}

struct DetectorTrainOptions {
    int ws = 0;
    DetectorMode mode = DetectorMode::binary;
    int windows_per_stream = 40;
    int interp_length = 0;  // 0 -> max(ws, 12)
    NetworkConfig net;
    TrainOptions train;
    std::uint64_t seed = 0;
};

inline DetectorModel train_detector(const std::vector<AnnotatedStream>& streams,
                                    const PartitionScheme& scheme,
                                    const DetectorTrainOptions& opt) {
    if (streams.empty()) throw std::invalid_argument("train_detector: no training streams");
    if (opt.ws < 2) throw std::invalid_argument("train_detector: ws must be at least 2");
    const int interp_length = opt.interp_length > 0 ? opt.interp_length : std::max(opt.ws, 12);
    const JointLayout layout = streams.front().first.layout;
    scheme.validate(layout);

    Rng rng(opt.seed);
    std::vector<SkeletonSequence> items;
    std::vector<int> labels;
    for (const auto& [seq, ann] : streams) {
        if (seq.layout.joint_count != layout.joint_count)
            throw std::invalid_argument("train_detector: streams disagree on joint count");
        if (seq.length() < opt.ws)
            throw std::invalid_argument("train_detector: ws exceeds the shortest sequence");
        const std::vector<int> states = per_frame_states(ann, opt.mode);
        for (const LabeledWindow& w :
             extract_random_windows(seq, states, opt.ws, opt.windows_per_stream, rng)) {
            items.push_back(preprocess(slice(seq, w.start, w.start + opt.ws), interp_length));
            labels.push_back(w.label);
        }
    }
    bool multiple_states = false;
    for (int l : labels)
        if (l != labels.front()) multiple_states = true;
    if (!multiple_states)
        throw std::invalid_argument(
            "train_detector: training windows cover a single state; check the annotations");

    DetectorModel model;
    model.mode = opt.mode;
    model.layout = layout;
    model.scheme = scheme;
    model.ws = opt.ws;
    model.interp_length = interp_length;
    TrainOptions train_opt = opt.train;
    train_opt.seed = opt.seed ^ 0x9e3779b97f4a7c15ull;
    const NetworkParams init =
        NetworkParams::init(static_cast<int>(scheme.parts.size()), opt.net, opt.seed + 1);
    model.params = train(items, labels, scheme, init, train_opt);
    model.gallery = build_gallery(items, labels, scheme, model.params);
    return model;
}

inline DetectorModel train_detector(const std::vector<AnnotatedStream>& streams,
                                    const DetectorTrainOptions& opt) {
    if (streams.empty()) throw std::invalid_argument("train_detector: no training streams");
    return train_detector(streams, default_scheme(streams.front().first.layout), opt);
}

struct ClassifierTrainOptions {
    int interp_length = 200;
    NetworkConfig net;
    TrainOptions train;
    std::uint64_t seed = 0;
};

inline ClassifierModel train_classifier(const std::vector<AnnotatedStream>& streams,
                                        const PartitionScheme& scheme,
                                        const ClassifierTrainOptions& opt) {
    if (streams.empty()) throw std::invalid_argument("train_classifier: no training streams");
    const JointLayout layout = streams.front().first.layout;
    scheme.validate(layout);

    std::vector<SkeletonSequence> items;
    std::vector<int> labels;
    std::vector<std::string> class_names = streams.front().second.class_names;
    for (const auto& [seq, ann] : streams) {
        if (ann.class_names != class_names)
            throw std::invalid_argument("train_classifier: streams disagree on the class set");
        for (const Segment& s : ann.segments) {
            items.push_back(preprocess(slice(seq, s.start, s.end), opt.interp_length));
            labels.push_back(s.class_id);
        }
    }
    if (items.empty()) throw std::invalid_argument("train_classifier: no annotated segments");

    ClassifierModel model;
    model.layout = layout;
    model.scheme = scheme;
    model.class_names = std::move(class_names);
    model.interp_length = opt.interp_length;
    TrainOptions train_opt = opt.train;
    train_opt.seed = opt.seed ^ 0x9e3779b97f4a7c15ull;
    const NetworkParams init =
        NetworkParams::init(static_cast<int>(scheme.parts.size()), opt.net, opt.seed + 1);
    model.params = train(items, labels, scheme, init, train_opt);
    model.gallery = build_gallery(items, labels, scheme, model.params);
    return model;
}

inline ClassifierModel train_classifier(const std::vector<AnnotatedStream>& streams,
                                        const ClassifierTrainOptions& opt) {
    if (streams.empty()) throw std::invalid_argument("train_classifier: no training streams");
    return train_classifier(streams, default_scheme(streams.front().first.layout), opt);
}

}  // namespace spdmotion
