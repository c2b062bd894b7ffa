// The streaming engine: sliding-window state inference on a frame stream,
// verification of state transitions by majority voting, segment emission,
// recognition of completed segments, early classification against a deadline,
// and latency-budget monitoring.
//
// Window schedule: with window size ws and refresh rate r, the k-th evaluated
// window is [k*r, ws + k*r). A transition detected at the window ending at N
// starts a verification of te votes (the trigger's state is vote one); the
// decision lands when the window ending at N + (te-1)*r has been evaluated,
// and a confirmed transition is placed at frame N - r (offset configurable).
//
// In replay mode inference cost is simulated (machine-independent) and no
// window is ever skipped. In live mode cost is measured and after an overrun
// the schedule realigns to the next feasible multiple of r.
#pragma once

#include "spdmotion/network.hpp"
#include "spdmotion/skeleton.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spdmotion {

struct OnlineConfig {
    int ws = 0;        // window size in frames
    int r = 0;         // refresh rate in frames
    double cr = 0.0;   // capture rate, frames per second
    int te = 1;        // verification tests per transition
    std::optional<double> deadline_s;  // early-classification deadline T, seconds
    double min_segment_s = 0.3;        // shorter confirmed segments are discarded
    int start_offset = -1;             // transition frame = trigger end - offset; -1 means r

    int effective_start_offset() const { return start_offset < 0 ? r : start_offset; }

    long deadline_frames() const {
        return static_cast<long>(std::lround(deadline_s.value() * cr));
    }

    long min_segment_frames() const {
        return static_cast<long>(std::lround(min_segment_s * cr));
    }

    double budget_seconds() const { return static_cast<double>(r) / cr; }

    /// The one validation routine, shared by the CLI and the engine.
    void validate() const {
        if (cr <= 0.0) throw std::invalid_argument("config: capture rate cr must be positive");
        if (ws < 2) throw std::invalid_argument("config: window size ws must be at least 2");
        if (r < 1) throw std::invalid_argument("config: refresh rate r must be at least 1");
        if (static_cast<double>(r) > 0.3 * cr + 1e-9)
            throw std::invalid_argument("config: refresh rate violates r <= 0.3*cr (r=" +
                                        std::to_string(r) + ", cr=" + std::to_string(cr) + ")");
        if (ws < r)
            throw std::invalid_argument("config: window size violates ws >= r (ws=" +
                                        std::to_string(ws) + ", r=" + std::to_string(r) + ")");
        if (te < 1) throw std::invalid_argument("config: te must be at least 1");
        if (deadline_s) {
            if (*deadline_s * cr < static_cast<double>(r) - 1e-9)
                throw std::invalid_argument(
                    "config: deadline shorter than one refresh interval (T*cr < r)");
            const double limit = *deadline_s * cr / static_cast<double>(r);
            if (static_cast<double>(te) > limit + 1e-9)
                throw std::invalid_argument(
                    "config: verification tests violate te <= (T/r)*cr (te=" + std::to_string(te) +
                    ", limit=" + std::to_string(limit) + ")");
        }
    }
};

enum class EventKind {
    state_sample,
    transition_candidate,
    transition_confirmed,
    transition_rejected,
    segment_complete,
    motion_recognized,
    budget_violation,
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::state_sample: return "state_sample";
        case EventKind::transition_candidate: return "transition_candidate";
        case EventKind::transition_confirmed: return "transition_confirmed";
        case EventKind::transition_rejected: return "transition_rejected";
        case EventKind::segment_complete: return "segment_complete";
        case EventKind::motion_recognized: return "motion_recognized";
        case EventKind::budget_violation: return "budget_violation";
    }
    return "unknown";
}

struct DetectorEvent {
    EventKind kind = EventKind::state_sample;
    long frame_index = 0;
    nlohmann::json payload;
};

struct SegmentPrediction {
    long start_frame = 0;
    long end_frame = 0;
    int class_id = -1;
    long decision_latency_frames = 0;
};

// --- trained models -----------------------------------------------------------

struct ClassifierModel {
    JointLayout layout;
    PartitionScheme scheme;
    NetworkParams params;
    Gallery gallery;  // one entry per training motion, labeled by class
    std::vector<std::string> class_names;
    int interp_length = 200;

    void validate() const {
        layout.validate();
        scheme.validate(layout);
        params.validate();
        if (gallery.size() == 0) throw std::invalid_argument("ClassifierModel: empty gallery");
        if (interp_length < 6)
            throw std::invalid_argument("ClassifierModel: interp_length must be at least 6");
    }
};

struct DetectorModel {
    DetectorMode mode = DetectorMode::binary;
    JointLayout layout;
    PartitionScheme scheme;
    NetworkParams params;
    Gallery gallery;  // one entry per training window, labeled by state
    int ws = 0;
    int interp_length = 0;  // windows are resampled to this length before inference

    void validate() const {
        layout.validate();
        scheme.validate(layout);
        params.validate();
        if (ws < 2) throw std::invalid_argument("DetectorModel: ws must be at least 2");
        if (interp_length < 6)
            throw std::invalid_argument("DetectorModel: interp_length must be at least 6");
        if (gallery.size() == 0) throw std::invalid_argument("DetectorModel: empty gallery");
    }
};

/// Resample to the model's training length, then normalize. The one
/// preprocessing routine used for training windows, streaming windows and
/// segment classification alike.
inline SkeletonSequence preprocess(const SkeletonSequence& seq, Eigen::Index target_length) {
    return normalize(interpolate(seq, target_length));
}

/// Kinetic state of one window of exactly model.ws frames.
inline int detect_window(const DetectorModel& model, const SkeletonSequence& window) {
    if (window.length() != model.ws)
        throw std::invalid_argument("detect_window: window length does not equal ws");
    const SkeletonSequence prepped = preprocess(window, model.interp_length);
    return knn_classify(network_forward(prepped, model.scheme, model.params), model.gallery);
}

/// Class of a completed (or partial) motion segment.
inline int classify_segment(const ClassifierModel& model, const SkeletonSequence& segment) {
    const SkeletonSequence prepped = preprocess(segment, model.interp_length);
    return knn_classify(network_forward(prepped, model.scheme, model.params), model.gallery);
}

// --- verification by majority voting --------------------------------------------

struct VerificationOutcome {
    bool confirmed = false;
    long transition_frame = 0;
    int votes_for = 0;
};

/// Majority vote over the te window states collected for a candidate
/// transition into to_state (the trigger window's state is the first vote).
/// Confirmed iff strictly more than te/2 states equal to_state; an exact tie
/// on even te rejects. A confirmed transition is placed at trigger_end - offset.
inline VerificationOutcome verification_process(int to_state, const std::vector<int>& states,
                                                int te, long trigger_end, int start_offset) {
    if (te < 1) throw std::invalid_argument("verification_process: te must be at least 1");
    if (static_cast<int>(states.size()) != te)
        throw std::invalid_argument("verification_process: expected exactly te states");
    int votes = 0;
    for (int s : states)
        if (s == to_state) ++votes;
    VerificationOutcome out;
    out.votes_for = votes;
    out.confirmed = 2 * votes > te;
    out.transition_frame = std::max(0L, trigger_end - start_offset);
    return out;
}

// --- timing -------------------------------------------------------------------

struct TimingModel {
    bool live = false;
    /// Seconds one window inference costs. Replay: simulated (default 0).
    /// Live: injected for tests; when null the engine measures wall time.
    std::function<double(long window_index)> cost_fn;
};

// --- the engine -----------------------------------------------------------------

/// Inference callbacks the engine drives. Real deployments bind these to
/// trained models (from_models); tests may inject deterministic stand-ins.
struct EngineHooks {
    DetectorMode mode = DetectorMode::binary;
    JointLayout layout;
    std::function<int(const SkeletonSequence& window)> detect;
    std::function<int(const SkeletonSequence& segment)> classify;
    std::function<std::string(int class_id)> class_name;  // optional
};

class OnlineEngine {
public:
    OnlineEngine(EngineHooks hooks, OnlineConfig config, TimingModel timing = {})
        : hooks_(std::move(hooks)), config_(config), timing_(std::move(timing)) {
        config_.validate();
        hooks_.layout.validate();
        if (!hooks_.detect || !hooks_.classify)
            throw std::invalid_argument("engine: detect and classify hooks are required");
        next_eval_end_ = config_.ws;
    }

    static OnlineEngine from_models(DetectorModel detector, ClassifierModel classifier,
                                    OnlineConfig config, TimingModel timing = {}) {
        detector.validate();
        classifier.validate();
        if (detector.ws != config.ws)
            throw std::invalid_argument("engine: config ws does not match the detector model");
        if (detector.layout.joint_count != classifier.layout.joint_count)
            throw std::invalid_argument("engine: detector and classifier layouts differ");
        auto det = std::make_shared<const DetectorModel>(std::move(detector));
        auto cls = std::make_shared<const ClassifierModel>(std::move(classifier));
        EngineHooks hooks;
        hooks.mode = det->mode;
        hooks.layout = det->layout;
        hooks.detect = [det](const SkeletonSequence& w) { return detect_window(*det, w); };
        hooks.classify = [cls](const SkeletonSequence& s) { return classify_segment(*cls, s); };
        hooks.class_name = [cls](int id) {
            return id >= 0 && id < static_cast<int>(cls->class_names.size())
                       ? cls->class_names[static_cast<std::size_t>(id)]
                       : std::to_string(id);
        };
        return OnlineEngine(std::move(hooks), config, std::move(timing));
    }

    long frames_seen() const { return static_cast<long>(buffer_.size()); }

    /// Ingest one frame; returns the events this frame produced, in order.
    std::vector<DetectorEvent> push_frame(const Frame& frame) {
        if (finished_) throw std::logic_error("engine: push_frame after finish");
        if (frame.rows() != hooks_.layout.joint_count)
            throw std::invalid_argument("engine: frame joint count mismatch");
        buffer_.push_back(frame);
        std::vector<DetectorEvent> events;
        const long n = frames_seen();
        while (n >= next_eval_end_) {
            evaluate_window(next_eval_end_, events);
        }
        check_deadline(n, events);
        return events;
    }

    /// End of stream: resolve a pending verification and close an open segment.
    std::vector<DetectorEvent> finish() {
        if (finished_) return {};
        finished_ = true;
        std::vector<DetectorEvent> events;
        const long n = frames_seen();
        if (vp_active_) {
            nlohmann::json payload{{"from", vp_from_},
                                   {"to", vp_to_},
                                   {"trigger_end", vp_trigger_end_},
                                   {"votes", vp_votes_},
                                   {"reason", "stream ended mid-verification"}};
            events.push_back({EventKind::transition_rejected, n, std::move(payload)});
            vp_active_ = false;
        }
        if (segment_open_ && n > open_start_) close_segment(n, n, events);
        return events;
    }

    const OnlineConfig& config() const { return config_; }

private:
    void evaluate_window(long window_end, std::vector<DetectorEvent>& events) {
        const long window_start = window_end - config_.ws;
        SkeletonSequence window;
        window.capture_rate = config_.cr;
        window.layout = hooks_.layout;
        window.frames.assign(buffer_.begin() + window_start, buffer_.begin() + window_end);

        double cost = 0.0;
        int state;
        if (timing_.live && !timing_.cost_fn) {
            const auto t0 = std::chrono::steady_clock::now();
            state = hooks_.detect(window);
            cost = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        } else {
            state = hooks_.detect(window);
            if (timing_.cost_fn) cost = timing_.cost_fn(window_index_);
        }

        events.push_back({EventKind::state_sample, window_end,
                          nlohmann::json{{"state", state},
                                         {"window_start", window_start},
                                         {"window_end", window_end}}});
        if (cost > config_.budget_seconds()) {
            events.push_back({EventKind::budget_violation, window_end,
                              nlohmann::json{{"window_end", window_end},
                                             {"seconds", cost},
                                             {"budget_seconds", config_.budget_seconds()}}});
        }
        handle_state(state, window_end, events);
        ++window_index_;

        long advance = config_.r;
        if (timing_.live && cost > config_.budget_seconds()) {
            // realign to the next multiple of r the overrun allows
            const double frames_busy = cost * config_.cr;
            advance = config_.r *
                      static_cast<long>(std::ceil(frames_busy / static_cast<double>(config_.r)));
        }
        next_eval_end_ += advance;
    }

    void handle_state(int state, long window_end, std::vector<DetectorEvent>& events) {
        if (!current_state_) {
            // the stream may begin mid-motion: adopt the first observed state
            current_state_ = state;
            const bool opens =
                hooks_.mode == DetectorMode::binary ? state == kActiveState : true;
            if (opens) {
                segment_open_ = true;
                open_start_ = 0;
                open_state_ = state;
            }
            return;
        }
        if (vp_active_) {
            vp_votes_.push_back(state);
            if (static_cast<int>(vp_votes_.size()) == config_.te)
                decide_verification(window_end, events);
            return;
        }
        if (state != *current_state_) {
            vp_active_ = true;
            vp_from_ = *current_state_;
            vp_to_ = state;
            vp_trigger_end_ = window_end;
            vp_votes_ = {state};
            events.push_back({EventKind::transition_candidate, window_end,
                              nlohmann::json{{"from", vp_from_},
                                             {"to", vp_to_},
                                             {"trigger_end", vp_trigger_end_}}});
            if (config_.te == 1) decide_verification(window_end, events);
        }
    }

    void decide_verification(long decision_end, std::vector<DetectorEvent>& events) {
        const VerificationOutcome out = verification_process(
            vp_to_, vp_votes_, config_.te, vp_trigger_end_, config_.effective_start_offset());
        nlohmann::json payload{{"from", vp_from_},
                               {"to", vp_to_},
                               {"trigger_end", vp_trigger_end_},
                               {"votes", vp_votes_}};
        if (out.confirmed) {
            payload["transition_frame"] = out.transition_frame;
            events.push_back({EventKind::transition_confirmed, decision_end, std::move(payload)});
            apply_transition(out.transition_frame, vp_to_, decision_end, events);
            current_state_ = vp_to_;
        } else {
            events.push_back({EventKind::transition_rejected, decision_end, std::move(payload)});
        }
        vp_active_ = false;
        vp_votes_.clear();
    }

    void apply_transition(long transition_frame, int to_state, long decision_frame,
                          std::vector<DetectorEvent>& events) {
        const bool to_idle = hooks_.mode == DetectorMode::binary && to_state == kIdleState;
        if (segment_open_ && transition_frame > open_start_)
            close_segment(transition_frame, decision_frame, events);
        segment_open_ = false;
        if (!to_idle) {
            segment_open_ = true;
            open_start_ = transition_frame;
            open_state_ = to_state;
            early_done_ = false;
            early_class_ = -1;
        }
    }

    void close_segment(long end_frame, long decision_frame, std::vector<DetectorEvent>& events) {
        const long start = open_start_;
        segment_open_ = false;
        const long length = end_frame - start;
        if (length < config_.min_segment_frames()) {
            events.push_back({EventKind::segment_complete, decision_frame,
                              nlohmann::json{{"start", start},
                                             {"end", end_frame},
                                             {"state", open_state_},
                                             {"discarded", true}}});
            early_done_ = false;
            return;
        }
        int class_id;
        const bool early = early_done_;
        if (early_done_) {
            class_id = early_class_;
        } else {
            class_id = hooks_.classify(slice_stream(start, end_frame));
        }
        const std::string name = class_name(class_id);
        events.push_back({EventKind::segment_complete, decision_frame,
                          nlohmann::json{{"start", start},
                                         {"end", end_frame},
                                         {"state", open_state_},
                                         {"discarded", false},
                                         {"class_id", class_id},
                                         {"class_name", name}}});
        if (!early) {
            events.push_back({EventKind::motion_recognized, decision_frame,
                              nlohmann::json{{"start", start},
                                             {"end", end_frame},
                                             {"class_id", class_id},
                                             {"class_name", name},
                                             {"latency_frames", decision_frame - end_frame},
                                             {"early", false}}});
        }
        early_done_ = false;
        early_class_ = -1;
    }

    void check_deadline(long frames_now, std::vector<DetectorEvent>& events) {
        if (!config_.deadline_s || !segment_open_ || early_done_) return;
        const long deadline_frame = open_start_ + config_.deadline_frames();
        if (frames_now < deadline_frame) return;
        early_class_ = hooks_.classify(slice_stream(open_start_, deadline_frame));
        early_done_ = true;
        events.push_back({EventKind::motion_recognized, deadline_frame,
                          nlohmann::json{{"start", open_start_},
                                         {"class_id", early_class_},
                                         {"class_name", class_name(early_class_)},
                                         {"latency_frames", 0},
                                         {"early", true}}});
    }

    SkeletonSequence slice_stream(long start, long end) const {
        SkeletonSequence seq;
        seq.capture_rate = config_.cr;
        seq.layout = hooks_.layout;
        seq.frames.assign(buffer_.begin() + start, buffer_.begin() + end);
        return seq;
    }

    std::string class_name(int class_id) const {
        return hooks_.class_name ? hooks_.class_name(class_id) : std::to_string(class_id);
    }

    EngineHooks hooks_;
    OnlineConfig config_;
    TimingModel timing_;

    std::vector<Frame> buffer_;
    long next_eval_end_ = 0;
    long window_index_ = 0;
    bool finished_ = false;

    std::optional<int> current_state_;
    bool vp_active_ = false;
    int vp_from_ = 0;
    int vp_to_ = 0;
    long vp_trigger_end_ = 0;
    std::vector<int> vp_votes_;

    bool segment_open_ = false;
    long open_start_ = 0;
    int open_state_ = 0;
    bool early_done_ = false;
    int early_class_ = -1;
};

/// Run a whole recorded sequence through an engine and collect the event log.
inline std::vector<DetectorEvent> run_replay(OnlineEngine& engine, const SkeletonSequence& seq) {
    std::vector<DetectorEvent> log;
    for (const Frame& f : seq.frames) {
        auto events = engine.push_frame(f);
        log.insert(log.end(), events.begin(), events.end());
    }
    auto tail = engine.finish();
    log.insert(log.end(), tail.begin(), tail.end());
    return log;
}

/// Completed, non-discarded segments with their recognized classes.
inline std::vector<SegmentPrediction> predictions_from_events(
    const std::vector<DetectorEvent>& events) {
    std::vector<SegmentPrediction> out;
    for (const DetectorEvent& e : events) {
        if (e.kind != EventKind::segment_complete) continue;
        if (e.payload.value("discarded", false)) continue;
        SegmentPrediction p;
        p.start_frame = e.payload.at("start").get<long>();
        p.end_frame = e.payload.at("end").get<long>();
        p.class_id = e.payload.value("class_id", -1);
        p.decision_latency_frames = e.frame_index - p.end_frame;
        out.push_back(p);
    }
    return out;
}

}  // namespace spdmotion
