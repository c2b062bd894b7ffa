// Command-line surface: synthetic stream generation, classifier and detector
// training, streaming recognition (replay or live), evaluation against ground
// truth, and configuration sweeps.
//
// Exit code 0 on success; any failure prints a single "error: ..." line on
// stderr and returns 1.

#include "spdmotion/spdmotion.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace spdmotion;

namespace {

struct StreamPaths {
    std::string sequence;
    std::string annotation;  // empty when absent
};

std::vector<StreamPaths> discover_streams(const std::string& dir, bool need_annotations) {
    std::vector<StreamPaths> out;
    std::vector<fs::path> seqs;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".seq")
            seqs.push_back(entry.path());
    std::sort(seqs.begin(), seqs.end());
    for (const fs::path& p : seqs) {
        StreamPaths sp;
        sp.sequence = p.string();
        fs::path ann = p;
        ann.replace_extension(".json");
        if (fs::exists(ann)) {
            sp.annotation = ann.string();
        } else if (need_annotations) {
            throw std::runtime_error("missing annotation file for " + p.string());
        }
        out.push_back(std::move(sp));
    }
    if (out.empty()) throw std::runtime_error("no .seq streams found in " + dir);
    return out;
}

std::vector<AnnotatedStream> load_annotated(const std::string& dir) {
    std::vector<AnnotatedStream> out;
    for (const StreamPaths& sp : discover_streams(dir, true))
        out.emplace_back(read_sequence_file(sp.sequence), read_annotation_file(sp.annotation));
    return out;
}

PartitionScheme resolve_scheme(const std::string& scheme_path, const std::string& data_dir,
                               const JointLayout& layout) {
    if (!scheme_path.empty()) return read_scheme_file(scheme_path);
    const fs::path local = fs::path(data_dir) / "scheme.json";
    if (fs::exists(local)) return read_scheme_file(local.string());
    return default_scheme(layout);
}

struct NetFlags {
    int feature_dim = 128;
    int spdc_dim = 8;
    double margin = 1.0;
    double epsilon = 1e-4;
    int epochs = 10;
    int pairs = 200;
    double lr = 0.01;
    double lr_decay = 1.0;
    double momentum = 0.0;
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--feature-dim", feature_dim, "feature vector dimension");
        cmd->add_option("--spdc-dim", spdc_dim, "compressed SPD dimension");
        cmd->add_option("--margin", margin, "contrastive margin g");
        cmd->add_option("--epsilon", epsilon, "eigenvalue rectification threshold");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--pairs", pairs, "pairs per epoch");
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--lr-decay", lr_decay, "multiplicative lr decay per epoch");
        cmd->add_option("--momentum", momentum, "momentum on Euclidean parameters");
        cmd->add_option("--seed", seed, "random seed");
    }

    NetworkConfig net_config() const {
        NetworkConfig cfg;
        cfg.feature_dim = feature_dim;
        cfg.spdc_dim = spdc_dim;
        cfg.margin = margin;
        cfg.epsilon = epsilon;
        return cfg;
    }

    TrainOptions train_options() const {
        TrainOptions opt;
        opt.epochs = epochs;
        opt.pairs_per_epoch = pairs;
        opt.lr = lr;
        opt.lr_decay = lr_decay;
        opt.momentum = momentum;
        opt.seed = seed;
        return opt;
    }
};

int cmd_gen_synth(const std::string& out_dir, int count, SyntheticSpec spec, bool zero_gap) {
    if (zero_gap) {
        spec.idle_min_s = 0.0;
        spec.idle_max_s = 0.0;
    }
    fs::create_directories(out_dir);
    write_scheme_file((fs::path(out_dir) / "scheme.json").string(), synthetic_scheme());
    for (int i = 0; i < count; ++i) {
        const SyntheticStream s = gen_synthetic(spec, static_cast<std::uint64_t>(i));
        char name[32];
        std::snprintf(name, sizeof(name), "stream_%03d", i);
        write_sequence_file((fs::path(out_dir) / (std::string(name) + ".seq")).string(), s.seq);
        write_annotation_file((fs::path(out_dir) / (std::string(name) + ".json")).string(),
                              s.truth);
    }
    std::cout << "wrote " << count << " streams to " << out_dir << "\n";
    return 0;
}

int cmd_train_classifier(const std::string& data_dir, const std::string& out_path,
                         const std::string& scheme_path, int interp_length,
                         const NetFlags& flags) {
    const std::vector<AnnotatedStream> streams = load_annotated(data_dir);
    ClassifierTrainOptions opt;
    opt.interp_length = interp_length;
    opt.net = flags.net_config();
    opt.train = flags.train_options();
    opt.seed = flags.seed;
    const PartitionScheme scheme =
        resolve_scheme(scheme_path, data_dir, streams.front().first.layout);
    const ClassifierModel model = train_classifier(streams, scheme, opt);
    save_classifier(out_path, model);
    std::cout << "trained classifier on " << streams.size() << " streams ("
              << model.gallery.size() << " gallery entries) -> " << out_path << "\n";
    return 0;
}

int cmd_train_detector(const std::string& data_dir, const std::string& out_path,
                       const std::string& scheme_path, int ws, const std::string& mode_str,
                       int windows_per_stream, int interp_length, const NetFlags& flags) {
    const std::vector<AnnotatedStream> streams = load_annotated(data_dir);
    DetectorTrainOptions opt;
    opt.ws = ws;
    opt.mode = mode_str == "multiclass" ? DetectorMode::multiclass : DetectorMode::binary;
    opt.windows_per_stream = windows_per_stream;
    opt.interp_length = interp_length;
    opt.net = flags.net_config();
    opt.train = flags.train_options();
    opt.seed = flags.seed;
    const PartitionScheme scheme =
        resolve_scheme(scheme_path, data_dir, streams.front().first.layout);
    const DetectorModel model = train_detector(streams, scheme, opt);
    save_detector(out_path, model);
    std::cout << "trained " << mode_str << " detector (ws=" << ws << ", "
              << model.gallery.size() << " gallery entries) -> " << out_path << "\n";
    return 0;
}

void run_live_stream(std::istream& in, const JointLayout& layout, OnlineEngine& engine,
                     std::vector<DetectorEvent>& log) {
    std::string line;
    long last_index = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        long index;
        if (!(row >> index)) throw std::runtime_error("live stream: bad frame index");
        if (index <= last_index)
            throw std::runtime_error("live stream: frame indices must be strictly increasing");
        last_index = index;
        Frame f(layout.joint_count, 3);
        for (int j = 0; j < layout.joint_count; ++j)
            for (int c = 0; c < 3; ++c)
                if (!(row >> f(j, c))) throw std::runtime_error("live stream: short frame line");
        const auto events = engine.push_frame(f);
        log.insert(log.end(), events.begin(), events.end());
    }
}

int cmd_run_online(const std::string& detector_path, const std::string& classifier_path,
                   const std::string& input_path, const std::string& out_path,
                   const std::string& config_path, int refresh, int tests, double deadline,
                   bool early, double min_segment, int start_offset, bool live,
                   double capture_rate, const CLI::App* cmd) {
    const DetectorModel detector = load_detector(detector_path);
    const ClassifierModel classifier = load_classifier(classifier_path);

    OnlineConfig config;
    if (!config_path.empty())
        config = config_from_json(nlohmann::json::parse(read_text_file(config_path)));
    config.ws = detector.ws;
    if (cmd->count("--refresh") || config.r == 0) config.r = refresh;
    if (cmd->count("--tests") || config.te == 0) config.te = tests;
    if (cmd->count("--min-segment")) config.min_segment_s = min_segment;
    if (cmd->count("--start-offset")) config.start_offset = start_offset;
    if (early) {
        if (!cmd->count("--deadline") && !config.deadline_s)
            throw std::runtime_error("--early requires --deadline");
        if (cmd->count("--deadline")) config.deadline_s = deadline;
    } else if (config_path.empty()) {
        config.deadline_s.reset();
    }

    std::vector<DetectorEvent> log;
    if (live) {
        config.cr = capture_rate;
        config.validate();
        TimingModel timing;
        timing.live = true;
        OnlineEngine engine = OnlineEngine::from_models(detector, classifier, config, timing);
        run_live_stream(std::cin, detector.layout, engine, log);
        const auto tail = engine.finish();
        log.insert(log.end(), tail.begin(), tail.end());
    } else {
        if (input_path.empty()) throw std::runtime_error("replay mode needs --input");
        const SkeletonSequence seq = read_sequence_file(input_path);
        config.cr = seq.capture_rate;
        config.validate();
        OnlineEngine engine = OnlineEngine::from_models(detector, classifier, config);
        log = run_replay(engine, seq);
    }

    const std::string text = event_log_to_string(log);
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_text_file(out_path, text);
        std::cout << "wrote " << log.size() << " events to " << out_path << "\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& events_path, const std::string& truth_path,
                 const std::string& mode_str, const std::string& out_path, double iou) {
    const std::vector<DetectorEvent> events = read_event_log(events_path);
    const Annotations truth = read_annotation_file(truth_path);
    MetricsOptions opt;
    opt.iou_threshold = iou;
    const DetectorMode mode =
        mode_str == "multiclass" ? DetectorMode::multiclass : DetectorMode::binary;
    const MetricsReport report = report_from_events(events, truth, mode, opt);
    const std::string text = report_to_json(report, opt).dump(2) + "\n";
    if (!out_path.empty()) write_text_file(out_path, text);
    std::cout << text;
    return 0;
}

int cmd_sweep(const std::string& data_dir, const std::string& classifier_path,
              const std::vector<std::string>& detector_specs, const std::string& te_list,
              const std::string& deadline_list, const std::string& mode_str, int refresh,
              double min_segment, const std::string& out_path) {
    const ClassifierModel classifier = load_classifier(classifier_path);
    std::map<int, DetectorModel> detectors;
    for (const std::string& spec : detector_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("detector spec must look like ws=path: " + spec);
        detectors.emplace(std::stoi(spec.substr(0, eq)), load_detector(spec.substr(eq + 1)));
    }
    if (detectors.empty()) throw std::runtime_error("sweep needs at least one --detector ws=path");

    std::vector<int> te_values;
    {
        std::istringstream in(te_list);
        std::string tok;
        while (std::getline(in, tok, ',')) te_values.push_back(std::stoi(tok));
    }
    if (te_values.empty()) te_values.push_back(3);
    std::vector<std::optional<double>> deadlines;
    if (deadline_list.empty()) {
        deadlines.push_back(std::nullopt);
    } else {
        std::istringstream in(deadline_list);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            if (tok == "none")
                deadlines.push_back(std::nullopt);
            else
                deadlines.push_back(std::stod(tok));
        }
    }

    std::vector<std::pair<SkeletonSequence, Annotations>> streams;
    for (auto& [seq, ann] : load_annotated(data_dir))
        streams.emplace_back(std::move(seq), std::move(ann));

    std::vector<SweepPoint> grid;
    for (const auto& [ws, model] : detectors)
        for (int te : te_values)
            for (const auto& dl : deadlines) grid.push_back({ws, te, dl});

    const DetectorMode mode =
        mode_str == "multiclass" ? DetectorMode::multiclass : DetectorMode::binary;
    const auto cells = run_sweep(
        grid, streams, mode,
        [&](const SweepPoint& point, const SkeletonSequence& seq) {
            OnlineConfig config;
            config.ws = point.ws;
            config.r = refresh;
            config.cr = seq.capture_rate;
            config.te = point.te;
            config.deadline_s = point.deadline_s;
            config.min_segment_s = min_segment;
            config.validate();
            OnlineEngine engine =
                OnlineEngine::from_models(detectors.at(point.ws), classifier, config);
            return run_replay(engine, seq);
        });

    const std::string csv = sweep_csv(cells);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_text_file(out_path, csv);
        std::cout << "wrote " << cells.size() << " sweep rows to " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"online skeleton motion segmentation and recognition"};
    app.require_subcommand(1);

    // gen-synth
    auto* gen = app.add_subcommand("gen-synth", "generate synthetic benchmark streams");
    std::string gen_out = "synthetic";
    int gen_count = 10;
    bool zero_gap = false;
    SyntheticSpec spec;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--count", gen_count, "number of streams");
    gen->add_option("--classes", spec.n_classes, "number of motion classes");
    gen->add_option("--segments", spec.segments_per_stream, "motions per stream");
    gen->add_option("--capture-rate", spec.capture_rate, "frames per second");
    gen->add_option("--action-min", spec.action_min_s, "min action duration (s)");
    gen->add_option("--action-max", spec.action_max_s, "max action duration (s)");
    gen->add_option("--idle-min", spec.idle_min_s, "min idle duration (s)");
    gen->add_option("--idle-max", spec.idle_max_s, "max idle duration (s)");
    gen->add_option("--noise", spec.noise, "coordinate noise sigma");
    gen->add_option("--posture-shift", spec.posture_shift, "static class displacement");
    gen->add_option("--seed", spec.seed, "random seed");
    gen->add_flag("--zero-gap", zero_gap, "back-to-back motions without idle");

    // train-classifier
    auto* tc = app.add_subcommand("train-classifier", "train the segment classifier");
    std::string tc_data, tc_out = "classifier.model", tc_scheme;
    int tc_interp = 200;
    NetFlags tc_flags;
    tc->add_option("--data", tc_data, "directory of .seq/.json training streams")->required();
    tc->add_option("--out", tc_out, "output model path");
    tc->add_option("--scheme", tc_scheme, "partition scheme JSON (default: data dir or layout)");
    tc->add_option("--interp-length", tc_interp, "segment resampling length");
    tc_flags.attach(tc);

    // train-detector
    auto* td = app.add_subcommand("train-detector", "train the kinetic-state detector");
    std::string td_data, td_out = "detector.model", td_scheme, td_mode = "binary";
    int td_ws = 0, td_windows = 40, td_interp = 0;
    NetFlags td_flags;
    td->add_option("--data", td_data, "directory of .seq/.json training streams")->required();
    td->add_option("--out", td_out, "output model path");
    td->add_option("--scheme", td_scheme, "partition scheme JSON (default: data dir or layout)");
    td->add_option("--ws", td_ws, "window size in frames")->required();
    td->add_option("--mode", td_mode, "binary or multiclass")
        ->check(CLI::IsMember({"binary", "multiclass"}));
    td->add_option("--windows-per-stream", td_windows, "training windows per stream");
    td->add_option("--interp-length", td_interp, "window resampling length (0 = auto)");
    td_flags.attach(td);

    // run-online
    auto* ro = app.add_subcommand("run-online", "segment and recognize a frame stream");
    std::string ro_det, ro_cls, ro_input, ro_out, ro_config;
    int ro_refresh = 6, ro_tests = 3, ro_offset = -1;
    double ro_deadline = 0.0, ro_min_segment = 0.3, ro_cr = 30.0;
    bool ro_early = false, ro_live = false;
    ro->add_option("--detector", ro_det, "detector model path")->required();
    ro->add_option("--classifier", ro_cls, "classifier model path")->required();
    ro->add_option("--input", ro_input, "sequence file to replay");
    ro->add_option("--out", ro_out, "event log output path (default: stdout)");
    ro->add_option("--config", ro_config, "engine config JSON (flags override)");
    ro->add_option("--refresh", ro_refresh, "refresh rate r in frames");
    ro->add_option("--tests", ro_tests, "verification tests te");
    ro->add_option("--deadline", ro_deadline, "early-classification deadline T (s)");
    ro->add_flag("--early", ro_early, "enable early classification (needs --deadline)");
    ro->add_option("--min-segment", ro_min_segment, "minimum segment length (s)");
    ro->add_option("--start-offset", ro_offset, "confirmed-transition offset (frames, -1 = r)");
    ro->add_flag("--live", ro_live, "read frames from stdin with real-time budgets");
    ro->add_option("--capture-rate", ro_cr, "capture rate for live mode");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score an event log against ground truth");
    std::string ev_events, ev_truth, ev_mode = "binary", ev_out;
    double ev_iou = 0.5;
    ev->add_option("--events", ev_events, "event log (JSON lines)")->required();
    ev->add_option("--truth", ev_truth, "annotation JSON")->required();
    ev->add_option("--mode", ev_mode, "binary or multiclass")
        ->check(CLI::IsMember({"binary", "multiclass"}));
    ev->add_option("--out", ev_out, "report JSON output path");
    ev->add_option("--iou", ev_iou, "IoU matching threshold");

    // sweep
    auto* sw = app.add_subcommand("sweep", "grid evaluation over ws / te / deadline");
    std::string sw_data, sw_cls, sw_te = "3", sw_deadlines, sw_mode = "binary", sw_out;
    std::vector<std::string> sw_detectors;
    int sw_refresh = 6;
    double sw_min_segment = 0.3;
    sw->add_option("--data", sw_data, "directory of .seq/.json test streams")->required();
    sw->add_option("--classifier", sw_cls, "classifier model path")->required();
    sw->add_option("--detector", sw_detectors, "ws=path, repeatable")->required();
    sw->add_option("--te-list", sw_te, "comma-separated te values");
    sw->add_option("--deadline-list", sw_deadlines,
                   "comma-separated deadlines in seconds ('none' allowed)");
    sw->add_option("--mode", sw_mode, "binary or multiclass")
        ->check(CLI::IsMember({"binary", "multiclass"}));
    sw->add_option("--refresh", sw_refresh, "refresh rate r in frames");
    sw->add_option("--min-segment", sw_min_segment, "minimum segment length (s)");
    sw->add_option("--out", sw_out, "CSV output path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_synth(gen_out, gen_count, spec, zero_gap);
        if (tc->parsed())
            return cmd_train_classifier(tc_data, tc_out, tc_scheme, tc_interp, tc_flags);
        if (td->parsed())
            return cmd_train_detector(td_data, td_out, td_scheme, td_ws, td_mode, td_windows,
                                      td_interp, td_flags);
        if (ro->parsed())
            return cmd_run_online(ro_det, ro_cls, ro_input, ro_out, ro_config, ro_refresh,
                                  ro_tests, ro_deadline, ro_early, ro_min_segment, ro_offset,
                                  ro_live, ro_cr, ro);
        if (ev->parsed()) return cmd_evaluate(ev_events, ev_truth, ev_mode, ev_out, ev_iou);
        if (sw->parsed())
            return cmd_sweep(sw_data, sw_cls, sw_detectors, sw_te, sw_deadlines, sw_mode,
                             sw_refresh, sw_min_segment, sw_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
