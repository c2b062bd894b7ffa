// File formats: the text sequence format, JSON annotations, JSON-lines event
// logs, JSON engine configs, and the checksummed binary model files.
//
// Sequence file: a small comment header (version, capture rate, joint count,
// layout kind) followed by one frame per line as "index x y z x y z ...".
// Coordinates are written with 17 significant digits so the text round trip is
// value-exact.
//
// Model file: magic + kind byte + length-prefixed payload + FNV-1a 64 checksum
// of the payload. Doubles are stored as raw little-endian bytes, so a
// save/load/save cycle is byte-identical.
#pragma once

#include "spdmotion/metrics.hpp"
#include "spdmotion/network.hpp"
#include "spdmotion/online.hpp"
#include "spdmotion/skeleton.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdmotion {

// --- text sequence format -------------------------------------------------------

inline std::string sequence_to_string(const SkeletonSequence& seq) {
    seq.validate();
    std::ostringstream out;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", seq.capture_rate);
    out << "#spdmotion-sequence v1\n";
    out << "#capture_rate " << buf << "\n";
    out << "#joint_count " << seq.layout.joint_count << "\n";
    out << "#layout " << to_string(seq.layout.kind) << "\n";
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        out << t;
        const Frame& f = seq.frames[t];
        for (int j = 0; j < seq.layout.joint_count; ++j) {
            for (int c = 0; c < 3; ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", f(j, c));
                out << ' ' << buf;
            }
        }
        out << '\n';
    }
    return out.str();
}

inline SkeletonSequence sequence_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    SkeletonSequence seq;
    bool have_header = false, have_rate = false, have_joints = false;
    long last_index = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream h(line.substr(1));
            std::string key;
            h >> key;
            if (key == "spdmotion-sequence") {
                std::string version;
                h >> version;
                if (version != "v1")
                    throw std::invalid_argument("sequence file: unsupported version " + version);
                have_header = true;
            } else if (key == "capture_rate") {
                h >> seq.capture_rate;
                have_rate = true;
            } else if (key == "joint_count") {
                h >> seq.layout.joint_count;
                have_joints = true;
            } else if (key == "layout") {
                std::string kind;
                h >> kind;
                seq.layout.kind = layout_kind_from_string(kind);
            }
            continue;
        }
        if (!have_header || !have_rate || !have_joints)
            throw std::invalid_argument("sequence file: frame data before a complete header");
        std::istringstream row(line);
        long index;
        if (!(row >> index)) throw std::invalid_argument("sequence file: bad frame index");
        if (index <= last_index)
            throw std::invalid_argument("sequence file: frame indices must be strictly increasing");
        last_index = index;
        Frame f(seq.layout.joint_count, 3);
        for (int j = 0; j < seq.layout.joint_count; ++j)
            for (int c = 0; c < 3; ++c)
                if (!(row >> f(j, c)))
                    throw std::invalid_argument("sequence file: wrong coordinate count on frame " +
                                                std::to_string(index));
        double extra;
        if (row >> extra)
            throw std::invalid_argument("sequence file: trailing data on frame " +
                                        std::to_string(index));
        seq.frames.push_back(std::move(f));
    }
    seq.validate();
    return seq;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_sequence_file(const std::string& path, const SkeletonSequence& seq) {
    write_text_file(path, sequence_to_string(seq));
}

inline SkeletonSequence read_sequence_file(const std::string& path) {
    return sequence_from_string(read_text_file(path));
}

// --- annotations ------------------------------------------------------------------

inline nlohmann::json annotations_to_json(const Annotations& ann) {
    ann.validate();
    nlohmann::json segments = nlohmann::json::array();
    for (const Segment& s : ann.segments)
        segments.push_back({{"start_frame", s.start},
                            {"end_frame", s.end},
                            {"class_name", ann.class_names[static_cast<std::size_t>(s.class_id)]}});
    return {{"version", 1},
            {"classes", ann.class_names},
            {"total_frames", ann.total_frames},
            {"segments", segments}};
}

inline Annotations annotations_from_json(const nlohmann::json& j) {
    if (j.value("version", 0) != 1)
        throw std::invalid_argument("annotation file: unsupported version");
    Annotations ann;
    ann.class_names = j.at("classes").get<std::vector<std::string>>();
    ann.total_frames = j.at("total_frames").get<long>();
    for (const auto& s : j.at("segments")) {
        const std::string name = s.at("class_name").get<std::string>();
        const auto it = std::find(ann.class_names.begin(), ann.class_names.end(), name);
        if (it == ann.class_names.end())
            throw std::invalid_argument("annotation file: unknown class " + name);
        ann.segments.push_back({s.at("start_frame").get<long>(), s.at("end_frame").get<long>(),
                                static_cast<int>(it - ann.class_names.begin())});
    }
    ann.validate();
    return ann;
}

inline void write_annotation_file(const std::string& path, const Annotations& ann) {
    write_text_file(path, annotations_to_json(ann).dump(2) + "\n");
}

inline Annotations read_annotation_file(const std::string& path) {
    return annotations_from_json(nlohmann::json::parse(read_text_file(path)));
}

// --- partition scheme --------------------------------------------------------------

/// A scheme serializes as a plain JSON list of joint-index lists.
inline nlohmann::json scheme_to_json(const PartitionScheme& scheme) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& part : scheme.parts) j.push_back(part);
    return j;
}

inline PartitionScheme scheme_from_json(const nlohmann::json& j) {
    PartitionScheme scheme;
    for (const auto& part : j) scheme.parts.push_back(part.get<std::vector<int>>());
    return scheme;
}

inline void write_scheme_file(const std::string& path, const PartitionScheme& scheme) {
    write_text_file(path, scheme_to_json(scheme).dump() + "\n");
}

inline PartitionScheme read_scheme_file(const std::string& path) {
    return scheme_from_json(nlohmann::json::parse(read_text_file(path)));
}

// --- event log --------------------------------------------------------------------

inline std::string event_log_to_string(const std::vector<DetectorEvent>& events) {
    std::ostringstream out;
    for (const DetectorEvent& e : events) {
        nlohmann::json j = e.payload;
        j["kind"] = to_string(e.kind);
        j["frame_index"] = e.frame_index;
        out << j.dump() << '\n';
    }
    return out.str();
}

inline EventKind event_kind_from_string(const std::string& s) {
    for (EventKind k :
         {EventKind::state_sample, EventKind::transition_candidate, EventKind::transition_confirmed,
          EventKind::transition_rejected, EventKind::segment_complete, EventKind::motion_recognized,
          EventKind::budget_violation}) {
        if (s == to_string(k)) return k;
    }
    throw std::invalid_argument("event log: unknown event kind " + s);
}

inline std::vector<DetectorEvent> event_log_from_string(const std::string& text) {
    std::vector<DetectorEvent> events;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        DetectorEvent e;
        e.kind = event_kind_from_string(j.at("kind").get<std::string>());
        e.frame_index = j.at("frame_index").get<long>();
        j.erase("kind");
        j.erase("frame_index");
        e.payload = std::move(j);
        events.push_back(std::move(e));
    }
    return events;
}

inline void write_event_log(const std::string& path, const std::vector<DetectorEvent>& events) {
    write_text_file(path, event_log_to_string(events));
}

inline std::vector<DetectorEvent> read_event_log(const std::string& path) {
    return event_log_from_string(read_text_file(path));
}

// --- engine config ----------------------------------------------------------------

inline nlohmann::json config_to_json(const OnlineConfig& c) {
    nlohmann::json j{{"ws", c.ws},
                     {"r", c.r},
                     {"cr", c.cr},
                     {"te", c.te},
                     {"min_segment_s", c.min_segment_s},
                     {"start_offset", c.start_offset}};
    j["deadline_s"] = c.deadline_s ? nlohmann::json(*c.deadline_s) : nlohmann::json(nullptr);
    return j;
}

inline OnlineConfig config_from_json(const nlohmann::json& j) {
    OnlineConfig c;
    c.ws = j.at("ws").get<int>();
    c.r = j.at("r").get<int>();
    c.cr = j.at("cr").get<double>();
    c.te = j.at("te").get<int>();
    c.min_segment_s = j.value("min_segment_s", 0.3);
    c.start_offset = j.value("start_offset", -1);
    if (j.contains("deadline_s") && !j.at("deadline_s").is_null())
        c.deadline_s = j.at("deadline_s").get<double>();
    return c;
}

// --- binary model files -------------------------------------------------------------

namespace detail {

constexpr char kModelMagic[9] = "SPDMDL01";
constexpr std::uint8_t kKindClassifier = 1;
constexpr std::uint8_t kKindDetector = 2;

inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char b : data) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

struct ByteWriter {
    std::string buf;
    void u8(std::uint8_t v) { buf.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf.append(s);
    }
    void matrix(const Matrix& m) {
        u32(static_cast<std::uint32_t>(m.rows()));
        u32(static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
    void vector(const Vector& v) {
        u32(static_cast<std::uint32_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }
};

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("model file: truncated payload");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    Matrix matrix() {
        const std::uint32_t rows = u32();
        const std::uint32_t cols = u32();
        Matrix m(rows, cols);
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
        return m;
    }
    Vector vector() {
        const std::uint32_t n = u32();
        Vector v(n);
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
        return v;
    }
};

inline void write_layout(ByteWriter& w, const JointLayout& layout) {
    w.u32(static_cast<std::uint32_t>(layout.joint_count));
    w.u8(static_cast<std::uint8_t>(layout.kind));
    w.u32(static_cast<std::uint32_t>(layout.names.size()));
    for (const std::string& n : layout.names) w.str(n);
}

inline JointLayout read_layout(ByteReader& r) {
    JointLayout layout;
    layout.joint_count = static_cast<int>(r.u32());
    layout.kind = static_cast<LayoutKind>(r.u8());
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) layout.names.push_back(r.str());
    return layout;
}

inline void write_scheme(ByteWriter& w, const PartitionScheme& scheme) {
    w.u32(static_cast<std::uint32_t>(scheme.parts.size()));
    for (const auto& part : scheme.parts) {
        w.u32(static_cast<std::uint32_t>(part.size()));
        for (int idx : part) w.i32(idx);
    }
}

inline PartitionScheme read_scheme(ByteReader& r) {
    PartitionScheme scheme;
    const std::uint32_t parts = r.u32();
    for (std::uint32_t p = 0; p < parts; ++p) {
        std::vector<int> part(r.u32());
        for (int& idx : part) idx = r.i32();
        scheme.parts.push_back(std::move(part));
    }
    return scheme;
}

inline void write_params(ByteWriter& w, const NetworkParams& p) {
    w.u32(static_cast<std::uint32_t>(p.conv.size()));
    for (const ConvKernel& k : p.conv) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) w.f64(k.weights(i, j));
        w.f64(k.bias);
    }
    w.u32(static_cast<std::uint32_t>(p.stiefel.size()));
    for (const StiefelWeight& s : p.stiefel) w.matrix(s.mat());
    w.matrix(p.fc_weight);
    w.vector(p.fc_bias);
    w.f64(p.epsilon);
    w.f64(p.margin);
    w.u32(static_cast<std::uint32_t>(p.feature_dim));
    w.u32(static_cast<std::uint32_t>(p.spdc_dim));
}

inline NetworkParams read_params(ByteReader& r) {
    NetworkParams p;
    const std::uint32_t n_conv = r.u32();
    for (std::uint32_t k = 0; k < n_conv; ++k) {
        ConvKernel kernel;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) kernel.weights(i, j) = r.f64();
        kernel.bias = r.f64();
        p.conv.push_back(kernel);
    }
    const std::uint32_t n_stiefel = r.u32();
    for (std::uint32_t i = 0; i < n_stiefel; ++i)
        p.stiefel.push_back(StiefelWeight::from_orthonormal_unchecked(r.matrix()));
    p.fc_weight = r.matrix();
    p.fc_bias = r.vector();
    p.epsilon = r.f64();
    p.margin = r.f64();
    p.feature_dim = static_cast<int>(r.u32());
    p.spdc_dim = static_cast<int>(r.u32());
    return p;
}

inline void write_gallery(ByteWriter& w, const Gallery& g) {
    w.matrix(g.features);
    w.u32(static_cast<std::uint32_t>(g.labels.size()));
    for (int l : g.labels) w.i32(l);
}

inline Gallery read_gallery(ByteReader& r) {
    Gallery g;
    g.features = r.matrix();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) g.labels.push_back(r.i32());
    return g;
}

inline void write_model_file(const std::string& path, std::uint8_t kind,
                             const std::string& payload) {
    std::string out;
    out.append(kModelMagic, 8);
    out.push_back(static_cast<char>(kind));
    ByteWriter sizer;
    sizer.u64(payload.size());
    out += sizer.buf;
    out += payload;
    ByteWriter hasher;
    hasher.u64(fnv1a(payload));
    out += hasher.buf;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string read_model_file(const std::string& path, std::uint8_t expected_kind) {
    const std::string raw = read_text_file(path);
    if (raw.size() < 8 + 1 + 8 + 8 || raw.compare(0, 6, "SPDMDL") != 0)
        throw std::runtime_error("model file: not a model file: " + path);
    if (raw.compare(0, 8, kModelMagic) != 0)
        throw std::runtime_error("model file: unsupported version: " + path);
    const auto kind = static_cast<std::uint8_t>(raw[8]);
    if (kind != expected_kind)
        throw std::runtime_error("model file: wrong model kind (classifier/detector mixup)");
    const std::string sized = raw.substr(9, 8);
    ByteReader size_reader{sized};
    const std::uint64_t payload_size = size_reader.u64();
    if (raw.size() != 8 + 1 + 8 + payload_size + 8)
        throw std::runtime_error("model file: checksum error (truncated or padded file)");
    const std::string payload = raw.substr(17, payload_size);
    const std::string hash_bytes = raw.substr(17 + payload_size, 8);
    ByteReader hash_reader{hash_bytes};
    if (hash_reader.u64() != fnv1a(payload))
        throw std::runtime_error("model file: checksum error (corrupt payload)");
    return payload;
}

}  // namespace detail

inline void save_classifier(const std::string& path, const ClassifierModel& model) {
    model.validate();
    detail::ByteWriter w;
    detail::write_layout(w, model.layout);
    detail::write_scheme(w, model.scheme);
    detail::write_params(w, model.params);
    detail::write_gallery(w, model.gallery);
    w.u32(static_cast<std::uint32_t>(model.interp_length));
    w.u32(static_cast<std::uint32_t>(model.class_names.size()));
    for (const std::string& n : model.class_names) w.str(n);
    detail::write_model_file(path, detail::kKindClassifier, w.buf);
}

inline ClassifierModel load_classifier(const std::string& path) {
    const std::string payload = detail::read_model_file(path, detail::kKindClassifier);
    detail::ByteReader r{payload};
    ClassifierModel model;
    model.layout = detail::read_layout(r);
    model.scheme = detail::read_scheme(r);
    model.params = detail::read_params(r);
    model.gallery = detail::read_gallery(r);
    model.interp_length = static_cast<int>(r.u32());
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) model.class_names.push_back(r.str());
    model.validate();
    return model;
}

inline void save_detector(const std::string& path, const DetectorModel& model) {
    model.validate();
    detail::ByteWriter w;
    w.u8(model.mode == DetectorMode::binary ? 0 : 1);
    detail::write_layout(w, model.layout);
    detail::write_scheme(w, model.scheme);
    detail::write_params(w, model.params);
    detail::write_gallery(w, model.gallery);
    w.u32(static_cast<std::uint32_t>(model.ws));
    w.u32(static_cast<std::uint32_t>(model.interp_length));
    detail::write_model_file(path, detail::kKindDetector, w.buf);
}

inline DetectorModel load_detector(const std::string& path) {
    const std::string payload = detail::read_model_file(path, detail::kKindDetector);
    detail::ByteReader r{payload};
    DetectorModel model;
    model.mode = r.u8() == 0 ? DetectorMode::binary : DetectorMode::multiclass;
    model.layout = detail::read_layout(r);
    model.scheme = detail::read_scheme(r);
    model.params = detail::read_params(r);
    model.gallery = detail::read_gallery(r);
    model.ws = static_cast<int>(r.u32());
    model.interp_length = static_cast<int>(r.u32());
    model.validate();
    return model;
}

}  // namespace spdmotion
