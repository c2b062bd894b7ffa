// The motion-recognition network: per-part 3x3 convolution, six-way
// subsequence split, the two Gaussian-aggregation branch stacks (spatial-then-
// temporal and temporal-then-spatial), Stiefel-weighted compression, tangent
// mapping, and the fully connected feature head. Plus the contrastive loss and
// the 1-NN gallery classifier built on the features.
//
// Branch stack, per (part, subsequence), five layers:
//   1. Gaussian aggregation of 3-vector samples (spatial rows for the ST
//      branch, per-joint trajectories for the TS branch) -> 4x4 SPD per set
//   2. eigenvalue rectification at epsilon
//   3. matrix log + isometric vectorization -> 10-vector per set
//   4. Gaussian aggregation of those vectors across the other axis -> 11x11
//   5. eigenvalue rectification -> branch output
//
// Branch outputs are indexed branch-major: ((branch * parts) + part) * 6 +
// subsequence, with branch 0 = spatial-temporal, 1 = temporal-spatial. The
// Stiefel weight list follows the same order.
#pragma once

#include "spdmotion/rng.hpp"
#include "spdmotion/skeleton.hpp"
#include "spdmotion/spd_ops.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdmotion {

constexpr int kCoordDim = 3;
constexpr int kStage1Dim = kCoordDim + 1;                          // 4
constexpr int kStage3Len = kStage1Dim * (kStage1Dim + 1) / 2;      // 10
constexpr int kBranchDim = kStage3Len + 1;                         // 11
constexpr int kSubsequences = 6;
constexpr int kBranches = 2;

struct ConvKernel {
    Eigen::Matrix3d weights = Eigen::Matrix3d::Zero();
    double bias = 0.0;
};

struct NetworkConfig {
    double epsilon = 1e-4;  // rectification threshold
    double margin = 1.0;    // contrastive margin g
    int feature_dim = 128;
    int spdc_dim = 8;       // compressed SPD dimension, <= kBranchDim
};

struct NetworkParams {
    std::vector<ConvKernel> conv;         // one kernel per part
    std::vector<StiefelWeight> stiefel;   // kBranches * parts * kSubsequences
    Matrix fc_weight;                     // feature_dim x vec_map_dim(spdc_dim)
    Vector fc_bias;
    double epsilon = 1e-4;
    double margin = 1.0;
    int feature_dim = 128;
    int spdc_dim = 8;

    int parts() const { return static_cast<int>(conv.size()); }

    static int stiefel_index(int branch, int part, int parts, int subseq) {
        return (branch * parts + part) * kSubsequences + subseq;
    }

    void validate() const {
        if (conv.empty()) throw std::invalid_argument("NetworkParams: no conv kernels");
        if (static_cast<int>(stiefel.size()) != kBranches * parts() * kSubsequences)
            throw std::invalid_argument("NetworkParams: stiefel weight count mismatch");
        for (const StiefelWeight& w : stiefel)
            if (w.rows() != spdc_dim || w.cols() != kBranchDim)
                throw std::invalid_argument("NetworkParams: stiefel weight shape mismatch");
        if (fc_weight.rows() != feature_dim ||
            fc_weight.cols() != vec_map_dim(spdc_dim) || fc_bias.size() != feature_dim)
            throw std::invalid_argument("NetworkParams: fc shape mismatch");
        if (epsilon <= 0.0) throw std::invalid_argument("NetworkParams: epsilon must be positive");
        if (margin <= 0.0) throw std::invalid_argument("NetworkParams: margin must be positive");
    }

    /// Seeded initialization: small-uniform conv kernels, Stiefel weights from
    /// QR of Gaussian matrices, fan-scaled uniform FC weights.
    static NetworkParams init(int parts, const NetworkConfig& cfg, std::uint64_t seed) {
        if (parts < 1) throw std::invalid_argument("NetworkParams::init: need at least one part");
        if (cfg.spdc_dim < 1 || cfg.spdc_dim > kBranchDim)
            throw std::invalid_argument("NetworkParams::init: spdc_dim out of range");
        Rng rng(seed);
        NetworkParams p;
        p.epsilon = cfg.epsilon;
        p.margin = cfg.margin;
        p.feature_dim = cfg.feature_dim;
        p.spdc_dim = cfg.spdc_dim;
        // identity-dominant kernels: the input signal passes through at unit
        // gain initially, so the statistics layers see full-scale coordinates
        // instead of values shrunk toward the rectification floor
        p.conv.resize(static_cast<std::size_t>(parts));
        for (ConvKernel& k : p.conv) {
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) k.weights(i, j) = rng.uniform(-0.1, 0.1);
            k.weights(1, 1) += 1.0;
            k.bias = 0.0;
        }
        const int n_weights = kBranches * parts * kSubsequences;
        p.stiefel.reserve(static_cast<std::size_t>(n_weights));
        for (int i = 0; i < n_weights; ++i) {
            Matrix g(kBranchDim, cfg.spdc_dim);
            for (Eigen::Index r = 0; r < g.rows(); ++r)
                for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = rng.normal();
            Eigen::HouseholderQR<Matrix> qr(g);
            Matrix q = qr.householderQ() * Matrix::Identity(kBranchDim, cfg.spdc_dim);
            Matrix r_mat = qr.matrixQR().topRows(cfg.spdc_dim).triangularView<Eigen::Upper>();
            for (int c = 0; c < cfg.spdc_dim; ++c)
                if (r_mat(c, c) < 0.0) q.col(c) = -q.col(c);
            p.stiefel.push_back(StiefelWeight::from_orthonormal_unchecked(q.transpose()));
        }
        const Eigen::Index fc_in = vec_map_dim(cfg.spdc_dim);
        const double bound = std::sqrt(6.0 / static_cast<double>(fc_in + cfg.feature_dim));
        p.fc_weight.resize(cfg.feature_dim, fc_in);
        for (Eigen::Index r = 0; r < p.fc_weight.rows(); ++r)
            for (Eigen::Index c = 0; c < p.fc_weight.cols(); ++c)
                p.fc_weight(r, c) = rng.uniform(-bound, bound);
        p.fc_bias = Vector::Zero(cfg.feature_dim);
        return p;
    }
};

// --- convolution ---------------------------------------------------------------

/// 2-D cross-correlation of one m x 3 part matrix with a 3x3 kernel, stride 1,
/// zero padding 1 (same-size output), plus a scalar bias.
inline Frame conv2d_same(const Frame& input, const ConvKernel& kernel) {
    const Eigen::Index rows = input.rows();
    Frame out(rows, 3);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) {
            double acc = kernel.bias;
            for (int u = -1; u <= 1; ++u) {
                const Eigen::Index r = i + u;
                if (r < 0 || r >= rows) continue;
                for (int v = -1; v <= 1; ++v) {
                    const Eigen::Index c = j + v;
                    if (c < 0 || c >= 3) continue;
                    acc += kernel.weights(u + 1, v + 1) * input(r, c);
                }
            }
            out(i, j) = acc;
        }
    }
    return out;
}

inline std::vector<Frame> conv_forward(const std::vector<Frame>& part_frames,
                                       const ConvKernel& kernel) {
    std::vector<Frame> out;
    out.reserve(part_frames.size());
    for (const Frame& f : part_frames) out.push_back(conv2d_same(f, kernel));
    return out;
}

// --- branch stacks ---------------------------------------------------------------

/// Everything the backward pass needs from one branch evaluation.
struct BranchTrace {
    std::vector<Matrix> sample_sets;  // stage-1 inputs, each kCoordDim x n
    std::vector<Matrix> ga1;          // stage-1 outputs (4x4)
    std::vector<Matrix> re1;          // stage-2 outputs
    std::vector<Vector> vecs;         // stage-3 outputs (10-vectors)
    Matrix ga4;                       // stage-4 output (11x11)
    Matrix re4;                       // stage-5 output, the branch result
};

/// Stages 1-5 on a list of 3-vector sample sets (matrices with samples as
/// columns). Shared by both branches; they differ only in how the sets are cut.
inline SpdMatrix branch_forward(std::vector<Matrix> sample_sets, double eps,
                                BranchTrace* trace = nullptr) {
    if (sample_sets.empty()) throw std::invalid_argument("branch_forward: no sample sets");
    std::vector<Vector> vecs;
    vecs.reserve(sample_sets.size());
    std::vector<Matrix> ga1_store, re1_store;
    for (const Matrix& set : sample_sets) {
        SpdMatrix ga = gaussian_aggregate(set);
        SpdMatrix re = re_eig(ga, eps);
        vecs.push_back(vec_map(log_eig(re)));
        if (trace) {
            ga1_store.push_back(ga.mat());
            re1_store.push_back(re.mat());
        }
    }
    Matrix stacked(kStage3Len, static_cast<Eigen::Index>(vecs.size()));
    for (std::size_t i = 0; i < vecs.size(); ++i) stacked.col(static_cast<Eigen::Index>(i)) = vecs[i];
    SpdMatrix ga4 = gaussian_aggregate(stacked);
    SpdMatrix re4 = re_eig(ga4, eps);
    if (trace) {
        trace->sample_sets = std::move(sample_sets);
        trace->ga1 = std::move(ga1_store);
        trace->re1 = std::move(re1_store);
        trace->vecs = std::move(vecs);
        trace->ga4 = ga4.mat();
        trace->re4 = re4.mat();
    }
    return re4;
}

/// Sample sets for the spatial-then-temporal branch: one set per frame, the
/// part's joint rows as 3-vector samples.
inline std::vector<Matrix> st_sample_sets(const std::vector<Frame>& part_frames) {
    std::vector<Matrix> sets;
    sets.reserve(part_frames.size());
    for (const Frame& f : part_frames) sets.push_back(f.transpose());
    return sets;
}

/// Sample sets for the temporal-then-spatial branch: one set per joint, that
/// joint's trajectory across the frames as 3-vector samples.
inline std::vector<Matrix> ts_sample_sets(const std::vector<Frame>& part_frames) {
    if (part_frames.empty()) throw std::invalid_argument("ts_sample_sets: empty subsequence");
    const Eigen::Index joints = part_frames.front().rows();
    const auto n_frames = static_cast<Eigen::Index>(part_frames.size());
    std::vector<Matrix> sets;
    sets.reserve(static_cast<std::size_t>(joints));
    for (Eigen::Index j = 0; j < joints; ++j) {
        Matrix set(kCoordDim, n_frames);
        for (Eigen::Index t = 0; t < n_frames; ++t)
            set.col(t) = part_frames[static_cast<std::size_t>(t)].row(j).transpose();
        sets.push_back(std::move(set));
    }
    return sets;
}

/// Spatial statistics per frame, then temporal statistics of the tangent
/// vectors. Input: one part's frames over one subsequence.
inline SpdMatrix st_ga_forward(const std::vector<Frame>& part_frames, double eps) {
    return branch_forward(st_sample_sets(part_frames), eps);
}

/// Temporal statistics per joint, then spatial statistics of the tangent
/// vectors. Mirror of st_ga_forward with the axes swapped.
inline SpdMatrix ts_ga_forward(const std::vector<Frame>& part_frames, double eps) {
    return branch_forward(ts_sample_sets(part_frames), eps);
}

// --- full forward pass ------------------------------------------------------------

struct ForwardTrace {
    std::vector<std::vector<Frame>> part_in;   // [part][frame], pre-convolution
    std::vector<std::vector<Frame>> conv_out;  // [part][frame]
    std::vector<BranchTrace> branches;         // indexed by NetworkParams::stiefel_index
    Matrix spdc;                               // compressed SPD output
    Vector fc_input;                           // vec_map of log(spdc)
    Vector feature;
};

inline Vector network_forward(const SkeletonSequence& seq, const PartitionScheme& scheme,
                              const NetworkParams& params, ForwardTrace* trace = nullptr) {
    params.validate();
    if (static_cast<int>(scheme.parts.size()) != params.parts())
        throw std::invalid_argument("network_forward: scheme/params part count mismatch");
    const PartitionedSequence parted = partition(seq, scheme);
    const int n_parts = params.parts();

    std::vector<std::vector<Frame>> conv_out(static_cast<std::size_t>(n_parts));
    for (int p = 0; p < n_parts; ++p)
        conv_out[static_cast<std::size_t>(p)] =
            conv_forward(parted.parts[static_cast<std::size_t>(p)], params.conv[static_cast<std::size_t>(p)]);

    const SpanList spans = subsequence_spans(seq.length());
    std::vector<SpdMatrix> branch_outputs;
    branch_outputs.reserve(static_cast<std::size_t>(kBranches * n_parts * kSubsequences));
    if (trace) trace->branches.resize(static_cast<std::size_t>(kBranches * n_parts * kSubsequences));

    for (int branch = 0; branch < kBranches; ++branch) {
        for (int p = 0; p < n_parts; ++p) {
            const auto& frames = conv_out[static_cast<std::size_t>(p)];
            for (int s = 0; s < kSubsequences; ++s) {
                const auto [lo, hi] = spans.spans[static_cast<std::size_t>(s)];
                std::vector<Frame> sub(frames.begin() + lo, frames.begin() + hi);
                std::vector<Matrix> sets =
                    branch == 0 ? st_sample_sets(sub) : ts_sample_sets(sub);
                BranchTrace* bt = trace
                    ? &trace->branches[static_cast<std::size_t>(
                          NetworkParams::stiefel_index(branch, p, n_parts, s))]
                    : nullptr;
                try {
                    branch_outputs.push_back(branch_forward(std::move(sets), params.epsilon, bt));
                } catch (const std::exception& e) {
                    throw std::runtime_error("network_forward[" +
                                             std::string(branch == 0 ? "st" : "ts") + " branch, part " +
                                             std::to_string(p) + ", subsequence " + std::to_string(s) +
                                             "]: " + e.what());
                }
            }
        }
    }
    // the list above is branch-major, matching the stiefel weight order
    SpdMatrix compressed = spdc_transform(branch_outputs, params.stiefel);
    Vector fc_input = vec_map(log_eig(compressed));
    Vector feature = params.fc_weight * fc_input + params.fc_bias;
    if (trace) {
        trace->part_in = parted.parts;
        trace->conv_out = std::move(conv_out);
        trace->spdc = compressed.mat();
        trace->fc_input = std::move(fc_input);
        trace->feature = feature;
    }
    return feature;
}

// --- contrastive loss ------------------------------------------------------------

/// b * ||y1 - y2||_2 + (1 - b) * max(0, g - ||y1 - y2||_2)
inline double contrastive_loss(const Vector& y1, const Vector& y2, int b, double margin) {
    if (y1.size() != y2.size())
        throw std::invalid_argument("contrastive_loss: dimension mismatch");
    if (margin <= 0.0) throw std::invalid_argument("contrastive_loss: margin must be positive");
    const double dist = (y1 - y2).norm();
    return b != 0 ? dist : std::max(0.0, margin - dist);
}

// --- gallery classification --------------------------------------------------------

struct Gallery {
    Matrix features;          // feature_dim x entries, one column per entry
    std::vector<int> labels;  // parallel to columns

    Eigen::Index size() const { return features.cols(); }
};

/// Label of the Euclidean-nearest gallery feature; ties break to the lowest
/// gallery index.
inline int knn_classify(const Vector& feature, const Gallery& gallery) {
    if (gallery.size() == 0) throw std::invalid_argument("knn_classify: empty gallery");
    if (gallery.features.rows() != feature.size())
        throw std::invalid_argument("knn_classify: feature dimension mismatch");
    Eigen::Index best = 0;
    double best_d2 = (gallery.features.col(0) - feature).squaredNorm();
    for (Eigen::Index i = 1; i < gallery.size(); ++i) {
        const double d2 = (gallery.features.col(i) - feature).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return gallery.labels[static_cast<std::size_t>(best)];
}

// --- pair sampling ------------------------------------------------------------------

struct IndexPair {
    std::size_t first = 0;
    std::size_t second = 0;
    int same_class = 0;  // binary label b
};

/// Balanced positive/negative pair sampling over a labeled dataset; seeded.
inline std::vector<IndexPair> sample_pairs(const std::vector<int>& labels, int count, Rng& rng) {
    std::vector<std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int c = labels[i];
        if (c < 0) throw std::invalid_argument("sample_pairs: negative label");
        if (static_cast<std::size_t>(c) >= by_class.size()) by_class.resize(static_cast<std::size_t>(c) + 1);
        by_class[static_cast<std::size_t>(c)].push_back(i);
    }
    std::vector<std::size_t> classes_with_two, nonempty;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (!by_class[c].empty()) nonempty.push_back(c);
        if (by_class[c].size() >= 2) classes_with_two.push_back(c);
    }
    if (nonempty.size() < 2)
        throw std::invalid_argument("sample_pairs: need at least two classes for negative pairs");
    if (classes_with_two.empty())
        throw std::invalid_argument("sample_pairs: need a class with two items for positive pairs");
    std::vector<IndexPair> pairs;
    pairs.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        if (i % 2 == 0) {
            const auto& members = by_class[classes_with_two[rng.index(classes_with_two.size())]];
            const std::size_t a = rng.index(members.size());
            std::size_t b = rng.index(members.size() - 1);
            if (b >= a) ++b;
            pairs.push_back({members[a], members[b], 1});
        } else {
            const std::size_t ca = rng.index(nonempty.size());
            std::size_t cb = rng.index(nonempty.size() - 1);
            if (cb >= ca) ++cb;
            const auto& ma = by_class[nonempty[ca]];
            const auto& mb = by_class[nonempty[cb]];
            pairs.push_back({ma[rng.index(ma.size())], mb[rng.index(mb.size())], 0});
        }
    }
    return pairs;
}

}  // namespace spdmotion
