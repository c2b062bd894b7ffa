// Analytic gradients of the contrastive loss with respect to every parameter
// group, Stiefel manifold updates, and the Siamese training loop.
//
// Gradients of symmetric-matrix-valued intermediates are carried as symmetric
// matrices G with dL = sum_ij G_ij dX_ij over symmetric perturbations dX.
// Backprop through the spectral maps (rectification, log) uses the symmetric
// eigendecomposition derivative in Loewner / divided-difference form. When an
// eigengap falls below kJitterGap the input is given a deterministic diagonal
// jitter before decomposing and the event is counted in the diagnostics.
#pragma once

#include "spdmotion/network.hpp"
#include "spdmotion/rng.hpp"
#include "spdmotion/skeleton.hpp"
#include "spdmotion/spd_ops.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace spdmotion {

constexpr double kJitterGap = 1e-8;
constexpr double kJitterMagnitude = 1e-9;

struct BackwardDiagnostics {
    long jitter_events = 0;
};

/// Eigendecomposition for gradient use. If any adjacent eigengap is below
/// kJitterGap, re-decomposes input + kJitterMagnitude * diag(0, 1, ..., d-1)
/// so the divided-difference quotients are taken at separated eigenvalues.
inline EigenDecomp eig_for_backward(const Matrix& x, BackwardDiagnostics* diag) {
    EigenDecomp e = sym_eig(x);
    const Eigen::Index d = e.values.size();
    bool degenerate = false;
    for (Eigen::Index i = 0; i + 1 < d; ++i)
        if (e.values[i + 1] - e.values[i] < kJitterGap) degenerate = true;
    if (degenerate) {
        Matrix jittered = x;
        for (Eigen::Index i = 0; i < d; ++i)
            jittered(i, i) += kJitterMagnitude * static_cast<double>(i);
        e = sym_eig(jittered);
        if (diag) ++diag->jitter_events;
    }
    return e;
}

/// Adjoint of X -> U f(Lambda) U^T at the decomposition e of X, applied to the
/// (symmetrized) output gradient.
template <typename F, typename Fp>
Matrix spectral_backward(const EigenDecomp& e, F f, Fp fp, const Matrix& grad_out) {
    const Eigen::Index d = e.values.size();
    const Matrix g_sym = 0.5 * (grad_out + grad_out.transpose());
    Matrix k(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            double kij;
            if (i == j) {
                kij = fp(e.values[i]);
            } else if (e.values[i] == e.values[j]) {
                kij = fp(e.values[i]);
            } else {
                kij = (f(e.values[i]) - f(e.values[j])) / (e.values[i] - e.values[j]);
            }
            k(i, j) = kij;
            k(j, i) = kij;
        }
    }
    const Matrix rotated = e.vectors.transpose() * g_sym * e.vectors;
    Matrix out = e.vectors * rotated.cwiseProduct(k) * e.vectors.transpose();
    return 0.5 * (out + out.transpose());
}

inline Matrix re_eig_backward(const Matrix& input, double eps, const Matrix& grad_out,
                              BackwardDiagnostics* diag) {
    const EigenDecomp e = eig_for_backward(input, diag);
    return spectral_backward(
        e, [eps](double x) { return std::max(x, eps); },
        [eps](double x) { return x > eps ? 1.0 : 0.0; }, grad_out);
}

inline Matrix log_eig_backward(const Matrix& input, const Matrix& grad_out,
                               BackwardDiagnostics* diag) {
    const EigenDecomp e = eig_for_backward(input, diag);
    return spectral_backward(
        e, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; }, grad_out);
}

/// Adjoint of gaussian_aggregate: gradient on each sample column given the
/// gradient on the (d+1)x(d+1) embedded statistics matrix.
inline Matrix gaussian_aggregate_backward(const Matrix& samples, const Matrix& grad_out) {
    const Eigen::Index d = samples.rows();
    const double n = static_cast<double>(samples.cols());
    const Matrix g_m = grad_out.topLeftCorner(d, d);
    const Vector g_mu = grad_out.topRightCorner(d, 1) + grad_out.bottomLeftCorner(1, d).transpose();
    Matrix grad = ((g_m + g_m.transpose()) * samples).eval();
    grad.colwise() += g_mu;
    return grad / n;
}

/// Adjoint of vec_map in the symmetric-gradient convention (vec_map is an
/// isometry, so its adjoint is vec_unmap).
inline Matrix vec_map_backward(const Vector& grad_vec, Eigen::Index dim) {
    return vec_unmap(grad_vec, dim).mat();
}

struct SpdcGrads {
    std::vector<Matrix> inputs;   // gradient per X_i
    std::vector<Matrix> weights;  // Euclidean gradient per W_i
};

inline SpdcGrads spdc_backward(const std::vector<Matrix>& inputs,
                               const std::vector<StiefelWeight>& weights,
                               const Matrix& grad_out) {
    const Matrix g = 0.5 * (grad_out + grad_out.transpose());
    SpdcGrads out;
    out.inputs.reserve(inputs.size());
    out.weights.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Matrix& w = weights[i].mat();
        out.inputs.push_back(w.transpose() * g * w);
        out.weights.push_back(2.0 * g * w * inputs[i]);
    }
    return out;
}

/// Kernel and bias gradient of the same-size 3x3 cross-correlation, accumulated
/// over a list of frames.
inline ConvKernel conv_backward(const std::vector<Frame>& inputs,
                                const std::vector<Frame>& grad_outputs) {
    ConvKernel grad;
    for (std::size_t fidx = 0; fidx < inputs.size(); ++fidx) {
        const Frame& in = inputs[fidx];
        const Frame& go = grad_outputs[fidx];
        const Eigen::Index rows = in.rows();
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < 3; ++j) {
                const double g = go(i, j);
                grad.bias += g;
                for (int u = -1; u <= 1; ++u) {
                    const Eigen::Index r = i + u;
                    if (r < 0 || r >= rows) continue;
                    for (int v = -1; v <= 1; ++v) {
                        const Eigen::Index c = j + v;
                        if (c < 0 || c >= 3) continue;
                        grad.weights(u + 1, v + 1) += g * in(r, c);
                    }
                }
            }
        }
    }
    return grad;
}

// --- whole-network backward -----------------------------------------------------

struct ParamGrads {
    std::vector<ConvKernel> conv;
    std::vector<Matrix> stiefel;
    Matrix fc_weight;
    Vector fc_bias;

    static ParamGrads zeros_like(const NetworkParams& p) {
        ParamGrads g;
        g.conv.resize(p.conv.size());
        g.stiefel.reserve(p.stiefel.size());
        for (const StiefelWeight& w : p.stiefel) g.stiefel.push_back(Matrix::Zero(w.rows(), w.cols()));
        g.fc_weight = Matrix::Zero(p.fc_weight.rows(), p.fc_weight.cols());
        g.fc_bias = Vector::Zero(p.fc_bias.size());
        return g;
    }

    void add(const ParamGrads& other) {
        for (std::size_t i = 0; i < conv.size(); ++i) {
            conv[i].weights += other.conv[i].weights;
            conv[i].bias += other.conv[i].bias;
        }
        for (std::size_t i = 0; i < stiefel.size(); ++i) stiefel[i] += other.stiefel[i];
        fc_weight += other.fc_weight;
        fc_bias += other.fc_bias;
    }
};

/// Per-sample-set gradients for one branch stack (stages 5 back to 1).
inline std::vector<Matrix> branch_backward(const BranchTrace& trace, double eps,
                                           const Matrix& grad_out, BackwardDiagnostics* diag) {
    const Matrix g_ga4 = re_eig_backward(trace.ga4, eps, grad_out, diag);
    const auto n_sets = static_cast<Eigen::Index>(trace.vecs.size());
    Matrix stacked(kStage3Len, n_sets);
    for (Eigen::Index i = 0; i < n_sets; ++i) stacked.col(i) = trace.vecs[static_cast<std::size_t>(i)];
    const Matrix g_vecs = gaussian_aggregate_backward(stacked, g_ga4);

    std::vector<Matrix> grads;
    grads.reserve(trace.sample_sets.size());
    for (Eigen::Index i = 0; i < n_sets; ++i) {
        const Matrix g_log = vec_map_backward(g_vecs.col(i), kStage1Dim);
        const Matrix g_re1 = log_eig_backward(trace.re1[static_cast<std::size_t>(i)], g_log, diag);
        const Matrix g_ga1 = re_eig_backward(trace.ga1[static_cast<std::size_t>(i)], eps, g_re1, diag);
        grads.push_back(gaussian_aggregate_backward(trace.sample_sets[static_cast<std::size_t>(i)], g_ga1));
    }
    return grads;
}

/// Gradient of a scalar loss w.r.t. all parameters, given the forward trace
/// and the loss gradient on the output feature vector.
inline ParamGrads network_backward(const ForwardTrace& trace, Eigen::Index seq_length,
                                   const NetworkParams& params, const Vector& grad_feature,
                                   BackwardDiagnostics* diag = nullptr) {
    ParamGrads grads = ParamGrads::zeros_like(params);
    const int n_parts = params.parts();

    // feature head
    grads.fc_weight = grad_feature * trace.fc_input.transpose();
    grads.fc_bias = grad_feature;
    const Vector g_fc_input = params.fc_weight.transpose() * grad_feature;

    // tangent map of the compressed matrix
    const Matrix g_log_spdc = vec_map_backward(g_fc_input, params.spdc_dim);
    const Matrix g_spdc = log_eig_backward(trace.spdc, g_log_spdc, diag);

    // compression
    std::vector<Matrix> branch_outputs;
    branch_outputs.reserve(trace.branches.size());
    for (const BranchTrace& bt : trace.branches) branch_outputs.push_back(bt.re4);
    const SpdcGrads spdc_grads = spdc_backward(branch_outputs, params.stiefel, g_spdc);
    grads.stiefel = spdc_grads.weights;

    // branch stacks back to the convolution outputs
    std::vector<std::vector<Frame>> g_conv(static_cast<std::size_t>(n_parts));
    for (int p = 0; p < n_parts; ++p) {
        g_conv[static_cast<std::size_t>(p)].assign(
            trace.conv_out[static_cast<std::size_t>(p)].size(),
            Frame::Zero(trace.conv_out[static_cast<std::size_t>(p)].front().rows(), 3));
    }
    const SpanList spans = subsequence_spans(seq_length);
    for (int branch = 0; branch < kBranches; ++branch) {
        for (int p = 0; p < n_parts; ++p) {
            for (int s = 0; s < kSubsequences; ++s) {
                const int idx = NetworkParams::stiefel_index(branch, p, n_parts, s);
                const auto [lo, hi] = spans.spans[static_cast<std::size_t>(s)];
                const std::vector<Matrix> set_grads = branch_backward(
                    trace.branches[static_cast<std::size_t>(idx)], params.epsilon,
                    spdc_grads.inputs[static_cast<std::size_t>(idx)], diag);
                auto& target = g_conv[static_cast<std::size_t>(p)];
                if (branch == 0) {
                    // one set per frame; samples are the part's joint rows
                    for (Eigen::Index t = 0; t < hi - lo; ++t)
                        target[static_cast<std::size_t>(lo + t)] +=
                            set_grads[static_cast<std::size_t>(t)].transpose();
                } else {
                    // one set per joint; samples are that joint's frames
                    for (std::size_t j = 0; j < set_grads.size(); ++j)
                        for (Eigen::Index t = 0; t < hi - lo; ++t)
                            target[static_cast<std::size_t>(lo + t)].row(static_cast<Eigen::Index>(j)) +=
                                set_grads[j].col(t).transpose();
                }
            }
        }
    }
    for (int p = 0; p < n_parts; ++p)
        grads.conv[static_cast<std::size_t>(p)] =
            conv_backward(trace.part_in[static_cast<std::size_t>(p)], g_conv[static_cast<std::size_t>(p)]);
    return grads;
}

// --- contrastive pair backward -----------------------------------------------------

struct PairResult {
    double loss = 0.0;
    ParamGrads grads;
};

/// Loss gradient on the first feature of a pair; the second gets the negation.
inline Vector contrastive_grad_y1(const Vector& y1, const Vector& y2, int b, double margin) {
    const Vector diff = y1 - y2;
    const double dist = diff.norm();
    if (dist < 1e-12) return Vector::Zero(y1.size());
    const Vector unit = diff / dist;
    if (b != 0) return unit;
    return dist < margin ? Vector(-unit) : Vector(Vector::Zero(y1.size()));
}

/// Forward + backward for one Siamese pair; both branches share the one
/// parameter set, so their gradient contributions accumulate.
inline PairResult pair_backward(const SkeletonSequence& a, const SkeletonSequence& b_seq,
                                int same_class, const PartitionScheme& scheme,
                                const NetworkParams& params,
                                BackwardDiagnostics* diag = nullptr) {
    ForwardTrace ta, tb;
    const Vector y1 = network_forward(a, scheme, params, &ta);
    const Vector y2 = network_forward(b_seq, scheme, params, &tb);
    PairResult out;
    out.loss = contrastive_loss(y1, y2, same_class, params.margin);
    const Vector g1 = contrastive_grad_y1(y1, y2, same_class, params.margin);
    out.grads = network_backward(ta, a.length(), params, g1, diag);
    out.grads.add(network_backward(tb, b_seq.length(), params, -g1, diag));
    return out;
}

// --- Stiefel optimization -------------------------------------------------------

/// Projection of a Euclidean gradient onto the tangent space of the manifold
/// of orthonormal-row matrices at W.
inline Matrix stiefel_tangent_project(const StiefelWeight& w, const Matrix& grad) {
    const Matrix gwt = grad * w.mat().transpose();
    return grad - 0.5 * (gwt + gwt.transpose()) * w.mat();
}

/// Tangent-projected descent step followed by QR retraction; the result has
/// orthonormal rows again. Signs are fixed so a zero gradient returns W itself.
inline StiefelWeight stiefel_step(const StiefelWeight& w, const Matrix& grad, double lr) {
    if (lr <= 0.0) throw std::invalid_argument("stiefel_step: lr must be positive");
    if (grad.rows() != w.rows() || grad.cols() != w.cols())
        throw std::invalid_argument("stiefel_step: gradient shape mismatch");
    const Matrix stepped = (w.mat() - lr * stiefel_tangent_project(w, grad)).transpose();
    Eigen::HouseholderQR<Matrix> qr(stepped);
    Matrix q = qr.householderQ() * Matrix::Identity(stepped.rows(), stepped.cols());
    const Matrix r = qr.matrixQR().topRows(stepped.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < q.cols(); ++c)
        if (r(c, c) < 0.0) q.col(c) = -q.col(c);
    return StiefelWeight::from_orthonormal_unchecked(q.transpose());
}

// --- training loop ----------------------------------------------------------------

struct TrainOptions {
    int epochs = 10;
    int pairs_per_epoch = 200;
    double lr = 0.01;
    double lr_decay = 1.0;   // multiplicative per epoch
    double momentum = 0.0;   // Euclidean parameters only
    std::uint64_t seed = 0;
};

struct TrainStats {
    std::vector<double> epoch_mean_loss;
    long jitter_events = 0;
};

/// Stochastic contrastive training. Euclidean step (with optional momentum)
/// for conv and FC parameters, projected step with QR retraction for the
/// Stiefel weights. Deterministic given the seed. Aborts on non-finite loss.
inline NetworkParams train(const std::vector<SkeletonSequence>& items,
                           const std::vector<int>& labels, const PartitionScheme& scheme,
                           NetworkParams params, const TrainOptions& opt,
                           TrainStats* stats = nullptr) {
    if (items.size() != labels.size())
        throw std::invalid_argument("train: items and labels differ in length");
    if (items.empty()) throw std::invalid_argument("train: empty dataset");
    params.validate();
    Rng rng(opt.seed);
    BackwardDiagnostics diag;
    ParamGrads velocity = ParamGrads::zeros_like(params);
    double lr = opt.lr;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        Rng epoch_rng = rng.fork(static_cast<std::uint64_t>(epoch) + 1);
        const std::vector<IndexPair> pairs = sample_pairs(labels, opt.pairs_per_epoch, epoch_rng);
        double loss_sum = 0.0;
        for (const IndexPair& pr : pairs) {
            PairResult res = pair_backward(items[pr.first], items[pr.second], pr.same_class,
                                           scheme, params, &diag);
            if (!std::isfinite(res.loss))
                throw std::runtime_error("train: loss diverged to a non-finite value");
            loss_sum += res.loss;
            // Euclidean parameters
            for (std::size_t p = 0; p < params.conv.size(); ++p) {
                velocity.conv[p].weights =
                    opt.momentum * velocity.conv[p].weights + res.grads.conv[p].weights;
                velocity.conv[p].bias = opt.momentum * velocity.conv[p].bias + res.grads.conv[p].bias;
                params.conv[p].weights -= lr * velocity.conv[p].weights;
                params.conv[p].bias -= lr * velocity.conv[p].bias;
            }
            velocity.fc_weight = opt.momentum * velocity.fc_weight + res.grads.fc_weight;
            velocity.fc_bias = opt.momentum * velocity.fc_bias + res.grads.fc_bias;
            params.fc_weight -= lr * velocity.fc_weight;
            params.fc_bias -= lr * velocity.fc_bias;
            // manifold parameters
            for (std::size_t i = 0; i < params.stiefel.size(); ++i)
                params.stiefel[i] = stiefel_step(params.stiefel[i], res.grads.stiefel[i], lr);
        }
        if (stats) stats->epoch_mean_loss.push_back(loss_sum / static_cast<double>(pairs.size()));
        lr *= opt.lr_decay;
    }
    if (stats) stats->jitter_events = diag.jitter_events;
    return params;
}

/// Features of every item under the given parameters, paired with its label.
inline Gallery build_gallery(const std::vector<SkeletonSequence>& items,
                             const std::vector<int>& labels, const PartitionScheme& scheme,
                             const NetworkParams& params) {
    if (items.empty()) throw std::invalid_argument("build_gallery: empty dataset");
    if (items.size() != labels.size())
        throw std::invalid_argument("build_gallery: items and labels differ in length");
    Gallery g;
    g.features.resize(params.feature_dim, static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i)
        g.features.col(static_cast<Eigen::Index>(i)) = network_forward(items[i], scheme, params);
    g.labels = labels;
    return g;
}

}  // namespace spdmotion
