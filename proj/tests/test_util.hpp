// Shared helpers for the test suites: seeded random matrices, SPD samples,
// Stiefel samples, and small synthetic sequences.
#pragma once

#include "spdmotion/rng.hpp"
#include "spdmotion/skeleton.hpp"
#include "spdmotion/spd_ops.hpp"

#include <Eigen/Dense>

namespace testutil {

using spdmotion::Matrix;
using spdmotion::Rng;
using spdmotion::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return m;
}

inline Matrix random_symmetric(Eigen::Index dim, Rng& rng, double scale = 1.0) {
    Matrix m = random_matrix(dim, dim, rng, scale);
    return 0.5 * (m + m.transpose());
}

inline Matrix random_spd(Eigen::Index dim, Rng& rng, double ridge = 1e-2) {
    Matrix a = random_matrix(dim, dim, rng);
    return a * a.transpose() + ridge * Matrix::Identity(dim, dim);
}

/// Random orthonormal-row matrix via QR of a Gaussian matrix.
inline spdmotion::StiefelWeight random_stiefel(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix g = random_matrix(cols, rows, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(cols, rows);
    return spdmotion::StiefelWeight::from(q.transpose());
}

/// A joint_count-joint sequence of the given length with seeded smooth motion.
inline spdmotion::SkeletonSequence random_sequence(int joint_count, Eigen::Index length, Rng& rng,
                                                   double capture_rate = 30.0) {
    spdmotion::SkeletonSequence seq;
    seq.capture_rate = capture_rate;
    seq.layout.joint_count = joint_count;
    seq.layout.kind = spdmotion::LayoutKind::custom;
    spdmotion::Frame base(joint_count, 3);
    for (int j = 0; j < joint_count; ++j)
        for (int c = 0; c < 3; ++c) base(j, c) = rng.uniform(-1.0, 1.0);
    for (Eigen::Index t = 0; t < length; ++t) {
        spdmotion::Frame f = base;
        for (int j = 0; j < joint_count; ++j)
            for (int c = 0; c < 3; ++c) f(j, c) += 0.2 * rng.normal();
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

}  // namespace testutil
