#pragma once

#include <span>
#include <string>

#include "fcmforge/fcm.hpp"

namespace fcmforge {

/// Union of the input node sets, sorted by canonical label. Nodes with equal
/// canonical labels across FCMs are the same node; the smallest id wins, and an
/// id already taken by another label gets a "~k" suffix.
GlobalNodeOrder align_node_sets(std::span<const FcmGraph> fcms);

/// Embeds `fcm` into `order` with zero rows and columns for absent nodes.
EdgeMatrix zero_pad(const FcmGraph& fcm, const GlobalNodeOrder& order);

/// Dense sum of w_k times each padded matrix.
Eigen::MatrixXd mixed_dense(std::span<const FcmGraph> fcms, const MixSpec& spec, const GlobalNodeOrder& order);

/// Convex mixture over the union node order. Inputs must be bounded, and so is the result.
FcmGraph mix(std::span<const FcmGraph> fcms, const MixSpec& spec, std::string name = "mixture");

struct PosteriorOptions {
    double rcond_threshold = 1e-10;     // below this the mixed matrix counts as singular
    double singular_cutoff = 1e-10;     // relative to the largest singular value
    double exact_residual_limit = 1e-8; // an exact inverse that misses this falls back to SVD
};

/// Posterior edge matrices w_k * padded(E_k) * inverse(mixed). Switches to the
/// Moore-Penrose pseudo-inverse when the mixed matrix is ill-conditioned.
PosteriorSet posterior(std::span<const FcmGraph> fcms, const MixSpec& spec, const PosteriorOptions& options = {});

EdgeMatrix clip_weights(const EdgeMatrix& matrix);
EdgeMatrix renormalize_weights(const EdgeMatrix& matrix);

inline constexpr double default_prune_epsilon = 1e-9;

/// Zeroes entries with |e| <= eps and keeps only nodes that still have an incident edge.
FcmGraph prune_to_fcm(const EdgeMatrix& matrix, const GlobalNodeOrder& order, double eps, std::string name);

}  // namespace fcmforge
