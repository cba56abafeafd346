#include "fcmforge/algebra.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fcmforge/error.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge {

namespace {

struct Candidate {
    std::string id;
    std::string label;
    std::optional<std::string> theme;
};

std::vector<std::size_t> positions_in(const FcmGraph& fcm, const GlobalNodeOrder& order) {
    std::vector<std::size_t> pos(fcm.size());
    for (std::size_t i = 0; i < fcm.size(); ++i) {
        auto it = order.label_index.find(canonical_label(fcm.nodes()[i].label));
        if (it == order.label_index.end()) {
            throw ValidationError(fmt::format("padding error: node '{}' of FCM '{}' is not in the global order",
                                              fcm.nodes()[i].label, fcm.name()));
        }
        pos[i] = it->second;
    }
    return pos;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double cutoff, std::size_t& rank) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    const double limit = cutoff * (sigma.size() > 0 ? sigma(0) : 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
    rank = 0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma(i) > limit) {
            inv(i) = 1.0 / sigma(i);
            ++rank;
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace

GlobalNodeOrder align_node_sets(std::span<const FcmGraph> fcms) {
    std::map<std::string, Candidate> by_label;
    for (const auto& fcm : fcms) {
        std::map<std::string, std::string> local;
        for (const auto& node : fcm.nodes()) {
            auto canon = canonical_label(node.label);
            auto [it, inserted] = local.emplace(canon, node.id);
            if (!inserted && it->second != node.id) {
                throw ValidationError(fmt::format("alignment conflict: label '{}' used by ids '{}' and '{}' in FCM '{}'",
                                                  node.label, it->second, node.id, fcm.name()));
            }
            auto found = by_label.find(canon);
            if (found == by_label.end()) {
                by_label.emplace(canon, Candidate{node.id, node.label, node.theme});
            } else if (std::tie(node.id, node.label) < std::tie(found->second.id, found->second.label)) {
                found->second = Candidate{node.id, node.label, node.theme};
            }
        }
    }
    GlobalNodeOrder order;
    std::set<std::string> used_ids;
    for (auto& [canon, c] : by_label) {
        // Identity across FCMs is by label, so an id reused for another label
        // (n1 in two independent extractions, say) is renamed rather than rejected.
        if (!used_ids.insert(c.id).second) {
            std::string fresh;
            for (std::size_t k = 2; !used_ids.insert(fresh = fmt::format("{}~{}", c.id, k)).second; ++k) {
            }
            c.id = fresh;
        }
        order.label_index.emplace(canon, order.ids.size());
        order.ids.push_back(c.id);
        order.labels.push_back(c.label);
        order.themes.push_back(c.theme);
    }
    return order;
}

EdgeMatrix zero_pad(const FcmGraph& fcm, const GlobalNodeOrder& order) {
    const auto pos = positions_in(fcm, order);
    std::vector<Edge> edges;
    edges.reserve(fcm.matrix().edge_count());
    for (const auto& e : fcm.matrix().edges()) edges.push_back({pos[e.source], pos[e.target], e.weight});
    return EdgeMatrix(order.ids, std::move(edges), fcm.matrix().bounded());
}

Eigen::MatrixXd mixed_dense(std::span<const FcmGraph> fcms, const MixSpec& spec, const GlobalNodeOrder& order) {
    if (spec.size() != fcms.size()) {
        throw ValidationError(fmt::format("{} mixing weights for {} FCMs", spec.size(), fcms.size()));
    }
    const auto n = static_cast<Eigen::Index>(order.size());
    Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < fcms.size(); ++k) {
        const double w = spec.weights()[k];
        const auto pos = positions_in(fcms[k], order);
        for (const auto& e : fcms[k].matrix().edges()) {
            mixed(static_cast<Eigen::Index>(pos[e.source]), static_cast<Eigen::Index>(pos[e.target])) += w * e.weight;
        }
    }
    return mixed;
}

FcmGraph mix(std::span<const FcmGraph> fcms, const MixSpec& spec, std::string name) {
    for (const auto& f : fcms) {
        if (!f.matrix().bounded()) {
            throw ValidationError(fmt::format("FCM '{}' is unbounded; clip or renormalize before mixing", f.name()));
        }
    }
    const auto order = align_node_sets(fcms);
    Eigen::MatrixXd mixed = mixed_dense(fcms, spec, order);
    // Weights may sum to 1 +- 1e-12; keep the closure exact.
    mixed = mixed.cwiseMax(-1.0).cwiseMin(1.0);
    std::vector<ConceptNode> nodes;
    for (std::size_t i = 0; i < order.size(); ++i) nodes.push_back({order.ids[i], order.labels[i], order.themes[i]});
    nlohmann::json provenance = {{"operation", "mix"}, {"kind", spec.kind() == MixKind::likelihood ? "likelihood" : "posterior"}};
    nlohmann::json inputs = nlohmann::json::array();
    for (std::size_t k = 0; k < fcms.size(); ++k) inputs.push_back({{"fcm", fcms[k].name()}, {"weight", spec.weights()[k]}});
    provenance["inputs"] = std::move(inputs);
    return FcmGraph(std::move(name), std::move(nodes), EdgeMatrix::from_dense(order.ids, mixed, true),
                    std::move(provenance));
}

PosteriorSet posterior(std::span<const FcmGraph> fcms, const MixSpec& spec, const PosteriorOptions& options) {
    if (fcms.empty()) throw ValidationError("posterior needs at least one FCM");
    PosteriorSet out;
    out.order = align_node_sets(fcms);
    const Eigen::MatrixXd mixed = mixed_dense(fcms, spec, out.order);
    if (mixed.cwiseAbs().maxCoeff() == 0.0) {
        throw DegenerateError("mixed edge matrix is all zero; no posterior is defined");
    }
    const auto n = mixed.rows();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);

    std::vector<Eigen::MatrixXd> padded;
    padded.reserve(fcms.size());
    for (const auto& f : fcms) padded.push_back(zero_pad(f, out.order).dense());

    auto build = [&](const Eigen::MatrixXd& inverse) {
        std::vector<Eigen::MatrixXd> result;
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t k = 0; k < fcms.size(); ++k) {
            result.push_back(spec.weights()[k] * padded[k] * inverse);
            sum += result.back();
        }
        return std::pair{std::move(result), (sum - identity).cwiseAbs().maxCoeff()};
    };

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(mixed);
    const double rcond = lu.rcond();
    std::vector<Eigen::MatrixXd> dense;
    bool exact = false;
    if (std::isfinite(rcond) && rcond >= options.rcond_threshold) {
        auto [result, residual] = build(lu.inverse());
        if (residual <= options.exact_residual_limit) {
            dense = std::move(result);
            out.residual = residual;
            out.method = InverseMethod::exact_inverse;
            out.rank = static_cast<std::size_t>(n);
            exact = true;
        }
    }
    if (!exact) {
        std::size_t rank = 0;
        auto [result, residual] = build(pseudo_inverse(mixed, options.singular_cutoff, rank));
        dense = std::move(result);
        out.residual = residual;
        out.method = InverseMethod::pseudo_inverse;
        out.rank = rank;
    }
    for (auto& m : dense) out.matrices.push_back(EdgeMatrix::from_dense(out.order.ids, m, false));
    return out;
}

EdgeMatrix clip_weights(const EdgeMatrix& matrix) {
    std::vector<Edge> edges(matrix.edges().begin(), matrix.edges().end());
    for (auto& e : edges) {
        if (std::abs(e.weight) > 1.0) e.weight = std::copysign(1.0, e.weight);
    }
    return EdgeMatrix(matrix.order(), std::move(edges), true);
}

EdgeMatrix renormalize_weights(const EdgeMatrix& matrix) {
    const double peak = matrix.max_abs();
    if (peak == 0.0) throw ValidationError("renormalization error: matrix has no nonzero entry");
    std::vector<Edge> edges(matrix.edges().begin(), matrix.edges().end());
    if (peak > 1.0) {
        for (auto& e : edges) e.weight = std::clamp(e.weight / peak, -1.0, 1.0);
    }
    return EdgeMatrix(matrix.order(), std::move(edges), true);
}

FcmGraph prune_to_fcm(const EdgeMatrix& matrix, const GlobalNodeOrder& order, double eps, std::string name) {
    if (!(eps >= 0.0)) throw ValidationError("prune epsilon must be nonnegative");
    if (matrix.order() != order.ids) throw ValidationError("prune: matrix order does not match the node order");
    std::vector<Edge> kept;
    std::vector<bool> incident(matrix.size(), false);
    for (const auto& e : matrix.edges()) {
        if (std::abs(e.weight) > eps) {
            kept.push_back(e);
            incident[e.source] = incident[e.target] = true;
        }
    }
    if (kept.empty()) throw DegenerateError(fmt::format("pruning '{}' at eps={} removed every edge", name, eps));
    std::vector<std::size_t> remap(matrix.size(), 0);
    std::vector<ConceptNode> nodes;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        if (!incident[i]) continue;
        remap[i] = nodes.size();
        nodes.push_back({order.ids[i], order.labels[i], order.themes[i]});
        ids.push_back(order.ids[i]);
    }
    for (auto& e : kept) {
        e.source = remap[e.source];
        e.target = remap[e.target];
    }
    return FcmGraph(std::move(name), std::move(nodes), EdgeMatrix(std::move(ids), std::move(kept), matrix.bounded()));
}

}  // namespace fcmforge
