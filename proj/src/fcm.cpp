#include "fcmforge/fcm.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fcmforge/error.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge {

EdgeMatrix::EdgeMatrix(std::vector<std::string> order, std::vector<Edge> edges, bool bounded)
    : order_(std::move(order)), bounded_(bounded) {
    std::set<std::string_view> seen;
    for (const auto& id : order_) {
        if (!seen.insert(id).second) throw ValidationError("duplicate node id '" + id + "' in edge matrix");
    }
    const std::size_t n = order_.size();
    edges_.reserve(edges.size());
    for (const auto& e : edges) {
        if (e.source >= n || e.target >= n) {
            throw ValidationError(fmt::format("edge ({}, {}) outside {}-node matrix", e.source, e.target, n));
        }
        if (!std::isfinite(e.weight)) throw ValidationError("non-finite edge weight");
        if (bounded_ && std::abs(e.weight) > 1.0) {
            throw ValidationError(fmt::format("edge weight {} outside [-1, 1] in bounded matrix", e.weight));
        }
        if (e.weight != 0.0) edges_.push_back(e);
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.source, a.target) < std::tie(b.source, b.target);
    });
    for (std::size_t i = 1; i < edges_.size(); ++i) {
        if (edges_[i].source == edges_[i - 1].source && edges_[i].target == edges_[i - 1].target) {
            throw ValidationError(fmt::format("duplicate edge {} -> {}", order_[edges_[i].source],
                                              order_[edges_[i].target]));
        }
    }
}

EdgeMatrix EdgeMatrix::from_dense(std::vector<std::string> order, const Eigen::MatrixXd& dense, bool bounded) {
    const auto n = static_cast<Eigen::Index>(order.size());
    if (dense.rows() != n || dense.cols() != n) {
        throw ValidationError(fmt::format("dense matrix is {}x{}, order has {} ids", dense.rows(), dense.cols(), n));
    }
    std::vector<Edge> edges;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (dense(i, j) != 0.0) {
                edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), dense(i, j)});
            }
        }
    }
    return EdgeMatrix(std::move(order), std::move(edges), bounded);
}

double EdgeMatrix::at(std::size_t source, std::size_t target) const {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), std::pair{source, target},
                               [](const Edge& e, const std::pair<std::size_t, std::size_t>& key) {
                                   return std::tie(e.source, e.target) < std::tie(key.first, key.second);
                               });
    if (it != edges_.end() && it->source == source && it->target == target) return it->weight;
    return 0.0;
}

double EdgeMatrix::max_abs() const noexcept {
    double m = 0.0;
    for (const auto& e : edges_) m = std::max(m, std::abs(e.weight));
    return m;
}

Eigen::MatrixXd EdgeMatrix::dense() const {
    const auto n = static_cast<Eigen::Index>(order_.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : edges_) {
        m(static_cast<Eigen::Index>(e.source), static_cast<Eigen::Index>(e.target)) = e.weight;
    }
    return m;
}

FcmGraph::FcmGraph(std::string name, std::vector<ConceptNode> nodes, EdgeMatrix matrix, nlohmann::json provenance)
    : name_(std::move(name)), nodes_(std::move(nodes)), matrix_(std::move(matrix)), provenance_(std::move(provenance)) {
    if (matrix_.size() != nodes_.size()) {
        throw ValidationError(fmt::format("FCM '{}': {} nodes but {}-node matrix", name_, nodes_.size(), matrix_.size()));
    }
    std::set<std::string> labels;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& node = nodes_[i];
        if (node.id.empty()) throw ValidationError(fmt::format("FCM '{}': empty node id", name_));
        if (matrix_.order()[i] != node.id) {
            throw ValidationError(fmt::format("FCM '{}': matrix order diverges from nodes at '{}'", name_, node.id));
        }
        auto canon = canonical_label(node.label);
        if (canon.empty()) throw ValidationError(fmt::format("FCM '{}': node '{}' has empty label", name_, node.id));
        if (!labels.insert(canon).second) {
            throw ValidationError(fmt::format("FCM '{}': duplicate label '{}'", name_, node.label));
        }
    }
}

std::optional<std::size_t> FcmGraph::find_id(std::string_view id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].id == id) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> FcmGraph::find_label(std::string_view label) const {
    const auto canon = canonical_label(label);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (canonical_label(nodes_[i].label) == canon) return i;
    }
    return std::nullopt;
}

FcmGraph FcmGraph::renamed(std::string name) const {
    FcmGraph copy = *this;
    copy.name_ = std::move(name);
    return copy;
}

FcmGraph FcmGraph::with_provenance(nlohmann::json provenance) const {
    FcmGraph copy = *this;
    copy.provenance_ = std::move(provenance);
    return copy;
}

FcmGraph build_fcm(std::string name, const std::vector<std::string>& labels, const std::vector<LabeledEdge>& edges,
                   bool bounded) {
    std::vector<ConceptNode> nodes;
    std::vector<std::string> order;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto id = "n" + std::to_string(i + 1);
        nodes.push_back({id, labels[i], std::nullopt});
        order.push_back(id);
        index[canonical_label(labels[i])] = i;
    }
    std::vector<Edge> out;
    for (const auto& e : edges) {
        auto s = index.find(canonical_label(e.source));
        auto t = index.find(canonical_label(e.target));
        if (s == index.end() || t == index.end()) {
            throw ValidationError("edge " + e.source + " -> " + e.target + " names an undeclared node");
        }
        out.push_back({s->second, t->second, e.weight});
    }
    return FcmGraph(std::move(name), std::move(nodes), EdgeMatrix(std::move(order), std::move(out), bounded));
}

MixSpec::MixSpec(std::vector<double> weights, MixKind kind) : weights_(std::move(weights)), kind_(kind) {
    if (weights_.empty()) throw ValidationError("mix spec needs at least one weight");
    double sum = 0.0;
    for (double w : weights_) {
        if (!std::isfinite(w) || w < 0.0) throw ValidationError(fmt::format("mixing weight {} is negative", w));
        sum += w;
    }
    if (std::abs(sum - 1.0) > convexity_tolerance) {
        throw ValidationError(fmt::format("mixing weights sum to {:.17g}, not 1", sum));
    }
}

MixSpec MixSpec::equal(std::size_t count, MixKind kind) {
    if (count == 0) throw ValidationError("mix spec needs at least one weight");
    return MixSpec(std::vector<double>(count, 1.0 / static_cast<double>(count)), kind);
}

std::string to_string(InverseMethod method) {
    return method == InverseMethod::exact_inverse ? "exact-inverse" : "pseudo-inverse";
}

}  // namespace fcmforge
