#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fcmforge {

struct ConceptNode {
    std::string id;
    std::string label;
    std::optional<std::string> theme;

    bool operator==(const ConceptNode&) const = default;
};

/// One nonzero causal edge, indexed into the owning matrix's order.
struct Edge {
    std::size_t source = 0;
    std::size_t target = 0;
    double weight = 0.0;

    bool operator==(const Edge&) const = default;
};

/// Coordinate-sparse signed edge matrix. Row is the cause, column the effect.
/// Stored edges are sorted by (source, target), unique, and never zero.
class EdgeMatrix {
public:
    EdgeMatrix() = default;
    EdgeMatrix(std::vector<std::string> order, std::vector<Edge> edges, bool bounded);

    /// Exact zeros in `dense` become absent edges.
    static EdgeMatrix from_dense(std::vector<std::string> order, const Eigen::MatrixXd& dense,
                                 bool bounded);

    std::size_t size() const noexcept { return order_.size(); }
    const std::vector<std::string>& order() const noexcept { return order_; }
    std::span<const Edge> edges() const noexcept { return edges_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    bool bounded() const noexcept { return bounded_; }

    double at(std::size_t source, std::size_t target) const;
    double max_abs() const noexcept;
    Eigen::MatrixXd dense() const;

    bool operator==(const EdgeMatrix&) const = default;

private:
    std::vector<std::string> order_;
    std::vector<Edge> edges_;
    bool bounded_ = true;
};

/// Named concept nodes plus the edge matrix over exactly those nodes, in the same order.
class FcmGraph {
public:
    FcmGraph() = default;
    FcmGraph(std::string name, std::vector<ConceptNode> nodes, EdgeMatrix matrix,
             nlohmann::json provenance = nullptr);

    const std::string& name() const noexcept { return name_; }
    const std::vector<ConceptNode>& nodes() const noexcept { return nodes_; }
    const EdgeMatrix& matrix() const noexcept { return matrix_; }
    const nlohmann::json& provenance() const noexcept { return provenance_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    std::optional<std::size_t> find_id(std::string_view id) const;
    /// Lookup by canonical label.
    std::optional<std::size_t> find_label(std::string_view label) const;

    FcmGraph renamed(std::string name) const;
    FcmGraph with_provenance(nlohmann::json provenance) const;

    bool operator==(const FcmGraph&) const = default;

private:
    std::string name_;
    std::vector<ConceptNode> nodes_;
    EdgeMatrix matrix_;
    nlohmann::json provenance_;
};

/// Convenience edge by label, for building FCMs by hand.
struct LabeledEdge {
    std::string source;
    std::string target;
    double weight = 0.0;
};

/// Builds an FCM with ids n1..nk in label order given.
FcmGraph build_fcm(std::string name, const std::vector<std::string>& labels,
                   const std::vector<LabeledEdge>& edges, bool bounded = true);

/// Union node order across FCMs, sorted by canonical label.
struct GlobalNodeOrder {
    std::vector<std::string> ids;
    std::vector<std::string> labels;
    std::vector<std::optional<std::string>> themes;
    std::map<std::string, std::size_t> label_index;  // canonical label -> position

    std::size_t size() const noexcept { return ids.size(); }
};

enum class MixKind { likelihood, posterior };

class MixSpec {
public:
    static constexpr double convexity_tolerance = 1e-12;

    MixSpec(std::vector<double> weights, MixKind kind = MixKind::likelihood);
    static MixSpec equal(std::size_t count, MixKind kind = MixKind::likelihood);

    const std::vector<double>& weights() const noexcept { return weights_; }
    MixKind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return weights_.size(); }

private:
    std::vector<double> weights_;
    MixKind kind_;
};

enum class InverseMethod { exact_inverse, pseudo_inverse };

std::string to_string(InverseMethod method);

struct PosteriorSet {
    GlobalNodeOrder order;
    std::vector<EdgeMatrix> matrices;
    InverseMethod method = InverseMethod::exact_inverse;
    double residual = 0.0;  // max-norm of (sum of posteriors - I)
    std::size_t rank = 0;   // numerical rank of the mixed matrix
};

}  // namespace fcmforge
