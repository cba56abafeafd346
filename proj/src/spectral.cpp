#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <functional>

#include "fcmforge/dynamics.hpp"

namespace fcmforge {

namespace {

// Tarjan's strongly connected components, iterative.
std::vector<std::vector<std::size_t>> strongly_connected(const EdgeMatrix& m) {
    const std::size_t n = m.size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& e : m.edges()) adj[e.source].push_back(e.target);

    constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, unvisited), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> components;
    std::size_t counter = 0;

    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unvisited) continue;
        std::vector<std::pair<std::size_t, std::size_t>> frames{{root, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            auto& [v, next] = frames.back();
            if (next < adj[v].size()) {
                const std::size_t w = adj[v][next++];
                if (index[w] == unvisited) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                std::vector<std::size_t> comp;
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                components.push_back(std::move(comp));
            }
            const std::size_t finished = v;
            frames.pop_back();
            if (!frames.empty()) {
                auto& parent = frames.back().first;
                low[parent] = std::min(low[parent], low[finished]);
            }
        }
    }
    return components;
}

// Algebraic multiplicity of 0, i.e. the dimension at which ker(B^j) stops growing.
// EigenSolver spreads a defective zero eigenvalue into a ring of radius about
// eps^(1/j), which would otherwise be counted as nonzero.
std::size_t zero_multiplicity(const Eigen::MatrixXd& block) {
    const auto k = block.rows();
    const double norm = std::max(1.0, block.operatorNorm());
    Eigen::MatrixXd power = block;
    double scale = norm;
    std::size_t nullity = 0;
    for (Eigen::Index j = 1; j <= k; ++j) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(power);
        const auto& sv = svd.singularValues();
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > 1e-10 * scale;
        const auto next = static_cast<std::size_t>(k - rank);
        if (next == nullity) break;
        nullity = next;
        power = power * block;
        scale *= norm;
    }
    return nullity;
}

}  // namespace

std::vector<std::complex<double>> eigenvalues(const EdgeMatrix& matrix) {
    // Permuting to block-triangular form leaves the spectrum as the union of the
    // diagonal blocks' spectra.
    std::vector<std::complex<double>> out;
    out.reserve(matrix.size());
    for (const auto& comp : strongly_connected(matrix)) {
        if (comp.size() == 1) {
            out.emplace_back(matrix.at(comp[0], comp[0]), 0.0);
            continue;
        }
        const auto k = static_cast<Eigen::Index>(comp.size());
        Eigen::MatrixXd block(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            for (Eigen::Index j = 0; j < k; ++j) block(i, j) = matrix.at(comp[i], comp[j]);
        }
        Eigen::EigenSolver<Eigen::MatrixXd> solver(block, false);
        std::vector<std::complex<double>> ev(solver.eigenvalues().begin(), solver.eigenvalues().end());
        std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return std::abs(a) < std::abs(b); });
        const std::size_t zeros = zero_multiplicity(block);
        for (std::size_t i = 0; i < zeros && i < ev.size(); ++i) ev[i] = 0.0;
        out.insert(out.end(), ev.begin(), ev.end());
    }
    return out;
}

SpectralSummary spectral_summary(const FcmGraph& fcm, double tol) {
    SpectralSummary s;
    s.nonzero_edges = fcm.matrix().edge_count();
    for (const auto& ev : eigenvalues(fcm.matrix())) {
        if (std::abs(ev) > tol) ++s.nonzero_eigenvalues;
    }
    return s;
}

}  // namespace fcmforge
