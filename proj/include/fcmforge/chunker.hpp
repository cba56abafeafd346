#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fcmforge {

/// Paragraph-structured text. Paragraph numbers are 1-based.
class Document {
public:
    explicit Document(std::vector<std::string> paragraphs);

    std::size_t size() const noexcept { return paragraphs_.size(); }
    const std::vector<std::string>& paragraphs() const noexcept { return paragraphs_; }
    /// Paragraphs joined by one blank line.
    std::string text() const;
    std::string range_text(std::size_t lo, std::size_t hi) const;

private:
    std::vector<std::string> paragraphs_;
};

/// Paragraphs are maximal runs separated by one or more blank lines.
Document split_paragraphs(std::string_view raw);

enum class ChunkKind { base, overlap };

std::string to_string(ChunkKind kind);

/// Inclusive paragraph interval [lo, hi]; empty when hi < lo.
struct ChunkSpec {
    ChunkKind kind = ChunkKind::base;
    std::size_t depth = 0;
    std::size_t position = 1;
    std::size_t lo = 1;
    std::size_t hi = 0;

    bool empty() const noexcept { return hi < lo; }
    std::size_t size() const noexcept { return empty() ? 0 : hi - lo + 1; }
    bool operator==(const ChunkSpec&) const = default;
};

struct OverlapSpec {
    double alpha1 = 0.5;  // trailing split factor on chunk k
    double alpha2 = 0.5;  // leading split factor on chunk k + 1

    /// Same proportion taken from both sides: (1 - alpha, alpha).
    static OverlapSpec proportional(double alpha) { return {1.0 - alpha, alpha}; }
    void validate() const;
};

/// ceil(alpha * n), with products within 1e-9 of an integer snapped to it.
std::size_t leading_count(double alpha, std::size_t n);
/// floor((1 - alpha) * n), computed as n - leading_count(alpha, n).
std::size_t trailing_count(double alpha, std::size_t n);

/// Leaves of the binary midpoint recursion, left to right.
std::vector<ChunkSpec> binary_split(const Document& doc, std::size_t d_max);

ChunkSpec leading_subchunk(const ChunkSpec& chunk, double alpha);
ChunkSpec trailing_subchunk(const ChunkSpec& chunk, double alpha);

struct ChunkPlan {
    std::size_t d_max = 0;
    std::optional<OverlapSpec> overlap;
    std::size_t paragraph_count = 0;
    std::vector<ChunkSpec> chunks;  // document order; overlap chunk k sits between bases k and k + 1
    std::vector<std::string> warnings;

    std::size_t base_count() const;
    std::size_t overlap_count() const;
};

ChunkPlan non_overlapping_chunks(const Document& doc, std::size_t d_max);

/// Bases plus the overlap chunks joining the trailing part of base k with the
/// leading part of base k + 1. Overlap chunks that come out empty are dropped
/// with a warning.
ChunkPlan overlapping_chunks(const Document& doc, std::size_t d_max, const OverlapSpec& spec);

/// "base-<d>-<k>" or "overlap-<d>-<k>".
std::string chunk_tag(const ChunkSpec& chunk);
/// "chunk-<kind>-<d>-<k>.txt"
std::string chunk_file_name(const ChunkSpec& chunk);

nlohmann::json manifest_json(const ChunkPlan& plan);
ChunkPlan manifest_from_json(const nlohmann::json& doc);

}  // namespace fcmforge
