#include "fcmforge/chunker.hpp"

#include <fmt/format.h>

#include <cmath>

#include "fcmforge/error.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge {

Document::Document(std::vector<std::string> paragraphs) : paragraphs_(std::move(paragraphs)) {
    if (paragraphs_.empty()) throw ValidationError("empty document: no non-empty paragraphs");
    for (const auto& p : paragraphs_) {
        if (trim(p).empty()) throw ValidationError("document contains an empty paragraph");
    }
}

std::string Document::text() const { return join(paragraphs_, "\n\n"); }

std::string Document::range_text(std::size_t lo, std::size_t hi) const {
    if (hi < lo) return {};
    if (lo < 1 || hi > paragraphs_.size()) {
        throw ValidationError(fmt::format("paragraph range [{}, {}] outside [1, {}]", lo, hi, paragraphs_.size()));
    }
    return join(std::vector<std::string>(paragraphs_.begin() + static_cast<std::ptrdiff_t>(lo - 1),
                                         paragraphs_.begin() + static_cast<std::ptrdiff_t>(hi)),
                "\n\n");
}

Document split_paragraphs(std::string_view raw) {
    std::vector<std::string> paragraphs;
    std::string current;
    auto flush = [&] {
        auto p = trim(current);
        if (!p.empty()) paragraphs.push_back(std::move(p));
        current.clear();
    };
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        auto end = raw.find('\n', pos);
        if (end == std::string_view::npos) end = raw.size();
        auto line = raw.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) {
            flush();
        } else {
            if (!current.empty()) current.push_back('\n');
            current.append(line);
        }
        pos = end + 1;
    }
    flush();
    if (paragraphs.empty()) throw ValidationError("empty document: no non-empty paragraphs");
    return Document(std::move(paragraphs));
}

std::string to_string(ChunkKind kind) { return kind == ChunkKind::base ? "base" : "overlap"; }

void OverlapSpec::validate() const {
    if (!(alpha1 >= 0.0 && alpha1 <= 1.0) || !(alpha2 >= 0.0 && alpha2 <= 1.0)) {
        throw ValidationError(fmt::format("split factors ({}, {}) must lie in [0, 1]", alpha1, alpha2));
    }
}

std::size_t leading_count(double alpha, std::size_t n) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError(fmt::format("split factor {} outside [0, 1]", alpha));
    double x = alpha * static_cast<double>(n);
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, static_cast<double>(n))) x = nearest;
    return std::min(n, static_cast<std::size_t>(std::ceil(x)));
}

std::size_t trailing_count(double alpha, std::size_t n) { return n - leading_count(alpha, n); }

std::vector<ChunkSpec> binary_split(const Document& doc, std::size_t d_max) {
    const std::size_t n = doc.size();
    if (d_max >= 63 || (std::size_t{1} << d_max) > n) {
        throw ValidationError(fmt::format("over-split: 2^{} chunks exceed {} paragraphs", d_max, n));
    }
    std::vector<ChunkSpec> leaves;
    leaves.reserve(std::size_t{1} << d_max);
    auto split = [&](auto&& self, std::size_t lo, std::size_t hi, std::size_t d, std::size_t k) -> void {
        if (d == d_max) {
            leaves.push_back({ChunkKind::base, d, k, lo, hi});
            return;
        }
        const std::size_t mid = (lo + hi) / 2;
        self(self, lo, mid, d + 1, 2 * k - 1);
        self(self, mid + 1, hi, d + 1, 2 * k);
    };
    split(split, 1, n, 0, 1);
    return leaves;
}

ChunkSpec leading_subchunk(const ChunkSpec& chunk, double alpha) {
    ChunkSpec out = chunk;
    out.hi = chunk.lo + leading_count(alpha, chunk.size()) - 1;
    return out;
}

ChunkSpec trailing_subchunk(const ChunkSpec& chunk, double alpha) {
    ChunkSpec out = chunk;
    out.lo = chunk.hi + 1 - trailing_count(alpha, chunk.size());
    return out;
}

std::size_t ChunkPlan::base_count() const {
    std::size_t c = 0;
    for (const auto& ch : chunks) c += ch.kind == ChunkKind::base;
    return c;
}

std::size_t ChunkPlan::overlap_count() const { return chunks.size() - base_count(); }

ChunkPlan non_overlapping_chunks(const Document& doc, std::size_t d_max) {
    ChunkPlan plan;
    plan.d_max = d_max;
    plan.paragraph_count = doc.size();
    plan.chunks = binary_split(doc, d_max);
    return plan;
}

ChunkPlan overlapping_chunks(const Document& doc, std::size_t d_max, const OverlapSpec& spec) {
    spec.validate();
    ChunkPlan plan;
    plan.d_max = d_max;
    plan.overlap = spec;
    plan.paragraph_count = doc.size();
    const auto bases = binary_split(doc, d_max);
    for (std::size_t k = 0; k < bases.size(); ++k) {
        plan.chunks.push_back(bases[k]);
        if (k + 1 == bases.size()) break;
        const auto trail = trailing_subchunk(bases[k], spec.alpha1);
        const auto lead = leading_subchunk(bases[k + 1], spec.alpha2);
        ChunkSpec joined{ChunkKind::overlap, d_max, k + 1, trail.empty() ? lead.lo : trail.lo,
                         lead.empty() ? trail.hi : lead.hi};
        if (joined.empty()) {
            plan.warnings.push_back(fmt::format("overlap chunk {} is empty at alpha1={}, alpha2={}; dropped", k + 1,
                                                spec.alpha1, spec.alpha2));
            continue;
        }
        plan.chunks.push_back(joined);
    }
    return plan;
}

std::string chunk_tag(const ChunkSpec& chunk) {
    return fmt::format("{}-{}-{}", to_string(chunk.kind), chunk.depth, chunk.position);
}

std::string chunk_file_name(const ChunkSpec& chunk) { return "chunk-" + chunk_tag(chunk) + ".txt"; }

nlohmann::json manifest_json(const ChunkPlan& plan) {
    nlohmann::json doc;
    doc["d_max"] = plan.d_max;
    doc["paragraph_count"] = plan.paragraph_count;
    doc["alpha1"] = plan.overlap ? nlohmann::json(plan.overlap->alpha1) : nlohmann::json();
    doc["alpha2"] = plan.overlap ? nlohmann::json(plan.overlap->alpha2) : nlohmann::json();
    auto chunks = nlohmann::json::array();
    for (const auto& c : plan.chunks) {
        chunks.push_back({{"kind", to_string(c.kind)}, {"d", c.depth}, {"k", c.position}, {"lo", c.lo}, {"hi", c.hi}});
    }
    doc["chunks"] = std::move(chunks);
    return doc;
}

ChunkPlan manifest_from_json(const nlohmann::json& doc) {
    try {
        ChunkPlan plan;
        plan.d_max = doc.at("d_max").get<std::size_t>();
        plan.paragraph_count = doc.at("paragraph_count").get<std::size_t>();
        if (doc.contains("alpha1") && !doc["alpha1"].is_null()) {
            plan.overlap = OverlapSpec{doc.at("alpha1").get<double>(), doc.at("alpha2").get<double>()};
        }
        for (const auto& c : doc.at("chunks")) {
            const auto kind = c.at("kind").get<std::string>();
            if (kind != "base" && kind != "overlap") throw ValidationError("unknown chunk kind '" + kind + "'");
            plan.chunks.push_back({kind == "base" ? ChunkKind::base : ChunkKind::overlap, c.at("d").get<std::size_t>(),
                                   c.at("k").get<std::size_t>(), c.at("lo").get<std::size_t>(),
                                   c.at("hi").get<std::size_t>()});
        }
        return plan;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("chunk manifest: ") + e.what());
    }
}

}  // namespace fcmforge
