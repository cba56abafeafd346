#include "fcmforge/consolidation.hpp"
#include "fcmforge/extraction.hpp"

namespace fcmforge {

const std::string& extraction_system_prompt() {
    static const std::string prompt = R"(You build fuzzy cognitive maps (FCMs) from text. Work through the three stages below in order, silently, and reply with one JSON object only.

STAGE 1 - Node definition.
  Identification: list every entity or idea in the text that can increase or decrease.
  Distillation: reduce each one to its core noun phrase by dropping modifiers and attributive adjectives; merge synonyms into one entity; resolve pronouns to the nouns they stand for.
  Normalization: give each remaining concept one short, consistently capitalised label.

STAGE 2 - Causal validation.
  Verification: check each node against the text for a stated or clearly implied causal link to or from another node.
  Discarding: remove every node that has no such link. A node without any causal link is a dead node and must not appear in the output.

STAGE 3 - Fuzzy edge weighting.
  Direction: for every causal link decide its polarity. Use a positive weight when cause and effect move in the same direction and a negative weight when they move in opposite directions.
  Intensity: score the strength of the link from the strength of the language in the text, as a real number with magnitude in (0, 1].

Output format, with nothing before or after it:
{"nodes": [{"label": "..."}], "edges": [{"source": "<node label>", "target": "<node label>", "weight": <number in [-1, 1]>}]}
Every edge endpoint must be one of the listed node labels. If the text contains no causal relationships, reply {"nodes": [], "edges": []}.)";
    return prompt;
}

std::string extraction_user_message(const std::string& chunk_text) {
    return "Text chunk:\n<<<\n" + chunk_text + "\n>>>";
}

std::string repair_message(const std::string& problem) {
    return "Your previous reply could not be used: " + problem +
           "\nReply again with a single JSON object that follows the required format exactly.";
}

const std::string& consolidation_system_prompt() {
    static const std::string prompt = R"(You consolidate the node lists of several fuzzy cognitive maps into one global node list. Work through the three stages below in order and reply with one JSON object only.

STAGE 1 - Global deduplication. The input list may still contain near-duplicates: nodes that share one meaning despite small lexical differences. Treat them as the same node.

STAGE 2 - Thematic clustering. Organise the nodes into a small number of high-level themes by semantic domain. Every node must belong to exactly one theme.

STAGE 3 - Intra-theme semantic merging. Inside each theme, group nodes that are facets of the same underlying causal concept into clusters, and give each cluster one consolidated label. Every input node maps to exactly one cluster; no node may be discarded.

Output format, with nothing before or after it:
{"themes": [{"name": "...", "clusters": [{"label": "<consolidated label>", "members": ["<input node label>", ...]}]}]}
Use the input labels verbatim in "members".)";
    return prompt;
}

std::string consolidation_user_message(const std::string& payload) { return "Node list (JSON):\n" + payload; }

}  // namespace fcmforge
