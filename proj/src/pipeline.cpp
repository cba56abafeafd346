#include "fcmforge/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

#include "fcmforge/algebra.hpp"
#include "fcmforge/consolidation.hpp"
#include "fcmforge/dynamics_io.hpp"
#include "fcmforge/extraction.hpp"
#include "fcmforge/fcm_io.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Run directory layout (schema 1).
fs::path chunks_dir(const fs::path& run) { return run / "chunks"; }
fs::path fcm_path(const fs::path& run, const std::string& name) { return run / "fcm" / (name + ".json"); }
fs::path summary_path(const fs::path& run) { return run / "extraction" / "summary.json"; }
fs::path mapping_path(const fs::path& run) { return run / "consolidation" / "mapping.json"; }
fs::path census_path(const fs::path& run) { return run / "census" / "likelihood-mixture.json"; }

std::string likelihood_name(std::size_t i) { return fmt::format("likelihood-{}", i); }
std::string posterior_name(std::size_t i) { return fmt::format("posterior-{}", i); }

json read_json(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("missing artifact " + path.filename().string());
    return parse_json(read_file(path.string()), path.filename().string());
}

void write_json(const fs::path& path, const json& doc) { write_file(path.string(), dump_json(doc)); }

void write_fcm(const fs::path& run, const FcmGraph& fcm) { save_fcm(fcm, fcm_path(run, fcm.name()).string()); }

FcmGraph read_fcm(const fs::path& run, const std::string& name) {
    const auto path = fcm_path(run, name);
    if (!fs::exists(path)) throw IoError("missing artifact fcm/" + name + ".json");
    return load_fcm(path.string());
}

std::vector<FcmGraph> read_series(const fs::path& run, std::string (*name)(std::size_t)) {
    std::vector<FcmGraph> out;
    for (std::size_t i = 1; fs::exists(fcm_path(run, name(i))); ++i) out.push_back(read_fcm(run, name(i)));
    return out;
}

std::string control_text(const LabeledControl& c) {
    auto s = fmt::format("{}={}", c.label, c.value);
    if (c.step) s += fmt::format("@{}", *c.step);
    return s;
}

MixSpec weights_for(const std::optional<std::vector<double>>& weights, std::size_t count, MixKind kind,
                    const char* what) {
    if (!weights) return MixSpec::equal(count, kind);
    if (weights->size() != count) {
        throw ValidationError(fmt::format("{} has {} weights for {} FCMs", what, weights->size(), count));
    }
    return MixSpec(*weights, kind);
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
    if (!doc.contains(key) || doc[key].is_null()) return fallback;
    return doc[key].get<T>();
}

}  // namespace

std::string to_string(PosteriorHandling h) { return h == PosteriorHandling::clip ? "clip" : "renormalize"; }

PosteriorHandling posterior_handling_from(const std::string& s) {
    if (s == "clip") return PosteriorHandling::clip;
    if (s == "renormalize") return PosteriorHandling::renormalize;
    throw ValidationError("posterior handling must be 'clip' or 'renormalize', got '" + s + "'");
}

EdgeMatrix apply_handling(const EdgeMatrix& raw, PosteriorHandling h) {
    return h == PosteriorHandling::clip ? clip_weights(raw) : renormalize_weights(raw);
}

void rethrow_tagged(const std::string& stage, const Error& e) {
    throw Error(e.kind(), stage + ": " + e.what());
}

// ---------------------------------------------------------------------------
// configuration

void RunConfig::validate() const {
    if (overlap) overlap->validate();
    if (mix_weights) (void)MixSpec(*mix_weights);
    if (posterior_mix_weights) (void)MixSpec(*posterior_mix_weights, MixKind::posterior);
    if (!(prune_epsilon >= 0.0)) throw ValidationError("prune epsilon must be nonnegative");
    squash.validate();
    if (census.sample_size == 0) throw ValidationError("census sample size must be positive");
    if (max_steps == 0) throw ValidationError("max_steps must be positive");
    if (backend.concurrency == 0) throw ValidationError("extraction concurrency must be positive");
    for (const auto* list : {&clamps, &pulses}) {
        for (const auto& c : *list) {
            if (!(c.value >= 0.0 && c.value <= 1.0)) {
                throw ValidationError(fmt::format("control value for '{}' must lie in [0, 1]", c.label));
            }
        }
    }
    std::set<std::string> clamped;
    for (const auto& c : clamps) {
        if (!clamped.insert(canonical_label(c.label)).second) {
            throw ValidationError("node '" + c.label + "' is clamped twice");
        }
    }
    for (const auto& p : pulses) {
        if (clamped.count(canonical_label(p.label))) {
            throw ValidationError("node '" + p.label + "' is both clamped and pulsed");
        }
    }
}

std::string RunConfig::label() const {
    if (!overlap) return fmt::format("d{}", d_max);
    return fmt::format("d{}-overlap-{}-{}", d_max, overlap->alpha1, overlap->alpha2);
}

json config_to_json(const RunConfig& c) {
    json doc;
    doc["input"] = c.input.filename().string();
    doc["d_max"] = c.d_max;
    doc["overlap"] = c.overlap ? json{{"alpha1", c.overlap->alpha1}, {"alpha2", c.overlap->alpha2}} : json();
    doc["mix_weights"] = c.mix_weights ? json(*c.mix_weights) : json();
    doc["posterior_mix_weights"] = c.posterior_mix_weights ? json(*c.posterior_mix_weights) : json();
    doc["posterior_handling"] = to_string(c.handling);
    doc["prune_epsilon"] = c.prune_epsilon;
    doc["squash"] = squash_json(c.squash);
    doc["census"] = {{"exhaustive_limit", c.census.exhaustive_limit}, {"sample_size", c.census.sample_size}};
    doc["seed"] = c.seed;
    json backend = {{"kind", c.backend.kind == BackendKind::fixture ? "fixture" : "live"},
                    {"max_retries", c.backend.max_retries},
                    {"concurrency", c.backend.concurrency}};
    if (c.backend.kind == BackendKind::live) {
        backend["model"] = c.backend.live.model;
        backend["temperature"] = c.backend.live.temperature;
    }
    doc["backend"] = std::move(backend);
    json clamps = json::array(), pulses = json::array();
    for (const auto& x : c.clamps) clamps.push_back(control_text(x));
    for (const auto& x : c.pulses) pulses.push_back(control_text(x));
    doc["clamps"] = std::move(clamps);
    doc["pulses"] = std::move(pulses);
    doc["max_steps"] = c.max_steps;
    return doc;
}

RunConfig config_from_json(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ValidationError("run configuration must be a JSON object");
    auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    RunConfig c;
    try {
        if (doc.contains("input")) c.input = resolve(doc["input"].get<std::string>());
        if (doc.contains("output_dir")) c.output_dir = resolve(doc["output_dir"].get<std::string>());
        c.d_max = get_or<std::size_t>(doc, "d_max", 0);
        if (doc.contains("overlap") && !doc["overlap"].is_null()) {
            const auto& o = doc["overlap"];
            if (o.contains("alpha")) {
                c.overlap = OverlapSpec::proportional(o["alpha"].get<double>());
            } else {
                c.overlap = OverlapSpec{o.at("alpha1").get<double>(), o.at("alpha2").get<double>()};
            }
        }
        if (doc.contains("mix_weights") && !doc["mix_weights"].is_null()) {
            c.mix_weights = doc["mix_weights"].get<std::vector<double>>();
        }
        if (doc.contains("posterior_mix_weights") && !doc["posterior_mix_weights"].is_null()) {
            c.posterior_mix_weights = doc["posterior_mix_weights"].get<std::vector<double>>();
        }
        c.handling = posterior_handling_from(get_or<std::string>(doc, "posterior_handling", "clip"));
        c.prune_epsilon = get_or<double>(doc, "prune_epsilon", default_prune_epsilon);
        if (doc.contains("squash")) c.squash = squash_from_json(doc["squash"]);
        if (doc.contains("census")) {
            c.census.exhaustive_limit = get_or<std::size_t>(doc["census"], "exhaustive_limit", 16);
            c.census.sample_size = get_or<std::size_t>(doc["census"], "sample_size", 4096);
        }
        c.seed = get_or<std::uint64_t>(doc, "seed", 0);
        if (doc.contains("backend")) {
            const auto& b = doc["backend"];
            const auto kind = get_or<std::string>(b, "kind", "fixture");
            if (kind == "fixture") {
                c.backend.kind = BackendKind::fixture;
            } else if (kind == "live") {
                c.backend.kind = BackendKind::live;
                c.backend.live = LiveConfig::from_env();
                if (b.contains("model")) c.backend.live.model = b["model"].get<std::string>();
                if (b.contains("endpoint")) c.backend.live.endpoint = b["endpoint"].get<std::string>();
            } else {
                throw ValidationError("backend kind must be 'fixture' or 'live'");
            }
            if (b.contains("fixture_dir")) c.backend.fixture_dir = resolve(b["fixture_dir"].get<std::string>());
            c.backend.max_retries = get_or<std::size_t>(b, "max_retries", 2);
            c.backend.concurrency = get_or<std::size_t>(b, "concurrency", 4);
        }
        for (const auto& s : get_or<std::vector<std::string>>(doc, "clamps", {})) c.clamps.push_back(parse_control(s, false));
        for (const auto& s : get_or<std::vector<std::string>>(doc, "pulses", {})) c.pulses.push_back(parse_control(s, true));
        c.max_steps = get_or<std::size_t>(doc, "max_steps", default_max_steps);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed run configuration: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// stages

namespace stages {

ChunkPlan chunk(const RunConfig& config, std::vector<std::string>& warnings) {
    const auto& run = config.output_dir;
    const Document doc = split_paragraphs(read_file(config.input.string()));
    ChunkPlan plan = config.overlap ? overlapping_chunks(doc, config.d_max, *config.overlap)
                                    : non_overlapping_chunks(doc, config.d_max);
    for (const auto& c : plan.chunks) write_file((chunks_dir(run) / chunk_file_name(c)).string(), doc.range_text(c.lo, c.hi));
    write_json(chunks_dir(run) / "manifest.json", manifest_json(plan));
    warnings.insert(warnings.end(), plan.warnings.begin(), plan.warnings.end());
    return plan;
}

void extract(const RunConfig& config, const LlmBackend& backend, std::vector<std::string>& warnings) {
    const auto& run = config.output_dir;
    const ChunkPlan plan = manifest_from_json(read_json(chunks_dir(run) / "manifest.json"));
    std::vector<ExtractionJob> jobs;
    for (const auto& c : plan.chunks) {
        ExtractionJob job;
        job.text = read_file((chunks_dir(run) / chunk_file_name(c)).string());
        job.options.max_retries = config.backend.max_retries;
        job.options.fcm_id = chunk_tag(c);
        job.options.chunk = {{"tag", chunk_tag(c)}, {"lo", c.lo}, {"hi", c.hi}};
        jobs.push_back(std::move(job));
    }
    const auto records = extract_all(jobs, backend, config.backend.concurrency);

    json summary = json::array();
    std::size_t ok = 0;
    bool all_backend = true;
    for (const auto& r : records) {
        write_json(run / "extraction" / ("record-" + r.fcm_id + ".json"), record_json(r));
        json row = {{"tag", r.fcm_id}, {"ok", r.ok}};
        if (r.ok) {
            ++ok;
            write_fcm(run, r.fcm->renamed("local-" + r.fcm_id));
            for (const auto& d : r.report.dropped_dead_nodes) {
                warnings.push_back(fmt::format("{}: dropped dead node '{}'", r.fcm_id, d));
            }
        } else {
            all_backend = all_backend && r.error_kind == ErrorKind::backend;
            row["error"] = r.error;
            warnings.push_back(fmt::format("{}: extraction failed: {}", r.fcm_id, r.error));
        }
        summary.push_back(std::move(row));
    }
    write_json(summary_path(run), summary);
    if (ok == 0) {
        if (all_backend) throw BackendError("no chunk produced an FCM");
        throw DegenerateError("no chunk produced an FCM");
    }
}

void consolidate(const RunConfig& config, const LlmBackend& backend, std::vector<std::string>& warnings) {
    const auto& run = config.output_dir;
    std::vector<std::string> tags;
    for (const auto& row : read_json(summary_path(run))) {
        if (row.at("ok").get<bool>()) tags.push_back(row.at("tag").get<std::string>());
    }
    if (config.mix_weights && tags.size() != config.mix_weights->size()) {
        throw ValidationError(fmt::format("{} chunks produced FCMs but {} mix weights were given", tags.size(),
                                          config.mix_weights->size()));
    }
    std::vector<FcmGraph> locals;
    std::vector<NodeList> lists;
    for (const auto& t : tags) {
        locals.push_back(read_fcm(run, "local-" + t));
        lists.push_back({t, locals.back().nodes()});
    }
    const auto dedup = deduplicate(lists);
    const auto result = fcmforge::consolidate(dedup, backend, config.backend.max_retries);
    json transcript = json::array();
    for (const auto& a : result.attempts) {
        transcript.push_back({{"request", a.request_body}, {"response", a.response_body}, {"error", a.error}});
    }
    write_json(run / "consolidation" / "transcript.json",
               {{"payload", consolidation_payload(dedup)}, {"attempts", std::move(transcript)}});
    write_json(mapping_path(run), mapping_json(result.mapping));

    // remove stale likelihoods from an earlier run with more chunks
    for (std::size_t i = tags.size() + 1; fs::exists(fcm_path(run, likelihood_name(i))); ++i) {
        fs::remove(fcm_path(run, likelihood_name(i)));
    }
    for (std::size_t i = 0; i < tags.size(); ++i) {
        write_fcm(run, remap_fcm(locals[i], tags[i], result.mapping, &warnings).renamed(likelihood_name(i + 1)));
    }
}

void mix(const RunConfig& config, std::vector<std::string>&) {
    const auto& run = config.output_dir;
    const auto likelihoods = read_series(run, likelihood_name);
    if (likelihoods.empty()) throw IoError("missing artifact fcm/likelihood-1.json");
    const auto spec = weights_for(config.mix_weights, likelihoods.size(), MixKind::likelihood, "likelihood mixture");
    write_fcm(run, fcmforge::mix(likelihoods, spec, "likelihood-mixture"));
}

void dechunk(const RunConfig& config, std::vector<std::string>& warnings) {
    const auto& run = config.output_dir;
    const auto likelihoods = read_series(run, likelihood_name);
    if (likelihoods.empty()) throw IoError("missing artifact fcm/likelihood-1.json");
    const auto spec = weights_for(config.mix_weights, likelihoods.size(), MixKind::likelihood, "likelihood mixture");
    const auto set = posterior(likelihoods, spec);
    write_json(run / "fcm" / "posterior-set.json", {{"method", to_string(set.method)},
                                                    {"residual", set.residual},
                                                    {"rank", set.rank},
                                                    {"order", set.order.labels},
                                                    {"handling", to_string(config.handling)}});
    if (set.method == InverseMethod::pseudo_inverse) {
        warnings.push_back(fmt::format("mixed matrix is ill-conditioned (rank {} of {}); used the pseudo-inverse",
                                       set.rank, set.order.size()));
    }
    for (std::size_t i = 1; fs::exists(fcm_path(run, posterior_name(i))); ++i) {
        fs::remove(fcm_path(run, posterior_name(i)));
        fs::remove(fcm_path(run, "posterior-raw-" + std::to_string(i)));
    }

    std::vector<FcmGraph> posteriors;
    for (std::size_t k = 0; k < set.matrices.size(); ++k) {
        const auto name = posterior_name(k + 1);
        const json prov = {{"operation", "posterior"},
                           {"likelihood", likelihoods[k].name()},
                           {"method", to_string(set.method)},
                           {"handling", to_string(config.handling)}};
        try {
            write_fcm(run, prune_to_fcm(set.matrices[k], set.order, config.prune_epsilon, "posterior-raw-" +
                                        std::to_string(k + 1)).with_provenance(prov));
            const auto& raw = set.matrices[k];
            const auto fixed = apply_handling(raw, config.handling);
            posteriors.push_back(prune_to_fcm(fixed, set.order, config.prune_epsilon, name).with_provenance(prov));
            write_fcm(run, posteriors.back());
        } catch (const DegenerateError& e) {
            warnings.push_back(fmt::format("{}: {}", name, e.what()));
        }
    }
    if (posteriors.empty()) throw DegenerateError("every posterior FCM is empty");
    if (posteriors.size() != likelihoods.size() && config.posterior_mix_weights) {
        throw ValidationError("posterior mixture weights given but some posteriors are empty");
    }
    const auto pspec =
        weights_for(config.posterior_mix_weights, posteriors.size(), MixKind::posterior, "posterior mixture");
    write_fcm(run, fcmforge::mix(posteriors, pspec, "posterior-mixture"));
}

void census(const RunConfig& config, std::vector<std::string>& warnings) {
    const auto& run = config.output_dir;
    fs::remove(census_path(run));
    if (config.squash.kind != SquashKind::hard_threshold) {
        warnings.push_back("attractor census skipped: squashing is not a hard threshold");
        return;
    }
    auto policy = config.census;
    policy.seed = config.seed;
    const auto fcm = read_fcm(run, "likelihood-mixture");
    write_json(census_path(run), census_json(fcm, attractor_census(fcm, config.squash, policy)));
}

std::vector<std::string> simulate(const RunConfig& config, std::vector<std::string>& warnings) {
    const auto& run = config.output_dir;
    if (config.clamps.empty() && config.pulses.empty()) return {};
    WhatIfQuery query;
    query.clamps = config.clamps;
    query.pulses = config.pulses;
    query.squash = config.squash;
    query.max_steps = config.max_steps;
    const auto names = simulated_fcm_names(run);
    for (const auto& name : names) {
        const auto fcm = read_fcm(run, name);
        const auto out = run_what_if(fcm, query, true);
        for (const auto& s : out.skipped) warnings.push_back(fmt::format("{}: no node '{}', control skipped", name, s));
        const auto dir = run / "simulation";
        write_file((dir / ("trajectory-" + name + ".csv")).string(), out.trajectory_csv);
        write_json(dir / ("attractor-" + name + ".json"), out.attractor);
        write_file((dir / ("equilibrium-" + name + ".svg")).string(),
                   raster_svg(fcm, out.result.trajectory, out.controls));
        if (out.result.attractor.kind == AttractorKind::undetected) {
            warnings.push_back(fmt::format("{}: no attractor within {} steps", name, config.max_steps));
        }
    }
    return names;
}

}  // namespace stages

// ---------------------------------------------------------------------------
// orchestration and reporting

std::vector<std::string> simulated_fcm_names(const fs::path& run) {
    std::vector<std::string> names;
    for (std::size_t i = 1; fs::exists(fcm_path(run, likelihood_name(i))); ++i) names.push_back(likelihood_name(i));
    for (std::size_t i = 1; fs::exists(fcm_path(run, posterior_name(i))); ++i) names.push_back(posterior_name(i));
    for (const char* m : {"likelihood-mixture", "posterior-mixture"}) {
        if (fs::exists(fcm_path(run, m))) names.emplace_back(m);
    }
    return names;
}

RunReport run_pipeline(const RunConfig& config) {
    config.validate();
    if (config.output_dir.empty()) throw ValidationError("no output directory given");
    std::vector<std::string> warnings;
    auto guarded = [&](const char* stage, auto&& body) {
        try {
            return body();
        } catch (const Error& e) {
            rethrow_tagged(stage, e);
        } catch (const std::exception& e) {
            throw IoError(std::string(stage) + ": " + e.what());
        }
    };

    guarded("chunk", [&] { return stages::chunk(config, warnings); });
    const auto backend = guarded("backend", [&] { return make_backend(config.backend); });
    guarded("extract", [&] { stages::extract(config, *backend, warnings); });
    guarded("consolidate", [&] { stages::consolidate(config, *backend, warnings); });
    guarded("mix", [&] { stages::mix(config, warnings); });
    guarded("dechunk", [&] { stages::dechunk(config, warnings); });
    guarded("census", [&] { stages::census(config, warnings); });
    const auto simulated = guarded("simulate", [&] { return stages::simulate(config, warnings); });

    return guarded("report", [&] {
        write_json(config.output_dir / "run-manifest.json", {{"schema_version", run_manifest_schema},
                                                             {"configuration", config.label()},
                                                             {"config", config_to_json(config)},
                                                             {"fcms", simulated_fcm_names(config.output_dir)},
                                                             {"simulations", simulated},
                                                             {"warnings", warnings}});
        auto r = report(config.output_dir);
        write_file((config.output_dir / "report.csv").string(), report_csv({r}));
        write_json(config.output_dir / "report.json", report_json({r}));
        return r;
    });
}

RunReport report(const fs::path& run) {
    const auto manifest = read_json(run / "run-manifest.json");
    if (manifest.value("schema_version", 0) != run_manifest_schema) {
        throw ValidationError("unsupported run manifest schema in " + run.filename().string());
    }
    RunReport r;
    r.configuration = manifest.at("configuration").get<std::string>();
    r.chunks = manifest_from_json(read_json(chunks_dir(run) / "manifest.json")).chunks.size();
    const auto mapping = mapping_from_json(read_json(mapping_path(run)));
    r.merged_nodes = mapping.merged_count;
    r.unified_nodes = mapping.clusters.size();
    r.semantic_themes = mapping.theme_count();
    if (fs::exists(census_path(run))) r.attractors = read_json(census_path(run)).at("attractors").size();
    const auto spectral = spectral_summary(read_fcm(run, "likelihood-mixture"));
    r.nonzero_edges = spectral.nonzero_edges;
    r.nonzero_eigenvalues = spectral.nonzero_eigenvalues;
    return r;
}

namespace {

const std::vector<std::pair<std::string, std::optional<std::size_t> (*)(const RunReport&)>>& metric_rows() {
    static const std::vector<std::pair<std::string, std::optional<std::size_t> (*)(const RunReport&)>> rows = {
        {"chunks", [](const RunReport& r) -> std::optional<std::size_t> { return r.chunks; }},
        {"merged_nodes", [](const RunReport& r) -> std::optional<std::size_t> { return r.merged_nodes; }},
        {"unified_nodes", [](const RunReport& r) -> std::optional<std::size_t> { return r.unified_nodes; }},
        {"semantic_themes", [](const RunReport& r) -> std::optional<std::size_t> { return r.semantic_themes; }},
        {"attractors", [](const RunReport& r) { return r.attractors; }},
        {"nonzero_edges", [](const RunReport& r) -> std::optional<std::size_t> { return r.nonzero_edges; }},
        {"nonzero_eigenvalues", [](const RunReport& r) -> std::optional<std::size_t> { return r.nonzero_eigenvalues; }},
    };
    return rows;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string report_csv(const std::vector<RunReport>& reports) {
    std::string out = "metric";
    for (const auto& r : reports) out += "," + csv_cell(r.configuration);
    out += "\n";
    for (const auto& [name, get] : metric_rows()) {
        out += name;
        for (const auto& r : reports) {
            const auto v = get(r);
            out += "," + (v ? std::to_string(*v) : std::string("n/a"));
        }
        out += "\n";
    }
    return out;
}

json report_json(const std::vector<RunReport>& reports) {
    json configs = json::array();
    for (const auto& r : reports) configs.push_back(r.configuration);
    json rows = json::array();
    for (const auto& [name, get] : metric_rows()) {
        json values = json::array();
        for (const auto& r : reports) {
            const auto v = get(r);
            values.push_back(v ? json(*v) : json());
        }
        rows.push_back({{"metric", name}, {"values", std::move(values)}});
    }
    return {{"configurations", std::move(configs)}, {"rows", std::move(rows)}};
}

}  // namespace fcmforge
