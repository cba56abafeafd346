// fcmforge: text -> chunked FCMs -> mixtures and posteriors -> what-if simulation.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <iostream>

#include "fcmforge/algebra.hpp"
#include "fcmforge/dynamics_io.hpp"
#include "fcmforge/fcm_io.hpp"
#include "fcmforge/pipeline.hpp"
#include "fcmforge/service.hpp"
#include "fcmforge/text.hpp"

namespace fs = std::filesystem;
using namespace fcmforge;

namespace {

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::validation: return 2;
        case ErrorKind::backend: return 3;
        case ErrorKind::degenerate: return 4;
        case ErrorKind::io: return 2;
    }
    return 2;
}

struct ChunkFlags {
    std::size_t d_max = 0;
    std::optional<double> alpha;
    std::optional<double> alpha1;
    std::optional<double> alpha2;

    void add(CLI::App* cmd) {
        cmd->add_option("--d-max", d_max, "Recursion depth of the binary split");
        cmd->add_option("--alpha", alpha, "Proportional overlap: alpha1 = 1 - alpha, alpha2 = alpha");
        cmd->add_option("--alpha1", alpha1, "Trailing fraction of the left chunk");
        cmd->add_option("--alpha2", alpha2, "Leading fraction of the right chunk");
    }

    void apply(RunConfig& c) const {
        c.d_max = d_max;
        if (alpha && (alpha1 || alpha2)) throw ValidationError("give either --alpha or --alpha1/--alpha2");
        if (alpha) c.overlap = OverlapSpec::proportional(*alpha);
        if (alpha1 || alpha2) {
            if (!alpha1 || !alpha2) throw ValidationError("--alpha1 and --alpha2 go together");
            c.overlap = OverlapSpec{*alpha1, *alpha2};
        }
    }
};

struct BackendFlags {
    std::string fixture_dir;
    bool live = false;
    std::size_t max_retries = 2;
    std::size_t concurrency = 4;

    void add(CLI::App* cmd) {
        cmd->add_option("--fixture-dir", fixture_dir, "Recorded LLM replies (fixture backend)");
        cmd->add_flag("--live", live, "Call the endpoint in FCMFORGE_LLM_ENDPOINT instead of fixtures");
        cmd->add_option("--max-retries", max_retries, "Repair rounds after an invalid reply");
        cmd->add_option("--concurrency", concurrency, "Extraction calls in flight");
    }

    void apply(RunConfig& c) const {
        c.backend.max_retries = max_retries;
        c.backend.concurrency = concurrency;
        if (live) {
            c.backend.kind = BackendKind::live;
            c.backend.live = LiveConfig::from_env();
        } else if (!fixture_dir.empty()) {
            c.backend.kind = BackendKind::fixture;
            c.backend.fixture_dir = fixture_dir;
        }
    }

    void require(const RunConfig& c) const {
        if (c.backend.kind == BackendKind::fixture && c.backend.fixture_dir.empty()) {
            throw ValidationError("no LLM backend: pass --fixture-dir or --live");
        }
    }
};

struct SquashFlags {
    std::string kind = "hard";
    double threshold = 0.0;
    double steepness = 5.0;

    void add(CLI::App* cmd) {
        cmd->add_option("--squash", kind, "hard | logistic")->check(CLI::IsMember({"hard", "logistic"}));
        cmd->add_option("--threshold", threshold, "Hard threshold (active iff input > threshold)");
        cmd->add_option("--steepness", steepness, "Logistic steepness");
    }

    SquashingConfig get() const {
        auto s = kind == "hard" ? SquashingConfig::hard(threshold) : SquashingConfig::logistic(steepness);
        s.validate();
        return s;
    }
};

struct ControlFlags {
    std::vector<std::string> clamps;
    std::vector<std::string> pulses;
    std::size_t max_steps = default_max_steps;

    void add(CLI::App* cmd) {
        cmd->add_option("--clamp", clamps, "Hold a node every step: \"<label>=<value>\" (repeatable)");
        cmd->add_option("--pulse", pulses, "Set a node at one step: \"<label>=<value>@<step>\" (repeatable)");
        cmd->add_option("--max-steps", max_steps, "Update budget before giving up on an attractor");
    }

    std::vector<LabeledControl> clamp_list() const {
        std::vector<LabeledControl> out;
        for (const auto& s : clamps) out.push_back(parse_control(s, false));
        return out;
    }
    std::vector<LabeledControl> pulse_list() const {
        std::vector<LabeledControl> out;
        for (const auto& s : pulses) out.push_back(parse_control(s, true));
        return out;
    }
};

std::vector<FcmGraph> load_all(const std::vector<std::string>& paths) {
    std::vector<FcmGraph> out;
    for (const auto& p : paths) out.push_back(load_fcm(p));
    return out;
}

MixSpec parse_weights(const std::vector<double>& weights, std::size_t count, MixKind kind) {
    if (weights.empty()) return MixSpec::equal(count, kind);
    if (weights.size() != count) throw ValidationError(fmt::format("{} weights for {} FCMs", weights.size(), count));
    return MixSpec(weights, kind);
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

HttpService* active_service = nullptr;

void on_signal(int) {
    if (active_service) active_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Build, combine and question fuzzy cognitive maps extracted from text"};
    app.require_subcommand(1);

    // chunk
    auto* chunk = app.add_subcommand("chunk", "Split a document into base (and overlap) chunks");
    std::string chunk_input, chunk_out;
    ChunkFlags chunk_flags;
    chunk->add_option("input", chunk_input, "Plain-text document; paragraphs separated by blank lines")->required();
    chunk->add_option("--out-dir", chunk_out, "Run directory to write chunks/ into")->required();
    chunk_flags.add(chunk);

    // extract
    auto* extract = app.add_subcommand("extract", "Extract one local FCM per chunk of a run directory");
    std::string extract_run;
    BackendFlags extract_backend;
    extract->add_option("--run-dir", extract_run, "Run directory holding chunks/")->required();
    extract_backend.add(extract);

    // consolidate
    auto* consolidate = app.add_subcommand("consolidate", "Merge local node sets into shared likelihood FCMs");
    std::string consolidate_run;
    BackendFlags consolidate_backend;
    consolidate->add_option("--run-dir", consolidate_run, "Run directory holding extraction/")->required();
    consolidate_backend.add(consolidate);

    // mix
    auto* mix = app.add_subcommand("mix", "Convex mixture of FCM files");
    std::vector<std::string> mix_inputs;
    std::vector<double> mix_weights;
    std::string mix_out, mix_name = "mixture";
    mix->add_option("inputs", mix_inputs, "FCM JSON files")->required();
    mix->add_option("--weights", mix_weights, "Mixture weights (default equal)")->delimiter(',');
    mix->add_option("--name", mix_name, "Name of the mixed FCM");
    mix->add_option("--out", mix_out, "Output file (default stdout)");

    // dechunk
    auto* dechunk = app.add_subcommand("dechunk", "Posterior FCMs of each input against their mixture");
    std::vector<std::string> dechunk_inputs;
    std::vector<double> dechunk_weights;
    std::string dechunk_out, dechunk_handling = "clip";
    double dechunk_eps = default_prune_epsilon;
    dechunk->add_option("inputs", dechunk_inputs, "Likelihood FCM JSON files")->required();
    dechunk->add_option("--weights", dechunk_weights, "Likelihood weights (default equal)")->delimiter(',');
    dechunk->add_option("--handling", dechunk_handling, "clip | renormalize")
        ->check(CLI::IsMember({"clip", "renormalize"}));
    dechunk->add_option("--prune-eps", dechunk_eps, "Entries at or below this magnitude are dropped");
    dechunk->add_option("--out-dir", dechunk_out, "Directory for posterior-<k>.json")->required();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run a what-if question on an FCM");
    std::string sim_input, sim_out;
    std::vector<std::string> sim_init;
    SquashFlags sim_squash;
    ControlFlags sim_controls;
    simulate->add_option("input", sim_input, "FCM JSON file")->required();
    simulate->add_option("--init", sim_init, "Initial activation \"<label>=<value>\" (repeatable)");
    simulate->add_option("--out-dir", sim_out, "Write trajectory, attractor and raster files here");
    sim_squash.add(simulate);
    sim_controls.add(simulate);

    // report
    auto* report_cmd = app.add_subcommand("report", "Metric table over one or more run directories");
    std::vector<std::string> report_runs;
    std::string report_json_out;
    report_cmd->add_option("--run-dir", report_runs, "Run directory (repeatable; one column each)")->required();
    report_cmd->add_option("--json", report_json_out, "Also write the table as JSON here");

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP API over a run directory");
    int serve_port = 8080;
    std::string serve_run, serve_host = "127.0.0.1";
    serve->add_option("--port", serve_port, "Port (0 picks one)");
    serve->add_option("--host", serve_host, "Bind address");
    serve->add_option("--run-dir", serve_run, "Run directory whose fcm/ files are shared by all sessions");

    // run
    auto* run = app.add_subcommand("run", "Full pipeline: chunk, extract, consolidate, mix, de-chunk, simulate, report");
    std::string run_config, run_input, run_out, run_handling = "clip";
    std::vector<double> run_weights, run_posterior_weights;
    std::uint64_t run_seed = 0;
    ChunkFlags run_chunk;
    BackendFlags run_backend;
    SquashFlags run_squash;
    ControlFlags run_controls;
    run->add_option("--config", run_config, "JSON run configuration; other flags override it");
    run->add_option("--input", run_input, "Document to process");
    run->add_option("--out-dir", run_out, "Run directory");
    run->add_option("--weights", run_weights, "Likelihood mixture weights")->delimiter(',');
    run->add_option("--posterior-weights", run_posterior_weights, "Posterior mixture weights")->delimiter(',');
    run->add_option("--handling", run_handling, "clip | renormalize")->check(CLI::IsMember({"clip", "renormalize"}));
    run->add_option("--seed", run_seed, "Census sampling seed");
    run_chunk.add(run);
    run_backend.add(run);
    run_squash.add(run);
    run_controls.add(run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*chunk) {
            RunConfig c;
            c.input = chunk_input;
            c.output_dir = chunk_out;
            chunk_flags.apply(c);
            c.validate();
            std::vector<std::string> warnings;
            const auto plan = stages::chunk(c, warnings);
            print_warnings(warnings);
            for (const auto& s : plan.chunks) std::cout << chunk_file_name(s) << "\t" << s.lo << "\t" << s.hi << "\n";
        } else if (*extract || *consolidate) {
            const bool is_extract = static_cast<bool>(*extract);
            const auto& flags = is_extract ? extract_backend : consolidate_backend;
            RunConfig c;
            c.output_dir = is_extract ? extract_run : consolidate_run;
            flags.apply(c);
            flags.require(c);
            c.validate();
            const auto backend = make_backend(c.backend);
            std::vector<std::string> warnings;
            try {
                if (is_extract) {
                    stages::extract(c, *backend, warnings);
                } else {
                    stages::consolidate(c, *backend, warnings);
                }
            } catch (const Error& e) {
                print_warnings(warnings);
                rethrow_tagged(is_extract ? "extract" : "consolidate", e);
            }
            print_warnings(warnings);
        } else if (*mix) {
            const auto fcms = load_all(mix_inputs);
            const auto out = fcmforge::mix(fcms, parse_weights(mix_weights, fcms.size(), MixKind::likelihood), mix_name);
            if (mix_out.empty()) {
                std::cout << serialize_fcm(out);
            } else {
                save_fcm(out, mix_out);
            }
        } else if (*dechunk) {
            const auto fcms = load_all(dechunk_inputs);
            const auto set = posterior(fcms, parse_weights(dechunk_weights, fcms.size(), MixKind::likelihood));
            const auto handling = posterior_handling_from(dechunk_handling);
            std::cerr << fmt::format("{}: residual {:.3e}, rank {} of {}\n", to_string(set.method), set.residual,
                                     set.rank, set.order.size());
            for (std::size_t k = 0; k < set.matrices.size(); ++k) {
                const auto name = fmt::format("posterior-{}", k + 1);
                try {
                    const auto p = prune_to_fcm(apply_handling(set.matrices[k], handling), set.order, dechunk_eps, name);
                    save_fcm(p.with_provenance({{"operation", "posterior"},
                                                {"likelihood", fcms[k].name()},
                                                {"method", to_string(set.method)},
                                                {"handling", to_string(handling)}}),
                             (fs::path(dechunk_out) / (name + ".json")).string());
                } catch (const DegenerateError& e) {
                    std::cerr << "warning: " << name << ": " << e.what() << "\n";
                }
            }
        } else if (*simulate) {
            const auto fcm = load_fcm(sim_input);
            WhatIfQuery q;
            q.clamps = sim_controls.clamp_list();
            q.pulses = sim_controls.pulse_list();
            q.squash = sim_squash.get();
            q.max_steps = sim_controls.max_steps;
            for (const auto& s : sim_init) {
                const auto c = parse_control(s, false);
                q.init[c.label] = c.value;
            }
            const auto out = run_what_if(fcm, q);
            if (sim_out.empty()) {
                std::cout << out.trajectory_csv;
            } else {
                const fs::path dir(sim_out);
                const auto name = fcm.name();
                write_file((dir / ("trajectory-" + name + ".csv")).string(), out.trajectory_csv);
                write_file((dir / ("attractor-" + name + ".json")).string(), dump_json(out.attractor));
                write_file((dir / ("equilibrium-" + name + ".svg")).string(),
                           raster_svg(fcm, out.result.trajectory, out.controls));
            }
            const auto& a = out.result.attractor;
            std::cerr << fmt::format("{} (period {}, transient {})\n", to_string(a.kind), a.period,
                                     out.result.trajectory.transient_length);
        } else if (*report_cmd) {
            std::vector<RunReport> reports;
            for (const auto& r : report_runs) reports.push_back(report(r));
            std::cout << report_csv(reports);
            if (!report_json_out.empty()) write_file(report_json_out, dump_json(report_json(reports)));
        } else if (*serve) {
            ServiceConfig sc;
            if (!serve_run.empty()) sc.run_dir = serve_run;
            HttpService service(sc);
            const int port = service.bind(serve_host, serve_port);
            active_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << fmt::format("listening on http://{}:{}\n", serve_host, port);
            service.listen();
            active_service = nullptr;
        } else if (*run) {
            RunConfig c;
            if (!run_config.empty()) {
                const fs::path cfg(run_config);
                c = config_from_json(parse_json(read_file(run_config), cfg.filename().string()), cfg.parent_path());
            }
            if (!run_input.empty()) c.input = run_input;
            if (!run_out.empty()) c.output_dir = run_out;
            if (run->count("--d-max") || run->count("--alpha") || run->count("--alpha1")) run_chunk.apply(c);
            if (!run_weights.empty()) c.mix_weights = run_weights;
            if (!run_posterior_weights.empty()) c.posterior_mix_weights = run_posterior_weights;
            if (run->count("--handling")) c.handling = posterior_handling_from(run_handling);
            if (run->count("--seed")) c.seed = run_seed;
            if (run->count("--squash") || run->count("--threshold") || run->count("--steepness")) {
                c.squash = run_squash.get();
            }
            if (!run_controls.clamps.empty()) c.clamps = run_controls.clamp_list();
            if (!run_controls.pulses.empty()) c.pulses = run_controls.pulse_list();
            if (run->count("--max-steps")) c.max_steps = run_controls.max_steps;
            if (!run_backend.fixture_dir.empty() || run_backend.live) run_backend.apply(c);
            if (run->count("--max-retries")) c.backend.max_retries = run_backend.max_retries;
            if (run->count("--concurrency")) c.backend.concurrency = run_backend.concurrency;
            if (c.input.empty()) throw ValidationError("no input document: pass --input or set it in --config");
            run_backend.require(c);
            const auto r = run_pipeline(c);
            const auto manifest = parse_json(read_file((c.output_dir / "run-manifest.json").string()), "run-manifest");
            print_warnings(manifest.at("warnings").get<std::vector<std::string>>());
            std::cout << report_csv({r});
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
