#include "hybridaug/error.hpp"
#include "hybridaug/gallery.hpp"
#include "hybridaug/pipeline.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

hybridaug::gallery::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int exit_code_for(std::string_view kind) {
    if (kind == "invalid_argument" || kind == "schema_error") return 2;
    if (kind == "missing_prerequisite") return 3;
    return 1;
}

int print_error(std::string_view kind, std::string_view message) {
    nlohmann::ordered_json err;
    err["error"]["kind"] = kind;
    err["error"]["message"] = message;
    std::cerr << err.dump() << '\n';
    return exit_code_for(kind);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybridaug: sketch-driven defect augmentation pipeline"};
    app.require_subcommand(1);

    std::optional<std::string> config;
    std::optional<std::string> manifest;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::string bind = "127.0.0.1:8080";
    std::optional<std::string> static_dir;
    bool no_register = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON run config");
        sub->add_option("--manifest", manifest, "input dataset manifest");
        sub->add_option("--seed", seed, "run seed (overrides HYBRIDAUG_SEED and config)");
        sub->add_option("--out", out, "working directory (overrides HYBRIDAUG_OUT and config)");
    };
    auto* compose = app.add_subcommand("compose", "condition sketches and composite them onto backgrounds");
    auto* embed = app.add_subcommand("embed", "embed real and generated images with t-SNE");
    auto* filter = app.add_subcommand("filter", "partition generated images by distance to real ones");
    auto* metrics = app.add_subcommand("metrics", "score classifier predictions");
    auto* verify = app.add_subcommand("verify-stage", "check an external stage's outputs against its inputs");
    auto* serve = app.add_subcommand("serve", "serve the review gallery for a run directory");
    for (auto* sub : {compose, embed, filter, metrics, verify, serve}) common(sub);
    verify->add_flag("--no-register", no_register, "only check; leave the manifest untouched");
    serve->add_option("--bind", bind, "host:port to listen on");
    serve->add_option("--static", static_dir, "directory with the browser client");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return print_error("invalid_argument", e.what());
    }

    try {
        hybridaug::PipelineOptions opts =
            hybridaug::load_options(config ? std::optional<std::filesystem::path>(*config) : std::nullopt);
        hybridaug::apply_overrides(opts, seed, out ? std::optional<std::filesystem::path>(*out) : std::nullopt,
                                   manifest ? std::optional<std::filesystem::path>(*manifest) : std::nullopt);

        if (*serve) {
            const auto [host, port] = hybridaug::gallery::parse_bind(bind);
            hybridaug::gallery::Session session(hybridaug::gallery::load_session_inputs(
                opts.out_dir, static_dir ? std::optional<std::filesystem::path>(*static_dir) : std::nullopt));
            hybridaug::gallery::Server server(session);
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << nlohmann::ordered_json{{"listening", host + ":" + std::to_string(bound)}}.dump() << std::endl;
            server.listen();
            g_server = nullptr;
            return 0;
        }
        nlohmann::ordered_json report;
        if (*verify) {
            report = hybridaug::run_verify_stage(opts, !no_register);
            std::cout << report.dump(2) << '\n';
            if (report.value("passed", false)) return 0;
            print_error("stage_verification_failed",
                        std::to_string(report["failures"].size()) + " failure(s); see style/report.json");
            return 4;
        }
        for (auto* sub : {compose, embed, filter, metrics})
            if (*sub) report = hybridaug::run_stage(hybridaug::stage_from_string(sub->get_name()), opts);
        std::cout << report.dump(2) << '\n';
        return 0;
    } catch (const hybridaug::Error& e) {
        return print_error(e.kind(), e.what());
    } catch (const nlohmann::json::exception& e) {
        return print_error("schema_error", e.what());
    } catch (const std::exception& e) {
        return print_error("internal", e.what());
    }
}
