#pragma once

#include "hybridaug/manifest.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hybridaug {

/// Resolved run settings. Each stage reads only its own config subsection.
struct PipelineOptions {
    /// Working directory owned by this run.
    std::filesystem::path out_dir;
    /// Input manifest; required by compose, later stages use out_dir/manifest.json.
    std::optional<std::filesystem::path> input_manifest;
    nlohmann::json config = nlohmann::json::object();
    /// Relative paths inside the config resolve against this directory.
    std::filesystem::path config_dir = ".";
    std::uint64_t seed = 0;
};

/// Reads a JSON config document; `config_dir` is set to its directory.
PipelineOptions load_options(const std::optional<std::filesystem::path>& config_path);

/// Applies precedence flag > environment (HYBRIDAUG_SEED, HYBRIDAUG_OUT) >
/// config ("seed", "out") > default.
void apply_overrides(PipelineOptions& opts, std::optional<std::uint64_t> seed_flag,
                     std::optional<std::filesystem::path> out_flag,
                     std::optional<std::filesystem::path> manifest_flag);

enum class StageName { Compose, Embed, Filter, Metrics };

std::string to_string(StageName s);
StageName stage_from_string(const std::string& s);

/// Layout of the working directory.
namespace layout {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kComposites = "compose/composites";
inline constexpr const char* kCompositeMasks = "compose/masks";
inline constexpr const char* kSketches = "compose/sketches";
inline constexpr const char* kSketchMasks = "compose/sketch_masks";
inline constexpr const char* kBackgrounds = "compose/backgrounds";
inline constexpr const char* kRecords = "compose/records.jsonl";
inline constexpr const char* kStyled = "styled";
inline constexpr const char* kEmbedding = "embed/embedding.json";
inline constexpr const char* kPartition = "filter/partition.json";
inline constexpr const char* kCurated = "filter/curated_manifest.json";
inline constexpr const char* kDecisions = "review/decisions.jsonl";
inline constexpr const char* kMetricsText = "metrics/report.txt";
}  // namespace layout

/// Runs one internal stage, updates out_dir/manifest.json, and writes
/// <stage>/report.json (deterministic) plus <stage>/timings.json (wall clock).
/// Throws PrerequisiteError listing absent outputs of earlier stages.
nlohmann::ordered_json run_stage(StageName stage, const PipelineOptions& opts);

/// Wraps an external image-to-image stage (e.g. style transfer): every input
/// stem must have exactly one output with the same stem.
struct StageContract {
    std::filesystem::path input_dir;
    std::filesystem::path output_dir;
    /// Expected output count per category; empty skips the count check.
    std::map<std::string, std::size_t> expected;
    /// Category of each input id, used for the per-category counts.
    std::map<std::string, std::string> category_of;
};

struct StageFailure {
    std::string id;
    /// missing | undecodable | dimension_mismatch | unexpected | count_mismatch
    std::string kind;
    std::string expected;
    std::string actual;
};

struct VerificationReport {
    bool passed = true;
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<StageFailure> failures;
    std::map<std::string, std::size_t> counts;
};

VerificationReport verify_external_stage(const StageContract& contract);
nlohmann::ordered_json to_json(const VerificationReport& report);

/// CLI entry for verify-stage: builds the contract from the working manifest
/// (config section "style": input_dir, output_dir), writes style/report.json,
/// and on success points the generated entries at the styled images.
nlohmann::ordered_json run_verify_stage(const PipelineOptions& opts, bool register_outputs = true);

/// Writes pretty JSON with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j);

}  // namespace hybridaug
