#pragma once

#include "hybridaug/manifest.hpp"
#include "hybridaug/manifold.hpp"

#include <json.hpp>

#include <filesystem>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hybridaug {

/// Keep a generated point iff the distance to its nearest real point is <= threshold.
struct FilterPolicy {
    double threshold = std::numeric_limits<double>::infinity();
    /// Compare only against real points of the same category.
    bool per_category = true;
};

void validate(const FilterPolicy& policy);

struct NearestReal {
    /// Generated point.
    std::string id;
    std::string nearest_real_id;
    double distance = 0.0;
};

/// Partition of the generated points, each list in embedding order.
struct FilterResult {
    std::vector<std::string> kept;
    std::vector<std::string> removed;
    /// One entry per generated point, in embedding order.
    std::vector<NearestReal> distances;
};

/// Nearest-real search over a 2-D k-d tree. Throws InvalidArgument naming
/// the category when a generated point has no real point to compare against.
FilterResult filter_by_distance(const Embedding& emb, const FilterPolicy& policy);

enum class Verdict { Accept, Reject, Undecided };
enum class DecisionSource { Human, Threshold };

std::string to_string(Verdict v);
std::string to_string(DecisionSource s);
Verdict verdict_from_string(const std::string& s);

struct ReviewDecision {
    std::string composite_id;
    Verdict verdict = Verdict::Undecided;
    DecisionSource source = DecisionSource::Human;
    /// ISO-8601 UTC, e.g. 2024-05-01T12:00:00Z.
    std::string timestamp;
    std::optional<std::string> note;
    /// Position in the log; later revisions supersede earlier ones.
    std::uint64_t revision = 0;

    friend bool operator==(const ReviewDecision&, const ReviewDecision&) = default;
};

nlohmann::ordered_json decision_to_json(const ReviewDecision& d);
ReviewDecision decision_from_json(const nlohmann::json& j);

std::string utc_now_iso8601();

/// Human verdicts override the threshold: the latest human reject removes an
/// id, the latest human accept restores it, undecided reverts to the
/// threshold verdict. Decisions on ids outside the partition are skipped and
/// reported through `warnings`. Output follows embedding order.
std::vector<std::string> apply_decisions(const FilterResult& partition,
                                         std::span<const ReviewDecision> decisions,
                                         std::vector<std::string>* warnings = nullptr);

/// Append-only JSON-lines decision store. Appends are serialized and flushed
/// before returning.
class DecisionLog {
public:
    explicit DecisionLog(std::filesystem::path path);

    const std::filesystem::path& path() const noexcept { return path_; }

    /// Assigns the next revision and timestamp (if empty), persists, and
    /// returns the stored record.
    ReviewDecision append(ReviewDecision decision);

    std::vector<ReviewDecision> entries() const;

    /// Reads a log file; a trailing line without newline (torn write) is ignored.
    static std::vector<ReviewDecision> read(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::vector<ReviewDecision> entries_;
};

struct CuratedExport {
    DatasetManifest manifest;
    /// Per category, zeros included, in category order.
    std::vector<std::pair<std::string, std::size_t>> counts;
};

/// Manifest restricted to the kept ids with stage set to curated; provenance
/// and masks are carried over. Throws NotFound for ids absent from `manifest`.
CuratedExport export_curated(const DatasetManifest& manifest, std::span<const std::string> kept);

nlohmann::ordered_json counts_to_json(const std::vector<std::pair<std::string, std::size_t>>& counts);

}  // namespace hybridaug
