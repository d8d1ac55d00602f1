#pragma once

#include "hybridaug/curator.hpp"
#include "hybridaug/manifest.hpp"
#include "hybridaug/manifold.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace hybridaug::gallery {

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct SessionInputs {
    DatasetManifest manifest;
    Embedding embedding;
    FilterPolicy policy;
    std::filesystem::path decision_log;
    /// Destination of POST /api/export.
    std::filesystem::path export_path;
    /// Optional directory with the browser client; served for non-API GETs.
    std::optional<std::filesystem::path> static_dir;
};

/// Loads manifest.json, embed/embedding.json and the last filter threshold
/// (filter/partition.json, if present) from a run directory.
SessionInputs load_session_inputs(const std::filesystem::path& out_dir,
                                  std::optional<std::filesystem::path> static_dir = std::nullopt);

inline constexpr int kThumbnailSide = 128;
inline constexpr int kDefaultHistogramBins = 20;

/// Review session. Manifest and embedding are fixed for its lifetime; the
/// policy and decision log change through POSTs, each bumping the revision.
/// Readers take a snapshot of the current partition and never see a
/// half-updated one.
class Session {
public:
    explicit Session(SessionInputs inputs);

    /// `target` is the request path with an optional query string.
    Response handle(std::string_view method, std::string_view target, std::string_view body);

    std::uint64_t revision() const;

private:
    struct Snapshot {
        std::uint64_t revision = 0;
        FilterPolicy policy;
        FilterResult threshold_partition;
        std::vector<std::string> kept;
        std::vector<std::string> removed;
        std::string partition_body;
    };

    std::shared_ptr<const Snapshot> snapshot() const;
    void publish(const FilterPolicy& policy, std::optional<FilterResult> reuse);

    Response get_partition() const;
    Response get_distances(std::string_view query) const;
    Response get_image(const std::string& id, bool thumbnail);
    Response get_static(std::string_view path) const;
    Response post_filter(std::string_view body);
    Response post_decision(std::string_view body);
    Response post_export();

    const SessionInputs inputs_;
    const std::string manifest_body_;
    const std::string embedding_body_;
    std::map<std::string, Origin> origin_of_;

    DecisionLog log_;
    /// Serializes policy changes and decision appends.
    std::mutex writer_;
    mutable std::shared_mutex snapshot_mutex_;
    std::shared_ptr<const Snapshot> current_;

    std::mutex thumbs_mutex_;
    std::map<std::string, std::string> thumbs_;
};

/// JSON error body {"error": {"kind", "message"[, "id"]}}.
Response error_response(int status, std::string_view kind, std::string_view message,
                        std::optional<std::string> id = std::nullopt);

/// HTTP binding of a Session.
class Server {
public:
    explicit Server(Session& session);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds host:port (port 0 picks a free one) and returns the bound port.
    /// Throws IoError when the address cannot be bound.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Parses "host:port"; throws InvalidArgument.
std::pair<std::string, int> parse_bind(const std::string& spec);

}  // namespace hybridaug::gallery
