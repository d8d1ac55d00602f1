#include "hybridaug/gallery.hpp"

#include "hybridaug/error.hpp"
#include "hybridaug/pipeline.hpp"
#include "hybridaug/png_io.hpp"
#include "hybridaug/raster.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

namespace hybridaug::gallery {
namespace fs = std::filesystem;
namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::ordered_json threshold_json(double t) {
    return std::isinf(t) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(t);
}

int status_for(const Error& e) {
    const std::string_view kind = e.kind();
    if (kind == "not_found") return 404;
    if (kind == "invalid_argument" || kind == "schema_error") return 400;
    if (kind == "missing_prerequisite") return 409;
    return 500;
}

std::optional<std::string> query_param(std::string_view query, std::string_view key) {
    std::istringstream in{std::string(query)};
    std::string pair;
    while (std::getline(in, pair, '&')) {
        const auto eq = pair.find('=');
        if (pair.compare(0, eq, key) == 0 && (eq == std::string::npos ? pair.size() : eq) == key.size())
            return eq == std::string::npos ? std::string() : pair.substr(eq + 1);
    }
    return std::nullopt;
}

std::string_view content_type_for(const fs::path& p) {
    const std::string ext = p.extension().string();
    if (ext == ".html") return "text/html; charset=utf-8";
    if (ext == ".js") return "text/javascript; charset=utf-8";
    if (ext == ".css") return "text/css; charset=utf-8";
    if (ext == ".png") return "image/png";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    return "application/octet-stream";
}

nlohmann::json parse_body(std::string_view body) {
    try {
        nlohmann::json j = nlohmann::json::parse(body);
        if (!j.is_object()) throw SchemaError("request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("request body is not valid JSON: ") + e.what());
    }
}

Response json_response(const nlohmann::ordered_json& j, int status = 200) {
    return {status, "application/json", j.dump(2) + "\n"};
}

}  // namespace

Response error_response(int status, std::string_view kind, std::string_view message, std::optional<std::string> id) {
    nlohmann::ordered_json err;
    err["kind"] = kind;
    err["message"] = message;
    if (id) err["id"] = *id;
    return json_response({{"error", err}}, status);
}

SessionInputs load_session_inputs(const fs::path& out_dir, std::optional<fs::path> static_dir) {
    std::vector<std::string> missing;
    for (const char* p : {layout::kManifest, layout::kEmbedding})
        if (!fs::exists(out_dir / p)) missing.emplace_back(p);
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw PrerequisiteError("serve needs stage outputs in '" + out_dir.string() + "': " + list);
    }
    SessionInputs in;
    in.manifest = load_manifest(out_dir / layout::kManifest, false);
    std::ifstream emb(out_dir / layout::kEmbedding);
    in.embedding = embedding_from_json(nlohmann::json::parse(emb));
    if (fs::exists(out_dir / layout::kPartition)) {
        std::ifstream part(out_dir / layout::kPartition);
        const auto j = nlohmann::json::parse(part);
        if (j.contains("threshold") && !j.at("threshold").is_null()) in.policy.threshold = j.at("threshold").get<double>();
        if (j.contains("per_category")) in.policy.per_category = j.at("per_category").get<bool>();
    }
    in.decision_log = out_dir / layout::kDecisions;
    in.export_path = out_dir / layout::kCurated;
    in.static_dir = std::move(static_dir);
    return in;
}

Session::Session(SessionInputs inputs)
    : inputs_(std::move(inputs)),
      manifest_body_(manifest_text(inputs_.manifest)),
      embedding_body_(embedding_to_json(inputs_.embedding).dump(2) + "\n"),
      log_(inputs_.decision_log) {
    for (const auto& p : inputs_.embedding.points) {
        if (!inputs_.manifest.find(p.source_id))
            throw SchemaError("embedding point '" + p.source_id + "' is not in the manifest");
        origin_of_[p.source_id] = p.origin;
    }
    validate(inputs_.policy);
    publish(inputs_.policy, std::nullopt);
}

std::uint64_t Session::revision() const { return snapshot()->revision; }

std::shared_ptr<const Session::Snapshot> Session::snapshot() const {
    std::shared_lock lock(snapshot_mutex_);
    return current_;
}

// Caller holds writer_ (or is the constructor).
void Session::publish(const FilterPolicy& policy, std::optional<FilterResult> reuse) {
    auto next = std::make_shared<Snapshot>();
    const auto prev = snapshot();
    next->revision = prev ? prev->revision + 1 : 0;
    next->policy = policy;
    next->threshold_partition = reuse ? std::move(*reuse) : filter_by_distance(inputs_.embedding, policy);
    const auto decisions = log_.entries();
    next->kept = apply_decisions(next->threshold_partition, decisions);
    const std::set<std::string> kept(next->kept.begin(), next->kept.end());
    for (const auto& d : next->threshold_partition.distances)
        if (!kept.count(d.id)) next->removed.push_back(d.id);

    // Latest human verdict per id, listed in embedding order.
    std::map<std::string, const ReviewDecision*> latest;
    for (const auto& d : decisions) {
        if (d.source != DecisionSource::Human) continue;
        auto& slot = latest[d.composite_id];
        if (!slot || d.revision >= slot->revision) slot = &d;
    }
    nlohmann::ordered_json overrides = nlohmann::ordered_json::array();
    for (const auto& d : next->threshold_partition.distances) {
        const auto it = latest.find(d.id);
        if (it == latest.end() || it->second->verdict == Verdict::Undecided) continue;
        overrides.push_back({{"id", d.id}, {"verdict", to_string(it->second->verdict)}});
    }
    nlohmann::ordered_json body;
    body["revision"] = next->revision;
    body["threshold"] = threshold_json(policy.threshold);
    body["per_category"] = policy.per_category;
    body["kept"] = next->kept;
    body["removed"] = next->removed;
    body["overrides"] = std::move(overrides);
    next->partition_body = body.dump(2) + "\n";

    std::unique_lock lock(snapshot_mutex_);
    current_ = std::move(next);
}

Response Session::handle(std::string_view method, std::string_view target, std::string_view body) {
    const auto qpos = target.find('?');
    const std::string_view path = target.substr(0, qpos);
    const std::string_view query = qpos == std::string_view::npos ? std::string_view{} : target.substr(qpos + 1);
    try {
        if (path.starts_with("/api/")) {
            const bool get = method == "GET";
            const bool post = method == "POST";
            if (path == "/api/manifest" && get) return {200, "application/json", manifest_body_};
            if (path == "/api/embedding" && get) return {200, "application/json", embedding_body_};
            if (path == "/api/partition" && get) return get_partition();
            if (path == "/api/distances" && get) return get_distances(query);
            if (path.starts_with("/api/images/") && get) return get_image(std::string(path.substr(12)), false);
            if (path.starts_with("/api/thumbs/") && get) return get_image(std::string(path.substr(12)), true);
            if (path == "/api/filter" && post) return post_filter(body);
            if (path == "/api/decisions" && post) return post_decision(body);
            if (path == "/api/export" && post) return post_export();
            static const std::set<std::string_view> known = {"/api/manifest", "/api/embedding", "/api/partition",
                                                             "/api/distances", "/api/filter", "/api/decisions",
                                                             "/api/export"};
            if (known.count(path) || path.starts_with("/api/images/") || path.starts_with("/api/thumbs/"))
                return error_response(405, "method_not_allowed", std::string(method) + " " + std::string(path));
            return error_response(404, "not_found", "no endpoint " + std::string(path));
        }
        if (method != "GET") return error_response(405, "method_not_allowed", std::string(method) + " " + std::string(path));
        return get_static(path);
    } catch (const NotFound& e) {
        return error_response(404, e.kind(), e.what());
    } catch (const Error& e) {
        return error_response(status_for(e), e.kind(), e.what());
    } catch (const nlohmann::json::exception& e) {
        return error_response(400, "schema_error", e.what());
    }
}

Response Session::get_partition() const { return {200, "application/json", snapshot()->partition_body}; }

Response Session::get_distances(std::string_view query) const {
    int bins = kDefaultHistogramBins;
    if (const auto b = query_param(query, "bins")) {
        const auto [ptr, ec] = std::from_chars(b->data(), b->data() + b->size(), bins);
        if (ec != std::errc{} || ptr != b->data() + b->size() || bins < 1 || bins > 1000)
            throw InvalidArgument("bins must be an integer in [1, 1000], got '" + *b + "'");
    }
    const auto snap = snapshot();
    const auto& dist = snap->threshold_partition.distances;
    double lo = dist.empty() ? 0.0 : std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& d : dist) {
        lo = std::min(lo, d.distance);
        hi = std::max(hi, d.distance);
    }
    const double width = hi > 0.0 ? hi / bins : 1.0;
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (const auto& d : dist) {
        auto k = static_cast<std::size_t>(d.distance / width);
        ++counts[std::min(k, counts.size() - 1)];
    }
    nlohmann::ordered_json j;
    j["revision"] = snap->revision;
    j["threshold"] = threshold_json(snap->policy.threshold);
    j["per_category"] = snap->policy.per_category;
    j["min"] = lo;
    j["max"] = hi;
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < counts.size(); ++k)
        hist.push_back({{"lo", width * static_cast<double>(k)}, {"hi", width * static_cast<double>(k + 1)}, {"count", counts[k]}});
    j["histogram"] = std::move(hist);
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const auto& d : dist)
        points.push_back({{"id", d.id}, {"nearest_real", d.nearest_real_id}, {"distance", d.distance}});
    j["points"] = std::move(points);
    return json_response(j);
}

Response Session::get_image(const std::string& id, bool thumbnail) {
    const ManifestEntry* e = inputs_.manifest.find(id);
    if (!e) return error_response(404, "not_found", "unknown image id '" + id + "'", id);
    if (!thumbnail) return {200, "image/png", read_file(inputs_.manifest.resolve(*e))};
    {
        std::lock_guard lock(thumbs_mutex_);
        if (const auto it = thumbs_.find(id); it != thumbs_.end()) return {200, "image/png", it->second};
    }
    const Raster img = read_png(inputs_.manifest.resolve(*e));
    const double scale = static_cast<double>(kThumbnailSide) / std::max(img.width(), img.height());
    const int w = std::max(1, static_cast<int>(std::lround(img.width() * scale)));
    const int h = std::max(1, static_cast<int>(std::lround(img.height() * scale)));
    const Raster thumb = scale < 1.0 ? resize_area_rounded(img, w, h) : resize_bilinear(img, w, h);
    const auto bytes = encode_png(thumb);
    std::string png(bytes.begin(), bytes.end());
    std::lock_guard lock(thumbs_mutex_);
    return {200, "image/png", thumbs_.emplace(id, std::move(png)).first->second};
}

Response Session::get_static(std::string_view path) const {
    if (!inputs_.static_dir) return error_response(404, "not_found", "no static client configured");
    std::string rel(path == "/" ? "/index.html" : path);
    if (rel.find("..") != std::string::npos) return error_response(404, "not_found", "invalid path");
    const fs::path file = *inputs_.static_dir / rel.substr(1);
    if (!fs::is_regular_file(file)) return error_response(404, "not_found", "no file " + rel);
    return {200, std::string(content_type_for(file)), read_file(file)};
}

Response Session::post_filter(std::string_view body) {
    const nlohmann::json j = parse_body(body);
    std::lock_guard lock(writer_);
    FilterPolicy policy = snapshot()->policy;
    if (j.contains("threshold")) {
        const auto& t = j.at("threshold");
        if (t.is_null()) policy.threshold = std::numeric_limits<double>::infinity();
        else if (t.is_number()) policy.threshold = t.get<double>();
        else throw SchemaError("threshold must be a number or null");
    }
    if (j.contains("per_category")) policy.per_category = j.at("per_category").get<bool>();
    validate(policy);
    publish(policy, std::nullopt);
    return get_partition();
}

Response Session::post_decision(std::string_view body) {
    const nlohmann::json j = parse_body(body);
    if (!j.contains("id") || !j.at("id").is_string()) throw SchemaError("decision needs a string 'id'");
    if (!j.contains("verdict") || !j.at("verdict").is_string()) throw SchemaError("decision needs a string 'verdict'");
    const std::string id = j.at("id").get<std::string>();
    const auto it = origin_of_.find(id);
    if (it == origin_of_.end() || it->second != Origin::Generated)
        return error_response(404, "not_found", "no generated point with id '" + id + "'", id);
    ReviewDecision d;
    d.composite_id = id;
    d.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    d.source = DecisionSource::Human;
    if (j.contains("note") && j.at("note").is_string()) d.note = j.at("note").get<std::string>();

    std::lock_guard lock(writer_);
    const ReviewDecision stored = log_.append(std::move(d));
    const auto prev = snapshot();
    publish(prev->policy, prev->threshold_partition);
    nlohmann::ordered_json out;
    out["decision"] = decision_to_json(stored);
    out["partition"] = nlohmann::ordered_json::parse(snapshot()->partition_body);
    return json_response(out);
}

Response Session::post_export() {
    std::lock_guard lock(writer_);
    const auto snap = snapshot();
    const CuratedExport exported = export_curated(inputs_.manifest, snap->kept);
    save_manifest(exported.manifest, inputs_.export_path);
    return {200, "application/json", read_file(inputs_.export_path)};
}

std::pair<std::string, int> parse_bind(const std::string& spec) {
    const auto colon = spec.rfind(':');
    if (colon == std::string::npos || colon == 0) throw InvalidArgument("bind address must be host:port, got '" + spec + "'");
    int port = -1;
    const std::string p = spec.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
    if (ec != std::errc{} || ptr != p.data() + p.size() || port < 0 || port > 65535)
        throw InvalidArgument("bind port must be in [0, 65535], got '" + p + "'");
    return {spec.substr(0, colon), port};
}

}  // namespace hybridaug::gallery
