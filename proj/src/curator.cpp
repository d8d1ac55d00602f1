#include "hybridaug/curator.hpp"

#include "hybridaug/error.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace hybridaug {
namespace {

/// Static 2-D k-d tree over a point set; nodes are stored implicitly in a
/// permuted index array (median of each range at its midpoint).
class KdTree {
public:
    KdTree(std::vector<double> xs, std::vector<double> ys)
        : xs_(std::move(xs)), ys_(std::move(ys)), order_(xs_.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        build(0, order_.size(), 0);
    }

    bool empty() const noexcept { return order_.empty(); }

    /// Index of the nearest point and its squared distance. Ties resolve to
    /// the lowest index.
    std::pair<std::size_t, double> nearest(double x, double y) const {
        Best best;
        search(0, order_.size(), 0, x, y, best);
        return {best.index, best.d2};
    }

private:
    struct Best {
        std::size_t index = 0;
        double d2 = std::numeric_limits<double>::infinity();
    };

    double coord(std::size_t idx, int axis) const { return axis == 0 ? xs_[idx] : ys_[idx]; }

    void build(std::size_t lo, std::size_t hi, int axis) {
        if (hi - lo <= 1) return;
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](std::size_t a, std::size_t b) {
                             const double ca = coord(a, axis), cb = coord(b, axis);
                             return ca < cb || (ca == cb && a < b);
                         });
        build(lo, mid, 1 - axis);
        build(mid + 1, hi, 1 - axis);
    }

    void search(std::size_t lo, std::size_t hi, int axis, double x, double y, Best& best) const {
        if (lo >= hi) return;
        const std::size_t mid = lo + (hi - lo) / 2;
        const std::size_t idx = order_[mid];
        const double dx = x - xs_[idx];
        const double dy = y - ys_[idx];
        const double d2 = dx * dx + dy * dy;
        if (d2 < best.d2 || (d2 == best.d2 && idx < best.index)) best = {idx, d2};
        const double delta = (axis == 0 ? x : y) - coord(idx, axis);
        const bool left_first = delta <= 0.0;
        search(left_first ? lo : mid + 1, left_first ? mid : hi, 1 - axis, x, y, best);
        if (delta * delta <= best.d2) search(left_first ? mid + 1 : lo, left_first ? hi : mid, 1 - axis, x, y, best);
    }

    std::vector<double> xs_;
    std::vector<double> ys_;
    std::vector<std::size_t> order_;
};

constexpr std::array<std::pair<Verdict, const char*>, 3> kVerdicts{{
    {Verdict::Accept, "accept"},
    {Verdict::Reject, "reject"},
    {Verdict::Undecided, "undecided"},
}};

}  // namespace

void validate(const FilterPolicy& policy) {
    if (std::isnan(policy.threshold) || policy.threshold < 0.0)
        throw InvalidArgument("filter threshold must be >= 0");
}

FilterResult filter_by_distance(const Embedding& emb, const FilterPolicy& policy) {
    validate(policy);
    // Real points grouped by comparison key ("" when not per category).
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < emb.size(); ++i) {
        const auto& pt = emb.points[i];
        if (pt.origin == Origin::Real) groups[policy.per_category ? pt.category : std::string()].push_back(i);
    }
    std::map<std::string, KdTree> trees;
    for (auto& [key, members] : groups) {
        std::vector<double> xs, ys;
        for (std::size_t i : members) {
            xs.push_back(emb.points[i].x);
            ys.push_back(emb.points[i].y);
        }
        trees.emplace(key, KdTree(std::move(xs), std::move(ys)));
    }

    FilterResult out;
    for (const auto& pt : emb.points) {
        if (pt.origin != Origin::Generated) continue;
        const std::string key = policy.per_category ? pt.category : std::string();
        const auto tree = trees.find(key);
        if (tree == trees.end()) {
            throw InvalidArgument(policy.per_category
                                      ? "category '" + pt.category + "' has no real points to compare against"
                                      : std::string("embedding has no real points to compare against"));
        }
        const auto [local, d2] = tree->second.nearest(pt.x, pt.y);
        const double distance = std::sqrt(d2);
        out.distances.push_back({pt.source_id, emb.points[groups[key][local]].source_id, distance});
        (distance <= policy.threshold ? out.kept : out.removed).push_back(pt.source_id);
    }
    return out;
}

std::string to_string(Verdict v) {
    for (const auto& [value, name] : kVerdicts)
        if (value == v) return name;
    return "?";
}

std::string to_string(DecisionSource s) { return s == DecisionSource::Human ? "human" : "threshold"; }

Verdict verdict_from_string(const std::string& s) {
    for (const auto& [value, name] : kVerdicts)
        if (s == name) return value;
    throw SchemaError("unknown verdict '" + s + "'");
}

nlohmann::ordered_json decision_to_json(const ReviewDecision& d) {
    nlohmann::ordered_json j;
    j["revision"] = d.revision;
    j["composite_id"] = d.composite_id;
    j["verdict"] = to_string(d.verdict);
    j["source"] = to_string(d.source);
    j["timestamp"] = d.timestamp;
    if (d.note) j["note"] = *d.note;
    return j;
}

ReviewDecision decision_from_json(const nlohmann::json& j) {
    try {
        ReviewDecision d;
        d.revision = j.value("revision", std::uint64_t{0});
        j.at("composite_id").get_to(d.composite_id);
        d.verdict = verdict_from_string(j.at("verdict").get<std::string>());
        const std::string source = j.value("source", std::string("human"));
        if (source == "human") d.source = DecisionSource::Human;
        else if (source == "threshold") d.source = DecisionSource::Threshold;
        else throw SchemaError("unknown decision source '" + source + "'");
        d.timestamp = j.value("timestamp", std::string());
        if (j.contains("note") && !j.at("note").is_null()) d.note = j.at("note").get<std::string>();
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("review decision: ") + e.what());
    }
}

std::string utc_now_iso8601() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<std::string> apply_decisions(const FilterResult& partition,
                                         std::span<const ReviewDecision> decisions,
                                         std::vector<std::string>* warnings) {
    std::set<std::string> kept(partition.kept.begin(), partition.kept.end());
    std::set<std::string> known = kept;
    known.insert(partition.removed.begin(), partition.removed.end());

    // Latest human verdict per id, by revision then log position.
    std::map<std::string, std::pair<std::uint64_t, Verdict>> latest;
    for (const auto& d : decisions) {
        if (d.source != DecisionSource::Human) continue;
        if (!known.count(d.composite_id)) {
            if (warnings) warnings->push_back("decision for unknown id '" + d.composite_id + "' skipped");
            continue;
        }
        auto it = latest.find(d.composite_id);
        if (it == latest.end() || d.revision >= it->second.first) latest[d.composite_id] = {d.revision, d.verdict};
    }
    for (const auto& [id, rv] : latest) {
        if (rv.second == Verdict::Reject) kept.erase(id);
        if (rv.second == Verdict::Accept) kept.insert(id);
    }

    std::vector<std::string> out;
    std::set<std::string> emitted;
    for (const auto& nr : partition.distances)
        if (kept.count(nr.id) && emitted.insert(nr.id).second) out.push_back(nr.id);
    // Partitions built by hand may lack the distance list.
    for (const auto& ids : {partition.kept, partition.removed})
        for (const auto& id : ids)
            if (kept.count(id) && emitted.insert(id).second) out.push_back(id);
    return out;
}

DecisionLog::DecisionLog(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) entries_ = read(path_);
}

ReviewDecision DecisionLog::append(ReviewDecision decision) {
    std::lock_guard lock(mutex_);
    decision.revision = entries_.empty() ? 1 : entries_.back().revision + 1;
    if (decision.timestamp.empty()) decision.timestamp = utc_now_iso8601();
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot open decision log '" + path_.string() + "'");
    out << decision_to_json(decision).dump() << '\n';
    out.flush();
    if (!out) throw IoError("failed to append to decision log '" + path_.string() + "'");
    entries_.push_back(decision);
    return decision;
}

std::vector<ReviewDecision> DecisionLog::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::vector<ReviewDecision> DecisionLog::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open decision log '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    std::vector<ReviewDecision> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        const std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) break;  // torn final write
        ++line_no;
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        try {
            out.push_back(decision_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

CuratedExport export_curated(const DatasetManifest& manifest, std::span<const std::string> kept) {
    std::set<std::string> wanted;
    for (const auto& id : kept) {
        if (!manifest.find(id)) throw NotFound("kept id '" + id + "' is not in the manifest");
        wanted.insert(id);
    }
    CuratedExport out;
    out.manifest.version = manifest.version;
    out.manifest.categories = manifest.categories;
    out.manifest.base_dir = manifest.base_dir;
    for (const auto& e : manifest.entries) {
        if (!wanted.count(e.id)) continue;
        ManifestEntry copy = e;
        copy.stage = Stage::Curated;
        out.manifest.entries.push_back(std::move(copy));
    }
    out.counts = out.manifest.counts();
    return out;
}

nlohmann::ordered_json counts_to_json(const std::vector<std::pair<std::string, std::size_t>>& counts) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, n] : counts) j[name] = n;
    return j;
}

}  // namespace hybridaug
