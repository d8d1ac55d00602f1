#include "hybridaug/manifest.hpp"

#include "hybridaug/error.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>

namespace hybridaug {
namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& text, const std::array<std::pair<E, const char*>, N>& table, const char* what) {
    for (const auto& [value, name] : table)
        if (text == name) return value;
    throw SchemaError(std::string("unknown ") + what + " '" + text + "'");
}

constexpr std::array<std::pair<CategoryRole, const char*>, 2> kRoles{{
    {CategoryRole::Defect, "defect"},
    {CategoryRole::Free, "free"},
}};
constexpr std::array<std::pair<EntryOrigin, const char*>, 3> kOrigins{{
    {EntryOrigin::Real, "real"},
    {EntryOrigin::Sketch, "sketch"},
    {EntryOrigin::Generated, "generated"},
}};
constexpr std::array<std::pair<Stage, const char*>, 5> kStages{{
    {Stage::Raw, "raw"},
    {Stage::Conditioned, "conditioned"},
    {Stage::Composited, "composited"},
    {Stage::Styled, "styled"},
    {Stage::Curated, "curated"},
}};

template <typename E, std::size_t N>
std::string enum_name(E value, const std::array<std::pair<E, const char*>, N>& table) {
    for (const auto& [v, name] : table)
        if (v == value) return name;
    return "?";
}

}  // namespace

std::string to_string(CategoryRole role) { return enum_name(role, kRoles); }
std::string to_string(EntryOrigin origin) { return enum_name(origin, kOrigins); }
std::string to_string(Stage stage) { return enum_name(stage, kStages); }

const ManifestEntry* DatasetManifest::find(const std::string& id) const {
    for (const auto& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

ManifestEntry* DatasetManifest::find(const std::string& id) {
    for (auto& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

const Category* DatasetManifest::category(const std::string& name) const {
    for (const auto& c : categories)
        if (c.name == name) return &c;
    return nullptr;
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& entry) const {
    return (base_dir / entry.path).lexically_normal();
}

std::filesystem::path DatasetManifest::resolve_mask(const ManifestEntry& entry) const {
    if (!entry.mask) throw NotFound("entry '" + entry.id + "' has no mask");
    return (base_dir / *entry.mask).lexically_normal();
}

std::vector<std::pair<std::string, std::size_t>> DatasetManifest::counts() const {
    std::vector<std::pair<std::string, std::size_t>> out;
    for (const auto& c : categories) {
        std::size_t n = 0;
        for (const auto& e : entries) n += e.category == c.name;
        out.emplace_back(c.name, n);
    }
    return out;
}

void validate(const DatasetManifest& m, bool check_paths) {
    if (m.version != kManifestVersion)
        throw SchemaError("unsupported manifest version " + std::to_string(m.version));
    std::set<std::string> names;
    for (std::size_t k = 0; k < m.categories.size(); ++k)
        if (!names.insert(m.categories[k].name).second)
            throw SchemaError("categories[" + std::to_string(k) + "]: duplicate category '" + m.categories[k].name + "'");
    std::set<std::string> ids;
    for (std::size_t k = 0; k < m.entries.size(); ++k) {
        const auto& e = m.entries[k];
        const std::string where = "entries[" + std::to_string(k) + "]";
        if (e.id.empty()) throw SchemaError(where + ": empty id");
        if (!ids.insert(e.id).second) throw SchemaError(where + ": duplicate id '" + e.id + "'");
        if (!names.count(e.category))
            throw SchemaError(where + ": entry '" + e.id + "' uses undeclared category '" + e.category + "'");
        if (check_paths) {
            if (!std::filesystem::exists(m.resolve(e)))
                throw SchemaError(where + ": entry '" + e.id + "' path '" + e.path + "' does not exist");
            if (e.mask && !std::filesystem::exists(m.resolve_mask(e)))
                throw SchemaError(where + ": entry '" + e.id + "' mask '" + *e.mask + "' does not exist");
        }
    }
}

nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
    nlohmann::ordered_json j;
    j["version"] = m.version;
    j["categories"] = nlohmann::ordered_json::array();
    for (const auto& c : m.categories) j["categories"].push_back({{"name", c.name}, {"role", to_string(c.role)}});
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : m.entries) {
        nlohmann::ordered_json je;
        je["id"] = e.id;
        je["path"] = e.path;
        je["category"] = e.category;
        je["origin"] = to_string(e.origin);
        je["stage"] = to_string(e.stage);
        if (e.mask) je["mask"] = *e.mask;
        if (e.provenance) {
            const auto& r = *e.provenance;
            nlohmann::ordered_json jr;
            jr["composite_id"] = r.composite_id;
            jr["sketch_id"] = r.sketch_id;
            jr["background_id"] = r.background_id;
            jr["theta"] = r.params.theta_deg;
            jr["p"] = r.params.p;
            jr["q"] = r.params.q;
            jr["x_o"] = r.params.center.x;
            jr["y_o"] = r.params.center.y;
            jr["seed"] = r.seed;
            jr["category"] = r.category;
            je["provenance"] = std::move(jr);
        }
        j["entries"].push_back(std::move(je));
    }
    return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    if (!j.is_object()) throw SchemaError("manifest must be a JSON object");
    try {
        m.version = j.at("version").get<int>();
        for (const auto& c : j.at("categories"))
            m.categories.push_back({c.at("name").get<std::string>(), parse_enum(c.at("role").get<std::string>(), kRoles, "category role")});
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("manifest header: ") + e.what());
    }
    const auto& entries = j.contains("entries") ? j.at("entries") : nlohmann::json::array();
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& je = entries[k];
        try {
            ManifestEntry e;
            je.at("id").get_to(e.id);
            je.at("path").get_to(e.path);
            je.at("category").get_to(e.category);
            e.origin = parse_enum(je.at("origin").get<std::string>(), kOrigins, "origin");
            e.stage = parse_enum(je.at("stage").get<std::string>(), kStages, "stage");
            if (je.contains("mask") && !je.at("mask").is_null()) e.mask = je.at("mask").get<std::string>();
            if (je.contains("provenance") && !je.at("provenance").is_null())
                e.provenance = je.at("provenance").get<CompositionRecord>();
            m.entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("entries[" + std::to_string(k) + "]: " + e.what());
        } catch (const SchemaError& e) {
            throw SchemaError("entries[" + std::to_string(k) + "]: " + e.what());
        }
    }
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_paths) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
    }
    DatasetManifest m = manifest_from_json(j);
    m.base_dir = std::filesystem::absolute(path).parent_path();
    validate(m, check_paths);
    return m;
}

std::string manifest_text(const DatasetManifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

std::string relative_path(const std::filesystem::path& target, const std::filesystem::path& base) {
    const auto abs_target = std::filesystem::absolute(target).lexically_normal();
    const auto abs_base = std::filesystem::absolute(base).lexically_normal();
    return abs_target.lexically_relative(abs_base).generic_string();
}

DatasetManifest rebase(const DatasetManifest& m, const std::filesystem::path& new_base) {
    DatasetManifest out = m;
    out.base_dir = std::filesystem::absolute(new_base).lexically_normal();
    for (auto& e : out.entries) {
        e.path = relative_path(m.resolve(e), out.base_dir);
        if (e.mask) e.mask = relative_path(m.resolve_mask(e), out.base_dir);
    }
    return out;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    const auto dir = std::filesystem::absolute(path).parent_path();
    std::filesystem::create_directories(dir);
    const std::string text = manifest_text(m.base_dir.empty() ? m : rebase(m, dir));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("short write to manifest '" + path.string() + "'");
}

}  // namespace hybridaug
