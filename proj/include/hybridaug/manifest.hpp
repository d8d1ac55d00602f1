#pragma once

#include "hybridaug/sketchlab.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hybridaug {

enum class CategoryRole { Defect, Free };
enum class EntryOrigin { Real, Sketch, Generated };
enum class Stage { Raw, Conditioned, Composited, Styled, Curated };

std::string to_string(CategoryRole role);
std::string to_string(EntryOrigin origin);
std::string to_string(Stage stage);

struct Category {
    std::string name;
    CategoryRole role = CategoryRole::Defect;
    friend bool operator==(const Category&, const Category&) = default;
};

struct ManifestEntry {
    std::string id;
    /// Relative to the manifest's directory (generic separators).
    std::string path;
    std::string category;
    EntryOrigin origin = EntryOrigin::Real;
    Stage stage = Stage::Raw;
    std::optional<std::string> mask;
    std::optional<CompositionRecord> provenance;
    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    int version = 1;
    std::vector<Category> categories;
    std::vector<ManifestEntry> entries;
    /// Directory the entry paths are relative to; not serialized.
    std::filesystem::path base_dir;

    const ManifestEntry* find(const std::string& id) const;
    ManifestEntry* find(const std::string& id);
    const Category* category(const std::string& name) const;
    std::filesystem::path resolve(const ManifestEntry& entry) const;
    std::filesystem::path resolve_mask(const ManifestEntry& entry) const;

    /// Entry count per category, in category order, zeros included.
    std::vector<std::pair<std::string, std::size_t>> counts() const;

    /// Structural equality (base_dir excluded).
    friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
        return a.version == b.version && a.categories == b.categories && a.entries == b.entries;
    }
};

inline constexpr int kManifestVersion = 1;

/// Checks id uniqueness and category membership; with `check_paths`, also
/// that every referenced file exists. Errors name the entry index.
void validate(const DatasetManifest& m, bool check_paths);

nlohmann::ordered_json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_paths = true);
/// Paths are rewritten relative to the destination directory. Output is
/// canonical: fixed key order, two-space indent, trailing newline.
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
std::string manifest_text(const DatasetManifest& m);

/// Returns `m` with every path expressed relative to `new_base`.
DatasetManifest rebase(const DatasetManifest& m, const std::filesystem::path& new_base);

/// Path relative to `base`, generic separators.
std::string relative_path(const std::filesystem::path& target, const std::filesystem::path& base);

}  // namespace hybridaug
