#include "hybridaug/error.hpp"
#include "hybridaug/manifest.hpp"
#include "hybridaug/png_io.hpp"
#include "published.hpp"
#include "synthetic.hpp"

#include <doctest.h>

#include <fstream>

using namespace hybridaug;
namespace fs = std::filesystem;

namespace {

DatasetManifest sample_manifest(const fs::path& base) {
    DatasetManifest m;
    m.base_dir = base;
    m.categories = {{"crack", CategoryRole::Defect}, {"free", CategoryRole::Free}};
    write_png(base / "img/a.png", Raster(4, 4, 1, 10));
    write_png(base / "img/b.png", Raster(4, 4, 1, 20));
    write_mask_png(base / "img/b_mask.png", Mask(4, 4, 1));
    CompositionRecord rec{"b", "s1", "a", {45.0, 1.25, 0.75, {2, 3}}, 99, "crack"};
    m.entries = {{"a", "img/a.png", "free", EntryOrigin::Real, Stage::Raw, std::nullopt, std::nullopt},
                 {"b", "img/b.png", "crack", EntryOrigin::Generated, Stage::Composited, "img/b_mask.png", rec}};
    return m;
}

}  // namespace

TEST_CASE("save then load is the identity") {
    const auto dir = testing::fresh_dir("manifest_rt");
    const auto m = sample_manifest(dir);
    save_manifest(m, dir / "manifest.json");
    const auto loaded = load_manifest(dir / "manifest.json");
    CHECK(loaded == m);
    CHECK(loaded.base_dir == dir);
    CHECK(manifest_text(loaded) == manifest_text(m));
    CHECK(loaded.resolve(loaded.entries[1]) == dir / "img/b.png");
    CHECK(loaded.resolve_mask(loaded.entries[1]) == dir / "img/b_mask.png");
    CHECK_THROWS_AS(loaded.resolve_mask(loaded.entries[0]), NotFound);

    // Saving elsewhere rewrites paths relative to the new location.
    save_manifest(m, dir / "nested/deeper/manifest.json");
    const auto moved = load_manifest(dir / "nested/deeper/manifest.json");
    CHECK(moved.entries[0].path == "../../img/a.png");
    CHECK(moved.resolve(moved.entries[0]).lexically_normal() == (dir / "img/a.png").lexically_normal());
}

TEST_CASE("validation errors name the entry") {
    const auto dir = testing::fresh_dir("manifest_err");
    auto m = sample_manifest(dir);
    m.entries.push_back(m.entries[0]);
    try {
        validate(m, false);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("duplicate id 'a'") != std::string::npos);
        CHECK(std::string(e.what()).find("entries[2]") != std::string::npos);
    }
    m = sample_manifest(dir);
    m.entries[0].category = "rust";
    CHECK_THROWS_AS(validate(m, false), SchemaError);
    m = sample_manifest(dir);
    m.entries[0].path = "img/absent.png";
    CHECK_NOTHROW(validate(m, false));
    CHECK_THROWS_AS(validate(m, true), SchemaError);

    std::ofstream(dir / "bad.json") << "{\"version\": 1, \"categories\": [], \"entries\": [{\"id\": 3}]}";
    CHECK_THROWS_AS(load_manifest(dir / "bad.json"), SchemaError);
    std::ofstream(dir / "v2.json") << "{\"version\": 2, \"categories\": [], \"entries\": []}";
    CHECK_THROWS_AS(load_manifest(dir / "v2.json"), SchemaError);
    std::ofstream(dir / "junk.json") << "{";
    CHECK_THROWS_AS(load_manifest(dir / "junk.json"), SchemaError);
    CHECK_THROWS_AS(load_manifest(dir / "absent.json"), IoError);
}

TEST_CASE("test-split fixture keeps its per-category counts") {
    const auto dir = testing::fresh_dir("manifest_split");
    DatasetManifest m;
    m.base_dir = dir;
    const auto img = encode_png(Raster(4, 4, 1, 128));
    for (const auto& [name, n] : testing::kTestSplit) {
        m.categories.push_back({std::string(name), name == "free" ? CategoryRole::Free : CategoryRole::Defect});
        for (int k = 0; k < n; ++k) {
            const std::string id = std::string(name) + "_" + std::to_string(k);
            const std::string rel = "test/" + std::string(name) + "/" + id + ".png";
            fs::create_directories((dir / rel).parent_path());
            std::ofstream(dir / rel, std::ios::binary).write(reinterpret_cast<const char*>(img.data()), img.size());
            m.entries.push_back({id, rel, std::string(name), EntryOrigin::Real, Stage::Raw, std::nullopt, std::nullopt});
        }
    }
    save_manifest(m, dir / "test_split.json");
    const auto loaded = load_manifest(dir / "test_split.json", true);
    const auto counts = loaded.counts();
    REQUIRE(counts.size() == testing::kTestSplit.size());
    for (std::size_t k = 0; k < counts.size(); ++k) {
        CHECK(counts[k].first == testing::kTestSplit[k].first);
        CHECK(counts[k].second == static_cast<std::size_t>(testing::kTestSplit[k].second));
    }
    CHECK(loaded.entries.size() == 942);
}

TEST_CASE("enum strings") {
    CHECK(to_string(Stage::Curated) == "curated");
    CHECK(to_string(EntryOrigin::Sketch) == "sketch");
    CHECK(to_string(CategoryRole::Free) == "free");
    const auto j = manifest_to_json(sample_manifest(testing::fresh_dir("manifest_enum")));
    CHECK(j.at("entries")[1].at("stage") == "composited");
    CHECK(j.at("entries")[1].at("provenance").at("theta") == 45.0);
    CHECK(manifest_from_json(j).entries[1].provenance->params.center.y == 3);
}
