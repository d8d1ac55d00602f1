#include "synthetic.hpp"

#include "hybridaug/pipeline.hpp"
#include "hybridaug/png_io.hpp"
#include "hybridaug/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <unistd.h>

namespace hybridaug::testing {
namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    // Per process, so suites run concurrently under ctest -j never share a directory.
    const fs::path dir = fs::temp_directory_path() / "hybridaug-tests" / std::to_string(::getpid()) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Raster textured_background(int side, std::uint64_t seed, int channels) {
    Rng rng(seed);
    Raster img(side, side, channels, 0);
    const double tilt = rng.uniform(-0.3, 0.3);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            for (int c = 0; c < channels; ++c) {
                const double v = 140.0 + tilt * (x - side / 2) + rng.normal(0.0, 12.0) + 4.0 * c;
                img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
    return gaussian_blur(img, 0.8);
}

namespace {

void stamp(Raster& img, double cx, double cy, double r, std::uint8_t value) {
    const int x0 = std::max(0, static_cast<int>(cx - r));
    const int x1 = std::min(img.width() - 1, static_cast<int>(cx + r));
    const int y0 = std::max(0, static_cast<int>(cy - r));
    const int y1 = std::min(img.height() - 1, static_cast<int>(cy + r));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
                for (int c = 0; c < img.channels(); ++c) img.at(x, y, c) = value;
}

void draw_mark(Raster& img, Rng& rng, int kind, double margin, std::uint8_t value, double stroke = 0.9) {
    const double side = img.width();
    if (kind == 0) {
        double x = rng.uniform(margin, side - margin);
        double y = rng.uniform(margin, side - margin);
        double heading = rng.uniform(0.0, 6.283185307179586);
        for (int step = 0; step < static_cast<int>(side * 1.2); ++step) {
            stamp(img, x, y, stroke, value);
            heading += rng.uniform(-0.35, 0.35);
            x = std::clamp(x + 0.7 * std::cos(heading), margin, side - margin);
            y = std::clamp(y + 0.7 * std::sin(heading), margin, side - margin);
        }
    } else {
        const double cx = side / 2 + rng.uniform(-2.0, 2.0);
        const double cy = side / 2 + rng.uniform(-2.0, 2.0);
        for (int k = 0; k < 5; ++k)
            stamp(img, cx + rng.uniform(-side / 6, side / 6), cy + rng.uniform(-side / 6, side / 6),
                  rng.uniform(side / 10, side / 6), value);
    }
}

}  // namespace

Raster stroke_sketch(int side, std::uint64_t seed, int kind) {
    Rng rng(seed);
    Raster img(side, side, 1, 255);
    // Strokes about 3 px wide survive conditioning blur and a mid-gray threshold.
    draw_mark(img, rng, kind, 3.0, 20, 1.5);
    return img;
}

Raster defect_image(int side, std::uint64_t seed, int kind) {
    Raster img = textured_background(side, seed);
    Rng rng(stream_seed(seed, 1));
    Raster mark(side / 2, side / 2, 1, 255);
    draw_mark(mark, rng, kind, 2.0, 40);
    const int off = side / 4;
    for (int y = 0; y < mark.height(); ++y)
        for (int x = 0; x < mark.width(); ++x)
            if (mark.at(x, y, 0) < 128) img.at(x + off, y + off, 0) = mark.at(x, y, 0);
    return img;
}

DryRunDataset write_dry_run_dataset(const fs::path& root) {
    DryRunDataset d;
    d.root = root;
    fs::create_directories(root / "data");
    DatasetManifest m;
    m.base_dir = root;
    m.categories = {{"crack", CategoryRole::Defect}, {"blob", CategoryRole::Defect}, {"free", CategoryRole::Free}};
    auto add = [&](const std::string& id, const Raster& img, const std::string& category, EntryOrigin origin) {
        const std::string rel = "data/" + id + ".png";
        write_png(root / rel, img);
        m.entries.push_back({id, rel, category, origin, Stage::Raw, std::nullopt, std::nullopt});
    };
    const std::vector<std::pair<std::string, int>> defects = {{"crack", 0}, {"blob", 1}};
    for (std::size_t c = 0; c < defects.size(); ++c) {
        const auto& [name, kind] = defects[c];
        for (int k = 0; k < 3; ++k)
            add(name + "_sketch" + std::to_string(k), stroke_sketch(24, 100 + 10 * c + k, kind), name, EntryOrigin::Sketch);
        for (int k = 0; k < 6; ++k)
            add(name + "_real" + std::to_string(k), defect_image(64, 200 + 10 * c + k, kind), name, EntryOrigin::Real);
    }
    for (int k = 0; k < 3; ++k) add("free" + std::to_string(k), textured_background(64, 300 + k), "free", EntryOrigin::Real);
    d.manifest = root / "dataset.json";
    save_manifest(m, d.manifest);

    d.predictions = root / "predictions.csv";
    {
        std::ofstream csv(d.predictions);
        csv << "id,truth,pred\n";
        const char* labels[] = {"crack", "blob", "free"};
        Rng rng(42);
        for (int k = 0; k < 90; ++k) {
            const std::string truth = labels[k % 3];
            const std::string pred = rng.uniform(0.0, 1.0) < 0.7 ? truth : labels[rng.index(3)];
            csv << "t" << k << "," << truth << "," << pred << "\n";
        }
    }

    nlohmann::ordered_json cfg;
    cfg["seed"] = 7;
    cfg["ingest_size"] = 64;
    cfg["compose"] = {{"counts", {{"crack", 30}, {"blob", 30}}}, {"threshold", 128}, {"polarity", "dark"}};
    cfg["embed"] = {{"d_side", 16}, {"perplexity", 15}};
    cfg["filter"] = {{"threshold", 20.0}};
    cfg["metrics"] = {{"predictions", "predictions.csv"}, {"mode", "macro"}, {"negative", "free"}};
    d.config = root / "config.json";
    write_json_file(d.config, cfg);
    return d;
}

void identity_stage(const fs::path& in, const fs::path& out) {
    fs::create_directories(out);
    for (const auto& e : fs::directory_iterator(in))
        if (e.path().extension() == ".png") fs::copy_file(e.path(), out / e.path().filename(), fs::copy_options::overwrite_existing);
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().filename() == "timings.json") continue;
        std::ifstream in(e.path(), std::ios::binary);
        files[fs::relative(e.path(), root).generic_string()] = {std::istreambuf_iterator<char>(in),
                                                                  std::istreambuf_iterator<char>()};
    }
    return files;
}

}  // namespace hybridaug::testing
