#include "hybridaug/sketchlab.hpp"

#include "hybridaug/error.hpp"
#include "hybridaug/kernels/kernels.hpp"
#include "hybridaug/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

namespace hybridaug {
namespace {

constexpr std::uint64_t kExpandSalt = 0x6578706e64ULL;  // "expnd"

std::string echo(const AffineParams& p) {
    std::ostringstream out;
    out << "theta=" << p.theta_deg << " p=" << p.p << " q=" << p.q << " center=(" << p.center.x
        << "," << p.center.y << ")";
    return out.str();
}

AugmentOp sample_augment(Rng& rng, const Raster& img, const PlacementSampler& sampler) {
    using namespace augment_ops;
    const int w = img.width();
    const int h = img.height();
    auto window = [&](double min_fraction) {
        const int ww = static_cast<int>(rng.uniform_int(std::max(1, static_cast<int>(std::ceil(min_fraction * w))), w));
        const int wh = static_cast<int>(rng.uniform_int(std::max(1, static_cast<int>(std::ceil(min_fraction * h))), h));
        const int x = static_cast<int>(rng.uniform_int(0, w - ww));
        const int y = static_cast<int>(rng.uniform_int(0, h - wh));
        return std::array<int, 4>{x, y, ww, wh};
    };
    switch (rng.uniform_int(0, 4)) {
        case 0: {
            const auto win = window(0.6);
            return Clip{win[0], win[1], win[2], win[3]};
        }
        case 1: {
            const auto win = window(0.5);
            return Crop{win[0], win[1], win[2], win[3]};
        }
        case 2:
            return Zoom{rng.uniform(0.75, 1.25)};
        case 3:
            return Translate{static_cast<int>(rng.uniform_int(-w / 8, w / 8)),
                             static_cast<int>(rng.uniform_int(-h / 8, h / 8))};
        default:
            return Rotate{rng.uniform(sampler.theta_deg.lo, sampler.theta_deg.hi)};
    }
}

}  // namespace

void to_json(nlohmann::json& j, const CompositionRecord& r) {
    j = nlohmann::json{{"composite_id", r.composite_id},
                       {"sketch_id", r.sketch_id},
                       {"background_id", r.background_id},
                       {"theta", r.params.theta_deg},
                       {"p", r.params.p},
                       {"q", r.params.q},
                       {"x_o", r.params.center.x},
                       {"y_o", r.params.center.y},
                       {"seed", r.seed},
                       {"category", r.category}};
}

void from_json(const nlohmann::json& j, CompositionRecord& r) {
    try {
        j.at("composite_id").get_to(r.composite_id);
        j.at("sketch_id").get_to(r.sketch_id);
        j.at("background_id").get_to(r.background_id);
        j.at("theta").get_to(r.params.theta_deg);
        j.at("p").get_to(r.params.p);
        j.at("q").get_to(r.params.q);
        j.at("x_o").get_to(r.params.center.x);
        j.at("y_o").get_to(r.params.center.y);
        j.at("seed").get_to(r.seed);
        j.at("category").get_to(r.category);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("composition record: ") + e.what());
    }
}

std::optional<AffineParams> sample_placement(const PlacementSampler& sampler, Rng& rng,
                                             int patch_width, int patch_height, int bg_width,
                                             int bg_height) {
    AffineParams params;
    params.theta_deg = rng.uniform(sampler.theta_deg.lo, sampler.theta_deg.hi);
    params.p = rng.uniform(sampler.p.lo, sampler.p.hi);
    params.q = rng.uniform(sampler.q.lo, sampler.q.hi);
    validate_scale(params);
    const PixelPoint extent = warped_extent(patch_width, patch_height, params);
    if (extent.x < 1 || extent.y < 1 || extent.x > bg_width || extent.y > bg_height) return std::nullopt;
    // Patch origin = center - extent / 2 must lie in [0, bg - extent].
    params.center.x = static_cast<int>(rng.uniform_int(extent.x / 2, bg_width - extent.x + extent.x / 2));
    params.center.y = static_cast<int>(rng.uniform_int(extent.y / 2, bg_height - extent.y + extent.y / 2));
    return params;
}

Raster condition_sketch(const Raster& raw, double sigma) {
    const Raster gray = raw.channels() == 3 ? to_grayscale(raw) : raw;
    return gaussian_blur(gray, sigma);
}

std::vector<ExpandedImage> expand_traced(std::span<const Raster> set, std::size_t target_count,
                                         const PlacementSampler& sampler) {
    if (set.empty()) throw InvalidArgument("expand: input set is empty");
    if (target_count < set.size())
        throw InvalidArgument("expand: target_count " + std::to_string(target_count) +
                              " is smaller than the input set (" + std::to_string(set.size()) + ")");
    std::vector<ExpandedImage> out;
    out.reserve(target_count);
    for (std::size_t k = 0; k < set.size(); ++k) out.push_back({set[k], k, std::nullopt});
    for (std::size_t k = set.size(); k < target_count; ++k) {
        const std::size_t source = k % set.size();
        Rng rng(stream_seed(sampler.seed, k, kExpandSalt));
        AugmentOp op = sample_augment(rng, set[source], sampler);
        out.push_back({augment(set[source], op), source, std::move(op)});
    }
    return out;
}

std::vector<Raster> expand(std::span<const Raster> set, std::size_t target_count,
                           const PlacementSampler& sampler) {
    std::vector<Raster> out;
    for (auto& e : expand_traced(set, target_count, sampler)) out.push_back(std::move(e.image));
    return out;
}

FuseResult fuse(const Raster& defect, const Mask& mask, const Raster& background,
                const AffineParams& params) {
    if (defect.width() != mask.width() || defect.height() != mask.height())
        throw InvalidArgument("fuse: defect and mask dimensions differ");
    if (defect.channels() > background.channels())
        throw InvalidArgument("fuse: a 3-channel defect cannot be placed on a 1-channel background");
    const WarpResult warped = warp(defect, mask, params);
    const int pw = warped.mask.width();
    const int ph = warped.mask.height();
    const int ox = params.center.x - pw / 2;
    const int oy = params.center.y - ph / 2;
    if (ox < 0 || oy < 0 || ox + pw > background.width() || oy + ph > background.height()) {
        std::ostringstream msg;
        msg << "fuse: " << pw << "x" << ph << " patch does not fit in the " << background.width() << "x"
            << background.height() << " background (" << echo(params) << ")";
        throw PlacementError(msg.str());
    }

    const int ch = background.channels();
    FuseResult result{background, Mask(background.width(), background.height())};
    const auto& kern = kernels::active_kernels();
    const std::size_t span = static_cast<std::size_t>(pw) * ch;
    std::vector<std::uint8_t> select(span);
    std::vector<std::uint8_t> fg(span);
    auto out = result.composite.pixels();
    const auto bg = background.pixels();
    for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
            const std::uint8_t bit = warped.mask.at(x, y);
            if (bit) result.placed_mask.set(ox + x, oy + y, true);
            for (int c = 0; c < ch; ++c) {
                select[static_cast<std::size_t>(x) * ch + c] = bit;
                fg[static_cast<std::size_t>(x) * ch + c] = warped.image.at(x, y, defect.channels() == 1 ? 0 : c);
            }
        }
        const std::size_t offset = (static_cast<std::size_t>(oy + y) * background.width() + ox) * ch;
        kern.select_u8(select.data(), fg.data(), bg.data() + offset, out.data() + offset, span);
    }
    return result;
}

GeneratedSet generate_set(std::span<const SketchInput> sketches,
                          std::span<const BackgroundInput> backgrounds, std::size_t count,
                          const PlacementSampler& sampler, const GenerateOptions& options) {
    if (sketches.empty()) throw InvalidArgument("generate_set: no sketches");
    if (backgrounds.empty()) throw InvalidArgument("generate_set: no backgrounds");
    if (count < 1) throw InvalidArgument("generate_set: count must be at least 1");

    GeneratedSet out;
    out.composites.resize(count);
    out.placed_masks.resize(count);
    out.records.resize(count);

    const int width = static_cast<int>(std::to_string(count - 1).size());
    auto draw = [&](std::size_t k) {
        const std::uint64_t seed = stream_seed(sampler.seed, k);
        Rng rng(seed);
        const SketchInput& sketch = sketches[rng.index(sketches.size())];
        const BackgroundInput& bg = backgrounds[rng.index(backgrounds.size())];
        for (int attempt = 0; attempt < options.max_retries; ++attempt) {
            auto params = sample_placement(sampler, rng, sketch.image.width(), sketch.image.height(),
                                           bg.image.width(), bg.image.height());
            if (!params) continue;
            FuseResult fused = fuse(sketch.image, sketch.mask, bg.image, *params);
            std::string index = std::to_string(k);
            index.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(index.size()))), '0');
            out.records[k] = {options.id_prefix + "-" + index, sketch.id, bg.id, *params, seed, sketch.category};
            out.composites[k] = std::move(fused.composite);
            out.placed_masks[k] = std::move(fused.placed_mask);
            return;
        }
        throw PlacementError("generate_set: no valid placement of sketch '" + sketch.id +
                             "' on background '" + bg.id + "' within " +
                             std::to_string(options.max_retries) + " retries (draw " + std::to_string(k) + ")");
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(count)));
    if (threads == 1) {
        for (std::size_t k = 0; k < count; ++k) draw(k);
        return out;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t k = t; k < count; k += threads) draw(k);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

FuseResult replay(const CompositionRecord& record, const SketchInput& sketch,
                  const BackgroundInput& background) {
    if (record.sketch_id != sketch.id || record.background_id != background.id)
        throw InvalidArgument("replay: record " + record.composite_id + " references sketch '" +
                              record.sketch_id + "' and background '" + record.background_id + "'");
    return fuse(sketch.image, sketch.mask, background.image, record.params);
}

}  // namespace hybridaug
