#pragma once

#include "hybridaug/raster.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hybridaug {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Draws placements uniformly over the configured ranges. The center is drawn
/// uniformly over all centers that keep the transformed patch inside the
/// background.
struct PlacementSampler {
    Interval theta_deg{0.0, 360.0};
    Interval p{0.5, 1.5};
    Interval q{0.5, 1.5};
    std::uint64_t seed = 0;
};

class Rng;

/// Samples one placement for a patch of the given size, or nullopt when the
/// drawn scale/rotation does not fit inside the background.
std::optional<AffineParams> sample_placement(const PlacementSampler& sampler, Rng& rng,
                                             int patch_width, int patch_height, int bg_width,
                                             int bg_height);

/// Full provenance of one composite; replaying (sketch, background, params)
/// through `fuse` reproduces it bit-exactly.
struct CompositionRecord {
    std::string composite_id;
    std::string sketch_id;
    std::string background_id;
    AffineParams params;
    std::uint64_t seed = 0;
    std::string category;

    friend bool operator==(const CompositionRecord&, const CompositionRecord&) = default;
};

void to_json(nlohmann::json& j, const CompositionRecord& r);
void from_json(const nlohmann::json& j, CompositionRecord& r);

/// Grayscale (for RGB input) followed by a Gaussian blur.
Raster condition_sketch(const Raster& raw, double sigma = 1.0);

struct ExpandedImage {
    Raster image;
    std::size_t source_index = 0;
    /// Empty for the unmodified originals.
    std::optional<AugmentOp> op;
};

/// Returns the originals followed by target_count - set.size() augmented
/// variants. Variant k derives from original k % set.size() with an op drawn
/// from the variant's own random stream.
std::vector<ExpandedImage> expand_traced(std::span<const Raster> set, std::size_t target_count,
                                         const PlacementSampler& sampler);
std::vector<Raster> expand(std::span<const Raster> set, std::size_t target_count,
                           const PlacementSampler& sampler);

struct FuseResult {
    Raster composite;
    /// Background-sized mask of the pixels taken from the defect.
    Mask placed_mask;
};

/// Warps defect and mask by `params`, centers the patch on params.center and
/// takes the defect pixel wherever the placed mask is 1. A 1-channel defect on
/// a 3-channel background is broadcast to all channels.
FuseResult fuse(const Raster& defect, const Mask& mask, const Raster& background,
                const AffineParams& params);

struct SketchInput {
    std::string id;
    std::string category;
    Raster image;
    Mask mask;
};

struct BackgroundInput {
    std::string id;
    Raster image;
};

struct GeneratedSet {
    std::vector<Raster> composites;
    std::vector<Mask> placed_masks;
    std::vector<CompositionRecord> records;
};

struct GenerateOptions {
    std::string id_prefix = "x";
    int max_retries = 100;
    unsigned threads = 1;
};

/// Produces `count` composites. Draw k uses its own random stream, so the
/// output does not depend on `threads`.
GeneratedSet generate_set(std::span<const SketchInput> sketches,
                          std::span<const BackgroundInput> backgrounds, std::size_t count,
                          const PlacementSampler& sampler, const GenerateOptions& options = {});

FuseResult replay(const CompositionRecord& record, const SketchInput& sketch,
                  const BackgroundInput& background);

}  // namespace hybridaug
