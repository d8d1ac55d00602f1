#pragma once

#include "hybridaug/raster.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace hybridaug {

struct FeatureVector {
    std::vector<double> values;
    std::string source_id;
};

/// Grayscale, area-average downsample to d_side x d_side, flatten row-major
/// and scale to [0, 1]. Centering is a separate, per-run step.
FeatureVector extract_features(const Raster& img, int d_side, std::string source_id = {});

/// Subtracts the per-run mean vector from every feature vector.
void center_features(std::span<FeatureVector> features);

/// Squared pairwise distances, row-major n x n. Throws on ragged or
/// non-finite input.
std::vector<double> squared_distance_matrix(std::span<const FeatureVector> features);

enum class RowStatus {
    Calibrated,   ///< 2^H hits the target within tolerance
    Duplicate,    ///< point coincides with another; uniform fallback row
    Unreachable,  ///< target outside the attainable range; best row kept
};

/// Row-normalized Gaussian affinities p_{j|i} (row-major, zero diagonal).
struct ConditionalAffinities {
    std::size_t n = 0;
    std::vector<double> p;
    /// Bandwidth per row; +inf for uniform rows.
    std::vector<double> sigma;
    /// 2^H(P_i) achieved by each row.
    std::vector<double> perplexity;
    std::vector<RowStatus> status;

    double at(std::size_t i, std::size_t j) const { return p[i * n + j]; }
};

inline constexpr double kPerplexityTolerance = 1e-5;
inline constexpr int kBandwidthSearchIterations = 50;

ConditionalAffinities conditional_affinities(std::span<const FeatureVector> features,
                                             double perplexity);
/// Same, from a precomputed row-major squared-distance matrix.
ConditionalAffinities conditional_affinities_from_distances(std::span<const double> sq_dist,
                                                            std::size_t n, double perplexity);

inline constexpr double kProbabilityFloor = 1e-12;

/// Joint affinities p_ij = (p_{j|i} + p_{i|j}) / 2n, off-diagonal floored at
/// kProbabilityFloor and renormalized to sum to 1.
class AffinityMatrix {
public:
    AffinityMatrix() = default;
    AffinityMatrix(std::size_t n, std::vector<double> p);

    std::size_t size() const noexcept { return n_; }
    double at(std::size_t i, std::size_t j) const { return p_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const { return {p_.data() + i * n_, n_}; }
    std::span<const double> values() const noexcept { return p_; }

private:
    std::size_t n_ = 0;
    std::vector<double> p_;
};

AffinityMatrix symmetrize(std::span<const double> conditional, std::size_t n);

enum class Origin { Real, Generated };

std::string to_string(Origin origin);
Origin origin_from_string(const std::string& s);

struct EmbeddingPoint {
    double x = 0.0;
    double y = 0.0;
    std::string source_id;
    Origin origin = Origin::Real;
    std::string category;

    friend bool operator==(const EmbeddingPoint&, const EmbeddingPoint&) = default;
};

struct Embedding {
    std::vector<EmbeddingPoint> points;

    std::size_t size() const noexcept { return points.size(); }
    friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// JSON array of {id, x, y, origin, category}.
nlohmann::json embedding_to_json(const Embedding& emb);
Embedding embedding_from_json(const nlohmann::json& j);

/// Student-t affinities normalized over all ordered pairs; row-major n x n,
/// zero diagonal, floored at kProbabilityFloor and renormalized.
std::vector<double> low_dim_affinities(const Embedding& emb);

struct Gradient2 {
    double x = 0.0;
    double y = 0.0;
};

/// dC/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1.
/// `p_scale` multiplies P (early exaggeration); 1 gives the true gradient.
std::vector<Gradient2> gradient(const AffinityMatrix& P, const Embedding& Y, double p_scale = 1.0);

/// KL(P || Q) with Q floored at kProbabilityFloor.
double kl_cost(const AffinityMatrix& P, const Embedding& Y);

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iteration = 250;
    double early_exaggeration = 4.0;
    /// Set to 0 to disable early exaggeration.
    int exaggeration_iterations = 100;
    std::uint64_t seed = 0;
};

void validate(const TsneConfig& cfg, std::size_t n);

struct PointTag {
    std::string source_id;
    Origin origin = Origin::Real;
    std::string category;
};

struct EmbedResult {
    Embedding embedding;
    double initial_kl = 0.0;
    double final_kl = 0.0;
    /// Effective perplexity after clamping to n - 1.
    double perplexity = 0.0;
    std::size_t uncalibrated_rows = 0;
};

/// Exact t-SNE: Gaussian init with variance 1e-4, then `iterations` momentum
/// steps against the KL gradient. `tags`, when non-empty, must align with
/// `features`; otherwise points take the feature source ids and Origin::Real.
EmbedResult embed(std::span<const FeatureVector> features, const TsneConfig& cfg,
                  std::span<const PointTag> tags = {});

/// Writes a square matrix as CSV (no header).
void write_matrix_csv(std::ostream& out, std::span<const double> values, std::size_t n);

}  // namespace hybridaug
