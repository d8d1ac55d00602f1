#include "hybridaug/manifold.hpp"

#include "hybridaug/error.hpp"
#include "hybridaug/kernels/kernels.hpp"
#include "hybridaug/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace hybridaug {
namespace {

constexpr double kEquidistantTolerance = 1e-12;

// log2 of the perplexity for a row at bandwidth `beta` = 1 / (2 sigma^2).
// `shifted` holds d_ij - min_j d_ij for j != i, so the largest weight is 1.
double row_entropy_bits(std::span<const double> shifted, double beta, std::vector<double>& weights) {
    double total = 0.0;
    double weighted = 0.0;
    for (std::size_t k = 0; k < shifted.size(); ++k) {
        weights[k] = std::exp(-beta * shifted[k]);
        total += weights[k];
        weighted += weights[k] * shifted[k];
    }
    return (std::log(total) + beta * weighted / total) / std::log(2.0);
}

struct Soa {
    std::vector<double> xs;
    std::vector<double> ys;
};

Soa to_soa(const Embedding& emb) {
    Soa out;
    out.xs.reserve(emb.size());
    out.ys.reserve(emb.size());
    for (const auto& pt : emb.points) {
        out.xs.push_back(pt.x);
        out.ys.push_back(pt.y);
    }
    return out;
}

// Student-t kernel matrix and its all-pairs sum, accumulated row by row.
double student_t_matrix(const Soa& y, std::vector<double>& w) {
    const std::size_t n = y.xs.size();
    const auto& kern = kernels::active_kernels();
    w.resize(n * n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        kern.student_t_row(y.xs.data(), y.ys.data(), n, i, w.data() + i * n);
        for (std::size_t j = 0; j < n; ++j) z += w[i * n + j];
    }
    return z;
}

std::vector<Gradient2> gradient_soa(const AffinityMatrix& P, const Soa& y, double p_scale,
                                    std::vector<double>& w) {
    const std::size_t n = y.xs.size();
    const double z = student_t_matrix(y, w);
    const auto& kern = kernels::active_kernels();
    std::vector<Gradient2> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const kernels::Vec2 g = kern.kl_gradient_row(P.row(i).data(), p_scale, w.data() + i * n, 1.0 / z,
                                                     y.xs.data(), y.ys.data(), n, i);
        out[i] = {g.x, g.y};
    }
    return out;
}

double kl_cost_soa(const AffinityMatrix& P, const Soa& y, std::vector<double>& w) {
    const std::size_t n = y.xs.size();
    const double z = student_t_matrix(y, w);
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double p = P.at(i, j);
            if (p <= 0.0) continue;
            const double q = std::max(w[i * n + j] / z, kProbabilityFloor);
            cost += p * std::log(p / q);
        }
    }
    return cost;
}

void check_size(const AffinityMatrix& P, const Embedding& Y) {
    if (P.size() != Y.size())
        throw InvalidArgument("affinity matrix has " + std::to_string(P.size()) +
                              " rows but the embedding has " + std::to_string(Y.size()) + " points");
}

}  // namespace

FeatureVector extract_features(const Raster& img, int d_side, std::string source_id) {
    if (d_side < 2) throw InvalidArgument("feature side length must be at least 2");
    const Raster gray = img.channels() == 3 ? to_grayscale(img) : img;
    std::vector<double> values = resize_area(gray, d_side, d_side);
    for (double& v : values) v /= 255.0;
    return {std::move(values), std::move(source_id)};
}

void center_features(std::span<FeatureVector> features) {
    if (features.empty()) return;
    const std::size_t dim = features.front().values.size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& f : features) {
        if (f.values.size() != dim) throw InvalidArgument("feature vectors have differing dimensions");
        for (std::size_t k = 0; k < dim; ++k) mean[k] += f.values[k];
    }
    for (double& m : mean) m /= static_cast<double>(features.size());
    for (auto& f : features)
        for (std::size_t k = 0; k < dim; ++k) f.values[k] -= mean[k];
}

std::vector<double> squared_distance_matrix(std::span<const FeatureVector> features) {
    const std::size_t n = features.size();
    if (n == 0) return {};
    const std::size_t dim = features.front().values.size();
    std::vector<double> major(dim * n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& v = features[j].values;
        if (v.size() != dim)
            throw InvalidArgument("feature vector '" + features[j].source_id + "' has dimension " +
                                  std::to_string(v.size()) + ", expected " + std::to_string(dim));
        for (std::size_t k = 0; k < dim; ++k) {
            if (!std::isfinite(v[k]))
                throw InvalidArgument("feature vector '" + features[j].source_id + "' is not finite");
            major[k * n + j] = v[k];
        }
    }
    std::vector<double> out(n * n);
    const auto& kern = kernels::active_kernels();
    for (std::size_t i = 0; i < n; ++i) kern.squared_distances_from(major.data(), n, dim, i, out.data() + i * n);
    return out;
}

ConditionalAffinities conditional_affinities(std::span<const FeatureVector> features, double perplexity) {
    const std::vector<double> d = squared_distance_matrix(features);
    return conditional_affinities_from_distances(d, features.size(), perplexity);
}

ConditionalAffinities conditional_affinities_from_distances(std::span<const double> sq_dist,
                                                            std::size_t n, double perplexity) {
    if (n < 3) throw InvalidArgument("conditional affinities need at least 3 points");
    if (sq_dist.size() != n * n) throw InvalidArgument("distance matrix is not n x n");
    if (!(perplexity >= 1.0) || !(perplexity < static_cast<double>(n)))
        throw InvalidArgument("perplexity must lie in [1, n), got " + std::to_string(perplexity));

    ConditionalAffinities out;
    out.n = n;
    out.p.assign(n * n, 0.0);
    out.sigma.assign(n, std::numeric_limits<double>::infinity());
    out.perplexity.assign(n, static_cast<double>(n - 1));
    out.status.assign(n, RowStatus::Calibrated);

    const double target_bits = std::log2(perplexity);
    const double uniform = 1.0 / static_cast<double>(n - 1);
    std::vector<double> shifted(n - 1);
    std::vector<double> weights(n - 1);

    for (std::size_t i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        double dmax = 0.0;
        bool duplicate = false;
        for (std::size_t j = 0, k = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = sq_dist[i * n + j];
            duplicate = duplicate || d == 0.0;
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
            shifted[k++] = d;
        }
        auto write_uniform = [&] {
            for (std::size_t j = 0; j < n; ++j) out.p[i * n + j] = j == i ? 0.0 : uniform;
        };
        if (duplicate) {
            write_uniform();
            out.status[i] = RowStatus::Duplicate;
            continue;
        }
        double gap = std::numeric_limits<double>::infinity();
        for (double& s : shifted) {
            s -= dmin;
            if (s > 0.0) gap = std::min(gap, s);
        }
        const double spread = dmax - dmin;
        // Distances equal up to rounding (e.g. an equilateral triangle whose
        // coordinates are not exact) are treated as equal; otherwise the
        // search would turn ulp-level differences into a lopsided row.
        const bool equidistant = spread <= kEquidistantTolerance * dmax;
        // beta = 0 is the uniform row with perplexity n - 1, the maximum.
        if (equidistant || perplexity >= static_cast<double>(n - 1)) {
            write_uniform();
            if (std::abs(static_cast<double>(n - 1) - perplexity) > kPerplexityTolerance)
                out.status[i] = RowStatus::Unreachable;
            continue;
        }

        // Bisection on log(beta); perplexity decreases monotonically in beta.
        double lo = std::log(1e-10 / spread);
        double hi = std::log(800.0 / gap);
        double beta = std::exp(0.5 * (lo + hi));
        double bits = 0.0;
        for (int iter = 0; iter < kBandwidthSearchIterations; ++iter) {
            const double mid = 0.5 * (lo + hi);
            beta = std::exp(mid);
            bits = row_entropy_bits(shifted, beta, weights);
            if (std::abs(std::exp2(bits) - perplexity) < 1e-12 * perplexity) break;
            if (bits > target_bits) lo = mid; else hi = mid;
        }
        bits = row_entropy_bits(shifted, beta, weights);
        double total = 0.0;
        for (double w : weights) total += w;
        for (std::size_t j = 0, k = 0; j < n; ++j) {
            if (j == i) continue;
            out.p[i * n + j] = weights[k++] / total;
        }
        out.sigma[i] = std::sqrt(1.0 / (2.0 * beta));
        out.perplexity[i] = std::exp2(bits);
        if (std::abs(out.perplexity[i] - perplexity) > kPerplexityTolerance) out.status[i] = RowStatus::Unreachable;
    }
    return out;
}

AffinityMatrix::AffinityMatrix(std::size_t n, std::vector<double> p) : n_(n), p_(std::move(p)) {
    if (p_.size() != n * n) throw InvalidArgument("affinity matrix must be n x n");
}

AffinityMatrix symmetrize(std::span<const double> conditional, std::size_t n) {
    if (conditional.size() != n * n) throw InvalidArgument("conditional matrix must be n x n");
    if (n < 2) throw InvalidArgument("symmetrize needs at least 2 points");
    std::vector<double> p(n * n, 0.0);
    const double denom = 2.0 * static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double v = std::max((conditional[i * n + j] + conditional[j * n + i]) / denom, kProbabilityFloor);
            p[i * n + j] = v;
            total += v;
        }
    }
    for (double& v : p) v /= total;
    return AffinityMatrix(n, std::move(p));
}

std::string to_string(Origin origin) { return origin == Origin::Real ? "real" : "generated"; }

Origin origin_from_string(const std::string& s) {
    if (s == "real") return Origin::Real;
    if (s == "generated") return Origin::Generated;
    throw SchemaError("unknown embedding origin '" + s + "'");
}

nlohmann::json embedding_to_json(const Embedding& emb) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& pt : emb.points) {
        arr.push_back({{"id", pt.source_id}, {"x", pt.x}, {"y", pt.y}, {"origin", to_string(pt.origin)},
                       {"category", pt.category}});
    }
    return arr;
}

Embedding embedding_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw SchemaError("embedding document must be a JSON array");
    Embedding emb;
    for (std::size_t k = 0; k < j.size(); ++k) {
        try {
            const auto& e = j[k];
            emb.points.push_back({e.at("x").get<double>(), e.at("y").get<double>(), e.at("id").get<std::string>(),
                                  origin_from_string(e.at("origin").get<std::string>()),
                                  e.at("category").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("embedding point " + std::to_string(k) + ": " + e.what());
        }
    }
    return emb;
}

std::vector<double> low_dim_affinities(const Embedding& emb) {
    const std::size_t n = emb.size();
    if (n < 2) throw InvalidArgument("low-dimensional affinities need at least 2 points");
    std::vector<double> w;
    const double z = student_t_matrix(to_soa(emb), w);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double& v = w[i * n + j];
            v = i == j ? 0.0 : std::max(v / z, kProbabilityFloor);
            total += v;
        }
    }
    for (double& v : w) v /= total;
    return w;
}

std::vector<Gradient2> gradient(const AffinityMatrix& P, const Embedding& Y, double p_scale) {
    check_size(P, Y);
    std::vector<double> w;
    return gradient_soa(P, to_soa(Y), p_scale, w);
}

double kl_cost(const AffinityMatrix& P, const Embedding& Y) {
    check_size(P, Y);
    std::vector<double> w;
    return kl_cost_soa(P, to_soa(Y), w);
}

void validate(const TsneConfig& cfg, std::size_t n) {
    if (n < 3) throw InvalidArgument("t-SNE needs at least 3 points, got " + std::to_string(n));
    if (!(cfg.perplexity > 1.0)) throw InvalidArgument("perplexity must exceed 1");
    if (cfg.iterations < 1) throw InvalidArgument("iterations must be at least 1");
    if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
    for (double m : {cfg.initial_momentum, cfg.final_momentum})
        if (!(m >= 0.0 && m < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
    if (!(cfg.early_exaggeration > 0.0)) throw InvalidArgument("early exaggeration must be positive");
    if (cfg.exaggeration_iterations < 0 || cfg.momentum_switch_iteration < 0)
        throw InvalidArgument("iteration thresholds must be non-negative");
}

EmbedResult embed(std::span<const FeatureVector> features, const TsneConfig& cfg,
                  std::span<const PointTag> tags) {
    const std::size_t n = features.size();
    validate(cfg, n);
    if (!tags.empty() && tags.size() != n) throw InvalidArgument("point tags do not align with features");

    EmbedResult result;
    result.perplexity = std::min(cfg.perplexity, static_cast<double>(n - 1));
    const ConditionalAffinities cond = conditional_affinities(features, result.perplexity);
    result.uncalibrated_rows = static_cast<std::size_t>(
        std::count_if(cond.status.begin(), cond.status.end(), [](RowStatus s) { return s != RowStatus::Calibrated; }));
    const AffinityMatrix P = symmetrize(cond.p, n);

    Rng rng(cfg.seed);
    Soa y;
    y.xs.resize(n);
    y.ys.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        y.xs[i] = rng.normal(0.0, 1e-2);
        y.ys[i] = rng.normal(0.0, 1e-2);
    }
    Soa prev = y;
    std::vector<double> w;
    result.initial_kl = kl_cost_soa(P, y, w);

    for (int t = 0; t < cfg.iterations; ++t) {
        const double scale = t < cfg.exaggeration_iterations ? cfg.early_exaggeration : 1.0;
        const double momentum = t < cfg.momentum_switch_iteration ? cfg.initial_momentum : cfg.final_momentum;
        const std::vector<Gradient2> g = gradient_soa(P, y, scale, w);
        double mean_x = 0.0;
        double mean_y = 0.0;
        Soa next = y;
        for (std::size_t i = 0; i < n; ++i) {
            next.xs[i] = y.xs[i] - cfg.learning_rate * g[i].x + momentum * (y.xs[i] - prev.xs[i]);
            next.ys[i] = y.ys[i] - cfg.learning_rate * g[i].y + momentum * (y.ys[i] - prev.ys[i]);
            mean_x += next.xs[i];
            mean_y += next.ys[i];
        }
        mean_x /= static_cast<double>(n);
        mean_y /= static_cast<double>(n);
        bool finite = std::isfinite(mean_x) && std::isfinite(mean_y);
        for (std::size_t i = 0; i < n; ++i) {
            next.xs[i] -= mean_x;
            next.ys[i] -= mean_y;
            y.xs[i] -= mean_x;
            y.ys[i] -= mean_y;
        }
        if (!finite) {
            double max_norm = 0.0;
            for (const auto& gi : g) max_norm = std::max(max_norm, std::hypot(gi.x, gi.y));
            std::ostringstream msg;
            msg << "t-SNE diverged at iteration " << t << " (max gradient norm " << max_norm << ")";
            throw NumericalError(msg.str());
        }
        prev = std::move(y);
        y = std::move(next);
    }
    result.final_kl = kl_cost_soa(P, y, w);
    if (!std::isfinite(result.final_kl)) throw NumericalError("t-SNE final cost is not finite");

    result.embedding.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& pt = result.embedding.points[i];
        pt.x = y.xs[i];
        pt.y = y.ys[i];
        if (tags.empty()) {
            pt.source_id = features[i].source_id;
        } else {
            pt.source_id = tags[i].source_id;
            pt.origin = tags[i].origin;
            pt.category = tags[i].category;
        }
    }
    return result;
}

void write_matrix_csv(std::ostream& out, std::span<const double> values, std::size_t n) {
    if (values.size() != n * n) throw InvalidArgument("matrix is not n x n");
    out.precision(17);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) out << (j ? "," : "") << values[i * n + j];
        out << '\n';
    }
}

}  // namespace hybridaug
