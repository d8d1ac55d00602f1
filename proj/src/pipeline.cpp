#include "hybridaug/pipeline.hpp"

#include "hybridaug/curator.hpp"
#include "hybridaug/error.hpp"
#include "hybridaug/kernels/kernels.hpp"
#include "hybridaug/manifold.hpp"
#include "hybridaug/png_io.hpp"
#include "hybridaug/rng.hpp"
#include "hybridaug/scoreboard.hpp"
#include "hybridaug/sketchlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace hybridaug {
namespace fs = std::filesystem;
namespace {

constexpr std::uint64_t kComposeSalt = 0x636f6d70ULL;     // "comp"
constexpr std::uint64_t kBackgroundSalt = 0x62676e64ULL;  // "bgnd"
constexpr std::uint64_t kSketchSalt = 0x736b7463ULL;      // "sktc"
constexpr const char* kIngest = "compose/ingest";

const nlohmann::json& section(const PipelineOptions& opts, const char* name) {
    static const nlohmann::json empty = nlohmann::json::object();
    if (!opts.config.is_object() || !opts.config.contains(name)) return empty;
    const auto& s = opts.config.at(name);
    if (!s.is_object()) throw SchemaError(std::string("config section '") + name + "' must be an object");
    return s;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("config key '") + key + "': " + e.what());
    }
}

Interval get_interval(const nlohmann::json& j, const char* key, Interval fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw SchemaError(std::string("config key '") + key + "' must be [lo, hi]");
    return {v[0].get<double>(), v[1].get<double>()};
}

fs::path config_path(const PipelineOptions& opts, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (opts.config_dir / path).lexically_normal();
}

fs::path out_path(const PipelineOptions& opts, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (opts.out_dir / path).lexically_normal();
}

DatasetManifest load_working_manifest(const PipelineOptions& opts, const std::vector<std::string>& also_needed) {
    std::vector<std::string> missing;
    if (!fs::exists(opts.out_dir / layout::kManifest)) missing.push_back(layout::kManifest);
    for (const auto& p : also_needed)
        if (!fs::exists(opts.out_dir / p)) missing.push_back(p);
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw PrerequisiteError("missing stage outputs in '" + opts.out_dir.string() + "': " + list);
    }
    return load_manifest(opts.out_dir / layout::kManifest);
}

std::string dims(const Raster& r) { return std::to_string(r.width()) + "x" + std::to_string(r.height()); }

Raster normalize_size(const Raster& img, int side) {
    if (side <= 0 || (img.width() == side && img.height() == side)) return img;
    if (img.width() >= side && img.height() >= side) return resize_area_rounded(img, side, side);
    return resize_bilinear(img, side, side);
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void write_timings(const PipelineOptions& opts, const std::string& stage, const Timer& timer) {
    nlohmann::ordered_json t;
    t["stage"] = stage;
    t["seconds"] = timer.seconds();
    t["kernels"] = std::string(kernels::active_kernels().name);
    write_json_file(opts.out_dir / stage / "timings.json", t);
}

Mask sketch_mask(const Raster& sketch, const nlohmann::json& cfg) {
    const std::string polarity = get_or<std::string>(cfg, "polarity", "dark");
    if (polarity != "dark" && polarity != "bright")
        throw SchemaError("compose.polarity must be 'dark' or 'bright'");
    int threshold = 128;
    if (cfg.contains("threshold") && cfg.at("threshold").is_string()) {
        if (cfg.at("threshold").get<std::string>() != "auto") throw SchemaError("compose.threshold must be a number or 'auto'");
        threshold = otsu_threshold(sketch) + (polarity == "dark" ? 1 : 0);
    } else {
        threshold = get_or<int>(cfg, "threshold", 128);
    }
    return binarize(sketch, threshold, polarity == "dark" ? Polarity::DefectDark : Polarity::DefectBright);
}

std::size_t category_index(const DatasetManifest& m, const std::string& name) {
    for (std::size_t k = 0; k < m.categories.size(); ++k)
        if (m.categories[k].name == name) return k;
    throw InvalidArgument("unknown category '" + name + "'");
}

std::string variant_id(const std::string& source, std::size_t k) {
    return source + "~aug" + std::to_string(k);
}

// ---------------------------------------------------------------- compose

nlohmann::ordered_json run_compose(const PipelineOptions& opts) {
    if (!opts.input_manifest) throw PrerequisiteError("compose needs an input manifest (--manifest)");
    const auto& cfg = section(opts, "compose");
    DatasetManifest m = rebase(load_manifest(*opts.input_manifest), opts.out_dir);

    std::map<std::string, std::size_t> counts;
    if (cfg.contains("counts")) {
        for (const auto& [name, n] : cfg.at("counts").items()) {
            if (!m.category(name)) throw SchemaError("compose.counts names undeclared category '" + name + "'");
            counts[name] = n.get<std::size_t>();
        }
    }
    const int ingest = get_or<int>(opts.config, "ingest_size", 300);
    const double sigma = get_or<double>(cfg, "sketch_sigma", 1.0);
    PlacementSampler base;
    base.theta_deg = get_interval(cfg, "theta", base.theta_deg);
    base.p = get_interval(cfg, "p", base.p);
    base.q = get_interval(cfg, "q", base.q);
    GenerateOptions gen;
    gen.max_retries = get_or<int>(cfg, "max_retries", 100);
    gen.threads = get_or<unsigned>(cfg, "threads", 1u);

    std::set<std::string> bg_categories;
    if (cfg.contains("background_categories")) {
        for (const auto& c : cfg.at("background_categories")) bg_categories.insert(c.get<std::string>());
    } else {
        for (const auto& c : m.categories)
            if (c.role == CategoryRole::Free) bg_categories.insert(c.name);
    }

    nlohmann::ordered_json report;
    report["stage"] = "compose";
    report["seed"] = opts.seed;
    std::size_t requested = 0;
    for (const auto& [_, n] : counts) requested += n;
    if (requested == 0) {
        save_manifest(m, opts.out_dir / layout::kManifest);
        report["composites"] = 0;
        report["counts"] = nlohmann::ordered_json::object();
        report["noop"] = true;
        return report;
    }

    // Ingest normalization of real images, then the background pool.
    std::vector<BackgroundInput> backgrounds;
    std::vector<ManifestEntry> added;
    for (auto& e : m.entries) {
        if (e.origin != EntryOrigin::Real) continue;
        Raster img = read_png(m.resolve(e));
        Raster normalized = normalize_size(img, ingest);
        if (!(normalized == img)) {
            const fs::path dst = opts.out_dir / kIngest / (e.id + ".png");
            write_png(dst, normalized);
            e.path = relative_path(dst, opts.out_dir);
        }
        if (bg_categories.count(e.category)) backgrounds.push_back({e.id, std::move(normalized)});
    }
    if (backgrounds.empty()) throw InvalidArgument("compose: no background images in categories set for backgrounds");
    const std::size_t expand_bg = get_or<std::size_t>(cfg, "expand_backgrounds_to", 0);
    if (expand_bg > backgrounds.size()) {
        std::vector<Raster> imgs;
        for (const auto& b : backgrounds) imgs.push_back(b.image);
        PlacementSampler s = base;
        s.seed = stream_seed(opts.seed, 0, kBackgroundSalt);
        auto expanded = expand_traced(imgs, expand_bg, s);
        const std::size_t originals = backgrounds.size();
        for (std::size_t k = originals; k < expanded.size(); ++k) {
            const auto& src = *m.find(backgrounds[expanded[k].source_index].id);
            const std::string id = variant_id(src.id, k);
            const fs::path dst = opts.out_dir / layout::kBackgrounds / (id + ".png");
            write_png(dst, expanded[k].image);
            added.push_back({id, relative_path(dst, opts.out_dir), src.category, EntryOrigin::Real, Stage::Conditioned,
                             std::nullopt, std::nullopt});
            backgrounds.push_back({id, std::move(expanded[k].image)});
        }
    }

    const auto expand_to = cfg.contains("expand_sketches_to") ? cfg.at("expand_sketches_to") : nlohmann::json::object();
    std::vector<CompositionRecord> all_records;
    nlohmann::ordered_json count_report = nlohmann::ordered_json::object();
    nlohmann::ordered_json sketch_report = nlohmann::ordered_json::object();
    // Sketches whose mask is empty composite to the bare background; usually a
    // threshold or polarity mismatch, so they are listed rather than hidden.
    nlohmann::ordered_json empty_masks = nlohmann::ordered_json::array();

    for (const auto& category : m.categories) {
        const auto it = counts.find(category.name);
        if (it == counts.end() || it->second == 0) continue;
        const std::size_t cat_index = category_index(m, category.name);

        std::vector<SketchInput> sketches;
        for (auto& e : m.entries) {
            if (e.origin != EntryOrigin::Sketch || e.category != category.name) continue;
            Raster img = read_png(m.resolve(e));
            Raster conditioned;
            if (e.stage == Stage::Raw) {
                conditioned = condition_sketch(img, sigma);
                const fs::path dst = opts.out_dir / layout::kSketches / (e.id + ".png");
                write_png(dst, conditioned);
                e.path = relative_path(dst, opts.out_dir);
                e.stage = Stage::Conditioned;
            } else {
                conditioned = img.channels() == 3 ? to_grayscale(img) : img;
            }
            Mask mask = sketch_mask(conditioned, cfg);
            const fs::path mdst = opts.out_dir / layout::kSketchMasks / (e.id + ".png");
            write_mask_png(mdst, mask);
            e.mask = relative_path(mdst, opts.out_dir);
            sketches.push_back({e.id, e.category, std::move(conditioned), std::move(mask)});
        }
        if (sketches.empty()) throw InvalidArgument("compose: category '" + category.name + "' has no sketches");

        const std::size_t target = get_or<std::size_t>(expand_to, category.name.c_str(), 0);
        if (target > sketches.size()) {
            std::vector<Raster> imgs;
            for (const auto& s : sketches) imgs.push_back(s.image);
            PlacementSampler s = base;
            s.seed = stream_seed(opts.seed, cat_index, kSketchSalt);
            auto expanded = expand_traced(imgs, target, s);
            const std::size_t originals = sketches.size();
            for (std::size_t k = originals; k < expanded.size(); ++k) {
                const std::string id = variant_id(sketches[expanded[k].source_index].id, k);
                Mask mask = sketch_mask(expanded[k].image, cfg);
                const fs::path dst = opts.out_dir / layout::kSketches / (id + ".png");
                const fs::path mdst = opts.out_dir / layout::kSketchMasks / (id + ".png");
                write_png(dst, expanded[k].image);
                write_mask_png(mdst, mask);
                added.push_back({id, relative_path(dst, opts.out_dir), category.name, EntryOrigin::Sketch,
                                 Stage::Conditioned, relative_path(mdst, opts.out_dir), std::nullopt});
                sketches.push_back({id, category.name, std::move(expanded[k].image), std::move(mask)});
            }
        }
        sketch_report[category.name] = sketches.size();
        for (const auto& sk : sketches)
            if (sk.mask.count() == 0) empty_masks.push_back(sk.id);

        PlacementSampler sampler = base;
        sampler.seed = stream_seed(opts.seed, cat_index, kComposeSalt);
        GenerateOptions g = gen;
        g.id_prefix = category.name;
        GeneratedSet set = generate_set(sketches, backgrounds, it->second, sampler, g);
        for (std::size_t k = 0; k < set.records.size(); ++k) {
            const auto& rec = set.records[k];
            const fs::path dst = opts.out_dir / layout::kComposites / (rec.composite_id + ".png");
            const fs::path mdst = opts.out_dir / layout::kCompositeMasks / (rec.composite_id + ".png");
            write_png(dst, set.composites[k]);
            write_mask_png(mdst, set.placed_masks[k]);
            added.push_back({rec.composite_id, relative_path(dst, opts.out_dir), category.name, EntryOrigin::Generated,
                             Stage::Composited, relative_path(mdst, opts.out_dir), rec});
            all_records.push_back(rec);
        }
        count_report[category.name] = set.records.size();
    }

    for (auto& e : added) m.entries.push_back(std::move(e));
    validate(m, true);
    save_manifest(m, opts.out_dir / layout::kManifest);

    std::ofstream records(opts.out_dir / layout::kRecords, std::ios::binary | std::ios::trunc);
    for (const auto& r : all_records) records << nlohmann::json(r).dump() << '\n';
    if (!records) throw IoError("cannot write composition records");

    report["composites"] = all_records.size();
    report["counts"] = std::move(count_report);
    report["sketches"] = std::move(sketch_report);
    report["empty_masks"] = std::move(empty_masks);
    report["backgrounds"] = backgrounds.size();
    report["ingest_size"] = ingest;
    return report;
}

// ------------------------------------------------------------------ embed

nlohmann::ordered_json run_embed(const PipelineOptions& opts) {
    const auto& cfg = section(opts, "embed");
    DatasetManifest m = load_working_manifest(opts, {});
    std::vector<const ManifestEntry*> generated;
    for (const auto& e : m.entries)
        if (e.origin == EntryOrigin::Generated) generated.push_back(&e);
    if (generated.empty()) throw PrerequisiteError("missing stage outputs: no generated entries (run compose)");

    std::set<std::string> real_categories;
    if (cfg.contains("real_categories")) {
        for (const auto& c : cfg.at("real_categories")) real_categories.insert(c.get<std::string>());
    } else {
        for (const auto* e : generated) real_categories.insert(e->category);
    }
    std::vector<const ManifestEntry*> points;
    for (const auto& e : m.entries)
        if (e.origin == EntryOrigin::Real && e.stage == Stage::Raw && real_categories.count(e.category)) points.push_back(&e);
    const std::size_t real_count = points.size();
    points.insert(points.end(), generated.begin(), generated.end());

    const int d_side = get_or<int>(cfg, "d_side", 32);
    std::vector<FeatureVector> features;
    std::vector<PointTag> tags;
    for (const auto* e : points) {
        features.push_back(extract_features(read_png(m.resolve(*e)), d_side, e->id));
        tags.push_back({e->id, e->origin == EntryOrigin::Generated ? Origin::Generated : Origin::Real, e->category});
    }
    center_features(features);

    TsneConfig tc;
    tc.perplexity = get_or<double>(cfg, "perplexity", tc.perplexity);
    tc.iterations = get_or<int>(cfg, "iterations", tc.iterations);
    tc.learning_rate = get_or<double>(cfg, "learning_rate", tc.learning_rate);
    tc.initial_momentum = get_or<double>(cfg, "initial_momentum", tc.initial_momentum);
    tc.final_momentum = get_or<double>(cfg, "final_momentum", tc.final_momentum);
    tc.momentum_switch_iteration = get_or<int>(cfg, "momentum_switch_iteration", tc.momentum_switch_iteration);
    tc.early_exaggeration = get_or<double>(cfg, "early_exaggeration", tc.early_exaggeration);
    tc.exaggeration_iterations = get_or<int>(cfg, "exaggeration_iterations", tc.exaggeration_iterations);
    tc.seed = opts.seed;
    const EmbedResult res = embed(features, tc, tags);

    write_json_file(opts.out_dir / layout::kEmbedding, embedding_to_json(res.embedding));
    if (get_or<bool>(cfg, "export_affinities", false)) {
        const auto cond = conditional_affinities(features, res.perplexity);
        const AffinityMatrix P = symmetrize(cond.p, features.size());
        std::ofstream csv(opts.out_dir / "embed/affinities.csv", std::ios::binary | std::ios::trunc);
        write_matrix_csv(csv, P.values(), P.size());
    }

    nlohmann::ordered_json report;
    report["stage"] = "embed";
    report["seed"] = opts.seed;
    report["points"] = points.size();
    report["real"] = real_count;
    report["generated"] = generated.size();
    report["d_side"] = d_side;
    report["perplexity"] = res.perplexity;
    report["iterations"] = tc.iterations;
    report["uncalibrated_rows"] = res.uncalibrated_rows;
    report["initial_kl"] = res.initial_kl;
    report["final_kl"] = res.final_kl;
    return report;
}

// ----------------------------------------------------------------- filter

nlohmann::ordered_json run_filter(const PipelineOptions& opts) {
    const auto& cfg = section(opts, "filter");
    DatasetManifest m = load_working_manifest(opts, {layout::kEmbedding});
    std::ifstream in(opts.out_dir / layout::kEmbedding);
    const Embedding emb = embedding_from_json(nlohmann::json::parse(in));

    FilterPolicy policy;
    if (cfg.contains("threshold") && !cfg.at("threshold").is_null()) policy.threshold = cfg.at("threshold").get<double>();
    policy.per_category = get_or<bool>(cfg, "per_category", true);
    const FilterResult fr = filter_by_distance(emb, policy);

    const fs::path log_path = out_path(opts, get_or<std::string>(cfg, "decisions", layout::kDecisions));
    std::vector<ReviewDecision> decisions;
    if (fs::exists(log_path)) decisions = DecisionLog::read(log_path);
    std::vector<std::string> warnings;
    const std::vector<std::string> kept = apply_decisions(fr, decisions, &warnings);
    const std::set<std::string> kept_set(kept.begin(), kept.end());

    const CuratedExport curated = export_curated(m, kept);
    save_manifest(curated.manifest, opts.out_dir / layout::kCurated);

    for (auto& e : m.entries) {
        if (e.origin != EntryOrigin::Generated) continue;
        if (kept_set.count(e.id)) {
            e.stage = Stage::Curated;
        } else if (e.stage == Stage::Curated) {
            e.stage = e.path.rfind(std::string(layout::kStyled) + "/", 0) == 0 ? Stage::Styled : Stage::Composited;
        }
    }
    save_manifest(m, opts.out_dir / layout::kManifest);

    nlohmann::ordered_json partition;
    partition["threshold"] = std::isinf(policy.threshold) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(policy.threshold);
    partition["per_category"] = policy.per_category;
    partition["kept"] = kept;
    std::vector<std::string> removed;
    for (const auto& d : fr.distances)
        if (!kept_set.count(d.id)) removed.push_back(d.id);
    partition["removed"] = removed;
    nlohmann::ordered_json dist = nlohmann::ordered_json::array();
    for (const auto& d : fr.distances)
        dist.push_back({{"id", d.id}, {"nearest_real", d.nearest_real_id}, {"distance", d.distance}});
    partition["distances"] = std::move(dist);
    write_json_file(opts.out_dir / layout::kPartition, partition);

    nlohmann::ordered_json report;
    report["stage"] = "filter";
    report["seed"] = opts.seed;
    report["threshold"] = partition["threshold"];
    report["per_category"] = policy.per_category;
    report["generated"] = fr.distances.size();
    report["threshold_kept"] = fr.kept.size();
    report["kept"] = kept.size();
    report["removed"] = removed.size();
    report["decisions"] = decisions.size();
    report["warnings"] = warnings;
    report["curated_counts"] = counts_to_json(curated.counts);
    return report;
}

// ---------------------------------------------------------------- metrics

nlohmann::ordered_json run_metrics(const PipelineOptions& opts) {
    const auto& cfg = section(opts, "metrics");
    if (!cfg.contains("predictions")) throw PrerequisiteError("metrics needs config key metrics.predictions");
    const fs::path pred_path = config_path(opts, cfg.at("predictions").get<std::string>());
    if (!fs::exists(pred_path)) throw PrerequisiteError("missing predictions file '" + pred_path.string() + "'");
    const Predictions preds = read_predictions_csv(pred_path);

    const MetricsMode mode = metrics_mode_from_string(get_or<std::string>(cfg, "mode", "binary"));
    const std::string negative = get_or<std::string>(cfg, "negative", "free");
    std::vector<std::string> labels;
    if (cfg.contains("labels")) {
        labels = cfg.at("labels").get<std::vector<std::string>>();
    } else {
        for (const auto* column : {&preds.truth, &preds.pred})
            for (const auto& l : *column)
                if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
        // Positive classes first, the negative class last.
        std::stable_partition(labels.begin(), labels.end(), [&](const std::string& l) { return l != negative; });
    }
    MetricsReport r;
    if (mode == MetricsMode::Binary) {
        if (labels.size() != 2) throw InvalidArgument("binary metrics need exactly 2 labels; use mode 'pooled' or 'macro'");
        const std::string positive = get_or<std::string>(cfg, "positive", labels[0] == negative ? labels[1] : labels[0]);
        const auto pos_it = std::find(labels.begin(), labels.end(), positive);
        if (pos_it == labels.end()) throw InvalidArgument("positive label '" + positive + "' is not a class");
        r = binary_metrics(tally(preds.truth, preds.pred, labels), static_cast<std::size_t>(pos_it - labels.begin()));
    } else {
        r = multiclass_metrics(tally(preds.truth, preds.pred, labels), mode, negative);
    }
    const FormattedReport fmt = format_report(r);
    fs::create_directories(opts.out_dir / "metrics");
    std::ofstream txt(opts.out_dir / layout::kMetricsText, std::ios::binary | std::ios::trunc);
    txt << fmt.text;

    nlohmann::ordered_json report;
    report["stage"] = "metrics";
    report["seed"] = opts.seed;
    report["predictions"] = preds.ids.size();
    for (const auto& [k, v] : fmt.record.items()) report[k] = v;
    return report;
}

}  // namespace

PipelineOptions load_options(const std::optional<fs::path>& config_path_opt) {
    PipelineOptions opts;
    if (!config_path_opt) return opts;
    std::ifstream in(*config_path_opt);
    if (!in) throw IoError("cannot open config '" + config_path_opt->string() + "'");
    try {
        opts.config = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("config '" + config_path_opt->string() + "' is not valid JSON: " + e.what());
    }
    if (!opts.config.is_object()) throw SchemaError("config must be a JSON object");
    opts.config_dir = fs::absolute(*config_path_opt).parent_path();
    return opts;
}

void apply_overrides(PipelineOptions& opts, std::optional<std::uint64_t> seed_flag,
                     std::optional<fs::path> out_flag, std::optional<fs::path> manifest_flag) {
    opts.seed = get_or<std::uint64_t>(opts.config, "seed", 0);
    if (const char* env = std::getenv("HYBRIDAUG_SEED")) {
        try {
            opts.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw InvalidArgument(std::string("HYBRIDAUG_SEED is not an unsigned integer: '") + env + "'");
        }
    }
    if (seed_flag) opts.seed = *seed_flag;

    if (opts.config.contains("out")) opts.out_dir = config_path(opts, opts.config.at("out").get<std::string>());
    if (const char* env = std::getenv("HYBRIDAUG_OUT")) opts.out_dir = env;
    if (out_flag) opts.out_dir = *out_flag;
    if (opts.out_dir.empty()) opts.out_dir = "hybridaug-out";
    opts.out_dir = fs::absolute(opts.out_dir).lexically_normal();

    if (opts.config.contains("manifest")) opts.input_manifest = config_path(opts, opts.config.at("manifest").get<std::string>());
    if (manifest_flag) opts.input_manifest = fs::absolute(*manifest_flag);
}

std::string to_string(StageName s) {
    switch (s) {
        case StageName::Compose: return "compose";
        case StageName::Embed: return "embed";
        case StageName::Filter: return "filter";
        case StageName::Metrics: return "metrics";
    }
    return "?";
}

StageName stage_from_string(const std::string& s) {
    if (s == "compose") return StageName::Compose;
    if (s == "embed") return StageName::Embed;
    if (s == "filter") return StageName::Filter;
    if (s == "metrics") return StageName::Metrics;
    throw InvalidArgument("unknown stage '" + s + "'");
}

nlohmann::ordered_json run_stage(StageName stage, const PipelineOptions& opts) {
    const Timer timer;
    fs::create_directories(opts.out_dir);
    nlohmann::ordered_json report;
    switch (stage) {
        case StageName::Compose: report = run_compose(opts); break;
        case StageName::Embed: report = run_embed(opts); break;
        case StageName::Filter: report = run_filter(opts); break;
        case StageName::Metrics: report = run_metrics(opts); break;
    }
    const std::string name = to_string(stage);
    write_json_file(opts.out_dir / name / "report.json", report);
    write_timings(opts, name, timer);
    return report;
}

VerificationReport verify_external_stage(const StageContract& contract) {
    VerificationReport report;
    auto stems = [](const fs::path& dir) {
        std::map<std::string, fs::path> out;
        if (!fs::is_directory(dir)) return out;
        for (const auto& de : fs::directory_iterator(dir))
            if (de.is_regular_file() && de.path().extension() == ".png") out[de.path().stem().string()] = de.path();
        return out;
    };
    const auto inputs = stems(contract.input_dir);
    const auto outputs = stems(contract.output_dir);
    report.inputs = inputs.size();
    report.outputs = outputs.size();

    for (const auto& [id, in_path] : inputs) {
        const auto out = outputs.find(id);
        if (out == outputs.end()) {
            report.failures.push_back({id, "missing", (contract.output_dir / (id + ".png")).string(), "absent"});
            continue;
        }
        Raster src;
        Raster dst;
        try {
            src = read_png(in_path);
        } catch (const Error& e) {
            report.failures.push_back({id, "undecodable", "decodable input", e.what()});
            continue;
        }
        try {
            dst = read_png(out->second);
        } catch (const Error& e) {
            report.failures.push_back({id, "undecodable", "decodable PNG", e.what()});
            continue;
        }
        if (src.width() != dst.width() || src.height() != dst.height()) {
            report.failures.push_back({id, "dimension_mismatch", dims(src), dims(dst)});
            continue;
        }
        const auto cat = contract.category_of.find(id);
        ++report.counts[cat == contract.category_of.end() ? std::string() : cat->second];
    }
    for (const auto& [id, _] : outputs)
        if (!inputs.count(id)) report.failures.push_back({id, "unexpected", "no output without input", "extra output"});
    for (const auto& [category, n] : contract.expected) {
        const auto it = report.counts.find(category);
        const std::size_t got = it == report.counts.end() ? 0 : it->second;
        if (got != n) report.failures.push_back({category, "count_mismatch", std::to_string(n), std::to_string(got)});
    }
    report.passed = report.failures.empty();
    return report;
}

nlohmann::ordered_json to_json(const VerificationReport& report) {
    nlohmann::ordered_json j;
    j["passed"] = report.passed;
    j["inputs"] = report.inputs;
    j["outputs"] = report.outputs;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.counts) counts[k] = v;
    j["counts"] = std::move(counts);
    j["failures"] = nlohmann::ordered_json::array();
    for (const auto& f : report.failures)
        j["failures"].push_back({{"id", f.id}, {"kind", f.kind}, {"expected", f.expected}, {"actual", f.actual}});
    return j;
}

nlohmann::ordered_json run_verify_stage(const PipelineOptions& opts, bool register_outputs) {
    const Timer timer;
    const auto& cfg = section(opts, "style");
    DatasetManifest m = load_working_manifest(opts, {layout::kComposites});
    StageContract contract;
    contract.input_dir = out_path(opts, get_or<std::string>(cfg, "input_dir", layout::kComposites));
    contract.output_dir = out_path(opts, get_or<std::string>(cfg, "output_dir", layout::kStyled));
    for (const auto& e : m.entries) {
        if (e.origin != EntryOrigin::Generated) continue;
        contract.category_of[e.id] = e.category;
        ++contract.expected[e.category];
    }
    const VerificationReport vr = verify_external_stage(contract);
    nlohmann::ordered_json report;
    report["stage"] = "verify-stage";
    report["input_dir"] = relative_path(contract.input_dir, opts.out_dir);
    report["output_dir"] = relative_path(contract.output_dir, opts.out_dir);
    const nlohmann::ordered_json details = to_json(vr);
    for (const auto& [k, v] : details.items()) report[k] = v;
    report["registered"] = false;

    if (vr.passed && register_outputs) {
        for (auto& e : m.entries) {
            if (e.origin != EntryOrigin::Generated) continue;
            e.path = relative_path(contract.output_dir / (e.id + ".png"), opts.out_dir);
            e.stage = Stage::Styled;
        }
        save_manifest(m, opts.out_dir / layout::kManifest);
        report["registered"] = true;
    }
    write_json_file(opts.out_dir / "style/report.json", report);
    write_timings(opts, "style", timer);
    return report;
}

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace hybridaug
