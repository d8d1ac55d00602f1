#include "hybridaug/scoreboard.hpp"

#include "hybridaug/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hybridaug {
namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::ordered_json optional_json(std::optional<double> v) {
    if (!v) return nullptr;
    return round_half_up(*v * 100.0, 2);
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

// Pads to a display width; the absent marker is one column wide.
std::string pad(std::string s, std::size_t width) {
    const std::size_t visible = s == "—" ? 1 : s.size();
    if (visible < width) s.append(width - visible, ' ');
    return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels, std::vector<std::uint64_t> counts)
    : labels_(std::move(labels)), counts_(std::move(counts)) {
    if (counts_.size() != labels_.size() * labels_.size())
        throw InvalidArgument("confusion matrix counts must be k x k");
}

ConfusionMatrix ConfusionMatrix::binary(std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn,
                                        std::string positive, std::string negative) {
    return ConfusionMatrix({std::move(positive), std::move(negative)}, {tp, fn, fp, tn});
}

std::uint64_t ConfusionMatrix::total() const noexcept {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_total(std::size_t truth) const {
    std::uint64_t n = 0;
    for (std::size_t j = 0; j < size(); ++j) n += at(truth, j);
    return n;
}

std::uint64_t ConfusionMatrix::column_total(std::size_t pred) const {
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += at(i, pred);
    return n;
}

std::optional<std::size_t> ConfusionMatrix::index_of(std::string_view label) const {
    for (std::size_t k = 0; k < labels_.size(); ++k)
        if (labels_[k] == label) return k;
    return std::nullopt;
}

ConfusionMatrix tally(std::span<const std::string> truth, std::span<const std::string> pred,
                      std::span<const std::string> labels) {
    if (truth.size() != pred.size())
        throw InvalidArgument("truth has " + std::to_string(truth.size()) + " labels but pred has " +
                              std::to_string(pred.size()));
    ConfusionMatrix cm(std::vector<std::string>(labels.begin(), labels.end()));
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const auto t = cm.index_of(truth[k]);
        const auto p = cm.index_of(pred[k]);
        if (!t) throw InvalidArgument("unknown truth label '" + truth[k] + "' at sample " + std::to_string(k));
        if (!p) throw InvalidArgument("unknown predicted label '" + pred[k] + "' at sample " + std::to_string(k));
        ++cm.at(*t, *p);
    }
    return cm;
}

std::string to_string(MetricsMode mode) {
    switch (mode) {
        case MetricsMode::Binary: return "binary";
        case MetricsMode::PooledBinary: return "pooled";
        case MetricsMode::PerClassMacro: return "macro";
    }
    return "?";
}

MetricsMode metrics_mode_from_string(const std::string& s) {
    if (s == "binary") return MetricsMode::Binary;
    if (s == "pooled") return MetricsMode::PooledBinary;
    if (s == "macro") return MetricsMode::PerClassMacro;
    throw InvalidArgument("unknown metrics mode '" + s + "' (expected binary, pooled or macro)");
}

std::optional<double> f1_score(std::optional<double> recall, std::optional<double> precision) {
    if (!recall || !precision) return std::nullopt;
    const double sum = *recall + *precision;
    if (sum == 0.0) return std::nullopt;
    return 2.0 * *recall * *precision / sum;
}

MetricsReport binary_metrics(const ConfusionMatrix& cm, std::size_t positive) {
    if (cm.size() != 2) throw InvalidArgument("binary metrics need a 2x2 confusion matrix");
    if (positive > 1) throw InvalidArgument("positive class index must be 0 or 1");
    const std::size_t negative = 1 - positive;
    const std::uint64_t tp = cm.at(positive, positive);
    const std::uint64_t fn = cm.at(positive, negative);
    const std::uint64_t fp = cm.at(negative, positive);
    const std::uint64_t tn = cm.at(negative, negative);

    MetricsReport r;
    r.mode = MetricsMode::Binary;
    r.matrix = cm;
    r.positive_label = cm.labels()[positive];
    r.accuracy = ratio(tp + tn, tp + fn + fp + tn);
    r.recall = ratio(tp, tp + fn);
    r.precision = ratio(tp, tp + fp);
    r.f1 = f1_score(r.recall, r.precision);
    r.per_class.push_back({cm.labels()[positive], r.recall, r.precision});
    r.per_class.push_back({cm.labels()[negative], ratio(tn, tn + fp), ratio(tn, tn + fn)});
    return r;
}

MetricsReport multiclass_metrics(const ConfusionMatrix& cm, MetricsMode mode, std::string_view negative_label) {
    if (cm.size() < 2) throw InvalidArgument("multi-class metrics need at least 2 classes");
    if (mode == MetricsMode::Binary) return binary_metrics(cm);

    if (mode == MetricsMode::PooledBinary) {
        const auto neg = cm.index_of(negative_label);
        if (!neg) throw InvalidArgument("negative label '" + std::string(negative_label) + "' is not a class");
        std::uint64_t tp = 0, fn = 0, fp = 0, tn = cm.at(*neg, *neg);
        for (std::size_t i = 0; i < cm.size(); ++i) {
            if (i == *neg) continue;
            fn += cm.at(i, *neg);
            fp += cm.at(*neg, i);
            for (std::size_t j = 0; j < cm.size(); ++j)
                if (j != *neg) tp += cm.at(i, j);
        }
        MetricsReport r = binary_metrics(ConfusionMatrix::binary(tp, fn, fp, tn, "defect", std::string(negative_label)));
        r.mode = MetricsMode::PooledBinary;
        r.matrix = cm;
        return r;
    }

    MetricsReport r;
    r.mode = MetricsMode::PerClassMacro;
    r.matrix = cm;
    std::uint64_t diagonal = 0;
    double recall_sum = 0.0;
    double precision_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t k = 0; k < cm.size(); ++k) {
        diagonal += cm.at(k, k);
        ClassMetrics c{cm.labels()[k], ratio(cm.at(k, k), cm.row_total(k)), ratio(cm.at(k, k), cm.column_total(k))};
        if (c.recall) {
            ++present;
            recall_sum += *c.recall;
            precision_sum += c.precision.value_or(0.0);
        }
        r.per_class.push_back(std::move(c));
    }
    r.accuracy = ratio(diagonal, cm.total());
    if (present > 0) {
        r.mean_recall = recall_sum / static_cast<double>(present);
        r.mean_precision = precision_sum / static_cast<double>(present);
    }
    r.recall = r.mean_recall;
    r.precision = r.mean_precision;
    r.f1 = f1_score(r.mean_recall, r.mean_precision);
    return r;
}

double round_half_up(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    const double scaled = value * scale;
    return std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, std::abs(scaled))) / scale;
}

std::string format_percent(std::optional<double> fraction) {
    if (!fraction) return "—";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", round_half_up(*fraction * 100.0, 2));
    return buf;
}

FormattedReport format_report(const MetricsReport& r) {
    FormattedReport out;
    std::ostringstream text;
    text << "mode: " << to_string(r.mode);
    if (!r.positive_label.empty()) text << " (positive: " << r.positive_label << ")";
    text << "\nsamples: " << r.matrix.total() << "\n\n";
    text << "metric       value\n";
    text << "accuracy     " << format_percent(r.accuracy) << "\n";
    if (r.mode == MetricsMode::PerClassMacro) {
        text << "MR           " << format_percent(r.mean_recall) << "\n";
        text << "MP           " << format_percent(r.mean_precision) << "\n";
    } else {
        text << "recall       " << format_percent(r.recall) << "\n";
        text << "precision    " << format_percent(r.precision) << "\n";
    }
    text << "f1           " << format_percent(r.f1) << "\n\n";
    text << "class        recall     precision\n";
    for (const auto& c : r.per_class) {
        text << pad(c.label, 12) << " " << pad(format_percent(c.recall), 10) << " " << format_percent(c.precision)
             << "\n";
    }
    text << "\nconfusion (rows = truth, cols = pred): ";
    for (std::size_t j = 0; j < r.matrix.size(); ++j) text << (j ? ", " : "") << r.matrix.labels()[j];
    text << "\n";
    for (std::size_t i = 0; i < r.matrix.size(); ++i) {
        text << "  " << r.matrix.labels()[i] << ":";
        for (std::size_t j = 0; j < r.matrix.size(); ++j) text << " " << r.matrix.at(i, j);
        text << "\n";
    }
    out.text = text.str();

    auto& j = out.record;
    j["mode"] = to_string(r.mode);
    if (!r.positive_label.empty()) j["positive_label"] = r.positive_label;
    j["samples"] = r.matrix.total();
    j["accuracy"] = optional_json(r.accuracy);
    j["recall"] = optional_json(r.recall);
    j["precision"] = optional_json(r.precision);
    j["f1"] = optional_json(r.f1);
    if (r.mode == MetricsMode::PerClassMacro) {
        j["mean_recall"] = optional_json(r.mean_recall);
        j["mean_precision"] = optional_json(r.mean_precision);
    }
    j["per_class"] = nlohmann::ordered_json::array();
    for (const auto& c : r.per_class)
        j["per_class"].push_back({{"label", c.label}, {"recall", optional_json(c.recall)}, {"precision", optional_json(c.precision)}});
    j["labels"] = r.matrix.labels();
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.matrix.size(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < r.matrix.size(); ++k) row.push_back(r.matrix.at(i, k));
        rows.push_back(std::move(row));
    }
    j["confusion"] = std::move(rows);
    return out;
}

Predictions parse_predictions_csv(std::string_view text) {
    Predictions out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    std::optional<std::array<std::size_t, 3>> columns;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (trim(line).empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (!columns) {
            std::array<std::size_t, 3> idx{};
            const char* names[3] = {"id", "truth", "pred"};
            for (int c = 0; c < 3; ++c) {
                const auto it = std::find(fields.begin(), fields.end(), names[c]);
                if (it == fields.end())
                    throw SchemaError(std::string("predictions CSV header lacks column '") + names[c] + "'");
                idx[c] = static_cast<std::size_t>(it - fields.begin());
            }
            columns = idx;
            continue;
        }
        const auto& idx = *columns;
        if (fields.size() <= std::max({idx[0], idx[1], idx[2]}))
            throw SchemaError("predictions CSV line " + std::to_string(line_no) + " has too few fields");
        out.ids.push_back(fields[idx[0]]);
        out.truth.push_back(fields[idx[1]]);
        out.pred.push_back(fields[idx[2]]);
        if (end == text.size()) break;
    }
    if (!columns) throw SchemaError("predictions CSV is empty");
    return out;
}

Predictions read_predictions_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open predictions '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_predictions_csv(buffer.str());
}

}  // namespace hybridaug
