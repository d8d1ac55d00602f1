#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hybridaug {

/// Rows are the true class, columns the predicted class.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> labels);
    ConfusionMatrix(std::vector<std::string> labels, std::vector<std::uint64_t> counts);

    /// 2x2 matrix in (positive, negative) label order.
    static ConfusionMatrix binary(std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn,
                                  std::string positive = "defect", std::string negative = "free");

    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * size() + pred]; }
    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * size() + pred]; }
    std::uint64_t total() const noexcept;
    std::uint64_t row_total(std::size_t truth) const;
    std::uint64_t column_total(std::size_t pred) const;
    std::optional<std::size_t> index_of(std::string_view label) const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::vector<std::string> labels_;
    std::vector<std::uint64_t> counts_;
};

ConfusionMatrix tally(std::span<const std::string> truth, std::span<const std::string> pred,
                      std::span<const std::string> labels);

struct ClassMetrics {
    std::string label;
    std::optional<double> recall;
    std::optional<double> precision;
};

enum class MetricsMode { Binary, PooledBinary, PerClassMacro };

std::string to_string(MetricsMode mode);
MetricsMode metrics_mode_from_string(const std::string& s);

/// All values are fractions in [0, 1]; std::nullopt marks a ratio whose
/// denominator is zero.
struct MetricsReport {
    MetricsMode mode = MetricsMode::Binary;
    ConfusionMatrix matrix;
    std::string positive_label;
    std::optional<double> accuracy;
    std::optional<double> recall;
    std::optional<double> precision;
    std::optional<double> f1;
    std::vector<ClassMetrics> per_class;
    std::optional<double> mean_recall;
    std::optional<double> mean_precision;
};

/// 2 r p / (r + p); absent when either input is absent or both are zero.
std::optional<double> f1_score(std::optional<double> recall, std::optional<double> precision);

/// Defect-class metrics of a 2x2 matrix; `positive` indexes the defect label.
MetricsReport binary_metrics(const ConfusionMatrix& cm, std::size_t positive = 0);

/// PooledBinary: every label except `negative_label` becomes one positive
/// class. PerClassMacro: unweighted means of per-class recall/precision over
/// the classes present in the ground truth; F1 = 2 MR MP / (MR + MP).
MetricsReport multiclass_metrics(const ConfusionMatrix& cm, MetricsMode mode,
                                 std::string_view negative_label = "free");

/// Half-up rounding at `decimals` places, tolerant of binary representation
/// error just below the midpoint.
double round_half_up(double value, int decimals = 2);

/// Fraction rendered as a percentage with two decimals; "—" when absent.
std::string format_percent(std::optional<double> fraction);

struct FormattedReport {
    std::string text;
    nlohmann::ordered_json record;
};

FormattedReport format_report(const MetricsReport& r);

struct Predictions {
    std::vector<std::string> ids;
    std::vector<std::string> truth;
    std::vector<std::string> pred;
};

/// CSV with a header naming the columns id, truth, pred (any order).
Predictions read_predictions_csv(const std::filesystem::path& path);
Predictions parse_predictions_csv(std::string_view text);

}  // namespace hybridaug
