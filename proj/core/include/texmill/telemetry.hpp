#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace texmill::telemetry {

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class NoEvalData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class NoGradData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class SeriesTooShort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One training run: rows sorted by step, duplicate steps keep the last
/// occurrence, non-finite or negative values quarantined (counted, dropped).
struct RunLog {
    std::vector<std::int64_t> steps;
    std::vector<double> train_loss;                 // aligned with steps
    std::vector<std::optional<double>> eval_loss;   // sparse, aligned with steps
    std::vector<std::optional<double>> grad_norm;
    std::vector<std::optional<double>> learning_rate;
    std::uint64_t quarantined = 0;

    bool has_eval() const;
    bool has_grad() const;
};

struct StabilityReport {
    std::int64_t warmup_end_step = 0;
    double fraction_below_threshold = 0.0;
    double max_post_warmup_norm = 0.0;
    bool stable = false;
};

struct DivergenceVerdict {
    double max_gap = 0.0;
    double gap_trend_slope = 0.0;
    bool widening = false;
};

struct CurveQuality {
    double oscillation_score = 0.0;  // stddev of tail first-differences / mean tail loss
    double plateau_score = 0.0;      // relative loss drop over the tail
    double monotonicity = 0.0;       // fraction of non-increasing smoothed steps
};

/// Parse the column-oriented log format: a header line naming at least
/// `step` and `train_loss` (optionally eval_loss, grad_norm, lr), then
/// comma-separated rows. Empty cells mark absent sparse values.
RunLog parse_run_log(std::istream& in);
RunLog parse_run_log_file(const std::string& path);

double perplexity(double loss);

/// Centered moving average with shrinking windows at the edges.
std::vector<double> smooth(const std::vector<double>& series, int window);

DivergenceVerdict detect_divergence(const RunLog& log, double tail_fraction = 0.2,
                                    double slope_eps = 1e-5);

StabilityReport grad_norm_stability(const RunLog& log, std::int64_t warmup_steps,
                                    double threshold = 1.0);

CurveQuality curve_quality(const std::vector<double>& train_loss, double tail_fraction = 0.2,
                           int smooth_window = 5);

}  // namespace texmill::telemetry
