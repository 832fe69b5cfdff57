#include "texmill/telemetry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>

namespace texmill::telemetry {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(trim(cur));
    return cells;
}

std::optional<double> parse_cell(const std::string& cell, bool require_non_negative,
                                 std::uint64_t& quarantined) {
    if (cell.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0' || !std::isfinite(v) ||
        (require_non_negative && v < 0)) {
        ++quarantined;
        return std::nullopt;
    }
    return v;
}

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

// Linear interpolation of (steps, values) at step s; exact hits return the
// stored value, out-of-range clamps to the nearest endpoint.
double interpolate(const std::vector<std::int64_t>& steps, const std::vector<double>& values,
                   std::int64_t s) {
    auto it = std::lower_bound(steps.begin(), steps.end(), s);
    if (it == steps.end()) return values.back();
    size_t i = static_cast<size_t>(it - steps.begin());
    if (*it == s || i == 0) return values[i];
    double x0 = static_cast<double>(steps[i - 1]);
    double x1 = static_cast<double>(steps[i]);
    double t = (static_cast<double>(s) - x0) / (x1 - x0);
    return values[i - 1] + t * (values[i] - values[i - 1]);
}

}  // namespace

bool RunLog::has_eval() const {
    return std::any_of(eval_loss.begin(), eval_loss.end(),
                       [](const auto& v) { return v.has_value(); });
}

bool RunLog::has_grad() const {
    return std::any_of(grad_norm.begin(), grad_norm.end(),
                       [](const auto& v) { return v.has_value(); });
}

RunLog parse_run_log(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("run log: empty input");

    auto header = split_csv(line);
    int col_step = -1, col_train = -1, col_eval = -1, col_grad = -1, col_lr = -1;
    for (size_t i = 0; i < header.size(); ++i) {
        std::string name = header[i];
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (name == "step") col_step = static_cast<int>(i);
        else if (name == "train_loss") col_train = static_cast<int>(i);
        else if (name == "eval_loss") col_eval = static_cast<int>(i);
        else if (name == "grad_norm") col_grad = static_cast<int>(i);
        else if (name == "lr" || name == "learning_rate") col_lr = static_cast<int>(i);
    }
    if (col_step < 0 || col_train < 0) {
        throw SchemaError("run log: header must name step and train_loss columns");
    }

    struct Row {
        std::int64_t step;
        double train;
        std::optional<double> eval, grad, lr;
    };
    std::map<std::int64_t, Row> rows;  // duplicate steps keep last
    std::uint64_t quarantined = 0;

    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split_csv(line);
        auto cell = [&](int col) -> std::string {
            return (col >= 0 && static_cast<size_t>(col) < cells.size()) ? cells[col] : "";
        };
        std::string step_cell = cell(col_step);
        char* end = nullptr;
        long long step = std::strtoll(step_cell.c_str(), &end, 10);
        if (step_cell.empty() || end == step_cell.c_str() || *end != '\0') {
            ++quarantined;
            continue;
        }
        auto train = parse_cell(cell(col_train), /*require_non_negative=*/true, quarantined);
        if (!train) {
            // a row without a usable train loss carries no curve information
            continue;
        }
        Row r{step, *train,
              parse_cell(cell(col_eval), true, quarantined),
              parse_cell(cell(col_grad), true, quarantined),
              parse_cell(cell(col_lr), false, quarantined)};
        rows[step] = r;
    }

    RunLog log;
    log.quarantined = quarantined;
    for (const auto& [step, r] : rows) {
        log.steps.push_back(step);
        log.train_loss.push_back(r.train);
        log.eval_loss.push_back(r.eval);
        log.grad_norm.push_back(r.grad);
        log.learning_rate.push_back(r.lr);
    }
    return log;
}

RunLog parse_run_log_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("run log: cannot open " + path);
    return parse_run_log(in);
}

double perplexity(double loss) {
    if (!std::isfinite(loss)) throw std::invalid_argument("perplexity: loss must be finite");
    return std::exp(loss);
}

std::vector<double> smooth(const std::vector<double>& series, int window) {
    if (window < 1 || window % 2 == 0) {
        throw std::invalid_argument("smooth: window must be a positive odd integer");
    }
    const int n = static_cast<int>(series.size());
    std::vector<double> out(series.size());
    const int half = window / 2;
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - half);
        int hi = std::min(n - 1, i + half);
        double acc = 0.0;
        for (int j = lo; j <= hi; ++j) acc += series[j];
        out[i] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

DivergenceVerdict detect_divergence(const RunLog& log, double tail_fraction, double slope_eps) {
    std::vector<std::int64_t> eval_steps;
    std::vector<double> gaps;
    for (size_t i = 0; i < log.steps.size(); ++i) {
        if (log.eval_loss[i]) {
            double train_at = interpolate(log.steps, log.train_loss, log.steps[i]);
            eval_steps.push_back(log.steps[i]);
            gaps.push_back(*log.eval_loss[i] - train_at);
        }
    }
    if (eval_steps.size() < 2) throw NoEvalData("detect_divergence: need at least 2 eval points");

    const double lo_step = static_cast<double>(log.steps.front());
    const double hi_step = static_cast<double>(log.steps.back());
    const double tail_start = hi_step - tail_fraction * (hi_step - lo_step);

    std::vector<double> xs, ys;
    for (size_t i = 0; i < eval_steps.size(); ++i) {
        if (static_cast<double>(eval_steps[i]) >= tail_start) {
            xs.push_back(static_cast<double>(eval_steps[i]));
            ys.push_back(gaps[i]);
        }
    }
    if (xs.size() < 2) throw NoEvalData("detect_divergence: need at least 2 eval points in tail");

    // least-squares slope of the gap over the tail window
    double mx = mean(xs), my = mean(ys);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    DivergenceVerdict v;
    v.gap_trend_slope = den > 0 ? num / den : 0.0;
    v.max_gap = *std::max_element(gaps.begin(), gaps.end());
    v.widening = v.gap_trend_slope > slope_eps;
    return v;
}

StabilityReport grad_norm_stability(const RunLog& log, std::int64_t warmup_steps,
                                    double threshold) {
    std::vector<double> post;
    for (size_t i = 0; i < log.steps.size(); ++i) {
        if (log.steps[i] > warmup_steps && log.grad_norm[i]) {
            post.push_back(*log.grad_norm[i]);
        }
    }
    if (post.empty()) throw NoGradData("grad_norm_stability: no post-warmup gradient norms");

    StabilityReport r;
    r.warmup_end_step = warmup_steps;
    std::uint64_t below = 0;
    for (double g : post) {
        if (g < threshold) ++below;
    }
    r.fraction_below_threshold = static_cast<double>(below) / static_cast<double>(post.size());
    r.max_post_warmup_norm = *std::max_element(post.begin(), post.end());
    r.stable = r.fraction_below_threshold >= 0.95 && r.max_post_warmup_norm <= 5.0 * threshold;
    return r;
}

CurveQuality curve_quality(const std::vector<double>& train_loss, double tail_fraction,
                           int smooth_window) {
    const size_t n = train_loss.size();
    if (n < 10) throw SeriesTooShort("curve_quality: need at least 10 points");

    size_t tail_len = static_cast<size_t>(std::llround(tail_fraction * static_cast<double>(n)));
    tail_len = std::clamp<size_t>(tail_len, 2, n);
    std::vector<double> tail(train_loss.end() - static_cast<std::ptrdiff_t>(tail_len),
                             train_loss.end());

    CurveQuality q;
    std::vector<double> diffs;
    diffs.reserve(tail.size() - 1);
    for (size_t i = 1; i < tail.size(); ++i) diffs.push_back(tail[i] - tail[i - 1]);
    const double tail_mean = mean(tail);
    q.oscillation_score = stddev(diffs) / std::max(std::abs(tail_mean), 1e-12);

    // relative drop over the tail, averaged over quarter-windows to resist noise
    size_t quarter = std::max<size_t>(1, tail.size() / 4);
    std::vector<double> head_q(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(quarter));
    std::vector<double> last_q(tail.end() - static_cast<std::ptrdiff_t>(quarter), tail.end());
    const double head_mean = mean(head_q);
    q.plateau_score = (head_mean - mean(last_q)) / std::max(std::abs(head_mean), 1e-12);

    auto smoothed = smooth(train_loss, smooth_window);
    std::uint64_t non_increasing = 0;
    for (size_t i = 1; i < smoothed.size(); ++i) {
        if (smoothed[i] <= smoothed[i - 1] + 1e-12) ++non_increasing;
    }
    q.monotonicity = static_cast<double>(non_increasing) / static_cast<double>(n - 1);
    return q;
}

}  // namespace texmill::telemetry
