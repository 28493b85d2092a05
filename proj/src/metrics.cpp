#include "painscope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "painscope/errors.hpp"
#include "painscope/labels.hpp"

namespace painscope {

ClassificationMetrics classification_metrics(std::span<const PredictionRecord> records,
                                             double threshold) {
    if (records.empty()) {
        throw ContractError("classification_metrics needs at least one record");
    }
    ClassificationMetrics m;
    for (const auto& r : records) {
        const ClassLabel predicted =
            classify(LabelDistribution{1.0 - r.confidence_pain, r.confidence_pain}, threshold);
        const bool pred_pain = predicted == ClassLabel::Pain;
        const bool true_pain = r.true_label == ClassLabel::Pain;
        if (pred_pain && true_pain) {
            ++m.tp;
        } else if (pred_pain) {
            ++m.fp;
        } else if (true_pain) {
            ++m.fn;
        } else {
            ++m.tn;
        }
    }
    const auto ratio = [](std::size_t num, std::size_t den, bool& undefined) {
        if (den == 0) {
            undefined = true;
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(records.size());
    m.precision = ratio(m.tp, m.tp + m.fp, m.precision_undefined);
    m.recall = ratio(m.tp, m.tp + m.fn, m.recall_undefined);
    if (m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.f1_undefined = true;
    }
    return m;
}

double student_t_two_tailed_p(double t, double dof) {
    const boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw ContractError("paired_t_test needs two equal-length samples with n >= 2");
    }
    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = a[i] - b[i];
    }
    double mean = 0.0;
    for (double v : d) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : d) {
        ss += (v - mean) * (v - mean);
    }
    TTestResult r;
    r.degrees_of_freedom = static_cast<int>(n) - 1;
    r.mean_difference = mean;
    const bool all_zero = std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; });
    if (all_zero) {
        r.t_statistic = 0.0;
        r.p_value = 1.0;
        return r;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) {
        r.degenerate = true;
        r.t_statistic = mean > 0 ? std::numeric_limits<double>::infinity()
                                 : -std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        return r;
    }
    r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p_value = student_t_two_tailed_p(r.t_statistic, static_cast<double>(n - 1));
    return r;
}

int confidence_bin(double confidence, int bins) {
    int k = static_cast<int>(std::floor(confidence * bins));
    k = std::clamp(k, 0, bins - 1);
    // Boundaries are the doubles k/K; correct rounding of c*K against them.
    if (k > 0 && confidence < static_cast<double>(k) / bins) {
        --k;
    } else if (k + 1 < bins && confidence >= static_cast<double>(k + 1) / bins) {
        ++k;
    }
    return k;
}

std::vector<CalibrationBin> CalibrationReport::curve() const {
    std::vector<CalibrationBin> occupied;
    std::copy_if(bins.begin(), bins.end(), std::back_inserter(occupied),
                 [](const CalibrationBin& b) { return b.count > 0; });
    return occupied;
}

namespace {

void check_records(std::span<const PredictionRecord> records, int bins) {
    if (records.empty()) {
        throw ContractError("calibration needs at least one record");
    }
    if (bins < 1) {
        throw ContractError("bin count must be positive");
    }
    for (const auto& r : records) {
        if (!(r.confidence_pain >= 0.0 && r.confidence_pain <= 1.0)) {
            throw ContractError("confidence outside [0, 1]");
        }
    }
}

} // namespace

double ece_from_bins(const std::vector<CalibrationBin>& bins, std::size_t total) {
    double e = 0.0;
    for (const auto& b : bins) {
        if (b.count == 0) {
            continue;
        }
        e += static_cast<double>(b.count) / static_cast<double>(total) *
             std::abs(b.positive_frequency - b.mean_confidence);
    }
    return e;
}

CalibrationReport calibration_curve(std::span<const PredictionRecord> records, int bins) {
    check_records(records, bins);
    CalibrationReport report;
    report.bins_count = bins;
    report.total = records.size();
    report.bins.resize(static_cast<std::size_t>(bins));
    std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<std::size_t> positives(static_cast<std::size_t>(bins), 0);
    for (const auto& r : records) {
        const auto k = static_cast<std::size_t>(confidence_bin(r.confidence_pain, bins));
        conf_sum[k] += r.confidence_pain;
        positives[k] += r.true_label == ClassLabel::Pain ? 1 : 0;
        ++report.bins[k].count;
    }
    for (std::size_t k = 0; k < report.bins.size(); ++k) {
        auto& b = report.bins[k];
        b.lower = static_cast<double>(k) / bins;
        b.upper = static_cast<double>(k + 1) / bins;
        if (b.count > 0) {
            b.mean_confidence = conf_sum[k] / static_cast<double>(b.count);
            b.positive_frequency =
                static_cast<double>(positives[k]) / static_cast<double>(b.count);
        }
    }
    report.ece = ece_from_bins(report.bins, report.total);
    return report;
}

double ece(std::span<const PredictionRecord> records, int bins) {
    return calibration_curve(records, bins).ece;
}

std::vector<std::size_t> confidence_histogram(std::span<const PredictionRecord> records,
                                              int bins) {
    check_records(records, bins);
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (const auto& r : records) {
        ++counts[static_cast<std::size_t>(confidence_bin(r.confidence_pain, bins))];
    }
    return counts;
}

} // namespace painscope
