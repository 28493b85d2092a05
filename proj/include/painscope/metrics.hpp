#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "painscope/types.hpp"

namespace painscope {

struct PredictionRecord {
    double confidence_pain = 0.0;
    ClassLabel true_label = ClassLabel::NoPain;
    int fold = 0;
    std::string subject_id;
};

struct ClassificationMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    /// Set when the ratio had a zero denominator and was reported as 0.
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

/// Pain is the positive class; decisions use classify() at 0.5.
/// Throws ContractError on empty input.
ClassificationMetrics classification_metrics(std::span<const PredictionRecord> records,
                                             double threshold = 0.5);

struct TTestResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
    int degrees_of_freedom = 0;
    double mean_difference = 0.0;
    /// Zero-variance differences with a nonzero mean (t is infinite; p reported as 0).
    bool degenerate = false;
};

/// Two-tailed paired t-test on a - b. Throws ContractError unless the inputs
/// have equal length >= 2.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Two-tailed p-value for a t statistic with `dof` degrees of freedom.
double student_t_two_tailed_p(double t, double dof);

inline constexpr int kDefaultBins = 10;

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    double mean_confidence = 0.0;
    double positive_frequency = 0.0;
    std::size_t count = 0;
};

struct CalibrationReport {
    int bins_count = kDefaultBins;
    std::vector<CalibrationBin> bins; ///< all K bins, empty ones with count 0
    double ece = 0.0;
    std::size_t total = 0;

    /// Occupied bins only, i.e. the plotted reliability curve.
    std::vector<CalibrationBin> curve() const;
};

/// Bin k (0-based) holds confidences c with k/K <= c < (k+1)/K; the last bin
/// also takes c == 1.
int confidence_bin(double confidence, int bins);

/// Per-bin mean confidence, empirical Pain frequency and counts, plus the ECE
/// sum_k (n_k/N) |freq_k - conf_k|. Throws ContractError on empty input or
/// confidences outside [0,1].
CalibrationReport calibration_curve(std::span<const PredictionRecord> records,
                                    int bins = kDefaultBins);

/// ECE recomputed from a report's bins.
double ece_from_bins(const std::vector<CalibrationBin>& bins, std::size_t total);

double ece(std::span<const PredictionRecord> records, int bins = kDefaultBins);

std::vector<std::size_t> confidence_histogram(std::span<const PredictionRecord> records,
                                              int bins = kDefaultBins);

} // namespace painscope
