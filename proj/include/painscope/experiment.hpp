#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "painscope/data.hpp"
#include "painscope/metrics.hpp"
#include "painscope/model.hpp"
#include "painscope/training.hpp"

namespace painscope {

enum class Preset { Original, Tuned, Custom };

std::string to_string(Preset preset);
/// Throws ConfigError on unknown names.
Preset parse_preset(const std::string& text);

/// A manifest path, or the parameters of a synthetic draw.
struct DataSource {
    std::string manifest; ///< empty selects the synthetic generator
    SyntheticConfig synthetic;

    bool synthetic_data() const { return manifest.empty(); }
};

/// Everything needed to reproduce one cross-validated training run.
struct ExperimentConfig {
    Preset preset = Preset::Original;
    DataSource data;
    ModelConfig model;
    TrainConfig train;
    int fold_count = 10;
    int parallel_folds = 1;
    std::uint64_t seed = 0;

    /// Folds the seed into the trainer and checks every part.
    void finalize();
};

/// Run manifest; omits the output directory and `parallel_folds`, neither
/// of which affects results.
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_from_json(const nlohmann::json& json);

/// Samples of the configured source at the model's input size. Synthetic
/// images are drawn at that size from `derive_seed(seed, "data")`.
std::vector<Sample> load_samples(const ExperimentConfig& config);

nlohmann::json to_json(const FoldPlan& plan);
FoldPlan fold_plan_from_json(const nlohmann::json& json);

// ------------------------------------------------------------- run folders
//
//   run.json               manifest plus per-fold best epoch and loss
//   folds.json             subject ids per fold
//   fold_XX.ckpt           best checkpoint of fold XX
//   history_fold_XX.csv    epoch,train_loss,test_loss,lr
//   run.log                timestamped sidecar, not a result

std::string fold_file(const std::string& dir, const std::string& prefix, int fold,
                      const std::string& ext);

/// Writes all result files of a run. Throws IoError, TrainingError when a
/// fold diverged (after writing the remaining files).
void write_run(const std::string& dir, const ExperimentConfig& config, const FoldPlan& plan,
               const TrainResult& result);

struct RunFolder {
    std::string dir;
    ExperimentConfig config;
    FoldPlan plan;
    std::vector<std::vector<EpochRecord>> histories;
    std::vector<Checkpoint> checkpoints;
};

/// Loads a run written by write_run. Throws IoError when a file is missing.
RunFolder read_run(const std::string& dir);

/// Best-checkpoint predictions on each fold's test subjects.
std::vector<PredictionRecord> run_predictions(const RunFolder& run,
                                              const std::vector<Sample>& samples);

std::vector<std::vector<PredictionRecord>> by_fold(const std::vector<PredictionRecord>& records,
                                                   int fold_count);

// ----------------------------------------------------------------- reports

nlohmann::json to_json(const ClassificationMetrics& m);
nlohmann::json to_json(const TTestResult& t);
nlohmann::json to_json(const CalibrationReport& report);
nlohmann::json to_json(const SweepResult& result);

/// Pooled metrics plus per-fold values with their mean and sample std.
nlohmann::json metrics_report(const std::vector<PredictionRecord>& records, int fold_count);

/// Metric deltas (b - a) and paired t-tests on the per-fold values.
nlohmann::json comparison_report(const std::vector<PredictionRecord>& a,
                                 const std::vector<PredictionRecord>& b, int fold_count);

/// Pooled calibration report plus per-fold ECE.
nlohmann::json calibration_report(const std::vector<PredictionRecord>& records, int fold_count,
                                  int bins);

std::string predictions_csv(const std::vector<PredictionRecord>& records);
std::string curve_csv(const CalibrationReport& report);
std::string histogram_csv(const CalibrationReport& report);
/// candidate,f1,delta_f1,selected
std::string sweep_csv(const SweepResult& result);
std::string history_csv(const std::vector<EpochRecord>& history);

/// Shortest decimal that reads back to the same double.
std::string format_number(double value);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);
/// JSON with two-space indent and a trailing newline.
void write_json(const std::string& path, const nlohmann::json& json);
nlohmann::json read_json(const std::string& path);
/// Appends a UTC-timestamped line to `<dir>/run.log`.
void log_event(const std::string& dir, const std::string& message);

} // namespace painscope
