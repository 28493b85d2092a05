#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "painscope/data.hpp"
#include "painscope/labels.hpp"
#include "painscope/metrics.hpp"
#include "painscope/model.hpp"
#include "painscope/optim.hpp"

namespace painscope {

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 100;
    int batch_size = 16;
    OptimizerKind optimizer = OptimizerKind::RmsProp;
    SchedulerKind scheduler = SchedulerKind::None;
    SchedulerParams scheduler_params;
    SmoothingConfig smoothing;
    AugmentationConfig augmentation;
    std::uint64_t seed = 0;

    /// lr 1e-4, 100 epochs, batch 16, RMSProp, no scheduler, hard labels.
    static TrainConfig original();
    /// original() with 120 epochs, LSR eps 0.3 and cosine annealing.
    static TrainConfig tuned();

    /// Throws ConfigError on non-positive lr/epochs/batch.
    void validate() const;
};

struct EpochRecord {
    int epoch = 0; ///< 1-based
    double train_loss = 0.0;
    double test_loss = 0.0;
    double lr = 0.0;
};

struct FoldResult {
    int fold = 0;
    Checkpoint best;
    std::vector<EpochRecord> history;
    /// Best checkpoint's predictions on the fold's test subjects.
    std::vector<PredictionRecord> test_predictions;
    std::size_t training_images = 0; ///< after exclusion and augmentation
    /// Set when training diverged; `best` is then meaningless.
    std::optional<std::string> failure;
};

struct TrainResult {
    std::vector<FoldResult> folds;
    bool ok() const;
    std::vector<PredictionRecord> pooled_predictions() const;
    std::vector<double> fold_metric(double ClassificationMetrics::*metric) const;
};

/// Training target for one sample under a smoothing mode. Returns nullopt
/// when the sample has no NFCS score in nfcs_soft mode.
std::optional<LabelDistribution> training_target(const Sample& sample,
                                                 const SmoothingConfig& smoothing);

/// Index of the lowest test loss (earliest on ties). Throws on empty history.
std::size_t best_epoch_index(const std::vector<EpochRecord>& history);

/// Called after each epoch: (fold, record).
using EpochCallback = std::function<void(int, const EpochRecord&)>;

/// Trains one fold from a freshly seeded model and keeps the lowest
/// test-loss snapshot. Throws ConfigError when the training split is empty,
/// TrainingError on a non-finite loss.
FoldResult train_fold(const ModelConfig& model_config, const std::vector<Sample>& samples,
                      const FoldPlan& plan, int fold, const TrainConfig& config,
                      const EpochCallback& on_epoch = {});

/// All folds of a plan, up to `parallel_folds` at a time. A diverged fold is
/// reported through FoldResult::failure; configuration errors propagate.
TrainResult train(const ModelConfig& model_config, const std::vector<Sample>& samples,
                  const FoldPlan& plan, const TrainConfig& config, int parallel_folds = 1,
                  const EpochCallback& on_epoch = {});

/// Eval-mode test predictions of a model over the given sample indices.
std::vector<PredictionRecord> predict_records(const Model& model, const std::vector<Sample>& samples,
                                              const std::vector<std::size_t>& indices, int fold);

/// Mean cross entropy against one-hot hard labels.
double hard_label_loss(const Model& model, const std::vector<Sample>& samples,
                       const std::vector<std::size_t>& indices);

// -------------------------------------------------------------------- sweep

/// The hyperparameters of the one-at-a-time search.
inline constexpr const char* kSweepHyperparameters[] = {"image_size", "optimizer", "epochs",
                                                        "label_smoothing", "scheduler"};

/// Current value of a sweepable hyperparameter, in candidate spelling.
std::string hyperparameter_value(const std::string& name, const ModelConfig& model,
                                 const TrainConfig& train);
/// Applies one candidate value. Throws ConfigError on unknown names/values.
void apply_hyperparameter(const std::string& name, const std::string& value, ModelConfig& model,
                          TrainConfig& train);

struct SweepRow {
    std::string candidate;
    double mean_f1 = 0.0;
    double delta_f1 = 0.0;
    std::vector<double> fold_f1;
    bool selected = false;
};

struct SweepResult {
    std::string hyperparameter;
    std::string baseline_value;
    double baseline_f1 = 0.0;
    std::vector<double> baseline_fold_f1;
    std::vector<SweepRow> rows;
    std::string selected;
};

/// Called once per finished training run with the candidate value and the
/// exact configuration it trained under.
using SweepRunCallback = std::function<void(const std::string&, const ModelConfig&,
                                            const TrainConfig&, const TrainResult&)>;

/// Trains the baseline and every candidate on the same folds, holding all
/// other hyperparameters fixed. The selected value is the one with the
/// highest mean test F1; ties (and no improvement) keep the baseline.
/// The baseline run is reported to `on_run` under its own value.
SweepResult sweep(const ModelConfig& model_config, const TrainConfig& base_config,
                  const std::string& hyperparameter, const std::vector<std::string>& candidates,
                  const std::vector<Sample>& samples, const FoldPlan& plan, int parallel_folds = 1,
                  const SweepRunCallback& on_run = {});

} // namespace painscope
