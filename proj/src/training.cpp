#include "painscope/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "painscope/errors.hpp"
#include "painscope/image.hpp"
#include "painscope/ops.hpp"
#include "painscope/rng.hpp"

namespace painscope {

TrainConfig TrainConfig::original() {
    return TrainConfig{};
}

TrainConfig TrainConfig::tuned() {
    TrainConfig c;
    c.epochs = 120;
    c.smoothing = SmoothingConfig{LabelMode::Lsr, 0.3};
    c.scheduler = SchedulerKind::CosineAnnealing;
    return c;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning rate must be positive");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be at least 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch size must be at least 1");
    }
    if (augmentation.count < 0) {
        throw ConfigError("augmentation count must be non-negative");
    }
}

bool TrainResult::ok() const {
    return std::none_of(folds.begin(), folds.end(), [](const FoldResult& f) { return f.failure; });
}

std::vector<PredictionRecord> TrainResult::pooled_predictions() const {
    std::vector<PredictionRecord> all;
    for (const auto& f : folds) {
        all.insert(all.end(), f.test_predictions.begin(), f.test_predictions.end());
    }
    return all;
}

std::vector<double> TrainResult::fold_metric(double ClassificationMetrics::*metric) const {
    std::vector<double> values;
    for (const auto& f : folds) {
        values.push_back(classification_metrics(f.test_predictions).*metric);
    }
    return values;
}

std::optional<LabelDistribution> training_target(const Sample& sample,
                                                 const SmoothingConfig& smoothing) {
    switch (smoothing.mode) {
    case LabelMode::Hard:
        return LabelDistribution::one_hot(sample.hard_label);
    case LabelMode::Lsr:
        return lsr_smooth(sample.hard_label, smoothing.epsilon);
    case LabelMode::NfcsSoft:
        if (!sample.nfcs) {
            return std::nullopt;
        }
        return nfcs_soft_label(NfcsScore{static_cast<double>(*sample.nfcs)});
    }
    return std::nullopt;
}

std::size_t best_epoch_index(const std::vector<EpochRecord>& history) {
    if (history.empty()) {
        throw ContractError("empty training history");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i].test_loss < history[best].test_loss) {
            best = i;
        }
    }
    return best;
}

std::vector<PredictionRecord> predict_records(const Model& model, const std::vector<Sample>& samples,
                                              const std::vector<std::size_t>& indices, int fold) {
    std::vector<PredictionRecord> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        const auto dist = predict(model, samples[i].image);
        out.push_back({dist.p_pain, samples[i].hard_label, fold, samples[i].subject_id});
    }
    return out;
}

double hard_label_loss(const Model& model, const std::vector<Sample>& samples,
                       const std::vector<std::size_t>& indices) {
    if (indices.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (auto i : indices) {
        total += cross_entropy_soft(predict(model, samples[i].image),
                                    LabelDistribution::one_hot(samples[i].hard_label));
    }
    return total / static_cast<double>(indices.size());
}

FoldResult train_fold(const ModelConfig& model_config, const std::vector<Sample>& samples,
                      const FoldPlan& plan, int fold, const TrainConfig& config,
                      const EpochCallback& on_epoch) {
    config.validate();
    const auto fold_u = static_cast<std::uint64_t>(fold);
    const FoldIndices split = fold_indices(samples, plan, fold);

    // Training pool: originals that have a target under this label mode, each
    // followed by its augmentations.
    std::vector<Sample> pool;
    std::vector<LabelDistribution> targets;
    for (auto i : split.train) {
        const auto target = training_target(samples[i], config.smoothing);
        if (!target) {
            continue;
        }
        pool.push_back(samples[i]);
        targets.push_back(*target);
        for (auto& aug : augment(samples[i], config.augmentation,
                                 derive_seed(config.seed, "augment", fold_u, i))) {
            pool.push_back(std::move(aug));
            targets.push_back(*target);
        }
    }
    if (pool.empty()) {
        throw ConfigError("fold " + std::to_string(fold) + " has no training samples under label mode '" +
                          config.smoothing.to_string() + "'");
    }

    FoldResult result;
    result.fold = fold;
    result.training_images = pool.size();
    Model model = Model::build(model_config, derive_seed(config.seed, "init", fold_u));
    std::vector<OptimizerState> states(model.parameters().size());
    for (auto& p : model.parameters()) {
        p.tensor.zero_grad();
    }

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(config.batch_size);
    std::optional<Checkpoint> best;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto epoch_u = static_cast<std::uint64_t>(epoch);
        const double lr = scheduler_lr(config.scheduler, config.learning_rate, epoch, config.epochs,
                                       config.scheduler_params);
        Rng shuffle_rng(derive_seed(config.seed, "shuffle", fold_u, epoch_u));
        shuffle_rng.shuffle(order.begin(), order.end());
        Rng dropout_rng(derive_seed(config.seed, "dropout", fold_u, epoch_u));

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const double scale = 1.0 / static_cast<double>(end - start);
            for (auto& p : model.parameters()) {
                std::fill(p.tensor.grad.begin(), p.tensor.grad.end(), 0.0);
            }
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t idx = order[k];
                Tape tape;
                const Var x = tape.constant(pool[idx].image);
                const auto fwd = model.forward(tape, x, Mode::Train, &dropout_rng);
                const Var loss = cross_entropy_soft(tape, fwd.probabilities, targets[idx]);
                const double value = tape.value(loss)[0];
                if (!std::isfinite(value)) {
                    std::ostringstream msg;
                    msg << "non-finite training loss in fold " << fold << ", epoch " << epoch + 1
                        << ", sample " << pool[idx].subject_id;
                    throw TrainingError(msg.str());
                }
                loss_sum += value;
                backward(tape, loss, scale);
                for (std::size_t p = 0; p < fwd.parameters.size(); ++p) {
                    const auto g = tape.grad(fwd.parameters[p]);
                    auto& acc = model.parameters()[p].tensor.grad;
                    for (std::size_t j = 0; j < g.size(); ++j) {
                        acc[j] += g[j];
                    }
                }
            }
            for (std::size_t p = 0; p < model.parameters().size(); ++p) {
                Tensor& t = model.parameters()[p].tensor;
                optimizer_step(t.values(), t.grad, states[p], config.optimizer, lr);
            }
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(pool.size());
        rec.test_loss = hard_label_loss(model, samples, split.test);
        if (!std::isfinite(rec.test_loss)) {
            throw TrainingError("non-finite test loss in fold " + std::to_string(fold) +
                                ", epoch " + std::to_string(epoch + 1));
        }
        result.history.push_back(rec);
        if (!best || rec.test_loss < best->test_loss) {
            Checkpoint ck;
            ck.model = model;
            for (auto& p : ck.model.parameters()) {
                p.tensor.grad.clear();
            }
            ck.epoch = rec.epoch;
            ck.test_loss = rec.test_loss;
            best = std::move(ck);
        }
        if (on_epoch) {
            on_epoch(fold, rec);
        }
    }

    best->metadata = {
        {"seed", std::to_string(config.seed)},
        {"fold", std::to_string(fold)},
        {"label_mode", config.smoothing.to_string()},
        {"optimizer", to_string(config.optimizer)},
        {"scheduler", to_string(config.scheduler)},
        {"epochs", std::to_string(config.epochs)},
    };
    result.best = std::move(*best);
    result.test_predictions = predict_records(result.best.model, samples, split.test, fold);
    return result;
}

TrainResult train(const ModelConfig& model_config, const std::vector<Sample>& samples,
                  const FoldPlan& plan, const TrainConfig& config, int parallel_folds,
                  const EpochCallback& on_epoch) {
    config.validate();
    model_config.validate();
    TrainResult result;
    result.folds.resize(static_cast<std::size_t>(plan.fold_count));
    std::vector<std::exception_ptr> errors(result.folds.size());
    std::atomic<int> next{0};
    std::mutex callback_mutex;
    EpochCallback guarded;
    if (on_epoch) {
        guarded = [&](int fold, const EpochRecord& rec) {
            std::lock_guard lock(callback_mutex);
            on_epoch(fold, rec);
        };
    }

    auto worker = [&] {
        for (int fold = next++; fold < plan.fold_count; fold = next++) {
            const auto f = static_cast<std::size_t>(fold);
            try {
                result.folds[f] = train_fold(model_config, samples, plan, fold, config, guarded);
            } catch (const TrainingError& e) {
                result.folds[f].fold = fold;
                result.folds[f].failure = e.what();
            } catch (...) {
                errors[f] = std::current_exception();
            }
        }
    };
    const int workers = std::clamp(parallel_folds, 1, plan.fold_count);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < workers; ++i) {
            threads.emplace_back(worker);
        }
        for (auto& t : threads) {
            t.join();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return result;
}

// -------------------------------------------------------------------- sweep

std::string hyperparameter_value(const std::string& name, const ModelConfig& model,
                                 const TrainConfig& train) {
    if (name == "image_size") {
        return std::to_string(model.input_size);
    }
    if (name == "optimizer") {
        return to_string(train.optimizer);
    }
    if (name == "epochs") {
        return std::to_string(train.epochs);
    }
    if (name == "label_smoothing") {
        return train.smoothing.to_string();
    }
    if (name == "scheduler") {
        return to_string(train.scheduler);
    }
    throw ConfigError("unknown hyperparameter '" + name +
                      "' (image_size, optimizer, epochs, label_smoothing, scheduler)");
}

void apply_hyperparameter(const std::string& name, const std::string& value, ModelConfig& model,
                          TrainConfig& train) {
    auto to_int = [&](const std::string& v) {
        try {
            std::size_t used = 0;
            const int parsed = std::stoi(v, &used);
            if (used != v.size()) {
                throw std::invalid_argument(v);
            }
            return parsed;
        } catch (const std::logic_error&) {
            throw ConfigError("hyperparameter '" + name + "' expects an integer, got '" + v + "'");
        }
    };
    if (name == "image_size") {
        model.input_size = to_int(value);
        model.validate();
    } else if (name == "optimizer") {
        train.optimizer = parse_optimizer(value);
    } else if (name == "epochs") {
        train.epochs = to_int(value);
        train.validate();
    } else if (name == "label_smoothing") {
        train.smoothing = SmoothingConfig::parse(value);
    } else if (name == "scheduler") {
        train.scheduler = parse_scheduler(value);
    } else {
        hyperparameter_value(name, model, train); // throws with the list of names
    }
}

namespace {

std::vector<Sample> resized(const std::vector<Sample>& samples, int size) {
    std::vector<Sample> out = samples;
    for (auto& s : out) {
        if (static_cast<int>(s.image.dim(1)) != size) {
            s.image = resize_image(s.image, size);
            s.markers.clear();
        }
    }
    return out;
}

std::vector<double> fold_f1(const TrainResult& r) {
    if (!r.ok()) {
        for (const auto& f : r.folds) {
            if (f.failure) {
                throw TrainingError(*f.failure);
            }
        }
    }
    return r.fold_metric(&ClassificationMetrics::f1);
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

SweepResult sweep(const ModelConfig& model_config, const TrainConfig& base_config,
                  const std::string& hyperparameter, const std::vector<std::string>& candidates,
                  const std::vector<Sample>& samples, const FoldPlan& plan, int parallel_folds,
                  const SweepRunCallback& on_run) {
    if (candidates.empty()) {
        throw ConfigError("sweep needs at least one candidate");
    }
    SweepResult out;
    out.hyperparameter = hyperparameter;
    out.baseline_value = hyperparameter_value(hyperparameter, model_config, base_config);

    // Validate every candidate before spending time on training.
    std::vector<std::pair<ModelConfig, TrainConfig>> setups;
    for (const auto& c : candidates) {
        ModelConfig m = model_config;
        TrainConfig t = base_config;
        apply_hyperparameter(hyperparameter, c, m, t);
        setups.emplace_back(m, t);
    }

    auto run = [&](const std::string& label, const ModelConfig& m, const TrainConfig& t) {
        const bool resize = m.input_size != static_cast<int>(samples.front().image.dim(1));
        const TrainResult r = resize ? train(m, resized(samples, m.input_size), plan, t, parallel_folds)
                                     : train(m, samples, plan, t, parallel_folds);
        if (on_run) {
            on_run(label, m, t, r);
        }
        return fold_f1(r);
    };

    out.baseline_fold_f1 = run(out.baseline_value, model_config, base_config);
    out.baseline_f1 = mean(out.baseline_fold_f1);

    // Candidates are compared in canonical spelling, so "cosine" and
    // "cosine_annealing" (or "0" and "hard") name the same run.
    std::vector<std::string> canonical;
    double best_f1 = out.baseline_f1;
    std::string best_canonical = out.baseline_value;
    out.selected = out.baseline_value;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& [m, t] = setups[i];
        canonical.push_back(hyperparameter_value(hyperparameter, m, t));
        SweepRow row;
        row.candidate = candidates[i];
        row.fold_f1 = canonical.back() == out.baseline_value ? out.baseline_fold_f1
                                                             : run(candidates[i], m, t);
        row.mean_f1 = mean(row.fold_f1);
        row.delta_f1 = row.mean_f1 - out.baseline_f1;
        if (row.mean_f1 > best_f1) {
            best_f1 = row.mean_f1;
            best_canonical = canonical.back();
            out.selected = row.candidate;
        }
        out.rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        out.rows[i].selected = canonical[i] == best_canonical;
    }
    return out;
}

} // namespace painscope
