// painscope: train, evaluate and explain the three-branch pain classifier.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "painscope/attribution.hpp"
#include "painscope/errors.hpp"
#include "painscope/experiment.hpp"
#include "painscope/image.hpp"
#include "painscope/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace painscope;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr const char* kOutEnv = "PAINSCOPE_OUT";

std::string out_dir(const std::string& given, const std::string& fallback) {
    return given.empty() ? fallback : given;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

// ------------------------------------------------------ experiment options

struct ExperimentFlags {
    std::string preset = "original";
    std::string data = "synthetic";
    int subjects = 30;
    int per_subject = 12;
    int unscored = 0;
    std::string arch = "auto";
    int image_size = 0;
    int large_filters = 0;
    int small_filters = 0;
    int merge_filters = 0;
    int dense_width = 0;
    int augment_count = -1;
    int folds = 10;
    int parallel_folds = 1;
    std::uint64_t seed = 0;

    // Training overrides, only with --preset custom.
    double lr = 0.0;
    int epochs = 0;
    int batch_size = 0;
    std::string optimizer;
    std::string scheduler;
    std::string label_smoothing;
    double dropout = -1.0;
    std::vector<CLI::Option*> overrides;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
    cmd->add_option("--preset", f.preset, "original, tuned or custom")
        ->check(CLI::IsMember({"original", "tuned", "custom"}))
        ->capture_default_str();
    cmd->add_option("--data", f.data, "'synthetic' or a JSONL manifest path")->capture_default_str();
    cmd->add_option("--subjects", f.subjects, "synthetic subjects")->capture_default_str();
    cmd->add_option("--per-subject", f.per_subject, "synthetic images per subject")
        ->capture_default_str();
    cmd->add_option("--unscored", f.unscored, "synthetic subjects without an NFCS score")
        ->capture_default_str();
    cmd->add_option("--arch", f.arch,
                    "reference, compact, or auto (compact for synthetic data, reference otherwise)")
        ->check(CLI::IsMember({"auto", "reference", "compact"}))
        ->capture_default_str();
    cmd->add_option("--image-size", f.image_size, "input side in pixels (default: per arch)");
    cmd->add_option("--large-filters", f.large_filters, "filters of the 5x5 branch");
    cmd->add_option("--small-filters", f.small_filters, "filters of the 3x3 branch");
    cmd->add_option("--merge-filters", f.merge_filters, "filters of the last conv layer");
    cmd->add_option("--dense-width", f.dense_width, "hidden dense units");
    cmd->add_option("--augment-count", f.augment_count, "augmented copies per training image (default 20)");
    cmd->add_option("--folds", f.folds, "cross-validation folds")->capture_default_str();
    cmd->add_option("--parallel-folds", f.parallel_folds, "folds trained concurrently")
        ->capture_default_str();
    cmd->add_option("--seed", f.seed, "master seed")->capture_default_str();

    f.overrides = {
        cmd->add_option("--lr", f.lr, "learning rate (custom preset)"),
        cmd->add_option("--epochs", f.epochs, "epochs (custom preset)"),
        cmd->add_option("--batch-size", f.batch_size, "batch size (custom preset)"),
        cmd->add_option("--optimizer", f.optimizer, "sgd, rmsprop, adam, adagrad (custom preset)"),
        cmd->add_option("--scheduler", f.scheduler, "none, step, exponential, cosine (custom preset)"),
        cmd->add_option("--label-smoothing", f.label_smoothing,
                        "hard, nfcs or an LSR epsilon (custom preset)"),
        cmd->add_option("--dropout", f.dropout, "dropout rate (custom preset)"),
    };
}

ExperimentConfig experiment_config(const ExperimentFlags& f) {
    ExperimentConfig c;
    c.preset = parse_preset(f.preset);
    c.seed = f.seed;
    c.fold_count = f.folds;
    c.parallel_folds = f.parallel_folds;
    if (f.data != "synthetic") {
        c.data.manifest = f.data;
    }
    c.data.synthetic.subjects = f.subjects;
    c.data.synthetic.images_per_subject = f.per_subject;
    c.data.synthetic.unscored_subjects = f.unscored;

    const bool compact = f.arch == "compact" || (f.arch == "auto" && c.data.synthetic_data());
    const int size = f.image_size > 0 ? f.image_size : (compact ? 16 : 120);
    c.model = compact ? ModelConfig::compact(size) : ModelConfig{};
    c.model.input_size = size;
    if (f.large_filters > 0) c.model.large_filters = f.large_filters;
    if (f.small_filters > 0) c.model.small_filters = f.small_filters;
    if (f.merge_filters > 0) c.model.merge_filters = f.merge_filters;
    if (f.dense_width > 0) c.model.dense_width = f.dense_width;

    c.train = c.preset == Preset::Tuned ? TrainConfig::tuned() : TrainConfig::original();
    if (f.augment_count >= 0) {
        c.train.augmentation.count = f.augment_count;
    }
    bool overridden = false;
    for (const auto* opt : f.overrides) {
        overridden = overridden || opt->count() > 0;
    }
    if (overridden && c.preset != Preset::Custom) {
        throw UsageError("training overrides (--lr, --epochs, ...) require --preset custom");
    }
    if (f.overrides[0]->count()) c.train.learning_rate = f.lr;
    if (f.overrides[1]->count()) c.train.epochs = f.epochs;
    if (f.overrides[2]->count()) c.train.batch_size = f.batch_size;
    if (f.overrides[3]->count()) c.train.optimizer = parse_optimizer(f.optimizer);
    if (f.overrides[4]->count()) c.train.scheduler = parse_scheduler(f.scheduler);
    if (f.overrides[5]->count()) c.train.smoothing = SmoothingConfig::parse(f.label_smoothing);
    if (f.overrides[6]->count()) c.model.dropout_rate = f.dropout;
    c.finalize();
    return c;
}

/// Prints fold progress and mirrors it into the sidecar log.
EpochCallback progress(const std::string& dir, int epochs) {
    auto mutex = std::make_shared<std::mutex>();
    return [=](int fold, const EpochRecord& r) {
        if (r.epoch != epochs && r.epoch % 10 != 0) {
            return;
        }
        std::lock_guard lock(*mutex);
        char line[160];
        std::snprintf(line, sizeof(line), "fold %d epoch %d train_loss %.4f test_loss %.4f lr %.3g",
                      fold, r.epoch, r.train_loss, r.test_loss, r.lr);
        std::cerr << line << '\n';
        log_event(dir, line);
    };
}

void print_fold_summary(const TrainResult& result) {
    for (const auto& f : result.folds) {
        if (f.failure) {
            std::printf("fold %02d  FAILED: %s\n", f.fold, f.failure->c_str());
            continue;
        }
        const auto m = classification_metrics(f.test_predictions);
        std::printf("fold %02d  best epoch %3d  test loss %.4f  acc %.3f  f1 %.3f\n", f.fold,
                    f.best.epoch, f.best.test_loss, m.accuracy, m.f1);
    }
}

// --------------------------------------------------------------- commands

struct GenerateFlags {
    std::string out;
    int subjects = 30;
    int per_subject = 12;
    int image_size = 32;
    int unscored = 0;
    std::uint64_t seed = 0;
};

int cmd_generate(const GenerateFlags& f) {
    const std::string dir = out_dir(f.out, "synthetic_data");
    SyntheticConfig sc;
    sc.subjects = f.subjects;
    sc.images_per_subject = f.per_subject;
    sc.image_size = f.image_size;
    sc.unscored_subjects = f.unscored;
    const auto samples = generate_synthetic(sc, f.seed);

    std::error_code ec;
    fs::create_directories(fs::path(dir) / "images", ec);
    if (ec) {
        throw IoError("cannot create " + dir + ": " + ec.message());
    }
    std::string manifest;
    std::map<std::string, int> per_subject;
    for (const auto& s : samples) {
        char name[64];
        std::snprintf(name, sizeof(name), "images/%s_%03d.png", s.subject_id.c_str(),
                      per_subject[s.subject_id]++);
        write_png(from_tensor(s.image), (fs::path(dir) / name).string());
        manifest += manifest_line({name, s.subject_id, s.source, s.hard_label, s.nfcs}) + "\n";
    }
    write_text((fs::path(dir) / "manifest.jsonl").string(), manifest);
    write_json((fs::path(dir) / "dataset.json").string(),
               {{"command", "generate-data"},
                {"subjects", f.subjects},
                {"per_subject", f.per_subject},
                {"image_size", f.image_size},
                {"unscored", f.unscored},
                {"seed", f.seed},
                {"images", samples.size()}});
    log_event(dir, "generated " + std::to_string(samples.size()) + " images");
    std::printf("wrote %zu images and %s\n", samples.size(),
                (fs::path(dir) / "manifest.jsonl").string().c_str());
    return 0;
}

int cmd_train(const ExperimentFlags& flags, const std::string& out) {
    const ExperimentConfig config = experiment_config(flags);
    const std::string dir = out_dir(out, "run");
    const auto samples = load_samples(config);
    const FoldPlan plan = make_folds(samples, config.fold_count, config.seed);
    log_event(dir, "train start: preset " + to_string(config.preset) + ", " +
                       std::to_string(samples.size()) + " images");
    const TrainResult result = train(config.model, samples, plan, config.train,
                                     config.parallel_folds, progress(dir, config.train.epochs));
    print_fold_summary(result);
    write_run(dir, config, plan, result);
    const auto pooled = classification_metrics(result.pooled_predictions());
    std::printf("pooled  acc %.4f  f1 %.4f  precision %.4f  recall %.4f\n", pooled.accuracy,
                pooled.f1, pooled.precision, pooled.recall);
    log_event(dir, "train done");
    return 0;
}

std::vector<std::string> default_candidates(const std::string& hyperparameter) {
    if (hyperparameter == "image_size") return {"64", "120", "224"};
    if (hyperparameter == "optimizer") return {"adam", "adagrad", "rmsprop", "sgd"};
    if (hyperparameter == "epochs") return {"50", "70", "100", "120"};
    if (hyperparameter == "label_smoothing") return {"0.1", "0.3", "0.5", "nfcs"};
    return {"step", "exponential", "cosine"};
}

std::string run_name(const std::string& hyperparameter, const std::string& candidate) {
    std::string out = hyperparameter + "_";
    for (char ch : candidate) {
        out += std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' ? ch : '_';
    }
    return out;
}

int cmd_sweep(const ExperimentFlags& flags, const std::string& hyperparameter,
              const std::string& candidate_list, const std::string& out) {
    const ExperimentConfig base = experiment_config(flags);
    const std::string dir = out_dir(out, "sweep");
    const auto candidates =
        candidate_list.empty() ? default_candidates(hyperparameter) : split_list(candidate_list);
    const auto samples = load_samples(base);
    const FoldPlan plan = make_folds(samples, base.fold_count, base.seed);
    log_event(dir, "sweep start: " + hyperparameter);

    auto on_run = [&](const std::string& label, const ModelConfig& m, const TrainConfig& t,
                      const TrainResult& r) {
        ExperimentConfig run = base;
        run.model = m;
        run.train = t;
        const std::string run_dir = (fs::path(dir) / "runs" / run_name(hyperparameter, label)).string();
        write_run(run_dir, run, plan, r);
        const auto f1 = r.fold_metric(&ClassificationMetrics::f1);
        double mean = 0.0;
        for (double v : f1) mean += v / static_cast<double>(f1.size());
        std::printf("%s = %s  mean F1 %.4f\n", hyperparameter.c_str(), label.c_str(), mean);
        std::fflush(stdout);
        log_event(dir, "finished " + hyperparameter + "=" + label);
    };
    const SweepResult result = sweep(base.model, base.train, hyperparameter, candidates, samples,
                                     plan, base.parallel_folds, on_run);

    json manifest = to_json(result);
    manifest["base"] = to_json(base);
    manifest["candidates"] = candidates;
    write_json((fs::path(dir) / "sweep.json").string(), manifest);
    write_text((fs::path(dir) / "sweep.csv").string(), sweep_csv(result));

    std::printf("\n%-12s %8s %8s  %s\n", "candidate", "F1", "dF1", "selected");
    for (const auto& row : result.rows) {
        std::printf("%-12s %8.4f %+8.4f  %s\n", row.candidate.c_str(), row.mean_f1, row.delta_f1,
                    row.selected ? "*" : "");
    }
    std::printf("baseline %s F1 %.4f; selected %s\n", result.baseline_value.c_str(),
                result.baseline_f1, result.selected.c_str());
    log_event(dir, "sweep done");
    return 0;
}

struct LoadedRun {
    RunFolder folder;
    std::vector<PredictionRecord> predictions;
};

LoadedRun load_run(const std::string& dir) {
    LoadedRun run{read_run(dir), {}};
    run.predictions = run_predictions(run.folder, load_samples(run.folder.config));
    return run;
}

void print_metrics(const std::string& name, const json& report) {
    const json& fm = report.at("fold_mean");
    std::printf("%-10s", name.c_str());
    for (const char* key : {"accuracy", "f1", "precision", "recall"}) {
        std::printf("  %s %.4f +- %.4f", key, fm.at(key).at("mean").get<double>(),
                    fm.at(key).at("std").get<double>());
    }
    std::printf("\n");
}

int cmd_evaluate(const std::string& run_dir, const std::string& against, const std::string& out) {
    const std::string dir = out_dir(out, "evaluation");
    const LoadedRun a = load_run(run_dir);
    const int folds = a.folder.plan.fold_count;
    json report = {{"run", run_dir}, {"metrics", metrics_report(a.predictions, folds)}};
    write_text((fs::path(dir) / "predictions.csv").string(), predictions_csv(a.predictions));
    print_metrics("run", report["metrics"]);
    if (!against.empty()) {
        const LoadedRun b = load_run(against);
        if (b.folder.plan.fold_count != folds) {
            throw UsageError("runs have different fold counts");
        }
        report["against"] = against;
        report["against_metrics"] = metrics_report(b.predictions, folds);
        report["comparison"] = comparison_report(a.predictions, b.predictions, folds);
        write_text((fs::path(dir) / "predictions_against.csv").string(),
                   predictions_csv(b.predictions));
        print_metrics("against", report["against_metrics"]);
        for (const auto& [key, value] : report["comparison"].items()) {
            std::printf("delta %-9s %+.4f  t %s  p %.4g\n", key.c_str(), value.at("delta").get<double>(),
                        value.at("t_test").at("t").dump().c_str(),
                        value.at("t_test").at("p").get<double>());
        }
    }
    write_json((fs::path(dir) / "metrics.json").string(), report);
    log_event(dir, "evaluated " + run_dir);
    return 0;
}

int cmd_calibrate(const std::string& run_dir, int bins, const std::string& out) {
    const std::string dir = out_dir(out, "calibration");
    const LoadedRun run = load_run(run_dir);
    const CalibrationReport pooled = calibration_curve(run.predictions, bins);
    json report = calibration_report(run.predictions, run.folder.plan.fold_count, bins);
    report["run"] = run_dir;
    write_json((fs::path(dir) / "calibration.json").string(), report);
    write_text((fs::path(dir) / "curve.csv").string(), curve_csv(pooled));
    write_text((fs::path(dir) / "histogram.csv").string(), histogram_csv(pooled));
    std::printf("ECE %.4f over %zu predictions (%d bins)\n", pooled.ece, pooled.total, bins);
    log_event(dir, "calibrated " + run_dir);
    return 0;
}

struct ExplainFlags {
    std::string run;
    int fold = 0;
    int count = 4;
    std::string label = "any";
    std::string checkpoint;
    std::vector<std::string> images;
    std::string method = "both";
    std::string target = "predicted";
    int steps = kDefaultIgSteps;
    std::string out;
};

struct ExplainItem {
    std::string stem;
    Tensor image;
    std::string subject_id;
};

std::string confidence_tag(double c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.3f", c);
    return buf;
}

int cmd_explain(const ExplainFlags& f) {
    const std::string dir = out_dir(f.out, "explanations");
    std::optional<Model> model;
    std::vector<ExplainItem> items;
    if (!f.run.empty()) {
        const RunFolder run = read_run(f.run);
        if (f.fold < 0 || f.fold >= run.plan.fold_count) {
            throw UsageError("fold " + std::to_string(f.fold) + " out of range");
        }
        model = run.checkpoints[static_cast<std::size_t>(f.fold)].model;
        const auto samples = load_samples(run.config);
        std::map<std::string, int> seen;
        for (std::size_t i : fold_indices(samples, run.plan, f.fold).test) {
            const Sample& s = samples[i];
            const int n = seen[s.subject_id]++;
            if (f.label != "any" && parse_class_label(f.label) != s.hard_label) {
                continue;
            }
            if (static_cast<int>(items.size()) >= f.count) {
                break;
            }
            char stem[64];
            std::snprintf(stem, sizeof(stem), "%s_%03d", s.subject_id.c_str(), n);
            items.push_back({stem, s.image, s.subject_id});
        }
    } else {
        if (f.checkpoint.empty() || f.images.empty()) {
            throw UsageError("explain needs --run, or --checkpoint with --image");
        }
        model = load_checkpoint(f.checkpoint).model;
        for (const auto& path : f.images) {
            const auto& cfg = model->config();
            items.push_back({fs::path(path).stem().string(),
                             to_tensor(read_image(path), cfg.input_channels, cfg.input_size), ""});
        }
    }

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir + ": " + ec.message());
    }
    json index = json::array();
    for (const auto& item : items) {
        const LabelDistribution p = predict(*model, item.image);
        const ClassLabel target = f.target == "predicted" ? classify(p) : parse_class_label(f.target);
        const double confidence = p[class_index(target)];
        std::vector<AttributionMap> maps;
        if (f.method != "ig") {
            maps.push_back(grad_cam(*model, item.image, target));
        }
        if (f.method != "gradcam") {
            maps.push_back(integrated_gradients(*model, item.image, target, {}, f.steps));
        }
        for (const auto& map : maps) {
            const std::string stem = item.stem + "_" + to_string(map.method) + "_" +
                                     std::string(to_string(target)) + "_" + confidence_tag(confidence);
            const ExportedFiles files = export_attribution(map, item.image, (fs::path(dir) / stem).string());
            index.push_back({{"image", item.stem},
                             {"method", to_string(map.method)},
                             {"target", std::string(to_string(target))},
                             {"confidence", confidence},
                             {"p_pain", p.p_pain},
                             {"all_zero", map.all_zero},
                             {"mask", fs::path(files.mask_png).filename().string()},
                             {"overlay", fs::path(files.overlay_png).filename().string()},
                             {"values", fs::path(files.values_csv).filename().string()}});
            std::printf("%s\n", stem.c_str());
        }
    }
    write_json((fs::path(dir) / "explain.json").string(),
               {{"run", f.run}, {"fold", f.fold}, {"checkpoint", f.checkpoint},
                {"method", f.method}, {"steps", f.steps}, {"files", index}});
    log_event(dir, "explained " + std::to_string(items.size()) + " images");
    return 0;
}

int cmd_report(const std::vector<std::string>& runs, int bins, const std::string& out) {
    const std::string dir = out_dir(out, "report");
    std::string csv = "model,accuracy,accuracy_std,f1,f1_std,precision,precision_std,recall,recall_std,ece\n";
    json models = json::array();
    std::vector<LoadedRun> loaded;
    std::printf("%-24s %16s %16s %16s %16s %8s\n", "model", "accuracy", "f1", "precision", "recall",
                "ece");
    for (const auto& run_dir : runs) {
        loaded.push_back(load_run(run_dir));
        const auto& run = loaded.back();
        const int folds = run.folder.plan.fold_count;
        const json m = metrics_report(run.predictions, folds);
        const double e = ece(run.predictions, bins);
        const std::string name = fs::path(run_dir).filename().string();
        csv += name;
        std::printf("%-24s", name.c_str());
        for (const char* key : {"accuracy", "f1", "precision", "recall"}) {
            const double mean = m["fold_mean"][key]["mean"], sd = m["fold_mean"][key]["std"];
            csv += "," + format_number(mean) + "," + format_number(sd);
            std::printf("  %6.2f%% +- %4.1f%%", 100 * mean, 100 * sd);
        }
        csv += "," + format_number(e) + "\n";
        std::printf(" %8.4f\n", e);
        models.push_back({{"run", run_dir},
                          {"preset", to_string(run.folder.config.preset)},
                          {"metrics", m},
                          {"ece", e}});
    }
    json report = {{"bins", bins}, {"models", models}};
    if (loaded.size() == 2 &&
        loaded[0].folder.plan.fold_count == loaded[1].folder.plan.fold_count) {
        report["comparison"] = comparison_report(loaded[0].predictions, loaded[1].predictions,
                                                 loaded[0].folder.plan.fold_count);
    }
    write_text((fs::path(dir) / "report.csv").string(), csv);
    write_json((fs::path(dir) / "report.json").string(), report);
    log_event(dir, "report over " + std::to_string(runs.size()) + " runs");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neonatal pain classifier: training, calibration and attribution"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with flag values; flags on the command line win");

    std::string out;
    auto add_out = [&](CLI::App* cmd) {
        cmd->add_option("--out", out, "output directory")->envname(kOutEnv);
    };

    GenerateFlags gen;
    auto* generate = app.add_subcommand("generate-data", "write a synthetic dataset and manifest");
    generate->add_option("--subjects", gen.subjects)->capture_default_str();
    generate->add_option("--per-subject", gen.per_subject)->capture_default_str();
    generate->add_option("--image-size", gen.image_size)->capture_default_str();
    generate->add_option("--unscored", gen.unscored, "subjects without an NFCS score")
        ->capture_default_str();
    generate->add_option("--seed", gen.seed)->capture_default_str();
    add_out(generate);

    ExperimentFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "cross-validated training with checkpoints");
    add_experiment_flags(train_cmd, train_flags);
    add_out(train_cmd);

    ExperimentFlags sweep_flags;
    std::string hyperparameter, candidates;
    auto* sweep_cmd = app.add_subcommand("sweep", "one-at-a-time hyperparameter search");
    add_experiment_flags(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--hyperparameter", hyperparameter)
        ->required()
        ->check(CLI::IsMember(
            std::vector<std::string>(std::begin(kSweepHyperparameters), std::end(kSweepHyperparameters))));
    sweep_cmd->add_option("--candidates", candidates, "comma-separated values (default: full search space)");
    add_out(sweep_cmd);

    std::string run_dir, against;
    int bins = kDefaultBins;
    auto* evaluate = app.add_subcommand("evaluate", "metrics of a run, optionally against another");
    evaluate->add_option("--run", run_dir)->required();
    evaluate->add_option("--against", against, "second run for paired t-tests");
    add_out(evaluate);

    auto* calibrate = app.add_subcommand("calibrate", "calibration curve, histogram and ECE");
    calibrate->add_option("--run", run_dir)->required();
    calibrate->add_option("--bins", bins)->capture_default_str()->check(CLI::PositiveNumber);
    add_out(calibrate);

    ExplainFlags ex;
    auto* explain = app.add_subcommand("explain", "Grad-CAM and Integrated Gradients maps");
    explain->add_option("--run", ex.run, "run directory");
    explain->add_option("--fold", ex.fold)->capture_default_str();
    explain->add_option("--count", ex.count, "test images to explain")->capture_default_str();
    explain->add_option("--label", ex.label, "only test images with this true label")
        ->check(CLI::IsMember({"any", "pain", "no_pain"}))
        ->capture_default_str();
    explain->add_option("--checkpoint", ex.checkpoint, "checkpoint file instead of --run");
    explain->add_option("--image", ex.images, "image files to explain with --checkpoint");
    explain->add_option("--method", ex.method)
        ->check(CLI::IsMember({"both", "gradcam", "ig"}))
        ->capture_default_str();
    explain->add_option("--target", ex.target)
        ->check(CLI::IsMember({"predicted", "pain", "no_pain"}))
        ->capture_default_str();
    explain->add_option("--steps", ex.steps, "IG path steps")->capture_default_str()->check(CLI::PositiveNumber);
    add_out(explain);

    std::vector<std::string> report_runs;
    auto* report = app.add_subcommand("report", "metrics table across runs");
    report->add_option("--run", report_runs, "run directories")->required();
    report->add_option("--bins", bins)->capture_default_str()->check(CLI::PositiveNumber);
    add_out(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (generate->parsed()) return cmd_generate({out, gen.subjects, gen.per_subject, gen.image_size, gen.unscored, gen.seed});
        if (train_cmd->parsed()) return cmd_train(train_flags, out);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags, hyperparameter, candidates, out);
        if (evaluate->parsed()) return cmd_evaluate(run_dir, against, out);
        if (calibrate->parsed()) return cmd_calibrate(run_dir, bins, out);
        if (explain->parsed()) {
            ex.out = out;
            return cmd_explain(ex);
        }
        if (report->parsed()) return cmd_report(report_runs, bins, out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
