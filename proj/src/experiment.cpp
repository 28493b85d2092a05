#include "painscope/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "painscope/errors.hpp"
#include "painscope/image.hpp"
#include "painscope/rng.hpp"

namespace painscope {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Preset preset) {
    switch (preset) {
    case Preset::Original:
        return "original";
    case Preset::Tuned:
        return "tuned";
    case Preset::Custom:
        return "custom";
    }
    return "custom";
}

Preset parse_preset(const std::string& text) {
    if (text == "original") {
        return Preset::Original;
    }
    if (text == "tuned") {
        return Preset::Tuned;
    }
    if (text == "custom") {
        return Preset::Custom;
    }
    throw ConfigError("unknown preset '" + text + "' (original, tuned, custom)");
}

void ExperimentConfig::finalize() {
    train.seed = seed;
    if (fold_count < 2) {
        throw ConfigError("need at least 2 folds");
    }
    if (parallel_folds < 1) {
        throw ConfigError("parallel folds must be positive");
    }
    if (data.synthetic_data()) {
        data.synthetic.image_size = model.input_size;
    }
    model.validate();
    train.validate();
}

// --------------------------------------------------------------------- json

namespace {

json model_json(const ModelConfig& m) {
    return {{"input_size", m.input_size},
            {"input_channels", m.input_channels},
            {"pool_window", m.pool_window},
            {"pool_stride", m.pool_stride},
            {"large_filters", m.large_filters},
            {"large_kernel", m.large_kernel},
            {"small_filters", m.small_filters},
            {"small_kernel", m.small_kernel},
            {"merge_filters", m.merge_filters},
            {"merge_kernel", m.merge_kernel},
            {"same_padding", m.same_padding},
            {"dense_width", m.dense_width},
            {"dropout_rate", m.dropout_rate}};
}

ModelConfig model_from(const json& j) {
    ModelConfig m;
    m.input_size = j.at("input_size");
    m.input_channels = j.at("input_channels");
    m.pool_window = j.at("pool_window");
    m.pool_stride = j.at("pool_stride");
    m.large_filters = j.at("large_filters");
    m.large_kernel = j.at("large_kernel");
    m.small_filters = j.at("small_filters");
    m.small_kernel = j.at("small_kernel");
    m.merge_filters = j.at("merge_filters");
    m.merge_kernel = j.at("merge_kernel");
    m.same_padding = j.at("same_padding");
    m.dense_width = j.at("dense_width");
    m.dropout_rate = j.at("dropout_rate");
    return m;
}

json augmentation_json(const AugmentationConfig& a) {
    return {{"count", a.count},
            {"shift", a.shift},
            {"rotation_deg", a.rotation_deg},
            {"shear", a.shear},
            {"brightness", {a.brightness_lo, a.brightness_hi}},
            {"zoom", {a.zoom_lo, a.zoom_hi}},
            {"horizontal_flip", a.horizontal_flip}};
}

AugmentationConfig augmentation_from(const json& j) {
    AugmentationConfig a;
    a.count = j.at("count");
    a.shift = j.at("shift");
    a.rotation_deg = j.at("rotation_deg");
    a.shear = j.at("shear");
    a.brightness_lo = j.at("brightness").at(0);
    a.brightness_hi = j.at("brightness").at(1);
    a.zoom_lo = j.at("zoom").at(0);
    a.zoom_hi = j.at("zoom").at(1);
    a.horizontal_flip = j.at("horizontal_flip");
    return a;
}

json train_json(const TrainConfig& t) {
    return {{"learning_rate", t.learning_rate},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"optimizer", to_string(t.optimizer)},
            {"scheduler", to_string(t.scheduler)},
            {"scheduler_params",
             {{"step_size", t.scheduler_params.step_size},
              {"step_gamma", t.scheduler_params.step_gamma},
              {"exp_gamma", t.scheduler_params.exp_gamma},
              {"eta_min", t.scheduler_params.eta_min}}},
            {"label_smoothing", t.smoothing.to_string()},
            {"augmentation", augmentation_json(t.augmentation)},
            {"seed", t.seed}};
}

TrainConfig train_from(const json& j) {
    TrainConfig t;
    t.learning_rate = j.at("learning_rate");
    t.epochs = j.at("epochs");
    t.batch_size = j.at("batch_size");
    t.optimizer = parse_optimizer(j.at("optimizer"));
    t.scheduler = parse_scheduler(j.at("scheduler"));
    const json& sp = j.at("scheduler_params");
    t.scheduler_params.step_size = sp.at("step_size");
    t.scheduler_params.step_gamma = sp.at("step_gamma");
    t.scheduler_params.exp_gamma = sp.at("exp_gamma");
    t.scheduler_params.eta_min = sp.at("eta_min");
    t.smoothing = SmoothingConfig::parse(j.at("label_smoothing"));
    t.augmentation = augmentation_from(j.at("augmentation"));
    t.seed = j.at("seed");
    return t;
}

} // namespace

json to_json(const ExperimentConfig& c) {
    json data;
    if (c.data.synthetic_data()) {
        data = {{"kind", "synthetic"},
                {"subjects", c.data.synthetic.subjects},
                {"images_per_subject", c.data.synthetic.images_per_subject},
                {"unscored_subjects", c.data.synthetic.unscored_subjects}};
    } else {
        data = {{"kind", "manifest"}, {"manifest", c.data.manifest}};
    }
    return {{"preset", to_string(c.preset)}, {"seed", c.seed},
            {"folds", c.fold_count},         {"data", data},
            {"model", model_json(c.model)},  {"train", train_json(c.train)}};
}

ExperimentConfig experiment_from_json(const json& j) {
    try {
        ExperimentConfig c;
        c.preset = parse_preset(j.at("preset"));
        c.seed = j.at("seed");
        c.fold_count = j.at("folds");
        const json& data = j.at("data");
        if (data.at("kind") == "synthetic") {
            c.data.synthetic.subjects = data.at("subjects");
            c.data.synthetic.images_per_subject = data.at("images_per_subject");
            c.data.synthetic.unscored_subjects = data.at("unscored_subjects");
        } else {
            c.data.manifest = data.at("manifest");
        }
        c.model = model_from(j.at("model"));
        c.train = train_from(j.at("train"));
        c.finalize();
        return c;
    } catch (const json::exception& e) {
        throw FormatError("run manifest", e.what());
    }
}

std::vector<Sample> load_samples(const ExperimentConfig& config) {
    if (!config.data.synthetic_data()) {
        return load_manifest(config.data.manifest, config.model.input_size,
                             config.model.input_channels);
    }
    SyntheticConfig sc = config.data.synthetic;
    sc.image_size = config.model.input_size;
    auto samples = generate_synthetic(sc, derive_seed(config.seed, "data"));
    if (config.model.input_channels != 1) {
        for (auto& s : samples) {
            s.image = to_tensor(from_tensor(s.image), config.model.input_channels, sc.image_size);
        }
    }
    return samples;
}

json to_json(const FoldPlan& plan) {
    json folds = json::array();
    for (int f = 0; f < plan.fold_count; ++f) {
        folds.push_back({{"fold", f},
                         {"test_subjects", plan.test_subjects[static_cast<std::size_t>(f)]},
                         {"train_subjects", plan.train_subjects[static_cast<std::size_t>(f)]}});
    }
    return {{"fold_count", plan.fold_count}, {"seed", plan.seed}, {"folds", folds}};
}

FoldPlan fold_plan_from_json(const json& j) {
    try {
        FoldPlan plan;
        plan.fold_count = j.at("fold_count");
        plan.seed = j.at("seed");
        for (const auto& f : j.at("folds")) {
            plan.test_subjects.push_back(f.at("test_subjects"));
            plan.train_subjects.push_back(f.at("train_subjects"));
        }
        if (plan.test_subjects.size() != static_cast<std::size_t>(plan.fold_count)) {
            throw FormatError("folds", "fold count does not match the fold list");
        }
        return plan;
    } catch (const json::exception& e) {
        throw FormatError("folds", e.what());
    }
}

// ---------------------------------------------------------------- run files

std::string fold_file(const std::string& dir, const std::string& prefix, int fold,
                      const std::string& ext) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s%02d.%s", prefix.c_str(), fold, ext.c_str());
    return (fs::path(dir) / name).string();
}

std::string format_number(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
        if (std::strtod(buf, nullptr) == value) {
            break;
        }
    }
    return buf;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,train_loss,test_loss,lr\n";
    for (const auto& r : history) {
        out += std::to_string(r.epoch) + "," + format_number(r.train_loss) + "," +
               format_number(r.test_loss) + "," + format_number(r.lr) + "\n";
    }
    return out;
}

namespace {

std::vector<EpochRecord> parse_history(const std::string& text, const std::string& path) {
    std::vector<EpochRecord> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        EpochRecord r;
        char extra = 0;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf%c", &r.epoch, &r.train_loss, &r.test_loss,
                        &r.lr, &extra) != 4) {
            throw FormatError(path, "bad history line '" + line + "'");
        }
        out.push_back(r);
    }
    return out;
}

} // namespace

void write_run(const std::string& dir, const ExperimentConfig& config, const FoldPlan& plan,
               const TrainResult& result) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory " + dir + ": " + ec.message());
    }
    json folds = json::array();
    std::string failure;
    for (const auto& f : result.folds) {
        write_text(fold_file(dir, "history_fold_", f.fold, "csv"), history_csv(f.history));
        json entry = {{"fold", f.fold}, {"training_images", f.training_images}};
        if (f.failure) {
            entry["failure"] = *f.failure;
            if (failure.empty()) {
                failure = "fold " + std::to_string(f.fold) + ": " + *f.failure;
            }
        } else {
            save_checkpoint(f.best, fold_file(dir, "fold_", f.fold, "ckpt"));
            entry["best_epoch"] = f.best.epoch;
            entry["best_test_loss"] = f.best.test_loss;
        }
        folds.push_back(entry);
    }
    json manifest = to_json(config);
    manifest["results"] = folds;
    write_json((fs::path(dir) / "run.json").string(), manifest);
    write_json((fs::path(dir) / "folds.json").string(), to_json(plan));
    if (!failure.empty()) {
        throw TrainingError(failure);
    }
}

RunFolder read_run(const std::string& dir) {
    RunFolder run;
    run.dir = dir;
    run.config = experiment_from_json(read_json((fs::path(dir) / "run.json").string()));
    run.plan = fold_plan_from_json(read_json((fs::path(dir) / "folds.json").string()));
    for (int f = 0; f < run.plan.fold_count; ++f) {
        const std::string hist = fold_file(dir, "history_fold_", f, "csv");
        run.histories.push_back(parse_history(read_text(hist), hist));
        const std::string ckpt = fold_file(dir, "fold_", f, "ckpt");
        if (!fs::exists(ckpt)) {
            throw IoError("missing checkpoint " + ckpt);
        }
        run.checkpoints.push_back(load_checkpoint(ckpt));
    }
    return run;
}

std::vector<PredictionRecord> run_predictions(const RunFolder& run,
                                              const std::vector<Sample>& samples) {
    std::vector<PredictionRecord> out;
    for (int f = 0; f < run.plan.fold_count; ++f) {
        const auto idx = fold_indices(samples, run.plan, f);
        auto records =
            predict_records(run.checkpoints[static_cast<std::size_t>(f)].model, samples, idx.test, f);
        out.insert(out.end(), records.begin(), records.end());
    }
    return out;
}

std::vector<std::vector<PredictionRecord>> by_fold(const std::vector<PredictionRecord>& records,
                                                   int fold_count) {
    std::vector<std::vector<PredictionRecord>> out(static_cast<std::size_t>(fold_count));
    for (const auto& r : records) {
        if (r.fold < 0 || r.fold >= fold_count) {
            throw ContractError("prediction fold " + std::to_string(r.fold) + " out of range");
        }
        out[static_cast<std::size_t>(r.fold)].push_back(r);
    }
    return out;
}

// ------------------------------------------------------------------ reports

json to_json(const ClassificationMetrics& m) {
    return {{"accuracy", m.accuracy},
            {"f1", m.f1},
            {"precision", m.precision},
            {"recall", m.recall},
            {"tp", m.tp},
            {"fp", m.fp},
            {"fn", m.fn},
            {"tn", m.tn},
            {"precision_undefined", m.precision_undefined},
            {"recall_undefined", m.recall_undefined},
            {"f1_undefined", m.f1_undefined}};
}

json to_json(const TTestResult& t) {
    json j = {{"t", t.t_statistic},
              {"p", t.p_value},
              {"dof", t.degrees_of_freedom},
              {"mean_difference", t.mean_difference},
              {"degenerate", t.degenerate}};
    if (!std::isfinite(t.t_statistic)) {
        j["t"] = t.t_statistic > 0 ? "inf" : "-inf";
    }
    return j;
}

json to_json(const CalibrationReport& report) {
    json bins = json::array();
    for (std::size_t k = 0; k < report.bins.size(); ++k) {
        const auto& b = report.bins[k];
        bins.push_back({{"bin", k + 1},
                        {"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"mean_confidence", b.mean_confidence},
                        {"positive_frequency", b.positive_frequency}});
    }
    return {{"bins_count", report.bins_count}, {"total", report.total}, {"ece", report.ece},
            {"bins", bins}};
}

json to_json(const SweepResult& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"candidate", row.candidate},
                        {"f1", row.mean_f1},
                        {"delta_f1", row.delta_f1},
                        {"fold_f1", row.fold_f1},
                        {"selected", row.selected}});
    }
    return {{"hyperparameter", r.hyperparameter},
            {"baseline", {{"value", r.baseline_value}, {"f1", r.baseline_f1}, {"fold_f1", r.baseline_fold_f1}}},
            {"rows", rows},
            {"selected", r.selected}};
}

namespace {

constexpr std::pair<const char*, double ClassificationMetrics::*> kMetrics[] = {
    {"accuracy", &ClassificationMetrics::accuracy},
    {"f1", &ClassificationMetrics::f1},
    {"precision", &ClassificationMetrics::precision},
    {"recall", &ClassificationMetrics::recall}};

std::vector<ClassificationMetrics> fold_metrics(const std::vector<PredictionRecord>& records,
                                                int fold_count) {
    std::vector<ClassificationMetrics> out;
    for (const auto& fold : by_fold(records, fold_count)) {
        if (fold.empty()) {
            throw ContractError("a fold has no predictions");
        }
        out.push_back(classification_metrics(fold));
    }
    return out;
}

std::vector<double> column(const std::vector<ClassificationMetrics>& folds,
                           double ClassificationMetrics::*metric) {
    std::vector<double> out;
    for (const auto& m : folds) {
        out.push_back(m.*metric);
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace

json metrics_report(const std::vector<PredictionRecord>& records, int fold_count) {
    const auto folds = fold_metrics(records, fold_count);
    json per_fold = json::array();
    for (std::size_t f = 0; f < folds.size(); ++f) {
        json m = to_json(folds[f]);
        m["fold"] = f;
        per_fold.push_back(m);
    }
    json summary = json::object();
    for (const auto& [name, member] : kMetrics) {
        const auto values = column(folds, member);
        summary[name] = {{"mean", mean_of(values)}, {"std", std_of(values)}};
    }
    return {{"pooled", to_json(classification_metrics(records))},
            {"fold_mean", summary},
            {"folds", per_fold},
            {"records", records.size()}};
}

json comparison_report(const std::vector<PredictionRecord>& a, const std::vector<PredictionRecord>& b,
                       int fold_count) {
    const auto fa = fold_metrics(a, fold_count);
    const auto fb = fold_metrics(b, fold_count);
    json out = json::object();
    for (const auto& [name, member] : kMetrics) {
        const auto va = column(fa, member);
        const auto vb = column(fb, member);
        out[name] = {{"a", mean_of(va)},
                     {"b", mean_of(vb)},
                     {"delta", mean_of(vb) - mean_of(va)},
                     {"t_test", to_json(paired_t_test(vb, va))}};
    }
    return out;
}

json calibration_report(const std::vector<PredictionRecord>& records, int fold_count, int bins) {
    const CalibrationReport pooled = calibration_curve(records, bins);
    json j = to_json(pooled);
    json per_fold = json::array();
    std::vector<double> values;
    for (const auto& fold : by_fold(records, fold_count)) {
        values.push_back(fold.empty() ? 0.0 : ece(fold, bins));
        per_fold.push_back(values.back());
    }
    j["fold_ece"] = per_fold;
    j["fold_ece_mean"] = mean_of(values);
    j["histogram"] = confidence_histogram(records, bins);
    return j;
}

std::string predictions_csv(const std::vector<PredictionRecord>& records) {
    std::string out = "fold,subject_id,true_label,confidence_pain\n";
    for (const auto& r : records) {
        out += std::to_string(r.fold) + "," + r.subject_id + "," + std::string(to_string(r.true_label)) + "," +
               format_number(r.confidence_pain) + "\n";
    }
    return out;
}

std::string curve_csv(const CalibrationReport& report) {
    std::string out = "bin,lower,upper,count,mean_confidence,positive_frequency\n";
    for (std::size_t k = 0; k < report.bins.size(); ++k) {
        const auto& b = report.bins[k];
        if (b.count == 0) {
            continue;
        }
        out += std::to_string(k + 1) + "," + format_number(b.lower) + "," + format_number(b.upper) +
               "," + std::to_string(b.count) + "," + format_number(b.mean_confidence) + "," +
               format_number(b.positive_frequency) + "\n";
    }
    return out;
}

std::string histogram_csv(const CalibrationReport& report) {
    std::string out = "bin,lower,upper,count,fraction\n";
    for (std::size_t k = 0; k < report.bins.size(); ++k) {
        const auto& b = report.bins[k];
        const double fraction =
            report.total ? static_cast<double>(b.count) / static_cast<double>(report.total) : 0.0;
        out += std::to_string(k + 1) + "," + format_number(b.lower) + "," + format_number(b.upper) +
               "," + std::to_string(b.count) + "," + format_number(fraction) + "\n";
    }
    return out;
}

std::string sweep_csv(const SweepResult& result) {
    std::string out = "candidate,f1,delta_f1,selected\n";
    for (const auto& row : result.rows) {
        out += row.candidate + "," + format_number(row.mean_f1) + "," + format_number(row.delta_f1) +
               "," + (row.selected ? "yes" : "no") + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------- io

void write_text(const std::string& path, const std::string& content) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        fs::create_directories(parent, ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << content;
    if (!out) {
        throw IoError("write failed for " + path);
    }
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const std::string& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

json read_json(const std::string& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(path, e.what());
    }
}

void log_event(const std::string& dir, const std::string& message) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream out((fs::path(dir) / "run.log").string(), std::ios::app);
    if (!out) {
        return;
    }
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
    out << stamp << ' ' << message << '\n';
}

} // namespace painscope
