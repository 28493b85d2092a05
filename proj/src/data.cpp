#include "painscope/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "painscope/errors.hpp"
#include "painscope/image.hpp"
#include "painscope/rng.hpp"

namespace painscope {

namespace fs = std::filesystem;
using nlohmann::json;

void check_label_consistency(const Sample& sample) {
    if (sample.nfcs && nfcs_hard_label(NfcsScore{static_cast<double>(*sample.nfcs)}) !=
                           sample.hard_label) {
        throw ContractError("NFCS " + std::to_string(*sample.nfcs) + " contradicts hard label '" +
                            std::string(to_string(sample.hard_label)) + "'");
    }
}

std::vector<Sample> load_manifest(const std::string& path, int input_size, int channels) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest: " + path);
    }
    const fs::path base = fs::path(path).parent_path();
    std::vector<Sample> samples;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        Sample s;
        std::string image_path;
        try {
            const json rec = json::parse(line);
            if (!rec.is_object()) {
                throw IngestionError(row, "record is not a JSON object");
            }
            for (const char* key : {"image_path", "subject_id", "hard_label"}) {
                if (!rec.contains(key) || !rec[key].is_string()) {
                    throw IngestionError(row, std::string("missing string field '") + key + "'");
                }
            }
            image_path = rec["image_path"].get<std::string>();
            s.subject_id = rec["subject_id"].get<std::string>();
            s.source = rec.value("source", std::string("unknown"));
            try {
                s.hard_label = parse_class_label(rec["hard_label"].get<std::string>());
            } catch (const ContractError& e) {
                throw IngestionError(row, e.what());
            }
            if (rec.contains("nfcs") && !rec["nfcs"].is_null()) {
                if (!rec["nfcs"].is_number_integer()) {
                    throw IngestionError(row, "nfcs must be an integer or null");
                }
                const int v = rec["nfcs"].get<int>();
                if (v < 0 || v > 5) {
                    throw IngestionError(row, "nfcs " + std::to_string(v) + " outside 0-5");
                }
                s.nfcs = v;
            }
        } catch (const json::exception& e) {
            throw IngestionError(row, std::string("malformed JSON: ") + e.what());
        }
        try {
            check_label_consistency(s);
        } catch (const ContractError& e) {
            throw IngestionError(row, e.what());
        }
        fs::path image_file(image_path);
        if (image_file.is_relative()) {
            image_file = base / image_file;
        }
        if (!fs::exists(image_file)) {
            throw IngestionError(row, "image file not found: " + image_file.string());
        }
        try {
            s.image = to_tensor(read_image(image_file.string()), channels, input_size);
        } catch (const std::runtime_error& e) {
            throw IngestionError(row, e.what());
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

std::string manifest_line(const ManifestRow& row) {
    json rec;
    rec["image_path"] = row.image_path;
    rec["subject_id"] = row.subject_id;
    rec["source"] = row.source;
    rec["hard_label"] = std::string(to_string(row.hard_label));
    rec["nfcs"] = row.nfcs ? json(*row.nfcs) : json(nullptr);
    return rec.dump();
}

std::vector<Sample> generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
    if (config.subjects < 1 || config.images_per_subject < 1 || config.image_size < 8) {
        throw ConfigError("synthetic data needs positive counts and image size >= 8");
    }
    const int S = config.image_size;
    const auto uS = static_cast<std::size_t>(S);

    // Balanced classes, randomly assigned to subjects.
    std::vector<int> pain_flags(static_cast<std::size_t>(config.subjects), 0);
    for (int i = 0; i < config.subjects / 2; ++i) {
        pain_flags[static_cast<std::size_t>(i)] = 1;
    }
    Rng class_rng(derive_seed(seed, "synthetic.classes"));
    class_rng.shuffle(pain_flags.begin(), pain_flags.end());

    const double marker_rx = 0.12 * S;
    const double marker_ry = 0.10 * S;
    const int jitter = std::max(1, S / 24);

    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(config.subjects * config.images_per_subject));
    for (int subj = 0; subj < config.subjects; ++subj) {
        Rng subject_rng(derive_seed(seed, "synthetic.subject", static_cast<std::uint64_t>(subj)));
        const bool pain = pain_flags[static_cast<std::size_t>(subj)] != 0;
        const bool scored = subj < config.subjects - config.unscored_subjects;
        const double face_level = subject_rng.uniform(0.16, 0.22);
        const double face_scale = subject_rng.uniform(0.92, 1.05);
        const double background = subject_rng.uniform(0.02, 0.06);
        char id[32];
        std::snprintf(id, sizeof(id), "S%03d", subj + 1);

        for (int img = 0; img < config.images_per_subject; ++img) {
            Rng rng(derive_seed(seed, "synthetic.image", static_cast<std::uint64_t>(subj),
                                static_cast<std::uint64_t>(img)));
            const int k = static_cast<int>(rng.below(3)) + (pain ? 3 : 0);
            std::vector<int> sites{0, 1, 2, 3, 4};
            rng.shuffle(sites.begin(), sites.end());
            sites.resize(static_cast<std::size_t>(k));
            std::sort(sites.begin(), sites.end());

            const double face_dx = static_cast<double>(static_cast<int>(rng.below(3)) - 1) * jitter;
            const double face_dy = static_cast<double>(static_cast<int>(rng.below(3)) - 1) * jitter;
            const Ellipse face{0.5 * S + face_dx, 0.52 * S + face_dy, 0.36 * S * face_scale,
                               0.44 * S * face_scale};

            Sample s;
            s.subject_id = id;
            s.source = scored ? "synthetic_scored" : "synthetic_unscored";
            s.hard_label = pain ? ClassLabel::Pain : ClassLabel::NoPain;
            if (scored) {
                s.nfcs = k;
            }
            std::vector<double> marker_levels;
            for (int site : sites) {
                // Integer-snapped centres keep every marker's raster footprint identical.
                const double cx = std::round(kMarkerSites[site][0] * S + face_dx) +
                                  static_cast<double>(static_cast<int>(rng.below(3)) - 1);
                const double cy = std::round(kMarkerSites[site][1] * S + face_dy) +
                                  static_cast<double>(static_cast<int>(rng.below(3)) - 1);
                s.markers.push_back({cx, cy, marker_rx, marker_ry});
                marker_levels.push_back(rng.uniform(0.90, 1.00));
            }

            s.image = Tensor(Shape{1, uS, uS});
            for (int y = 0; y < S; ++y) {
                for (int x = 0; x < S; ++x) {
                    double v = face.contains(x, y) ? face_level : background;
                    for (std::size_t m = 0; m < s.markers.size(); ++m) {
                        if (s.markers[m].contains(x, y)) {
                            v = marker_levels[m];
                        }
                    }
                    v += 0.03 * rng.normal();
                    v = std::clamp(v, 0.0, 1.0);
                    s.image.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
                        std::round(v * 255.0) / 255.0;
                }
            }
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

std::vector<std::uint8_t> marker_mask(const Sample& sample) {
    const std::size_t H = sample.image.dim(1), W = sample.image.dim(2);
    std::vector<std::uint8_t> mask(H * W, 0);
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            for (const auto& m : sample.markers) {
                if (m.contains(static_cast<double>(x), static_cast<double>(y))) {
                    mask[y * W + x] = 1;
                }
            }
        }
    }
    return mask;
}

FoldPlan make_folds(const std::vector<Sample>& samples, int fold_count, std::uint64_t seed) {
    if (fold_count < 2) {
        throw ConfigError("fold count must be at least 2");
    }
    // Subjects are stratified by their majority label so each test fold sees
    // both classes whenever the class counts allow it.
    std::map<std::string, int> balance;
    for (const auto& s : samples) {
        balance[s.subject_id] += s.hard_label == ClassLabel::Pain ? 1 : -1;
    }
    if (balance.size() < static_cast<std::size_t>(fold_count)) {
        throw ConfigError("need at least " + std::to_string(fold_count) + " subjects for " +
                          std::to_string(fold_count) + " folds, found " +
                          std::to_string(balance.size()));
    }
    std::vector<std::string> pain_subjects, other_subjects;
    for (const auto& [id, score] : balance) {
        (score > 0 ? pain_subjects : other_subjects).push_back(id);
    }
    Rng rng(derive_seed(seed, "folds"));
    rng.shuffle(pain_subjects.begin(), pain_subjects.end());
    rng.shuffle(other_subjects.begin(), other_subjects.end());
    std::vector<std::string> subjects = pain_subjects;
    subjects.insert(subjects.end(), other_subjects.begin(), other_subjects.end());

    FoldPlan plan;
    plan.fold_count = fold_count;
    plan.seed = seed;
    // Round-robin deal: fold f gets subjects f, f+k, f+2k, ... so earlier
    // folds absorb the remainder.
    const std::size_t k = static_cast<std::size_t>(fold_count);
    plan.test_subjects.assign(k, {});
    plan.train_subjects.assign(k, {});
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        plan.test_subjects[i % k].push_back(subjects[i]);
    }
    for (std::size_t f = 0; f < k; ++f) {
        auto& test = plan.test_subjects[f];
        std::sort(test.begin(), test.end());
        for (const auto& id : subjects) {
            if (!std::binary_search(test.begin(), test.end(), id)) {
                plan.train_subjects[f].push_back(id);
            }
        }
        std::sort(plan.train_subjects[f].begin(), plan.train_subjects[f].end());
    }
    return plan;
}

FoldIndices fold_indices(const std::vector<Sample>& samples, const FoldPlan& plan, int fold) {
    if (fold < 0 || fold >= plan.fold_count) {
        throw ContractError("fold " + std::to_string(fold) + " outside plan");
    }
    const auto& test = plan.test_subjects[static_cast<std::size_t>(fold)];
    const auto& train = plan.train_subjects[static_cast<std::size_t>(fold)];
    FoldIndices idx;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& id = samples[i].subject_id;
        if (std::binary_search(test.begin(), test.end(), id)) {
            idx.test.push_back(i);
        } else if (std::binary_search(train.begin(), train.end(), id)) {
            idx.train.push_back(i);
        }
    }
    return idx;
}

} // namespace painscope
