#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"
#include "painscope/data.hpp"
#include "painscope/errors.hpp"
#include "painscope/image.hpp"
#include "support.hpp"

using namespace painscope;

namespace {

std::vector<Sample> synthetic(int subjects, int per, int size, std::uint64_t seed, int unscored = 0) {
    SyntheticConfig c;
    c.subjects = subjects;
    c.images_per_subject = per;
    c.image_size = size;
    c.unscored_subjects = unscored;
    return generate_synthetic(c, seed);
}

std::size_t ingestion_row(const std::string& path) {
    try {
        load_manifest(path, 16);
    } catch (const IngestionError& e) {
        return e.row();
    }
    return 0;
}

} // namespace

TEST_CASE("image codecs round-trip") {
    const auto dir = testing::temp_dir("images");
    Image8 gray{5, 3, 1, {}};
    for (int i = 0; i < 15; ++i) gray.pixels.push_back(static_cast<std::uint8_t>(i * 17));
    write_png(gray, (dir / "g.png").string());
    const Image8 back = read_image((dir / "g.png").string());
    CHECK(back.width == 5);
    CHECK(back.height == 3);
    CHECK(back.pixels == gray.pixels);

    Image8 rgb{2, 2, 3, {255, 0, 0, 0, 255, 0, 0, 0, 255, 30, 60, 90}};
    write_pnm(rgb, (dir / "c.ppm").string());
    CHECK(read_image((dir / "c.ppm").string()).pixels == rgb.pixels);
    write_pnm(gray, (dir / "g.pgm").string());
    CHECK(read_image((dir / "g.pgm").string()).pixels == gray.pixels);

    std::ofstream((dir / "a.pgm").string()) << "P2\n2 1\n255\n0 255\n";
    CHECK(read_image((dir / "a.pgm").string()).pixels == std::vector<std::uint8_t>{0, 255});

    std::ofstream((dir / "junk.png").string()) << "not an image";
    CHECK_THROWS(read_image((dir / "junk.png").string()));
    CHECK_THROWS_AS(read_image((dir / "missing.png").string()), IoError);

    const Tensor t = to_tensor(rgb, 1, 2);
    CHECK(t.shape() == Shape{1, 2, 2});
    CHECK(t[0] == doctest::Approx(85.0 / 255.0));
}

TEST_CASE("synthetic generator") {
    const auto a = synthetic(10, 3, 24, 5), b = synthetic(10, 3, 24, 5), c = synthetic(10, 3, 24, 6);
    REQUIRE(a.size() == 30);
    bool any_difference = false;
    std::set<std::string> pain_subjects, all_subjects;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image == b[i].image);
        CHECK(a[i].subject_id == b[i].subject_id);
        any_difference = any_difference || !(a[i].image == c[i].image);
        REQUIRE(a[i].nfcs.has_value());
        CHECK(nfcs_hard_label({double(*a[i].nfcs)}) == a[i].hard_label);
        CHECK(a[i].markers.size() == static_cast<std::size_t>(*a[i].nfcs));
        CHECK_NOTHROW(check_label_consistency(a[i]));
        for (double v : a[i].image.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            CHECK(std::abs(v * 255 - std::round(v * 255)) < 1e-9);
        }
        all_subjects.insert(a[i].subject_id);
        if (a[i].hard_label == ClassLabel::Pain) pain_subjects.insert(a[i].subject_id);
    }
    CHECK(any_difference);
    CHECK(all_subjects.size() == 10);
    CHECK(pain_subjects.size() == 5);

    const auto u = synthetic(6, 2, 16, 1, 2);
    for (const auto& s : u) {
        const bool last = s.subject_id == "S005" || s.subject_id == "S006";
        CHECK(s.nfcs.has_value() == !last);
        CHECK((s.source == "synthetic_unscored") == last);
    }
}

TEST_CASE("synthetic classes are separable by bright-pixel count") {
    const auto samples = synthetic(30, 12, 16, 7);
    std::vector<std::pair<int, int>> counts; // (bright pixels, is pain)
    for (const auto& s : samples) {
        int bright = 0;
        for (double v : s.image.values()) bright += v > 0.5;
        counts.push_back({bright, s.hard_label == ClassLabel::Pain});
    }
    double best = 0.0;
    for (int threshold = 0; threshold <= 256; ++threshold) {
        int correct = 0;
        for (const auto& [n, pain] : counts) correct += (n >= threshold) == (pain == 1);
        best = std::max(best, correct / static_cast<double>(counts.size()));
    }
    CHECK(best >= 0.95);
}

TEST_CASE("marker mask covers the markers") {
    const auto s = synthetic(2, 4, 32, 3);
    for (const auto& sample : s) {
        const auto mask = marker_mask(sample);
        std::size_t inside = std::count(mask.begin(), mask.end(), 1);
        CHECK((inside > 0) == !sample.markers.empty());
    }
}

TEST_CASE("manifest ingestion") {
    const auto dir = testing::temp_dir("manifest");
    Image8 img{4, 4, 1, std::vector<std::uint8_t>(16, 200)};
    write_png(img, (dir / "a.png").string());
    write_png(img, (dir / "b.png").string());
    Image8 rgb{4, 4, 3, std::vector<std::uint8_t>(48, 40)};
    write_pnm(rgb, (dir / "c.ppm").string());

    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream((dir / name).string()) << body;
        return (dir / name).string();
    };
    const std::string good = write("good.jsonl",
        manifest_line({"a.png", "S1", "set", ClassLabel::Pain, 4}) + "\n" +
        manifest_line({"b.png", "S1", "set", ClassLabel::NoPain, 1}) + "\n" +
        manifest_line({"c.ppm", "S2", "other", ClassLabel::NoPain, std::nullopt}) + "\n");
    const auto samples = load_manifest(good, 16);
    REQUIRE(samples.size() == 3);
    for (const auto& s : samples) {
        CHECK(s.image.shape() == Shape{1, 16, 16});
        for (double v : s.image.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    CHECK(samples[0].nfcs == 4);
    CHECK_FALSE(samples[2].nfcs.has_value());
    CHECK(load_manifest(good, 8, 3)[0].image.shape() == Shape{3, 8, 8});

    CHECK(load_manifest(write("empty.jsonl", ""), 16).empty());
    CHECK(ingestion_row(write("inconsistent.jsonl",
                              manifest_line({"a.png", "S1", "x", ClassLabel::Pain, 4}) + "\n" +
                                  manifest_line({"b.png", "S1", "x", ClassLabel::NoPain, 4}) + "\n")) == 2);
    CHECK(ingestion_row(write("missing.jsonl",
                              manifest_line({"nope.png", "S1", "x", ClassLabel::Pain, 4}) + "\n")) == 1);
    CHECK(ingestion_row(write("malformed.jsonl", "{\"image_path\": \"a.png\"\n")) == 1);
    CHECK(ingestion_row(write("badlabel.jsonl",
                              "{\"image_path\":\"a.png\",\"subject_id\":\"S\",\"source\":\"x\","
                              "\"hard_label\":\"maybe\",\"nfcs\":null}\n")) == 1);
    CHECK(ingestion_row(write("range.jsonl",
                              "{\"image_path\":\"a.png\",\"subject_id\":\"S\",\"source\":\"x\","
                              "\"hard_label\":\"pain\",\"nfcs\":7}\n")) == 1);
}

TEST_CASE("augmentation") {
    const auto sample = synthetic(1, 1, 24, 2).front();

    SUBCASE("degenerate ranges give identical copies") {
        const auto copies = augment(sample, AugmentationConfig::identity(20), 9);
        REQUIRE(copies.size() == 20);
        for (const auto& c : copies) {
            for (std::size_t i = 0; i < c.image.size(); ++i) {
                CHECK(std::abs(c.image[i] - sample.image[i]) <= 1e-12);
            }
            CHECK(c.hard_label == sample.hard_label);
            CHECK(c.nfcs == sample.nfcs);
            CHECK(c.subject_id == sample.subject_id);
        }
    }
    SUBCASE("brightness clamps to one") {
        AffineParams p;
        p.brightness = 1.10;
        const Tensor out = apply_affine(Tensor(Shape{1, 8, 8}, 1.0), p);
        for (double v : out.values()) CHECK(v == 1.0);
    }
    SUBCASE("default config keeps labels and range, is deterministic") {
        const auto a = augment(sample, AugmentationConfig{}, 4), b = augment(sample, AugmentationConfig{}, 4);
        REQUIRE(a.size() == 20);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].image == b[i].image);
            CHECK(a[i].hard_label == sample.hard_label);
            CHECK(a[i].nfcs == sample.nfcs);
            for (double v : a[i].image.values()) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
    SUBCASE("rotation of a single bright pixel") {
        const int S = 33;
        const double c = (S - 1) / 2.0;
        for (auto [px, py] : {std::pair{24, 16}, std::pair{16, 6}, std::pair{9, 22}}) {
            Tensor img(Shape{1, S, S});
            img.at(0, py, px) = 1.0;
            AffineParams p;
            p.rotation_deg = 30.0;
            const Tensor out = apply_affine(img, p);
            const auto it = std::max_element(out.values().begin(), out.values().end());
            const long idx = it - out.values().begin();
            const double ox = idx % S, oy = idx / S;
            // Counter-clockwise on screen with y pointing down.
            const double t = std::numbers::pi / 6;
            const double ex = c + (px - c) * std::cos(t) + (py - c) * std::sin(t);
            const double ey = c - (px - c) * std::sin(t) + (py - c) * std::cos(t);
            CHECK(std::hypot(ox - ex, oy - ey) <= 1.0);
        }
    }
    SUBCASE("horizontal flip mirrors columns") {
        Tensor img(Shape{1, 4, 4});
        img.at(0, 1, 0) = 1.0;
        AffineParams p;
        p.flip = true;
        CHECK(apply_affine(img, p).at(0, 1, 3) == doctest::Approx(1.0));
    }
}

TEST_CASE("subject-disjoint folds") {
    const auto samples = synthetic(30, 2, 16, 3);
    const FoldPlan plan = make_folds(samples, 10, 8);
    REQUIRE(plan.test_subjects.size() == 10);
    std::multiset<std::string> covered;
    for (int f = 0; f < 10; ++f) {
        const auto& test = plan.test_subjects[f];
        const auto& train = plan.train_subjects[f];
        CHECK(test.size() == 3);
        CHECK(test.size() + train.size() == 30);
        for (const auto& s : test) {
            covered.insert(s);
            CHECK(std::find(train.begin(), train.end(), s) == train.end());
        }
        const auto idx = fold_indices(samples, plan, f);
        CHECK(idx.test.size() == 6);
        CHECK(idx.train.size() == 54);
        bool pain = false, no_pain = false;
        for (std::size_t i : idx.test) {
            pain = pain || samples[i].hard_label == ClassLabel::Pain;
            no_pain = no_pain || samples[i].hard_label == ClassLabel::NoPain;
        }
        CHECK(pain);
        CHECK(no_pain);
    }
    CHECK(covered.size() == 30);
    CHECK(std::set<std::string>(covered.begin(), covered.end()).size() == 30);

    const FoldPlan again = make_folds(samples, 10, 8);
    CHECK(again.test_subjects == plan.test_subjects);
    CHECK_FALSE(make_folds(samples, 10, 9).test_subjects == plan.test_subjects);

    const auto uneven = make_folds(synthetic(23, 1, 16, 1), 10, 2);
    for (int f = 0; f < 10; ++f) CHECK(uneven.test_subjects[f].size() == (f < 3 ? 3u : 2u));
    CHECK_THROWS_AS(make_folds(synthetic(5, 1, 16, 1), 10, 1), ConfigError);
}
