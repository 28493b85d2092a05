#include <algorithm>
#include <cstring>
#include <random>

#include "doctest.h"
#include "painscope/errors.hpp"
#include "painscope/labels.hpp"
#include "painscope/rng.hpp"
#include "support.hpp"

using namespace painscope;
using testing::random_tensor;

namespace {

ModelConfig tiny() {
    ModelConfig c = ModelConfig::compact(12);
    c.dense_width = 6;
    return c;
}

Checkpoint checkpoint_of(const Model& m) {
    return Checkpoint{m, 7, 0.25, {{"seed", "3"}, {"fold", "1"}, {"label_mode", "hard"}}};
}

} // namespace

TEST_CASE("config validation and text round-trip") {
    ModelConfig ref;
    CHECK(ref.input_size == 120);
    CHECK_NOTHROW(ref.validate());
    CHECK(ModelConfig::from_text(ref.to_text()) == ref);
    CHECK(ModelConfig::from_text(tiny().to_text()) == tiny());

    ModelConfig collapsed;
    collapsed.input_size = 64;
    collapsed.large_kernel = 41;
    collapsed.same_padding = false;
    CHECK_THROWS_AS(collapsed.validate(), ConfigError);
    CHECK_THROWS_AS(Model::build(collapsed, 1), ConfigError);

    ModelConfig even = tiny();
    even.small_kernel = 4;
    CHECK_THROWS_AS(even.validate(), ConfigError);
    CHECK_THROWS_AS(ModelConfig::from_text("input_size=12\nbogus=1\n"), ConfigError);
}

TEST_CASE("build is deterministic and He-uniform") {
    const Model a = Model::build(tiny(), 42), b = Model::build(tiny(), 42), c = Model::build(tiny(), 43);
    REQUIRE(a.parameters().size() == 10);
    bool differs = false;
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        CHECK(a.parameters()[i].tensor == b.parameters()[i].tensor);
        differs = differs || !(a.parameters()[i].tensor == c.parameters()[i].tensor);
    }
    CHECK(differs);
    for (const auto& p : a.parameters()) {
        if (p.name.ends_with(".bias")) {
            for (double v : p.tensor.values()) CHECK(v == 0.0);
        } else {
            std::size_t fan_in = 1;
            for (std::size_t d = 1; d < p.tensor.rank(); ++d) fan_in *= p.tensor.dim(d);
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
            for (double v : p.tensor.values()) CHECK(std::abs(v) <= limit);
        }
    }
    CHECK(a.parameter("merge.weight").dim(0) == static_cast<std::size_t>(tiny().merge_filters));
    CHECK(a.parameter("head.weight").dim(0) == 2);
}

TEST_CASE("predict on the reference shape") {
    const Model m = Model::build(ModelConfig{}, 1);
    std::mt19937_64 gen(1);
    const Tensor image = random_tensor({1, 120, 120}, gen, 0, 1);
    const LabelDistribution p = predict(m, image);
    CHECK(p.p_no_pain > 0.0);
    CHECK(p.p_pain > 0.0);
    CHECK(std::abs(p.p_no_pain + p.p_pain - 1.0) <= 1e-9);
    CHECK(predict(m, image) == p);
    CHECK_THROWS_AS(predict(m, Tensor(Shape{1, 64, 64})), DimensionError);
}

TEST_CASE("dropout 0 makes train and eval forward identical") {
    ModelConfig c = tiny();
    c.dropout_rate = 0.0;
    const Model m = Model::build(c, 5);
    std::mt19937_64 gen(2);
    const Tensor image = random_tensor({1, 12, 12}, gen, 0, 1);
    Rng rng(9);
    Tape t1, t2;
    const auto e = m.forward(t1, t1.constant(image), Mode::Eval);
    const auto tr = m.forward(t2, t2.constant(image), Mode::Train, &rng);
    CHECK(t1.value(e.probabilities) == t2.value(tr.probabilities));
    CHECK(t1.value(e.last_conv).shape() ==
          Shape{static_cast<std::size_t>(c.merge_filters), 6, 6});
}

TEST_CASE("classify threshold") {
    CHECK(classify({0.4, 0.6}) == ClassLabel::Pain);
    CHECK(classify({0.6, 0.4}) == ClassLabel::NoPain);
    CHECK(classify({0.5, 0.5}) == ClassLabel::Pain);
    CHECK(classify({0.3, 0.7}, 0.7) == ClassLabel::Pain);
    CHECK(classify({0.3, 0.7}, std::nextafter(0.7, 1.0)) == ClassLabel::NoPain);
    CHECK_THROWS_AS(classify({0.5, 0.5}, 1.5), ContractError);
    CHECK_THROWS_AS(classify({0.5, 0.5}, -0.1), ContractError);
}

TEST_CASE("checkpoint round-trip") {
    const Model m = Model::build(tiny(), 3);
    const auto dir = testing::temp_dir("ckpt");
    const std::string path = (dir / "m.ckpt").string();
    save_checkpoint(checkpoint_of(m), path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.model.config() == m.config());
    CHECK(back.epoch == 7);
    CHECK(back.test_loss == 0.25);
    CHECK(back.metadata.at("label_mode") == "hard");

    std::mt19937_64 gen(4);
    for (int i = 0; i < 50; ++i) {
        const Tensor x = random_tensor({1, 12, 12}, gen, 0, 1);
        const auto a = predict(m, x), b = predict(back.model, x);
        CHECK(std::abs(a.p_pain - b.p_pain) <= 1e-6);
        CHECK(classify(a) == classify(b));
    }
    // Stored weights are float32; a second trip is exact.
    CHECK(serialize_checkpoint(back) == serialize_checkpoint(load_checkpoint(path)));
}

TEST_CASE("checkpoint format errors name the field") {
    const auto bytes = serialize_checkpoint(checkpoint_of(Model::build(tiny(), 3)));
    auto field_of = [](const std::vector<unsigned char>& b) -> std::string {
        try {
            deserialize_checkpoint(b);
        } catch (const FormatError& e) {
            return e.field();
        }
        return "";
    };
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(field_of(bad_magic) == "magic");

    auto bad_version = bytes;
    bad_version[8] = 99;
    CHECK(field_of(bad_version) == "version");

    for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
        const std::vector<unsigned char> truncated(bytes.begin(), bytes.begin() + static_cast<long>(cut));
        CHECK_THROWS_AS(deserialize_checkpoint(truncated), FormatError);
    }

    auto extra = bytes;
    extra.push_back(0);
    CHECK(field_of(extra) == "trailer");

    // Bump the first dimension of hidden.weight's shape record.
    const std::string name = "hidden.weight";
    auto it = std::search(bytes.begin(), bytes.end(), name.begin(), name.end());
    REQUIRE(it != bytes.end());
    auto bad_shape = bytes;
    const std::size_t dim0 = static_cast<std::size_t>(it - bytes.begin()) + name.size() + 4;
    bad_shape[dim0] += 1;
    CHECK(field_of(bad_shape) == name);

    CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/x.ckpt"), IoError);
}

TEST_CASE("composed gradients on a small model") {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 5; ++trial) {
        const Model m = Model::build(tiny(), static_cast<std::uint64_t>(trial));
        const Tensor x = random_tensor({1, 12, 12}, gen, 0, 1);
        const auto r = testing::check_model_gradients(m, x, lsr_smooth(ClassLabel::Pain, 0.3), gen, 5);
        CHECK(r.max_error <= 1e-3);
        CHECK(r.checked >= r.skipped_kinks * 9);
    }
}
