#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "painscope/errors.hpp"
#include "painscope/metrics.hpp"

using namespace painscope;

namespace {

PredictionRecord rec(double c, ClassLabel y) {
    return {c, y, 0, "S"};
}

std::vector<PredictionRecord> counts(int tp, int fp, int fn, int tn) {
    std::vector<PredictionRecord> r;
    for (int i = 0; i < tp; ++i) r.push_back(rec(0.8, ClassLabel::Pain));
    for (int i = 0; i < fp; ++i) r.push_back(rec(0.7, ClassLabel::NoPain));
    for (int i = 0; i < fn; ++i) r.push_back(rec(0.2, ClassLabel::Pain));
    for (int i = 0; i < tn; ++i) r.push_back(rec(0.1, ClassLabel::NoPain));
    return r;
}

// Student-t two-tailed p by Simpson integration of the density over [0, |t|].
double oracle_p(double t, double dof) {
    const double norm = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) /
                        std::sqrt(dof * std::numbers::pi);
    auto pdf = [&](double x) { return norm * std::pow(1 + x * x / dof, -(dof + 1) / 2); };
    const int n = 200000;
    const double h = std::abs(t) / n;
    double s = pdf(0) + pdf(std::abs(t));
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
    return 1.0 - 2.0 * s * h / 3.0;
}

// Bin-by-bin scan with explicit interval tests.
double oracle_ece(const std::vector<PredictionRecord>& records, int K) {
    double e = 0.0;
    for (int k = 0; k < K; ++k) {
        const double lo = static_cast<double>(k) / K, hi = static_cast<double>(k + 1) / K;
        double conf = 0.0;
        std::size_t n = 0, pos = 0;
        for (const auto& r : records) {
            const double c = r.confidence_pain;
            const bool inside = (lo <= c && c < hi) || (k == K - 1 && c == 1.0);
            if (!inside) continue;
            conf += c;
            ++n;
            pos += r.true_label == ClassLabel::Pain;
        }
        if (n == 0) continue;
        const double mean = conf / static_cast<double>(n);
        const double freq = static_cast<double>(pos) / static_cast<double>(n);
        e += static_cast<double>(n) / static_cast<double>(records.size()) * std::abs(freq - mean);
    }
    return e;
}

std::vector<PredictionRecord> calibrated_stream(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<PredictionRecord> r;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = u(gen);
        r.push_back(rec(c, u(gen) < c ? ClassLabel::Pain : ClassLabel::NoPain));
    }
    return r;
}

} // namespace

TEST_CASE("classification metrics") {
    const auto m = classification_metrics(counts(3, 1, 2, 4));
    CHECK(m.tp == 3);
    CHECK(m.fp == 1);
    CHECK(m.fn == 2);
    CHECK(m.tn == 4);
    CHECK(m.precision == doctest::Approx(0.75));
    CHECK(m.recall == doctest::Approx(0.6));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.accuracy == doctest::Approx(0.7));
    CHECK(std::abs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall)) <= 1e-12);

    const auto perfect = classification_metrics(counts(4, 0, 0, 5));
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);

    const auto none = classification_metrics(counts(0, 0, 3, 2));
    CHECK(none.precision == 0.0);
    CHECK(none.precision_undefined);
    CHECK(none.recall == 0.0);
    CHECK_FALSE(none.recall_undefined);
    CHECK(none.f1 == 0.0);

    const auto no_pain = classification_metrics(counts(0, 0, 0, 3));
    CHECK(no_pain.recall_undefined);
    CHECK(no_pain.f1_undefined);

    // 0.5 counts as Pain.
    const std::vector<PredictionRecord> tie{rec(0.5, ClassLabel::Pain)};
    CHECK(classification_metrics(tie).tp == 1);
    CHECK_THROWS_AS(classification_metrics({}), ContractError);

    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<PredictionRecord> r;
        for (int i = 0; i < 30; ++i) r.push_back(rec(u(gen), u(gen) < 0.5 ? ClassLabel::Pain : ClassLabel::NoPain));
        const auto x = classification_metrics(r);
        if (x.precision > 0 && x.recall > 0) {
            CHECK(std::abs(x.f1 - 2 * x.precision * x.recall / (x.precision + x.recall)) <= 1e-12);
        }
    }
}

TEST_CASE("paired t-test") {
    const std::vector<double> a{0.8, 0.7, 0.9};
    const auto same = paired_t_test(a, a);
    CHECK(same.t_statistic == 0.0);
    CHECK(same.p_value == 1.0);
    CHECK_FALSE(same.degenerate);

    const std::vector<double> ones{2, 2, 2, 2}, zeros{1, 1, 1, 1};
    const auto flat = paired_t_test(ones, zeros);
    CHECK(flat.degenerate);
    CHECK(flat.p_value == 0.0);

    const std::vector<double> d{0.02, 0.05, 0.01, 0.04, 0.03}, z(5, 0.0);
    const auto r = paired_t_test(d, z);
    CHECK(r.degrees_of_freedom == 4);
    CHECK(r.mean_difference == doctest::Approx(0.03));
    const double sd = std::sqrt(0.001 / 4);
    CHECK(std::abs(sd - 0.0158) < 1e-4);
    CHECK(std::abs(r.t_statistic - 0.03 / (sd / std::sqrt(5.0))) <= 1e-9);
    CHECK(std::abs(r.t_statistic - 4.24) < 0.01);
    CHECK(std::abs(r.p_value - oracle_p(r.t_statistic, 4)) <= 1e-6);

    const auto flipped = paired_t_test(z, d);
    CHECK(flipped.t_statistic == doctest::Approx(-r.t_statistic));
    CHECK(flipped.p_value == doctest::Approx(r.p_value));

    for (double t : {0.3, 1.0, 2.1, 5.5}) {
        for (double dof : {1.0, 2.0, 9.0, 30.0}) {
            CHECK(std::abs(student_t_two_tailed_p(t, dof) - oracle_p(t, dof)) <= 1e-6);
        }
    }
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(paired_t_test(one, one), ContractError);
    CHECK_THROWS_AS(paired_t_test(a, d), ContractError);
}

TEST_CASE("confidence bins") {
    CHECK(confidence_bin(0.0, 10) == 0);
    CHECK(confidence_bin(0.1, 10) == 1);
    CHECK(confidence_bin(std::nextafter(0.1, 0.0), 10) == 0);
    CHECK(confidence_bin(0.3, 10) == 3);
    CHECK(confidence_bin(0.7, 10) == 7);
    CHECK(confidence_bin(1.0, 10) == 9);
    for (int k = 0; k < 10; ++k) CHECK(confidence_bin(static_cast<double>(k) / 10, 10) == k);

    std::vector<PredictionRecord> r{rec(0.1, ClassLabel::Pain)};
    CHECK(confidence_histogram(r)[1] == 1);
    r.assign(7, rec(0.95, ClassLabel::Pain));
    const auto h = confidence_histogram(r);
    CHECK(h[9] == 7);

    const auto uniform = calibrated_stream(10000, 8);
    std::size_t total = 0;
    for (std::size_t c : confidence_histogram(uniform)) {
        CHECK(c >= 850);
        CHECK(c <= 1150);
        total += c;
    }
    CHECK(total == 10000);
    CHECK_THROWS_AS(confidence_histogram({}), ContractError);
}

TEST_CASE("calibration curve") {
    const std::vector<PredictionRecord> top(5, rec(1.0, ClassLabel::Pain));
    const auto t = calibration_curve(top);
    REQUIRE(t.curve().size() == 1);
    CHECK(t.curve()[0].mean_confidence == 1.0);
    CHECK(t.curve()[0].positive_frequency == 1.0);
    CHECK(t.bins[9].count == 5);
    CHECK(t.ece == 0.0);

    const std::vector<PredictionRecord> two{rec(0.05, ClassLabel::NoPain), rec(0.95, ClassLabel::Pain)};
    const auto c = calibration_curve(two);
    REQUIRE(c.bins.size() == 10);
    CHECK(c.bins[0].count == 1);
    CHECK(c.bins[9].count == 1);
    CHECK(c.bins[0].positive_frequency == 0.0);
    CHECK(c.bins[9].positive_frequency == 1.0);
    CHECK(c.curve().size() == 2);
    CHECK(c.ece == doctest::Approx(0.05));

    const std::vector<PredictionRecord> over(40, rec(0.9, ClassLabel::NoPain));
    CHECK(ece(over) == doctest::Approx(0.9).epsilon(1e-15));

    const auto stream = calibrated_stream(100000, 17);
    const auto report = calibration_curve(stream);
    CHECK(report.ece <= 0.02);
    std::size_t total = 0;
    for (const auto& b : report.curve()) {
        CHECK(std::abs(b.positive_frequency - b.mean_confidence) <= 0.02);
        total += b.count;
    }
    CHECK(total == stream.size());
    CHECK(ece_from_bins(report.bins, report.total) == report.ece);

    const std::vector<PredictionRecord> bad{rec(1.2, ClassLabel::Pain)};
    CHECK_THROWS_AS(calibration_curve(bad), ContractError);
    CHECK_THROWS_AS(ece({}), ContractError);
}

TEST_CASE("ece equals a brute-force binning oracle") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> size(1, 200), grid(0, 10);
    for (int set = 0; set < 1000; ++set) {
        std::vector<PredictionRecord> r;
        const int n = size(gen);
        for (int i = 0; i < n; ++i) {
            // A fifth of the confidences sit exactly on bin edges.
            const double c = u(gen) < 0.2 ? grid(gen) / 10.0 : u(gen);
            r.push_back(rec(c, u(gen) < 0.5 ? ClassLabel::Pain : ClassLabel::NoPain));
        }
        const int K = set % 3 == 0 ? 10 : 5 + set % 11;
        CHECK(ece(r, K) == oracle_ece(r, K));
        const double e = ece(r, K);
        CHECK(e >= 0.0);
        CHECK(e <= 1.0);
        std::shuffle(r.begin(), r.end(), gen);
        CHECK(std::abs(ece(r, K) - e) <= 1e-12);
    }
}
