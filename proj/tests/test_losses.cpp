#include <catch_amalgamated.hpp>

#include <random>

#include "textkp/losses.hpp"

using namespace textkp;

namespace {

using Planes = std::vector<std::vector<double>>;

Planes random_planes(size_t n, size_t len, std::mt19937_64& rng, double lo = 0.05,
                     double hi = 0.95) {
    std::uniform_real_distribution<double> val(lo, hi);
    Planes planes(n, std::vector<double>(len));
    for (auto& plane : planes)
        for (double& v : plane) v = val(rng);
    return planes;
}

} // namespace

TEST_CASE("single positive pixel keypoint loss") {
    const Planes pred{{0.5}};
    const Planes target{{1.0}};
    const double expected = -0.25 * std::log(0.5); // (1-p)^2 log p, N = 1
    CHECK(keypoint_loss(pred, target).value == Catch::Approx(expected).epsilon(1e-6));
}

TEST_CASE("perfect prediction gives near-zero keypoint loss") {
    const Planes target{{1.0, 0.0, 0.0}};
    const auto out = keypoint_loss(target, target);
    CHECK(out.value >= 0.0);
    CHECK(out.value < 1e-4);
}

TEST_CASE("keypoint loss requires a positive pixel") {
    CHECK_THROWS_AS(keypoint_loss({{0.5}}, {{0.5}}), LossError);
}

TEST_CASE("single pixel mask loss is ln 2 at p = 0.5") {
    CHECK(mask_loss({0.5}, {1.0}).value == Catch::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(mask_loss({0.5}, {0.0}).value == Catch::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("smooth l1 value and slope") {
    CHECK(smooth_l1(0.5) == Catch::Approx(0.125));
    CHECK(smooth_l1(2.0) == Catch::Approx(1.5));
    CHECK(smooth_l1(-2.0) == Catch::Approx(1.5));
    CHECK(smooth_l1_grad(0.5) == Catch::Approx(0.5));
    CHECK(smooth_l1_grad(3.0) == 1.0);
    CHECK(smooth_l1_grad(-3.0) == -1.0);
}

TEST_CASE("losses are non-negative on random inputs") {
    std::mt19937_64 rng(51);
    for (int it = 0; it < 10; ++it) {
        Planes pred = random_planes(3, 64, rng);
        Planes target = random_planes(3, 64, rng, 0.0, 0.9);
        target[0][5] = 1.0;
        CHECK(keypoint_loss(pred, target).value >= 0.0);
        CHECK(mask_loss(pred[0], target[0]).value >= 0.0);
    }
}

TEST_CASE("keypoint gradient matches finite differences") {
    std::mt19937_64 rng(53);
    std::uniform_int_distribution<size_t> pick(0, 63);
    for (int it = 0; it < 10; ++it) {
        Planes pred = random_planes(3, 64, rng, 0.1, 0.9);
        Planes target = random_planes(3, 64, rng, 0.0, 0.8);
        target[it % 3][pick(rng)] = 1.0;
        target[2][pick(rng)] = 1.0;
        const auto out = keypoint_loss(pred, target);
        const double h = 1e-4;
        for (int probe = 0; probe < 8; ++probe) {
            const size_t c = probe % 3, i = pick(rng);
            Planes lo = pred, hi = pred;
            lo[c][i] -= h;
            hi[c][i] += h;
            const double fd =
                (keypoint_loss(hi, target).value - keypoint_loss(lo, target).value) / (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(out.grad[c][i]), 1e-3});
            CHECK(std::abs(fd - out.grad[c][i]) / scale < 1e-4);
        }
    }
}

TEST_CASE("mask gradient matches finite differences") {
    std::mt19937_64 rng(57);
    std::uniform_int_distribution<size_t> pick(0, 63);
    Planes pred = random_planes(1, 64, rng, 0.1, 0.9);
    std::vector<double> target(64);
    for (size_t i = 0; i < 64; ++i) target[i] = (i % 3 == 0) ? 1.0 : 0.0;
    const auto out = mask_loss(pred[0], target);
    const double h = 1e-4;
    for (int probe = 0; probe < 10; ++probe) {
        const size_t i = pick(rng);
        auto lo = pred[0], hi = pred[0];
        lo[i] -= h;
        hi[i] += h;
        const double fd = (mask_loss(hi, target).value - mask_loss(lo, target).value) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(out.grad[0][i]), 1e-3});
        CHECK(std::abs(fd - out.grad[0][i]) / scale < 1e-4);
    }
}

TEST_CASE("link gradient matches finite differences and is zero when unsupervised") {
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    Planes pred(8, std::vector<double>(16)), target(8, std::vector<double>(16));
    for (auto& plane : pred)
        for (double& v : plane) v = val(rng);
    for (auto& plane : target)
        for (double& v : plane) v = val(rng);
    std::vector<std::vector<uint8_t>> valid(4, std::vector<uint8_t>(16, 0));
    for (int d = 0; d < 4; ++d)
        for (size_t i = 0; i < 16; i += 2) valid[d][i] = 1;

    const auto out = link_loss(pred, target, valid);
    CHECK(out.value >= 0.0);
    const double h = 1e-5;
    for (int c = 0; c < 8; ++c)
        for (size_t i : {size_t(0), size_t(1), size_t(6), size_t(7)}) {
            Planes lo = pred, hi = pred;
            lo[c][i] -= h;
            hi[c][i] += h;
            const double fd =
                (link_loss(hi, target, valid).value - link_loss(lo, target, valid).value) / (2 * h);
            if (!valid[c / 2][i]) {
                CHECK(out.grad[c][i] == 0.0);
                CHECK(fd == Catch::Approx(0.0).margin(1e-12));
            } else {
                const double scale = std::max({std::abs(fd), std::abs(out.grad[c][i]), 1e-3});
                CHECK(std::abs(fd - out.grad[c][i]) / scale < 1e-3);
            }
        }
}

TEST_CASE("link loss denominator counts both plane entries per valid pixel") {
    Planes pred(8, std::vector<double>(1, 0.0)), target(8, std::vector<double>(1, 0.5));
    std::vector<std::vector<uint8_t>> valid(4, std::vector<uint8_t>(1, 0));
    valid[0][0] = 1; // one valid pixel supervises planes 0 and 1
    // errors of 0.5 in planes 0 and 1, smooth l1 = 0.125 each, mean over 2 entries
    CHECK(link_loss(pred, target, valid).value == Catch::Approx(0.125));
}

TEST_CASE("link loss without supervision is an error") {
    Planes pred(8, std::vector<double>(4, 0.0)), target = pred;
    std::vector<std::vector<uint8_t>> valid(4, std::vector<uint8_t>(4, 0));
    CHECK_THROWS_AS(link_loss(pred, target, valid), LossError);
}

TEST_CASE("total loss composition") {
    CHECK(total_loss(1.0, 1.0, 1.0) == Catch::Approx(2.1));
    LossConfig cfg;
    cfg.lambda_mask = 0.5;
    cfg.lambda_link = 2.0;
    CHECK(total_loss(1.0, 2.0, 3.0, cfg) == Catch::Approx(8.0));
}

TEST_CASE("pairwise sum is stable under block size") {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    std::vector<double> v(1000);
    for (double& x : v) x = val(rng);
    const double a = detail::pairwise_sum(v);
    const double b = detail::pairwise_sum(std::span<const double>(v));
    CHECK(a == b);
    double naive = 0.0;
    for (double x : v) naive += x;
    CHECK(a == Catch::Approx(naive).margin(1e-9));
}
