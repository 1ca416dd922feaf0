#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "vseg/train.hpp"
#include "vseg/unet.hpp"

using namespace vseg;

namespace {

// Weights + biases of every conv, written out by hand for depth 1.
std::size_t depth1_count(std::size_t b, std::size_t per) {
    auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return in * out * k * k + out; };
    std::size_t total = 0;
    for (std::size_t i = 0; i < per; ++i) total += conv(i == 0 ? 1 : b, b, 3);
    for (std::size_t i = 0; i < per; ++i) total += conv(i == 0 ? b : 2 * b, 2 * b, 3);
    for (std::size_t i = 0; i < per; ++i) total += conv(i == 0 ? 3 * b : b, b, 3);
    return total + conv(b, 6, 1);
}

}  // namespace

TEST_CASE("parameter layout size") {
    CHECK(UNet({1, 2, 1, 6, 2}, 0).parameter_count() == 448);
    CHECK(UNet({1, 2, 1, 6, 2}, 0).parameter_count() == depth1_count(2, 2));
    CHECK(UNet({1, 4, 1, 6, 1}, 0).parameter_count() == depth1_count(4, 1));
    CHECK(UNet({1, 3, 1, 6, 3}, 0).parameter_count() == depth1_count(3, 3));
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(UNet({0, 2, 1, 6, 2}, 0), DomainError);
    CHECK_THROWS_AS(UNet({1, 2, 2, 6, 2}, 0), DomainError);
    CHECK_THROWS_AS(UNet({1, 2, 1, 5, 2}, 0), DomainError);
    CHECK_THROWS_AS(UNet({1, 2, 1, 6, 2}, std::vector<double>(10)), DomainError);
}

TEST_CASE("forward output is a per-pixel distribution") {
    const UNet net({2, 3, 1, 6, 2}, 9);
    const auto batch = oracle::random_batch(1, 16, 2);
    const MaskStack m = net.segment(batch[0].image);
    CHECK(m.n() == 16);
    CHECK(m.max_partition_error() < 1e-12);
    CHECK_THROWS_AS(net.segment(Array2D::Zero(14, 14)), DomainError);
    CHECK_THROWS_AS(net.segment(Array2D::Zero(16, 8)), DomainError);
}

TEST_CASE("initialisation is seeded") {
    CHECK(UNet({2, 2, 1, 6, 1}, 5).parameters() == UNet({2, 2, 1, 6, 1}, 5).parameters());
    CHECK(UNet({2, 2, 1, 6, 1}, 5).parameters() != UNet({2, 2, 1, 6, 1}, 6).parameters());
}

TEST_CASE("analytic gradients match central differences") {
    SUBCASE("depth 1, base 2") {
        const UNet net = oracle::jittered(UNet({1, 2, 1, 6, 2}, 17), 1);
        const auto r = oracle::gradient_check(net, oracle::random_batch(2, 8, 5), 1e-5);
        CHECK(r.checked == net.parameter_count());
        CHECK(r.max_rel_error <= 1e-4);
    }
    SUBCASE("depth 2, one conv per block") {
        const UNet net = oracle::jittered(UNet({2, 2, 1, 6, 1}, 23), 2);
        const auto r = oracle::gradient_check(net, oracle::random_batch(1, 8, 6), 1e-5);
        CHECK(r.max_rel_error <= 1e-4);
    }
}

TEST_CASE("gradients do not depend on the thread count") {
    const UNet net({2, 2, 1, 6, 2}, 3);
    const auto batch = oracle::random_batch(5, 8, 1);
    std::vector<double> a, b;
    const double la = loss_and_gradient(net, batch, 1e-6, a, 1);
    const double lb = loss_and_gradient(net, batch, 1e-6, b, 3);
    CHECK(la == lb);
    CHECK(a == b);
}

TEST_CASE("weights file round trip and errors") {
    const auto path = std::filesystem::temp_directory_path() / "vseg_test_model.vsgw";
    const UNet net({2, 3, 1, 6, 1}, 4);
    save_model(path, net);
    const UNet back = load_model(path);
    CHECK(back.spec() == net.spec());
    CHECK(back.parameters() == net.parameters());
    CHECK(std::filesystem::file_size(path) == 4 + 1 + 5 * 2 + 8 + 8 * net.parameter_count());

    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("truncated"), FormatError);
    {
        std::ofstream out(path, std::ios::binary);
        out << "XXXX";
    }
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("not a VSGW file"), FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("cosine schedule with warm restarts") {
    TrainConfig cfg;
    cfg.lr_max = 1e-5;
    cfg.lr_min = 1e-6;
    cfg.anneal_period_epochs = 25;
    CHECK(cosine_lr(cfg, 0) == doctest::Approx(1e-5));
    CHECK(cosine_lr(cfg, 25) == doctest::Approx(1e-5));
    CHECK(cosine_lr(cfg, 50) == doctest::Approx(1e-5));
    CHECK(cosine_lr(cfg, 12) == doctest::Approx(1e-6 + 9e-6 * 0.5 * (1 + std::cos(M_PI * 12 / 25))));
    for (int e = 1; e < 25; ++e) CHECK(cosine_lr(cfg, e) < cosine_lr(cfg, e - 1));
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.lr_min = cfg.lr_max;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = TrainConfig{};
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("training lowers the loss and is reproducible") {
    auto batch = oracle::random_batch(4, 8, 9);
    // Hard targets from a smooth rule so the problem is learnable.
    for (auto& s : batch) {
        std::array<Array2D, kNumClasses> planes;
        for (auto& p : planes) p = Array2D::Zero(8, 8);
        for (Eigen::Index i = 0; i < 64; ++i) planes[s.image.data()[i] > 0 ? 0 : 5].data()[i] = 1.0;
        s.target = MaskStack(planes);
    }
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.lr_max = 2e-2;
    cfg.lr_min = 1e-3;
    cfg.batch_size = 2;
    cfg.seed = 3;
    UNet a({1, 4, 1, 6, 1}, 1), b({1, 4, 1, 6, 1}, 1);
    const auto ra = train(a, batch, cfg);
    cfg.threads = 2;
    const auto rb = train(b, batch, cfg);
    CHECK(ra.loss_trace.size() == 40);
    CHECK(ra.loss_trace.back() < 0.7 * ra.loss_trace.front());
    CHECK(ra.loss_trace == rb.loss_trace);
    CHECK(a.parameters() == b.parameters());
    CHECK(ra.lr_trace.front() == cfg.lr_max);
}

TEST_CASE("training rejects mixed geometries") {
    auto batch = oracle::random_batch(1, 8, 1);
    const auto other = oracle::random_batch(1, 16, 2);
    batch.push_back(other[0]);
    UNet net({1, 2, 1, 6, 1}, 0);
    CHECK_THROWS_AS(train(net, batch, TrainConfig{}), DomainError);
    CHECK_THROWS_AS(train(net, std::span<const TrainSample>{}, TrainConfig{}), DomainError);
}
