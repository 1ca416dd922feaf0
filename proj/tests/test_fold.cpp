#include <doctest.h>

#include <random>
#include <string>

#include "oracles.hpp"
#include "vseg/fold.hpp"

using namespace vseg;

namespace {

Array2D random_window(std::size_t s, std::size_t w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Array2D x(s, w);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    return x;
}

std::string error_of(std::size_t s, std::size_t w) {
    try {
        FoldGeometry g(s, w);
    } catch (const DomainError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("geometry sizes") {
    CHECK(geometry(8, 8192).n() == 256);
    CHECK(geometry(8, 2048).n() == 128);
    CHECK(geometry(8, 512).n() == 64);
    CHECK(geometry(2, 8).n() == 4);
    CHECK(geometry(1, 1).n() == 1);
    CHECK(geometry(8, 8192).patches() == 32);
}

TEST_CASE("invalid geometries name the broken constraint") {
    CHECK(error_of(8, 1000).find("must be an integer") != std::string::npos);
    CHECK(error_of(3, 5).find("must be an integer") != std::string::npos);
    CHECK(error_of(4, 1).find("divisible by S") != std::string::npos);
    CHECK(error_of(9, 1).find("divisible by S") != std::string::npos);
    CHECK(error_of(0, 8).find("positive") != std::string::npos);
}

TEST_CASE("fold matches the index-map oracle") {
    for (std::size_t n = 1; n <= 12; ++n)
        for (std::size_t s = 1; s <= n; ++s) {
            if (n % s != 0) continue;
            const std::size_t w = n * n / s;
            const FoldGeometry g(s, w);
            const Array2D x = random_window(s, w, n * 100 + s);
            CHECK(fold(x, g) == oracle::fold(x, s, w));
            CHECK(unfold_to_channels(fold(x, g), g) == x);
        }
}

TEST_CASE("image coordinates agree with fold") {
    const FoldGeometry g(4, 64);
    const Array2D x = random_window(4, 64, 3);
    const Array2D img = fold(x, g);
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t t = 0; t < 64; ++t) CHECK(img(g.image_row(c, t), g.image_col(t)) == x(c, t));
}

TEST_CASE("unfold_to_time sums channels") {
    const FoldGeometry g(8, 512);
    const Array2D x = random_window(8, 512, 11);
    const Eigen::RowVectorXd t = unfold_to_time(fold(x, g), g);
    REQUIRE(t.size() == 512);
    for (Eigen::Index i = 0; i < 512; ++i) CHECK(t(i) == doctest::Approx(x.col(i).sum()).epsilon(1e-12));
}

TEST_CASE("shape mismatches are rejected") {
    const FoldGeometry g(8, 512);
    CHECK_THROWS_AS(fold(Array2D::Zero(8, 511), g), DomainError);
    CHECK_THROWS_AS(unfold_to_channels(Array2D::Zero(63, 64), g), DomainError);
}
