#include "vseg/fold.hpp"

#include <cmath>
#include <string>

namespace vseg {

namespace {

std::size_t exact_isqrt(std::size_t v) {
    auto r = static_cast<std::size_t>(std::sqrt(static_cast<long double>(v)));
    while (r * r > v) --r;
    while ((r + 1) * (r + 1) <= v) ++r;
    return r;
}

void require_shape(const Array2D& a, std::size_t rows, std::size_t cols, const char* what) {
    if (static_cast<std::size_t>(a.rows()) != rows || static_cast<std::size_t>(a.cols()) != cols)
        throw DomainError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " array, got " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

}  // namespace

FoldGeometry::FoldGeometry(std::size_t s, std::size_t w) : s_(s), w_(w), n_(0) {
    if (s == 0 || w == 0) throw DomainError("invalid geometry: S and W must be positive");
    const std::size_t area = s * w;
    const std::size_t n = exact_isqrt(area);
    if (n * n != area)
        throw DomainError("invalid geometry: N = sqrt(S*W) must be an integer (S*W = " + std::to_string(area) +
                          " is not a perfect square)");
    if (n % s != 0)
        throw DomainError("invalid geometry: N = " + std::to_string(n) + " must be divisible by S = " +
                          std::to_string(s) + " to form S x N patches");
    n_ = n;
}

FoldGeometry geometry(std::size_t s, std::size_t w) { return FoldGeometry(s, w); }

Array2D fold(const Array2D& window, const FoldGeometry& geom) {
    require_shape(window, geom.s(), geom.w(), "fold");
    const auto s = static_cast<Eigen::Index>(geom.s());
    const auto n = static_cast<Eigen::Index>(geom.n());
    Array2D image(n, n);
    for (Eigen::Index p = 0; p < n / s; ++p) image.block(p * s, 0, s, n) = window.block(0, p * n, s, n);
    return image;
}

Array2D unfold_to_channels(const Array2D& image, const FoldGeometry& geom) {
    require_shape(image, geom.n(), geom.n(), "unfold");
    const auto s = static_cast<Eigen::Index>(geom.s());
    const auto n = static_cast<Eigen::Index>(geom.n());
    Array2D window(s, static_cast<Eigen::Index>(geom.w()));
    for (Eigen::Index p = 0; p < n / s; ++p) window.block(0, p * n, s, n) = image.block(p * s, 0, s, n);
    return window;
}

Eigen::RowVectorXd unfold_to_time(const Array2D& image, const FoldGeometry& geom) {
    return unfold_to_channels(image, geom).colwise().sum();
}

}  // namespace vseg
