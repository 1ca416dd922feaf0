#pragma once

#include <cstddef>

#include "vseg/core.hpp"

namespace vseg {

/// Layout of the S x W <-> N x N folding. N*N == S*W and S divides N, so the
/// image is n/s patches of s rows each, stacked top to bottom in time order.
class FoldGeometry {
public:
    /// Validates both constraints; throws DomainError naming the violated one.
    FoldGeometry(std::size_t s, std::size_t w);

    std::size_t s() const { return s_; }
    std::size_t w() const { return w_; }
    std::size_t n() const { return n_; }
    std::size_t patches() const { return n_ / s_; }

    /// Image coordinates of channel c, time t.
    std::size_t image_row(std::size_t c, std::size_t t) const { return (t / n_) * s_ + c; }
    std::size_t image_col(std::size_t t) const { return t % n_; }

    bool operator==(const FoldGeometry&) const = default;

private:
    std::size_t s_;
    std::size_t w_;
    std::size_t n_;
};

/// N = sqrt(S*W); alias for the FoldGeometry constructor.
FoldGeometry geometry(std::size_t s, std::size_t w);

/// out[p*s + c][j] = in[c][p*n + j]
Array2D fold(const Array2D& window, const FoldGeometry& geom);

/// Exact inverse of fold.
Array2D unfold_to_channels(const Array2D& image, const FoldGeometry& geom);

/// Channel sum of unfold_to_channels, returned as a 1 x W row.
Eigen::RowVectorXd unfold_to_time(const Array2D& image, const FoldGeometry& geom);

}  // namespace vseg
