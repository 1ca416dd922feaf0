#include "vseg/segmenter.hpp"

#include <cmath>

#include "vseg/binio.hpp"

namespace vseg {

namespace {
constexpr std::string_view kMaskMagic = "VSGM";
constexpr std::uint8_t kMaskVersion = 1;
}  // namespace

MaskStack::MaskStack(std::size_t n) {
    for (auto& m : masks_) m = Array2D::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

MaskStack::MaskStack(std::array<Array2D, kNumClasses> masks) : masks_(std::move(masks)) {
    const auto n = masks_[0].rows();
    for (const auto& m : masks_) {
        if (m.rows() != n || m.cols() != n) throw DomainError("mask stack planes must all be N x N");
        if (!((m.array() >= 0.0) && (m.array() <= 1.0)).all()) throw DomainError("mask values must lie in [0, 1]");
    }
}

double MaskStack::max_partition_error() const {
    Array2D total = masks_[0];
    for (std::size_t c = 1; c < kNumClasses; ++c) total += masks_[c];
    return (total.array() - 1.0).abs().maxCoeff();
}

bool MaskStack::operator==(const MaskStack& other) const {
    for (std::size_t c = 0; c < kNumClasses; ++c)
        if (masks_[c].rows() != other.masks_[c].rows() || masks_[c] != other.masks_[c]) return false;
    return true;
}

namespace {

struct ClassSums {
    std::array<double, kNumClasses> inter{}, pred{}, target{};
};

ClassSums class_sums(std::span<const MaskStack> pred, std::span<const MaskStack> target) {
    if (pred.size() != target.size() || pred.empty()) throw DomainError("dice loss: batch sizes differ or are empty");
    ClassSums s;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].n() != target[i].n()) throw DomainError("dice loss: prediction and target shapes differ");
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            s.inter[c] += pred[i][c].cwiseProduct(target[i][c]).sum();
            s.pred[c] += pred[i][c].sum();
            s.target[c] += target[i][c].sum();
        }
    }
    return s;
}

}  // namespace

double dice_loss(std::span<const MaskStack> pred, std::span<const MaskStack> target, double smoothing) {
    const auto s = class_sums(pred, target);
    double loss = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c)
        loss += 1.0 - (2.0 * s.inter[c] + smoothing) / (s.pred[c] + s.target[c] + smoothing);
    return loss / static_cast<double>(kNumClasses);
}

double dice_loss(const MaskStack& pred, const MaskStack& target, double smoothing) {
    return dice_loss(std::span(&pred, 1), std::span(&target, 1), smoothing);
}

std::vector<std::array<Array2D, kNumClasses>> dice_loss_gradient(std::span<const MaskStack> pred,
                                                                 std::span<const MaskStack> target,
                                                                 double smoothing) {
    const auto s = class_sums(pred, target);
    std::vector<std::array<Array2D, kNumClasses>> grad(pred.size());
    const double inv_classes = 1.0 / static_cast<double>(kNumClasses);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double num = 2.0 * s.inter[c] + smoothing;
        const double den = s.pred[c] + s.target[c] + smoothing;
        // d/dp [1 - num/den] = -(2t*den - num) / den^2
        const double scale = -inv_classes / (den * den);
        for (std::size_t i = 0; i < pred.size(); ++i)
            grad[i][c] = scale * (2.0 * den * target[i][c].array() - num).matrix();
    }
    return grad;
}

void write_mask_file(const std::filesystem::path& path, std::span<const Array2D> planes) {
    if (planes.empty()) throw DomainError("mask file needs at least one plane");
    const auto n = planes[0].rows();
    binio::Writer w;
    w.put_bytes(kMaskMagic);
    w.put<std::uint8_t>(kMaskVersion);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(planes.size()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(n));
    for (const auto& p : planes) {
        if (p.rows() != n || p.cols() != n) throw DomainError("mask planes must all be N x N");
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c) w.put<float>(static_cast<float>(p(r, c)));
    }
    w.save(path);
}

std::vector<Array2D> read_mask_file(const std::filesystem::path& path) {
    binio::Reader r(binio::read_file(path), path.string());
    if (r.get_bytes(4, "magic") != kMaskMagic) r.fail("not a VSGM file");
    const auto version = r.get<std::uint8_t>("version");
    if (version != kMaskVersion) r.fail("unsupported VSGM version " + std::to_string(version));
    const auto classes = r.get<std::uint16_t>("class_count");
    const auto n = r.get<std::uint32_t>("n");
    if (classes == 0 || n == 0) r.fail("empty mask header");
    r.require(std::size_t{classes} * n * n * sizeof(float), "mask payload");
    std::vector<Array2D> planes(classes, Array2D(n, n));
    for (auto& p : planes)
        for (std::uint32_t i = 0; i < n; ++i)
            for (std::uint32_t j = 0; j < n; ++j) p(i, j) = r.get<float>("mask value");
    if (r.remaining() != 0) r.fail("trailing bytes after mask payload");
    return planes;
}

void write_masks(const std::filesystem::path& path, const MaskStack& masks) {
    write_mask_file(path, std::span<const Array2D>(masks.masks()));
}

ImportedMasks import_masks(const std::filesystem::path& path) {
    auto planes = read_mask_file(path);
    if (planes.size() != kNumClasses)
        throw FormatError(path.string() + ": expected 6 classes, found " + std::to_string(planes.size()));
    ImportedMasks out;
    std::array<Array2D, kNumClasses> masks;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        auto& p = planes[c];
        if (!p.allFinite()) throw FormatError(path.string() + ": non-finite mask value");
        out.clamped += static_cast<std::size_t>(((p.array() < 0.0) || (p.array() > 1.0)).count());
        masks[c] = p.cwiseMax(0.0).cwiseMin(1.0);
    }
    out.masks = MaskStack(std::move(masks));
    return out;
}

}  // namespace vseg
