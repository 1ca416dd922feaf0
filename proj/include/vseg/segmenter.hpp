#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "vseg/core.hpp"

namespace vseg {

/// One N x N mask per ClassLabel, values in [0, 1].
class MaskStack {
public:
    MaskStack() = default;
    explicit MaskStack(std::size_t n);  // all zero
    explicit MaskStack(std::array<Array2D, kNumClasses> masks);

    std::size_t n() const { return static_cast<std::size_t>(masks_[0].rows()); }
    const Array2D& operator[](ClassLabel c) const { return masks_[static_cast<std::size_t>(c)]; }
    const Array2D& operator[](std::size_t c) const { return masks_[c]; }
    Array2D& operator[](std::size_t c) { return masks_[c]; }
    const std::array<Array2D, kNumClasses>& masks() const { return masks_; }

    /// Max |1 - sum over classes| over all pixels.
    double max_partition_error() const;
    bool operator==(const MaskStack& other) const;

private:
    std::array<Array2D, kNumClasses> masks_;
};

/// Anything that turns a folded image into class masks.
class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual MaskStack segment(const Array2D& image) const = 0;
};

/// Mean over the six classes of 1 - (2*sum(p*t) + s) / (sum(p) + sum(t) + s).
double dice_loss(const MaskStack& pred, const MaskStack& target, double smoothing = 1e-6);

/// Dice loss over a batch treated as one stack: sums run over every pixel of every item.
double dice_loss(std::span<const MaskStack> pred, std::span<const MaskStack> target, double smoothing = 1e-6);

/// d loss / d pred for the batch form above; one gradient stack per item.
std::vector<std::array<Array2D, kNumClasses>> dice_loss_gradient(std::span<const MaskStack> pred,
                                                                 std::span<const MaskStack> target,
                                                                 double smoothing = 1e-6);

// VSGM: "VSGM", u8 version=1, u16 class_count, u32 n, class_count*n*n f32 LE (class-major, row-major).

/// Writes any number of N x N planes (fold output uses a single plane).
void write_mask_file(const std::filesystem::path& path, std::span<const Array2D> planes);
/// Reads planes verbatim; no range check.
std::vector<Array2D> read_mask_file(const std::filesystem::path& path);

void write_masks(const std::filesystem::path& path, const MaskStack& masks);

struct ImportedMasks {
    MaskStack masks;
    std::size_t clamped = 0;  // values pulled back into [0, 1]
};

/// Requires exactly six classes; clamps out-of-range values.
ImportedMasks import_masks(const std::filesystem::path& path);

}  // namespace vseg
