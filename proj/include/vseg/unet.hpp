#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vseg/segmenter.hpp"

namespace vseg {

/// Shape of the built-in encoder/decoder segmenter.
struct ToyUNetSpec {
    int depth = 3;
    int base_channels = 8;
    int in_channels = 1;
    int out_channels = static_cast<int>(kNumClasses);
    int convs_per_block = 2;

    void validate() const;
    bool operator==(const ToyUNetSpec&) const = default;
};

/// Small UNet: per level `convs_per_block` 3x3 conv+ReLU, 2x2 max-pool down,
/// nearest 2x upsample + skip concatenation up, 1x1 head and per-pixel softmax.
///
/// Parameter layout (flat, in this order): encoder levels 0..depth-1, the
/// bottleneck, decoder levels depth-1..0, then the head. Each conv stores its
/// weights as [out][in][ky][kx] followed by its bias [out]. Decoder convs see
/// the upsampled channels first, then the skip channels.
class UNet final : public Segmenter {
public:
    /// Uniform fan-in (He) initialisation from `seed`, zero biases and a zero head.
    UNet(ToyUNetSpec spec, std::uint64_t seed);
    UNet(ToyUNetSpec spec, std::vector<double> parameters);

    const ToyUNetSpec& spec() const { return spec_; }
    std::size_t parameter_count() const { return params_.size(); }
    const std::vector<double>& parameters() const { return params_; }
    std::vector<double>& parameters() { return params_; }

    /// Throws DomainError unless the image is N x N with N divisible by 2^depth.
    void check_input(const Array2D& image) const;

    MaskStack segment(const Array2D& image) const override;

    /// Activations kept from forward() for backward().
    struct Cache;

    /// Forward pass that records activations into `cache`.
    MaskStack forward(const Array2D& image, Cache& cache) const;

    /// Accumulates d loss / d parameters into `grad` given d loss / d probabilities.
    void backward(const Cache& cache, const std::array<Array2D, kNumClasses>& grad_probs,
                  std::span<double> grad) const;

private:
    struct Conv {
        int in = 0;
        int out = 0;
        int kernel = 3;
        std::size_t weights = 0;  // offset into params_
        std::size_t bias = 0;
    };

    void build_layout();

    ToyUNetSpec spec_;
    std::vector<Conv> convs_;  // includes the head as the last entry
    std::vector<double> params_;
};

struct UNet::Cache {
    struct Tensor {
        int c = 0, h = 0, w = 0;
        // Aligned so vectorised kernels take the same path on every allocation.
        std::vector<double, Eigen::aligned_allocator<double>> v;
    };
    std::vector<Tensor> inputs;   // per conv
    std::vector<Tensor> outputs;  // per conv (post-ReLU; logits for the head)
    std::vector<std::vector<int>> pool_argmax;  // per encoder level
    std::vector<double> probs;    // classes x n x n
    int n = 0;
};

// VSGW: "VSGW", u8 version=1, u16 depth, u16 base_channels, u16 in_channels,
// u16 out_channels, u16 convs_per_block, u64 parameter count, f64 LE parameters.
void save_model(const std::filesystem::path& path, const UNet& model);
UNet load_model(const std::filesystem::path& path);

}  // namespace vseg
