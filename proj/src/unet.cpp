#include "vseg/unet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>

#include "vseg/binio.hpp"

namespace vseg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using Tensor = UNet::Cache::Tensor;
using Buffer = decltype(Tensor::v);

Tensor make_tensor(int c, int h, int w) { return Tensor{c, h, w, Buffer(std::size_t(c) * h * w, 0.0)}; }

MatMap as_mat(Tensor& t) { return MatMap(t.v.data(), t.c, Eigen::Index(t.h) * t.w); }
ConstMatMap as_mat(const Tensor& t) { return ConstMatMap(t.v.data(), t.c, Eigen::Index(t.h) * t.w); }

// cols[(ci*k*k + ky*k + kx)][y*w + x] = in[ci][y+ky-pad][x+kx-pad], zero outside.
void im2col(const Tensor& in, int k, RowMat& cols) {
    const int pad = k / 2, h = in.h, w = in.w;
    cols.setZero(Eigen::Index(in.c) * k * k, Eigen::Index(h) * w);
    for (int ci = 0; ci < in.c; ++ci) {
        const double* src = in.v.data() + std::size_t(ci) * h * w;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                double* dst = cols.data() + (Eigen::Index(ci) * k * k + ky * k + kx) * Eigen::Index(h) * w;
                const int dy = ky - pad, dx = kx - pad;
                const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                for (int y = y0; y < y1; ++y) {
                    const double* srow = src + std::size_t(y + dy) * w + dx;
                    double* row = dst + std::size_t(y) * w;
                    for (int x = x0; x < x1; ++x) row[x] = srow[x];
                }
            }
    }
}

void col2im_add(const RowMat& cols, int k, Tensor& out) {
    const int pad = k / 2, h = out.h, w = out.w;
    for (int ci = 0; ci < out.c; ++ci) {
        double* dst = out.v.data() + std::size_t(ci) * h * w;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const double* src = cols.data() + (Eigen::Index(ci) * k * k + ky * k + kx) * Eigen::Index(h) * w;
                const int dx = kx - pad;
                const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                for (int y = 0; y < h; ++y) {
                    const int yy = y + ky - pad;
                    if (yy < 0 || yy >= h) continue;
                    const double* row = src + std::size_t(y) * w;
                    double* drow = dst + std::size_t(yy) * w + dx;
                    for (int x = x0; x < x1; ++x) drow[x] += row[x];
                }
            }
    }
}

Tensor maxpool2(const Tensor& in, std::vector<int>& argmax) {
    Tensor out = make_tensor(in.c, in.h / 2, in.w / 2);
    argmax.assign(out.v.size(), 0);
    std::size_t o = 0;
    for (int c = 0; c < in.c; ++c)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x, ++o) {
                int best = (c * in.h + 2 * y) * in.w + 2 * x;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = (c * in.h + 2 * y + dy) * in.w + 2 * x + dx;
                        if (in.v[std::size_t(idx)] > in.v[std::size_t(best)]) best = idx;
                    }
                argmax[o] = best;
                out.v[o] = in.v[std::size_t(best)];
            }
    return out;
}

Tensor upsample2(const Tensor& in) {
    Tensor out = make_tensor(in.c, in.h * 2, in.w * 2);
    for (int c = 0; c < in.c; ++c)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x)
                out.v[(std::size_t(c) * out.h + y) * out.w + x] = in.v[(std::size_t(c) * in.h + y / 2) * in.w + x / 2];
    return out;
}

Tensor upsample2_backward(const Tensor& grad_out) {
    Tensor g = make_tensor(grad_out.c, grad_out.h / 2, grad_out.w / 2);
    for (int c = 0; c < grad_out.c; ++c)
        for (int y = 0; y < grad_out.h; ++y)
            for (int x = 0; x < grad_out.w; ++x)
                g.v[(std::size_t(c) * g.h + y / 2) * g.w + x / 2] +=
                    grad_out.v[(std::size_t(c) * grad_out.h + y) * grad_out.w + x];
    return g;
}

Tensor concat(const Tensor& a, const Tensor& b) {
    Tensor out{a.c + b.c, a.h, a.w, {}};
    out.v.reserve(a.v.size() + b.v.size());
    out.v.insert(out.v.end(), a.v.begin(), a.v.end());
    out.v.insert(out.v.end(), b.v.begin(), b.v.end());
    return out;
}

}  // namespace

void ToyUNetSpec::validate() const {
    if (depth < 1 || depth > 8) throw DomainError("UNet depth must be in 1..8");
    if (base_channels < 1) throw DomainError("UNet base_channels must be positive");
    if (in_channels != 1) throw DomainError("UNet expects a single input channel");
    if (out_channels != static_cast<int>(kNumClasses)) throw DomainError("UNet must output 6 classes");
    if (convs_per_block < 1 || convs_per_block > 4) throw DomainError("convs_per_block must be in 1..4");
}

void UNet::build_layout() {
    spec_.validate();
    convs_.clear();
    std::size_t offset = 0;
    auto add = [&](int in, int out, int kernel) {
        Conv c{in, out, kernel, offset, 0};
        offset += std::size_t(in) * out * kernel * kernel;
        c.bias = offset;
        offset += std::size_t(out);
        convs_.push_back(c);
    };
    auto block = [&](int in, int out) {
        for (int i = 0; i < spec_.convs_per_block; ++i) add(i == 0 ? in : out, out, 3);
    };
    const int b = spec_.base_channels;
    int ch = spec_.in_channels;
    for (int l = 0; l < spec_.depth; ++l) {
        block(ch, b << l);
        ch = b << l;
    }
    block(ch, b << spec_.depth);
    for (int l = spec_.depth - 1; l >= 0; --l) block((b << (l + 1)) + (b << l), b << l);
    add(b, spec_.out_channels, 1);
    params_.assign(offset, 0.0);
}

UNet::UNet(ToyUNetSpec spec, std::uint64_t seed) : spec_(spec) {
    build_layout();
    std::mt19937_64 rng(seed);
    // The 1x1 head stays at zero: every class starts at probability 1/6, so none begins suppressed.
    for (const auto& c : std::span(convs_).first(convs_.size() - 1)) {
        const double fan_in = double(c.in) * c.kernel * c.kernel;
        std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
        for (std::size_t i = c.weights; i < c.bias; ++i) params_[i] = dist(rng);
    }
}

UNet::UNet(ToyUNetSpec spec, std::vector<double> parameters) : spec_(spec) {
    build_layout();
    if (parameters.size() != params_.size())
        throw DomainError("parameter count " + std::to_string(parameters.size()) + " does not match the spec (" +
                          std::to_string(params_.size()) + ")");
    params_ = std::move(parameters);
}

void UNet::check_input(const Array2D& image) const {
    const auto n = image.rows();
    const auto multiple = Eigen::Index(1) << spec_.depth;
    if (image.cols() != n || n == 0) throw DomainError("segmenter input must be a square image");
    if (n % multiple != 0)
        throw DomainError("image side " + std::to_string(n) + " is not divisible by 2^depth = " +
                          std::to_string(multiple));
}

MaskStack UNet::segment(const Array2D& image) const {
    Cache cache;
    return forward(image, cache);
}

MaskStack UNet::forward(const Array2D& image, Cache& cache) const {
    check_input(image);
    const int n = static_cast<int>(image.rows());
    const int per = spec_.convs_per_block;
    cache.n = n;
    cache.inputs.assign(convs_.size(), {});
    cache.outputs.assign(convs_.size(), {});
    cache.pool_argmax.assign(std::size_t(spec_.depth), {});

    RowMat cols;
    auto run_conv = [&](std::size_t idx, Tensor input, bool relu) -> const Tensor& {
        const Conv& c = convs_[idx];
        Tensor out = make_tensor(c.out, input.h, input.w);
        const RowMat weights = ConstMatMap(params_.data() + c.weights, c.out, Eigen::Index(c.in) * c.kernel * c.kernel);
        Eigen::Map<const Eigen::VectorXd> bias(params_.data() + c.bias, c.out);
        auto out_mat = as_mat(out);
        if (c.kernel == 1) {
            out_mat.noalias() = weights * as_mat(input);
        } else {
            im2col(input, c.kernel, cols);
            out_mat.noalias() = weights * cols;
        }
        out_mat.colwise() += bias;
        if (relu) out_mat = out_mat.cwiseMax(0.0);
        cache.inputs[idx] = std::move(input);
        cache.outputs[idx] = std::move(out);
        return cache.outputs[idx];
    };

    Tensor x{1, n, n, Buffer(image.data(), image.data() + image.size())};
    std::size_t layer = 0;
    std::vector<const Tensor*> skips;
    for (int l = 0; l < spec_.depth; ++l) {
        for (int i = 0; i < per; ++i) x = run_conv(layer++, std::move(x), true);
        skips.push_back(&cache.outputs[layer - 1]);
        x = maxpool2(x, cache.pool_argmax[std::size_t(l)]);
    }
    for (int i = 0; i < per; ++i) x = run_conv(layer++, std::move(x), true);
    for (int l = spec_.depth - 1; l >= 0; --l) {
        x = concat(upsample2(x), *skips[std::size_t(l)]);
        for (int i = 0; i < per; ++i) x = run_conv(layer++, std::move(x), true);
    }
    const Tensor& logits = run_conv(layer, std::move(x), false);

    const std::size_t pixels = std::size_t(n) * n;
    cache.probs.assign(kNumClasses * pixels, 0.0);
    std::array<Array2D, kNumClasses> masks;
    for (auto& m : masks) m.resize(n, n);
    for (std::size_t p = 0; p < pixels; ++p) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < kNumClasses; ++c) peak = std::max(peak, logits.v[c * pixels + p]);
        double total = 0.0;
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            const double e = std::exp(logits.v[c * pixels + p] - peak);
            cache.probs[c * pixels + p] = e;
            total += e;
        }
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            cache.probs[c * pixels + p] /= total;
            masks[c].data()[p] = cache.probs[c * pixels + p];
        }
    }
    return MaskStack(std::move(masks));
}

void UNet::backward(const Cache& cache, const std::array<Array2D, kNumClasses>& grad_probs,
                    std::span<double> grad) const {
    if (grad.size() != params_.size()) throw DomainError("gradient buffer size does not match the model");
    const int n = cache.n;
    const int per = spec_.convs_per_block;
    const std::size_t pixels = std::size_t(n) * n;

    // Softmax backward: dz_k = p_k (g_k - sum_j p_j g_j).
    Tensor grad_out = make_tensor(static_cast<int>(kNumClasses), n, n);
    for (std::size_t p = 0; p < pixels; ++p) {
        double dot = 0.0;
        for (std::size_t c = 0; c < kNumClasses; ++c) dot += cache.probs[c * pixels + p] * grad_probs[c].data()[p];
        for (std::size_t c = 0; c < kNumClasses; ++c)
            grad_out.v[c * pixels + p] = cache.probs[c * pixels + p] * (grad_probs[c].data()[p] - dot);
    }

    RowMat cols, dcols, dw;
    // Returns d loss / d input of conv `idx` given d loss / d output.
    auto conv_back = [&](std::size_t idx, Tensor dout, bool relu, bool need_input_grad) -> Tensor {
        const Conv& c = convs_[idx];
        const Tensor& in = cache.inputs[idx];
        const Tensor& out = cache.outputs[idx];
        if (relu)
            for (std::size_t i = 0; i < dout.v.size(); ++i)
                if (out.v[i] <= 0.0) dout.v[i] = 0.0;
        auto dmat = as_mat(dout);
        const Eigen::Index k2 = Eigen::Index(c.kernel) * c.kernel;
        MatMap dweights(grad.data() + c.weights, c.out, Eigen::Index(c.in) * k2);
        Eigen::Map<Eigen::VectorXd> dbias(grad.data() + c.bias, c.out);
        const RowMat weights = ConstMatMap(params_.data() + c.weights, c.out, Eigen::Index(c.in) * k2);
        const Eigen::VectorXd bias_grad = dmat.rowwise().sum();
        dbias += bias_grad;
        Tensor din = make_tensor(in.c, in.h, in.w);
        if (c.kernel == 1) {
            dw.noalias() = dmat * as_mat(in).transpose();
            dweights += dw;
            if (need_input_grad) as_mat(din).noalias() = weights.transpose() * dmat;
        } else {
            im2col(in, c.kernel, cols);
            dw.noalias() = dmat * cols.transpose();
            dweights += dw;
            if (need_input_grad) {
                dcols.noalias() = weights.transpose() * dmat;
                col2im_add(dcols, c.kernel, din);
            }
        }
        return din;
    };

    std::size_t layer = convs_.size() - 1;
    Tensor g = conv_back(layer, std::move(grad_out), false, true);

    std::vector<Tensor> skip_grads(std::size_t(spec_.depth));
    for (int l = 0; l < spec_.depth; ++l) {
        for (int i = 0; i < per; ++i) g = conv_back(--layer, std::move(g), true, true);
        // Split the concatenation: upsampled channels first, then the skip.
        const int up_channels = spec_.base_channels << (l + 1);
        const std::size_t split = std::size_t(up_channels) * g.h * g.w;
        Tensor up{up_channels, g.h, g.w, Buffer(g.v.begin(), g.v.begin() + std::ptrdiff_t(split))};
        skip_grads[std::size_t(l)] =
            Tensor{g.c - up_channels, g.h, g.w, Buffer(g.v.begin() + std::ptrdiff_t(split), g.v.end())};
        g = upsample2_backward(up);
    }
    for (int i = 0; i < per; ++i) g = conv_back(--layer, std::move(g), true, true);
    for (int l = spec_.depth - 1; l >= 0; --l) {
        Tensor d = std::move(skip_grads[std::size_t(l)]);
        const auto& argmax = cache.pool_argmax[std::size_t(l)];
        for (std::size_t i = 0; i < argmax.size(); ++i) d.v[std::size_t(argmax[i])] += g.v[i];
        for (int i = 0; i < per; ++i) {
            const std::size_t idx = --layer;
            // The image itself needs no gradient.
            d = conv_back(idx, std::move(d), true, idx != 0);
        }
        g = std::move(d);
    }
}

namespace {
constexpr std::string_view kModelMagic = "VSGW";
constexpr std::uint8_t kModelVersion = 1;
}  // namespace

void save_model(const std::filesystem::path& path, const UNet& model) {
    const auto& s = model.spec();
    binio::Writer w;
    w.put_bytes(kModelMagic);
    w.put<std::uint8_t>(kModelVersion);
    for (int field : {s.depth, s.base_channels, s.in_channels, s.out_channels, s.convs_per_block})
        w.put<std::uint16_t>(static_cast<std::uint16_t>(field));
    w.put<std::uint64_t>(model.parameter_count());
    for (double p : model.parameters()) w.put<double>(p);
    w.save(path);
}

UNet load_model(const std::filesystem::path& path) {
    binio::Reader r(binio::read_file(path), path.string());
    if (r.get_bytes(4, "magic") != kModelMagic) r.fail("not a VSGW file");
    const auto version = r.get<std::uint8_t>("version");
    if (version != kModelVersion) r.fail("unsupported VSGW version " + std::to_string(version));
    ToyUNetSpec s;
    s.depth = r.get<std::uint16_t>("depth");
    s.base_channels = r.get<std::uint16_t>("base_channels");
    s.in_channels = r.get<std::uint16_t>("in_channels");
    s.out_channels = r.get<std::uint16_t>("out_channels");
    s.convs_per_block = r.get<std::uint16_t>("convs_per_block");
    const auto count = r.get<std::uint64_t>("parameter count");
    r.require(count * sizeof(double), "parameters");
    std::vector<double> params(count);
    for (auto& p : params) p = r.get<double>("parameter");
    if (r.remaining() != 0) r.fail("trailing bytes after parameters");
    try {
        return UNet(s, std::move(params));
    } catch (const DomainError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace vseg
