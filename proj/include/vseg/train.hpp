#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "vseg/unet.hpp"

namespace vseg {

struct TrainConfig {
    int epochs = 300;
    double lr_max = 1e-5;
    double lr_min = 1e-6;
    int anneal_period_epochs = 25;
    int batch_size = 8;
    std::uint64_t seed = 0;
    double dice_smoothing = 1.0;
    /// Worker threads for per-item forward/backward; results do not depend on it.
    int threads = 1;

    void validate() const;
};

/// Raised when training diverges; carries the failing epoch.
class TrainingError : public std::runtime_error {
public:
    TrainingError(int epoch, const std::string& what);
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

struct TrainSample {
    Array2D image;
    MaskStack target;
};

struct TrainResult {
    std::vector<double> loss_trace;  // mean batch loss per epoch
    std::vector<double> lr_trace;
};

/// Cosine annealing with warm restarts every anneal_period_epochs:
/// lr_min + (lr_max - lr_min) * (1 + cos(pi * (epoch mod P) / P)) / 2.
double cosine_lr(const TrainConfig& cfg, int epoch);

/// Called after every epoch with (epoch, loss, model).
using EpochCallback = std::function<void(int, double, const UNet&)>;

/// Adam on the batch Dice loss. Deterministic for a fixed seed and thread count independent.
TrainResult train(UNet& model, std::span<const TrainSample> data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Analytic gradient of the batch Dice loss over `batch` (used by training and the gradient check).
double loss_and_gradient(const UNet& model, std::span<const TrainSample> batch, double smoothing,
                         std::vector<double>& grad, int threads = 1);

}  // namespace vseg
