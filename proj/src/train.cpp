#include "vseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "vseg/parallel.hpp"

namespace vseg {

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1 || anneal_period_epochs < 1 || threads < 1)
        throw DomainError("training counts must be positive");
    if (!(lr_min > 0.0) || !(lr_min < lr_max)) throw DomainError("need 0 < lr_min < lr_max");
    if (!(dice_smoothing > 0.0)) throw DomainError("dice smoothing must be positive");
}

TrainingError::TrainingError(int epoch, const std::string& what)
    : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

double cosine_lr(const TrainConfig& cfg, int epoch) {
    const int period = cfg.anneal_period_epochs;
    const double phase = static_cast<double>(epoch % period) / period;
    return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * phase));
}

double loss_and_gradient(const UNet& model, std::span<const TrainSample> batch, double smoothing,
                         std::vector<double>& grad, int threads) {
    const std::size_t count = batch.size();
    std::vector<UNet::Cache> caches(count);
    std::vector<MaskStack> preds(count);
    std::vector<MaskStack> targets(count);
    parallel_for(count, threads, [&](std::size_t i) { preds[i] = model.forward(batch[i].image, caches[i]); });
    for (std::size_t i = 0; i < count; ++i) {
        if (batch[i].target.n() != preds[i].n()) throw DomainError("target geometry does not match the image");
        targets[i] = batch[i].target;
    }
    const double loss = dice_loss(preds, targets, smoothing);
    const auto grad_probs = dice_loss_gradient(preds, targets, smoothing);

    std::vector<std::vector<double>> per_item(count, std::vector<double>(model.parameter_count(), 0.0));
    parallel_for(count, threads, [&](std::size_t i) { model.backward(caches[i], grad_probs[i], per_item[i]); });
    // Fixed summation order keeps results independent of the thread count.
    grad.assign(model.parameter_count(), 0.0);
    for (const auto& g : per_item)
        for (std::size_t k = 0; k < g.size(); ++k) grad[k] += g[k];
    return loss;
}

TrainResult train(UNet& model, std::span<const TrainSample> data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.empty()) throw DomainError("training set is empty");
    const auto n = data.front().image.rows();
    for (const auto& s : data)
        if (s.image.rows() != n || s.image.cols() != n || s.target.n() != static_cast<std::size_t>(n))
            throw DomainError("all training images must share one geometry");
    model.check_input(data.front().image);

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    auto& params = model.parameters();
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0), grad;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    long step = 0;

    TrainResult result;
    std::vector<TrainSample> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(cfg, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);
            const double loss = loss_and_gradient(model, batch, cfg.dice_smoothing, grad, cfg.threads);
            if (!std::isfinite(loss)) throw TrainingError(epoch, "loss is not finite");
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < params.size(); ++k) {
                m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
                params[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
            }
            loss_sum += loss;
            ++batches;
        }
        const double epoch_loss = loss_sum / batches;
        if (!std::isfinite(epoch_loss)) throw TrainingError(epoch, "loss is not finite");
        result.loss_trace.push_back(epoch_loss);
        result.lr_trace.push_back(lr);
        if (on_epoch) on_epoch(epoch, epoch_loss, model);
    }
    return result;
}

}  // namespace vseg
