#pragma once

#include "ilicast/nn/tape.hpp"
#include "ilicast/train/optim.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ilicast::train {

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    std::uint64_t seed = 0;
    ScheduleSpec schedule = ScheduleSpec::exponential();
    double clip_norm = 0.0; // 0 disables clipping

    void validate() const {
        if (epochs < 0 || batch_size < 1) {
            throw InvalidParameter("train: epochs must be >= 0 and batch size >= 1");
        }
        if (epochs > 0) {
            ScheduleSpec s = schedule;
            s.total_epochs = epochs;
            s.validate();
        }
    }
};

/// Per-step state handed to the model's loss.
struct TrainContext {
    std::mt19937_64& rng; // source for weight-sample noise
    double kl_weight;     // 1 / batches per epoch
    int epoch;
};

template <typename Model, typename Data>
concept Trainable = requires(Model& m, const Data& d, nn::Tape& tape, std::span<const std::size_t> idx,
                             TrainContext& ctx) {
    { m.parameters() } -> std::convertible_to<std::vector<nn::Parameter*>>;
    { m.training_loss(tape, d, idx, ctx) } -> std::same_as<nn::Var>;
};

struct TrainResult {
    std::vector<double> loss_trace; // mean loss per epoch
    long steps = 0;
};

/// Splits a permutation into batches; a trailing batch of one sample is merged
/// into its predecessor so batch statistics stay defined.
inline std::vector<std::span<const std::size_t>> make_batches(std::span<const std::size_t> order,
                                                              std::size_t batch_size) {
    std::vector<std::span<const std::size_t>> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t len = std::min(batch_size, order.size() - start);
        out.push_back(order.subspan(start, len));
    }
    if (out.size() > 1 && out.back().size() == 1) {
        const auto tail = out.back();
        out.pop_back();
        out.back() = order.subspan(static_cast<std::size_t>(out.back().data() - order.data()),
                                   out.back().size() + tail.size());
    }
    return out;
}

/// Minibatch ADAM over `epochs` with a per-epoch learning-rate schedule and a
/// fresh shuffle each epoch, all driven by `config.seed`.
template <typename Model, typename Data>
    requires Trainable<Model, Data>
TrainResult train(Model& model, const Data& data, std::size_t sample_count, const TrainConfig& config) {
    config.validate();
    TrainResult result;
    if (config.epochs == 0) {
        return result;
    }
    if (sample_count == 0) {
        throw InvalidInput("train: empty dataset");
    }
    ScheduleSpec schedule = config.schedule;
    schedule.total_epochs = config.epochs;

    auto params = model.parameters();
    Adam adam(params);
    std::mt19937_64 shuffle_rng(config.seed);
    std::mt19937_64 noise_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(sample_count);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const auto batches = make_batches(order, static_cast<std::size_t>(config.batch_size));
        TrainContext ctx{noise_rng, 1.0 / static_cast<double>(batches.size()), epoch};
        const double lr = lr_at(schedule, epoch);
        double total = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            for (nn::Parameter* p : params) {
                p->zero_grad();
            }
            nn::Tape tape;
            nn::Var loss = model.training_loss(tape, data, batches[b], ctx);
            const double value = loss.scalar();
            if (!std::isfinite(value)) {
                throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(b));
            }
            tape.backward(loss);
            if (config.clip_norm > 0.0) {
                clip_global_norm(params, config.clip_norm);
            }
            try {
                adam.step(lr);
            } catch (const TrainingDiverged& e) {
                throw TrainingDiverged(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(b) + ")");
            }
            total += value * static_cast<double>(batches[b].size());
        }
        result.loss_trace.push_back(total / static_cast<double>(sample_count));
    }
    result.steps = adam.steps();
    return result;
}

} // namespace ilicast::train
