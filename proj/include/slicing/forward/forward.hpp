#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slicing/embedding/embedding.hpp"

namespace slicing {

// Latent transition model: (z_o, d) -> (next z_o, new slice z_s).
struct ForwardModel {
    VegKind veg_type = VegKind::cucumber;
    double action_max = 1.0;  // actions enter the network as d / action_max
    Network net;
    std::vector<double> stop_embedding;
    std::optional<double> stop_threshold;
};

std::vector<LayerSpec> forward_layers();
ForwardModel make_forward_model(VegKind veg_type, std::uint64_t seed);

struct StepPrediction {
    std::vector<double> z_o;
    std::vector<double> z_s;
};

StepPrediction predict_step(const ForwardModel& fm, std::span<const double> z_o, double d);

double stop_distance(const ForwardModel& fm, std::span<const double> z_s);
// Requires a calibrated threshold.
bool detect_stop(const ForwardModel& fm, std::span<const double> z_s);

struct LatentStep {
    std::vector<double> z_o;
    std::vector<double> z_s;
    bool stop = false;
};

// Feeds predicted z_o forward; the step on which STOP is detected is the last one returned.
std::vector<LatentStep> rollout_latent(const ForwardModel& fm, std::span<const double> z0,
                                       const std::vector<double>& actions);

// Unroll length used at a given epoch.
int horizon_for_epoch(int epoch, int max_horizon = 5, int horizon_epoch_step = 5);

// Transitions of a set of episodes with their embeddings, in dataset order.
struct TransitionTable {
    std::vector<const Transition*> transitions;
    Tensor z_before;  // [n, 128]
    Tensor z_after;
    Tensor z_slice;  // zero rows for STOP transitions
    std::vector<double> action;  // normalized
    // Unrolls may continue from transition i to i + 1 only inside one episode.
    std::vector<std::size_t> steps_left;  // transitions remaining in the episode from i, including i

    std::size_t size() const { return transitions.size(); }
    bool is_stop(std::size_t i) const { return transitions[i]->stop; }
};

TransitionTable build_transition_table(const Dataset& dataset, const std::vector<int>& episodes,
                                       const EmbeddingModel& embed_model, double action_max);

struct ForwardTrainConfig {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    int max_horizon = 5;
    int horizon_epoch_step = 5;
    int epochs = 60;
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double final_lr_fraction = 0.1;
    std::uint64_t seed = 0;
    bool fine_tune_embedding = false;
    // At the start of training the STOP embedding is rescaled to this multiple
    // of the largest training slice-embedding norm (0 keeps it as is).
    double stop_init_radius = 2.0;
    // Learning-rate multiplier for the STOP embedding.
    double stop_lr_scale = 0.1;
    bool verbose = false;
};

void validate(const ForwardTrainConfig& config);

struct Unroll {
    std::size_t start = 0;
    std::size_t length = 1;
};

struct ForwardBatchGrads {
    double loss = 0.0;
    double mse_o = 0.0;  // summed over steps, averaged over rows
    double mse_s = 0.0;
    std::size_t steps = 0;
    ParamMap net;
    std::vector<double> stop_embedding;
    Tensor input;  // [B, 128] gradient w.r.t. each unroll's starting embedding
};

// Loss and gradients of one batch of autoregressive unrolls. `z_start`, when
// given, replaces the table's starting embeddings (rows follow `unrolls`).
ForwardBatchGrads forward_batch_gradients(const ForwardModel& fm, const TransitionTable& table,
                                          std::span<const Unroll> unrolls, double lambda1, double lambda2,
                                          const Tensor* z_start = nullptr);

struct ForwardEpochMetrics {
    int epoch = 0;
    int horizon = 1;
    double train_mse_o = 0.0;
    double train_mse_s = 0.0;
    double val_mse_o = 0.0;
    double val_mse_s = 0.0;
};

struct OneStepMse {
    double mse_o = 0.0;
    double mse_s = 0.0;
};
OneStepMse one_step_mse(const ForwardModel& fm, const TransitionTable& table);

// Trains on the given episodes; with fine_tune_embedding the trunk of
// `embed_model` also receives gradients through the starting embeddings.
std::vector<ForwardEpochMetrics> train_forward(ForwardModel& fm, EmbeddingModel& embed_model, const Dataset& dataset,
                                               const std::vector<int>& train_episodes,
                                               const std::vector<int>& val_episodes,
                                               const ForwardTrainConfig& config);

// Midpoint between the group means. Rejects an empty group and groups that do
// not separate (mean STOP distance not below the mean non-STOP distance).
double stop_threshold_from_distances(const std::vector<double>& stop, const std::vector<double>& non_stop);
// One-step distances over the table; stores and returns the threshold.
double calibrate_stop_threshold(ForwardModel& fm, const TransitionTable& table);

struct BinaryScore {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision() const;
    double recall() const;
    double f1() const;
};

struct ForwardEvaluation {
    double remaining_acc = 0.0;  // one step, remaining head on predicted z_o
    double slice_acc = 0.0;      // one step, slice head on predicted z_s
    std::size_t one_step_count = 0;
    std::size_t slice_count = 0;
    double five_step_acc = 0.0;
    std::size_t five_step_windows = 0;
    BinaryScore stop;
};

ForwardEvaluation evaluate_forward(const ForwardModel& fm, const EmbeddingModel& embed_model,
                                   const TransitionTable& table, int window = 5);

std::string forward_model_to_json(const ForwardModel& fm);
ForwardModel forward_model_from_json(const nlohmann::json& doc);
void save_forward_model(const ForwardModel& fm, const std::filesystem::path& file);
ForwardModel load_forward_model(const std::filesystem::path& file);

void write_forward_metrics_csv(const std::vector<ForwardEpochMetrics>& metrics, const std::filesystem::path& file);

}  // namespace slicing
