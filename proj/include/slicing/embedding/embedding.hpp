#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slicing/nn/network.hpp"
#include "slicing/sim/dataset.hpp"

namespace slicing {

inline constexpr std::size_t kEmbeddingDim = 128;

// Shared conv trunk producing z, plus one classification head per role.
struct EmbeddingModel {
    VegKind veg_type = VegKind::cucumber;
    Network trunk;
    Network slice_head;
    Network remaining_head;

    const Network& head(Role role) const { return role == Role::slice ? slice_head : remaining_head; }
    Network& head(Role role) { return role == Role::slice ? slice_head : remaining_head; }
};

std::vector<LayerSpec> embedding_trunk_layers();
EmbeddingModel make_embedding_model(VegKind veg_type, std::uint64_t seed);

// Cropped input of one observation, shaped [1, 32, 32].
Tensor embedding_input(const Observation& obs);
Tensor embedding_inputs(const std::vector<const Observation*>& obs);

std::vector<double> embed(const EmbeddingModel& model, const Observation& obs);
// Row i of the result is the embedding of obs[i].
Tensor embed_batch(const EmbeddingModel& model, const std::vector<const Observation*>& obs);

std::vector<double> predict_class(const EmbeddingModel& model, std::span<const double> z, Role role);
std::size_t argmax(std::span<const double> v);

// One supervised observation: a frame of the whole vegetable (remaining
// classes) or of a freshly cut slice (slice classes).
struct LabeledObservation {
    const Observation* obs = nullptr;
    Role role = Role::slice;
    int label = 0;
    int episode_id = 0;
};

// Every distinct frame of the given episodes with its label.
std::vector<LabeledObservation> labeled_observations(const Dataset& dataset, const std::vector<int>& episodes);

struct EmbedTrainConfig {
    std::size_t batch_size = 16;
    int epochs = 12;
    double lr = 1e-3;
    // lr decays linearly to lr * final_lr_fraction at the last epoch.
    double final_lr_fraction = 0.1;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    bool verbose = false;
};

double scheduled_lr(double lr, double final_fraction, int epoch, int epochs);

struct EmbedEpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double slice_acc = 0.0;
    double remaining_acc = 0.0;
};

struct EmbedEvaluation {
    double loss = 0.0;  // mean cross-entropy
    std::vector<int> slice_true, slice_pred;
    std::vector<int> remaining_true, remaining_pred;

    double slice_accuracy() const;
    double remaining_accuracy() const;
};

EmbedEvaluation evaluate_embedding(const EmbeddingModel& model, const std::vector<LabeledObservation>& samples);

struct EmbedTrainResult {
    EmbeddingModel model;
    std::vector<EmbedEpochMetrics> metrics;
    std::vector<int> train_episodes, val_episodes;
};

// Splits the dataset by episode and trains on the training part.
EmbedTrainResult train_embedding(const Dataset& dataset, const EmbedTrainConfig& config);
// Trains on explicit sample lists; `model` is updated in place.
std::vector<EmbedEpochMetrics> train_embedding(EmbeddingModel& model, const std::vector<LabeledObservation>& train,
                                               const std::vector<LabeledObservation>& val,
                                               const EmbedTrainConfig& config);

// Mean per-sample cross-entropy of a batch and its gradients; exposed for tests.
struct EmbedBatchGrads {
    double loss = 0.0;
    ParamMap trunk, slice_head, remaining_head;
};
EmbedBatchGrads embedding_batch_gradients(const EmbeddingModel& model, const Tensor& inputs,
                                          const std::vector<Role>& roles, const std::vector<int>& labels);

std::string embedding_model_to_json(const EmbeddingModel& model);
EmbeddingModel embedding_model_from_json(const nlohmann::json& doc);
void save_embedding_model(const EmbeddingModel& model, const std::filesystem::path& file);
EmbeddingModel load_embedding_model(const std::filesystem::path& file);

void write_embedding_metrics_csv(const std::vector<EmbedEpochMetrics>& metrics, const std::filesystem::path& file);

}  // namespace slicing
