#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slicing/sim/render.hpp"
#include "slicing/sim/vegetable.hpp"

namespace slicing {

// One executed (or refused) cut. Observation fields are image paths relative
// to the dataset directory.
struct Transition {
    int episode_id = 0;
    int t = 0;
    VegKind veg_type = VegKind::cucumber;
    double action_d = 0.0;
    bool created = false;
    std::optional<double> slice_thickness;
    double remaining_after = 0.0;
    bool stop = false;
    std::optional<int> slice_class;
    int remaining_class = 0;
    std::string obs_before;
    std::string obs_after;
    std::optional<std::string> slice_obs;

    double remaining_before() const { return remaining_after + slice_thickness.value_or(0.0); }
    bool operator==(const Transition&) const = default;
};

struct Dataset {
    std::vector<Transition> transitions;  // ordered by (episode_id, t)
    std::map<std::string, Observation> images;

    const Observation& image(const std::string& path) const;
    std::vector<int> episode_ids() const;
    std::size_t slice_count() const;
    std::size_t stop_count() const;
};

struct DatasetConfig {
    VegKind veg_type = VegKind::cucumber;
    int episodes = 2000;
    std::uint64_t seed = 0;
    double noise_sigma = kDefaultCutNoise;
    double pixel_noise = kDefaultPixelNoise;
    int min_slices = 3;  // planned cuts per episode ~ U{min_slices..max_slices}
    int max_slices = 10;
    int first_episode_id = 0;
};

// Episodes are generated independently (in parallel when OpenMP is on) and
// assembled by episode id, so the result depends only on the config.
Dataset generate_dataset(const DatasetConfig& config);

// index.jsonl + img/*.pgm. Fails if the directory cannot be created/written.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

std::string transition_to_json(const Transition& tr);
Transition transition_from_json(const std::string& line);

// Binary PGM (P5, maxval 255); the bbox and role ride in a header comment.
void write_pgm(const Observation& obs, const std::filesystem::path& file);
Observation read_pgm(const std::filesystem::path& file);

// Deterministic 80/20 split of episode ids (train, validation).
std::pair<std::vector<int>, std::vector<int>> split_episodes(const std::vector<int>& ids, double train_fraction,
                                                             std::uint64_t seed);

}  // namespace slicing
