#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slicing/forward/forward.hpp"
#include "slicing/rng.hpp"

namespace slicing {

inline constexpr double kStopPenalty = 10.0;
inline constexpr double kGridStep = 0.2;  // cm

struct Goal {
    VegKind veg_type = VegKind::cucumber;
    std::vector<int> target_classes;  // slice classes, 0..4
};

void validate(const Goal& goal);
// Parses "thin,thick" or "1,2".
Goal parse_goal(const std::string& text, VegKind veg_type);

struct Plan {
    std::vector<double> actions;  // commanded thickness per step, cm
    std::vector<LatentStep> steps;  // ends early at a predicted STOP
    double cost = 0.0;
    bool feasible = true;
    std::size_t expanded = 0;  // search nodes evaluated
};

// action_min, action_min + 0.2, ... up to action_max.
std::vector<double> action_grid(VegKind veg_type);

struct PlanConfig {
    std::size_t beam_width = 0;  // 0: exhaustive
    std::size_t max_goal_length = 5;
};

// Minimizes sum_t -log P(target_t | z_s_t) under the slice head, with
// kStopPenalty for the step on which STOP fires and each step after it.
// Ties go to the lexicographically smallest action sequence.
Plan plan(const ForwardModel& fm, const EmbeddingModel& embed_model, std::span<const double> z0, const Goal& goal,
          const std::vector<double>& grid, const PlanConfig& config = {});

// -log P(target | z_s) under the slice head.
double class_cost(const EmbeddingModel& embed_model, std::span<const double> z_s, int target);
double score_plan(const EmbeddingModel& embed_model, const Plan& plan, const Goal& goal);

struct ClosedLoopConfig {
    double noise_sigma = kDefaultCutNoise;
    double pixel_noise = kDefaultPixelNoise;
    PlanConfig plan;
};

struct ClosedLoopResult {
    Goal goal;
    double initial_length = 0.0;
    std::vector<double> commanded;
    std::vector<double> realized;  // slice thicknesses
    std::vector<int> realized_classes;
    std::vector<double> plan_costs;  // cost of each replan
    bool sim_stop = false;
    bool success = false;
};

// Render, embed, plan the rest of the goal, execute its first action; repeat
// until the goal is done or the simulator refuses a cut.
ClosedLoopResult execute_closed_loop(const VegetableState& start, const EmbeddingModel& embed_model,
                                     const ForwardModel& fm, const Goal& goal, std::uint64_t seed,
                                     const ClosedLoopConfig& config = {});

// Random goal of 1..max_length classes drawn from 0..max_class that a
// vegetable of the given length can hold with commanded cuts from the grid.
Goal random_feasible_goal(VegKind veg_type, double length, std::size_t max_length, int max_class, Rng& rng);

std::string plan_to_json(const Plan& plan, const Goal& goal, const EmbeddingModel& embed_model);
std::string closed_loop_to_json(const ClosedLoopResult& result);

}  // namespace slicing
