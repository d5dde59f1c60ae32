#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace slicing::dmp {

inline constexpr std::size_t kJoints = 7;
// Joint whose goal carries the cut-distance parameter.
inline constexpr std::size_t kApproachJoint = 1;
inline constexpr double kGoalShiftPerCm = 0.02;  // rad/cm

// Uniformly sampled joint-space trajectory; joints[j][i] is joint j at time[i].
struct Trajectory {
    std::vector<double> time;
    std::vector<std::vector<double>> joints;

    std::size_t samples() const { return time.size(); }
};

using Demonstration = Trajectory;

struct JointDmp {
    std::vector<double> weights;
    std::vector<double> centers;
    std::vector<double> widths;
    double alpha_z = 25.0;
    double beta_z = 6.25;
    double alpha_s = 8.0;
    double y0 = 0.0;
    double goal = 0.0;
    double tau = 1.0;

    // Normalized Gaussian-basis forcing term at phase s.
    double forcing(double s) const;
    bool operator==(const JointDmp&) const = default;
};

struct DmpParams {
    std::vector<JointDmp> joints;
    bool operator==(const DmpParams&) const = default;
};

struct DmpConfig {
    std::size_t n_basis = 20;
    double alpha_z = 25.0;
    double alpha_s = 8.0;
    double lambda = 1e-6;
};

// Basis centers exp(-alpha_s i/(n-1)) and widths 1/(c_{i+1}-c_i)^2 (last repeated).
void make_basis(std::size_t n_basis, double alpha_s, std::vector<double>& centers, std::vector<double>& widths);

// Basis activations psi_i(s) * s / sum_j psi_j(s).
std::vector<double> basis_features(const JointDmp& dmp, double s);

// Start and goal postures of the synthetic cutting motion.
const std::vector<double>& demo_start();
const std::vector<double>& demo_goal();

// Minimum-jerk demonstrations (200 samples over 1 s) with a smooth seeded
// perturbation of at most `perturbation` rad that vanishes at both ends.
std::vector<Demonstration> synth_demos(std::uint64_t seed, std::size_t n = 10, double perturbation = 0.02,
                                       std::size_t samples = 200, double duration = 1.0);

double min_jerk(double y0, double g, double s);

// One ridge regression per joint over all demos stacked.
DmpParams fit_dmp(const std::vector<Demonstration>& demos, const DmpConfig& config = {});

// Explicit Euler integration of the canonical and transformation systems.
Trajectory rollout(const DmpParams& params, double dt = 1e-3);
std::vector<double> rollout_joint(const JointDmp& dmp, double dt, double duration);

// Copy with the approach joint's goal shifted by kGoalShiftPerCm * d.
DmpParams parameterize_cut(const DmpParams& base, double d);

// Element-wise mean of equally sampled trajectories.
Trajectory mean_trajectory(const std::vector<Trajectory>& trajs);
// Per-joint RMSE of `a` against `b` after linear resampling of `a` onto b's grid.
std::vector<double> rmse_per_joint(const Trajectory& a, const Trajectory& b);

std::string params_to_json(const DmpParams& params);
DmpParams params_from_json(const std::string& text);
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& file);
Trajectory read_trajectory_csv(const std::filesystem::path& file);

}  // namespace slicing::dmp
