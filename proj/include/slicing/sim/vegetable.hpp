#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace slicing {

enum class VegKind { cucumber, tomato };
enum class ShapeTag { bar, ellipse };
enum class Role { whole_vegetable, slice };

struct VegetableType {
    VegKind kind;
    const char* name;
    double nominal_length;  // cm; the reference length l of the thickness classes
    double length_min, length_max;
    double action_min, action_max;
    ShapeTag shape;

    double min_hold() const { return 0.05 * nominal_length; }
};

const VegetableType& vegetable_type(VegKind kind);
VegKind parse_veg_kind(const std::string& name);
const char* to_string(VegKind kind);
const char* to_string(Role role);
Role parse_role(const std::string& name);

struct VegetableState {
    VegKind type = VegKind::cucumber;
    double initial_length = 0.0;
    double remaining_length = 0.0;
    int cut_count = 0;
    std::uint64_t rng_seed = 0;
    std::vector<double> slices;  // realized thicknesses, in cut order

    bool operator==(const VegetableState&) const = default;
};

struct CutAction {
    double d = 0.0;  // commanded slice thickness, cm
};

struct CutOutcome {
    bool created = false;
    std::optional<double> slice_thickness;
    double remaining_after = 0.0;
    bool stop = false;
};

inline constexpr double kMinSlice = 0.1;  // cm
inline constexpr double kDefaultCutNoise = 0.1;

VegetableState new_vegetable(VegKind type, std::uint64_t seed);
// Fresh vegetable of a given length (used by planning scenarios and tests).
VegetableState vegetable_with_length(VegKind type, double length, std::uint64_t seed);

// Executes one cut. A cut whose commanded thickness would leave less than
// min_hold is a STOP and leaves the state untouched; otherwise the realized
// thickness is clamp(d + noise, kMinSlice, remaining - min_hold).
std::pair<VegetableState, CutOutcome> apply_cut(const VegetableState& state, CutAction action,
                                                double noise_sigma = kDefaultCutNoise);

// Thickness classes as fractions of l.
inline constexpr double kClassFractions[5] = {0.05, 0.10, 0.20, 0.50, 1.0};
inline constexpr std::size_t kSliceClasses = 5;
inline constexpr std::size_t kRemainingClasses = 4;

std::size_t num_classes(Role role);
// Slice role: 5 classes; whole-vegetable (remaining) role: 4 classes, the
// "very thin" bin is merged into the first one. Thicker than l clamps to the top class.
int classify_thickness(double thickness, double l, Role role);
int classify_thickness(double thickness, VegKind type, Role role);

const char* slice_class_name(int cls);
// Accepts very-thin, thin, thick, very-thick, full (also with '_' or ' ').
int parse_slice_class(const std::string& name);

}  // namespace slicing
