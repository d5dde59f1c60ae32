#include "slicing/sim/vegetable.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "slicing/rng.hpp"

namespace slicing {

namespace {

constexpr VegetableType kCucumber{VegKind::cucumber, "cucumber", 20.0, 12.0, 25.0, 0.4, 8.0, ShapeTag::bar};
constexpr VegetableType kTomato{VegKind::tomato, "tomato", 5.0, 4.0, 7.0, 0.4, 3.0, ShapeTag::ellipse};

constexpr std::uint64_t kCutStream = 0xC0771;

}  // namespace

const VegetableType& vegetable_type(VegKind kind) { return kind == VegKind::cucumber ? kCucumber : kTomato; }

VegKind parse_veg_kind(const std::string& name) {
    if (name == "cucumber") return VegKind::cucumber;
    if (name == "tomato") return VegKind::tomato;
    throw std::invalid_argument("unknown vegetable type '" + name + "'");
}

const char* to_string(VegKind kind) { return vegetable_type(kind).name; }

const char* to_string(Role role) { return role == Role::slice ? "slice" : "whole_vegetable"; }

Role parse_role(const std::string& name) {
    if (name == "slice") return Role::slice;
    if (name == "whole_vegetable" || name == "remaining") return Role::whole_vegetable;
    throw std::invalid_argument("unknown role '" + name + "'");
}

VegetableState new_vegetable(VegKind type, std::uint64_t seed) {
    const auto& vt = vegetable_type(type);
    Rng rng(derive_seed({seed, 0x1E9}));
    return vegetable_with_length(type, rng.uniform(vt.length_min, vt.length_max), seed);
}

VegetableState vegetable_with_length(VegKind type, double length, std::uint64_t seed) {
    if (!(length > 0.0)) throw std::invalid_argument("vegetable length must be positive");
    VegetableState s;
    s.type = type;
    s.initial_length = length;
    s.remaining_length = length;
    s.rng_seed = seed;
    return s;
}

std::pair<VegetableState, CutOutcome> apply_cut(const VegetableState& state, CutAction action, double noise_sigma) {
    if (!(action.d > 0.0) || !std::isfinite(action.d)) {
        throw std::invalid_argument("cut thickness must be positive, got " + std::to_string(action.d));
    }
    if (!(state.remaining_length > 0.0)) throw std::invalid_argument("nothing left to cut");
    if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");

    const double hold = vegetable_type(state.type).min_hold();
    const double max_slice = state.remaining_length - hold;
    CutOutcome out;
    if (action.d > max_slice || max_slice < kMinSlice) {
        out.stop = true;
        out.remaining_after = state.remaining_length;
        return {state, out};
    }
    Rng rng(derive_seed({state.rng_seed, kCutStream, static_cast<std::uint64_t>(state.cut_count)}));
    const double eps = noise_sigma > 0.0 ? rng.normal(0.0, noise_sigma) : 0.0;
    const double thickness = std::clamp(action.d + eps, kMinSlice, max_slice);

    VegetableState next = state;
    next.remaining_length = state.remaining_length - thickness;
    next.cut_count += 1;
    next.slices.push_back(thickness);
    out.created = true;
    out.slice_thickness = thickness;
    out.remaining_after = next.remaining_length;
    return {std::move(next), out};
}

std::size_t num_classes(Role role) { return role == Role::slice ? kSliceClasses : kRemainingClasses; }

int classify_thickness(double thickness, double l, Role role) {
    if (!(thickness > 0.0)) throw std::invalid_argument("thickness must be positive");
    if (!(l > 0.0)) throw std::invalid_argument("reference length must be positive");
    int cls = 0;
    while (cls < 4 && thickness > kClassFractions[cls] * l) ++cls;
    if (role == Role::whole_vegetable) cls = std::max(cls - 1, 0);
    return cls;
}

int classify_thickness(double thickness, VegKind type, Role role) {
    return classify_thickness(thickness, vegetable_type(type).nominal_length, role);
}

const char* slice_class_name(int cls) {
    static const char* names[] = {"very-thin", "thin", "thick", "very-thick", "full"};
    if (cls < 0 || cls > 4) throw std::invalid_argument("class index out of range");
    return names[cls];
}

int parse_slice_class(const std::string& raw) {
    std::string name = raw;
    std::replace(name.begin(), name.end(), '_', '-');
    std::replace(name.begin(), name.end(), ' ', '-');
    for (int c = 0; c < 5; ++c) {
        if (name == slice_class_name(c)) return c;
    }
    if (name.size() == 1 && name[0] >= '0' && name[0] <= '4') return name[0] - '0';
    throw std::invalid_argument("unknown thickness class '" + raw + "'");
}

}  // namespace slicing
