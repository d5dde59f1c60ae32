#include "slicing/planner/planner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "slicing/rng.hpp"
#include "slicing/sim/render.hpp"

namespace slicing {

using json = nlohmann::json;

namespace {

constexpr std::size_t kIn = kEmbeddingDim + 1;

// Row-wise -log softmax(target) of the slice head over a batch of z_s.
std::vector<double> class_costs(const EmbeddingModel& em, const Tensor& z_s, int target) {
    const Tensor logits = infer(em.slice_head, z_s);
    std::vector<double> out(z_s.dim(0));
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto row = logits.row(i);
        const double m = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double v : row) s += std::exp(v - m);
        out[i] = -(row[static_cast<std::size_t>(target)] - m - std::log(s));
    }
    return out;
}

struct Expansion {
    Tensor out;  // [grid, 256]
    std::vector<double> cost;
    std::vector<char> stop;
};

Expansion expand(const ForwardModel& fm, const EmbeddingModel& em, std::span<const double> z,
                 const std::vector<double>& grid, int target) {
    Tensor x({grid.size(), kIn});
    for (std::size_t a = 0; a < grid.size(); ++a) {
        auto row = x.row(a);
        std::copy(z.begin(), z.end(), row.begin());
        row[kEmbeddingDim] = grid[a] / fm.action_max;
    }
    Expansion e;
    e.out = infer(fm.net, x);
    Tensor zs({grid.size(), kEmbeddingDim});
    e.stop.resize(grid.size());
    for (std::size_t a = 0; a < grid.size(); ++a) {
        const auto s = e.out.row(a).subspan(kEmbeddingDim);
        std::copy(s.begin(), s.end(), zs.row(a).begin());
        e.stop[a] = detect_stop(fm, s);
    }
    e.cost = class_costs(em, zs, target);
    return e;
}

LatentStep step_of(const Expansion& e, std::size_t a) {
    const auto row = e.out.row(a);
    return {std::vector<double>(row.begin(), row.begin() + kEmbeddingDim),
            std::vector<double>(row.begin() + kEmbeddingDim, row.end()), e.stop[a] != 0};
}

struct Partial {
    std::vector<std::size_t> idx;
    std::vector<LatentStep> steps;
    double cost = 0.0;
    bool done = false;  // STOP fired
};

bool better(const Partial& a, const Partial& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.idx < b.idx;
}

class Search {
public:
    Search(const ForwardModel& fm, const EmbeddingModel& em, const Goal& goal, const std::vector<double>& grid)
        : fm_(fm), em_(em), goal_(goal), grid_(grid) {}

    void exhaustive(std::span<const double> z0) {
        Partial root;
        dfs(z0, root);
    }

    void beam(std::span<const double> z0, std::size_t width) {
        const std::size_t n = goal_.target_classes.size();
        std::vector<Partial> frontier(1);
        for (std::size_t t = 0; t < n; ++t) {
            std::vector<Partial> next;
            for (const auto& p : frontier) {
                const std::span<const double> z = p.steps.empty() ? z0 : std::span<const double>(p.steps.back().z_o);
                const Expansion e = expand(fm_, em_, z, grid_, goal_.target_classes[t]);
                expanded_ += grid_.size();
                for (std::size_t a = 0; a < grid_.size(); ++a) {
                    Partial c = p;
                    c.idx.push_back(a);
                    c.steps.push_back(step_of(e, a));
                    if (e.stop[a]) {
                        c.cost += kStopPenalty * static_cast<double>(n - t);
                        c.done = true;
                        offer(c);
                    } else {
                        c.cost += e.cost[a];
                        if (t + 1 == n) offer(c);
                        else next.push_back(std::move(c));
                    }
                }
            }
            std::sort(next.begin(), next.end(), better);
            if (next.size() > width) next.resize(width);
            frontier = std::move(next);
        }
    }

    bool found() const { return found_; }
    const Partial& best() const { return best_; }
    std::size_t expanded() const { return expanded_; }

private:
    void offer(const Partial& c) {
        if (!found_ || better(c, best_)) {
            best_ = c;
            found_ = true;
        }
    }

    // Children are visited in grid order, so the first optimum found is the
    // lexicographically smallest; costs are non-negative, so a prefix that
    // already reaches the best cost cannot win.
    void dfs(std::span<const double> z, Partial& p) {
        const std::size_t n = goal_.target_classes.size();
        const std::size_t t = p.idx.size();
        const Expansion e = expand(fm_, em_, z, grid_, goal_.target_classes[t]);
        expanded_ += grid_.size();
        for (std::size_t a = 0; a < grid_.size(); ++a) {
            const double cost = e.stop[a] ? p.cost + kStopPenalty * static_cast<double>(n - t) : p.cost + e.cost[a];
            if (found_ && cost >= best_.cost) continue;
            p.idx.push_back(a);
            p.steps.push_back(step_of(e, a));
            const double saved = p.cost;
            p.cost = cost;
            if (e.stop[a] || t + 1 == n) {
                p.done = e.stop[a] != 0;
                offer(p);
                p.done = false;
            } else {
                const std::vector<double> z_next = p.steps.back().z_o;
                dfs(z_next, p);
            }
            p.cost = saved;
            p.steps.pop_back();
            p.idx.pop_back();
        }
    }

    const ForwardModel& fm_;
    const EmbeddingModel& em_;
    const Goal& goal_;
    const std::vector<double>& grid_;
    Partial best_;
    bool found_ = false;
    std::size_t expanded_ = 0;
};

}  // namespace

void validate(const Goal& goal) {
    for (int c : goal.target_classes) {
        if (c < 0 || c >= static_cast<int>(kSliceClasses)) {
            throw std::invalid_argument("goal class " + std::to_string(c) + " is outside 0..4");
        }
    }
}

Goal parse_goal(const std::string& text, VegKind veg_type) {
    Goal g;
    g.veg_type = veg_type;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty()) continue;
        if (std::all_of(item.begin(), item.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
            g.target_classes.push_back(std::stoi(item));
        } else {
            g.target_classes.push_back(parse_slice_class(item));
        }
    }
    validate(g);
    return g;
}

std::vector<double> action_grid(VegKind veg_type) {
    const auto& vt = vegetable_type(veg_type);
    const auto n = static_cast<std::size_t>(std::llround((vt.action_max - vt.action_min) / kGridStep)) + 1;
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) grid[i] = vt.action_min + kGridStep * static_cast<double>(i);
    return grid;
}

double class_cost(const EmbeddingModel& embed_model, std::span<const double> z_s, int target) {
    if (z_s.size() != kEmbeddingDim) throw std::invalid_argument("class_cost: embedding must have 128 entries");
    return class_costs(embed_model, Tensor::from_span({1, kEmbeddingDim}, z_s), target)[0];
}

Plan plan(const ForwardModel& fm, const EmbeddingModel& embed_model, std::span<const double> z0, const Goal& goal,
          const std::vector<double>& grid, const PlanConfig& config) {
    if (grid.empty()) throw std::invalid_argument("plan: empty action grid");
    validate(goal);
    if (goal.target_classes.size() > config.max_goal_length) {
        throw std::invalid_argument("plan: goal longer than " + std::to_string(config.max_goal_length));
    }
    if (z0.size() != kEmbeddingDim) throw std::invalid_argument("plan: embedding must have 128 entries");
    Plan p;
    if (goal.target_classes.empty()) return p;

    Search search(fm, embed_model, goal, grid);
    if (config.beam_width == 0) search.exhaustive(z0);
    else search.beam(z0, config.beam_width);
    const Partial& best = search.best();
    p.steps = best.steps;
    p.cost = best.cost;
    p.expanded = search.expanded();
    // Steps after a predicted STOP keep the action that ended the rollout.
    for (std::size_t t = 0; t < goal.target_classes.size(); ++t) {
        p.actions.push_back(grid[best.idx[std::min(t, best.idx.size() - 1)]]);
    }
    p.feasible = p.cost < kStopPenalty;
    return p;
}

double score_plan(const EmbeddingModel& embed_model, const Plan& plan, const Goal& goal) {
    const std::size_t n = goal.target_classes.size();
    if (plan.actions.size() != n) throw std::invalid_argument("score_plan: plan and goal lengths differ");
    if (plan.steps.size() > n) throw std::invalid_argument("score_plan: more predicted steps than goal entries");
    double cost = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (t >= plan.steps.size()) {
            if (plan.steps.empty() || !plan.steps.back().stop) {
                throw std::invalid_argument("score_plan: missing predicted embeddings");
            }
            break;
        }
        if (plan.steps[t].stop) {
            cost += kStopPenalty * static_cast<double>(n - t);
            break;
        }
        cost += class_cost(embed_model, plan.steps[t].z_s, goal.target_classes[t]);
    }
    return cost;
}

ClosedLoopResult execute_closed_loop(const VegetableState& start, const EmbeddingModel& embed_model,
                                     const ForwardModel& fm, const Goal& goal, std::uint64_t seed,
                                     const ClosedLoopConfig& config) {
    validate(goal);
    ClosedLoopResult r;
    r.goal = goal;
    r.initial_length = start.initial_length;
    const auto grid = action_grid(start.type);
    VegetableState state = start;
    while (r.realized_classes.size() < goal.target_classes.size()) {
        const auto obs = render(state, derive_seed({seed, 0x0B5, static_cast<std::uint64_t>(state.cut_count)}),
                                config.pixel_noise);
        const auto z = embed(embed_model, obs);
        Goal rest{goal.veg_type, std::vector<int>(goal.target_classes.begin() +
                                                      static_cast<std::ptrdiff_t>(r.realized_classes.size()),
                                                  goal.target_classes.end())};
        const Plan p = plan(fm, embed_model, z, rest, grid, config.plan);
        r.plan_costs.push_back(p.cost);
        const double d = p.actions.front();
        r.commanded.push_back(d);
        auto [next, outcome] = apply_cut(state, CutAction{d}, config.noise_sigma);
        if (outcome.stop) {
            r.sim_stop = true;
            break;
        }
        state = next;
        r.realized.push_back(*outcome.slice_thickness);
        r.realized_classes.push_back(classify_thickness(*outcome.slice_thickness, state.type, Role::slice));
    }
    r.success = r.realized_classes == goal.target_classes;
    return r;
}

Goal random_feasible_goal(VegKind veg_type, double length, std::size_t max_length, int max_class, Rng& rng) {
    if (max_length < 1 || max_class < 0 || max_class >= static_cast<int>(kSliceClasses)) {
        throw std::invalid_argument("random_feasible_goal: bad limits");
    }
    const auto& vt = vegetable_type(veg_type);
    const auto grid = action_grid(veg_type);
    // Cheapest grid action landing in each class.
    std::vector<double> cheapest(kSliceClasses, std::numeric_limits<double>::infinity());
    for (double d : grid) {
        const int c = classify_thickness(d, veg_type, Role::slice);
        cheapest[static_cast<std::size_t>(c)] = std::min(cheapest[static_cast<std::size_t>(c)], d);
    }
    const double budget = length - vt.min_hold() - 0.5;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        Goal g{veg_type, {}};
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_length)));
        double need = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const int c = static_cast<int>(rng.uniform_int(0, max_class));
            g.target_classes.push_back(c);
            need += cheapest[static_cast<std::size_t>(c)];
        }
        if (need <= budget) return g;
    }
    throw std::invalid_argument("random_feasible_goal: no feasible goal for this length");
}

std::string plan_to_json(const Plan& plan, const Goal& goal, const EmbeddingModel& embed_model) {
    json predicted = json::array();
    for (const auto& s : plan.steps) {
        predicted.push_back(s.stop ? json("STOP")
                                   : json(static_cast<int>(argmax(predict_class(embed_model, s.z_s, Role::slice)))));
    }
    json doc{{"veg_type", to_string(goal.veg_type)},
             {"goal", goal.target_classes},
             {"actions", plan.actions},
             {"predicted_classes", predicted},
             {"cost", plan.cost},
             {"feasible", plan.feasible},
             {"expanded", plan.expanded}};
    return doc.dump();
}

std::string closed_loop_to_json(const ClosedLoopResult& r) {
    json doc{{"veg_type", to_string(r.goal.veg_type)},
             {"goal", r.goal.target_classes},
             {"initial_length", r.initial_length},
             {"commanded", r.commanded},
             {"realized", r.realized},
             {"realized_classes", r.realized_classes},
             {"plan_costs", r.plan_costs},
             {"sim_stop", r.sim_stop},
             {"success", r.success}};
    return doc.dump();
}

}  // namespace slicing
