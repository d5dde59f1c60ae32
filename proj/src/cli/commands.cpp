#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "slicing/analysis/analysis.hpp"
#include "slicing/cli/cli.hpp"
#include "slicing/dmp/dmp.hpp"
#include "slicing/embedding/embedding.hpp"
#include "slicing/forward/forward.hpp"
#include "slicing/nn/serialize.hpp"
#include "slicing/planner/planner.hpp"
#include "slicing/sim/dataset.hpp"
#include "slicing/sim/render.hpp"

namespace slicing::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Summary {
    std::vector<std::string> outputs;
    json headline = json::object();
};

fs::path require_out(const RunConfig& c) {
    if (!c.out || c.out->empty()) throw UsageError("--out is required");
    fs::path out(*c.out);
    if (fs::exists(out) && !fs::is_directory(out)) throw UsageError("--out must be a directory: " + out.string());
    return out;
}

fs::path require_input(const std::optional<std::string>& value, const char* flag) {
    if (!value || value->empty()) throw UsageError(std::string(flag) + " is required");
    fs::path p(*value);
    if (!fs::exists(p)) throw UsageError(std::string(flag) + ": no such file or directory: " + p.string());
    return p;
}

VegKind veg_from(const RunConfig& c, VegKind fallback) {
    if (!c.type) return fallback;
    try {
        return parse_veg_kind(*c.type);
    } catch (const std::exception&) {
        throw UsageError("unknown vegetable type \"" + *c.type + "\"");
    }
}

void check_type(const RunConfig& c, VegKind actual, const char* what) {
    if (c.type && veg_from(c, actual) != actual) {
        throw UsageError(std::string(what) + " is for " + to_string(actual) + ", not " + *c.type);
    }
}

VegKind dataset_type(const Dataset& ds) {
    if (ds.transitions.empty()) throw UsageError("dataset has no transitions");
    return ds.transitions.front().veg_type;
}

std::vector<double> parse_numbers(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (item.find_first_not_of(" \t", pos) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(std::string(flag) + ": not a number: \"" + item + "\"");
        }
    }
    return out;
}

// Held-out episodes by default, all episodes with split = "all".
std::vector<int> eval_episodes(const Dataset& ds, const RunConfig& c, std::uint64_t seed) {
    const std::string split = c.split.value_or("val");
    if (split == "all") return ds.episode_ids();
    if (split != "val") throw UsageError("--split must be val or all");
    return split_episodes(ds.episode_ids(), c.train_fraction.value_or(0.8), seed).second;
}

void write_lines(const fs::path& file, const std::vector<std::string>& lines) {
    std::string text;
    for (const auto& l : lines) text += l + '\n';
    write_text_file(file, text);
}

Summary gen_data(const RunConfig& c) {
    const auto out = require_out(c);
    DatasetConfig dc;
    dc.veg_type = veg_from(c, VegKind::cucumber);
    dc.episodes = c.episodes.value_or(2000);
    dc.seed = effective_seed(c);
    dc.noise_sigma = c.noise_sigma.value_or(kDefaultCutNoise);
    if (dc.episodes < 1) throw UsageError("--episodes must be >= 1");
    if (dc.noise_sigma < 0.0) throw UsageError("--noise-sigma must be >= 0");
    const auto ds = generate_dataset(dc);
    write_dataset(ds, out);
    Summary s;
    s.outputs = {(out / "index.jsonl").string(), (out / "img").string()};
    s.headline = {{"episodes", dc.episodes},
                  {"transitions", ds.transitions.size()},
                  {"slice_transitions", ds.slice_count()},
                  {"stop_transitions", ds.stop_count()},
                  {"images", ds.images.size()}};
    return s;
}

Summary train_embedding_cmd(const RunConfig& c) {
    const auto data = require_input(c.data, "--data");
    const auto out = require_out(c);
    const auto ds = read_dataset(data);
    check_type(c, dataset_type(ds), "dataset");
    EmbedTrainConfig ec;
    ec.seed = effective_seed(c);
    if (c.epochs) ec.epochs = *c.epochs;
    if (c.lr) ec.lr = *c.lr;
    if (c.batch_size) ec.batch_size = *c.batch_size;
    if (c.train_fraction) ec.train_fraction = *c.train_fraction;
    if (ec.epochs < 1 || ec.batch_size < 1 || !(ec.lr > 0.0)) throw UsageError("epochs, batch size and lr must be positive");
    if (!(ec.train_fraction > 0.0 && ec.train_fraction < 1.0)) throw UsageError("--train-fraction must be in (0, 1)");
    auto r = train_embedding(ds, ec);
    save_embedding_model(r.model, out / "embedding.json");
    write_embedding_metrics_csv(r.metrics, out / "embedding_metrics.csv");
    Summary s;
    s.outputs = {(out / "embedding.json").string(), (out / "embedding_metrics.csv").string()};
    const auto& m = r.metrics.back();
    s.headline = {{"epochs", ec.epochs},
                  {"train_loss", m.train_loss},
                  {"val_loss", m.val_loss},
                  {"slice_acc", m.slice_acc},
                  {"remaining_acc", m.remaining_acc}};
    return s;
}

Summary eval_embedding_cmd(const RunConfig& c) {
    const auto data = require_input(c.data, "--data");
    const auto model_path = require_input(c.embedding, "--embedding");
    const auto out = require_out(c);
    const auto ds = read_dataset(data);
    const auto em = load_embedding_model(model_path);
    if (dataset_type(ds) != em.veg_type) throw UsageError("dataset and embedding model are for different vegetables");
    check_type(c, em.veg_type, "embedding model");
    const auto eval = evaluate_embedding(em, labeled_observations(ds, eval_episodes(ds, c, effective_seed(c))));
    std::vector<std::string> slice_names;
    for (int k = 0; k < static_cast<int>(kSliceClasses); ++k) slice_names.push_back(slice_class_name(k));
    const auto sc = confusion(eval.slice_true, eval.slice_pred, kSliceClasses, slice_names);
    const auto rc = confusion(eval.remaining_true, eval.remaining_pred, kRemainingClasses);
    write_confusion_csv(sc.matrix, out / "confusion.csv");
    write_confusion_csv(rc.matrix, out / "confusion_remaining.csv");
    const auto pair = densest_confusion(sc.matrix);
    std::map<std::string, double> metrics{{"loss", eval.loss},
                                          {"slice_acc", sc.accuracy},
                                          {"remaining_acc", rc.accuracy},
                                          {"slice_adjacent_error_rate", sc.adjacent_error_rate},
                                          {"remaining_adjacent_error_rate", rc.adjacent_error_rate},
                                          {"slice_samples", static_cast<double>(eval.slice_true.size())},
                                          {"remaining_samples", static_cast<double>(eval.remaining_true.size())}};
    write_metrics_csv(metrics, out / "metrics.csv");
    Summary s;
    s.outputs = {(out / "confusion.csv").string(), (out / "confusion_remaining.csv").string(),
                 (out / "metrics.csv").string()};
    s.headline = metrics;
    s.headline["densest_slice_confusion"] = {pair[0], pair[1]};
    return s;
}

ForwardTrainConfig forward_config(const RunConfig& c) {
    ForwardTrainConfig fc;
    fc.seed = effective_seed(c);
    if (c.epochs) fc.epochs = *c.epochs;
    if (c.lr) fc.lr = *c.lr;
    if (c.batch_size) fc.batch_size = *c.batch_size;
    if (c.lambda1) fc.lambda1 = *c.lambda1;
    if (c.lambda2) fc.lambda2 = *c.lambda2;
    if (c.max_horizon) fc.max_horizon = *c.max_horizon;
    if (c.horizon_epoch_step) fc.horizon_epoch_step = *c.horizon_epoch_step;
    if (c.fine_tune_embedding) fc.fine_tune_embedding = *c.fine_tune_embedding;
    try {
        validate(fc);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (fc.epochs < 1 || !(fc.lr > 0.0)) throw UsageError("epochs and lr must be positive");
    return fc;
}

Summary train_forward_cmd(const RunConfig& c) {
    const auto data = require_input(c.data, "--data");
    const auto model_path = require_input(c.embedding, "--embedding");
    const auto out = require_out(c);
    const auto fc = forward_config(c);
    const double frac = c.train_fraction.value_or(0.8);
    if (!(frac > 0.0 && frac < 1.0)) throw UsageError("--train-fraction must be in (0, 1)");
    const auto ds = read_dataset(data);
    auto em = load_embedding_model(model_path);
    if (dataset_type(ds) != em.veg_type) throw UsageError("dataset and embedding model are for different vegetables");
    check_type(c, em.veg_type, "embedding model");
    const auto [train, val] = split_episodes(ds.episode_ids(), frac, fc.seed);
    auto fm = make_forward_model(em.veg_type, fc.seed);
    const auto metrics = train_forward(fm, em, ds, train, val, fc);
    save_forward_model(fm, out / "forward.json");
    write_forward_metrics_csv(metrics, out / "forward_metrics.csv");
    Summary s;
    s.outputs = {(out / "forward.json").string(), (out / "forward_metrics.csv").string()};
    if (fc.fine_tune_embedding) {
        save_embedding_model(em, out / "embedding_finetuned.json");
        s.outputs.push_back((out / "embedding_finetuned.json").string());
    }
    s.headline = {{"epochs", fc.epochs},
                  {"final_horizon", metrics.back().horizon},
                  {"val_mse_o", metrics.back().val_mse_o},
                  {"val_mse_s", metrics.back().val_mse_s},
                  {"stop_threshold", *fm.stop_threshold}};
    return s;
}

struct Models {
    EmbeddingModel em;
    ForwardModel fm;
};

Models load_models(const RunConfig& c) {
    const auto ep = require_input(c.embedding, "--embedding");
    const auto fp = require_input(c.forward, "--forward");
    Models m{load_embedding_model(ep), load_forward_model(fp)};
    if (m.em.veg_type != m.fm.veg_type) throw UsageError("embedding and forward models are for different vegetables");
    check_type(c, m.em.veg_type, "models");
    if (!m.fm.stop_threshold) throw UsageError("forward model has no calibrated STOP threshold");
    return m;
}

Summary eval_forward_cmd(const RunConfig& c) {
    const auto data = require_input(c.data, "--data");
    const auto m = load_models(c);
    const auto out = require_out(c);
    const auto ds = read_dataset(data);
    if (dataset_type(ds) != m.em.veg_type) throw UsageError("dataset and models are for different vegetables");
    const auto table = build_transition_table(ds, eval_episodes(ds, c, effective_seed(c)), m.em, m.fm.action_max);
    const auto ev = evaluate_forward(m.fm, m.em, table);
    std::map<std::string, double> metrics{{"remaining_acc", ev.remaining_acc},
                                          {"slice_acc", ev.slice_acc},
                                          {"five_step_acc", ev.five_step_acc},
                                          {"five_step_windows", static_cast<double>(ev.five_step_windows)},
                                          {"stop_precision", ev.stop.precision()},
                                          {"stop_recall", ev.stop.recall()},
                                          {"stop_f1", ev.stop.f1()}};
    const auto mse = one_step_mse(m.fm, table);
    metrics["mse_o"] = mse.mse_o;
    metrics["mse_s"] = mse.mse_s;
    write_metrics_csv(metrics, out / "metrics.csv");
    Summary s;
    s.outputs = {(out / "metrics.csv").string()};
    s.headline = metrics;
    return s;
}

VegetableState start_state(const RunConfig& c, VegKind veg, std::uint64_t seed) {
    const auto& vt = vegetable_type(veg);
    const double length = c.length.value_or(vt.nominal_length);
    if (!(length > 0.0)) throw UsageError("--length must be positive");
    return vegetable_with_length(veg, length, seed);
}

Summary plan_cmd(const RunConfig& c) {
    const auto m = load_models(c);
    const auto out = require_out(c);
    if (!c.goal) throw UsageError("--goal is required");
    Goal goal;
    try {
        goal = parse_goal(*c.goal, m.em.veg_type);
    } catch (const std::exception& e) {
        throw UsageError(std::string("--goal: ") + e.what());
    }
    PlanConfig pc;
    if (c.beam_width) pc.beam_width = *c.beam_width;
    if (goal.target_classes.size() > pc.max_goal_length) throw UsageError("--goal has more than 5 entries");
    const auto seed = effective_seed(c);
    const auto state = start_state(c, m.em.veg_type, seed);
    const auto z0 = embed(m.em, render(state, seed));
    const auto p = plan(m.fm, m.em, z0, goal, action_grid(m.em.veg_type), pc);
    write_lines(out / "plan.jsonl", {plan_to_json(p, goal, m.em)});
    Summary s;
    s.outputs = {(out / "plan.jsonl").string()};
    s.headline = {{"cost", p.cost}, {"feasible", p.feasible}, {"actions", p.actions}};
    if (c.execute.value_or(false)) {
        ClosedLoopConfig cc;
        cc.plan = pc;
        if (c.noise_sigma) cc.noise_sigma = *c.noise_sigma;
        const auto r = execute_closed_loop(state, m.em, m.fm, goal, seed, cc);
        write_lines(out / "episode.jsonl", {closed_loop_to_json(r)});
        s.outputs.push_back((out / "episode.jsonl").string());
        s.headline["success"] = r.success;
        s.headline["realized_classes"] = r.realized_classes;
    }
    return s;
}

Summary rollout_cmd(const RunConfig& c) {
    const auto m = load_models(c);
    const auto out = require_out(c);
    if (!c.actions) throw UsageError("--actions is required");
    const auto actions = parse_numbers(*c.actions, "--actions");
    const auto seed = effective_seed(c);
    auto state = start_state(c, m.em.veg_type, seed);
    const auto z0 = embed(m.em, render(state, seed));
    const auto steps = rollout_latent(m.fm, z0, actions);

    std::vector<std::string> lines;
    int rem_hits = 0;
    bool sim_stopped = false;
    for (std::size_t t = 0; t < steps.size(); ++t) {
        json row{{"step", t + 1}, {"d", actions[t]}, {"predicted_stop", steps[t].stop}};
        row["predicted_remaining_class"] = argmax(predict_class(m.em, steps[t].z_o, Role::whole_vegetable));
        row["predicted_slice_class"] =
            steps[t].stop ? json(nullptr) : json(argmax(predict_class(m.em, steps[t].z_s, Role::slice)));
        if (!sim_stopped) {
            auto [next, outcome] = apply_cut(state, CutAction{actions[t]}, c.noise_sigma.value_or(kDefaultCutNoise));
            sim_stopped = outcome.stop;
            state = next;
            row["sim_stop"] = outcome.stop;
            row["true_remaining_class"] = classify_thickness(state.remaining_length, state.type, Role::whole_vegetable);
            row["true_slice_class"] =
                outcome.slice_thickness ? json(classify_thickness(*outcome.slice_thickness, state.type, Role::slice))
                                        : json(nullptr);
            rem_hits += row["true_remaining_class"] == row["predicted_remaining_class"];
        }
        lines.push_back(row.dump());
    }
    write_lines(out / "rollout.jsonl", lines);
    Summary s;
    s.outputs = {(out / "rollout.jsonl").string()};
    s.headline = {{"steps", steps.size()},
                  {"predicted_stop", !steps.empty() && steps.back().stop},
                  {"remaining_class_matches", rem_hits}};
    return s;
}

Summary pca_cmd(const RunConfig& c) {
    const auto data = require_input(c.data, "--data");
    const auto model_path = require_input(c.embedding, "--embedding");
    const auto out = require_out(c);
    const std::string role_name = c.role.value_or("slice");
    Role role;
    try {
        role = parse_role(role_name);
    } catch (const std::exception&) {
        throw UsageError("--role must be slice or whole_vegetable");
    }
    const auto ds = read_dataset(data);
    const auto em = load_embedding_model(model_path);
    if (dataset_type(ds) != em.veg_type) throw UsageError("dataset and embedding model are for different vegetables");
    const auto episodes = eval_episodes(ds, c, effective_seed(c));
    const std::set<int> wanted(episodes.begin(), episodes.end());

    std::vector<const Observation*> obs;
    std::vector<int> classes, step;
    std::set<std::string> seen;
    auto add = [&](const std::string& path, int cls, int t) {
        if (!seen.insert(path).second) return;
        obs.push_back(&ds.image(path));
        classes.push_back(cls);
        step.push_back(t);
    };
    for (const auto& tr : ds.transitions) {
        if (!wanted.count(tr.episode_id)) continue;
        if (role == Role::slice) {
            if (tr.slice_obs && tr.slice_class) add(*tr.slice_obs, *tr.slice_class, tr.t);
        } else {
            add(tr.obs_before, classify_thickness(tr.remaining_before(), tr.veg_type, Role::whole_vegetable), tr.t);
            add(tr.obs_after, tr.remaining_class, tr.t + 1);
        }
    }
    if (obs.size() < 3) throw UsageError("fewer than 3 observations to analyse");
    const Tensor z = embed_batch(em, obs);
    Matrix pts;
    for (std::size_t i = 0; i < obs.size(); ++i) pts.emplace_back(z.row(i).begin(), z.row(i).end());
    const auto model = pca_fit(pts);
    const auto proj = pca_project(model, pts);
    std::vector<PcaPoint> rows;
    Matrix flat;
    for (std::size_t i = 0; i < proj.size(); ++i) {
        rows.push_back({proj[i][0], proj[i][1], classes[i], to_string(role), step[i]});
        flat.push_back({proj[i][0], proj[i][1]});
    }
    write_pca_points_csv(rows, out / "pca_points.csv");
    const std::size_t k = num_classes(role);
    const auto adj2 = centroid_adjacency(class_centroids(flat, classes, k));
    const auto adjn = centroid_adjacency(class_centroids(pts, classes, k));
    std::map<std::string, double> metrics{{"points", static_cast<double>(pts.size())},
                                          {"explained_ratio_1", model.explained_ratio(0)},
                                          {"explained_ratio_2", model.explained_ratio(1)},
                                          {"adjacency_triples", static_cast<double>(adj2.triples)},
                                          {"adjacency_violations_2d", static_cast<double>(adj2.violations)},
                                          {"adjacency_violations_full", static_cast<double>(adjn.violations)}};
    write_metrics_csv(metrics, out / "metrics.csv");
    Summary s;
    s.outputs = {(out / "pca_points.csv").string(), (out / "metrics.csv").string()};
    s.headline = metrics;
    return s;
}

Summary dmp_fit_cmd(const RunConfig& c) {
    const auto out = require_out(c);
    dmp::DmpConfig dc;
    if (c.n_basis) dc.n_basis = *c.n_basis;
    if (c.ridge_lambda) dc.lambda = *c.ridge_lambda;
    if (dc.n_basis < 2) throw UsageError("--n-basis must be >= 2");
    if (!(dc.lambda >= 0.0)) throw UsageError("--ridge-lambda must be >= 0");
    std::vector<dmp::Demonstration> demos;
    Summary s;
    if (c.demos) {
        const auto dir = require_input(c.demos, "--demos");
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.path().extension() == ".csv") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw UsageError("--demos: no .csv files in " + dir.string());
        for (const auto& f : files) demos.push_back(dmp::read_trajectory_csv(f));
    } else {
        const std::size_t n = c.n_demos.value_or(10);
        if (n < 1) throw UsageError("--n-demos must be >= 1");
        demos = dmp::synth_demos(effective_seed(c), n);
        for (std::size_t i = 0; i < demos.size(); ++i) {
            std::ostringstream name;
            name << "demo_" << std::setw(2) << std::setfill('0') << i << ".csv";
            fs::create_directories(out / "demos");
            dmp::write_trajectory_csv(demos[i], out / "demos" / name.str());
        }
        s.outputs.push_back((out / "demos").string());
    }
    const auto params = dmp::fit_dmp(demos, dc);
    write_text_file(out / "dmp.json", dmp::params_to_json(params));
    s.outputs.push_back((out / "dmp.json").string());

    const auto traj = dmp::rollout(params);
    const auto rmse = dmp::rmse_per_joint(traj, dmp::mean_trajectory(demos));
    double endpoint = 0.0;
    for (std::size_t j = 0; j < params.joints.size(); ++j) {
        endpoint = std::max(endpoint, std::abs(traj.joints[j].back() - params.joints[j].goal));
    }
    s.headline = {{"demos", demos.size()},
                  {"max_rmse_to_mean", *std::max_element(rmse.begin(), rmse.end())},
                  {"max_endpoint_error", endpoint}};
    return s;
}

Summary dmp_rollout_cmd(const RunConfig& c) {
    const auto model = require_input(c.dmp, "--dmp");
    const auto out = require_out(c);
    const double dt = c.dt.value_or(1e-3);
    if (!(dt > 0.0)) throw UsageError("--dt must be positive");
    std::ifstream in(model);
    std::stringstream buf;
    buf << in.rdbuf();
    auto params = dmp::params_from_json(buf.str());
    if (c.cut_distance) params = dmp::parameterize_cut(params, *c.cut_distance);
    const auto traj = dmp::rollout(params, dt);
    fs::create_directories(out);
    dmp::write_trajectory_csv(traj, out / "trajectory.csv");
    double endpoint = 0.0;
    for (std::size_t j = 0; j < params.joints.size(); ++j) {
        endpoint = std::max(endpoint, std::abs(traj.joints[j].back() - params.joints[j].goal));
    }
    Summary s;
    s.outputs = {(out / "trajectory.csv").string()};
    s.headline = {{"samples", traj.samples()}, {"max_endpoint_error", endpoint}};
    return s;
}

// Options shared by every subcommand plus the ones named in `extra`.
struct Registrar {
    CLI::App* app;
    RunConfig& flags;

    template <class T>
    void opt(const std::string& name, std::optional<T> RunConfig::*member, const std::string& help) {
        app->add_option_function<T>(name, [&f = flags, member](const T& v) { f.*member = v; }, help);
    }
    void flag(const std::string& name, std::optional<bool> RunConfig::*member, const std::string& help) {
        app->add_flag_callback(name, [&f = flags, member] { f.*member = true; }, help);
    }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Vegetable slicing: data, representation learning, latent planning, DMP cutting motions"};
    app.require_subcommand(1, 1);
    RunConfig flags;
    std::string config_path;

    using Command = std::function<Summary(const RunConfig&)>;
    std::vector<std::pair<CLI::App*, Command>> commands;
    auto add = [&](const char* name, const char* help, Command fn,
                   const std::function<void(Registrar&)>& options) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON config file; flags override its values");
        Registrar r{sub, flags};
        r.opt("--seed", &RunConfig::seed, "Seed (falls back to SLICE_SEED, then 0)");
        r.opt("--out", &RunConfig::out, "Output directory");
        options(r);
        commands.emplace_back(sub, std::move(fn));
    };
    auto type = [](Registrar& r) { r.opt("--type", &RunConfig::type, "cucumber or tomato"); };
    auto split = [](Registrar& r) {
        r.opt("--split", &RunConfig::split, "val (held-out episodes, default) or all");
        r.opt("--train-fraction", &RunConfig::train_fraction, "Training share of the episode split");
    };
    auto training = [](Registrar& r) {
        r.opt("--epochs", &RunConfig::epochs, "Training epochs");
        r.opt("--lr", &RunConfig::lr, "Initial Adam learning rate");
        r.opt("--batch-size", &RunConfig::batch_size, "Mini-batch size");
        r.opt("--train-fraction", &RunConfig::train_fraction, "Training share of the episode split");
    };

    add("gen-data", "Generate a synthetic slicing dataset", gen_data, [&](Registrar& r) {
        type(r);
        r.opt("--episodes", &RunConfig::episodes, "Number of episodes");
        r.opt("--noise-sigma", &RunConfig::noise_sigma, "Cut execution noise (cm)");
    });
    add("train-embedding", "Train the embedding network on the auxiliary classification tasks", train_embedding_cmd,
        [&](Registrar& r) {
            type(r);
            r.opt("--data", &RunConfig::data, "Dataset directory");
            training(r);
        });
    add("train-forward", "Train the latent forward model", train_forward_cmd, [&](Registrar& r) {
        type(r);
        r.opt("--data", &RunConfig::data, "Dataset directory");
        r.opt("--embedding", &RunConfig::embedding, "Embedding model file");
        training(r);
        r.opt("--lambda1", &RunConfig::lambda1, "Weight of the object-embedding loss");
        r.opt("--lambda2", &RunConfig::lambda2, "Weight of the slice-embedding loss");
        r.opt("--max-horizon", &RunConfig::max_horizon, "Longest unroll");
        r.opt("--horizon-epoch-step", &RunConfig::horizon_epoch_step, "Epochs per horizon increase");
        r.flag("--fine-tune-embedding", &RunConfig::fine_tune_embedding, "Also update the embedding trunk");
    });
    add("eval-embedding", "Confusion matrices of the embedding heads", eval_embedding_cmd, [&](Registrar& r) {
        type(r);
        r.opt("--data", &RunConfig::data, "Dataset directory");
        r.opt("--embedding", &RunConfig::embedding, "Embedding model file");
        split(r);
    });
    add("eval-forward", "One-step, five-step and STOP metrics of the forward model", eval_forward_cmd,
        [&](Registrar& r) {
            type(r);
            r.opt("--data", &RunConfig::data, "Dataset directory");
            r.opt("--embedding", &RunConfig::embedding, "Embedding model file");
            r.opt("--forward", &RunConfig::forward, "Forward model file");
            split(r);
        });
    add("plan", "Plan cuts for a goal sequence of slice classes", plan_cmd, [&](Registrar& r) {
        type(r);
        r.opt("--embedding", &RunConfig::embedding, "Embedding model file");
        r.opt("--forward", &RunConfig::forward, "Forward model file");
        r.opt("--goal", &RunConfig::goal, "Comma-separated slice classes, by name or index");
        r.opt("--length", &RunConfig::length, "Initial vegetable length (cm)");
        r.opt("--beam-width", &RunConfig::beam_width, "Beam width (0: exhaustive)");
        r.opt("--noise-sigma", &RunConfig::noise_sigma, "Cut execution noise (cm) with --execute");
        r.flag("--execute", &RunConfig::execute, "Run the closed loop in the simulator");
    });
    add("rollout", "Latent rollout of an action sequence next to the simulator", rollout_cmd, [&](Registrar& r) {
        type(r);
        r.opt("--embedding", &RunConfig::embedding, "Embedding model file");
        r.opt("--forward", &RunConfig::forward, "Forward model file");
        r.opt("--actions", &RunConfig::actions, "Comma-separated cut thicknesses (cm)");
        r.opt("--length", &RunConfig::length, "Initial vegetable length (cm)");
        r.opt("--noise-sigma", &RunConfig::noise_sigma, "Cut execution noise (cm)");
    });
    add("pca", "2D PCA of embeddings", pca_cmd, [&](Registrar& r) {
        r.opt("--data", &RunConfig::data, "Dataset directory");
        r.opt("--embedding", &RunConfig::embedding, "Embedding model file");
        r.opt("--role", &RunConfig::role, "slice (default) or whole_vegetable");
        split(r);
    });
    add("dmp-fit", "Fit DMPs to demonstrations", dmp_fit_cmd, [&](Registrar& r) {
        r.opt("--demos", &RunConfig::demos, "Directory of demonstration CSVs (synthesized when absent)");
        r.opt("--n-demos", &RunConfig::n_demos, "Synthetic demonstrations");
        r.opt("--n-basis", &RunConfig::n_basis, "Basis functions per joint");
        r.opt("--ridge-lambda", &RunConfig::ridge_lambda, "Ridge regularization");
    });
    add("dmp-rollout", "Integrate a fitted DMP", dmp_rollout_cmd, [&](Registrar& r) {
        r.opt("--dmp", &RunConfig::dmp, "DMP parameter file");
        r.opt("--cut-distance", &RunConfig::cut_distance, "Cut distance d (cm) for the approach joint goal");
        r.opt("--dt", &RunConfig::dt, "Integration step (s)");
    });

    std::string command = argc > 1 ? argv[1] : "";
    auto summary_line = [&](const std::string& status, const Summary& s, const std::string& error = {}) {
        json doc{{"command", command}, {"status", status}, {"outputs", s.outputs}, {"headline_metrics", s.headline}};
        if (!error.empty()) doc["error"] = error;
        out << doc.dump() << '\n';
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        summary_line("usage_error", {}, e.what());
        return 2;
    }

    for (const auto& [sub, fn] : commands) {
        if (!sub->parsed()) continue;
        command = sub->get_name();
        try {
            RunConfig cfg = config_path.empty() ? flags : overlay(load_config(config_path), flags);
            const Summary s = fn(cfg);
            summary_line("ok", s);
            return 0;
        } catch (const UsageError& e) {
            err << "usage error: " << e.what() << '\n';
            summary_line("usage_error", {}, e.what());
            return 2;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n';
            summary_line("error", {}, e.what());
            return 1;
        }
    }
    return 2;
}

}  // namespace slicing::cli
