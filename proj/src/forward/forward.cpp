#include "slicing/forward/forward.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "slicing/nn/adam.hpp"
#include "slicing/nn/serialize.hpp"
#include "slicing/rng.hpp"

namespace slicing {

using json = nlohmann::json;

namespace {

constexpr std::size_t kIn = kEmbeddingDim + 1;
constexpr std::size_t kOut = 2 * kEmbeddingDim;

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " contains a non-finite value");
    }
}

void add_into(ParamMap& acc, const ParamMap& g) {
    for (const auto& [name, t] : g) {
        auto it = acc.find(name);
        if (it == acc.end()) {
            acc.emplace(name, t);
            continue;
        }
        auto& dst = it->second.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += t[i];
    }
}

double sq_dist(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// One-step outputs for every transition of the table, [n, 256].
Tensor one_step_outputs(const ForwardModel& fm, const TransitionTable& table) {
    const std::size_t n = table.size();
    Tensor x({n, kIn});
    for (std::size_t i = 0; i < n; ++i) {
        auto row = x.row(i);
        std::copy(table.z_before.row(i).begin(), table.z_before.row(i).end(), row.begin());
        row[kEmbeddingDim] = table.action[i];
    }
    return infer(fm.net, x);
}

std::span<const double> out_o(const Tensor& y, std::size_t i) { return y.row(i).subspan(0, kEmbeddingDim); }
std::span<const double> out_s(const Tensor& y, std::size_t i) { return y.row(i).subspan(kEmbeddingDim); }

}  // namespace

std::vector<LayerSpec> forward_layers() {
    return {LayerSpec::dense(kIn, 256), LayerSpec::relu(), LayerSpec::dense(256, 256), LayerSpec::relu(),
            LayerSpec::dense(256, kOut)};
}

ForwardModel make_forward_model(VegKind veg_type, std::uint64_t seed) {
    ForwardModel fm;
    fm.veg_type = veg_type;
    fm.action_max = vegetable_type(veg_type).action_max;
    fm.net = Network({kIn}, forward_layers(), ParamInit{derive_seed({seed, 0xF0})});
    Rng rng(derive_seed({seed, 0x570F}));
    fm.stop_embedding.resize(kEmbeddingDim);
    for (auto& v : fm.stop_embedding) v = rng.normal();
    return fm;
}

StepPrediction predict_step(const ForwardModel& fm, std::span<const double> z_o, double d) {
    if (z_o.size() != kEmbeddingDim) throw std::invalid_argument("predict_step: embedding must have 128 entries");
    require_finite(z_o, "predict_step input");
    if (!std::isfinite(d)) throw std::invalid_argument("predict_step: non-finite action");
    Tensor x({1, kIn});
    std::copy(z_o.begin(), z_o.end(), x.data());
    x[kEmbeddingDim] = d / fm.action_max;
    const Tensor y = infer(fm.net, x);
    return {std::vector<double>(y.values().begin(), y.values().begin() + kEmbeddingDim),
            std::vector<double>(y.values().begin() + kEmbeddingDim, y.values().end())};
}

double stop_distance(const ForwardModel& fm, std::span<const double> z_s) {
    if (z_s.size() != fm.stop_embedding.size()) throw std::invalid_argument("stop_distance: size mismatch");
    return std::sqrt(sq_dist(z_s.data(), fm.stop_embedding.data(), z_s.size()));
}

bool detect_stop(const ForwardModel& fm, std::span<const double> z_s) {
    if (!fm.stop_threshold) throw std::logic_error("detect_stop: forward model has no calibrated STOP threshold");
    return stop_distance(fm, z_s) < *fm.stop_threshold;
}

std::vector<LatentStep> rollout_latent(const ForwardModel& fm, std::span<const double> z0,
                                       const std::vector<double>& actions) {
    std::vector<LatentStep> out;
    std::vector<double> z(z0.begin(), z0.end());
    for (double d : actions) {
        auto p = predict_step(fm, z, d);
        const bool stop = detect_stop(fm, p.z_s);
        z = p.z_o;
        out.push_back({std::move(p.z_o), std::move(p.z_s), stop});
        if (stop) break;
    }
    return out;
}

int horizon_for_epoch(int epoch, int max_horizon, int horizon_epoch_step) {
    if (epoch < 0 || max_horizon < 1 || horizon_epoch_step < 1) throw std::invalid_argument("bad curriculum");
    return std::min(max_horizon, 1 + epoch / horizon_epoch_step);
}

TransitionTable build_transition_table(const Dataset& dataset, const std::vector<int>& episodes,
                                       const EmbeddingModel& embed_model, double action_max) {
    const std::set<int> wanted(episodes.begin(), episodes.end());
    TransitionTable t;
    for (const auto& tr : dataset.transitions) {
        if (wanted.count(tr.episode_id)) t.transitions.push_back(&tr);
    }
    const std::size_t n = t.size();
    if (n == 0) throw std::invalid_argument("transition table: no transitions in the selected episodes");
    std::vector<const Observation*> before, after, slices;
    std::vector<std::size_t> slice_rows;
    for (std::size_t i = 0; i < n; ++i) {
        const auto* tr = t.transitions[i];
        before.push_back(&dataset.image(tr->obs_before));
        after.push_back(&dataset.image(tr->obs_after));
        if (tr->created && tr->slice_obs) {
            slices.push_back(&dataset.image(*tr->slice_obs));
            slice_rows.push_back(i);
        }
        t.action.push_back(tr->action_d / action_max);
    }
    t.z_before = embed_batch(embed_model, before);
    t.z_after = embed_batch(embed_model, after);
    t.z_slice = Tensor({n, kEmbeddingDim});
    if (!slices.empty()) {
        const Tensor zs = embed_batch(embed_model, slices);
        for (std::size_t k = 0; k < slice_rows.size(); ++k) {
            std::copy(zs.row(k).begin(), zs.row(k).end(), t.z_slice.row(slice_rows[k]).begin());
        }
    }
    t.steps_left.assign(n, 1);
    for (std::size_t i = n - 1; i-- > 0;) {
        const auto* a = t.transitions[i];
        const auto* b = t.transitions[i + 1];
        if (a->episode_id == b->episode_id && b->t == a->t + 1 && !a->stop) t.steps_left[i] = t.steps_left[i + 1] + 1;
    }
    return t;
}

void validate(const ForwardTrainConfig& c) {
    if (c.max_horizon < 1) throw std::invalid_argument("max_horizon must be >= 1");
    if (c.horizon_epoch_step < 1) throw std::invalid_argument("horizon_epoch_step must be >= 1");
    if (!(c.lambda1 >= 0.0) || !(c.lambda2 >= 0.0)) throw std::invalid_argument("loss weights must be >= 0");
    if (c.lambda1 == 0.0 && c.lambda2 == 0.0) throw std::invalid_argument("lambda1 and lambda2 cannot both be 0");
    if (c.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (c.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
}

ForwardBatchGrads forward_batch_gradients(const ForwardModel& fm, const TransitionTable& table,
                                          std::span<const Unroll> unrolls, double lambda1, double lambda2,
                                          const Tensor* z_start) {
    const std::size_t batch = unrolls.size();
    if (batch == 0) throw std::invalid_argument("forward_batch_gradients: empty batch");
    std::size_t max_len = 0;
    for (const auto& u : unrolls) {
        if (u.length < 1 || u.start >= table.size() || u.length > table.steps_left[u.start]) {
            throw std::invalid_argument("forward_batch_gradients: unroll leaves its episode");
        }
        max_len = std::max(max_len, u.length);
    }
    const double inv_b = 1.0 / static_cast<double>(batch);
    const double mse_scale = 2.0 / static_cast<double>(kEmbeddingDim);

    struct Step {
        std::vector<std::size_t> rows;
        ForwardResult fwd;
    };
    std::vector<Step> steps;
    ForwardBatchGrads g;
    g.stop_embedding.assign(kEmbeddingDim, 0.0);
    g.input = Tensor({batch, kEmbeddingDim});
    Tensor prev_out;  // output of the previous step, rows in that step's order
    std::vector<std::size_t> prev_pos(batch, 0);
    for (std::size_t k = 0; k < max_len; ++k) {
        Step s;
        for (std::size_t r = 0; r < batch; ++r) {
            if (unrolls[r].length > k) s.rows.push_back(r);
        }
        Tensor x({s.rows.size(), kIn});
        for (std::size_t i = 0; i < s.rows.size(); ++i) {
            const std::size_t r = s.rows[i];
            const std::size_t tr = unrolls[r].start + k;
            auto row = x.row(i);
            std::span<const double> z;
            if (k == 0) {
                z = z_start ? z_start->row(r) : table.z_before.row(tr);
            } else {
                z = out_o(prev_out, prev_pos[r]);
            }
            std::copy(z.begin(), z.end(), row.begin());
            row[kEmbeddingDim] = table.action[tr];
        }
        s.fwd = forward_pass(fm.net, x);
        for (std::size_t i = 0; i < s.rows.size(); ++i) prev_pos[s.rows[i]] = i;
        prev_out = s.fwd.output;
        steps.push_back(std::move(s));
    }

    Tensor carry({batch, kEmbeddingDim});
    for (std::size_t k = max_len; k-- > 0;) {
        const Step& s = steps[k];
        const Tensor& y = s.fwd.output;
        Tensor dy(y.shape());
        for (std::size_t i = 0; i < s.rows.size(); ++i) {
            const std::size_t r = s.rows[i];
            const std::size_t tr = unrolls[r].start + k;
            const double* yo = y.row(i).data();
            const double* ys = yo + kEmbeddingDim;
            const double* to = table.z_after.row(tr).data();
            const double* ts = table.is_stop(tr) ? fm.stop_embedding.data() : table.z_slice.row(tr).data();
            const double mo = sq_dist(yo, to, kEmbeddingDim) / kEmbeddingDim;
            const double ms = sq_dist(ys, ts, kEmbeddingDim) / kEmbeddingDim;
            g.mse_o += mo * inv_b;
            g.mse_s += ms * inv_b;
            g.loss += (lambda1 * mo + lambda2 * ms) * inv_b;
            auto drow = dy.row(i);
            const auto c = carry.row(r);
            for (std::size_t j = 0; j < kEmbeddingDim; ++j) {
                drow[j] = lambda1 * mse_scale * (yo[j] - to[j]) * inv_b + c[j];
                const double ds = lambda2 * mse_scale * (ys[j] - ts[j]) * inv_b;
                drow[kEmbeddingDim + j] = ds;
                if (table.is_stop(tr)) g.stop_embedding[j] -= ds;
            }
            ++g.steps;
        }
        auto back = backward_pass(fm.net, s.fwd.tape, dy);
        add_into(g.net, back.params);
        for (std::size_t i = 0; i < s.rows.size(); ++i) {
            const auto src = back.input.row(i).subspan(0, kEmbeddingDim);
            std::copy(src.begin(), src.end(), carry.row(s.rows[i]).begin());
        }
    }
    g.input = carry;
    return g;
}

OneStepMse one_step_mse(const ForwardModel& fm, const TransitionTable& table) {
    const Tensor y = one_step_outputs(fm, table);
    OneStepMse m;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double* ts = table.is_stop(i) ? fm.stop_embedding.data() : table.z_slice.row(i).data();
        m.mse_o += sq_dist(out_o(y, i).data(), table.z_after.row(i).data(), kEmbeddingDim) / kEmbeddingDim;
        m.mse_s += sq_dist(out_s(y, i).data(), ts, kEmbeddingDim) / kEmbeddingDim;
    }
    m.mse_o /= static_cast<double>(table.size());
    m.mse_s /= static_cast<double>(table.size());
    return m;
}

std::vector<ForwardEpochMetrics> train_forward(ForwardModel& fm, EmbeddingModel& embed_model, const Dataset& dataset,
                                               const std::vector<int>& train_episodes,
                                               const std::vector<int>& val_episodes,
                                               const ForwardTrainConfig& config) {
    validate(config);
    TransitionTable train = build_transition_table(dataset, train_episodes, embed_model, fm.action_max);
    const std::vector<double> zeros(kEmbeddingDim, 0.0);
    if (config.stop_init_radius > 0.0) {
        double max_norm = 0.0;
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (!train.is_stop(i)) max_norm = std::max(max_norm, std::sqrt(sq_dist(train.z_slice.row(i).data(), zeros.data(), kEmbeddingDim)));
        }
        const double norm = std::sqrt(sq_dist(fm.stop_embedding.data(), zeros.data(), kEmbeddingDim));
        if (norm > 0.0 && max_norm > 0.0) {
            for (auto& v : fm.stop_embedding) v *= config.stop_init_radius * max_norm / norm;
        }
    }
    const AdamConfig adam_cfg{config.lr};
    AdamState net_state(fm.net.params(), adam_cfg);
    ParamMap stop_param{{"stop_embedding", Tensor({kEmbeddingDim}, fm.stop_embedding)}};
    AdamState stop_state(stop_param, adam_cfg);
    AdamState trunk_state(embed_model.trunk.params(), adam_cfg);

    std::vector<ForwardEpochMetrics> metrics;
    std::vector<std::size_t> order(train.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.fine_tune_embedding && epoch > 0) {
            train = build_transition_table(dataset, train_episodes, embed_model, fm.action_max);
        }
        const int h = horizon_for_epoch(epoch, config.max_horizon, config.horizon_epoch_step);
        const double lr = scheduled_lr(config.lr, config.final_lr_fraction, epoch, config.epochs);
        net_state.config.lr = trunk_state.config.lr = lr;
        stop_state.config.lr = lr * config.stop_lr_scale;
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed({config.seed, 0xF02, static_cast<std::uint64_t>(epoch)}));
        rng.shuffle(order.begin(), order.end());

        ForwardEpochMetrics m;
        m.epoch = epoch;
        m.horizon = h;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t n = std::min(config.batch_size, order.size() - start);
            std::vector<Unroll> unrolls;
            for (std::size_t i = start; i < start + n; ++i) {
                const std::size_t tr = order[i];
                unrolls.push_back({tr, std::min(static_cast<std::size_t>(h), train.steps_left[tr])});
            }
            std::optional<ForwardResult> trunk_fwd;
            Tensor z_start;
            if (config.fine_tune_embedding) {
                std::vector<const Observation*> obs;
                for (const auto& u : unrolls) obs.push_back(&dataset.image(train.transitions[u.start]->obs_before));
                trunk_fwd = forward_pass(embed_model.trunk, embedding_inputs(obs));
                z_start = trunk_fwd->output;
            }
            auto g = forward_batch_gradients(fm, train, unrolls, config.lambda1, config.lambda2,
                                             config.fine_tune_embedding ? &z_start : nullptr);
            if (!std::isfinite(g.loss)) {
                throw NonFiniteError("train_forward: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batches));
            }
            adam_step(fm.net, g.net, net_state);
            ParamMap stop_grad{{"stop_embedding", Tensor({kEmbeddingDim}, g.stop_embedding)}};
            adam_step(stop_param, stop_grad, stop_state);
            fm.stop_embedding = stop_param.at("stop_embedding").values();
            if (trunk_fwd) {
                auto tg = backward_pass(embed_model.trunk, trunk_fwd->tape, g.input);
                adam_step(embed_model.trunk, tg.params, trunk_state);
            }
            m.train_mse_o += g.mse_o;
            m.train_mse_s += g.mse_s;
            ++batches;
        }
        if (batches > 0) {
            m.train_mse_o /= static_cast<double>(batches);
            m.train_mse_s /= static_cast<double>(batches);
        }
        if (!val_episodes.empty()) {
            const auto val = build_transition_table(dataset, val_episodes, embed_model, fm.action_max);
            const auto vm = one_step_mse(fm, val);
            m.val_mse_o = vm.mse_o;
            m.val_mse_s = vm.mse_s;
        }
        if (config.verbose) {
            std::cerr << "epoch " << epoch << " h " << h << " train_mse_o " << m.train_mse_o << " train_mse_s "
                      << m.train_mse_s << " val_mse_o " << m.val_mse_o << " val_mse_s " << m.val_mse_s << '\n';
        }
        metrics.push_back(m);
    }
    if (config.fine_tune_embedding) train = build_transition_table(dataset, train_episodes, embed_model, fm.action_max);
    calibrate_stop_threshold(fm, train);
    return metrics;
}

double stop_threshold_from_distances(const std::vector<double>& stop, const std::vector<double>& non_stop) {
    if (stop.empty() || non_stop.empty()) {
        throw std::invalid_argument("STOP calibration needs both STOP and non-STOP transitions");
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    const double ms = mean(stop), mn = mean(non_stop);
    if (!(ms < mn)) {
        std::ostringstream msg;
        msg << "STOP calibration: groups do not separate (mean STOP distance " << ms << ", mean non-STOP distance "
            << mn << ")";
        throw std::invalid_argument(msg.str());
    }
    return 0.5 * (ms + mn);
}

double calibrate_stop_threshold(ForwardModel& fm, const TransitionTable& table) {
    const Tensor y = one_step_outputs(fm, table);
    std::vector<double> stop, non_stop;
    for (std::size_t i = 0; i < table.size(); ++i) {
        (table.is_stop(i) ? stop : non_stop).push_back(stop_distance(fm, out_s(y, i)));
    }
    const double tau = stop_threshold_from_distances(stop, non_stop);
    fm.stop_threshold = tau;
    return tau;
}

double BinaryScore::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
double BinaryScore::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
double BinaryScore::f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

ForwardEvaluation evaluate_forward(const ForwardModel& fm, const EmbeddingModel& embed_model,
                                   const TransitionTable& table, int window) {
    ForwardEvaluation ev;
    const Tensor y = one_step_outputs(fm, table);
    std::size_t rem_hit = 0, slice_hit = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto* tr = table.transitions[i];
        const bool predicted_stop = detect_stop(fm, out_s(y, i));
        auto& sc = ev.stop;
        if (tr->stop) (predicted_stop ? sc.tp : sc.fn)++;
        else (predicted_stop ? sc.fp : sc.tn)++;
        if (tr->stop) continue;
        ++ev.one_step_count;
        rem_hit += static_cast<int>(argmax(predict_class(embed_model, out_o(y, i), Role::whole_vegetable))) ==
                   tr->remaining_class;
        if (tr->slice_class) {
            ++ev.slice_count;
            slice_hit += static_cast<int>(argmax(predict_class(embed_model, out_s(y, i), Role::slice))) ==
                         *tr->slice_class;
        }
    }
    ev.remaining_acc = ev.one_step_count ? static_cast<double>(rem_hit) / ev.one_step_count : 0.0;
    ev.slice_acc = ev.slice_count ? static_cast<double>(slice_hit) / ev.slice_count : 0.0;

    std::size_t five_hit = 0;
    const auto w = static_cast<std::size_t>(window);
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table.steps_left[i] < w) continue;
        bool all_cut = true;
        std::vector<double> actions;
        for (std::size_t k = 0; k < w; ++k) {
            all_cut = all_cut && table.transitions[i + k]->created;
            actions.push_back(table.transitions[i + k]->action_d);
        }
        if (!all_cut) continue;
        ++ev.five_step_windows;
        const auto steps = rollout_latent(fm, table.z_before.row(i), actions);
        if (steps.size() != w || steps.back().stop) continue;
        five_hit += static_cast<int>(argmax(predict_class(embed_model, steps.back().z_o, Role::whole_vegetable))) ==
                    table.transitions[i + w - 1]->remaining_class;
    }
    ev.five_step_acc = ev.five_step_windows ? static_cast<double>(five_hit) / ev.five_step_windows : 0.0;
    return ev;
}

std::string forward_model_to_json(const ForwardModel& fm) {
    json params = json::object();
    params_to_json(fm.net.params(), params);
    json doc{{"format_version", kModelFormatVersion},
             {"kind", "forward"},
             {"veg_type", to_string(fm.veg_type)},
             {"action_max", fm.action_max},
             {"arch", arch_to_json(fm.net)},
             {"params", params},
             {"stop_embedding", fm.stop_embedding},
             {"stop_threshold", fm.stop_threshold ? json(*fm.stop_threshold) : json(nullptr)}};
    return doc.dump();
}

ForwardModel forward_model_from_json(const json& doc) {
    ForwardModel fm;
    fm.veg_type = parse_veg_kind(doc.at("veg_type").get<std::string>());
    fm.action_max = doc.at("action_max").get<double>();
    fm.net = network_from_json(doc.at("arch"), doc.at("params"));
    if (fm.net.input_shape() != Shape{kIn} || fm.net.output_shape() != Shape{kOut}) {
        throw std::invalid_argument("forward model has unexpected input/output shapes");
    }
    fm.stop_embedding = doc.at("stop_embedding").get<std::vector<double>>();
    if (fm.stop_embedding.size() != kEmbeddingDim) throw std::invalid_argument("stop_embedding must have 128 entries");
    require_finite(fm.stop_embedding, "stop_embedding");
    if (!doc.at("stop_threshold").is_null()) {
        const double tau = doc.at("stop_threshold").get<double>();
        if (!(tau > 0.0)) throw std::invalid_argument("stop_threshold must be positive");
        fm.stop_threshold = tau;
    }
    if (!(fm.action_max > 0.0)) throw std::invalid_argument("action_max must be positive");
    return fm;
}

void save_forward_model(const ForwardModel& fm, const std::filesystem::path& file) {
    write_text_file(file, forward_model_to_json(fm));
}

ForwardModel load_forward_model(const std::filesystem::path& file) {
    return forward_model_from_json(read_model_file(file, "forward"));
}

void write_forward_metrics_csv(const std::vector<ForwardEpochMetrics>& metrics, const std::filesystem::path& file) {
    std::ostringstream out;
    out.precision(10);
    out << "epoch,horizon,train_mse_o,train_mse_s,val_mse_o,val_mse_s\n";
    for (const auto& m : metrics) {
        out << m.epoch << ',' << m.horizon << ',' << m.train_mse_o << ',' << m.train_mse_s << ',' << m.val_mse_o
            << ',' << m.val_mse_s << '\n';
    }
    write_text_file(file, out.str());
}

}  // namespace slicing
