#include "slicing/embedding/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <iostream>
#include <numeric>
#include <set>

#include "slicing/nn/adam.hpp"
#include "slicing/nn/loss.hpp"
#include "slicing/nn/serialize.hpp"
#include "slicing/rng.hpp"

namespace slicing {

using json = nlohmann::json;

namespace {

constexpr std::size_t kEvalChunk = 256;

Tensor gather_rows(const Tensor& src, const std::vector<std::size_t>& rows) {
    Shape shape = src.shape();
    shape[0] = rows.size();
    Tensor out(shape);
    const std::size_t stride = src.size() / src.dim(0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(src.data() + rows[r] * stride, stride, out.data() + r * stride);
    }
    return out;
}

ParamMap zero_grads(const Network& net) {
    ParamMap g;
    for (const auto& [name, t] : net.params()) g.emplace(name, Tensor(t.shape()));
    return g;
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
    if (truth.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

Tensor stack_inputs(const std::vector<LabeledObservation>& samples) {
    Tensor out({samples.size(), 1, kImageSize, kImageSize});
    const std::size_t stride = kImageSize * kImageSize;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto crop = crop_resize(*samples[i].obs);
        std::copy(crop.begin(), crop.end(), out.data() + i * stride);
    }
    return out;
}

}  // namespace

double scheduled_lr(double lr, double final_fraction, int epoch, int epochs) {
    if (epochs <= 1) return lr;
    const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
    return lr * (1.0 - t * (1.0 - final_fraction));
}

std::vector<LayerSpec> embedding_trunk_layers() {
    return {LayerSpec::conv2d(1, 8, 3, 2, 1), LayerSpec::relu(),          LayerSpec::flatten(),
            LayerSpec::dense(2048, 256),      LayerSpec::relu(),          LayerSpec::dense(256, kEmbeddingDim)};
}

EmbeddingModel make_embedding_model(VegKind veg_type, std::uint64_t seed) {
    EmbeddingModel m;
    m.veg_type = veg_type;
    m.trunk = Network({1, kImageSize, kImageSize}, embedding_trunk_layers(), ParamInit{derive_seed({seed, 0})});
    m.slice_head = Network({kEmbeddingDim}, {LayerSpec::dense(kEmbeddingDim, kSliceClasses)},
                           ParamInit{derive_seed({seed, 1})});
    m.remaining_head = Network({kEmbeddingDim}, {LayerSpec::dense(kEmbeddingDim, kRemainingClasses)},
                               ParamInit{derive_seed({seed, 2})});
    return m;
}

Tensor embedding_input(const Observation& obs) {
    return Tensor({1, kImageSize, kImageSize}, crop_resize(obs));
}

Tensor embedding_inputs(const std::vector<const Observation*>& obs) {
    Tensor out({obs.size(), 1, kImageSize, kImageSize});
    const std::size_t stride = kImageSize * kImageSize;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto crop = crop_resize(*obs[i]);
        std::copy(crop.begin(), crop.end(), out.data() + i * stride);
    }
    return out;
}

std::vector<double> embed(const EmbeddingModel& model, const Observation& obs) {
    return infer(model.trunk, as_batch(embedding_input(obs))).values();
}

Tensor embed_batch(const EmbeddingModel& model, const std::vector<const Observation*>& obs) {
    if (obs.empty()) throw std::invalid_argument("embed_batch: no observations");
    Tensor out({obs.size(), kEmbeddingDim});
    for (std::size_t start = 0; start < obs.size(); start += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, obs.size() - start);
        std::vector<const Observation*> chunk(obs.begin() + static_cast<std::ptrdiff_t>(start),
                                              obs.begin() + static_cast<std::ptrdiff_t>(start + n));
        const Tensor z = infer(model.trunk, embedding_inputs(chunk));
        std::copy(z.values().begin(), z.values().end(), out.data() + start * kEmbeddingDim);
    }
    return out;
}

std::vector<double> predict_class(const EmbeddingModel& model, std::span<const double> z, Role role) {
    if (z.size() != kEmbeddingDim) throw std::invalid_argument("predict_class: embedding must have 128 entries");
    const Tensor logits = infer(model.head(role), Tensor::from_span({1, kEmbeddingDim}, z));
    return softmax(logits.span());
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<LabeledObservation> labeled_observations(const Dataset& dataset, const std::vector<int>& episodes) {
    const std::set<int> wanted(episodes.begin(), episodes.end());
    std::set<std::string> seen;
    std::vector<LabeledObservation> out;
    for (const auto& tr : dataset.transitions) {
        if (!wanted.count(tr.episode_id)) continue;
        if (seen.insert(tr.obs_before).second) {
            out.push_back({&dataset.image(tr.obs_before), Role::whole_vegetable,
                           classify_thickness(tr.remaining_before(), tr.veg_type, Role::whole_vegetable),
                           tr.episode_id});
        }
        if (seen.insert(tr.obs_after).second) {
            out.push_back({&dataset.image(tr.obs_after), Role::whole_vegetable, tr.remaining_class, tr.episode_id});
        }
        if (tr.created && tr.slice_obs && tr.slice_class) {
            out.push_back({&dataset.image(*tr.slice_obs), Role::slice, *tr.slice_class, tr.episode_id});
        }
    }
    return out;
}

double EmbedEvaluation::slice_accuracy() const { return accuracy(slice_true, slice_pred); }
double EmbedEvaluation::remaining_accuracy() const { return accuracy(remaining_true, remaining_pred); }

EmbedEvaluation evaluate_embedding(const EmbeddingModel& model, const std::vector<LabeledObservation>& samples) {
    EmbedEvaluation ev;
    if (samples.empty()) return ev;
    double loss = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, samples.size() - start);
        std::vector<LabeledObservation> chunk(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                              samples.begin() + static_cast<std::ptrdiff_t>(start + n));
        const Tensor z = infer(model.trunk, stack_inputs(chunk));
        const Tensor ls = infer(model.slice_head, z);
        const Tensor lr = infer(model.remaining_head, z);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& s = chunk[i];
            const auto logits = s.role == Role::slice ? ls.row(i) : lr.row(i);
            loss += softmax_cross_entropy(logits, static_cast<std::size_t>(s.label)).loss;
            const int pred = static_cast<int>(argmax(logits));
            if (s.role == Role::slice) {
                ev.slice_true.push_back(s.label);
                ev.slice_pred.push_back(pred);
            } else {
                ev.remaining_true.push_back(s.label);
                ev.remaining_pred.push_back(pred);
            }
        }
    }
    ev.loss = loss / static_cast<double>(samples.size());
    return ev;
}

EmbedBatchGrads embedding_batch_gradients(const EmbeddingModel& model, const Tensor& inputs,
                                          const std::vector<Role>& roles, const std::vector<int>& labels) {
    const std::size_t batch = inputs.dim(0);
    if (roles.size() != batch || labels.size() != batch) throw std::invalid_argument("batch label count mismatch");
    const double scale = 1.0 / static_cast<double>(batch);
    auto trunk_fwd = forward_pass(model.trunk, inputs);
    Tensor dz({batch, kEmbeddingDim});
    EmbedBatchGrads out;
    for (Role role : {Role::slice, Role::whole_vegetable}) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < batch; ++i) {
            if (roles[i] == role) rows.push_back(i);
        }
        const Network& head = model.head(role);
        ParamMap& head_grads = role == Role::slice ? out.slice_head : out.remaining_head;
        if (rows.empty()) {
            head_grads = zero_grads(head);
            continue;
        }
        auto head_fwd = forward_pass(head, gather_rows(trunk_fwd.output, rows));
        Tensor dlogits(head_fwd.output.shape());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto ce = softmax_cross_entropy(head_fwd.output.row(r), static_cast<std::size_t>(labels[rows[r]]));
            out.loss += ce.loss * scale;
            auto dst = dlogits.row(r);
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = ce.grad[k] * scale;
        }
        auto g = backward_pass(head, head_fwd.tape, dlogits);
        head_grads = std::move(g.params);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            std::copy(g.input.row(r).begin(), g.input.row(r).end(), dz.row(rows[r]).begin());
        }
    }
    out.trunk = backward_pass(model.trunk, trunk_fwd.tape, dz).params;
    return out;
}

std::vector<EmbedEpochMetrics> train_embedding(EmbeddingModel& model, const std::vector<LabeledObservation>& train,
                                               const std::vector<LabeledObservation>& val,
                                               const EmbedTrainConfig& config) {
    if (train.empty()) throw std::invalid_argument("train_embedding: empty training set");
    if (config.batch_size < 1) throw std::invalid_argument("train_embedding: batch_size must be >= 1");
    if (config.epochs < 0) throw std::invalid_argument("train_embedding: epochs must be >= 0");
    const AdamConfig adam_cfg{config.lr};
    AdamState trunk_state(model.trunk.params(), adam_cfg);
    AdamState slice_state(model.slice_head.params(), adam_cfg);
    AdamState remaining_state(model.remaining_head.params(), adam_cfg);

    const Tensor inputs = stack_inputs(train);
    std::vector<std::size_t> order(train.size());
    std::vector<EmbedEpochMetrics> metrics;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed({config.seed, 0xE3B, static_cast<std::uint64_t>(epoch)}));
        rng.shuffle(order.begin(), order.end());
        const double lr = scheduled_lr(config.lr, config.final_lr_fraction, epoch, config.epochs);
        trunk_state.config.lr = slice_state.config.lr = remaining_state.config.lr = lr;
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t n = std::min(config.batch_size, order.size() - start);
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(start + n));
            std::vector<Role> roles;
            std::vector<int> labels;
            for (std::size_t r : rows) {
                roles.push_back(train[r].role);
                labels.push_back(train[r].label);
            }
            auto g = embedding_batch_gradients(model, gather_rows(inputs, rows), roles, labels);
            if (!std::isfinite(g.loss)) {
                throw NonFiniteError("train_embedding: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(batches));
            }
            adam_step(model.trunk, g.trunk, trunk_state);
            adam_step(model.slice_head, g.slice_head, slice_state);
            adam_step(model.remaining_head, g.remaining_head, remaining_state);
            loss_sum += g.loss;
            ++batches;
        }
        EmbedEpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / static_cast<double>(batches);
        if (!val.empty()) {
            const auto ev = evaluate_embedding(model, val);
            m.val_loss = ev.loss;
            m.slice_acc = ev.slice_accuracy();
            m.remaining_acc = ev.remaining_accuracy();
        }
        if (config.verbose) {
            std::cerr << "epoch " << epoch << " train_loss " << m.train_loss << " val_loss " << m.val_loss
                      << " slice_acc " << m.slice_acc << " remaining_acc " << m.remaining_acc << '\n';
        }
        metrics.push_back(m);
    }
    return metrics;
}

EmbedTrainResult train_embedding(const Dataset& dataset, const EmbedTrainConfig& config) {
    if (dataset.transitions.empty()) throw std::invalid_argument("train_embedding: empty dataset");
    EmbedTrainResult res;
    std::tie(res.train_episodes, res.val_episodes) =
        split_episodes(dataset.episode_ids(), config.train_fraction, config.seed);
    const auto train = labeled_observations(dataset, res.train_episodes);
    const auto val = labeled_observations(dataset, res.val_episodes);
    res.model = make_embedding_model(dataset.transitions.front().veg_type, config.seed);
    res.metrics = train_embedding(res.model, train, val, config);
    return res;
}

std::string embedding_model_to_json(const EmbeddingModel& model) {
    json params = json::object();
    params_to_json(model.trunk.params(), params, "trunk.");
    params_to_json(model.slice_head.params(), params, "slice_head.");
    params_to_json(model.remaining_head.params(), params, "remaining_head.");
    json doc{{"format_version", kModelFormatVersion},
             {"kind", "embedding"},
             {"veg_type", to_string(model.veg_type)},
             {"arch",
              {{"trunk", arch_to_json(model.trunk)},
               {"slice_head", arch_to_json(model.slice_head)},
               {"remaining_head", arch_to_json(model.remaining_head)}}},
             {"params", params}};
    return doc.dump();
}

EmbeddingModel embedding_model_from_json(const json& doc) {
    EmbeddingModel m;
    m.veg_type = parse_veg_kind(doc.at("veg_type").get<std::string>());
    const auto& arch = doc.at("arch");
    const auto& params = doc.at("params");
    m.trunk = network_from_json(arch.at("trunk"), params, "trunk.");
    m.slice_head = network_from_json(arch.at("slice_head"), params, "slice_head.");
    m.remaining_head = network_from_json(arch.at("remaining_head"), params, "remaining_head.");
    if (m.trunk.output_shape() != Shape{kEmbeddingDim} || m.slice_head.output_shape() != Shape{kSliceClasses} ||
        m.remaining_head.output_shape() != Shape{kRemainingClasses}) {
        throw std::invalid_argument("embedding model has unexpected output shapes");
    }
    return m;
}

void save_embedding_model(const EmbeddingModel& model, const std::filesystem::path& file) {
    write_text_file(file, embedding_model_to_json(model));
}

EmbeddingModel load_embedding_model(const std::filesystem::path& file) {
    return embedding_model_from_json(read_model_file(file, "embedding"));
}

void write_embedding_metrics_csv(const std::vector<EmbedEpochMetrics>& metrics, const std::filesystem::path& file) {
    std::ostringstream out;
    out.precision(10);
    out << "epoch,train_loss,val_loss,slice_acc,remaining_acc\n";
    for (const auto& m : metrics) {
        out << m.epoch << ',' << m.train_loss << ',' << m.val_loss << ',' << m.slice_acc << ',' << m.remaining_acc
            << '\n';
    }
    write_text_file(file, out.str());
}

}  // namespace slicing
