#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "slicing/nn/tensor.hpp"

namespace slicing {

using ParamMap = std::map<std::string, Tensor>;

enum class LayerKind { dense, conv2d, relu, flatten };

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    // dense
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    // conv2d
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                            std::size_t padding);
    static LayerSpec relu();
    static LayerSpec flatten();

    bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
    bool operator==(const LayerSpec&) const = default;
};

// Raised for incompatible shapes; carries the index of the layer that
// rejected its input (0 for a bad network input).
class ShapeError : public std::invalid_argument {
public:
    ShapeError(std::size_t layer, const std::string& what)
        : std::invalid_argument("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
    std::size_t layer_index() const { return layer_; }

private:
    std::size_t layer_;
};

struct ParamInit {
    std::uint64_t seed = 0;
    std::string scheme = "xavier_uniform";
};

// Feed-forward stack over a fixed layer vocabulary. Shapes are per sample;
// every tensor passed through the network carries a leading batch axis.
class Network {
public:
    Network() = default;
    Network(Shape input_shape, std::vector<LayerSpec> layers, ParamInit init);
    // Restores a network from stored parameters (no initialization draw).
    Network(Shape input_shape, std::vector<LayerSpec> layers, ParamMap params, ParamInit init);

    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    const Shape& input_shape() const { return input_shape_; }
    const Shape& output_shape() const { return shapes_.back(); }
    // shapes_[i] is the per-sample input shape of layer i; shapes_.back() is the output.
    const std::vector<Shape>& layer_shapes() const { return shapes_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }
    const ParamInit& init() const { return init_; }

    const ParamMap& params() const { return params_; }
    // Mutable access invalidates outstanding tapes.
    ParamMap& mutable_params() {
        ++generation_;
        return params_;
    }
    const Tensor& param(const std::string& name) const;

    std::size_t parameter_count() const;
    std::uint64_t uid() const { return uid_; }
    std::uint64_t generation() const { return generation_; }

    static std::string weight_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".weight"; }
    static std::string bias_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".bias"; }

    // Composition a-then-b as one network; b's layers are renumbered.
    static Network chain(const Network& a, const Network& b);

private:
    void infer_shapes();

    Shape input_shape_;
    std::vector<LayerSpec> layers_;
    std::vector<Shape> shapes_;
    ParamMap params_;
    ParamInit init_;
    std::uint64_t uid_ = 0;
    std::uint64_t generation_ = 0;
};

// Inputs of every layer from one forward call, enough for backward_pass.
struct Tape {
    std::uint64_t net_uid = 0;
    std::uint64_t net_generation = 0;
    std::size_t batch = 0;
    std::vector<Tensor> inputs;  // inputs[i] fed layer i
};

struct ForwardResult {
    Tensor output;
    Tape tape;
};

struct Gradients {
    ParamMap params;
    Tensor input;
};

ForwardResult forward_pass(const Network& net, const Tensor& input);
// Output only; skips recording the tape.
Tensor infer(const Network& net, const Tensor& input);
Gradients backward_pass(const Network& net, const Tape& tape, const Tensor& output_grad);

// Prepends a batch axis of 1 to a per-sample tensor.
Tensor as_batch(const Tensor& sample);

}  // namespace slicing
