#include "slicing/nn/network.hpp"

#include <atomic>
#include <cmath>

#include "slicing/nn/kernels.hpp"
#include "slicing/rng.hpp"

namespace slicing {

namespace {

std::uint64_t next_uid() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}

Shape with_batch(std::size_t batch, const Shape& sample) {
    Shape s;
    s.reserve(sample.size() + 1);
    s.push_back(batch);
    s.insert(s.end(), sample.begin(), sample.end());
    return s;
}

Shape sample_shape(const Tensor& t) { return Shape(t.shape().begin() + 1, t.shape().end()); }

kernels::ConvGeom conv_geom(const LayerSpec& l, const Shape& in, std::size_t batch) {
    return {batch, l.in_channels, in[1], in[2], l.out_channels, l.kernel, l.stride, l.padding};
}

}  // namespace

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::flatten: return "flatten";
    }
    return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
    if (name == "dense") return LayerKind::dense;
    if (name == "conv2d") return LayerKind::conv2d;
    if (name == "relu") return LayerKind::relu;
    if (name == "flatten") return LayerKind::flatten;
    throw std::invalid_argument("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.in_dim = in;
    l.out_dim = out;
    return l;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.kernel = kernel;
    l.stride = stride;
    l.padding = padding;
    return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::flatten() {
    LayerSpec l;
    l.kind = LayerKind::flatten;
    return l;
}

Network::Network(Shape input_shape, std::vector<LayerSpec> layers, ParamInit init)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), init_(std::move(init)), uid_(next_uid()) {
    infer_shapes();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (!l.has_params()) continue;
        Shape wshape;
        double fan_in = 0, fan_out = 0;
        std::size_t out = 0;
        if (l.kind == LayerKind::dense) {
            wshape = {l.out_dim, l.in_dim};
            fan_in = static_cast<double>(l.in_dim);
            fan_out = static_cast<double>(l.out_dim);
            out = l.out_dim;
        } else {
            wshape = {l.out_channels, l.in_channels, l.kernel, l.kernel};
            fan_in = static_cast<double>(l.in_channels * l.kernel * l.kernel);
            fan_out = static_cast<double>(l.out_channels * l.kernel * l.kernel);
            out = l.out_channels;
        }
        Tensor w(wshape);
        if (init_.scheme == "xavier_uniform") {
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            Rng rng(derive_seed({init_.seed, i}));
            for (auto& v : w.values()) v = rng.uniform(-bound, bound);
        } else if (init_.scheme != "zeros") {
            throw std::invalid_argument("unknown init scheme '" + init_.scheme + "'");
        }
        params_.emplace(weight_name(i), std::move(w));
        params_.emplace(bias_name(i), Tensor({out}, 0.0));
    }
}

Network::Network(Shape input_shape, std::vector<LayerSpec> layers, ParamMap params, ParamInit init)
    : input_shape_(std::move(input_shape)),
      layers_(std::move(layers)),
      params_(std::move(params)),
      init_(std::move(init)),
      uid_(next_uid()) {
    infer_shapes();
    std::size_t expected = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (!l.has_params()) continue;
        expected += 2;
        const Shape wshape = l.kind == LayerKind::dense
                                 ? Shape{l.out_dim, l.in_dim}
                                 : Shape{l.out_channels, l.in_channels, l.kernel, l.kernel};
        const Shape bshape{l.kind == LayerKind::dense ? l.out_dim : l.out_channels};
        auto w = params_.find(weight_name(i));
        auto b = params_.find(bias_name(i));
        if (w == params_.end() || b == params_.end()) throw ShapeError(i, "missing parameters");
        if (w->second.shape() != wshape) throw ShapeError(i, "weight shape " + shape_str(w->second.shape()));
        if (b->second.shape() != bshape) throw ShapeError(i, "bias shape " + shape_str(b->second.shape()));
        if (!w->second.all_finite() || !b->second.all_finite()) throw ShapeError(i, "non-finite parameters");
    }
    if (expected != params_.size()) throw std::invalid_argument("unexpected extra parameters in network");
}

Network::Network(const Network& other)
    : input_shape_(other.input_shape_),
      layers_(other.layers_),
      shapes_(other.shapes_),
      params_(other.params_),
      init_(other.init_),
      uid_(next_uid()),
      generation_(0) {}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        input_shape_ = other.input_shape_;
        layers_ = other.layers_;
        shapes_ = other.shapes_;
        params_ = other.params_;
        init_ = other.init_;
        uid_ = next_uid();
        generation_ = 0;
    }
    return *this;
}

void Network::infer_shapes() {
    if (input_shape_.empty()) throw ShapeError(0, "empty input shape");
    shapes_.assign(1, input_shape_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        const Shape& in = shapes_.back();
        Shape out;
        switch (l.kind) {
            case LayerKind::dense:
                if (l.in_dim == 0 || l.out_dim == 0) throw ShapeError(i, "dense dimensions must be >= 1");
                if (in.size() != 1 || in[0] != l.in_dim) {
                    throw ShapeError(i, "dense expects [" + std::to_string(l.in_dim) + "], got " + shape_str(in));
                }
                out = {l.out_dim};
                break;
            case LayerKind::conv2d: {
                if (l.in_channels == 0 || l.out_channels == 0 || l.kernel == 0 || l.stride == 0) {
                    throw ShapeError(i, "conv2d dimensions must be >= 1");
                }
                if (in.size() != 3 || in[0] != l.in_channels) {
                    throw ShapeError(i, "conv2d expects [" + std::to_string(l.in_channels) + ",H,W], got " +
                                            shape_str(in));
                }
                if (in[1] + 2 * l.padding < l.kernel || in[2] + 2 * l.padding < l.kernel) {
                    throw ShapeError(i, "conv2d kernel larger than padded input");
                }
                const std::size_t oh = (in[1] + 2 * l.padding - l.kernel) / l.stride + 1;
                const std::size_t ow = (in[2] + 2 * l.padding - l.kernel) / l.stride + 1;
                out = {l.out_channels, oh, ow};
                break;
            }
            case LayerKind::relu:
                out = in;
                break;
            case LayerKind::flatten:
                out = {shape_size(in)};
                break;
        }
        shapes_.push_back(std::move(out));
    }
}

const Tensor& Network::param(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter '" + name + "'");
    return it->second;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
}

Network Network::chain(const Network& a, const Network& b) {
    if (a.output_shape() != b.input_shape()) {
        throw ShapeError(a.layers().size(), "cannot chain " + shape_str(a.output_shape()) + " into " +
                                                shape_str(b.input_shape()));
    }
    std::vector<LayerSpec> layers = a.layers_;
    layers.insert(layers.end(), b.layers_.begin(), b.layers_.end());
    ParamMap params = a.params_;
    const std::size_t offset = a.layers_.size();
    for (std::size_t i = 0; i < b.layers_.size(); ++i) {
        if (!b.layers_[i].has_params()) continue;
        params.emplace(weight_name(offset + i), b.param(weight_name(i)));
        params.emplace(bias_name(offset + i), b.param(bias_name(i)));
    }
    return Network(a.input_shape_, std::move(layers), std::move(params), a.init_);
}

namespace {

Tensor run_layer(const Network& net, std::size_t i, const Tensor& x) {
    const auto& l = net.layers()[i];
    const std::size_t batch = x.dim(0);
    const Shape out_shape = with_batch(batch, net.layer_shapes()[i + 1]);
    switch (l.kind) {
        case LayerKind::dense: {
            Tensor y(out_shape);
            kernels::omp::dense_forward(x.data(), net.param(Network::weight_name(i)).data(),
                                        net.param(Network::bias_name(i)).data(), y.data(), batch, l.in_dim,
                                        l.out_dim);
            return y;
        }
        case LayerKind::conv2d: {
            Tensor y(out_shape);
            kernels::omp::conv2d_forward(x.data(), net.param(Network::weight_name(i)).data(),
                                         net.param(Network::bias_name(i)).data(), y.data(),
                                         conv_geom(l, net.layer_shapes()[i], batch));
            return y;
        }
        case LayerKind::relu: {
            Tensor y(out_shape);
            kernels::omp::relu_forward(x.data(), y.data(), x.size());
            return y;
        }
        case LayerKind::flatten:
            return x.reshaped(out_shape);
    }
    return x;
}

void check_input(const Network& net, const Tensor& input) {
    if (input.rank() < 2 || sample_shape(input) != net.input_shape()) {
        throw ShapeError(0, "network expects [B]+" + shape_str(net.input_shape()) + ", got " +
                                shape_str(input.shape()));
    }
}

}  // namespace

ForwardResult forward_pass(const Network& net, const Tensor& input) {
    check_input(net, input);
    ForwardResult r;
    r.tape.net_uid = net.uid();
    r.tape.net_generation = net.generation();
    r.tape.batch = input.dim(0);
    r.tape.inputs.reserve(net.layers().size());
    Tensor x = input;
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        Tensor y = run_layer(net, i, x);
        r.tape.inputs.push_back(std::move(x));
        x = std::move(y);
    }
    r.output = std::move(x);
    return r;
}

Tensor infer(const Network& net, const Tensor& input) {
    check_input(net, input);
    Tensor x = input;
    for (std::size_t i = 0; i < net.layers().size(); ++i) x = run_layer(net, i, x);
    return x;
}

Gradients backward_pass(const Network& net, const Tape& tape, const Tensor& output_grad) {
    if (tape.net_uid != net.uid() || tape.net_generation != net.generation() ||
        tape.inputs.size() != net.layers().size()) {
        throw std::invalid_argument("tape does not belong to this network state (stale or foreign)");
    }
    if (output_grad.shape() != with_batch(tape.batch, net.output_shape())) {
        throw ShapeError(net.layers().size(), "output gradient shape " + shape_str(output_grad.shape()) +
                                                  " does not match output " +
                                                  shape_str(with_batch(tape.batch, net.output_shape())));
    }
    Gradients g;
    Tensor dy = output_grad;
    const std::size_t batch = tape.batch;
    for (std::size_t ii = net.layers().size(); ii-- > 0;) {
        const auto& l = net.layers()[ii];
        const Tensor& x = tape.inputs[ii];
        Tensor dx(x.shape());
        switch (l.kind) {
            case LayerKind::dense: {
                const Tensor& w = net.param(Network::weight_name(ii));
                Tensor dw(w.shape());
                Tensor db({l.out_dim});
                kernels::omp::dense_backward_params(dy.data(), x.data(), dw.data(), db.data(), batch, l.in_dim,
                                                    l.out_dim);
                kernels::omp::dense_backward_input(dy.data(), w.data(), dx.data(), batch, l.in_dim, l.out_dim);
                g.params.emplace(Network::weight_name(ii), std::move(dw));
                g.params.emplace(Network::bias_name(ii), std::move(db));
                break;
            }
            case LayerKind::conv2d: {
                const Tensor& w = net.param(Network::weight_name(ii));
                const auto geom = conv_geom(l, net.layer_shapes()[ii], batch);
                Tensor dw(w.shape());
                Tensor db({l.out_channels});
                kernels::omp::conv2d_backward_params(dy.data(), x.data(), dw.data(), db.data(), geom);
                kernels::omp::conv2d_backward_input(dy.data(), w.data(), dx.data(), geom);
                g.params.emplace(Network::weight_name(ii), std::move(dw));
                g.params.emplace(Network::bias_name(ii), std::move(db));
                break;
            }
            case LayerKind::relu:
                kernels::omp::relu_backward(x.data(), dy.data(), dx.data(), x.size());
                break;
            case LayerKind::flatten:
                dx = dy.reshaped(x.shape());
                break;
        }
        dy = std::move(dx);
    }
    g.input = std::move(dy);
    return g;
}

Tensor as_batch(const Tensor& sample) { return sample.reshaped(with_batch(1, sample.shape())); }

}  // namespace slicing
