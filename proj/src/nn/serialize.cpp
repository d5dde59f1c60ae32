#include "slicing/nn/serialize.hpp"

#include <fstream>
#include <sstream>

namespace slicing {

using json = nlohmann::json;

json layer_to_json(const LayerSpec& l) {
    json j{{"kind", to_string(l.kind)}};
    if (l.kind == LayerKind::dense) {
        j["in"] = l.in_dim;
        j["out"] = l.out_dim;
    } else if (l.kind == LayerKind::conv2d) {
        j["in_channels"] = l.in_channels;
        j["out_channels"] = l.out_channels;
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        j["padding"] = l.padding;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    const auto kind = layer_kind_from_string(j.at("kind").get<std::string>());
    switch (kind) {
        case LayerKind::dense: return LayerSpec::dense(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>());
        case LayerKind::conv2d:
            return LayerSpec::conv2d(j.at("in_channels").get<std::size_t>(), j.at("out_channels").get<std::size_t>(),
                                     j.at("kernel").get<std::size_t>(), j.at("stride").get<std::size_t>(),
                                     j.at("padding").get<std::size_t>());
        case LayerKind::relu: return LayerSpec::relu();
        case LayerKind::flatten: return LayerSpec::flatten();
    }
    throw std::invalid_argument("bad layer");
}

json arch_to_json(const Network& net) {
    json layers = json::array();
    for (const auto& l : net.layers()) layers.push_back(layer_to_json(l));
    return json{{"input_shape", net.input_shape()}, {"layers", layers}};
}

void params_to_json(const ParamMap& params, json& out, const std::string& prefix) {
    for (const auto& [name, t] : params) {
        out[prefix + name] = json{{"shape", t.shape()}, {"data", t.values()}};
    }
}

ParamMap params_from_json(const json& params, const std::string& prefix) {
    ParamMap out;
    for (const auto& [key, value] : params.items()) {
        if (key.rfind(prefix, 0) != 0) continue;
        auto shape = value.at("shape").get<Shape>();
        auto data = value.at("data").get<std::vector<double>>();
        out.emplace(key.substr(prefix.size()), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

Network network_from_json(const json& arch, const json& params, const std::string& prefix) {
    std::vector<LayerSpec> layers;
    for (const auto& l : arch.at("layers")) layers.push_back(layer_from_json(l));
    return Network(arch.at("input_shape").get<Shape>(), std::move(layers), params_from_json(params, prefix),
                   ParamInit{});
}

json read_model_file(const std::filesystem::path& file, const std::string& expected_kind) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open model file " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(file.string() + ": malformed model file: " + e.what());
    }
    if (doc.value("format_version", 0) != kModelFormatVersion) {
        throw std::runtime_error(file.string() + ": unsupported format_version");
    }
    if (doc.value("kind", "") != expected_kind) {
        throw std::runtime_error(file.string() + ": expected a '" + expected_kind + "' model, found '" +
                                 doc.value("kind", "") + "'");
    }
    return doc;
}

void write_text_file(const std::filesystem::path& file, const std::string& text) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + file.string());
}

}  // namespace slicing
