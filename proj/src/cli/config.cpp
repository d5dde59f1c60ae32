#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "slicing/cli/cli.hpp"

namespace slicing::cli {

using json = nlohmann::json;

namespace {

struct Field {
    std::string name;
    std::function<void(RunConfig&, const json&)> set;
    std::function<void(RunConfig&, const RunConfig&)> copy_if_set;
};

template <class T>
Field field(const char* name, std::optional<T> RunConfig::*member) {
    return {name,
            [member, name](RunConfig& c, const json& v) {
                try {
                    if constexpr (std::is_same_v<T, std::string>) {
                        if (!v.is_string()) throw std::invalid_argument("expected a string");
                    } else if constexpr (std::is_same_v<T, bool>) {
                        if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
                    } else if constexpr (std::is_floating_point_v<T>) {
                        if (!v.is_number()) throw std::invalid_argument("expected a number");
                    } else {
                        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
                        if constexpr (std::is_unsigned_v<T>) {
                            if (v.is_number_integer() && !v.is_number_unsigned()) {
                                throw std::invalid_argument("expected a non-negative integer");
                            }
                        }
                    }
                    c.*member = v.get<T>();
                } catch (const std::exception& e) {
                    throw UsageError(std::string("config key \"") + name + "\": " + e.what());
                }
            },
            [member](RunConfig& dst, const RunConfig& src) {
                if (src.*member) dst.*member = src.*member;
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f{
        field("type", &RunConfig::type),
        field("seed", &RunConfig::seed),
        field("out", &RunConfig::out),
        field("data", &RunConfig::data),
        field("embedding", &RunConfig::embedding),
        field("forward", &RunConfig::forward),
        field("dmp", &RunConfig::dmp),
        field("demos", &RunConfig::demos),
        field("split", &RunConfig::split),
        field("role", &RunConfig::role),
        field("goal", &RunConfig::goal),
        field("actions", &RunConfig::actions),
        field("episodes", &RunConfig::episodes),
        field("epochs", &RunConfig::epochs),
        field("max_horizon", &RunConfig::max_horizon),
        field("horizon_epoch_step", &RunConfig::horizon_epoch_step),
        field("batch_size", &RunConfig::batch_size),
        field("beam_width", &RunConfig::beam_width),
        field("n_demos", &RunConfig::n_demos),
        field("n_basis", &RunConfig::n_basis),
        field("noise_sigma", &RunConfig::noise_sigma),
        field("lr", &RunConfig::lr),
        field("train_fraction", &RunConfig::train_fraction),
        field("lambda1", &RunConfig::lambda1),
        field("lambda2", &RunConfig::lambda2),
        field("length", &RunConfig::length),
        field("ridge_lambda", &RunConfig::ridge_lambda),
        field("cut_distance", &RunConfig::cut_distance),
        field("dt", &RunConfig::dt),
        field("fine_tune_embedding", &RunConfig::fine_tune_embedding),
        field("execute", &RunConfig::execute),
    };
    return f;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return c;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // Report the line of the byte offset.
        const auto upto = text.substr(0, std::min(text.size(), e.byte));
        const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
        throw UsageError("config line " + std::to_string(line) + ": " + e.what());
    }
    if (!doc.is_object()) throw UsageError("config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (key == "format_version") {
            if (value != kConfigFormatVersion) {
                throw UsageError("config format_version must be " + std::to_string(kConfigFormatVersion));
            }
            continue;
        }
        const auto& f = fields();
        auto it = std::find_if(f.begin(), f.end(), [&](const Field& x) { return x.name == key; });
        if (it == f.end()) throw UsageError("unknown config key \"" + key + "\"");
        it->set(c, value);
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw UsageError("cannot read config file " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

RunConfig overlay(RunConfig base, const RunConfig& top) {
    for (const auto& f : fields()) f.copy_if_set(base, top);
    return base;
}

std::uint64_t effective_seed(const RunConfig& config) {
    if (config.seed) return *config.seed;
    if (const char* env = std::getenv("SLICE_SEED"); env && *env) {
        const std::string s(env);
        if (s.find_first_not_of("0123456789") != std::string::npos) {
            throw UsageError("SLICE_SEED must be a non-negative integer, got \"" + s + "\"");
        }
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            throw UsageError("SLICE_SEED is out of range");
        }
    }
    return 0;
}

}  // namespace slicing::cli
