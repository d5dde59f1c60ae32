#include "slicing/sim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "slicing/rng.hpp"

namespace slicing {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const Observation& Dataset::image(const std::string& path) const {
    auto it = images.find(path);
    if (it == images.end()) throw std::out_of_range("dataset has no image '" + path + "'");
    return it->second;
}

std::vector<int> Dataset::episode_ids() const {
    std::vector<int> ids;
    for (const auto& tr : transitions) {
        if (ids.empty() || ids.back() != tr.episode_id) ids.push_back(tr.episode_id);
    }
    return ids;
}

std::size_t Dataset::slice_count() const {
    return static_cast<std::size_t>(
        std::count_if(transitions.begin(), transitions.end(), [](const Transition& t) { return t.created; }));
}

std::size_t Dataset::stop_count() const {
    return static_cast<std::size_t>(
        std::count_if(transitions.begin(), transitions.end(), [](const Transition& t) { return t.stop; }));
}

namespace {

std::string frame_path(int episode, int k) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "img/e%06d_f%03d.pgm", episode, k);
    return buf;
}

std::string slice_path(int episode, int t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "img/e%06d_c%03d.pgm", episode, t);
    return buf;
}

struct EpisodeRecord {
    std::vector<Transition> transitions;
    std::vector<std::pair<std::string, Observation>> images;
};

EpisodeRecord run_episode(const DatasetConfig& cfg, int episode_id) {
    const auto& vt = vegetable_type(cfg.veg_type);
    const std::uint64_t ep_seed = derive_seed({cfg.seed, static_cast<std::uint64_t>(episode_id)});
    Rng rng(derive_seed({ep_seed, 0xAC7}));
    const int planned = static_cast<int>(rng.uniform_int(cfg.min_slices, cfg.max_slices));

    EpisodeRecord rec;
    VegetableState state = new_vegetable(cfg.veg_type, ep_seed);
    auto frame = [&](int k, const VegetableState& s) {
        const auto path = frame_path(episode_id, k);
        rec.images.emplace_back(path, render(s, derive_seed({ep_seed, 0xF4A, static_cast<std::uint64_t>(k)}),
                                             cfg.pixel_noise));
        return path;
    };
    std::string before = frame(0, state);
    for (int t = 0; t < planned; ++t) {
        const CutAction action{rng.uniform(vt.action_min, vt.action_max)};
        auto [next, outcome] = apply_cut(state, action, cfg.noise_sigma);
        Transition tr;
        tr.episode_id = episode_id;
        tr.t = t;
        tr.veg_type = cfg.veg_type;
        tr.action_d = action.d;
        tr.created = outcome.created;
        tr.slice_thickness = outcome.slice_thickness;
        tr.remaining_after = outcome.remaining_after;
        tr.stop = outcome.stop;
        tr.remaining_class = classify_thickness(outcome.remaining_after, cfg.veg_type, Role::whole_vegetable);
        tr.obs_before = before;
        tr.obs_after = frame(t + 1, next);
        if (outcome.created) {
            tr.slice_class = classify_thickness(*outcome.slice_thickness, cfg.veg_type, Role::slice);
            tr.slice_obs = slice_path(episode_id, t);
            rec.images.emplace_back(*tr.slice_obs,
                                    render(*outcome.slice_thickness, cfg.veg_type,
                                           derive_seed({ep_seed, 0x511C, static_cast<std::uint64_t>(t)}),
                                           Role::slice, cfg.pixel_noise));
        }
        before = tr.obs_after;
        rec.transitions.push_back(std::move(tr));
        state = std::move(next);
        if (outcome.stop) break;
    }
    return rec;
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& cfg) {
    if (cfg.episodes < 0) throw std::invalid_argument("episode count must be >= 0");
    if (cfg.min_slices < 1 || cfg.max_slices < cfg.min_slices) throw std::invalid_argument("bad slice count range");
    std::vector<EpisodeRecord> records(static_cast<std::size_t>(cfg.episodes));
#pragma omp parallel for schedule(dynamic, 16)
    for (int e = 0; e < cfg.episodes; ++e) records[static_cast<std::size_t>(e)] = run_episode(cfg, cfg.first_episode_id + e);

    Dataset ds;
    for (auto& rec : records) {
        for (auto& tr : rec.transitions) ds.transitions.push_back(std::move(tr));
        for (auto& [path, obs] : rec.images) ds.images.emplace(std::move(path), std::move(obs));
    }
    return ds;
}

std::string transition_to_json(const Transition& tr) {
    ojson j;
    j["episode_id"] = tr.episode_id;
    j["t"] = tr.t;
    j["veg_type"] = to_string(tr.veg_type);
    j["action_d"] = tr.action_d;
    j["created"] = tr.created;
    j["slice_thickness"] = tr.slice_thickness ? ojson(*tr.slice_thickness) : ojson(nullptr);
    j["remaining_after"] = tr.remaining_after;
    j["stop"] = tr.stop;
    j["slice_class"] = tr.slice_class ? ojson(*tr.slice_class) : ojson(nullptr);
    j["remaining_class"] = tr.remaining_class;
    j["obs_before"] = tr.obs_before;
    j["obs_after"] = tr.obs_after;
    j["slice_obs"] = tr.slice_obs ? ojson(*tr.slice_obs) : ojson(nullptr);
    return j.dump();
}

Transition transition_from_json(const std::string& line) {
    const auto j = ojson::parse(line);
    static const std::set<std::string> known{"episode_id", "t",           "veg_type",        "action_d",
                                             "created",    "slice_thickness", "remaining_after", "stop",
                                             "slice_class", "remaining_class", "obs_before",   "obs_after",
                                             "slice_obs"};
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw std::invalid_argument("unknown transition field '" + key + "'");
    }
    Transition tr;
    tr.episode_id = j.at("episode_id").get<int>();
    tr.t = j.at("t").get<int>();
    tr.veg_type = parse_veg_kind(j.at("veg_type").get<std::string>());
    tr.action_d = j.at("action_d").get<double>();
    tr.created = j.at("created").get<bool>();
    if (!j.at("slice_thickness").is_null()) tr.slice_thickness = j["slice_thickness"].get<double>();
    tr.remaining_after = j.at("remaining_after").get<double>();
    tr.stop = j.at("stop").get<bool>();
    if (!j.at("slice_class").is_null()) tr.slice_class = j["slice_class"].get<int>();
    tr.remaining_class = j.at("remaining_class").get<int>();
    tr.obs_before = j.at("obs_before").get<std::string>();
    tr.obs_after = j.at("obs_after").get<std::string>();
    if (!j.at("slice_obs").is_null()) tr.slice_obs = j["slice_obs"].get<std::string>();
    return tr;
}

void write_pgm(const Observation& obs, const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << "P5\n# bbox " << obs.bbox.x << ' ' << obs.bbox.y << ' ' << obs.bbox.w << ' ' << obs.bbox.h
        << " role " << to_string(obs.role) << '\n'
        << kImageSize << ' ' << kImageSize << "\n255\n";
    std::string bytes(obs.pixels.size(), '\0');
    for (std::size_t i = 0; i < obs.pixels.size(); ++i) {
        bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(obs.pixels[i] * 255.0)));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + file.string());
}

Observation read_pgm(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::string magic;
    std::getline(in, magic);
    if (magic != "P5") throw std::runtime_error(file.string() + ": not a binary PGM");
    Observation obs;
    bool have_bbox = false;
    while (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        std::istringstream cs(comment);
        std::string hash, tag, role_tag, role;
        cs >> hash >> tag;
        if (tag == "bbox") {
            cs >> obs.bbox.x >> obs.bbox.y >> obs.bbox.w >> obs.bbox.h >> role_tag >> role;
            if (!cs || role_tag != "role") throw std::runtime_error(file.string() + ": malformed bbox comment");
            obs.role = parse_role(role);
            have_bbox = true;
        }
    }
    std::size_t w = 0, h = 0;
    int maxval = 0;
    in >> w >> h >> maxval;
    in.get();
    if (!in || w != kImageSize || h != kImageSize || maxval != 255) {
        throw std::runtime_error(file.string() + ": expected 32x32 maxval 255");
    }
    if (!have_bbox) throw std::runtime_error(file.string() + ": missing bbox comment");
    std::string bytes(w * h, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw std::runtime_error(file.string() + ": truncated");
    obs.pixels.resize(w * h);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        obs.pixels[i] = static_cast<unsigned char>(bytes[i]) / 255.0;
    }
    return obs;
}

void write_dataset(const Dataset& ds, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir / "img", ec);
    if (ec) throw std::runtime_error("cannot create dataset directory " + dir.string() + ": " + ec.message());
    {
        std::ofstream index(dir / "index.jsonl", std::ios::binary);
        if (!index) throw std::runtime_error("cannot write " + (dir / "index.jsonl").string());
        for (const auto& tr : ds.transitions) index << transition_to_json(tr) << '\n';
        if (!index) throw std::runtime_error("failed writing index.jsonl");
    }
    std::vector<const std::pair<const std::string, Observation>*> items;
    for (const auto& kv : ds.images) items.push_back(&kv);
    std::string error;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(items.size()); ++i) {
        try {
            write_pgm(items[i]->second, dir / items[i]->first);
        } catch (const std::exception& e) {
#pragma omp critical
            error = e.what();
        }
    }
    if (!error.empty()) throw std::runtime_error(error);
}

Dataset read_dataset(const fs::path& dir) {
    std::ifstream index(dir / "index.jsonl", std::ios::binary);
    if (!index) throw std::runtime_error("cannot open " + (dir / "index.jsonl").string());
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(index, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            ds.transitions.push_back(transition_from_json(line));
        } catch (const std::exception& e) {
            throw std::runtime_error("index.jsonl line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    for (const auto& tr : ds.transitions) {
        for (const std::string* p : {&tr.obs_before, &tr.obs_after}) {
            if (!ds.images.contains(*p)) ds.images.emplace(*p, read_pgm(dir / *p));
        }
        if (tr.slice_obs && !ds.images.contains(*tr.slice_obs)) {
            ds.images.emplace(*tr.slice_obs, read_pgm(dir / *tr.slice_obs));
        }
    }
    return ds;
}

std::pair<std::vector<int>, std::vector<int>> split_episodes(const std::vector<int>& ids, double train_fraction,
                                                             std::uint64_t seed) {
    std::vector<int> shuffled = ids;
    std::sort(shuffled.begin(), shuffled.end());
    Rng rng(derive_seed({seed, 0x5917}));
    rng.shuffle(shuffled.begin(), shuffled.end());
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(shuffled.size())));
    std::vector<int> train(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<int> val(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

}  // namespace slicing
