#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "slicing/cli/cli.hpp"

using namespace slicing::cli;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
    int status = 0;
    json summary;
    std::string err;
};

Result slicer(std::vector<std::string> args) {
    args.insert(args.begin(), "slicer");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Result r;
    r.status = run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.err = err.str();
    const auto text = out.str();
    REQUIRE(std::count(text.begin(), text.end(), '\n') == 1);
    r.summary = json::parse(text);
    return r;
}

fs::path workdir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "slicing_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// Every regular file under `a` has a byte-identical twin under `b`.
bool same_tree(const fs::path& a, const fs::path& b) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        ++n;
        const auto twin = b / fs::relative(e.path(), a);
        if (!fs::exists(twin) || slurp(e.path()) != slurp(twin)) return false;
    }
    return n > 0;
}

// Small dataset and models shared by the pipeline cases.
void ensure_pipeline() {
    static bool done = false;
    if (done) return;
    REQUIRE(slicer({"gen-data", "--episodes", "30", "--seed", "7", "--out", path("data")}).status == 0);
    REQUIRE(slicer({"train-embedding", "--data", path("data"), "--epochs", "2", "--seed", "1", "--out", path("m")})
                .status == 0);
    REQUIRE(slicer({"train-forward", "--data", path("data"), "--embedding", path("m/embedding.json"), "--epochs", "3",
                    "--seed", "1", "--out", path("m")})
                .status == 0);
    done = true;
}

}  // namespace

TEST_CASE("gen-data summary and files") {
    auto r = slicer({"gen-data", "--type", "cucumber", "--episodes", "50", "--seed", "7", "--out", path("gen")});
    CHECK(r.status == 0);
    CHECK(r.summary["command"] == "gen-data");
    CHECK(r.summary["status"] == "ok");
    const auto slices = r.summary["headline_metrics"]["slice_transitions"].get<int>();
    CHECK(slices >= 150);
    CHECK(slices <= 300);
    CHECK(fs::exists(workdir() / "gen" / "index.jsonl"));
    CHECK(r.summary["outputs"].size() == 2);
}

TEST_CASE("commands are reproducible") {
    REQUIRE(slicer({"gen-data", "--episodes", "12", "--seed", "3", "--out", path("a")}).status == 0);
    REQUIRE(slicer({"gen-data", "--episodes", "12", "--seed", "3", "--out", path("b")}).status == 0);
    CHECK(same_tree(workdir() / "a", workdir() / "b"));
    for (const char* dir : {"ea", "eb"}) {
        REQUIRE(slicer({"train-embedding", "--data", path("a"), "--epochs", "1", "--seed", "2", "--out", path(dir)})
                    .status == 0);
    }
    CHECK(same_tree(workdir() / "ea", workdir() / "eb"));
}

TEST_CASE("usage errors exit with status 2") {
    CHECK(slicer({}).status == 2);
    CHECK(slicer({"no-such-command"}).status == 2);
    auto r = slicer({"gen-data", "--out", path("x"), "--bogus", "1"});
    CHECK(r.status == 2);
    CHECK(r.summary["status"] == "usage_error");
    CHECK(slicer({"gen-data"}).status == 2);  // --out missing
    CHECK(slicer({"gen-data", "--out", path("x"), "--type", "pumpkin"}).status == 2);
    CHECK(slicer({"train-embedding", "--data", path("missing"), "--out", path("x")}).status == 2);
    CHECK(slicer({"gen-data", "--out", path("x"), "--episodes", "three"}).status == 2);
}

TEST_CASE("runtime failures exit with status 1") {
    const auto bad = workdir() / "corrupt.json";
    std::ofstream(bad) << "{ not json";
    ensure_pipeline();
    auto r = slicer({"eval-embedding", "--data", path("data"), "--embedding", bad.string(), "--out", path("x")});
    CHECK(r.status == 1);
    CHECK(r.summary["status"] == "error");
}

TEST_CASE("config files") {
    const auto empty = workdir() / "empty.json";
    std::ofstream(empty).close();
    CHECK_NOTHROW(load_config(empty));
    auto defaults = load_config(empty);
    CHECK_FALSE(defaults.epochs.has_value());
    CHECK_FALSE(defaults.seed.has_value());

    try {
        parse_config(R"({"epochs": 3, "foo": 1})");
        FAIL("unknown key accepted");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("\"foo\"") != std::string::npos);
    }
    try {
        parse_config("{\n\"epochs\": 3,\n\"lr\": }");
        FAIL("malformed config accepted");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config(R"({"epochs": "ten"})"), UsageError);
    CHECK_THROWS_AS(parse_config(R"({"seed": -1})"), UsageError);
    CHECK_THROWS_AS(parse_config(R"({"format_version": 2})"), UsageError);
    CHECK_THROWS_AS(parse_config("[1, 2]"), UsageError);

    auto file = parse_config(R"({"format_version": 1, "epochs": 10, "lr": 0.01})");
    RunConfig flags;
    flags.epochs = 3;
    auto merged = overlay(file, flags);
    CHECK(merged.epochs == 3);
    CHECK(merged.lr == 0.01);
}

TEST_CASE("flags override the config file") {
    ensure_pipeline();
    const auto cfg = workdir() / "train.json";
    std::ofstream(cfg) << R"({"epochs": 10, "seed": 1, "data": ")" << path("data") << R"("})";
    auto r = slicer({"train-embedding", "--config", cfg.string(), "--epochs", "1", "--out", path("override")});
    REQUIRE(r.status == 0);
    CHECK(r.summary["headline_metrics"]["epochs"] == 1);
    std::ifstream csv(workdir() / "override" / "embedding_metrics.csv");
    std::string line;
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 2);  // header + one epoch
}

TEST_CASE("SLICE_SEED is the seed fallback") {
    RunConfig c;
    ::unsetenv("SLICE_SEED");
    CHECK(effective_seed(c) == 0);
    ::setenv("SLICE_SEED", "42", 1);
    CHECK(effective_seed(c) == 42);
    c.seed = 5;
    CHECK(effective_seed(c) == 5);
    c.seed.reset();
    ::setenv("SLICE_SEED", "4x", 1);
    CHECK_THROWS_AS(effective_seed(c), UsageError);

    ::setenv("SLICE_SEED", "9", 1);
    REQUIRE(slicer({"gen-data", "--episodes", "5", "--out", path("env")}).status == 0);
    REQUIRE(slicer({"gen-data", "--episodes", "5", "--seed", "9", "--out", path("flag")}).status == 0);
    CHECK(same_tree(workdir() / "env", workdir() / "flag"));
    ::unsetenv("SLICE_SEED");
}

TEST_CASE("model commands") {
    ensure_pipeline();
    const auto em = path("m/embedding.json"), fm = path("m/forward.json");

    auto ev = slicer({"eval-embedding", "--data", path("data"), "--embedding", em, "--out", path("ev")});
    REQUIRE(ev.status == 0);
    CHECK(fs::exists(workdir() / "ev" / "confusion.csv"));
    CHECK(ev.summary["headline_metrics"].contains("slice_acc"));

    auto ef = slicer({"eval-forward", "--data", path("data"), "--embedding", em, "--forward", fm, "--out", path("ef")});
    REQUIRE(ef.status == 0);
    CHECK(ef.summary["headline_metrics"].contains("stop_f1"));

    auto p = slicer({"plan", "--goal", "thick,thick,thin", "--type", "cucumber", "--embedding", em, "--forward", fm,
                     "--out", path("plan")});
    REQUIRE(p.status == 0);
    CHECK(p.summary["headline_metrics"]["actions"].size() == 3);
    auto line = json::parse(slurp(workdir() / "plan" / "plan.jsonl"));
    CHECK(line["actions"].size() == 3);
    CHECK(line["goal"] == json::array({2, 2, 1}));
    CHECK(slicer({"plan", "--goal", "thick", "--type", "tomato", "--embedding", em, "--forward", fm, "--out",
                  path("plan")})
              .status == 2);
    CHECK(slicer({"plan", "--goal", "chunky", "--embedding", em, "--forward", fm, "--out", path("plan")}).status == 2);

    auto ex = slicer({"plan", "--goal", "thin,thick", "--execute", "--embedding", em, "--forward", fm, "--out",
                      path("exec")});
    REQUIRE(ex.status == 0);
    CHECK(fs::exists(workdir() / "exec" / "episode.jsonl"));

    auto ro = slicer({"rollout", "--actions", "3,3,2", "--embedding", em, "--forward", fm, "--out", path("ro")});
    REQUIRE(ro.status == 0);
    CHECK(ro.summary["headline_metrics"]["steps"].get<int>() <= 3);
    CHECK(slicer({"rollout", "--actions", "3,x", "--embedding", em, "--forward", fm, "--out", path("ro")}).status == 2);

    auto pc = slicer({"pca", "--data", path("data"), "--embedding", em, "--split", "all", "--out", path("pca")});
    REQUIRE(pc.status == 0);
    std::ifstream pts(workdir() / "pca" / "pca_points.csv");
    std::string header;
    std::getline(pts, header);
    CHECK(header == "x,y,class,role,step");
    CHECK(slicer({"pca", "--data", path("data"), "--embedding", em, "--role", "blob", "--out", path("pca")}).status ==
          2);
}

TEST_CASE("dmp commands") {
    auto fit = slicer({"dmp-fit", "--seed", "3", "--out", path("dmp")});
    REQUIRE(fit.status == 0);
    CHECK(fit.summary["headline_metrics"]["max_rmse_to_mean"].get<double>() < 0.05);
    auto refit = slicer({"dmp-fit", "--demos", path("dmp/demos"), "--out", path("dmp2")});
    REQUIRE(refit.status == 0);
    CHECK(slurp(workdir() / "dmp" / "dmp.json") == slurp(workdir() / "dmp2" / "dmp.json"));

    auto ro = slicer({"dmp-rollout", "--dmp", path("dmp/dmp.json"), "--cut-distance", "2", "--out", path("dmp")});
    REQUIRE(ro.status == 0);
    CHECK(ro.summary["headline_metrics"]["max_endpoint_error"].get<double>() < 1e-2);
    CHECK(fs::exists(workdir() / "dmp" / "trajectory.csv"));
    CHECK(slicer({"dmp-rollout", "--out", path("dmp")}).status == 2);
}
