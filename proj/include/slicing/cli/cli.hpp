#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace slicing::cli {

inline constexpr int kConfigFormatVersion = 1;

// Invocation problems: bad flags, bad config, missing inputs. Exit status 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Every setting any subcommand reads. Unset fields fall back to the
// command's defaults.
struct RunConfig {
    std::optional<std::string> type;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> data;
    std::optional<std::string> embedding;
    std::optional<std::string> forward;
    std::optional<std::string> dmp;
    std::optional<std::string> demos;
    std::optional<std::string> split;
    std::optional<std::string> role;
    std::optional<std::string> goal;
    std::optional<std::string> actions;
    std::optional<int> episodes;
    std::optional<int> epochs;
    std::optional<int> max_horizon;
    std::optional<int> horizon_epoch_step;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> beam_width;
    std::optional<std::size_t> n_demos;
    std::optional<std::size_t> n_basis;
    std::optional<double> noise_sigma;
    std::optional<double> lr;
    std::optional<double> train_fraction;
    std::optional<double> lambda1;
    std::optional<double> lambda2;
    std::optional<double> length;
    std::optional<double> ridge_lambda;
    std::optional<double> cut_distance;
    std::optional<double> dt;
    std::optional<bool> fine_tune_embedding;
    std::optional<bool> execute;
};

// JSON object with the field names above (plus format_version). An empty
// file gives all defaults; unknown keys and malformed text are rejected.
RunConfig load_config(const std::filesystem::path& file);
RunConfig parse_config(const std::string& text);
// Fields set in `top` replace those in `base`.
RunConfig overlay(RunConfig base, const RunConfig& top);

// Seed from the config, else SLICE_SEED, else 0.
std::uint64_t effective_seed(const RunConfig& config);

// Runs one subcommand; prints one JSON summary line to `out`.
// Returns 0 on success, 2 on usage errors, 1 on runtime failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace slicing::cli
