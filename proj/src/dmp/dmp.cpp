#include "slicing/dmp/dmp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "slicing/nn/ridge.hpp"
#include "slicing/rng.hpp"

namespace slicing::dmp {

using json = nlohmann::json;

double JointDmp::forcing(double s) const {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double d = s - centers[i];
        const double psi = std::exp(-widths[i] * d * d);
        num += psi * weights[i];
        den += psi;
    }
    return den > 0.0 ? num * s / den : 0.0;
}

void make_basis(std::size_t n, double alpha_s, std::vector<double>& centers, std::vector<double>& widths) {
    if (n < 2) throw std::invalid_argument("DMP needs at least 2 basis functions");
    centers.resize(n);
    widths.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        centers[i] = std::exp(-alpha_s * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double d = centers[i + 1] - centers[i];
        widths[i] = 1.0 / (d * d);
    }
    widths[n - 1] = widths[n - 2];
}

std::vector<double> basis_features(const JointDmp& dmp, double s) {
    std::vector<double> f(dmp.centers.size());
    double den = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double d = s - dmp.centers[i];
        f[i] = std::exp(-dmp.widths[i] * d * d);
        den += f[i];
    }
    for (auto& v : f) v = den > 0.0 ? v * s / den : 0.0;
    return f;
}

const std::vector<double>& demo_start() {
    static const std::vector<double> start{0.0, -0.40, 0.0, -2.10, 0.0, 1.70, 0.785};
    return start;
}

const std::vector<double>& demo_goal() {
    static const std::vector<double> goal{0.15, 0.10, -0.05, -1.80, 0.05, 1.95, 0.60};
    return goal;
}

double min_jerk(double y0, double g, double s) {
    const double s3 = s * s * s;
    return y0 + (g - y0) * (10.0 * s3 - 15.0 * s3 * s + 6.0 * s3 * s * s);
}

std::vector<Demonstration> synth_demos(std::uint64_t seed, std::size_t n, double perturbation, std::size_t samples,
                                       double duration) {
    if (n < 1) throw std::invalid_argument("need at least one demonstration");
    if (samples < 4) throw std::invalid_argument("need at least 4 samples per demonstration");
    std::vector<Demonstration> demos;
    for (std::size_t k = 0; k < n; ++k) {
        Rng rng(derive_seed({seed, 0xDE30, k}));
        Demonstration d;
        d.time.resize(samples);
        for (std::size_t i = 0; i < samples; ++i) {
            d.time[i] = duration * static_cast<double>(i) / static_cast<double>(samples - 1);
        }
        d.joints.assign(kJoints, std::vector<double>(samples));
        for (std::size_t j = 0; j < kJoints; ++j) {
            const double a1 = rng.uniform(-0.5, 0.5) * perturbation;
            const double a2 = rng.uniform(-0.5, 0.5) * perturbation;
            for (std::size_t i = 0; i < samples; ++i) {
                const double s = static_cast<double>(i) / static_cast<double>(samples - 1);
                const double bump = std::sin(std::numbers::pi * s);
                const double wiggle = bump * bump * (a1 + a2 * std::sin(2.0 * std::numbers::pi * s));
                d.joints[j][i] = min_jerk(demo_start()[j], demo_goal()[j], s) + wiggle;
            }
            d.joints[j].front() = demo_start()[j];
            d.joints[j].back() = demo_goal()[j];
        }
        demos.push_back(std::move(d));
    }
    return demos;
}

DmpParams fit_dmp(const std::vector<Demonstration>& demos, const DmpConfig& cfg) {
    if (demos.empty()) throw std::invalid_argument("fit_dmp: no demonstrations");
    const std::size_t joints = demos.front().joints.size();
    std::size_t rows = 0;
    for (const auto& d : demos) {
        if (d.samples() < 4 || d.joints.size() != joints) throw std::invalid_argument("fit_dmp: malformed demo");
        for (const auto& j : d.joints) {
            if (j.size() != d.samples()) throw std::invalid_argument("fit_dmp: joint/time length mismatch");
            for (double v : j) {
                if (!std::isfinite(v)) throw std::invalid_argument("fit_dmp: non-finite demo value");
            }
        }
        rows += d.samples() - 2;
    }
    const double tau = demos.front().time.back() - demos.front().time.front();
    if (!(tau > 0.0)) throw std::invalid_argument("fit_dmp: zero-length demonstration");

    DmpParams params;
    params.joints.resize(joints);
    for (std::size_t j = 0; j < joints; ++j) {
        JointDmp& dmp = params.joints[j];
        dmp.alpha_z = cfg.alpha_z;
        dmp.beta_z = cfg.alpha_z / 4.0;
        dmp.alpha_s = cfg.alpha_s;
        dmp.tau = tau;
        make_basis(cfg.n_basis, cfg.alpha_s, dmp.centers, dmp.widths);
        dmp.weights.assign(cfg.n_basis, 0.0);
        double y0 = 0.0, g = 0.0;
        for (const auto& d : demos) {
            y0 += d.joints[j].front();
            g += d.joints[j].back();
        }
        dmp.y0 = y0 / static_cast<double>(demos.size());
        dmp.goal = g / static_cast<double>(demos.size());

        Tensor features({rows, cfg.n_basis});
        std::vector<double> target(rows);
        std::size_t r = 0;
        for (const auto& d : demos) {
            const double dt = d.time[1] - d.time[0];
            const auto& y = d.joints[j];
            double s = 1.0;
            for (std::size_t i = 0; i + 2 < d.samples(); ++i) {
                const double yd = (y[i + 1] - y[i]) / dt;
                const double yd_next = (y[i + 2] - y[i + 1]) / dt;
                const double ydd = (yd_next - yd) / dt;
                target[r] = tau * tau * ydd - dmp.alpha_z * (dmp.beta_z * (dmp.goal - y[i]) - tau * yd);
                const auto f = basis_features(dmp, s);
                std::copy(f.begin(), f.end(), features.data() + r * cfg.n_basis);
                s -= dt * dmp.alpha_s * s / tau;
                ++r;
            }
        }
        dmp.weights = ridge_solve(features, target, cfg.lambda);
    }
    return params;
}

std::vector<double> rollout_joint(const JointDmp& dmp, double dt, double duration) {
    if (!(dt > 0.0) || dt > dmp.tau / 100.0 + 1e-15) throw std::invalid_argument("rollout: dt must be in (0, tau/100]");
    const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
    std::vector<double> ys(steps + 1);
    double y = dmp.y0, v = 0.0, s = 1.0;
    ys[0] = y;
    for (std::size_t n = 0; n < steps; ++n) {
        const double f = dmp.forcing(s);
        const double vdot = (dmp.alpha_z * (dmp.beta_z * (dmp.goal - y) - v) + f) / dmp.tau;
        const double ydot = v / dmp.tau;
        y += dt * ydot;
        v += dt * vdot;
        s += dt * (-dmp.alpha_s * s / dmp.tau);
        ys[n + 1] = y;
    }
    return ys;
}

Trajectory rollout(const DmpParams& params, double dt) {
    if (params.joints.empty()) throw std::invalid_argument("rollout: no joints");
    const double tau = params.joints.front().tau;
    Trajectory out;
    for (const auto& j : params.joints) out.joints.push_back(rollout_joint(j, dt, tau));
    out.time.resize(out.joints.front().size());
    for (std::size_t i = 0; i < out.time.size(); ++i) out.time[i] = dt * static_cast<double>(i);
    return out;
}

DmpParams parameterize_cut(const DmpParams& base, double d) {
    if (!(d >= 0.0)) throw std::invalid_argument("cut distance must be non-negative");
    if (base.joints.size() <= kApproachJoint) throw std::invalid_argument("parameterize_cut: too few joints");
    DmpParams p = base;
    p.joints[kApproachJoint].goal += kGoalShiftPerCm * d;
    return p;
}

Trajectory mean_trajectory(const std::vector<Trajectory>& trajs) {
    if (trajs.empty()) throw std::invalid_argument("mean of no trajectories");
    Trajectory m = trajs.front();
    for (std::size_t k = 1; k < trajs.size(); ++k) {
        if (trajs[k].samples() != m.samples() || trajs[k].joints.size() != m.joints.size()) {
            throw std::invalid_argument("trajectories differ in shape");
        }
        for (std::size_t j = 0; j < m.joints.size(); ++j)
            for (std::size_t i = 0; i < m.samples(); ++i) m.joints[j][i] += trajs[k].joints[j][i];
    }
    for (auto& j : m.joints)
        for (auto& v : j) v /= static_cast<double>(trajs.size());
    return m;
}

std::vector<double> rmse_per_joint(const Trajectory& a, const Trajectory& b) {
    if (a.joints.size() != b.joints.size()) throw std::invalid_argument("rmse: joint count differs");
    std::vector<double> out(a.joints.size());
    const double a_span = a.time.back() - a.time.front();
    for (std::size_t j = 0; j < a.joints.size(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < b.samples(); ++i) {
            const double u = std::clamp((b.time[i] - a.time.front()) / a_span, 0.0, 1.0) *
                             static_cast<double>(a.samples() - 1);
            const auto k = std::min(static_cast<std::size_t>(u), a.samples() - 2);
            const double frac = u - static_cast<double>(k);
            const double ya = a.joints[j][k] * (1.0 - frac) + a.joints[j][k + 1] * frac;
            const double e = ya - b.joints[j][i];
            acc += e * e;
        }
        out[j] = std::sqrt(acc / static_cast<double>(b.samples()));
    }
    return out;
}

std::string params_to_json(const DmpParams& params) {
    json joints = json::array();
    for (const auto& j : params.joints) {
        joints.push_back({{"weights", j.weights},
                          {"centers", j.centers},
                          {"widths", j.widths},
                          {"alpha_z", j.alpha_z},
                          {"beta_z", j.beta_z},
                          {"alpha_s", j.alpha_s},
                          {"y0", j.y0},
                          {"goal", j.goal},
                          {"tau", j.tau}});
    }
    return json{{"format_version", 1}, {"kind", "dmp"}, {"joints", joints}}.dump(2);
}

DmpParams params_from_json(const std::string& text) {
    const auto doc = json::parse(text);
    if (doc.value("kind", "") != "dmp") throw std::invalid_argument("not a DMP parameter file");
    DmpParams p;
    for (const auto& jj : doc.at("joints")) {
        JointDmp j;
        j.weights = jj.at("weights").get<std::vector<double>>();
        j.centers = jj.at("centers").get<std::vector<double>>();
        j.widths = jj.at("widths").get<std::vector<double>>();
        j.alpha_z = jj.at("alpha_z").get<double>();
        j.beta_z = jj.at("beta_z").get<double>();
        j.alpha_s = jj.at("alpha_s").get<double>();
        j.y0 = jj.at("y0").get<double>();
        j.goal = jj.at("goal").get<double>();
        j.tau = jj.at("tau").get<double>();
        if (j.weights.size() < 2 || j.centers.size() != j.weights.size() || j.widths.size() != j.weights.size()) {
            throw std::invalid_argument("DMP joint has inconsistent basis sizes");
        }
        for (double h : j.widths) {
            if (!(h > 0.0)) throw std::invalid_argument("DMP basis widths must be positive");
        }
        p.joints.push_back(std::move(j));
    }
    return p;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << "t";
    for (std::size_t j = 0; j < traj.joints.size(); ++j) out << ",j" << j;
    out << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < traj.samples(); ++i) {
        out << traj.time[i];
        for (const auto& j : traj.joints) out << ',' << j[i];
        out << '\n';
    }
}

Trajectory read_trajectory_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::string line;
    std::getline(in, line);
    const auto cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    Trajectory t;
    t.joints.assign(cols, {});
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        t.time.push_back(std::stod(cell));
        for (std::size_t j = 0; j < cols; ++j) {
            if (!std::getline(ls, cell, ',')) throw std::runtime_error(file.string() + ": short row");
            t.joints[j].push_back(std::stod(cell));
        }
    }
    return t;
}

}  // namespace slicing::dmp
