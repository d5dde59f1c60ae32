#include "slicing/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "slicing/nn/serialize.hpp"

namespace slicing {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream in(line);
    std::string item;
    while (std::getline(in, item, sep)) out.push_back(item);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::ostringstream csv_stream() {
    std::ostringstream out;
    out.precision(std::numeric_limits<double>::max_digits10);
    return out;
}

double parse_double(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::runtime_error("bad number in CSV: " + s);
    return v;
}

void fix_sign(std::vector<double>& v) {
    for (double x : v) {
        if (std::abs(x) > 1e-12) {
            if (x < 0.0) {
                for (auto& y : v) y = -y;
            }
            return;
        }
    }
}

}  // namespace

SymmetricEigen jacobi_eigen(const Matrix& input, double tolerance, int max_sweeps) {
    const std::size_t n = input.size();
    for (const auto& row : input) {
        if (row.size() != n) throw std::invalid_argument("jacobi_eigen: matrix must be square");
    }
    Matrix a = input;
    Matrix v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

    double scale = 0.0;
    for (const auto& row : a) {
        for (double x : row) scale += x * x;
    }
    scale = std::sqrt(scale);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        }
        if (std::sqrt(off) <= tolerance * std::max(scale, 1e-300)) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a[i][i] > a[j][j]; });
    SymmetricEigen out;
    for (std::size_t k : order) {
        out.values.push_back(a[k][k]);
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = v[i][k];
        fix_sign(col);
        out.vectors.push_back(std::move(col));
    }
    return out;
}

double PcaModel::explained_ratio(std::size_t k) const {
    return total_variance > 0.0 ? explained_variance.at(k) / total_variance : 0.0;
}

PcaModel pca_fit(const Matrix& points) {
    if (points.size() < 3) throw std::invalid_argument("pca_fit: need at least 3 samples");
    const std::size_t d = points.front().size();
    if (d < 2) throw std::invalid_argument("pca_fit: need at least 2 dimensions");
    for (const auto& p : points) {
        if (p.size() != d) throw std::invalid_argument("pca_fit: samples differ in length");
    }
    const auto n = static_cast<double>(points.size());
    PcaModel m;
    m.mean.assign(d, 0.0);
    for (const auto& p : points) {
        for (std::size_t j = 0; j < d; ++j) m.mean[j] += p[j];
    }
    for (auto& x : m.mean) x /= n;
    Matrix cov(d, std::vector<double>(d, 0.0));
    for (const auto& p : points) {
        for (std::size_t i = 0; i < d; ++i) {
            const double ci = p[i] - m.mean[i];
            for (std::size_t j = i; j < d; ++j) cov[i][j] += ci * (p[j] - m.mean[j]);
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            cov[i][j] /= n - 1.0;
            cov[j][i] = cov[i][j];
        }
        m.total_variance += cov[i][i];
    }
    auto eig = jacobi_eigen(cov);
    for (std::size_t k = 0; k < 2; ++k) {
        m.components[k] = eig.vectors[k];
        m.explained_variance[k] = std::max(0.0, eig.values[k]);
    }
    return m;
}

std::array<double, 2> pca_project(const PcaModel& model, const std::vector<double>& z) {
    if (z.size() != model.mean.size()) throw std::invalid_argument("pca_project: dimension mismatch");
    std::array<double, 2> out{};
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t j = 0; j < z.size(); ++j) out[k] += (z[j] - model.mean[j]) * model.components[k][j];
    }
    return out;
}

std::vector<std::array<double, 2>> pca_project(const PcaModel& model, const Matrix& points) {
    std::vector<std::array<double, 2>> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(pca_project(model, p));
    return out;
}

long ConfusionMatrix::total() const {
    long t = 0;
    for (std::size_t k = 0; k < size(); ++k) t += row_sum(k);
    return t;
}

long ConfusionMatrix::row_sum(std::size_t k) const {
    return std::accumulate(counts.at(k).begin(), counts.at(k).end(), 0L);
}

ConfusionReport confusion(const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t k,
                          std::vector<std::string> labels) {
    if (truth.size() != predicted.size()) throw std::invalid_argument("confusion: label lists differ in length");
    if (k == 0) throw std::invalid_argument("confusion: need at least one class");
    if (labels.empty()) {
        for (std::size_t i = 0; i < k; ++i) labels.push_back(std::to_string(i));
    }
    if (labels.size() != k) throw std::invalid_argument("confusion: wrong number of labels");
    ConfusionReport r;
    r.matrix.labels = std::move(labels);
    r.matrix.counts.assign(k, std::vector<long>(k, 0));
    long correct = 0, errors = 0, adjacent = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 0 || p < 0 || t >= static_cast<int>(k) || p >= static_cast<int>(k)) {
            throw std::invalid_argument("confusion: label out of range");
        }
        ++r.matrix.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        if (t == p) {
            ++correct;
        } else {
            ++errors;
            adjacent += std::abs(t - p) == 1;
        }
    }
    r.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
    r.adjacent_error_rate = errors == 0 ? 1.0 : static_cast<double>(adjacent) / static_cast<double>(errors);
    return r;
}

std::array<std::size_t, 2> densest_confusion(const ConfusionMatrix& m) {
    if (m.size() < 2) throw std::invalid_argument("densest_confusion: need at least two classes");
    std::array<std::size_t, 2> best{0, 1};
    long most = -1;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = i + 1; j < m.size(); ++j) {
            const long c = m.counts[i][j] + m.counts[j][i];
            if (c > most) {
                most = c;
                best = {i, j};
            }
        }
    }
    return best;
}

Matrix class_centroids(const Matrix& points, const std::vector<int>& classes, std::size_t k) {
    if (points.size() != classes.size()) throw std::invalid_argument("class_centroids: size mismatch");
    Matrix sums(k);
    std::vector<double> counts(k, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int c = classes[i];
        if (c < 0 || c >= static_cast<int>(k)) throw std::invalid_argument("class_centroids: class out of range");
        auto& s = sums[static_cast<std::size_t>(c)];
        if (s.empty()) s.assign(points[i].size(), 0.0);
        for (std::size_t j = 0; j < s.size(); ++j) s[j] += points[i][j];
        ++counts[static_cast<std::size_t>(c)];
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (auto& x : sums[c]) x /= counts[c];
    }
    return sums;
}

AdjacencyReport centroid_adjacency(const Matrix& centroids) {
    auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
        return std::sqrt(s);
    };
    AdjacencyReport r;
    for (std::size_t i = 0; i + 2 < centroids.size(); ++i) {
        const auto &a = centroids[i], &b = centroids[i + 1], &c = centroids[i + 2];
        if (a.empty() || b.empty() || c.empty()) continue;
        ++r.triples;
        const double skip = dist(a, c);
        if (!(dist(a, b) < skip && dist(b, c) < skip)) ++r.violations;
    }
    return r;
}

void write_pca_points_csv(const std::vector<PcaPoint>& points, const std::filesystem::path& file) {
    auto out = csv_stream();
    out << "x,y,class,role,step\n";
    for (const auto& p : points) out << p.x << ',' << p.y << ',' << p.cls << ',' << p.role << ',' << p.step << '\n';
    write_text_file(file, out.str());
}

std::vector<PcaPoint> read_pca_points_csv(const std::filesystem::path& file) {
    const auto lines = read_lines(file);
    if (lines.empty() || lines[0] != "x,y,class,role,step") throw std::runtime_error("bad pca_points header");
    std::vector<PcaPoint> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], ',');
        if (f.size() != 5) throw std::runtime_error("bad pca_points row " + std::to_string(i));
        out.push_back({parse_double(f[0]), parse_double(f[1]), std::stoi(f[2]), f[3], std::stoi(f[4])});
    }
    return out;
}

void write_confusion_csv(const ConfusionMatrix& m, const std::filesystem::path& file) {
    std::ostringstream out;
    out << "true\\pred";
    for (const auto& l : m.labels) out << ',' << l;
    out << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
        out << m.labels[i];
        for (long c : m.counts[i]) out << ',' << c;
        out << '\n';
    }
    write_text_file(file, out.str());
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& file) {
    const auto lines = read_lines(file);
    if (lines.empty()) throw std::runtime_error("empty confusion CSV");
    ConfusionMatrix m;
    const auto head = split(lines[0], ',');
    m.labels.assign(head.begin() + 1, head.end());
    const std::size_t k = m.labels.size();
    if (lines.size() != k + 1) throw std::runtime_error("confusion CSV is not square");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], ',');
        if (f.size() != k + 1 || f[0] != m.labels[i - 1]) throw std::runtime_error("bad confusion row");
        std::vector<long> row;
        for (std::size_t j = 1; j < f.size(); ++j) row.push_back(std::stol(f[j]));
        m.counts.push_back(std::move(row));
    }
    return m;
}

void write_metrics_csv(const std::map<std::string, double>& metrics, const std::filesystem::path& file) {
    auto out = csv_stream();
    out << "metric,value\n";
    for (const auto& [name, v] : metrics) out << name << ',' << v << '\n';
    write_text_file(file, out.str());
}

std::map<std::string, double> read_metrics_csv(const std::filesystem::path& file) {
    const auto lines = read_lines(file);
    if (lines.empty() || lines[0] != "metric,value") throw std::runtime_error("bad metrics header");
    std::map<std::string, double> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], ',');
        if (f.size() != 2) throw std::runtime_error("bad metrics row");
        out[f[0]] = parse_double(f[1]);
    }
    return out;
}

}  // namespace slicing
