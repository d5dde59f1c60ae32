#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace slicing {

using Matrix = std::vector<std::vector<double>>;

struct SymmetricEigen {
    std::vector<double> values;  // descending
    Matrix vectors;              // vectors[k] pairs with values[k]
};

// Cyclic Jacobi rotations. Each eigenvector's first nonzero entry is positive.
SymmetricEigen jacobi_eigen(const Matrix& a, double tolerance = 1e-14, int max_sweeps = 100);

struct PcaModel {
    std::vector<double> mean;
    std::array<std::vector<double>, 2> components;
    std::array<double, 2> explained_variance{};
    double total_variance = 0.0;

    double explained_ratio(std::size_t k) const;
};

PcaModel pca_fit(const Matrix& points);
std::array<double, 2> pca_project(const PcaModel& model, const std::vector<double>& z);
std::vector<std::array<double, 2>> pca_project(const PcaModel& model, const Matrix& points);

struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<long>> counts;  // rows: true, columns: predicted

    std::size_t size() const { return counts.size(); }
    long total() const;
    long row_sum(std::size_t k) const;
};

struct ConfusionReport {
    ConfusionMatrix matrix;
    double accuracy = 0.0;
    double adjacent_error_rate = 1.0;  // 1.0 when there are no errors
};

ConfusionReport confusion(const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t k,
                          std::vector<std::string> labels = {});

// Off-diagonal pair {i, j} (i < j) with the largest count[i][j] + count[j][i].
std::array<std::size_t, 2> densest_confusion(const ConfusionMatrix& m);

// Mean point of each class; classes with no points are left empty.
Matrix class_centroids(const Matrix& points, const std::vector<int>& classes, std::size_t k);

struct AdjacencyReport {
    std::size_t triples = 0;
    std::size_t violations = 0;
    bool holds() const { return triples > 0 && violations == 0; }
};

// For each i with centroids i, i+1, i+2 present: both adjacent distances must be
// smaller than the skip-one distance d(i, i+2).
AdjacencyReport centroid_adjacency(const Matrix& centroids);

struct PcaPoint {
    double x = 0.0, y = 0.0;
    int cls = 0;
    std::string role;
    int step = 0;
};

void write_pca_points_csv(const std::vector<PcaPoint>& points, const std::filesystem::path& file);
std::vector<PcaPoint> read_pca_points_csv(const std::filesystem::path& file);
void write_confusion_csv(const ConfusionMatrix& m, const std::filesystem::path& file);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& file);
void write_metrics_csv(const std::map<std::string, double>& metrics, const std::filesystem::path& file);
std::map<std::string, double> read_metrics_csv(const std::filesystem::path& file);

}  // namespace slicing
