#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "slicing/analysis/analysis.hpp"
#include "slicing/rng.hpp"

using namespace slicing;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "slicing_analysis_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

Matrix random_points(std::size_t n, std::size_t rank, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    Matrix pts(n, std::vector<double>(dim, 0.0));
    for (auto& p : pts) {
        for (std::size_t j = 0; j < rank; ++j) p[j] = rng.normal(0.0, 1.0 + static_cast<double>(j));
    }
    return pts;
}

// Eigenvector with the same sign convention as jacobi_eigen.
std::vector<double> signed_vector(const Eigen::VectorXd& v) {
    std::vector<double> out(v.data(), v.data() + v.size());
    for (double x : out) {
        if (std::abs(x) > 1e-12) {
            if (x < 0) {
                for (auto& y : out) y = -y;
            }
            break;
        }
    }
    return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("Jacobi eigendecomposition matches a dense solver") {
    Rng rng(1);
    const std::size_t n = 12;
    Matrix a(n, std::vector<double>(n));
    Eigen::MatrixXd e(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            a[i][j] = a[j][i] = rng.normal();
            e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j];
            e(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = a[i][j];
        }
    }
    auto mine = jacobi_eigen(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(e);
    for (std::size_t k = 0; k < n; ++k) {
        const auto idx = static_cast<Eigen::Index>(n - 1 - k);  // Eigen sorts ascending
        CHECK(std::abs(mine.values[k] - solver.eigenvalues()(idx)) < 1e-10);
        const auto ref = signed_vector(solver.eigenvectors().col(idx));
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(mine.vectors[k][i] - ref[i]) < 1e-8);
    }
    for (std::size_t k = 1; k < n; ++k) CHECK(mine.values[k] <= mine.values[k - 1]);
    CHECK_THROWS_AS(jacobi_eigen(Matrix{{1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("PCA of padded 50x10 data matches the dense oracle") {
    Rng rng(2);
    Matrix pts(50, std::vector<double>(128, 0.0));
    for (auto& p : pts) {
        for (std::size_t j = 0; j < 10; ++j) p[j] = rng.normal(0.0, 1.0 + 0.3 * static_cast<double>(j));
    }
    auto model = pca_fit(pts);

    Eigen::MatrixXd x(50, 128);
    for (Eigen::Index i = 0; i < 50; ++i) {
        for (Eigen::Index j = 0; j < 128; ++j) x(i, j) = pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / 49.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    for (std::size_t k = 0; k < 2; ++k) {
        const auto idx = static_cast<Eigen::Index>(127 - k);
        CHECK(std::abs(model.explained_variance[k] - solver.eigenvalues()(idx)) < 1e-8);
        const auto ref = signed_vector(solver.eigenvectors().col(idx));
        for (std::size_t i = 0; i < 128; ++i) CHECK(std::abs(model.components[k][i] - ref[i]) < 1e-8);
    }
    CHECK(model.total_variance == doctest::Approx(cov.trace()).epsilon(1e-12));
}

TEST_CASE("PCA invariants") {
    auto model = pca_fit(random_points(40, 6, 128, 3));
    CHECK(std::abs(dot(model.components[0], model.components[0]) - 1.0) < 1e-9);
    CHECK(std::abs(dot(model.components[1], model.components[1]) - 1.0) < 1e-9);
    CHECK(std::abs(dot(model.components[0], model.components[1])) < 1e-9);
    CHECK(model.explained_variance[0] >= model.explained_variance[1]);
    CHECK(model.explained_variance[1] >= 0.0);
    for (const auto& c : model.components) {
        for (double v : c) {
            if (std::abs(v) > 1e-12) {
                CHECK(v > 0.0);
                break;
            }
        }
    }
    CHECK_THROWS_AS(pca_fit(random_points(2, 2, 128, 1)), std::invalid_argument);
}

TEST_CASE("collinear points") {
    Rng rng(4);
    std::vector<double> dir(128);
    for (auto& v : dir) v = rng.normal();
    Matrix pts;
    for (int i = 0; i < 20; ++i) {
        const double t = rng.normal();
        std::vector<double> p(128);
        for (std::size_t j = 0; j < 128; ++j) p[j] = 3.0 + t * dir[j];
        pts.push_back(p);
    }
    auto model = pca_fit(pts);
    CHECK(model.explained_ratio(0) > 0.999);
}

TEST_CASE("rank-2 data keeps pairwise distances in the projection") {
    auto pts = random_points(30, 2, 128, 5);
    // Rotate the plane away from the coordinate axes.
    Rng rng(6);
    std::vector<double> u(128), v(128);
    for (auto& x : u) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    Matrix lifted;
    for (const auto& p : pts) {
        std::vector<double> q(128);
        for (std::size_t j = 0; j < 128; ++j) q[j] = 1.0 + p[0] * u[j] + p[1] * v[j];
        lifted.push_back(q);
    }
    auto model = pca_fit(lifted);
    auto proj = pca_project(model, lifted);
    for (std::size_t i = 0; i < lifted.size(); ++i) {
        for (std::size_t j = i + 1; j < lifted.size(); ++j) {
            double full = 0.0;
            for (std::size_t k = 0; k < 128; ++k) full += std::pow(lifted[i][k] - lifted[j][k], 2);
            const double flat = std::pow(proj[i][0] - proj[j][0], 2) + std::pow(proj[i][1] - proj[j][1], 2);
            CHECK(std::abs(std::sqrt(full) - std::sqrt(flat)) < 1e-9);
        }
    }
}

TEST_CASE("projection is affine") {
    auto model = pca_fit(random_points(25, 8, 128, 7));
    auto m = pca_project(model, model.mean);
    CHECK(std::abs(m[0]) < 1e-12);
    CHECK(std::abs(m[1]) < 1e-12);
    Rng rng(8);
    std::vector<double> a(128), b(128), ab(128), zero(128, 0.0);
    for (std::size_t j = 0; j < 128; ++j) {
        a[j] = rng.normal();
        b[j] = rng.normal();
        ab[j] = a[j] + b[j];
    }
    const auto pa = pca_project(model, a), pb = pca_project(model, b), pab = pca_project(model, ab),
               p0 = pca_project(model, zero);
    for (std::size_t k = 0; k < 2; ++k) CHECK(pab[k] == doctest::Approx(pa[k] + pb[k] - p0[k]).epsilon(1e-12));
    CHECK_THROWS_AS(pca_project(model, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("confusion matrix") {
    auto perfect = confusion({0, 1, 2, 2}, {0, 1, 2, 2}, 3);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.adjacent_error_rate == 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i != j) CHECK(perfect.matrix.counts[i][j] == 0);
        }
    }

    auto adjacent = confusion({0, 1, 2, 3}, {1, 2, 1, 2}, 4);
    CHECK(adjacent.accuracy == 0.0);
    CHECK(adjacent.adjacent_error_rate == 1.0);

    auto mixed = confusion({0, 0, 1, 3, 3}, {0, 2, 1, 0, 2}, 4);
    CHECK(mixed.accuracy == doctest::Approx(0.4));
    CHECK(mixed.adjacent_error_rate == doctest::Approx(1.0 / 3.0));
    CHECK(mixed.matrix.row_sum(0) == 2);
    CHECK(mixed.matrix.row_sum(3) == 2);
    CHECK(mixed.matrix.total() == 5);
    CHECK(densest_confusion(mixed.matrix) == std::array<std::size_t, 2>{0, 2});

    CHECK_THROWS_AS(confusion({0, 5}, {0, 1}, 3), std::invalid_argument);
    CHECK_THROWS_AS(confusion({0}, {0, 1}, 3), std::invalid_argument);
}

TEST_CASE("confusion row sums equal class counts") {
    Rng rng(9);
    std::vector<int> t, p;
    std::vector<long> count(5, 0);
    for (int i = 0; i < 500; ++i) {
        t.push_back(static_cast<int>(rng.uniform_int(0, 4)));
        p.push_back(static_cast<int>(rng.uniform_int(0, 4)));
        ++count[static_cast<std::size_t>(t.back())];
    }
    auto r = confusion(t, p, 5);
    for (std::size_t k = 0; k < 5; ++k) CHECK(r.matrix.row_sum(k) == count[k]);
}

TEST_CASE("centroid adjacency") {
    Matrix line{{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}, {3.0, 0.1}};
    auto r = centroid_adjacency(line);
    CHECK(r.triples == 2);
    CHECK(r.holds());
    Matrix folded{{0.0, 0.0}, {1.0, 0.0}, {0.2, 0.0}};
    CHECK_FALSE(centroid_adjacency(folded).holds());

    auto c = class_centroids({{0.0, 0.0}, {2.0, 2.0}, {5.0, 5.0}}, {0, 0, 2}, 4);
    CHECK(c[0] == std::vector<double>{1.0, 1.0});
    CHECK(c[1].empty());
    CHECK(c[2] == std::vector<double>{5.0, 5.0});
    CHECK(centroid_adjacency(c).triples == 0);
}

TEST_CASE("CSV exports round trip") {
    std::vector<PcaPoint> pts{{0.1, -2.0 / 3.0, 2, "slice", 0}, {1e-17, 12345.678901234567, 4, "whole", 3}};
    write_pca_points_csv(pts, scratch("pca_points.csv"));
    auto back = read_pca_points_csv(scratch("pca_points.csv"));
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].x == pts[i].x);
        CHECK(back[i].y == pts[i].y);
        CHECK(back[i].cls == pts[i].cls);
        CHECK(back[i].role == pts[i].role);
        CHECK(back[i].step == pts[i].step);
    }

    auto r = confusion({0, 1, 1, 2}, {0, 2, 1, 2}, 3, {"very-thin", "thin", "thick"});
    write_confusion_csv(r.matrix, scratch("confusion.csv"));
    auto m = read_confusion_csv(scratch("confusion.csv"));
    CHECK(m.labels == r.matrix.labels);
    CHECK(m.counts == r.matrix.counts);

    std::map<std::string, double> metrics{{"accuracy", 0.1 + 0.2}, {"loss", 1.0 / 3.0}};
    write_metrics_csv(metrics, scratch("metrics.csv"));
    CHECK(read_metrics_csv(scratch("metrics.csv")) == metrics);
}
