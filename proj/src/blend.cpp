#include "fractalsea/blend.hpp"

#include "fractalsea/error.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <deque>
#include <limits>

namespace fractalsea {

void laplace_fill(int width, int height, std::span<const std::uint8_t> region, std::span<float *const> planes) {
    const std::size_t n_pix = static_cast<std::size_t>(width) * height;
    if (region.size() != n_pix) throw DomainError("Laplace region size mismatch");
    std::vector<std::int32_t> index(n_pix, -1);
    std::int32_t n = 0;
    for (std::size_t i = 0; i < n_pix; ++i)
        if (region[i]) index[i] = n++;
    if (n == 0) return;

    const int dx[4] = {-1, 1, 0, 0};
    const int dy[4] = {0, 0, -1, 1};
    // Every region component needs a Dirichlet neighbour, else the system is singular.
    {
        std::vector<std::uint8_t> outside(n_pix);
        for (std::size_t i = 0; i < n_pix; ++i) outside[i] = region[i] ? 0 : 1;
        const auto dist = distance_to(width, height, outside);
        for (std::size_t i = 0; i < n_pix; ++i)
            if (dist[i] == std::numeric_limits<std::int32_t>::max())
                throw DomainError("Laplace system is singular; a region component has no boundary");
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * 5);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(planes.size()));
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * width + x;
            const std::int32_t row = index[p];
            if (row < 0) continue;
            double diag = 0.0;
            for (int k = 0; k < 4; ++k) {
                const int nx = x + dx[k], ny = y + dy[k];
                if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
                diag += 1.0;
                const std::size_t q = static_cast<std::size_t>(ny) * width + nx;
                if (index[q] >= 0) {
                    triplets.emplace_back(row, index[q], -1.0);
                } else {
                    for (std::size_t c = 0; c < planes.size(); ++c) rhs(row, static_cast<Eigen::Index>(c)) += planes[c][q];
                }
            }
            triplets.emplace_back(row, row, diag);
        }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success)
        throw DomainError("Laplace system is singular; a region component has no boundary");
    const Eigen::MatrixXd sol = solver.solve(rhs);
    for (std::size_t i = 0; i < n_pix; ++i)
        if (index[i] >= 0)
            for (std::size_t c = 0; c < planes.size(); ++c)
                planes[c][i] = static_cast<float>(sol(index[i], static_cast<Eigen::Index>(c)));
}

std::vector<std::int32_t> distance_to(int width, int height, std::span<const std::uint8_t> seeds) {
    const std::size_t n_pix = static_cast<std::size_t>(width) * height;
    std::vector<std::int32_t> dist(n_pix, std::numeric_limits<std::int32_t>::max());
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < n_pix; ++i)
        if (seeds[i]) {
            dist[i] = 0;
            queue.push_back(i);
        }
    while (!queue.empty()) {
        const std::size_t p = queue.front();
        queue.pop_front();
        const int x = static_cast<int>(p % width), y = static_cast<int>(p / width);
        const std::int32_t nd = dist[p] + 1;
        auto visit = [&](int nx, int ny) {
            if (nx < 0 || ny < 0 || nx >= width || ny >= height) return;
            const std::size_t q = static_cast<std::size_t>(ny) * width + nx;
            if (dist[q] > nd) {
                dist[q] = nd;
                queue.push_back(q);
            }
        };
        visit(x - 1, y);
        visit(x + 1, y);
        visit(x, y - 1);
        visit(x, y + 1);
    }
    return dist;
}

} // namespace fractalsea
