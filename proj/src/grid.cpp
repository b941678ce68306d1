#include "couplex/grid.hpp"

#include <cmath>
#include <sstream>

namespace couplex {

TimeGrid TimeGrid::refined(double T, std::size_t n0, double q, double h_min) {
    if (!(T > 0.0)) fail(ErrorCode::domain, "grid: T must be positive");
    if (n0 < 2) fail(ErrorCode::domain, "grid.n0: must be at least 2");
    if (!(q > 0.0 && q < 1.0)) fail(ErrorCode::domain, "grid.q: must lie in (0, 1)");
    if (!(h_min > 0.0 && h_min < T / static_cast<double>(n0))) {
        std::ostringstream os;
        os << "grid.h_min: must lie in (0, T/n0) = (0, " << T / static_cast<double>(n0) << ")";
        fail(ErrorCode::domain, os.str());
    }
    TimeGrid g;
    g.horizon_ = T;
    g.h_min_ = h_min;
    g.q_ = q;
    g.n0_ = n0;
    const double h = T / static_cast<double>(n0);
    for (std::size_t k = 0; k < n0; ++k) g.nodes_.push_back(static_cast<double>(k) * h);
    double t = g.nodes_.back();
    for (;;) {
        const double next = T - q * (T - t);
        if (T - next <= h_min) break;
        g.nodes_.push_back(next);
        t = next;
    }
    g.nodes_.push_back(T - h_min);
    return g;
}

TimeGrid TimeGrid::uniform(double T, std::size_t n) {
    if (!(T > 0.0)) fail(ErrorCode::domain, "grid: T must be positive");
    if (n < 1) fail(ErrorCode::domain, "grid: need at least one step");
    TimeGrid g;
    g.horizon_ = T;
    g.n0_ = n;
    g.nodes_.resize(n + 1);
    for (std::size_t k = 0; k < n; ++k) g.nodes_[k] = T * static_cast<double>(k) / static_cast<double>(n);
    g.nodes_[n] = T;
    return g;
}

std::vector<Vec> gaussian_increments(const RngStream& rng, const TimeGrid& grid, int d) {
    std::vector<Vec> out(grid.steps(), Vec(d));
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        rng.normals(static_cast<std::uint32_t>(k), {out[k].data(), static_cast<std::size_t>(d)});
        out[k] *= std::sqrt(grid.step(k));
    }
    return out;
}

}  // namespace couplex
