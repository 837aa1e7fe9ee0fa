#include "dynopt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dynopt/errors.hpp"

namespace dynopt {

void check_axis(const Axis& a, int min_nodes, const char* name) {
    if (!(a.hi > a.lo) || !std::isfinite(a.lo) || !std::isfinite(a.hi)) {
        throw GridError(std::string(name) + " axis needs finite bounds with hi > lo");
    }
    if (a.n < min_nodes) {
        throw GridError(std::string(name) + " axis needs at least " + std::to_string(min_nodes) + " nodes");
    }
}

Field2D::Field2D(Axis x, Axis t, double fill)
    : x_(x), t_(t), data_(static_cast<std::size_t>(x.n) * static_cast<std::size_t>(t.n), fill) {}

namespace {

// Locates the cell containing s; returns the left node and the local coordinate in [0, 1].
std::pair<int, double> locate(const Axis& a, double s, const char* name) {
    const double eps = 1e-12 * (a.hi - a.lo);
    if (!(s >= a.lo - eps && s <= a.hi + eps)) {
        throw GridError(std::string(name) + " = " + std::to_string(s) + " outside the grid [" +
                        std::to_string(a.lo) + ", " + std::to_string(a.hi) + "]");
    }
    const double pos = std::clamp((s - a.lo) / a.step(), 0.0, static_cast<double>(a.n - 1));
    const int i = std::min(static_cast<int>(pos), a.n - 2);
    return {i, pos - i};
}

}  // namespace

double Field2D::interpolate(double x, double t) const {
    const auto [i, a] = locate(x_, x, "x");
    const auto [j, b] = locate(t_, t, "t");
    const Field2D& f = *this;
    return (1 - a) * (1 - b) * f(i, j) + a * (1 - b) * f(i + 1, j) + (1 - a) * b * f(i, j + 1) +
           a * b * f(i + 1, j + 1);
}

Field2D Field2D::d_dx() const {
    Field2D out(x_, t_);
    const double h = x_.step();
    const int n = x_.n;
    const Field2D& f = *this;
    for (int j = 0; j < t_.n; ++j) {
        for (int i = 1; i < n - 1; ++i) out(i, j) = (f(i + 1, j) - f(i - 1, j)) / (2 * h);
        if (n >= 3) {
            out(0, j) = (-3 * f(0, j) + 4 * f(1, j) - f(2, j)) / (2 * h);
            out(n - 1, j) = (3 * f(n - 1, j) - 4 * f(n - 2, j) + f(n - 3, j)) / (2 * h);
        } else {
            out(0, j) = out(1, j) = (f(1, j) - f(0, j)) / h;
        }
    }
    return out;
}

Field2D Field2D::d_dt() const {
    Field2D out(x_, t_);
    const double k = t_.step();
    const int m = t_.n;
    const Field2D& f = *this;
    for (int i = 0; i < x_.n; ++i) {
        for (int j = 1; j < m - 1; ++j) out(i, j) = (f(i, j + 1) - f(i, j - 1)) / (2 * k);
        if (m >= 3) {
            out(i, 0) = (-3 * f(i, 0) + 4 * f(i, 1) - f(i, 2)) / (2 * k);
            out(i, m - 1) = (3 * f(i, m - 1) - 4 * f(i, m - 2) + f(i, m - 3)) / (2 * k);
        } else {
            out(i, 0) = out(i, 1) = (f(i, 1) - f(i, 0)) / k;
        }
    }
    return out;
}

bool Window::contains(const Field2D& f, int i, int j) const {
    if (skip_x_edges && (i == 0 || i == f.nx() - 1)) return false;
    if (skip_t_edges && (j == 0 || j == f.nt() - 1)) return false;
    const Axis& a = f.x_axis();
    const double centre = 0.5 * (a.lo + a.hi);
    const double half = 0.5 * (a.hi - a.lo);
    return std::abs(a.at(i) - centre) <= x_fraction * half * (1 + 1e-12);
}

double window_max_abs(const Field2D& f, const Window& w) {
    double m = 0.0;
    for (int j = 0; j < f.nt(); ++j) {
        for (int i = 0; i < f.nx(); ++i) {
            if (w.contains(f, i, j)) m = std::max(m, std::abs(f(i, j)));
        }
    }
    return m;
}

std::vector<double> slice_max_abs(const Field2D& f, const Window& w) {
    Window xw = w;
    xw.skip_t_edges = false;
    std::vector<double> out(static_cast<std::size_t>(f.nt()), 0.0);
    for (int j = 0; j < f.nt(); ++j) {
        for (int i = 0; i < f.nx(); ++i) {
            if (xw.contains(f, i, j)) out[static_cast<std::size_t>(j)] = std::max(out[static_cast<std::size_t>(j)], std::abs(f(i, j)));
        }
    }
    return out;
}

}  // namespace dynopt
