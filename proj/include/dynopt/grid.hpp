#pragma once

#include <cstddef>
#include <vector>

namespace dynopt {

/// n uniformly spaced nodes on [lo, hi].
struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    int n = 2;

    double step() const { return (hi - lo) / (n - 1); }
    double at(int i) const { return i == n - 1 ? hi : lo + i * step(); }
};

/// Throws GridError unless hi > lo and n >= min_nodes.
void check_axis(const Axis& a, int min_nodes, const char* name);

/// Node values on an x × t grid, stored row-major over (t, x).
class Field2D {
public:
    Field2D() = default;
    Field2D(Axis x, Axis t, double fill = 0.0);

    const Axis& x_axis() const { return x_; }
    const Axis& t_axis() const { return t_; }
    int nx() const { return x_.n; }
    int nt() const { return t_.n; }

    double& operator()(int i, int j) { return data_[index(i, j)]; }
    double operator()(int i, int j) const { return data_[index(i, j)]; }
    const std::vector<double>& values() const { return data_; }

    /// Bilinear interpolation; throws GridError outside the rectangle.
    double interpolate(double x, double t) const;

    /// x-derivative: central inside, second-order one-sided at the two edges.
    Field2D d_dx() const;
    /// t-derivative with the same stencils.
    Field2D d_dt() const;

private:
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(x_.n) + static_cast<std::size_t>(i);
    }

    Axis x_;
    Axis t_;
    std::vector<double> data_;
};

/// Which nodes count as interior for residual and error norms: x within
/// x_fraction of the half-width around the centre, and optionally no t edges.
struct Window {
    double x_fraction = 0.75;
    bool skip_t_edges = true;
    bool skip_x_edges = true;

    bool contains(const Field2D& f, int i, int j) const;
};

/// max |f| over the window.
double window_max_abs(const Field2D& f, const Window& w = {});

/// Per time slice max |f| over the window's x-range (all slices reported).
std::vector<double> slice_max_abs(const Field2D& f, const Window& w = {});

}  // namespace dynopt
