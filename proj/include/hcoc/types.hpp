#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcoc {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

// Scale parameters (eps, delta) with the regime ratio kappa = delta/eps.
// kappa may be the distinguished value "infinite" (represented by infinity()).
struct ScaleParams {
    double eps = 0.0;
    double delta = 0.0;
    double kappa = 0.0;

    static constexpr double infinite = std::numeric_limits<double>::infinity();

    bool kappa_is_infinite() const { return std::isinf(kappa); }
    // Convention 1/inf = 0.
    double inv_kappa() const { return kappa_is_infinite() ? 0.0 : 1.0 / kappa; }

    static ScaleParams finite(double eps, double delta) {
        return {eps, delta, delta / eps};
    }
    static ScaleParams infinite_ratio(double eps, double delta) {
        return {eps, delta, infinite};
    }
};

struct GeometryError : std::runtime_error {
    explicit GeometryError(const std::string& msg) : std::runtime_error("geometry: " + msg) {}
};

struct AssemblyError : std::runtime_error {
    explicit AssemblyError(const std::string& msg) : std::runtime_error("assembly: " + msg) {}
};

struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error("solver: " + msg) {}
};

struct OptimizationError : std::runtime_error {
    explicit OptimizationError(const std::string& msg) : std::runtime_error("optimize: " + msg) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error("validate: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io: " + msg) {}
};

using Vector = std::vector<double>;

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double a, const Vector& x, Vector& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace hcoc
