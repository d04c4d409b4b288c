#include "hcoc/hooke.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hcoc {

HookeTensor HookeTensor::isotropic(double lambda, double mu) {
    HookeTensor t;
    t(0, 0) = lambda + 2 * mu;
    t(0, 1) = lambda;
    t(1, 0) = lambda;
    t(1, 1) = lambda + 2 * mu;
    t(2, 2) = mu;
    return t;
}

HookeTensor HookeTensor::parse(const std::string& spec) {
    if (spec.rfind("iso:", 0) != 0)
        throw ValidationError("unsupported Hooke tensor spec '" + spec + "'");
    double lambda = 1.0, mu = 1.0;
    std::stringstream ss(spec.substr(4));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ValidationError("bad Hooke tensor item '" + item + "'");
        const std::string name = item.substr(0, eq);
        const double v = std::stod(item.substr(eq + 1));
        if (name == "lambda") lambda = v;
        else if (name == "mu") mu = v;
        else throw ValidationError("unknown Hooke parameter '" + name + "'");
    }
    return isotropic(lambda, mu);
}

HookeTensor HookeTensor::scaled(double factor) const {
    HookeTensor t = *this;
    for (double& v : t.voigt) v *= factor;
    return t;
}

std::array<double, 9> HookeTensor::kelvin() const {
    const double r = std::sqrt(2.0);
    std::array<double, 9> k = voigt;
    k[2] *= r;
    k[5] *= r;
    k[6] *= r;
    k[7] *= r;
    k[8] *= 2.0;
    return k;
}

std::array<double, 3> HookeTensor::kelvin_eigenvalues() const {
    const auto k = kelvin();
    const auto ev = symmetric_eigenvalues({k.begin(), k.end()}, 3);
    return {ev[0], ev[1], ev[2]};
}

double HookeTensor::symmetry_residual() const {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            num = std::max(num, std::abs((*this)(i, j) - (*this)(j, i)));
            den = std::max(den, std::abs((*this)(i, j)));
        }
    return den > 0.0 ? num / den : 0.0;
}

void HookeTensor::validate(double k_min) const {
    if (symmetry_residual() > 1e-12)
        throw ValidationError("Hooke tensor Voigt matrix is not symmetric");
    const auto ev = kelvin_eigenvalues();
    if (!(ev[0] > k_min))
        throw ValidationError("Hooke tensor is not coercive: smallest Kelvin eigenvalue " +
                              std::to_string(ev[0]));
}

double contract(const HookeTensor& a, const std::array<double, 3>& s,
                const std::array<double, 3>& t) {
    double out = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out += s[i] * a(i, j) * t[j];
    return out;
}

ContrastField ContrastField::uniform(const HookeTensor& a, double delta) {
    ContrastField f;
    f.base = {a};
    f.delta = delta;
    return f;
}

void ContrastField::validate(double k_min) const {
    if (base.empty()) throw ValidationError("contrast field without base tensor");
    if (!(delta > 0.0 && delta <= 1.0))
        throw ValidationError("contrast delta must lie in (0, 1]");
    for (const auto& a : base) a.validate(k_min);
}

std::vector<double> symmetric_eigenvalues(const std::vector<double>& a_in, int n) {
    std::vector<double> a = a_in;
    auto at = [&a, n](int i, int j) -> double& { return a[std::size_t(i) * n + j]; };
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale += at(i, i) * at(i, i);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off <= 1e-30 * std::max(1.0, scale)) break;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(at(p, q)) < 1e-300) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = at(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

}  // namespace hcoc
