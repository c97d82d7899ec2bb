#pragma once

// Small shared utilities: 2D linear algebra on the (derivative, component)
// index flattening, counter-based RNG, byte I/O, and basic statistics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace homlab {

inline constexpr int kDim = 2;

struct Vec2 {
    double x = 0.0, y = 0.0;
    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}
    double& operator[](int i) { return i == 0 ? x : y; }
    double operator[](int i) const { return i == 0 ? x : y; }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

/// 2x2 matrix, row-major. Used for slopes P, Q and gradients.
struct Mat2 {
    std::array<double, 4> a{0, 0, 0, 0};
    Mat2() = default;
    Mat2(double m00, double m01, double m10, double m11) : a{m00, m01, m10, m11} {}
    static Mat2 identity() { return {1, 0, 0, 1}; }
    double& operator()(int r, int c) { return a[2 * r + c]; }
    double operator()(int r, int c) const { return a[2 * r + c]; }
    double trace() const { return a[0] + a[3]; }
};

inline Mat2 operator+(Mat2 A, Mat2 B) {
    Mat2 r;
    for (int i = 0; i < 4; ++i) r.a[i] = A.a[i] + B.a[i];
    return r;
}
inline Mat2 operator-(Mat2 A, Mat2 B) {
    Mat2 r;
    for (int i = 0; i < 4; ++i) r.a[i] = A.a[i] - B.a[i];
    return r;
}
inline Mat2 operator*(double s, Mat2 A) {
    Mat2 r;
    for (int i = 0; i < 4; ++i) r.a[i] = s * A.a[i];
    return r;
}
inline double frob_dot(Mat2 A, Mat2 B) {
    double s = 0;
    for (int i = 0; i < 4; ++i) s += A.a[i] * B.a[i];
    return s;
}
inline double frob_norm(Mat2 A) { return std::sqrt(frob_dot(A, A)); }
inline Vec2 apply(Mat2 A, Vec2 v) { return {A(0, 0) * v.x + A(0, 1) * v.y, A(1, 0) * v.x + A(1, 1) * v.y}; }

/// Rank-4 elasticity tensor a_{ij}^{ab} in d=2, stored as the symmetric
/// 4x4 matrix over flattened index pairs flat(i,a) = 2*i + a, where i is
/// the derivative direction and a the displacement component.  The
/// symmetry condition a_{ij}^{ab} = a_{ji}^{ba} is exactly symmetry of
/// this matrix.
struct Tensor4 {
    std::array<double, 16> m{};
    static constexpr int flat(int i, int a) { return 2 * i + a; }
    double& operator()(int r, int c) { return m[4 * r + c]; }
    double operator()(int r, int c) const { return m[4 * r + c]; }
    /// a_{ij}^{ab} = delta_ij delta^ab
    static Tensor4 isotropic_identity(double c = 1.0) {
        Tensor4 t;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a) t(flat(i, a), flat(i, a)) = c;
        return t;
    }
    bool symmetric() const {
        for (int r = 0; r < 4; ++r)
            for (int c = r + 1; c < 4; ++c)
                if (m[4 * r + c] != m[4 * c + r]) return false;
        return true;
    }
    /// xi . A xi with xi_{i}^{a} a 2x2 matrix (row = derivative index).
    double quad(const Mat2& xi) const {
        std::array<double, 4> v{};
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a) v[flat(i, a)] = xi(i, a);
        double s = 0;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) s += v[r] * m[4 * r + c] * v[c];
        return s;
    }
    /// (A xi)_{i}^{a}
    Mat2 contract(const Mat2& xi) const {
        std::array<double, 4> v{}, w{};
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a) v[flat(i, a)] = xi(i, a);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) w[r] += m[4 * r + c] * v[c];
        Mat2 out;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a) out(i, a) = w[flat(i, a)];
        return out;
    }
};

// ---------------------------------------------------------------------------
// Counter-based RNG.  Draws are keyed by (seed, counter) so that cell draws
// are order-independent and safe to evaluate in parallel.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic u64 from (seed, k1, k2).
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2 = 0) {
    std::uint64_t h = splitmix64(seed ^ 0x2545f4914f6cdd1dULL);
    h = splitmix64(h ^ k1);
    h = splitmix64(h ^ (k2 + 0x632be59bd9b4e019ULL));
    return h;
}

/// Uniform double in [0,1).
inline double u01(std::uint64_t bits) { return double(bits >> 11) * 0x1.0p-53; }

inline double uniform_draw(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2 = 0) {
    return u01(counter_hash(seed, k1, k2));
}

// ---------------------------------------------------------------------------
// Little-endian binary I/O helpers (portable field serialization).

inline void put_u64le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_f64le(std::string& out, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64le(out, v);
}
inline std::uint64_t get_u64le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
}
inline double get_f64le(const unsigned char* p) {
    std::uint64_t v = get_u64le(p);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

/// FNV-1a over a byte string; used for config content hashes.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Statistics helpers for Monte Carlo aggregation.

inline double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
}

inline double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v), s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size() - 1));
}

/// Empirical quantile (linear interpolation between order statistics).
inline double quantile_of(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    double pos = q * double(v.size() - 1);
    std::size_t lo = std::size_t(pos);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double w = pos - double(lo);
    return (1.0 - w) * v[lo] + w * v[hi];
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

/// Ordinary least squares y = a + b x with the usual slope standard error.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 points");
    std::size_t n = x.size();
    double mx = mean_of(x), my = mean_of(y);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double ss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = y[i] - (f.intercept + f.slope * x[i]);
            ss += r * r;
        }
        f.slope_stderr = std::sqrt(ss / double(n - 2) / sxx);
    }
    return f;
}

/// Fixed-format double for CSV bodies; reruns must be byte-identical.
inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace homlab
