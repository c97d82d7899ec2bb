#pragma once

// Random coefficient fields (A, lambda): sampling, the splitting to a
// constant lambda_0, ellipticity verification, and binary serialization.

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "homlab/common.hpp"

namespace homlab {

/// Piecewise-constant realization of (A, lambda) on a lattice of unit
/// cells.  The evaluated field is A(x/epsilon), lambda(x/epsilon): each
/// lattice cell has physical side `epsilon`.  The lattice is centered,
/// covering [-L, L]^2 with L = cells_per_side * epsilon / 2.
struct CoefficientField {
    int cells_per_side = 0;
    double epsilon = 1.0;
    double lambda0 = 0.0;  ///< constant part after splitting; 0 before
    std::vector<Tensor4> tensor_values;  ///< row-major, cy * n + cx
    std::vector<double> lambda_values;

    double half_extent() const { return 0.5 * epsilon * double(cells_per_side); }

    int cell_index(double x, double y) const {
        const double L = half_extent();
        int cx = int(std::floor((x + L) / epsilon));
        int cy = int(std::floor((y + L) / epsilon));
        cx = std::clamp(cx, 0, cells_per_side - 1);
        cy = std::clamp(cy, 0, cells_per_side - 1);
        return cy * cells_per_side + cx;
    }
    const Tensor4& tensor_at(double x, double y) const { return tensor_values[cell_index(x, y)]; }
    double lambda_at(double x, double y) const { return lambda_values[cell_index(x, y)]; }

    bool covers(double lo_x, double lo_y, double hi_x, double hi_y) const {
        const double L = half_extent() + 1e-12;
        return lo_x >= -L && lo_y >= -L && hi_x <= L && hi_y <= L;
    }
};

enum class ModelKind { TwoPhaseCheckerboard, IidUniformTensor, Constant };

/// Law of the per-cell i.i.d. draws.  Two-phase: scalar factor
/// c in {1/sqrt(contrast), sqrt(contrast)} with probability 1/2 each and
/// a_{ij}^{ab} = c delta_ij delta^ab, which keeps both ellipticity bounds
/// symmetric about 1.  lambda(x) = lambda0 + lambda_band * u with u the
/// per-cell phase indicator (uniform for the iid-uniform model).
struct RandomFieldModel {
    ModelKind model_kind = ModelKind::TwoPhaseCheckerboard;
    double contrast = 4.0;       ///< >= 1, ratio of phase moduli
    double lambda0 = 0.0;        ///< baseline lambda
    double lambda_band = 0.5;    ///< width of the lambda oscillation, in [0, big_lambda]
    double big_lambda = 4.0;     ///< ellipticity constant Lambda

    void validate() const {
        if (contrast < 1.0) throw std::invalid_argument("RandomFieldModel: contrast must be >= 1");
        if (lambda0 < 0.0) throw std::invalid_argument("RandomFieldModel: lambda0 must be >= 0");
        if (lambda_band < 0.0 || lambda_band > big_lambda)
            throw std::invalid_argument("RandomFieldModel: lambda_band must lie in [0, big_lambda]");
        if (std::sqrt(contrast) > big_lambda + 1e-12)
            throw std::invalid_argument("RandomFieldModel: contrast incompatible with big_lambda");
    }
};

/// Deterministic draw of a coefficient field.  Pure function of
/// (model, seed, epsilon, cells_per_side); distinct cells use independent
/// counter-based draws.
inline CoefficientField sample_field(const RandomFieldModel& model, std::uint64_t seed, double epsilon,
                                     int cells_per_side) {
    model.validate();
    if (epsilon <= 0.0) throw std::invalid_argument("sample_field: epsilon must be positive");
    if (cells_per_side < 1) throw std::invalid_argument("sample_field: cells_per_side must be >= 1");
    if (cells_per_side < int(std::ceil(2.0 / epsilon)) - 0)
        throw std::invalid_argument("sample_field: lattice does not cover [-1,1]^2");

    CoefficientField f;
    f.cells_per_side = cells_per_side;
    f.epsilon = epsilon;
    f.lambda0 = 0.0;
    const std::size_t n = std::size_t(cells_per_side) * std::size_t(cells_per_side);
    f.tensor_values.resize(n);
    f.lambda_values.resize(n);

    const double s = std::sqrt(model.contrast);
    for (std::size_t c = 0; c < n; ++c) {
        double u_a = uniform_draw(seed, c, 0);
        double u_l = uniform_draw(seed, c, 1);
        double factor = 1.0, lam_frac = 0.0;
        switch (model.model_kind) {
            case ModelKind::TwoPhaseCheckerboard:
                factor = (u_a < 0.5) ? 1.0 / s : s;
                lam_frac = (u_l < 0.5) ? 0.0 : 1.0;
                break;
            case ModelKind::IidUniformTensor:
                factor = 1.0 / s + u_a * (s - 1.0 / s);
                lam_frac = u_l;
                break;
            case ModelKind::Constant:
                factor = 1.0;
                lam_frac = 0.0;
                break;
        }
        f.tensor_values[c] = Tensor4::isotropic_identity(factor);
        f.lambda_values[c] = model.lambda0 + model.lambda_band * lam_frac;
    }
    return f;
}

struct EllipticityReport {
    double min_eig = 0.0;
    double max_eig = 0.0;
    bool symmetric = false;
};

/// Extreme eigenvalues over all cells of the 4x4 symmetric representation,
/// plus an exact symmetry check.
inline EllipticityReport verify_ellipticity(const CoefficientField& f) {
    EllipticityReport rep;
    rep.symmetric = true;
    rep.min_eig = std::numeric_limits<double>::infinity();
    rep.max_eig = -std::numeric_limits<double>::infinity();
    Eigen::Matrix4d M;
    for (const Tensor4& t : f.tensor_values) {
        if (!t.symmetric()) rep.symmetric = false;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) M(r, c) = t(r, c);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(M, Eigen::EigenvaluesOnly);
        rep.min_eig = std::min(rep.min_eig, es.eigenvalues().minCoeff());
        rep.max_eig = std::max(rep.max_eig, es.eigenvalues().maxCoeff());
    }
    return rep;
}

/// Splitting lambda(x) = lambda0 + b(x) with lambda0 = min_cells lambda:
/// the oscillating part b is absorbed into the tensor,
/// a~_{ij}^{ab} = a_{ij}^{ab} + b delta_i^a delta_j^b, and the remaining
/// lambda is the constant lambda0.  Idempotent.
inline CoefficientField split_compressibility(const CoefficientField& field) {
    CoefficientField out = field;
    if (field.lambda_values.empty()) return out;
    double lam0 = *std::min_element(field.lambda_values.begin(), field.lambda_values.end());
    for (std::size_t c = 0; c < field.lambda_values.size(); ++c) {
        double b = field.lambda_values[c] - lam0;
        if (b != 0.0) {
            // b * (vec I)(vec I)^T over flattened pairs; flat(i,i) in {0, 3}
            Tensor4& t = out.tensor_values[c];
            t(0, 0) += b;
            t(0, 3) += b;
            t(3, 0) += b;
            t(3, 3) += b;
        }
        out.lambda_values[c] = lam0;
    }
    out.lambda0 = lam0;
    return out;
}

// ---------------------------------------------------------------------------
// HLAB1 serialization: magic "HLAB1", little-endian; header
// (cells_per_side i64, epsilon f64, lambda0 f64), then row-major per-cell
// records of 16 tensor entries + 1 lambda entry as f64.

inline std::string serialize_field(const CoefficientField& f) {
    std::string out;
    out.reserve(5 + 24 + f.tensor_values.size() * 17 * 8);
    out += "HLAB1";
    put_u64le(out, std::uint64_t(f.cells_per_side));
    put_f64le(out, f.epsilon);
    put_f64le(out, f.lambda0);
    for (std::size_t c = 0; c < f.tensor_values.size(); ++c) {
        for (int k = 0; k < 16; ++k) put_f64le(out, f.tensor_values[c].m[k]);
        put_f64le(out, f.lambda_values[c]);
    }
    return out;
}

inline CoefficientField deserialize_field(const std::string& bytes) {
    if (bytes.size() < 29 || bytes.compare(0, 5, "HLAB1") != 0)
        throw std::runtime_error("deserialize_field: bad magic");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + 5;
    CoefficientField f;
    f.cells_per_side = int(get_u64le(p));
    f.epsilon = get_f64le(p + 8);
    f.lambda0 = get_f64le(p + 16);
    p += 24;
    std::size_t n = std::size_t(f.cells_per_side) * std::size_t(f.cells_per_side);
    if (bytes.size() != 29 + n * 17 * 8) throw std::runtime_error("deserialize_field: truncated payload");
    f.tensor_values.resize(n);
    f.lambda_values.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        for (int k = 0; k < 16; ++k) f.tensor_values[c].m[k] = get_f64le(p + 8 * k);
        f.lambda_values[c] = get_f64le(p + 128);
        p += 136;
    }
    return f;
}

inline void save_field(const CoefficientField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_field: cannot open " + path);
    std::string bytes = serialize_field(f);
    os.write(bytes.data(), std::streamsize(bytes.size()));
}

inline CoefficientField load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_field: cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return deserialize_field(ss.str());
}

/// Constant-coefficient field (A given on every cell), mainly for
/// homogenized reference solves.
inline CoefficientField constant_field(const Tensor4& A, double lambda_value, double epsilon = 1.0,
                                       int cells_per_side = 2) {
    CoefficientField f;
    f.cells_per_side = std::max(cells_per_side, int(std::ceil(2.0 / epsilon)));
    f.epsilon = epsilon;
    f.lambda0 = lambda_value;
    std::size_t n = std::size_t(f.cells_per_side) * std::size_t(f.cells_per_side);
    f.tensor_values.assign(n, A);
    f.lambda_values.assign(n, lambda_value);
    return f;
}

}  // namespace homlab
