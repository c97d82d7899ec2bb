#pragma once

// Uniform-grid Q1/P0 discretization: bilinear vector fields, element
// constant pressures, the penalized elasticity operator with one-point
// (reduced) integration of the divergence term, and the mixed Stokes
// blocks.  The same one-point divergence quadrature is used everywhere so
// the penalized and mixed formulations are algebraically consistent.

#include <Eigen/Sparse>
#include <fstream>

#include "homlab/coeff.hpp"
#include "homlab/geometry.hpp"

namespace homlab {

using SpMat = Eigen::SparseMatrix<double>;

/// Nodal displacement/velocity field on a mask (2 values per node).
/// Dirichlet/exterior nodes carry the imposed boundary data.
struct DiscreteVectorField {
    const DomainMask* mask = nullptr;
    std::vector<double> values;  ///< 2 per node

    DiscreteVectorField() = default;
    explicit DiscreteVectorField(const DomainMask& m) : mask(&m), values(std::size_t(2) * m.nx * m.ny, 0.0) {}

    double& operator()(int node, int c) { return values[std::size_t(2 * node + c)]; }
    double operator()(int node, int c) const { return values[std::size_t(2 * node + c)]; }
    Vec2 at_node(int node) const { return {values[std::size_t(2 * node)], values[std::size_t(2 * node + 1)]}; }

    void set_from(const std::function<Vec2(double, double)>& f) {
        for (int n = 0; n < mask->nx * mask->ny; ++n) {
            Vec2 p = mask->node_pos(n);
            Vec2 v = f(p.x, p.y);
            values[std::size_t(2 * n)] = v.x;
            values[std::size_t(2 * n + 1)] = v.y;
        }
    }
};

/// Element-constant scalar field (pressure, divergence) on a mask.
struct DiscreteScalarField {
    const DomainMask* mask = nullptr;
    std::vector<double> values;  ///< per element (meaningful on active elements)

    DiscreteScalarField() = default;
    explicit DiscreteScalarField(const DomainMask& m)
        : mask(&m), values(std::size_t(m.elems_x()) * m.elems_y(), 0.0) {}

    double& operator[](int e) { return values[std::size_t(e)]; }
    double operator[](int e) const { return values[std::size_t(e)]; }
};

namespace q1 {

// Reference Q1 basis on [0,1]^2, node order (0,0),(1,0),(0,1),(1,1).
inline double shape(int a, double xi, double eta) {
    switch (a) {
        case 0: return (1 - xi) * (1 - eta);
        case 1: return xi * (1 - eta);
        case 2: return (1 - xi) * eta;
        default: return xi * eta;
    }
}
inline Vec2 shape_grad_ref(int a, double xi, double eta) {
    switch (a) {
        case 0: return {-(1 - eta), -(1 - xi)};
        case 1: return {(1 - eta), -xi};
        case 2: return {-eta, (1 - xi)};
        default: return {eta, xi};
    }
}

struct GaussPoint {
    double xi, eta, w;  ///< weight on the reference square
};

inline const std::array<GaussPoint, 4>& gauss4() {
    static const double g0 = 0.5 * (1.0 - 1.0 / std::sqrt(3.0));
    static const double g1 = 0.5 * (1.0 + 1.0 / std::sqrt(3.0));
    static const std::array<GaussPoint, 4> pts = {
        GaussPoint{g0, g0, 0.25}, GaussPoint{g1, g0, 0.25}, GaussPoint{g0, g1, 0.25}, GaussPoint{g1, g1, 0.25}};
    return pts;
}

/// d(phi_a)/dx_i at the element center, times h (dimensionless); exact for
/// the element average of the bilinear gradient.
inline double center_grad(int a, int i) {
    static const double gx[4] = {-0.5, 0.5, -0.5, 0.5};
    static const double gy[4] = {-0.5, -0.5, 0.5, 0.5};
    return i == 0 ? gx[a] : gy[a];
}

}  // namespace q1

/// Bilinear value of u at a reference point of element e.
inline Vec2 eval_in_elem(const DiscreteVectorField& u, int e, double xi, double eta) {
    auto nodes = u.mask->elem_nodes(e);
    Vec2 v{0, 0};
    for (int a = 0; a < 4; ++a) {
        double s = q1::shape(a, xi, eta);
        v.x += s * u(nodes[a], 0);
        v.y += s * u(nodes[a], 1);
    }
    return v;
}

/// Gradient (du_c/dx_i) of u at a reference point of element e.
inline Mat2 grad_in_elem(const DiscreteVectorField& u, int e, double xi, double eta) {
    auto nodes = u.mask->elem_nodes(e);
    const double invh = 1.0 / u.mask->h;
    Mat2 g;
    for (int a = 0; a < 4; ++a) {
        Vec2 gr = q1::shape_grad_ref(a, xi, eta);
        for (int c = 0; c < 2; ++c) {
            g(0, c) += invh * gr.x * u(nodes[a], c);
            g(1, c) += invh * gr.y * u(nodes[a], c);
        }
    }
    return g;  // g(i, c) = d u_c / d x_i
}

inline Mat2 center_grad_of(const DiscreteVectorField& u, int e) { return grad_in_elem(u, e, 0.5, 0.5); }

/// Element-center divergence of the bilinear interpolant (the one-point
/// quadrature value; exact for the element mean).
inline DiscreteScalarField discrete_divergence(const DiscreteVectorField& u) {
    DiscreteScalarField d(*u.mask);
    for (int e : u.mask->active_elems) {
        Mat2 g = center_grad_of(u, e);
        d[e] = g(0, 0) + g(1, 1);
    }
    return d;
}

/// Active elements whose center lies in B_r(center).
inline std::vector<int> elements_in_ball(const DomainMask& m, Vec2 center, double r) {
    std::vector<int> out;
    for (int e : m.active_elems) {
        Vec2 c = m.elem_center(e) - center;
        if (dot(c, c) < r * r) out.push_back(e);
    }
    return out;
}

// --------------------------------------------------------------------------
// Masked integrals (2x2 Gauss for bilinear quantities, exact).

inline double integral_l2_sq(const DiscreteVectorField& u, const std::vector<int>& elems) {
    const double h2 = u.mask->h * u.mask->h;
    double s = 0;
    for (int e : elems)
        for (const auto& g : q1::gauss4()) {
            Vec2 v = eval_in_elem(u, e, g.xi, g.eta);
            s += g.w * h2 * dot(v, v);
        }
    return s;
}

inline double integral_grad_sq(const DiscreteVectorField& u, const std::vector<int>& elems) {
    const double h2 = u.mask->h * u.mask->h;
    double s = 0;
    for (int e : elems)
        for (const auto& g : q1::gauss4()) {
            Mat2 gr = grad_in_elem(u, e, g.xi, g.eta);
            s += g.w * h2 * frob_dot(gr, gr);
        }
    return s;
}

inline Vec2 integral_of(const DiscreteVectorField& u, const std::vector<int>& elems) {
    const double h2 = u.mask->h * u.mask->h;
    Vec2 s{0, 0};
    for (int e : elems)
        for (const auto& g : q1::gauss4()) s = s + g.w * h2 * eval_in_elem(u, e, g.xi, g.eta);
    return s;
}

inline double integral_of(const DiscreteScalarField& p, const std::vector<int>& elems) {
    const double h2 = p.mask->h * p.mask->h;
    double s = 0;
    for (int e : elems) s += h2 * p[e];
    return s;
}

inline double integral_sq(const DiscreteScalarField& p, const std::vector<int>& elems) {
    const double h2 = p.mask->h * p.mask->h;
    double s = 0;
    for (int e : elems) s += h2 * p[e] * p[e];
    return s;
}

inline double mean_of(const DiscreteScalarField& p, const std::vector<int>& elems) {
    if (elems.empty()) return 0.0;
    double s = 0;
    for (int e : elems) s += p[e];
    return s / double(elems.size());
}

// --------------------------------------------------------------------------
// Assembled operator.

/// Discrete bilinear form int A grad(u).grad(w) + lambda0 int div(u)div(w)
/// over the active elements of a mask, with the divergence factor
/// evaluated by one-point quadrature.  Holds the free/free and
/// free/boundary blocks, the integrated-divergence operator D
/// ((D u)_e = int_e div u), and element-loop services for energies and
/// residuals.  Positive definite on free dofs for lambda0 >= 0.
struct GridSystem {
    const DomainMask* mask = nullptr;
    const CoefficientField* field = nullptr;
    double lambda0 = 0.0;

    std::vector<int> free_dof;   ///< 2*node+c -> free slot or -1
    std::vector<int> bdry_dof;   ///< 2*node+c -> boundary slot or -1
    std::vector<int> free_dofs;  ///< slot -> 2*node+c
    std::vector<int> bdry_dofs;
    std::vector<int> elem_slot;  ///< element -> active slot or -1

    SpMat K_ff, K_fb;  ///< A-term + lambda0-penalty
    SpMat D_f, D_b;    ///< integrated divergence, rows = active element slots

    int n_free() const { return int(free_dofs.size()); }
    int n_bdry() const { return int(bdry_dofs.size()); }
    int n_elems() const { return int(mask->active_elems.size()); }
    double elem_area() const { return mask->h * mask->h; }
    double domain_area() const { return mask->active_area(); }

    /// Local 8x8 stiffness of the A-term for tensor T (2x2 Gauss).
    void local_a_matrix(const Tensor4& T, double out[8][8]) const { q1_local_a_matrix(mask->h, T, out); }

    /// Local divergence row: d[2a+c] = int_e d(phi_a)/dx_c = h * center_grad.
    static void local_div_row(double h, double out[8]) { q1_local_div_row(h, out); }

    double interior_residual_scale() const { return std::max(1.0, double(n_free())); }

    /// Consistent load vector on free dofs for volume data F.
    Eigen::VectorXd volume_load(const std::function<Vec2(double, double)>& F) const {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n_free());
        const double h = mask->h, h2 = h * h;
        for (int e : mask->active_elems) {
            auto nodes = mask->elem_nodes(e);
            Vec2 base = mask->node_pos(nodes[0]);
            for (const auto& g : q1::gauss4()) {
                Vec2 Fv = F(base.x + h * g.xi, base.y + h * g.eta);
                for (int a = 0; a < 4; ++a) {
                    double s = q1::shape(a, g.xi, g.eta) * g.w * h2;
                    for (int c = 0; c < 2; ++c) {
                        int fd = free_dof[std::size_t(2 * nodes[a] + c)];
                        if (fd >= 0) b[fd] += s * Fv[c];
                    }
                }
            }
        }
        return b;
    }

    /// Boundary values of f on the Dirichlet slots.
    Eigen::VectorXd boundary_values(const std::function<Vec2(double, double)>& f) const {
        Eigen::VectorXd ub(n_bdry());
        for (int k = 0; k < n_bdry(); ++k) {
            int dof = bdry_dofs[std::size_t(k)];
            Vec2 p = mask->node_pos(dof / 2);
            Vec2 v = f(p.x, p.y);
            ub[k] = v[dof % 2];
        }
        return ub;
    }

    /// Compose a full nodal field from free/boundary coefficient vectors.
    DiscreteVectorField make_field(const Eigen::VectorXd& uf, const Eigen::VectorXd& ub) const {
        DiscreteVectorField u(*mask);
        for (int k = 0; k < n_free(); ++k) u.values[std::size_t(free_dofs[std::size_t(k)])] = uf[k];
        for (int k = 0; k < n_bdry(); ++k) u.values[std::size_t(bdry_dofs[std::size_t(k)])] = ub[k];
        return u;
    }

    Eigen::VectorXd restrict_free(const DiscreteVectorField& u) const {
        Eigen::VectorXd uf(n_free());
        for (int k = 0; k < n_free(); ++k) uf[k] = u.values[std::size_t(free_dofs[std::size_t(k)])];
        return uf;
    }
    Eigen::VectorXd restrict_bdry(const DiscreteVectorField& u) const {
        Eigen::VectorXd ub(n_bdry());
        for (int k = 0; k < n_bdry(); ++k) ub[k] = u.values[std::size_t(bdry_dofs[std::size_t(k)])];
        return ub;
    }

    /// int_D grad(u) . A grad(u) over active elements (element loop).
    double a_energy(const DiscreteVectorField& u) const {
        double s = 0;
        const double h2 = mask->h * mask->h;
        for (int e : mask->active_elems) {
            const Tensor4& T = tensor_of(e);
            for (const auto& g : q1::gauss4()) {
                Mat2 gr = grad_in_elem(u, e, g.xi, g.eta);
                s += g.w * h2 * T.quad(gr);
            }
        }
        return s;
    }

    /// int_D (div u)^2 with one-point quadrature.
    double div_energy(const DiscreteVectorField& u) const {
        double s = 0;
        const double h2 = mask->h * mask->h;
        for (int e : mask->active_elems) {
            Mat2 g = center_grad_of(u, e);
            double d = g(0, 0) + g(1, 1);
            s += h2 * d * d;
        }
        return s;
    }

    /// int_D A grad(u) averaged flux (one-point quadrature per element).
    Mat2 average_flux_matrix(const DiscreteVectorField& u) const {
        Mat2 s;
        const double h2 = mask->h * mask->h;
        for (int e : mask->active_elems) {
            Mat2 f = tensor_of(e).contract(center_grad_of(u, e));
            s = s + h2 * f;
        }
        return (1.0 / domain_area()) * s;
    }

    Mat2 average_gradient(const DiscreteVectorField& u) const {
        Mat2 s;
        const double h2 = mask->h * mask->h;
        for (int e : mask->active_elems) s = s + h2 * center_grad_of(u, e);
        return (1.0 / domain_area()) * s;
    }

    const Tensor4& tensor_of(int e) const {
        Vec2 c = mask->elem_center(e);
        return field->tensor_at(c.x, c.y);
    }
};

/// Assemble the penalized elasticity operator (A-term by 2x2 Gauss,
/// divergence penalty by one-point quadrature).  lambda0 = 0 yields the
/// plain elliptic/Stokes A-block; the divergence operator D is always
/// assembled alongside.
inline GridSystem assemble_penalized_elasticity(const CoefficientField& field, double lambda0,
                                                const DomainMask& mask) {
    if (lambda0 < 0) throw std::invalid_argument("assemble: lambda0 must be >= 0");
    if (mask.n_interior == 0) throw std::invalid_argument("assemble: empty interior");
    {
        Vec2 lo{mask.x0, mask.y0};
        Vec2 hi{mask.node_x(mask.nx - 1), mask.node_y(mask.ny - 1)};
        if (!field.covers(lo.x, lo.y, hi.x, hi.y) && field.cells_per_side > 0) {
            // Cell lookups clamp at the lattice edge; require genuine coverage.
            throw std::invalid_argument("assemble: coefficient field does not cover the mask");
        }
    }

    GridSystem sys;
    sys.mask = &mask;
    sys.field = &field;
    sys.lambda0 = lambda0;

    const int nn = mask.nx * mask.ny;
    sys.free_dof.assign(std::size_t(2 * nn), -1);
    sys.bdry_dof.assign(std::size_t(2 * nn), -1);
    for (int n = 0; n < nn; ++n) {
        if (mask.node_class[std::size_t(n)] == NodeClass::Interior) {
            for (int c = 0; c < 2; ++c) {
                sys.free_dof[std::size_t(2 * n + c)] = int(sys.free_dofs.size());
                sys.free_dofs.push_back(2 * n + c);
            }
        } else if (mask.node_class[std::size_t(n)] == NodeClass::Dirichlet) {
            for (int c = 0; c < 2; ++c) {
                sys.bdry_dof[std::size_t(2 * n + c)] = int(sys.bdry_dofs.size());
                sys.bdry_dofs.push_back(2 * n + c);
            }
        }
    }
    sys.elem_slot.assign(std::size_t(mask.elems_x()) * mask.elems_y(), -1);
    for (std::size_t s = 0; s < mask.active_elems.size(); ++s)
        sys.elem_slot[std::size_t(mask.active_elems[s])] = int(s);

    const int nf = sys.n_free(), nb = sys.n_bdry(), ne = sys.n_elems();
    std::vector<Eigen::Triplet<double>> t_ff, t_fb, t_df, t_db;
    t_ff.reserve(std::size_t(ne) * 40);
    t_fb.reserve(std::size_t(ne) * 16);
    t_df.reserve(std::size_t(ne) * 8);
    t_db.reserve(std::size_t(ne) * 8);

    double Kloc[8][8], drow[8];
    GridSystem::local_div_row(mask.h, drow);
    const double inv_h2 = 1.0 / (mask.h * mask.h);

    for (int e : mask.active_elems) {
        auto nodes = mask.elem_nodes(e);
        sys.local_a_matrix(sys.tensor_of(e), Kloc);
        if (lambda0 > 0) {
            // reduced-integration penalty: lambda0 / h^2 * d d^T
            for (int r = 0; r < 8; ++r)
                for (int c = 0; c < 8; ++c) Kloc[r][c] += lambda0 * inv_h2 * drow[r] * drow[c];
        }
        int dofs[8];
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 2; ++c) dofs[2 * a + c] = 2 * nodes[a] + c;
        for (int r = 0; r < 8; ++r) {
            int fr = sys.free_dof[std::size_t(dofs[r])];
            if (fr < 0) continue;
            for (int c = 0; c < 8; ++c) {
                int fc = sys.free_dof[std::size_t(dofs[c])];
                if (fc >= 0)
                    t_ff.emplace_back(fr, fc, Kloc[r][c]);
                else {
                    int bc = sys.bdry_dof[std::size_t(dofs[c])];
                    if (bc >= 0) t_fb.emplace_back(fr, bc, Kloc[r][c]);
                }
            }
        }
        int es = sys.elem_slot[std::size_t(e)];
        for (int c = 0; c < 8; ++c) {
            int fc = sys.free_dof[std::size_t(dofs[c])];
            if (fc >= 0)
                t_df.emplace_back(es, fc, drow[c]);
            else {
                int bc = sys.bdry_dof[std::size_t(dofs[c])];
                if (bc >= 0) t_db.emplace_back(es, bc, drow[c]);
            }
        }
    }

    sys.K_ff.resize(nf, nf);
    sys.K_ff.setFromTriplets(t_ff.begin(), t_ff.end());
    sys.K_fb.resize(nf, nb);
    sys.K_fb.setFromTriplets(t_fb.begin(), t_fb.end());
    sys.D_f.resize(ne, nf);
    sys.D_f.setFromTriplets(t_df.begin(), t_df.end());
    sys.D_b.resize(ne, nb);
    sys.D_b.setFromTriplets(t_db.begin(), t_db.end());
    return sys;
}

/// Stokes blocks: the A-only stiffness plus divergence operator.  The
/// pressure-jump stabilization S (coefficient beta * h^2 across interior
/// faces of active elements) is returned for the mixed saddle form
/// [A B^T; B -S]; it suppresses the Q1-P0 checkerboard mode.
struct MixedStokesSystem {
    GridSystem blocks;
    SpMat S;  ///< active-element x active-element stabilization
};

inline MixedStokesSystem assemble_mixed_stokes(const CoefficientField& field, const DomainMask& mask,
                                               double beta = 0.1) {
    MixedStokesSystem mix;
    mix.blocks = assemble_penalized_elasticity(field, 0.0, mask);
    const GridSystem& sys = mix.blocks;
    const double w = beta * mask.h * mask.h;
    std::vector<Eigen::Triplet<double>> ts;
    for (int j = 0; j < mask.elems_y(); ++j)
        for (int i = 0; i < mask.elems_x(); ++i) {
            int e = mask.elem_id(i, j);
            int se = sys.elem_slot[std::size_t(e)];
            if (se < 0) continue;
            const int di[2] = {1, 0}, dj[2] = {0, 1};
            for (int k = 0; k < 2; ++k) {
                int i2 = i + di[k], j2 = j + dj[k];
                if (i2 >= mask.elems_x() || j2 >= mask.elems_y()) continue;
                int s2 = sys.elem_slot[std::size_t(mask.elem_id(i2, j2))];
                if (s2 < 0) continue;
                ts.emplace_back(se, se, w);
                ts.emplace_back(s2, s2, w);
                ts.emplace_back(se, s2, -w);
                ts.emplace_back(s2, se, -w);
            }
        }
    mix.S.resize(sys.n_elems(), sys.n_elems());
    mix.S.setFromTriplets(ts.begin(), ts.end());
    return mix;
}

inline void export_matrix_coord(const SpMat& M, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_matrix_coord: cannot open " + path);
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << fmt_g(it.value()) << '\n';
}

inline void export_solution_csv(const DiscreteVectorField& u, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_solution_csv: cannot open " + path);
    os << "node,x1,x2,u1,u2\n";
    const DomainMask& m = *u.mask;
    for (int n = 0; n < m.nx * m.ny; ++n) {
        if (m.node_class[std::size_t(n)] == NodeClass::Exterior) continue;
        Vec2 p = m.node_pos(n);
        os << n << ',' << fmt_g(p.x) << ',' << fmt_g(p.y) << ',' << fmt_g(u(n, 0)) << ',' << fmt_g(u(n, 1))
           << '\n';
    }
}

}  // namespace homlab
