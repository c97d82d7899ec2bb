#pragma once

// Discrete domain geometry: uniform-lattice masks for balls, triadic cubes
// and bumpy graph domains, large-scale boundary normals n_t, and the
// half-space caps T_t^- / T_t^+.

#include <Eigen/Dense>
#include <fstream>
#include <functional>
#include <queue>

#include "homlab/common.hpp"

namespace homlab {

enum class NodeClass : unsigned char { Interior, Dirichlet, Exterior };
enum class ElemClass : unsigned char { Inside, BoundaryCut, Outside };

/// Node-lattice mask over a uniform grid with spacing h.  Nodes are
/// classified interior / dirichlet / exterior; an element is Inside when
/// all four corners are interior, BoundaryCut when some are, Outside when
/// none is.  Solvers assemble over "active" elements (Inside or
/// BoundaryCut), so every interior node sees a full stencil; quadrature
/// for domain averages uses the same active set.
struct DomainMask {
    double h = 0.0;
    double x0 = 0.0, y0 = 0.0;  ///< coordinates of node (0, 0)
    int nx = 0, ny = 0;         ///< node counts per direction

    std::vector<NodeClass> node_class;
    std::vector<ElemClass> elem_class;
    std::vector<int> free_index;       ///< node -> free slot (interior only), -1 otherwise
    std::vector<int> free_nodes;       ///< free slot -> node
    std::vector<int> active_elems;     ///< element ids with >= 1 interior corner
    int n_interior = 0;

    int node_id(int i, int j) const { return j * nx + i; }
    int elem_id(int i, int j) const { return j * (nx - 1) + i; }
    int elems_x() const { return nx - 1; }
    int elems_y() const { return ny - 1; }
    double node_x(int i) const { return x0 + h * double(i); }
    double node_y(int j) const { return y0 + h * double(j); }
    Vec2 node_pos(int id) const { return {node_x(id % nx), node_y(id / nx)}; }
    Vec2 elem_center(int e) const {
        int i = e % (nx - 1), j = e / (nx - 1);
        return {x0 + h * (double(i) + 0.5), y0 + h * (double(j) + 0.5)};
    }
    std::array<int, 4> elem_nodes(int e) const {
        int i = e % (nx - 1), j = e / (nx - 1);
        return {node_id(i, j), node_id(i + 1, j), node_id(i, j + 1), node_id(i + 1, j + 1)};
    }
    bool is_interior(int node) const { return node_class[std::size_t(node)] == NodeClass::Interior; }
    bool is_active(int e) const { return elem_class[std::size_t(e)] != ElemClass::Outside; }

    double active_area() const { return h * h * double(active_elems.size()); }
    double inside_area() const {
        std::size_t n = 0;
        for (ElemClass c : elem_class) n += (c == ElemClass::Inside);
        return h * h * double(n);
    }

    /// Classify elements, promote interior-adjacent nodes to Dirichlet,
    /// build free-dof maps, and check the structural invariants.
    void finalize() {
        const int ex = nx - 1, ey = ny - 1;
        elem_class.assign(std::size_t(ex) * std::size_t(ey), ElemClass::Outside);
        active_elems.clear();
        for (int j = 0; j < ey; ++j)
            for (int i = 0; i < ex; ++i) {
                int e = elem_id(i, j);
                int cnt = 0;
                for (int n : elem_nodes(e)) cnt += is_interior(n);
                elem_class[std::size_t(e)] =
                    cnt == 4 ? ElemClass::Inside : (cnt > 0 ? ElemClass::BoundaryCut : ElemClass::Outside);
                if (cnt > 0) active_elems.push_back(e);
            }
        // Dirichlet layer: non-interior nodes of active elements.
        for (std::size_t n = 0; n < node_class.size(); ++n)
            if (node_class[n] != NodeClass::Interior) node_class[n] = NodeClass::Exterior;
        for (int e : active_elems)
            for (int n : elem_nodes(e))
                if (node_class[std::size_t(n)] != NodeClass::Interior)
                    node_class[std::size_t(n)] = NodeClass::Dirichlet;

        free_index.assign(node_class.size(), -1);
        free_nodes.clear();
        n_interior = 0;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                int n = node_id(i, j);
                if (is_interior(n)) {
                    if (i == 0 || j == 0 || i == nx - 1 || j == ny - 1)
                        throw std::runtime_error("DomainMask: interior node on lattice edge (grow the bounding box)");
                    free_index[std::size_t(n)] = n_interior;
                    free_nodes.push_back(n);
                    ++n_interior;
                }
            }
        check_inside_connectivity();
    }

    void check_inside_connectivity() const {
        std::vector<int> inside;
        for (int j = 0; j < elems_y(); ++j)
            for (int i = 0; i < elems_x(); ++i)
                if (elem_class[std::size_t(elem_id(i, j))] == ElemClass::Inside) inside.push_back(elem_id(i, j));
        if (inside.empty()) return;
        std::vector<char> seen(elem_class.size(), 0);
        std::queue<int> q;
        q.push(inside.front());
        seen[std::size_t(inside.front())] = 1;
        std::size_t reached = 0;
        while (!q.empty()) {
            int e = q.front();
            q.pop();
            ++reached;
            int i = e % elems_x(), j = e / elems_x();
            const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k) {
                int i2 = i + di[k], j2 = j + dj[k];
                if (i2 < 0 || j2 < 0 || i2 >= elems_x() || j2 >= elems_y()) continue;
                int e2 = elem_id(i2, j2);
                if (!seen[std::size_t(e2)] && elem_class[std::size_t(e2)] == ElemClass::Inside) {
                    seen[std::size_t(e2)] = 1;
                    q.push(e2);
                }
            }
        }
        if (reached != inside.size()) throw std::runtime_error("DomainMask: inside-element set is disconnected");
    }
};

/// Generic mask builder: interior nodes are those where `inside(x,y)` is
/// true, on the lattice [x0, x0 + h*(nx-1)] x [y0, ...].
inline DomainMask build_mask(double h, double x0, double y0, int nx, int ny,
                             const std::function<bool(double, double)>& inside) {
    DomainMask m;
    m.h = h;
    m.x0 = x0;
    m.y0 = y0;
    m.nx = nx;
    m.ny = ny;
    m.node_class.assign(std::size_t(nx) * std::size_t(ny), NodeClass::Exterior);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            if (inside(m.node_x(i), m.node_y(j))) m.node_class[std::size_t(m.node_id(i, j))] = NodeClass::Interior;
    m.finalize();
    return m;
}

/// Axis-aligned open rectangle (lo, hi); lattice snapped to the corners.
inline DomainMask build_rect_mask(double h, Vec2 lo, Vec2 hi) {
    int ex = int(std::lround((hi.x - lo.x) / h));
    int ey = int(std::lround((hi.y - lo.y) / h));
    if (ex < 2 || ey < 2) throw std::invalid_argument("build_rect_mask: under-resolved rectangle");
    return build_mask(h, lo.x, lo.y, ex + 1, ey + 1, [&](double x, double y) {
        return x > lo.x + 1e-12 && x < hi.x - 1e-12 && y > lo.y + 1e-12 && y < hi.y - 1e-12;
    });
}

/// Triadic cube (-3^m/2, 3^m/2)^2 with `elems_per_cell` elements per unit
/// cell side.
inline DomainMask build_cube_mask(int level, int elems_per_cell) {
    if (level < 0 || elems_per_cell < 1) throw std::invalid_argument("build_cube_mask: bad arguments");
    double side = std::pow(3.0, level);
    double h = 1.0 / double(elems_per_cell);
    return build_rect_mask(h, {-side / 2, -side / 2}, {side / 2, side / 2});
}

/// Discrete ball B_r(center); requires r >= 4h.
inline DomainMask build_ball_mask(double h, Vec2 center, double r) {
    if (r < 4.0 * h) throw std::invalid_argument("build_ball_mask: under-resolved ball (r < 4h)");
    double lo_x = center.x - r - 2.0 * h, lo_y = center.y - r - 2.0 * h;
    int n = int(std::ceil(2.0 * (r + 2.0 * h) / h)) + 1;
    return build_mask(h, lo_x, lo_y, n, n, [&](double x, double y) {
        double dx = x - center.x, dy = y - center.y;
        return dx * dx + dy * dy < r * r;
    });
}

/// Restriction of `parent` by an extra predicate, on the same lattice.
/// Interior nodes are parent-interior nodes satisfying the predicate.
inline DomainMask submask(const DomainMask& parent, const std::function<bool(double, double)>& keep) {
    DomainMask m;
    m.h = parent.h;
    m.x0 = parent.x0;
    m.y0 = parent.y0;
    m.nx = parent.nx;
    m.ny = parent.ny;
    m.node_class.assign(parent.node_class.size(), NodeClass::Exterior);
    for (int j = 0; j < m.ny; ++j)
        for (int i = 0; i < m.nx; ++i) {
            int n = m.node_id(i, j);
            if (parent.is_interior(n) && keep(m.node_x(i), m.node_y(j)))
                m.node_class[std::size_t(n)] = NodeClass::Interior;
        }
    m.finalize();
    return m;
}

inline DomainMask ball_submask(const DomainMask& parent, Vec2 center, double r) {
    return submask(parent, [&](double x, double y) {
        double dx = x - center.x, dy = y - center.y;
        return dx * dx + dy * dy < r * r;
    });
}

inline void export_mask_csv(const DomainMask& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_mask_csv: cannot open " + path);
    os << "node,x1,x2,class\n";
    for (int j = 0; j < m.ny; ++j)
        for (int i = 0; i < m.nx; ++i) {
            int n = m.node_id(i, j);
            const char* cls = m.node_class[std::size_t(n)] == NodeClass::Interior      ? "interior"
                              : m.node_class[std::size_t(n)] == NodeClass::Dirichlet ? "dirichlet"
                                                                                      : "exterior";
            os << n << ',' << fmt_g(m.node_x(i)) << ',' << fmt_g(m.node_y(j)) << ',' << cls << '\n';
        }
}

// ---------------------------------------------------------------------------
// Bumpy graph domains: boundary x2 = psi0(x1) + eps * psi1(x1/eps) with a
// smooth large-scale profile psi0 and a piecewise-linear random bump
// profile psi1 on the integer lattice.

inline double zeta_alpha(double alpha, double r, double eps) {
    return std::pow(r, alpha) + std::pow(eps / r, alpha);
}

struct BumpyDomainParams {
    double alpha = 0.5;                    ///< Hoelder exponent in (0, 1]
    std::vector<double> cos_coeffs;        ///< psi0 += a_k (cos((k+1)x) - 1)
    std::vector<double> sin_coeffs;        ///< psi0 += b_k sin((k+1)x)
    double bump_amplitude = 0.25;          ///< |psi1| <= bump_amplitude
    double epsilon = 1.0 / 16.0;           ///< bump oscillation scale
    double lipschitz_bound = 0.5;          ///< bound on |psi1'|
    std::uint64_t seed = 0;

    void validate() const {
        if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("BumpyDomainParams: alpha out of (0,1]");
        if (bump_amplitude < 0.0) throw std::invalid_argument("BumpyDomainParams: negative amplitude");
        if (epsilon <= 0.0) throw std::invalid_argument("BumpyDomainParams: epsilon must be positive");
        if (2.0 * bump_amplitude > lipschitz_bound + 1e-12)
            throw std::invalid_argument("BumpyDomainParams: amplitude incompatible with lipschitz_bound");
    }

    double psi0(double x) const {
        double v = 0;
        for (std::size_t k = 0; k < cos_coeffs.size(); ++k) v += cos_coeffs[k] * (std::cos(double(k + 1) * x) - 1.0);
        for (std::size_t k = 0; k < sin_coeffs.size(); ++k) v += sin_coeffs[k] * std::sin(double(k + 1) * x);
        return v;
    }

    /// Piecewise-linear bump profile; node heights i.i.d. uniform in
    /// [-A, A], with psi1(0) pinned to 0 so that 0 lies on the boundary.
    double psi1(double s) const {
        double fl = std::floor(s);
        long k = long(fl);
        double t = s - fl;
        return (1.0 - t) * bump_height(k) + t * bump_height(k + 1);
    }

    double bump_height(long k) const {
        if (k == 0) return 0.0;
        std::uint64_t idx = std::uint64_t(k + (1LL << 32));
        return bump_amplitude * (2.0 * uniform_draw(seed, idx, 7) - 1.0);
    }

    double psi(double x) const { return psi0(x) + epsilon * psi1(x / epsilon); }
};

/// Discrete bumpy domain {x in B_2 : x2 > psi(x1)} with the Definition-1.2
/// constants (C0, r0) estimated on a dyadic scale ladder at build time.
struct BumpyDomain {
    BumpyDomainParams params;
    DomainMask mask;
    double C0 = 0.0;
    double r0 = 1.0;
    double outer_radius = 2.0;

    double psi(double x) const { return params.psi(x); }
};

/// Least-squares (total) line fit to boundary points of the graph inside
/// B_t(0); returns the unit normal oriented outward (out of the domain,
/// i.e. with negative x2-component for a domain above its graph).
inline Vec2 large_scale_normal(const BumpyDomainParams& params, double t, double sample_spacing) {
    std::vector<Vec2> pts;
    for (double s = -t; s <= t + 1e-12; s += sample_spacing) {
        Vec2 p{s, params.psi(s)};
        if (dot(p, p) < t * t) pts.push_back(p);
    }
    if (pts.size() < 8) throw std::runtime_error("large_scale_normal: fewer than 8 boundary points in B_t");
    Vec2 c{0, 0};
    for (const Vec2& p : pts) c = c + p;
    c = (1.0 / double(pts.size())) * c;
    double sxx = 0, sxy = 0, syy = 0;
    for (const Vec2& p : pts) {
        Vec2 d = p - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    Eigen::Matrix2d S;
    S << sxx, sxy, sxy, syy;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(S);
    Eigen::Vector2d nvec = es.eigenvectors().col(0);  // smallest eigenvalue
    Vec2 n{nvec(0), nvec(1)};
    if (n.y > 0) n = -1.0 * n;
    double len = norm(n);
    return {n.x / len, n.y / len};
}

inline BumpyDomain build_bumpy_domain(const BumpyDomainParams& params, double h) {
    params.validate();
    if (h > params.epsilon / 4.0 + 1e-12)
        throw std::invalid_argument("build_bumpy_domain: grid does not resolve the bumps (h > eps/4)");
    BumpyDomain dom;
    dom.params = params;
    const double R = dom.outer_radius;
    double lo = -R - 2.0 * h;
    int n = int(std::ceil(2.0 * (R + 2.0 * h) / h)) + 1;
    dom.mask = build_mask(h, lo, lo, n, n, [&](double x, double y) {
        return x * x + y * y < R * R && y > params.psi(x);
    });

    // Definition-1.2 constants on the dyadic ladder t = r0, r0/2, ... > eps.
    dom.r0 = 1.0;
    double c0 = 0.0;
    double spacing = std::min(h, params.epsilon) / 4.0;
    for (double t = dom.r0; t > params.epsilon; t *= 0.5) {
        Vec2 nt = large_scale_normal(params, t, spacing);
        double dev = 0.0;
        for (double s = -t; s <= t + 1e-12; s += spacing) {
            Vec2 p{s, params.psi(s)};
            if (dot(p, p) < t * t) dev = std::max(dev, std::abs(dot(p, nt)));
        }
        c0 = std::max(c0, dev / (t * zeta_alpha(params.alpha, t, params.epsilon)));
    }
    dom.C0 = c0;
    return dom;
}

/// Half-space caps T_t^- subset D_t subset T_t^+ on the domain's lattice.
/// Throws when the realized C0 fails to produce the sandwich inclusion.
struct CapPair {
    DomainMask t_minus;
    DomainMask t_plus;
    Vec2 normal;
    double offset = 0.0;  ///< C0 * t * zeta(t, eps)
};

inline CapPair cap_domains(const BumpyDomain& dom, double t) {
    const BumpyDomainParams& P = dom.params;
    if (!(t > P.epsilon && t < dom.outer_radius))
        throw std::invalid_argument("cap_domains: scale t out of range");
    CapPair caps;
    caps.normal = large_scale_normal(P, t, std::min(dom.mask.h, P.epsilon) / 4.0);
    caps.offset = dom.C0 * t * zeta_alpha(P.alpha, t, P.epsilon);
    Vec2 n = caps.normal;
    double off = caps.offset;
    auto in_ball = [&](double x, double y) { return x * x + y * y < t * t; };
    caps.t_minus = build_mask(dom.mask.h, dom.mask.x0, dom.mask.y0, dom.mask.nx, dom.mask.ny,
                              [&](double x, double y) { return in_ball(x, y) && n.x * x + n.y * y < -off; });
    caps.t_plus = build_mask(dom.mask.h, dom.mask.x0, dom.mask.y0, dom.mask.nx, dom.mask.ny,
                             [&](double x, double y) { return in_ball(x, y) && n.x * x + n.y * y < off; });

    // Node-wise sandwich: T^- subset D_t subset T^+.
    for (int id = 0; id < dom.mask.nx * dom.mask.ny; ++id) {
        Vec2 p = dom.mask.node_pos(id);
        bool in_Dt = dom.mask.is_interior(id) && p.x * p.x + p.y * p.y < t * t;
        if (caps.t_minus.is_interior(id) && !in_Dt)
            throw std::runtime_error("cap_domains: T^- not contained in D_t (inconsistent C0)");
        if (in_Dt && !caps.t_plus.is_interior(id))
            throw std::runtime_error("cap_domains: D_t not contained in T^+ (inconsistent C0)");
    }
    return caps;
}

}  // namespace homlab
