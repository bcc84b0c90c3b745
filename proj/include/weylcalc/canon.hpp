#pragma once

#include "weylcalc/brackets.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace weylcalc {

/// A change of coordinates q -> Q(q): one scalar per target coordinate.
/// Construction fails unless the Jacobian determinant is a nonzero scalar.
struct PointMap {
    ScalarContextPtr ctx;
    std::vector<std::string> target_names;
    std::vector<Scalar> targets;
};

/// J_ij = dQ_i/dq_j with cached determinant and adjugate,
/// adj(J) J = J adj(J) = det(J) 1.
struct JacobianMatrix {
    size_t n = 0;
    std::vector<std::vector<Scalar>> entry;
    Scalar det;
    std::vector<std::vector<Scalar>> adj;

    /// (J^{-1})_{ij} = adj_{ij} / det.
    Scalar inv(size_t i, size_t j) const { return adj[i][j] / det; }
};

namespace detail {

/// Fraction-free (Bareiss) determinant on scalar entries.
inline Scalar bareiss_det(std::vector<std::vector<Scalar>> a, const ScalarContextPtr &ctx) {
    size_t n = a.size();
    if (n == 0) return Scalar::one(ctx);
    Scalar sign = Scalar::one(ctx);
    Scalar prev = Scalar::one(ctx);
    for (size_t k = 0; k + 1 < n; ++k) {
        if (a[k][k].is_zero()) {
            size_t swap_row = k + 1;
            while (swap_row < n && a[swap_row][k].is_zero()) ++swap_row;
            if (swap_row == n) return Scalar::zero(ctx);
            std::swap(a[k], a[swap_row]);
            sign = -sign;
        }
        for (size_t i = k + 1; i < n; ++i)
            for (size_t j = k + 1; j < n; ++j)
                a[i][j] = (a[k][k] * a[i][j] - a[i][k] * a[k][j]) / prev;
        prev = a[k][k];
    }
    return sign * a[n - 1][n - 1];
}

inline Scalar minor_det(const std::vector<std::vector<Scalar>> &a, size_t row, size_t col,
                        const ScalarContextPtr &ctx) {
    size_t n = a.size();
    std::vector<std::vector<Scalar>> m;
    for (size_t i = 0; i < n; ++i) {
        if (i == row) continue;
        std::vector<Scalar> r;
        for (size_t j = 0; j < n; ++j)
            if (j != col) r.push_back(a[i][j]);
        m.push_back(std::move(r));
    }
    return bareiss_det(std::move(m), ctx);
}

}  // namespace detail

inline JacobianMatrix jacobian(const PointMap &map) {
    size_t n = map.targets.size();
    if (n != map.ctx->num_coords())
        throw Error("point map must assign one target per coordinate");
    JacobianMatrix J;
    J.n = n;
    J.entry.assign(n, std::vector<Scalar>(n, Scalar::zero(map.ctx)));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) J.entry[i][j] = map.targets[i].diff(j);
    J.det = detail::bareiss_det(J.entry, map.ctx);
    if (J.det.is_zero()) throw Error("point map is not invertible: det J = 0");
    J.adj.assign(n, std::vector<Scalar>(n, Scalar::zero(map.ctx)));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            Scalar c = detail::minor_det(J.entry, j, i, map.ctx);
            if ((i + j) % 2) c = -c;
            J.adj[i][j] = c;
        }
    }
    // adj(J) J = det(J) 1 is an invariant worth paying for here
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            Scalar acc = Scalar::zero(map.ctx);
            for (size_t k = 0; k < n; ++k) acc += J.adj[i][k] * J.entry[k][j];
            if (!(acc == (i == j ? J.det : Scalar::zero(map.ctx))))
                throw Error("adjugate identity failed (internal)");
        }
    }
    return J;
}

inline PointMap make_point_map(ScalarContextPtr ctx, std::vector<std::string> names,
                               std::vector<Scalar> targets) {
    PointMap m{std::move(ctx), std::move(names), std::move(targets)};
    jacobian(m);  // validates invertibility
    return m;
}

/// The polar map (x, y) = (r c, r s) over the polar context; det J = r.
inline PointMap polar_map(const ScalarContextPtr &polar) {
    Scalar r = Scalar::coordinate(polar, 0);
    Scalar c = Scalar::variable(polar, polar->vars()->index_of("c"));
    Scalar s = Scalar::variable(polar, polar->vars()->index_of("s"));
    return make_point_map(polar, {"x", "y"}, {r * c, r * s});
}

/// Candidate canonical pair: 2N elements (P_1..P_N, Q_1..Q_N), quantum or
/// classical (commutatively interpreted). Canonicity is decided by the
/// checkers, never assumed.
struct CandidatePair {
    bool classical = false;
    AlgebraSpecPtr spec;
    std::vector<NCPoly> P, Q;
};

namespace detail {

inline std::vector<NCPoly> lift_targets(const PointMap &map) {
    std::vector<NCPoly> Q;
    for (auto &t : map.targets) Q.push_back(NCPoly::from_scalar(t));
    return Q;
}

}  // namespace detail

/// Classical lift P = (J^{-1})^t p; preserves the basic Poisson brackets.
inline CandidatePair classical_lift(const PointMap &map, AlgebraSpecPtr spec) {
    JacobianMatrix J = jacobian(map);
    CandidatePair out;
    out.classical = true;
    out.spec = spec;
    out.Q = detail::lift_targets(map);
    for (size_t i = 0; i < J.n; ++i) {
        NCPoly Pi(map.ctx);
        for (size_t a = 0; a < J.n; ++a)
            Pi.add_term(Word{static_cast<uint32_t>(a)}, J.inv(a, i));
        out.P.push_back(std::move(Pi));
    }
    return out;
}

/// Right quantum lift: P_i = sum_a (J^{-1})_{ai} p_a, inverse-Jacobian
/// coefficients to the left of the momenta.
inline CandidatePair lift_right(const PointMap &map, AlgebraSpecPtr spec) {
    CandidatePair out = classical_lift(map, std::move(spec));
    out.classical = false;
    return out;
}

/// Left quantum lift: P_i = sum_a p_a (J^{-1})_{ai}, normalized into the
/// coefficients-left canonical form, which adds h sum_a d_a (J^{-1})_{ai}.
inline CandidatePair lift_left(const PointMap &map, AlgebraSpecPtr spec) {
    JacobianMatrix J = jacobian(map);
    CandidatePair out;
    out.spec = std::move(spec);
    out.Q = detail::lift_targets(map);
    const Scalar h = Scalar::h(map.ctx);
    for (size_t i = 0; i < J.n; ++i) {
        NCPoly Pi(map.ctx);
        Scalar corr = Scalar::zero(map.ctx);
        for (size_t a = 0; a < J.n; ++a) {
            Scalar w = J.inv(a, i);
            Pi.add_term(Word{static_cast<uint32_t>(a)}, w);
            corr += w.diff(a);
        }
        Pi.add_term(Word{}, h * corr);
        out.P.push_back(std::move(Pi));
    }
    return out;
}

/// Gauge-shifted right lift for a coordinate function g: momenta pick up the
/// pulled-back gradient, P_i = sum_a (J^{-1})_{ai} (p_a + g,_a). For the
/// identity map this is P_i = p_i + g,_i.
inline CandidatePair gauge_lift(const PointMap &map, const Scalar &g, AlgebraSpecPtr spec) {
    JacobianMatrix J = jacobian(map);
    CandidatePair out;
    out.spec = std::move(spec);
    out.Q = detail::lift_targets(map);
    for (size_t i = 0; i < J.n; ++i) {
        NCPoly Pi(map.ctx);
        Scalar shift = Scalar::zero(map.ctx);
        for (size_t a = 0; a < J.n; ++a) {
            Scalar w = J.inv(a, i);
            Pi.add_term(Word{static_cast<uint32_t>(a)}, w);
            shift += w * g.diff(a);
        }
        Pi.add_term(Word{}, shift);
        out.P.push_back(std::move(Pi));
    }
    return out;
}

/// Gradient of ln det J as a rational scalar, the (4.42) route:
/// Tr(J^{-1} J,_i). The logarithm itself is never materialized.
inline Scalar grad_log_det_tr(const JacobianMatrix &J, size_t i, const ScalarContextPtr &ctx) {
    Scalar acc = Scalar::zero(ctx);
    for (size_t a = 0; a < J.n; ++a)
        for (size_t b = 0; b < J.n; ++b) acc += J.inv(a, b) * J.entry[b][a].diff(i);
    return acc;
}

/// The regular-in-J route via the adjugate: Tr(adj(J) J,_i) / det J.
inline Scalar grad_log_det_adj(const JacobianMatrix &J, size_t i, const ScalarContextPtr &ctx) {
    Scalar acc = Scalar::zero(ctx);
    for (size_t a = 0; a < J.n; ++a)
        for (size_t b = 0; b < J.n; ++b) acc += J.adj[a][b] * J.entry[b][a].diff(i);
    return acc / J.det;
}

/// Both routes, cross-checked.
inline Scalar grad_log_det(const JacobianMatrix &J, size_t i, const ScalarContextPtr &ctx) {
    Scalar t = grad_log_det_tr(J, i, ctx);
    if (!(t == grad_log_det_adj(J, i, ctx)))
        throw Error("grad_log_det: trace and adjugate routes disagree (internal)");
    return t;
}

/// Psi = Phi_r Phi_l^{-1} applied to the momenta:
/// Psi(p_i) = sum_{ab} (J^{-1})_{ab} p_a J_{bi}, normalized.
inline std::vector<NCPoly> psi_map(const PointMap &map, const AlgebraSpec &spec) {
    JacobianMatrix J = jacobian(map);
    const Scalar h = Scalar::h(map.ctx);
    std::vector<NCPoly> out;
    for (size_t i = 0; i < J.n; ++i) {
        NCPoly Pi(map.ctx);
        for (size_t a = 0; a < J.n; ++a) {
            Scalar coeff = Scalar::zero(map.ctx);
            Scalar corr = Scalar::zero(map.ctx);
            for (size_t b = 0; b < J.n; ++b) {
                Scalar w = J.inv(a, b);
                coeff += w * J.entry[b][i];
                corr += w * J.entry[b][i].diff(a);
            }
            Pi.add_term(Word{static_cast<uint32_t>(a)}, coeff);
            Pi.add_term(Word{}, h * corr);
        }
        out.push_back(std::move(Pi));
    }
    (void)spec;
    return out;
}

/// Expected-zero defect: Psi(p_i) - (p_i + h grad_log_det(J)_i).
inline std::vector<NCPoly> psi_defect(const PointMap &map, const AlgebraSpec &spec) {
    JacobianMatrix J = jacobian(map);
    const Scalar h = Scalar::h(map.ctx);
    std::vector<NCPoly> psi = psi_map(map, spec);
    std::vector<NCPoly> out;
    for (size_t i = 0; i < J.n; ++i) {
        NCPoly expect(map.ctx);
        expect.add_term(Word{static_cast<uint32_t>(i)}, Scalar::one(map.ctx));
        expect.add_term(Word{}, h * grad_log_det(J, i, map.ctx));
        out.push_back(psi[i] - expect);
    }
    return out;
}

/// Commutative Poisson bracket on diffop-shaped observables with rational
/// q-dependence: momentum partials delete word letters, coordinate partials
/// differentiate the scalars, products are the classical (commutative) ones.
inline NCPoly poisson_classical(const NCPoly &a, const NCPoly &b, const AlgebraSpec &spec) {
    if (spec.mode() != AlgebraMode::weyl_diffop)
        throw Error("poisson_classical expects diffop-form observables");
    NCPoly out(spec.context());
    for (size_t i = 0; i < spec.weyl_n(); ++i) {
        out += mul_classical(partial(a, i, spec), partial_coord(b, i, spec));
        out -= mul_classical(partial_coord(a, i, spec), partial(b, i, spec));
    }
    return out;
}

/// One residual of a canonicity check.
struct CanonicalReport {
    struct Residual {
        std::string label;
        NCPoly value;
        bool zero;
    };
    bool canonical = true;
    std::vector<Residual> residuals;

    void add(std::string label, NCPoly value) {
        bool z = value.is_zero();
        if (!z) canonical = false;
        residuals.push_back({std::move(label), std::move(value), z});
    }
};

/// Evaluates [Q_i,Q_j], [P_i,P_j] and [P_i,Q_j] - h delta_ij; all-zero means
/// the pair is quantum canonical. Failures are data, not errors.
inline CanonicalReport check_canonical_quantum(const CandidatePair &cand) {
    const AlgebraSpec &spec = *cand.spec;
    const Scalar h = Scalar::h(spec.context());
    size_t n = cand.P.size();
    CanonicalReport rep;
    auto name = [&](const char *f, size_t i, size_t j) {
        return std::string("[") + f + std::to_string(i + 1) + "," +
               (f[0] == 'P' ? "Q" : f) + std::to_string(j + 1) + "]";
    };
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            rep.add("[Q" + std::to_string(i + 1) + ",Q" + std::to_string(j + 1) + "]",
                    commutator(cand.Q[i], cand.Q[j], spec));
            rep.add("[P" + std::to_string(i + 1) + ",P" + std::to_string(j + 1) + "]",
                    commutator(cand.P[i], cand.P[j], spec));
        }
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            NCPoly r = commutator(cand.P[i], cand.Q[j], spec);
            if (i == j) r -= NCPoly::from_scalar(h);
            rep.add(name("P", i, j) + (i == j ? " - h" : ""), std::move(r));
        }
    return rep;
}

/// Same with Poisson brackets: {P_i,Q_j} = delta_ij and the rest vanish.
inline CanonicalReport check_canonical_classical(const CandidatePair &cand) {
    const AlgebraSpec &spec = *cand.spec;
    size_t n = cand.P.size();
    CanonicalReport rep;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            rep.add("{Q" + std::to_string(i + 1) + ",Q" + std::to_string(j + 1) + "}",
                    poisson_classical(cand.Q[i], cand.Q[j], spec));
            rep.add("{P" + std::to_string(i + 1) + ",P" + std::to_string(j + 1) + "}",
                    poisson_classical(cand.P[i], cand.P[j], spec));
        }
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            NCPoly r = poisson_classical(cand.P[i], cand.Q[j], spec);
            if (i == j) r -= NCPoly::from_scalar(Scalar::one(spec.context()));
            rep.add("{P" + std::to_string(i + 1) + ",Q" + std::to_string(j + 1) + "}" +
                        (i == j ? " - 1" : ""),
                    std::move(r));
        }
    return rep;
}

/// Substitute the map targets into a scalar written over the target
/// coordinates (h maps to h; constrained target symbols are rejected).
inline Scalar compose_with_map(const Scalar &s, const ScalarContextPtr &target_ctx,
                               const PointMap &map) {
    const auto &tv = target_ctx->vars();
    std::vector<Scalar> images;
    images.push_back(Scalar::h(map.ctx));
    for (size_t i = 0; i < target_ctx->num_coords(); ++i) images.push_back(map.targets[i]);
    if (tv->size() != 1 + target_ctx->num_coords())
        throw Error("composition through function symbols is not supported");
    Scalar num = substitute_poly(s.num(), images, map.ctx);
    Scalar den = substitute_poly(s.den(), images, map.ctx);
    if (den.is_zero())
        throw Error("composition does not reduce: denominator vanishes under the map");
    return num / den;
}

/// The self-adjoint pair of transformed mechanical Hamiltonians
/// H^{lr} = sum P_i^l a^{ij}(Q) P_j^r + V(Q) and H^{rl} with l, r swapped.
struct MechanicalPair {
    NCPoly Hlr, Hrl;
    std::vector<NCPoly> P_left, P_right;
};

inline MechanicalPair mechanical_lr(const PointMap &map,
                                    const std::vector<std::vector<Scalar>> &a,
                                    const Scalar &V, const ScalarContextPtr &target_ctx,
                                    const AlgebraSpecPtr &spec) {
    size_t n = map.targets.size();
    if (a.size() != n) throw Error("mechanical_lr: matrix size mismatch");
    for (size_t i = 0; i < n; ++i) {
        if (a[i].size() != n) throw Error("mechanical_lr: matrix size mismatch");
        for (size_t j = 0; j < n; ++j)
            if (!(a[i][j] == a[j][i])) throw Error("mechanical_lr: matrix must be symmetric");
    }
    CandidatePair L = lift_left(map, spec);
    CandidatePair R = lift_right(map, spec);
    std::vector<std::vector<Scalar>> aQ(n, std::vector<Scalar>(n, Scalar::zero(map.ctx)));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) aQ[i][j] = compose_with_map(a[i][j], target_ctx, map);
    NCPoly VQ = NCPoly::from_scalar(compose_with_map(V, target_ctx, map));
    MechanicalPair out{NCPoly(map.ctx), NCPoly(map.ctx), L.P, R.P};
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            if (aQ[i][j].is_zero()) continue;
            NCPoly mid = NCPoly::from_scalar(aQ[i][j]);
            out.Hlr += nc_mul(nc_mul(L.P[i], mid, *spec), R.P[j], *spec);
            out.Hrl += nc_mul(nc_mul(R.P[i], mid, *spec), L.P[j], *spec);
        }
    }
    out.Hlr += VQ;
    out.Hrl += VQ;
    return out;
}

/// Transform the flat Hamiltonian sum p_i^2 with one lift only; the result
/// is generally not self-adjoint, and the report carries H - H^dagger.
struct NaiveTransformed {
    NCPoly H;
    NCPoly self_adjoint_defect;  // H - H^dagger
};

inline NaiveTransformed naive_transformed_hamiltonian(const PointMap &map, bool left,
                                                      const AlgebraSpecPtr &spec) {
    CandidatePair lift = left ? lift_left(map, spec) : lift_right(map, spec);
    NCPoly H(map.ctx);
    for (auto &Pi : lift.P) H += nc_mul(Pi, Pi, *spec);
    NCPoly defect = H - dagger(H, *spec);
    return {std::move(H), std::move(defect)};
}

/// h^{-2}(H^{lr} - H^{rl}) two ways: directly, and through the closed form
/// sum (J^{-1})_{bi} ((ln det J),_s (J^{-1})_{sj} a^{ij}),_b. Also validates
/// the contraction identity -sum_m (J^{-1})_{mj,m} = sum_s (ln det J),_s (J^{-1})_{sj}.
struct LrDifference {
    NCPoly direct;
    NCPoly closed;
    NCPoly defect;          // direct - closed, expected zero
    bool contraction_ok;    // the (J^{-1}) divergence identity
};

inline LrDifference lr_difference(const PointMap &map, const std::vector<std::vector<Scalar>> &a,
                                  const ScalarContextPtr &target_ctx, const AlgebraSpecPtr &spec) {
    size_t n = map.targets.size();
    JacobianMatrix J = jacobian(map);
    MechanicalPair mech = mechanical_lr(map, a, Scalar::zero(target_ctx), target_ctx, spec);
    const Scalar h = Scalar::h(map.ctx);
    NCPoly direct = (mech.Hlr - mech.Hrl).scaled(Scalar::one(map.ctx) / (h * h));

    std::vector<Scalar> gld;
    for (size_t i = 0; i < n; ++i) gld.push_back(grad_log_det(J, i, map.ctx));

    std::vector<std::vector<Scalar>> aQ(n, std::vector<Scalar>(n, Scalar::zero(map.ctx)));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) aQ[i][j] = compose_with_map(a[i][j], target_ctx, map);

    Scalar closed = Scalar::zero(map.ctx);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            if (aQ[i][j].is_zero()) continue;
            for (size_t b = 0; b < n; ++b) {
                Scalar inner = Scalar::zero(map.ctx);
                for (size_t s = 0; s < n; ++s) inner += gld[s] * J.inv(s, j);
                closed += J.inv(b, i) * (inner * aQ[i][j]).diff(b);
            }
        }
    NCPoly closed_poly = NCPoly::from_scalar(closed);

    bool ok = true;
    for (size_t j = 0; j < n; ++j) {
        Scalar lhs = Scalar::zero(map.ctx);
        for (size_t m = 0; m < n; ++m) lhs -= J.inv(m, j).diff(m);
        Scalar rhs = Scalar::zero(map.ctx);
        for (size_t s = 0; s < n; ++s) rhs += gld[s] * J.inv(s, j);
        if (!(lhs == rhs)) ok = false;
    }
    return {direct, closed_poly, direct - closed_poly, ok};
}

// ---------------------------------------------------------------------------
// Inverse search (the tame-map harness). Decides nothing: a miss only means
// "no inverse within this degree bound".
// ---------------------------------------------------------------------------

struct InverseSearch {
    bool found = false;
    VarTablePtr target_vars;
    std::vector<MultiPoly> inverse;  // G_i over target_vars, when found
};

namespace detail {

inline void enumerate_monos(size_t nvars, unsigned bound, std::vector<Mono> &out) {
    Mono cur(nvars);
    std::function<void(size_t, unsigned)> rec = [&](size_t v, unsigned left) {
        if (v == nvars) {
            out.push_back(cur);
            return;
        }
        for (unsigned e = 0; e <= left; ++e) {
            cur.exp[v] = e;
            rec(v + 1, left - e);
        }
        cur.exp[v] = 0;
    };
    rec(0, bound);
    std::sort(out.begin(), out.end(), MonoLess{});
}

/// Exact Gauss-Jordan, columns first-come pivoting; free unknowns are zero.
/// Columns must be ordered by preference (lowest degree first).
inline std::optional<std::vector<Rational>> solve_linear(std::vector<std::vector<Rational>> A,
                                                         std::vector<Rational> rhs) {
    size_t rows = A.size();
    size_t cols = rows == 0 ? 0 : A[0].size();
    std::vector<long> pivot_of_col(cols, -1);
    size_t rank = 0;
    for (size_t c = 0; c < cols && rank < rows; ++c) {
        size_t r = rank;
        while (r < rows && A[r][c] == 0) ++r;
        if (r == rows) continue;
        std::swap(A[r], A[rank]);
        std::swap(rhs[r], rhs[rank]);
        Rational inv = Rational(1) / A[rank][c];
        for (size_t k = c; k < cols; ++k) A[rank][k] *= inv;
        rhs[rank] *= inv;
        for (size_t i = 0; i < rows; ++i) {
            if (i == rank || A[i][c] == 0) continue;
            Rational f = A[i][c];
            for (size_t k = c; k < cols; ++k) A[i][k] -= f * A[rank][k];
            rhs[i] -= f * rhs[rank];
        }
        pivot_of_col[c] = static_cast<long>(rank);
        ++rank;
    }
    for (size_t r = rank; r < rows; ++r)
        if (rhs[r] != 0) return std::nullopt;
    std::vector<Rational> x(cols, Rational(0));
    for (size_t c = 0; c < cols; ++c)
        if (pivot_of_col[c] >= 0) x[c] = rhs[static_cast<size_t>(pivot_of_col[c])];
    return x;
}

}  // namespace detail

/// Search for polynomial G with G(F) = identity, deg G <= bound, by exact
/// linear solving over Q. F_i are polynomials in the source variables; the
/// returned G_i are written in fresh variables X_1..X_m standing for the F's.
inline InverseSearch attempt_inverse_polys(const std::vector<MultiPoly> &F,
                                           const std::vector<int> &source_vars,
                                           std::vector<std::string> target_names, unsigned bound) {
    if (bound < 1) throw Error("attempt_inverse: degree bound must be at least 1");
    size_t m = F.size();
    if (source_vars.size() != m) throw Error("attempt_inverse: need a square system");
    VarTablePtr src = F.empty() ? nullptr : F[0].table();
    InverseSearch out;
    out.target_vars = std::make_shared<VarTable>(std::move(target_names));

    std::vector<Mono> basis;
    detail::enumerate_monos(m, bound, basis);
    // powers of F for every basis monomial
    std::vector<MultiPoly> images;
    images.reserve(basis.size());
    for (auto &b : basis) {
        MultiPoly prod = MultiPoly::constant(src, Rational(1));
        for (size_t v = 0; v < m; ++v)
            for (uint32_t e = 0; e < b.exp[v]; ++e) prod = prod * F[v];
        images.push_back(std::move(prod));
    }
    // row space: all source monomials that appear anywhere
    std::map<Mono, size_t, MonoLess> row_of;
    auto touch = [&](const MultiPoly &p) {
        for (auto &[mo, c] : p.terms())
            if (!row_of.count(mo)) row_of.emplace(mo, row_of.size());
    };
    for (auto &img : images) touch(img);
    std::vector<MultiPoly> id_targets;
    for (size_t i = 0; i < m; ++i) {
        id_targets.push_back(MultiPoly::variable(src, source_vars[i]));
        touch(id_targets.back());
    }
    size_t rows = row_of.size();
    std::vector<std::vector<Rational>> A(rows, std::vector<Rational>(basis.size(), Rational(0)));
    for (size_t c = 0; c < basis.size(); ++c)
        for (auto &[mo, cf] : images[c].terms()) A[row_of[mo]][c] = cf;

    std::vector<MultiPoly> G;
    for (size_t i = 0; i < m; ++i) {
        std::vector<Rational> rhs(rows, Rational(0));
        for (auto &[mo, cf] : id_targets[i].terms()) rhs[row_of[mo]] = cf;
        auto sol = detail::solve_linear(A, rhs);
        if (!sol) return out;  // not found within the bound
        MultiPoly gi(out.target_vars);
        for (size_t c = 0; c < basis.size(); ++c) {
            if ((*sol)[c] == 0) continue;
            Mono mo(out.target_vars->size());
            mo.exp = basis[c].exp;
            gi.add_term(mo, (*sol)[c]);
        }
        G.push_back(std::move(gi));
    }
    out.found = true;
    out.inverse = std::move(G);
    return out;
}

/// Inverse search for a point map (polynomial targets required).
inline InverseSearch attempt_inverse(const PointMap &map, unsigned bound) {
    std::vector<MultiPoly> F;
    std::vector<int> vars;
    for (size_t i = 0; i < map.targets.size(); ++i) {
        const Scalar &t = map.targets[i];
        if (!t.is_polynomial() || t.num().uses_var(0))
            throw Error("attempt_inverse needs polynomial, h-free targets");
        F.push_back(t.num() * (Rational(1) / t.den().constant_value()));
        vars.push_back(map.ctx->coord_var(i));
    }
    std::vector<std::string> tnames = map.target_names;
    return attempt_inverse_polys(F, vars, std::move(tnames), bound);
}

/// Verification by substitution: G(F) = identity variables, exactly.
inline bool verify_inverse(const PointMap &map, const InverseSearch &inv) {
    if (!inv.found) return false;
    for (size_t i = 0; i < inv.inverse.size(); ++i) {
        std::vector<Scalar> images;
        for (auto &t : map.targets) images.push_back(t);
        Scalar composed = substitute_poly(inv.inverse[i], images, map.ctx);
        if (!(composed == Scalar::coordinate(map.ctx, i))) return false;
    }
    return true;
}

/// Inverse search for a classical candidate pair: the 2N expressions are
/// read as commutative polynomials in (q, p) and the q_i, p_i are sought as
/// polynomials in the P's and Q's.
inline InverseSearch attempt_inverse(const CandidatePair &cand, unsigned bound) {
    if (!cand.classical)
        throw Error("attempt_inverse on pairs is the classical (Poisson) harness");
    const AlgebraSpec &spec = *cand.spec;
    size_t n = cand.P.size();
    // combined commutative variable table: coordinates then momenta
    std::vector<std::string> names;
    for (size_t i = 0; i < n; ++i) names.push_back(spec.context()->coord_name(i));
    for (size_t i = 0; i < n; ++i) names.push_back(spec.gen_name(i));
    auto table = std::make_shared<VarTable>(names);
    auto to_poly = [&](const NCPoly &x) {
        MultiPoly out(table);
        for (auto &[w, s] : x.terms()) {
            if (!s.is_polynomial() || s.num().uses_var(0))
                throw Error("attempt_inverse needs polynomial, h-free expressions");
            MultiPoly coeff(table);
            for (auto &[mo, c] : s.num().terms()) {
                Mono t(table->size());
                for (size_t i = 0; i < n; ++i)
                    t.exp[i] = mo.exp[static_cast<size_t>(spec.context()->coord_var(i))];
                coeff.add_term(t, c);
            }
            coeff = coeff * (Rational(1) / s.den().constant_value());
            Mono wm(table->size());
            for (auto g : w) wm.exp[n + g] += 1;
            out += MultiPoly::monomial(table, wm, Rational(1)) * coeff;
        }
        return out;
    };
    std::vector<MultiPoly> F;
    std::vector<int> vars;
    std::vector<std::string> tnames;
    for (size_t i = 0; i < n; ++i) {
        F.push_back(to_poly(cand.Q[i]));
        vars.push_back(static_cast<int>(i));
        tnames.push_back("Q" + std::to_string(i + 1));
    }
    for (size_t i = 0; i < n; ++i) {
        F.push_back(to_poly(cand.P[i]));
        vars.push_back(static_cast<int>(n + i));
        tnames.push_back("P" + std::to_string(i + 1));
    }
    return attempt_inverse_polys(F, vars, std::move(tnames), bound);
}

/// Free-algebra inverse search: G_i are sums of words in the F's with
/// rational coefficients, G_i(F) = x_i solved exactly.
inline InverseSearch attempt_inverse_free(const std::vector<NCPoly> &F, const AlgebraSpec &spec,
                                          unsigned bound) {
    if (spec.mode() != AlgebraMode::free_algebra)
        throw Error("attempt_inverse_free requires a free algebra");
    if (bound < 1) throw Error("attempt_inverse: degree bound must be at least 1");
    size_t m = F.size();
    if (m != spec.num_gens()) throw Error("attempt_inverse: need a square system");
    // enumerate words up to the bound
    std::vector<Word> basis{Word{}};
    for (size_t start = 0, len = 1; len <= bound; ++len) {
        size_t end = basis.size();
        for (size_t k = start; k < end; ++k)
            for (uint32_t g = 0; g < m; ++g) {
                Word w = basis[k];
                w.push_back(g);
                basis.push_back(std::move(w));
            }
        start = end;
    }
    std::vector<NCPoly> images;
    for (auto &w : basis) {
        NCPoly prod = NCPoly::from_scalar(Scalar::one(spec.context()));
        for (auto g : w) prod = nc_mul(prod, F[g], spec);
        images.push_back(std::move(prod));
    }
    std::map<Word, size_t, WordLess> row_of;
    auto touch = [&](const NCPoly &p) {
        for (auto &[w, s] : p.terms())
            if (!row_of.count(w)) row_of.emplace(w, row_of.size());
    };
    for (auto &img : images) touch(img);
    for (size_t i = 0; i < m; ++i) row_of.emplace(Word{static_cast<uint32_t>(i)}, row_of.size());
    size_t rows = row_of.size();
    std::vector<std::vector<Rational>> A(rows, std::vector<Rational>(basis.size(), Rational(0)));
    for (size_t c = 0; c < basis.size(); ++c)
        for (auto &[w, s] : images[c].terms()) {
            if (!s.is_rational_constant())
                throw Error("attempt_inverse_free needs rational coefficients");
            A[row_of[w]][c] = s.rational_value();
        }
    InverseSearch out;
    std::vector<std::string> tnames;
    for (size_t i = 0; i < m; ++i) tnames.push_back("F" + std::to_string(i + 1));
    out.target_vars = std::make_shared<VarTable>(tnames);
    std::vector<MultiPoly> G;
    for (size_t i = 0; i < m; ++i) {
        std::vector<Rational> rhs(rows, Rational(0));
        rhs[row_of[Word{static_cast<uint32_t>(i)}]] = Rational(1);
        auto sol = detail::solve_linear(A, rhs);
        if (!sol) return out;
        // report the noncommutative G_i as a commutative-looking sum of words
        MultiPoly gi(out.target_vars);
        for (size_t c = 0; c < basis.size(); ++c) {
            if ((*sol)[c] == 0) continue;
            Mono mo(m);
            for (auto g : basis[c]) mo.exp[g] += 1;
            gi.add_term(mo, (*sol)[c]);
        }
        G.push_back(std::move(gi));
    }
    out.found = true;
    out.inverse = std::move(G);
    return out;
}

/// The operator-valued Jacobian of a free-algebra map: J_ij is the insertion
/// operator op_partial(F_i, j, .), exposed as a callable; J^var carries the
/// cyclic derivatives. No invertibility decision is attempted.
struct NcJacobian {
    size_t m = 0;
    std::vector<std::vector<std::function<NCPoly(const NCPoly &)>>> op;
    std::vector<std::vector<NCPoly>> variational;
};

inline NcJacobian nc_jacobian(const std::vector<NCPoly> &F, const AlgebraSpecPtr &spec) {
    if (spec->mode() != AlgebraMode::free_algebra)
        throw Error("nc_jacobian requires a free algebra");
    NcJacobian out;
    out.m = spec->num_gens();
    out.op.resize(F.size());
    out.variational.resize(F.size());
    for (size_t i = 0; i < F.size(); ++i) {
        for (size_t j = 0; j < out.m; ++j) {
            NCPoly Fi = F[i];
            AlgebraSpecPtr sp = spec;
            out.op[i].push_back(
                [Fi, j, sp](const NCPoly &x) { return op_partial(Fi, j, x, *sp); });
            out.variational[i].push_back(cyclic_variational(F[i], j, *spec));
        }
    }
    return out;
}

}  // namespace weylcalc
