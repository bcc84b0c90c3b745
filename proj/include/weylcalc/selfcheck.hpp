#pragma once

#include "weylcalc/canon.hpp"

#include <random>
#include <string>
#include <vector>

namespace weylcalc::selfcheck {

// ---------------------------------------------------------------------------
// Deterministic randomness and generators for property suites.
// ---------------------------------------------------------------------------

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(uint64_t seed = 0x5eed) : eng(seed) {}

    long uniform(long lo, long hi) {
        return std::uniform_int_distribution<long>(lo, hi)(eng);
    }
    Rational small_rational(long span = 4) {
        long num = uniform(-span, span);
        long den = uniform(1, 3);
        return Rational(num, den);
    }
    Rational nonzero_rational(long span = 4) {
        Rational r;
        do {
            r = small_rational(span);
        } while (r == 0);
        return r;
    }
};

inline MultiPoly random_poly(const VarTablePtr &vars, Rng &rng, unsigned max_deg, int terms) {
    MultiPoly p(vars);
    for (int t = 0; t < terms; ++t) {
        Mono m(vars->size());
        unsigned left = max_deg == 0 ? 0 : static_cast<unsigned>(rng.uniform(0, max_deg));
        for (unsigned k = 0; k < left; ++k)
            m.exp[static_cast<size_t>(rng.uniform(0, static_cast<long>(vars->size()) - 1))] += 1;
        p.add_term(m, rng.small_rational());
    }
    return p;
}

inline Scalar random_scalar(const ScalarContextPtr &ctx, Rng &rng, unsigned max_deg, int terms,
                            bool rational = false) {
    MultiPoly num = random_poly(ctx->vars(), rng, max_deg, terms);
    if (!rational) return Scalar(ctx, num);
    MultiPoly den(ctx->vars());
    do {
        den = random_poly(ctx->vars(), rng, 1, 2);
    } while (den.is_zero());
    return Scalar(ctx, num, den);
}

inline Scalar random_nonzero_scalar(const ScalarContextPtr &ctx, Rng &rng, unsigned max_deg,
                                    int terms, bool rational = false) {
    Scalar s = Scalar::zero(ctx);
    while (s.is_zero()) s = random_scalar(ctx, rng, max_deg, terms, rational);
    return s;
}

inline NCPoly random_ncpoly(const AlgebraSpec &spec, Rng &rng, unsigned max_len, int terms,
                            bool h_free = false, bool scalar_coords = false) {
    NCPoly p(spec.context());
    for (int t = 0; t < terms; ++t) {
        Word w;
        unsigned len = static_cast<unsigned>(rng.uniform(0, max_len));
        for (unsigned k = 0; k < len; ++k)
            w.push_back(static_cast<uint32_t>(rng.uniform(0, static_cast<long>(spec.num_gens()) - 1)));
        Scalar c = Scalar::constant(spec.context(), rng.small_rational());
        if (!h_free && rng.uniform(0, 3) == 0) c = c * Scalar::h(spec.context());
        if (scalar_coords && spec.context()->num_coords() > 0 && rng.uniform(0, 1) == 0) {
            size_t i = static_cast<size_t>(rng.uniform(0, spec.context()->num_coords() - 1));
            c = c * Scalar::coordinate(spec.context(), i);
        }
        std::vector<std::pair<Scalar, Word>> raw{{c, w}};
        p += normalize(std::move(raw), spec);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Independent oracles. These reimplement the defining rules step by step and
// never call the production normal-ordering path beyond container plumbing.
// ---------------------------------------------------------------------------

/// Oracle rewriter: applies u_i u_j = u_j u_i + h c_ij one inversion at a
/// time, in a caller-chosen (possibly random) order, until no inversions
/// remain. Used to check both correctness and the diamond property of
/// normalize().
inline NCPoly oracle_normalize(std::vector<std::pair<Scalar, Word>> terms, const AlgebraSpec &spec,
                               Rng *rng = nullptr) {
    const Scalar h = Scalar::h(spec.context());
    for (;;) {
        std::vector<std::pair<size_t, size_t>> inversions;
        for (size_t t = 0; t < terms.size(); ++t)
            for (size_t k = 0; k + 1 < terms[t].second.size(); ++k)
                if (terms[t].second[k] > terms[t].second[k + 1]) inversions.emplace_back(t, k);
        if (inversions.empty()) break;
        auto [t, k] =
            inversions[rng ? static_cast<size_t>(rng->uniform(0, inversions.size() - 1)) : 0];
        Word w = terms[t].second;
        Scalar coeff = terms[t].first;
        uint32_t i = w[k], j = w[k + 1];
        Word shorter = w;
        shorter.erase(shorter.begin() + static_cast<long>(k),
                      shorter.begin() + static_cast<long>(k) + 2);
        std::swap(w[k], w[k + 1]);
        terms[t].second = w;
        Rational cij = spec.c(i, j);
        if (cij != 0)
            terms.emplace_back(coeff * h * Scalar::constant(spec.context(), cij), shorter);
    }
    NCPoly out(spec.context());
    for (auto &[s, w] : terms) out.add_term(w, s);
    return out;
}

/// Lexicographically least rotation of a word (necklace normal form).
inline Word necklace(const Word &w) {
    if (w.empty()) return w;
    Word best = w;
    Word cur = w;
    for (size_t r = 1; r < w.size(); ++r) {
        std::rotate(cur.begin(), cur.begin() + 1, cur.end());
        if (cur < best) best = cur;
    }
    return best;
}

/// Projection onto cyclic-equivalence classes; its kernel is exactly the
/// span of commutators of words, so equal projections mean "equal modulo
/// commutators".
inline std::map<Word, Scalar, WordLess> necklace_project(const NCPoly &x) {
    std::map<Word, Scalar, WordLess> out;
    for (auto &[w, s] : x.terms()) {
        Word n = necklace(w);
        auto it = out.find(n);
        if (it == out.end()) {
            out.emplace(std::move(n), s);
        } else {
            it->second += s;
            if (it->second.is_zero()) out.erase(it);
        }
    }
    return out;
}

inline bool equal_mod_word_commutators(const NCPoly &a, const NCPoly &b) {
    return necklace_project(a - b).empty();
}

// ---------------------------------------------------------------------------
// The test-map corpus: tame generators (unimodular linear and triangular
// maps), their composites, nonconstant-determinant maps, and the polar map.
// ---------------------------------------------------------------------------

struct NamedMap {
    std::string name;
    PointMap map;
    AlgebraSpecPtr spec;
    ScalarContextPtr target_ctx;
};

inline NamedMap named_map(std::string name, const ScalarContextPtr &ctx,
                          std::vector<Scalar> targets) {
    std::vector<std::string> tnames;
    for (size_t i = 0; i < targets.size(); ++i) tnames.push_back("X" + std::to_string(i + 1));
    PointMap m = make_point_map(ctx, tnames, std::move(targets));
    auto spec = std::make_shared<AlgebraSpec>(AlgebraSpec::weyl_over(ctx));
    return {std::move(name), std::move(m), spec, plain_context(tnames)};
}

inline std::vector<NamedMap> test_map_corpus() {
    std::vector<NamedMap> out;
    {
        auto c1 = plain_context({"q"});
        Scalar q = Scalar::coordinate(c1, 0);
        Scalar one = Scalar::one(c1);
        out.push_back(named_map("id_1d", c1, {q}));
        out.push_back(named_map("affine_2q+1", c1, {q * Scalar::constant(c1, 2) + one}));
        out.push_back(named_map("cubic_q3+q", c1, {q * q * q + q}));
        out.push_back(named_map("square_q2", c1, {q * q}));
        out.push_back(named_map("quad_q2+q", c1, {q * q + q}));
    }
    {
        auto c2 = plain_context({"q1", "q2"});
        Scalar q1 = Scalar::coordinate(c2, 0), q2 = Scalar::coordinate(c2, 1);
        out.push_back(named_map("id_2d", c2, {q1, q2}));
        out.push_back(named_map("shear", c2, {q1 + q2, q2}));
        out.push_back(named_map("unimodular", c2, {q1 * Scalar::constant(c2, 2) + q2, q1 + q2}));
        out.push_back(named_map("triangular_quad", c2, {q1, q2 + q1 * q1}));
        out.push_back(named_map("triangular_cubic_rev", c2, {q1 + q2 * q2 * q2, q2}));
        out.push_back(named_map("linear_after_triangular", c2, {q1 + q2 + q1 * q1, q2 + q1 * q1}));
        out.push_back(named_map("triangular_after_linear",
                                 c2, {q1 + q2, q2 + (q1 + q2) * (q1 + q2)}));
        out.push_back(named_map("triangular_deg3", c2, {q1, q2 + q1 * q1 * q1}));
        out.push_back(named_map("det_3q2+1", c2, {q1 * q1 * q1 + q1, q2}));
        out.push_back(named_map("det_q1", c2, {q1, q1 * q2}));
        out.push_back(named_map("det_q2", c2, {q1 * q2, q2}));
        out.push_back(named_map("mutual_quad", c2, {q1 + q2 * q2, q2 + q1 * q1}));
        out.push_back(named_map("shift_minus", c2, {q1 - q2 * q2, q2}));
    }
    {
        auto c3 = plain_context({"q1", "q2", "q3"});
        Scalar q1 = Scalar::coordinate(c3, 0), q2 = Scalar::coordinate(c3, 1),
               q3 = Scalar::coordinate(c3, 2);
        out.push_back(named_map("id_3d", c3, {q1, q2, q3}));
        out.push_back(named_map("triangular_3d", c3, {q1, q2 + q1 * q1, q3 + q2 * q2}));
        out.push_back(named_map("linear_3d", c3, {q1 + q2, q2 + q3, q3}));
        out.push_back(
            named_map("mixed_3d", c3, {q1 + q2, q2 + (q1 + q2) * (q1 + q2), q3 + q1 * q2}));
    }
    {
        auto pol = polar_context();
        PointMap m = polar_map(pol);
        auto spec = std::make_shared<AlgebraSpec>(AlgebraSpec::weyl_over(pol));
        out.push_back({"polar", m, spec, plain_context({"x", "y"})});
    }
    return out;
}

/// Tame maps with polynomial inverses of degree <= 4, for the inverse-search
/// harness.
inline std::vector<NamedMap> tame_corpus() {
    std::vector<NamedMap> out;
    auto c1 = plain_context({"q"});
    Scalar q = Scalar::coordinate(c1, 0);
    out.push_back(named_map("t_affine", c1, {q * Scalar::constant(c1, 2) + Scalar::one(c1)}));
    auto c2 = plain_context({"q1", "q2"});
    Scalar q1 = Scalar::coordinate(c2, 0), q2 = Scalar::coordinate(c2, 1);
    out.push_back(named_map("t_shear", c2, {q1 + q2, q2}));
    out.push_back(named_map("t_linear", c2, {q1 * Scalar::constant(c2, 2) + q2, q1 + q2}));
    out.push_back(named_map("t_tri_quad", c2, {q1, q2 + q1 * q1}));
    out.push_back(named_map("t_tri_cubic", c2, {q1 + q2 * q2 * q2, q2}));
    out.push_back(named_map("t_tri_deg3", c2, {q1, q2 + q1 * q1 * q1}));
    out.push_back(named_map("t_lin_tri", c2, {q1 + q2 + q1 * q1, q2 + q1 * q1}));
    out.push_back(named_map("t_tri_lin", c2, {q1 + q2, q2 + (q1 + q2) * (q1 + q2)}));
    out.push_back(named_map("t_minus", c2, {q1 - q2 * q2, q2}));
    auto c3 = plain_context({"q1", "q2", "q3"});
    Scalar r1 = Scalar::coordinate(c3, 0), r2 = Scalar::coordinate(c3, 1),
           r3 = Scalar::coordinate(c3, 2);
    out.push_back(named_map("t_tri_3d", c3, {r1, r2 + r1 * r1, r3 + r2 * r2}));
    return out;
}

// ---------------------------------------------------------------------------
// The property suite. Sizes are chosen so a full run stays quick; the
// acceptance binary reruns the acceptance-critical ones at their spec sizes.
// ---------------------------------------------------------------------------

struct CheckLine {
    std::string name;
    bool pass;
    std::string detail;
};

class Suite {
public:
    std::vector<CheckLine> lines;

    void check(const std::string &name, bool pass, const std::string &detail = "") {
        lines.push_back({name, pass, detail});
    }
    bool all_pass() const {
        for (auto &l : lines)
            if (!l.pass) return false;
        return true;
    }
};

inline void suite_scalars(Suite &s) {
    Rng rng(101);
    auto pol = polar_context();
    bool field_laws = true, mixed = true, leibniz = true, roundtrip = true;
    for (int it = 0; it < 40; ++it) {
        Scalar a = random_scalar(pol, rng, 3, 3, true);
        Scalar b = random_scalar(pol, rng, 3, 3, true);
        Scalar c = random_scalar(pol, rng, 2, 2);
        if (!((a + b) + c == a + (b + c))) field_laws = false;
        if (!(a * (b + c) == a * b + a * c)) field_laws = false;
        if (!a.is_zero() && !(a / a == Scalar::one(pol))) field_laws = false;
        if (!(a.diff(0).diff(1) == a.diff(1).diff(0))) mixed = false;
        if (!((a * b).diff(1) == a.diff(1) * b + a * b.diff(1))) leibniz = false;
        if (!b.is_zero() && !((a / b) * b == a)) roundtrip = false;
    }
    s.check("scalar field laws", field_laws);
    s.check("scalar mixed partials commute", mixed);
    s.check("scalar Leibniz rule", leibniz);
    s.check("scalar div/mul round trip", roundtrip);

    Scalar c = Scalar::variable(pol, pol->vars()->index_of("c"));
    Scalar sn = Scalar::variable(pol, pol->vars()->index_of("s"));
    s.check("polar: s^2 + c^2 reduces to 1", sn * sn + c * c == Scalar::one(pol));
    s.check("polar: d(s^2 + c^2)/dtheta = 0", (sn * sn + c * c).diff(1).is_zero());
    s.check("polar: rules locally confluent", pol->locally_confluent());
    bool reduce_compat = true;
    for (int it = 0; it < 20; ++it) {
        MultiPoly a = random_poly(pol->vars(), rng, 4, 4);
        MultiPoly b = random_poly(pol->vars(), rng, 4, 4);
        if (!(pol->reduce(pol->reduce(a)) == pol->reduce(a))) reduce_compat = false;
        if (!(pol->reduce(a * b) == pol->reduce(pol->reduce(a) * pol->reduce(b))))
            reduce_compat = false;
    }
    s.check("reduce idempotent and multiplicative", reduce_compat);
}

inline void suite_ncalg(Suite &s) {
    Rng rng(202);
    auto w2 = AlgebraSpec::weyl_polynomial(2);
    bool confluent = true;
    for (int it = 0; it < 60; ++it) {
        std::vector<std::pair<Scalar, Word>> raw;
        int terms = static_cast<int>(rng.uniform(1, 3));
        for (int t = 0; t < terms; ++t) {
            Word w;
            unsigned len = static_cast<unsigned>(rng.uniform(0, 6));
            for (unsigned k = 0; k < len; ++k)
                w.push_back(static_cast<uint32_t>(rng.uniform(0, 3)));
            raw.emplace_back(Scalar::constant(w2.context(), rng.small_rational()), w);
        }
        NCPoly direct = normalize(raw, w2);
        NCPoly random_order = oracle_normalize(raw, w2, &rng);
        if (!(direct == random_order)) confluent = false;
    }
    s.check("normalize agrees with randomized-order rewriting", confluent);

    bool assoc = true, jacobi = true;
    for (int it = 0; it < 25; ++it) {
        NCPoly a = random_ncpoly(w2, rng, 3, 3);
        NCPoly b = random_ncpoly(w2, rng, 3, 3);
        NCPoly c = random_ncpoly(w2, rng, 2, 2);
        if (!(nc_mul(nc_mul(a, b, w2), c, w2) == nc_mul(a, nc_mul(b, c, w2), w2))) assoc = false;
        NCPoly j = commutator(commutator(a, b, w2), c, w2) +
                   commutator(commutator(b, c, w2), a, w2) +
                   commutator(commutator(c, a, w2), b, w2);
        if (!j.is_zero()) jacobi = false;
    }
    s.check("nc_mul associative", assoc);
    s.check("Jacobi identity", jacobi);

    // ordered-power identity for [u_i, u_j] = h c, i after j in the order:
    // u_i^n/n! u_j^m/m! = sum_s (h c)^s/s! u_j^{m-s}/(m-s)! u_i^{n-s}/(n-s)!
    auto ctx = plain_context({});
    Rational cval(2);
    auto cc = AlgebraSpec::constant_commutator(
        ctx, {"a", "b"}, {{Rational(0), -cval}, {cval, Rational(0)}});
    const Scalar h = Scalar::h(ctx);
    bool ordered = true;
    for (unsigned n = 0; n <= 6 && ordered; ++n) {
        for (unsigned m = 0; m <= 6 && ordered; ++m) {
            Word lhs_word;
            for (unsigned k = 0; k < n; ++k) lhs_word.push_back(1);
            for (unsigned k = 0; k < m; ++k) lhs_word.push_back(0);
            NCPoly lhs = normalize({{Scalar::one(ctx), lhs_word}}, cc);
            NCPoly rhs(ctx);
            for (unsigned ss = 0; ss <= std::min(n, m); ++ss) {
                Word wrd;
                for (unsigned k = 0; k < m - ss; ++k) wrd.push_back(0);
                for (unsigned k = 0; k < n - ss; ++k) wrd.push_back(1);
                Rational coef = factorial(n) * factorial(m) /
                                (factorial(ss) * factorial(m - ss) * factorial(n - ss)) *
                                rational_pow(cval, ss);
                rhs.add_term(wrd, Scalar::constant(ctx, coef) * h.pow(ss));
            }
            if (!(lhs == rhs)) ordered = false;
        }
    }
    s.check("ordered-power identity, n,m <= 6", ordered);

    // the two Weyl representations agree under the canonical embedding
    auto ccw = AlgebraSpec::weyl_polynomial(2);
    auto dctx = plain_context({"q1", "q2"});
    auto dw = AlgebraSpec::weyl_over(dctx);
    bool agree = true;
    for (int it = 0; it < 20; ++it) {
        NCPoly a = random_ncpoly(ccw, rng, 4, 3, true);
        NCPoly b = random_ncpoly(ccw, rng, 4, 3, true);
        NCPoly prod_cc = nc_mul(a, b, ccw);
        NCPoly prod_d = nc_mul(weyl_cc_to_diffop(a, ccw, dw), weyl_cc_to_diffop(b, ccw, dw), dw);
        if (!(weyl_cc_to_diffop(prod_cc, ccw, dw) == prod_d)) agree = false;
    }
    s.check("Weyl cc and diffop representations agree", agree);
}

inline void suite_calculus(Suite &s) {
    Rng rng(303);
    auto w2 = AlgebraSpec::weyl_polynomial(2);
    bool quotient_ok = true, op1 = true, mixed = true, pairing = true, leibniz = true;
    for (int it = 0; it < 20; ++it) {
        // partial is well-defined on the quotient: raw vs normalized input
        std::vector<std::pair<Scalar, Word>> raw;
        Word w;
        unsigned len = static_cast<unsigned>(rng.uniform(1, 5));
        for (unsigned k = 0; k < len; ++k) w.push_back(static_cast<uint32_t>(rng.uniform(0, 3)));
        raw.emplace_back(Scalar::one(w2.context()), w);
        size_t gk = static_cast<size_t>(rng.uniform(0, 3));
        std::vector<std::pair<Scalar, Word>> deleted;
        for (size_t t = 0; t < w.size(); ++t) {
            if (w[t] != gk) continue;
            Word d = w;
            d.erase(d.begin() + static_cast<long>(t));
            deleted.emplace_back(Scalar::one(w2.context()), d);
        }
        NCPoly pre = normalize(deleted, w2);
        NCPoly post = partial(normalize(raw, w2), gk, w2);
        if (!(pre == post)) quotient_ok = false;

        NCPoly H = random_ncpoly(w2, rng, 4, 3);
        NCPoly one = NCPoly::from_scalar(Scalar::one(w2.context()));
        for (size_t k = 0; k < 4; ++k)
            if (!(op_partial(H, k, one, w2) == partial(H, k, w2))) op1 = false;
        if (!(partial(partial(H, 0, w2), 3, w2) == partial(partial(H, 3, w2), 0, w2)))
            mixed = false;

        DerivationSpec X;
        for (size_t k = 0; k < 4; ++k) X.images.push_back(random_ncpoly(w2, rng, 2, 2));
        if (!(pair_form(differential(H, w2), X, w2) == apply_derivation(X, H, w2)))
            pairing = false;
        NCPoly A = random_ncpoly(w2, rng, 3, 2), B = random_ncpoly(w2, rng, 3, 2);
        NCPoly lhs = apply_derivation(X, nc_mul(A, B, w2), w2);
        NCPoly rhs = nc_mul(apply_derivation(X, A, w2), B, w2) +
                     nc_mul(A, apply_derivation(X, B, w2), w2);
        if (!(lhs == rhs)) leibniz = false;
    }
    s.check("partial well-defined on the quotient", quotient_ok);
    s.check("op_partial at 1 equals partial", op1);
    s.check("mixed partials commute", mixed);
    s.check("<dH, X> = X(H)", pairing);
    s.check("derivations obey Leibniz", leibniz);

    // Euler theorem on homogeneous elements, operator reading
    auto fr = AlgebraSpec::free_algebra(plain_context({}), {"u1", "u2", "u3"});
    bool euler = true;
    for (int it = 0; it < 15; ++it) {
        unsigned deg = static_cast<unsigned>(rng.uniform(1, 5));
        NCPoly H(fr.context());
        for (int t = 0; t < 3; ++t) {
            Word w;
            for (unsigned k = 0; k < deg; ++k)
                w.push_back(static_cast<uint32_t>(rng.uniform(0, 2)));
            H.add_term(w, Scalar::constant(fr.context(), rng.small_rational()));
        }
        NCPoly lhs(fr.context());
        for (size_t k = 0; k < 3; ++k)
            lhs += op_partial(H, k, NCPoly::generator(fr, k), fr);
        NCPoly rhs = H.scaled(Scalar::constant(fr.context(), Rational(deg)));
        if (!(lhs == rhs)) euler = false;
    }
    s.check("Euler theorem (operator reading)", euler);
    {
        // the left-multiplication reading fails already on H = u1 u2
        NCPoly u1 = NCPoly::generator(fr, 0), u2 = NCPoly::generator(fr, 1);
        NCPoly H = nc_mul(u1, u2, fr);
        NCPoly left_reading = nc_mul(u1, partial(H, 0, fr), fr) + nc_mul(u2, partial(H, 1, fr), fr);
        s.check("left-multiplication Euler reading fails on u1 u2",
                !(left_reading == H.scaled(Scalar::constant(fr.context(), Rational(2)))));
    }

    // ad_{u_i}(H) = sum_k h c_ik dH/du_k in a constant-commutator algebra
    auto ctx = plain_context({});
    auto cc = AlgebraSpec::constant_commutator(
        ctx, {"a", "b", "c"},
        {{Rational(0), Rational(1), Rational(2)},
         {Rational(-1), Rational(0), Rational(-3)},
         {Rational(-2), Rational(3), Rational(0)}});
    const Scalar h = Scalar::h(ctx);
    bool ad_ok = true, ideal_ok = true;
    for (int it = 0; it < 15; ++it) {
        NCPoly H = random_ncpoly(cc, rng, 4, 3);
        for (size_t i = 0; i < 3; ++i) {
            NCPoly lhs = ad(NCPoly::generator(cc, i), H, cc);
            NCPoly rhs(ctx);
            for (size_t k = 0; k < 3; ++k)
                rhs += partial(H, k, cc).scaled(h * Scalar::constant(ctx, cc.c(i, k)));
            if (!(lhs == rhs)) ad_ok = false;
        }
        // ad_F of phi P psi lands back in the relation ideal: its image in
        // the quotient vanishes because phi P psi already does
        auto frx = AlgebraSpec::free_algebra(ctx, {"a", "b", "c"});
        NCPoly phi = random_ncpoly(frx, rng, 2, 2);
        NCPoly psi = random_ncpoly(frx, rng, 2, 2);
        NCPoly F = random_ncpoly(frx, rng, 2, 2);
        NCPoly P(ctx);  // P = ab - ba - h c_ab
        P.add_term(Word{0, 1}, Scalar::one(ctx));
        P.add_term(Word{1, 0}, -Scalar::one(ctx));
        P.add_term(Word{}, -h * Scalar::constant(ctx, cc.c(0, 1)));
        NCPoly elem = nc_mul(nc_mul(phi, P, frx), psi, frx);
        NCPoly moved = ad(F, elem, frx);
        std::vector<std::pair<Scalar, Word>> image;
        for (auto &[wd, sc] : moved.terms()) image.emplace_back(sc, wd);
        if (!normalize(image, cc).is_zero()) ideal_ok = false;
    }
    s.check("ad_{u_i} identity with h-scaled c-table", ad_ok);
    s.check("ad preserves the relation ideal", ideal_ok);

    // chain rule
    auto fr2 = AlgebraSpec::free_algebra(plain_context({}), {"x1", "x2"});
    bool chain = true;
    for (int it = 0; it < 15; ++it) {
        NCPoly H = random_ncpoly(fr2, rng, 3, 3);
        std::vector<NCPoly> images{random_ncpoly(fr2, rng, 2, 2), random_ncpoly(fr2, rng, 2, 2)};
        NCPoly x = random_ncpoly(fr2, rng, 2, 2);
        size_t alpha = static_cast<size_t>(rng.uniform(0, 1));
        if (!chain_rule_check(H, fr2, images, fr2, alpha, x)) chain = false;
    }
    s.check("operator chain rule", chain);

    // cyclic derivative congruence via the necklace functional
    bool cyc = true;
    for (int it = 0; it < 15; ++it) {
        NCPoly F = random_ncpoly(fr2, rng, 4, 3);
        NCPoly chi = random_ncpoly(fr2, rng, 3, 2);
        for (size_t j = 0; j < 2; ++j) {
            NCPoly lhs = op_partial(F, j, chi, fr2);
            NCPoly rhs = nc_mul(cyclic_variational(F, j, fr2), chi, fr2);
            if (!equal_mod_word_commutators(lhs, rhs)) cyc = false;
        }
    }
    s.check("cyclic derivative congruence (mod commutators)", cyc);
}

inline void suite_brackets(Suite &s) {
    Rng rng(404);
    // Heisenberg = Hamilton in both Weyl representations
    bool heis = true;
    for (size_t n = 1; n <= 3; ++n) {
        auto cc = AlgebraSpec::weyl_polynomial(n);
        const Scalar h = Scalar::h(cc.context());
        for (int it = 0; it < 8; ++it) {
            NCPoly H = random_ncpoly(cc, rng, 5, 4);
            for (size_t i = 0; i < n; ++i) {
                NCPoly qi = NCPoly::generator(cc, cc.q_gen(i));
                NCPoly pi = NCPoly::generator(cc, cc.p_gen(i));
                NCPoly dq = commutator(H, qi, cc).scaled(Scalar::one(cc.context()) / h);
                NCPoly dp = commutator(H, pi, cc).scaled(Scalar::one(cc.context()) / h);
                if (!(dq == partial(H, cc.p_gen(i), cc))) heis = false;
                if (!(dp == -partial(H, cc.q_gen(i), cc))) heis = false;
            }
        }
    }
    {
        auto dctx = plain_context({"q1", "q2"});
        auto dw = AlgebraSpec::weyl_over(dctx);
        const Scalar h = Scalar::h(dctx);
        for (int it = 0; it < 8; ++it) {
            NCPoly H = random_ncpoly(dw, rng, 4, 4, false, true);
            for (size_t i = 0; i < 2; ++i) {
                NCPoly qi = NCPoly::from_scalar(Scalar::coordinate(dctx, i));
                NCPoly pi = NCPoly::generator(dw, i);
                NCPoly dq = commutator(H, qi, dw).scaled(Scalar::one(dctx) / h);
                NCPoly dp = commutator(H, pi, dw).scaled(Scalar::one(dctx) / h);
                if (!(dq == partial_momentum(H, i, dw))) heis = false;
                if (!(dp == -partial_coord(H, i, dw))) heis = false;
            }
        }
    }
    s.check("Heisenberg motion = Hamilton motion", heis);

    // classical limit and exact expansions
    bool limit = true, pair_exact = true, theta_exact = true;
    for (size_t n = 1; n <= 2; ++n) {
        auto cc = AlgebraSpec::weyl_polynomial(n);
        auto pv = phase_vars(cc);
        const Scalar h = Scalar::h(cc.context());
        for (int it = 0; it < 10; ++it) {
            NCPoly H = random_ncpoly(cc, rng, n == 1 ? 6 : 4, 4, true);
            NCPoly F = random_ncpoly(cc, rng, n == 1 ? 6 : 4, 4, true);
            NCPoly br = commutator(H, F, cc).scaled(Scalar::one(cc.context()) / h);
            MultiPoly lhs = smbl(br, cc, pv);
            MultiPoly rhs = poisson(smbl(H, cc, pv), smbl(F, cc, pv), pv);
            if (!(lhs == rhs)) limit = false;
            if (!(bracket_expansion_pair(H, F, cc) == br)) pair_exact = false;
            if (!(bracket_expansion_theta(H, F, cc) == br)) theta_exact = false;
        }
    }
    s.check("classical limit of h^-1 [H,F] is the Poisson bracket", limit);
    s.check("paired-operator expansion is exact", pair_exact);
    {
        Rng trng(405);
        for (int it = 0; it < 10; ++it) {
            size_t m = static_cast<size_t>(trng.uniform(2, 3));
            std::vector<std::vector<Rational>> c(m, std::vector<Rational>(m, Rational(0)));
            for (size_t i = 0; i < m; ++i)
                for (size_t j = i + 1; j < m; ++j) {
                    Rational v(trng.uniform(-2, 2));
                    c[i][j] = v;
                    c[j][i] = -v;
                }
            std::vector<std::string> gens;
            for (size_t i = 0; i < m; ++i) gens.push_back("u" + std::to_string(i + 1));
            auto ctx = plain_context({});
            auto cc = AlgebraSpec::constant_commutator(ctx, gens, c);
            const Scalar h = Scalar::h(ctx);
            NCPoly H = random_ncpoly(cc, trng, 4, 4, true);
            NCPoly F = random_ncpoly(cc, trng, 4, 4, true);
            NCPoly br = commutator(H, F, cc).scaled(Scalar::one(ctx) / h);
            if (!(bracket_expansion_theta(H, F, cc) == br)) theta_exact = false;
        }
    }
    s.check("theta expansion is exact", theta_exact);

    // theta table basics
    {
        std::vector<std::vector<Rational>> c{{Rational(0), Rational(1)},
                                             {Rational(-1), Rational(0)}};
        ThetaTable th = theta_table(c, 2);
        bool ok = th.get({1, 0}, {0, 1}) == 1 && th.get({0, 1}, {1, 0}) == -1 &&
                  th.get({2, 0}, {0, 2}) == 1 && th.get({1, 1}, {1, 1}) == -2 &&
                  th.get({0, 2}, {2, 0}) == 1 && th.get({2, 0}, {2, 0}) == 0;
        s.check("theta coefficients at s = 1, 2", ok);
    }

    // star product, dagger, symmetric form
    auto w1 = AlgebraSpec::weyl_polynomial(2);
    auto pv = phase_vars(w1);
    bool star_mul = true, star_assoc = true, dag_ok = true, sym = true;
    for (int it = 0; it < 12; ++it) {
        MultiPoly a = random_poly(pv.table, rng, 3, 3);
        MultiPoly b = random_poly(pv.table, rng, 3, 3);
        MultiPoly c = random_poly(pv.table, rng, 2, 2);
        if (!(normal_quantize(star_normal(a, b, pv), w1, pv) ==
              nc_mul(normal_quantize(a, w1, pv), normal_quantize(b, w1, pv), w1)))
            star_mul = false;
        if (!(star_normal(star_normal(a, b, pv), c, pv) ==
              star_normal(a, star_normal(b, c, pv), pv)))
            star_assoc = false;
        NCPoly H = random_ncpoly(w1, rng, 3, 3);
        NCPoly F = random_ncpoly(w1, rng, 3, 3);
        if (!(dagger(dagger(H, w1), w1) == H)) dag_ok = false;
        if (!(dagger(nc_mul(H, F, w1), w1) == nc_mul(dagger(F, w1), dagger(H, w1), w1)))
            dag_ok = false;
        if (!(symmetric_form(H, F, w1) == symmetric_form(F, H, w1))) sym = false;
    }
    s.check("normal_quantize intertwines star with nc_mul", star_mul);
    s.check("star product associative", star_assoc);
    s.check("dagger is an antiinvolution", dag_ok);
    s.check("symmetric form is symmetric", sym);

    // res-form differential-algebra symmetry with constructive witness
    bool witness_ok = true;
    for (int it = 0; it < 10; ++it) {
        NCPoly H = random_ncpoly(w1, rng, 4, 3, true);
        NCPoly F = random_ncpoly(w1, rng, 4, 3, true);
        MultiPoly lhs = q_part_symbol(res_form(H, F, w1), w1, pv);
        MultiPoly rhs = q_part_symbol(res_form(F, H, w1), w1, pv);
        auto g = divergence_witness(lhs, rhs, pv);
        MultiPoly back(pv.table);
        for (size_t i = 0; i < g.size(); ++i) back += g[i].formal_diff(pv.q(i));
        if (!(back == lhs - rhs)) witness_ok = false;
    }
    s.check("res-form symmetric up to divergences (witness checked)", witness_ok);
}

inline void suite_canon(Suite &s) {
    auto corpus = test_map_corpus();
    bool right_ok = true, left_ok = true, gauge_ok = true, classical_ok = true;
    bool psi_ok = true, diff66_ok = true, gld_ok = true, dag_mech = true, swap_ok = true;
    bool constdet_ok = true;
    Rng rng(506);
    for (auto &nm : corpus) {
        const auto &ctx = nm.map.ctx;
        size_t n = nm.map.targets.size();
        JacobianMatrix J = jacobian(nm.map);
        if (!check_canonical_quantum(lift_right(nm.map, nm.spec)).canonical) right_ok = false;
        if (!check_canonical_quantum(lift_left(nm.map, nm.spec)).canonical) left_ok = false;
        Scalar g = random_scalar(ctx, rng, 2, 2);
        if (!check_canonical_quantum(gauge_lift(nm.map, g, nm.spec)).canonical) gauge_ok = false;
        if (!check_canonical_classical(classical_lift(nm.map, nm.spec)).canonical)
            classical_ok = false;
        for (auto &d : psi_defect(nm.map, *nm.spec))
            if (!d.is_zero()) psi_ok = false;
        // right minus left lift is h (J^{-1}) grad ln det J
        CandidatePair R = lift_right(nm.map, nm.spec);
        CandidatePair L = lift_left(nm.map, nm.spec);
        const Scalar h = Scalar::h(ctx);
        bool nonconst_det = false;
        for (size_t i = 0; i < n; ++i) {
            Scalar expect = Scalar::zero(ctx);
            for (size_t a = 0; a < n; ++a)
                expect += J.inv(a, i) * grad_log_det(J, a, ctx);
            NCPoly diff = R.P[i] - L.P[i];
            if (!(diff == NCPoly::from_scalar(h * expect))) diff66_ok = false;
            if (!expect.is_zero()) nonconst_det = true;
            if (!(grad_log_det_tr(J, i, ctx) == grad_log_det_adj(J, i, ctx))) gld_ok = false;
        }
        // constant-det criterion: lifts coincide iff grad ln det vanishes
        bool lifts_equal = true;
        for (size_t i = 0; i < n; ++i)
            if (!(R.P[i] == L.P[i])) lifts_equal = false;
        if (lifts_equal == nonconst_det) constdet_ok = false;
        // self-adjoint mechanical pair with a random symmetric matrix
        std::vector<std::vector<Scalar>> a(n, std::vector<Scalar>(n, Scalar::zero(nm.target_ctx)));
        for (size_t i = 0; i < n; ++i) {
            a[i][i] = Scalar::one(nm.target_ctx);
            for (size_t j = i + 1; j < n; ++j) {
                a[i][j] = Scalar::constant(nm.target_ctx, rng.small_rational());
                a[j][i] = a[i][j];
            }
        }
        MechanicalPair mech =
            mechanical_lr(nm.map, a, Scalar::zero(nm.target_ctx), nm.target_ctx, nm.spec);
        if (!(dagger(mech.Hlr, *nm.spec) == mech.Hlr)) dag_mech = false;
        if (!(dagger(mech.Hrl, *nm.spec) == mech.Hrl)) dag_mech = false;
        for (size_t i = 0; i < n; ++i)
            if (!(dagger(mech.P_left[i], *nm.spec) == -mech.P_right[i])) swap_ok = false;
        LrDifference d = lr_difference(nm.map, a, nm.target_ctx, nm.spec);
        if (!d.defect.is_zero() || !d.contraction_ok) diff66_ok = false;
    }
    s.check("right lifts quantum canonical over the corpus", right_ok);
    s.check("left lifts quantum canonical over the corpus", left_ok);
    s.check("gauge lifts quantum canonical over the corpus", gauge_ok);
    s.check("classical lifts Poisson canonical over the corpus", classical_ok);
    s.check("Psi defect vanishes over the corpus", psi_ok);
    s.check("lift difference and lr-difference identities", diff66_ok);
    s.check("grad log det: trace and adjugate routes agree", gld_ok);
    s.check("mechanical Hamiltonians self-adjoint", dag_mech);
    s.check("dag(P_left) = -P_right", swap_ok);
    s.check("lifts coincide exactly for constant determinants", constdet_ok);

    bool inverse_ok = true;
    for (auto &nm : tame_corpus()) {
        InverseSearch inv = attempt_inverse(nm.map, 4);
        if (!inv.found || !verify_inverse(nm.map, inv)) inverse_ok = false;
    }
    s.check("tame maps inverted within degree 4", inverse_ok);

    // the psi(h)-gauge family is quantum canonical: P = (1+h) p, Q = q/(1+h)
    {
        auto ctxq = plain_context({"q"});
        auto spec = std::make_shared<AlgebraSpec>(AlgebraSpec::weyl_over(ctxq));
        const Scalar h = Scalar::h(ctxq);
        Scalar psi = Scalar::one(ctxq) + h;
        CandidatePair cand;
        cand.spec = spec;
        NCPoly P(ctxq);
        P.add_term(Word{0}, psi);
        cand.P.push_back(P);
        cand.Q.push_back(NCPoly::from_scalar(Scalar::coordinate(ctxq, 0) / psi));
        s.check("psi(h)-scaled pair is quantum canonical",
                check_canonical_quantum(cand).canonical);
    }

    // nc_jacobian basics: identity map gives identity insertions; the
    // variational matrix abelianizes to the commutative Jacobian
    {
        auto ctx = plain_context({});
        auto fr = std::make_shared<AlgebraSpec>(AlgebraSpec::free_algebra(ctx, {"x1", "x2"}));
        std::vector<NCPoly> Fid{NCPoly::generator(*fr, 0), NCPoly::generator(*fr, 1)};
        NcJacobian Jid = nc_jacobian(Fid, fr);
        NCPoly probe = NCPoly::generator(*fr, 0) + NCPoly::generator(*fr, 1);
        bool id_ok = true;
        for (size_t i = 0; i < 2; ++i)
            for (size_t j = 0; j < 2; ++j) {
                NCPoly got = Jid.op[i][j](probe);
                if (i == j ? !(got == probe) : !got.is_zero()) id_ok = false;
            }
        s.check("nc_jacobian of the identity is the identity insertion", id_ok);

        NCPoly F1 = nc_mul(Fid[0], Fid[1], *fr);
        NcJacobian Jv = nc_jacobian({F1, Fid[1]}, fr);
        s.check("variational entry of x1 x2 w.r.t. x1 is x2",
                Jv.variational[0][0] == Fid[1]);
        // abelianization check on commutative-shadow polynomials
        Rng prng(507);
        bool abel = true;
        auto phase = std::make_shared<VarTable>(std::vector<std::string>{"x1", "x2"});
        for (int it = 0; it < 10; ++it) {
            MultiPoly f = random_poly(phase, prng, 3, 3);
            // symmetrized lift: each monomial becomes the sorted word
            NCPoly lift(ctx);
            for (auto &[m, c] : f.terms()) {
                Word w;
                for (size_t v = 0; v < 2; ++v)
                    for (uint32_t e = 0; e < m.exp[v]; ++e) w.push_back(static_cast<uint32_t>(v));
                lift.add_term(w, Scalar::constant(ctx, c));
            }
            NcJacobian Jf = nc_jacobian({lift, lift}, fr);
            for (size_t j = 0; j < 2; ++j) {
                // abelianize the cyclic derivative
                MultiPoly ab(phase);
                for (auto &[w, sc] : Jf.variational[0][j].terms()) {
                    Mono m(2);
                    for (auto gidx : w) m.exp[gidx] += 1;
                    ab.add_term(m, sc.rational_value());
                }
                if (!(ab == f.formal_diff(static_cast<int>(j)))) abel = false;
            }
        }
        s.check("variational matrix abelianizes to the commutative Jacobian", abel);
    }
}

inline std::vector<CheckLine> run_all() {
    Suite s;
    suite_scalars(s);
    suite_ncalg(s);
    suite_calculus(s);
    suite_brackets(s);
    suite_canon(s);
    return s.lines;
}

}  // namespace weylcalc::selfcheck
