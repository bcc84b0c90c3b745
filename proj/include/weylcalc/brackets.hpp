#pragma once

#include "weylcalc/calculus.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace weylcalc {

/// Commutative phase-space variable layout for a Weyl algebra: h at index 0,
/// then the q's, then the p's. Symbols (classical limits, star products)
/// live over this table.
struct PhaseVars {
    VarTablePtr table;
    size_t n = 0;

    int h() const { return 0; }
    int q(size_t i) const { return 1 + static_cast<int>(i); }
    int p(size_t i) const { return 1 + static_cast<int>(n + i); }
};

inline PhaseVars phase_vars(const AlgebraSpec &spec) {
    if (!spec.is_weyl()) throw Error("phase variables exist only for Weyl algebras");
    PhaseVars pv;
    pv.n = spec.weyl_n();
    std::vector<std::string> names;
    names.push_back("h");
    if (spec.mode() == AlgebraMode::weyl_diffop) {
        for (size_t i = 0; i < pv.n; ++i) names.push_back(spec.context()->coord_name(i));
    } else {
        for (size_t i = 0; i < pv.n; ++i) names.push_back(spec.gen_name(spec.q_gen(i)));
    }
    for (size_t i = 0; i < pv.n; ++i) names.push_back(spec.gen_name(spec.p_gen(i)));
    pv.table = std::make_shared<VarTable>(std::move(names));
    return pv;
}

/// Commutative polynomial in (h, q, p).
using CommSymbol = MultiPoly;

/// Poisson bracket {a, b} = sum_i da/dp_i db/dq_i - da/dq_i db/dp_i.
inline CommSymbol poisson(const CommSymbol &a, const CommSymbol &b, const PhaseVars &pv) {
    CommSymbol r(pv.table);
    for (size_t i = 0; i < pv.n; ++i) {
        r += a.formal_diff(pv.p(i)) * b.formal_diff(pv.q(i));
        r -= a.formal_diff(pv.q(i)) * b.formal_diff(pv.p(i));
    }
    return r;
}

namespace detail {

/// Map a coefficient polynomial of the scalar context into phase variables
/// (h stays h, coordinate i becomes q_i); constrained function symbols have
/// no commutative image and are rejected.
inline MultiPoly ctx_poly_to_phase(const MultiPoly &p, const ScalarContext &ctx, const PhaseVars &pv) {
    MultiPoly out(pv.table);
    size_t nc = ctx.num_coords();
    for (auto &[m, c] : p.terms()) {
        Mono t(pv.table->size());
        for (size_t v = 0; v < m.exp.size(); ++v) {
            if (m.exp[v] == 0) continue;
            if (v == 0) {
                t.exp[static_cast<size_t>(pv.h())] = m.exp[v];
            } else if (v <= nc) {
                t.exp[static_cast<size_t>(pv.q(v - 1))] = m.exp[v];
            } else {
                throw Error("no commutative symbol for constrained function symbol '" +
                            ctx.vars()->names[v] + "'");
            }
        }
        out.add_term(t, c);
    }
    return out;
}

inline Scalar phase_q_mono_to_scalar(const Mono &m, const Rational &c, const PhaseVars &pv,
                                     const ScalarContextPtr &ctx) {
    Mono t(ctx->vars()->size());
    t.exp[0] = m.exp[static_cast<size_t>(pv.h())];
    for (size_t i = 0; i < pv.n; ++i)
        t.exp[static_cast<size_t>(ctx->coord_var(i))] = m.exp[static_cast<size_t>(pv.q(i))];
    return Scalar(ctx, MultiPoly::monomial(ctx->vars(), t, c));
}

}  // namespace detail

/// The symbol of H: normal form, h set to zero, words read as commutative
/// monomials. Requires polynomial coefficients.
inline CommSymbol smbl(const NCPoly &H, const AlgebraSpec &spec, const PhaseVars &pv) {
    if (!spec.is_weyl()) throw Error("smbl: not a Weyl algebra");
    detail::validate(H, spec);
    CommSymbol out(pv.table);
    for (auto &[w, s] : H.terms()) {
        if (!s.is_polynomial())
            throw Error("smbl is defined for polynomial coefficients only");
        MultiPoly coeff = detail::ctx_poly_to_phase(s.num(), *spec.context(), pv) *
                          (Rational(1) / s.den().constant_value());
        coeff = coeff.substituted(pv.h(), MultiPoly::zero(pv.table));
        if (coeff.is_zero()) continue;
        Mono wm(pv.table->size());
        for (auto g : w) {
            int var = spec.mode() == AlgebraMode::weyl_diffop
                          ? pv.p(g)
                          : (g < spec.weyl_n() ? pv.q(g) : pv.p(g - spec.weyl_n()));
            wm.exp[static_cast<size_t>(var)] += 1;
        }
        out += MultiPoly::monomial(pv.table, wm, Rational(1)) * coeff;
    }
    return out;
}

/// Normal quantization: each monomial h^k q^a p^b becomes the normal word
/// with the q's left of the p's. Inverse of smbl on h-free symbols; more
/// precisely smbl(normal_quantize(a)) = a|_{h=0}.
inline NCPoly normal_quantize(const CommSymbol &a, const AlgebraSpec &spec, const PhaseVars &pv) {
    if (!spec.is_weyl()) throw Error("normal_quantize: not a Weyl algebra");
    if (a.table() != pv.table) throw Error("normal_quantize: symbol over wrong variables");
    NCPoly out(spec.context());
    for (auto &[m, c] : a.terms()) {
        Word w;
        if (spec.mode() == AlgebraMode::constant_commutator) {
            for (size_t i = 0; i < pv.n; ++i)
                for (uint32_t e = 0; e < m.exp[static_cast<size_t>(pv.q(i))]; ++e)
                    w.push_back(static_cast<uint32_t>(spec.q_gen(i)));
        }
        for (size_t i = 0; i < pv.n; ++i)
            for (uint32_t e = 0; e < m.exp[static_cast<size_t>(pv.p(i))]; ++e)
                w.push_back(static_cast<uint32_t>(spec.p_gen(i)));
        Scalar coeff(spec.context(), MultiPoly::variable(spec.context()->vars(), 0,
                                                         m.exp[static_cast<size_t>(pv.h())]) *
                                         MultiPoly::constant(spec.context()->vars(), c));
        if (spec.mode() == AlgebraMode::weyl_diffop) {
            Mono q(spec.context()->vars()->size());
            for (size_t i = 0; i < pv.n; ++i)
                q.exp[static_cast<size_t>(spec.context()->coord_var(i))] =
                    m.exp[static_cast<size_t>(pv.q(i))];
            coeff = coeff * Scalar(spec.context(),
                                   MultiPoly::monomial(spec.context()->vars(), q, Rational(1)));
        }
        out.add_term(w, coeff);
    }
    return out;
}

/// Normal star product at symbol level: the unique product with
/// normal_quantize(a * b) = normal_quantize(a) . normal_quantize(b).
/// Expanded form: sum over p-multi-indices s of h^|s|/s! (d^s a/dp^s)(d^s b/dq^s),
/// with s! the product of the component factorials.
inline CommSymbol star_normal(const CommSymbol &a, const CommSymbol &b, const PhaseVars &pv) {
    CommSymbol total(pv.table);
    const CommSymbol hp = MultiPoly::variable(pv.table, pv.h());
    struct Frame {
        size_t axis;
        CommSymbol da, db;
        Rational inv_fact;
        unsigned order;
    };
    std::vector<Frame> stack{{0, a, b, Rational(1), 0}};
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (f.axis == pv.n) {
            total += f.da * f.db * f.inv_fact * hp.pow(f.order);
            continue;
        }
        CommSymbol da = f.da, db = f.db;
        Rational inv = f.inv_fact;
        unsigned k = 0;
        for (;;) {
            stack.push_back({f.axis + 1, da, db, inv, f.order + k});
            da = da.formal_diff(pv.p(f.axis));
            db = db.formal_diff(pv.q(f.axis));
            if (da.is_zero() || db.is_zero()) break;
            ++k;
            inv = inv / Rational(k);
        }
    }
    return total;
}

namespace detail {

/// dQ/dP derivative pair used by the paired-operator expansions.
inline NCPoly dP(const NCPoly &H, size_t i, const AlgebraSpec &spec) {
    return partial_momentum(H, i, spec);
}
inline NCPoly dQ(const NCPoly &H, size_t i, const AlgebraSpec &spec) {
    return partial_coord(H, i, spec);
}

/// Momentum degree: longest p-part over the words.
inline size_t p_degree(const NCPoly &H, const AlgebraSpec &spec) {
    size_t d = 0;
    for (auto &[w, s] : H.terms()) {
        size_t k = 0;
        for (auto g : w)
            if (spec.mode() == AlgebraMode::weyl_diffop || g >= spec.weyl_n()) ++k;
        d = std::max(d, k);
    }
    return d;
}

/// (O_HF)^s (HF) = sum over index sequences (i_1..i_s) of the normalized
/// product (d^s H / dp_{i_1}..dp_{i_s}) (d^s F / dq_{i_1}..dq_{i_s}).
inline NCPoly paired_power_term(const NCPoly &H, const NCPoly &F, unsigned s,
                                const AlgebraSpec &spec) {
    struct Frame {
        unsigned depth;
        NCPoly dh, df;
    };
    NCPoly total(spec.context());
    std::vector<Frame> stack{{0, H, F}};
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (f.depth == s) {
            total += nc_mul(f.dh, f.df, spec);
            continue;
        }
        if (f.dh.is_zero() || f.df.is_zero()) continue;
        for (size_t i = 0; i < spec.weyl_n(); ++i)
            stack.push_back({f.depth + 1, dP(f.dh, i, spec), dQ(f.df, i, spec)});
    }
    return total;
}

}  // namespace detail

/// All-orders expansion of h^{-1}[H, F] through the paired operators O_HF,
/// O_FH: sum over s >= 1 of (-h)^{s-1}/s! ((O_HF)^s(HF) - (O_FH)^s(FH)).
/// The series is finite: each application consumes one momentum degree.
inline NCPoly bracket_expansion_pair(const NCPoly &H, const NCPoly &F, const AlgebraSpec &spec) {
    if (!spec.is_weyl()) throw Error("bracket_expansion_pair: not a Weyl algebra");
    detail::validate(H, spec);
    detail::validate(F, spec);
    const Scalar h = Scalar::h(spec.context());
    size_t smax = std::max(detail::p_degree(H, spec), detail::p_degree(F, spec));
    NCPoly total(spec.context());
    Scalar factor = Scalar::one(spec.context());  // (-h)^{s-1}/s!
    for (unsigned s = 1; s <= smax; ++s) {
        factor = factor / Scalar::constant(spec.context(), Rational(s));
        NCPoly term = detail::paired_power_term(H, F, s, spec) -
                      detail::paired_power_term(F, H, s, spec);
        total += term.scaled(factor);
        factor = factor * (-h);
    }
    return total;
}

/// The symmetric bilinear form (H, F) = e^{-h O_HF}(HF) =
/// sum_{s>=0} (-h)^s/s! (O_HF)^s(HF).
inline NCPoly symmetric_form(const NCPoly &H, const NCPoly &F, const AlgebraSpec &spec) {
    if (!spec.is_weyl()) throw Error("symmetric_form: not a Weyl algebra");
    detail::validate(H, spec);
    detail::validate(F, spec);
    const Scalar h = Scalar::h(spec.context());
    size_t smax = detail::p_degree(H, spec);
    NCPoly total(spec.context());
    Scalar factor = Scalar::one(spec.context());  // (-h)^s/s!
    for (unsigned s = 0; s <= smax; ++s) {
        if (s > 0) factor = factor * (-h) / Scalar::constant(spec.context(), Rational(s));
        total += detail::paired_power_term(H, F, s, spec).scaled(factor);
    }
    return total;
}

/// Coefficients of the general constant-commutator expansion: theta_{s,s'}
/// is the coefficient of lambda^s mu^{s'} in <lambda, mu>^|s| with
/// <lambda, mu> = sum c_ij lambda_i mu_j. Nonzero only when |s| = |s'|.
struct ThetaTable {
    size_t m = 0;
    unsigned s_max = 0;
    std::map<std::pair<std::vector<uint32_t>, std::vector<uint32_t>>, Rational> coeff;

    Rational get(const std::vector<uint32_t> &sigma, const std::vector<uint32_t> &sigmap) const {
        auto it = coeff.find({sigma, sigmap});
        return it == coeff.end() ? Rational(0) : it->second;
    }
};

inline ThetaTable theta_table(const std::vector<std::vector<Rational>> &c, unsigned s_max) {
    size_t m = c.size();
    for (size_t i = 0; i < m; ++i) {
        if (c[i].size() != m) throw Error("theta_table: square matrix required");
        for (size_t j = 0; j < m; ++j)
            if (c[i][j] != -c[j][i]) throw Error("theta_table: matrix must be antisymmetric");
    }
    std::vector<std::string> names;
    for (size_t i = 0; i < m; ++i) names.push_back("L" + std::to_string(i));
    for (size_t i = 0; i < m; ++i) names.push_back("M" + std::to_string(i));
    auto table = std::make_shared<VarTable>(std::move(names));
    MultiPoly pairing(table);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j)
            if (c[i][j] != 0)
                pairing += MultiPoly::variable(table, static_cast<int>(i)) *
                           MultiPoly::variable(table, static_cast<int>(m + j)) * c[i][j];
    ThetaTable th;
    th.m = m;
    th.s_max = s_max;
    MultiPoly power = MultiPoly::constant(table, Rational(1));
    for (unsigned s = 1; s <= s_max; ++s) {
        power = power * pairing;
        for (auto &[mono, cf] : power.terms()) {
            std::vector<uint32_t> sigma(m), sigmap(m);
            for (size_t i = 0; i < m; ++i) {
                sigma[i] = mono.exp[i];
                sigmap[i] = mono.exp[m + i];
            }
            th.coeff[{std::move(sigma), std::move(sigmap)}] = cf;
        }
    }
    return th;
}

/// The theta-coefficient expansion of h^{-1}[H, F] in a constant-commutator
/// algebra: sum_{s>=1} (-h)^{s-1}/s! sum_{|sigma|=|sigma'|=s}
/// theta_{sigma sigma'} (d^sigma H)(d^sigma' F).
inline NCPoly bracket_expansion_theta(const NCPoly &H, const NCPoly &F, const AlgebraSpec &spec) {
    if (spec.mode() != AlgebraMode::constant_commutator)
        throw Error("bracket_expansion_theta: constant-commutator algebra required");
    detail::validate(H, spec);
    detail::validate(F, spec);
    size_t m = spec.num_gens();
    unsigned smax = static_cast<unsigned>(std::min(H.max_word_len(), F.max_word_len()));
    std::vector<std::vector<Rational>> c(m, std::vector<Rational>(m));
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j) c[i][j] = spec.c(i, j);
    ThetaTable th = theta_table(c, smax);
    const Scalar h = Scalar::h(spec.context());
    NCPoly total(spec.context());
    std::map<std::vector<uint32_t>, NCPoly> dH, dF;
    for (auto &[key, cf] : th.coeff) {
        auto &[sigma, sigmap] = key;
        unsigned s = 0;
        for (auto e : sigma) s += e;
        if (s == 0 || s > smax) continue;
        auto itH = dH.find(sigma);
        if (itH == dH.end()) itH = dH.emplace(sigma, partial_multi(H, sigma, spec)).first;
        if (itH->second.is_zero()) continue;
        auto itF = dF.find(sigmap);
        if (itF == dF.end()) itF = dF.emplace(sigmap, partial_multi(F, sigmap, spec)).first;
        if (itF->second.is_zero()) continue;
        Scalar fs = Scalar::constant(spec.context(), cf / factorial(s));
        for (unsigned k = 1; k < s; ++k) fs = fs * (-h);
        total += nc_mul(itH->second, itF->second, spec).scaled(fs);
    }
    return total;
}

/// The antiinvolution with q^+ = q, p^+ = -p, h and q-dependent scalars
/// fixed, products reversed.
inline NCPoly dagger(const NCPoly &H, const AlgebraSpec &spec) {
    if (!spec.is_weyl()) throw Error("dagger: not a Weyl algebra");
    detail::validate(H, spec);
    if (spec.mode() == AlgebraMode::constant_commutator) {
        std::vector<std::pair<Scalar, Word>> raw;
        for (auto &[w, s] : H.terms()) {
            Word rev(w.rbegin(), w.rend());
            size_t np = 0;
            for (auto g : w)
                if (g >= spec.weyl_n()) ++np;
            raw.emplace_back(np % 2 ? -s : s, std::move(rev));
        }
        return normalize(std::move(raw), spec);
    }
    // diffop: (f p^a)^+ = (-1)^|a| p^a f, then renormalize
    NCPoly out(spec.context());
    for (auto &[w, s] : H.terms()) {
        Scalar sign = w.size() % 2 ? -Scalar::one(spec.context()) : Scalar::one(spec.context());
        for (auto &[g, tail] : detail::push_word_through(w, s, spec)) {
            Word t = tail;
            std::sort(t.begin(), t.end());
            out.add_term(t, sign * g);
        }
    }
    return out;
}

/// Projection onto the momentum-free part (the words with no p's).
inline NCPoly res(const NCPoly &H, const AlgebraSpec &spec) {
    if (!spec.is_weyl()) throw Error("res: not a Weyl algebra");
    detail::validate(H, spec);
    NCPoly out(spec.context());
    for (auto &[w, s] : H.terms()) {
        bool pfree = true;
        for (auto g : w)
            if (spec.mode() == AlgebraMode::weyl_diffop || g >= spec.weyl_n()) {
                pfree = false;
                break;
            }
        if (pfree) out.add_term(w, s);
    }
    return out;
}

/// Res(H F^+), the differential-algebra bilinear form with values in the
/// momentum-free part.
inline NCPoly res_form(const NCPoly &H, const NCPoly &F, const AlgebraSpec &spec) {
    return res(nc_mul(H, dagger(F, spec), spec), spec);
}

/// Commutative image of a momentum-free element (h and q's only).
inline MultiPoly q_part_symbol(const NCPoly &H, const AlgebraSpec &spec, const PhaseVars &pv) {
    MultiPoly out(pv.table);
    for (auto &[w, s] : H.terms()) {
        if (!s.is_polynomial()) throw Error("q-part must be polynomial");
        MultiPoly coeff = detail::ctx_poly_to_phase(s.num(), *spec.context(), pv) *
                          (Rational(1) / s.den().constant_value());
        Mono wm(pv.table->size());
        for (auto g : w) {
            if (spec.mode() == AlgebraMode::weyl_diffop || g >= spec.weyl_n())
                throw Error("q-part of an element with momenta");
            wm.exp[static_cast<size_t>(pv.q(g))] += 1;
        }
        out += MultiPoly::monomial(pv.table, wm, Rational(1)) * coeff;
    }
    return out;
}

/// Constructive witness for a ~ b (equal modulo divergences): returns g with
/// a - b = sum_i dg_i/dq_i, by integrating the whole difference in q_1.
/// Over polynomials such a witness always exists.
inline std::vector<MultiPoly> divergence_witness(const MultiPoly &a, const MultiPoly &b,
                                                 const PhaseVars &pv) {
    for (auto *p : {&a, &b})
        for (size_t i = 0; i < pv.n; ++i)
            if (p->uses_var(pv.p(i))) throw Error("divergence_witness: q-polynomials required");
    std::vector<MultiPoly> g(pv.n, MultiPoly::zero(pv.table));
    g[0] = (a - b).formal_integrate(pv.q(0));
    return g;
}

}  // namespace weylcalc
