#pragma once

#include "weylcalc/ncalg.hpp"

#include <string>
#include <utility>
#include <vector>

namespace weylcalc {

/// d/de at e=0 of H with u_k replaced by u_k + e (the scalar-valued partial):
/// every occurrence of generator k is deleted, summed over occurrences.
/// Well-defined on normal forms because the derivation preserves the
/// relation ideal.
inline NCPoly partial(const NCPoly &H, size_t k, const AlgebraSpec &spec) {
    if (k >= spec.num_gens()) throw Error("partial: generator index out of range");
    detail::validate(H, spec);
    std::vector<std::pair<Scalar, Word>> raw;
    for (auto &[w, s] : H.terms()) {
        for (size_t t = 0; t < w.size(); ++t) {
            if (w[t] != k) continue;
            Word d = w;
            d.erase(d.begin() + static_cast<long>(t));
            raw.emplace_back(s, std::move(d));
        }
    }
    return normalize(std::move(raw), spec);
}

/// The operator-valued partial applied to an argument: every occurrence of
/// generator k is replaced by x. op_partial(H, k, 1) = partial(H, k).
inline NCPoly op_partial(const NCPoly &H, size_t k, const NCPoly &x, const AlgebraSpec &spec) {
    if (k >= spec.num_gens()) throw Error("op_partial: generator index out of range");
    detail::validate(H, spec);
    detail::validate(x, spec);
    NCPoly out(spec.context());
    for (auto &[w, s] : H.terms()) {
        for (size_t t = 0; t < w.size(); ++t) {
            if (w[t] != k) continue;
            Word pre(w.begin(), w.begin() + static_cast<long>(t));
            Word post(w.begin() + static_cast<long>(t) + 1, w.end());
            NCPoly left = NCPoly::from_word(spec.context(), std::move(pre), s);
            NCPoly right = NCPoly::from_word(spec.context(), std::move(post),
                                             Scalar::one(spec.context()));
            out += nc_mul(nc_mul(left, x, spec), right, spec);
        }
    }
    return out;
}

/// Iterated partials along a multi-index (one entry per generator); the
/// iteration order does not matter since partials commute.
inline NCPoly partial_multi(const NCPoly &H, const std::vector<uint32_t> &sigma,
                            const AlgebraSpec &spec) {
    if (sigma.size() != spec.num_gens())
        throw Error("partial_multi: multi-index must have one entry per generator");
    NCPoly r = H;
    for (size_t k = 0; k < sigma.size(); ++k)
        for (uint32_t c = 0; c < sigma[k]; ++c) r = partial(r, k, spec);
    return r;
}

/// Coordinate partial in a Weyl algebra, in whichever representation: for
/// the constant-commutator form it is the generator partial on q_i, for the
/// diffop form it differentiates the scalar coefficients.
inline NCPoly partial_coord(const NCPoly &H, size_t i, const AlgebraSpec &spec) {
    if (!spec.is_weyl()) throw Error("partial_coord: not a Weyl algebra");
    if (i >= spec.weyl_n()) throw Error("partial_coord: coordinate index out of range");
    if (spec.mode() == AlgebraMode::constant_commutator) return partial(H, spec.q_gen(i), spec);
    NCPoly out(spec.context());
    for (auto &[w, s] : H.terms()) out.add_term(w, s.diff(i));
    return out;
}

/// Momentum partial in a Weyl algebra (occurrence deletion in both forms).
inline NCPoly partial_momentum(const NCPoly &H, size_t i, const AlgebraSpec &spec) {
    if (!spec.is_weyl()) throw Error("partial_momentum: not a Weyl algebra");
    return partial(H, spec.p_gen(i), spec);
}

/// Element of the bimodule of 1-forms: a sum of left * du_k * right triples.
struct OneForm {
    struct Part {
        NCPoly left;
        uint32_t index;
        NCPoly right;
    };
    std::vector<Part> parts;

    OneForm &operator+=(const OneForm &o) {
        parts.insert(parts.end(), o.parts.begin(), o.parts.end());
        return *this;
    }
};

/// A derivation is exactly its list of generator images.
struct DerivationSpec {
    std::vector<NCPoly> images;
};

/// Universal differential d(H): Leibniz across each word, the coefficient
/// kept on the left factor.
inline OneForm differential(const NCPoly &H, const AlgebraSpec &spec) {
    detail::validate(H, spec);
    OneForm omega;
    for (auto &[w, s] : H.terms()) {
        for (size_t t = 0; t < w.size(); ++t) {
            Word pre(w.begin(), w.begin() + static_cast<long>(t));
            Word post(w.begin() + static_cast<long>(t) + 1, w.end());
            omega.parts.push_back(OneForm::Part{
                NCPoly::from_word(spec.context(), std::move(pre), s),
                w[t],
                NCPoly::from_word(spec.context(), std::move(post), Scalar::one(spec.context()))});
        }
    }
    return omega;
}

/// Pairing <sum phi du_k psi, X> = sum phi X(u_k) psi.
inline NCPoly pair_form(const OneForm &omega, const DerivationSpec &X, const AlgebraSpec &spec) {
    if (X.images.size() != spec.num_gens())
        throw Error("pair_form: derivation must give an image for every generator");
    NCPoly out(spec.context());
    for (auto &part : omega.parts) {
        if (part.index >= spec.num_gens()) throw Error("pair_form: bad generator index in 1-form");
        out += nc_mul(nc_mul(part.left, X.images[part.index], spec), part.right, spec);
    }
    return out;
}

/// X(H) = sum_k op_partial(H, k, X(u_k)); satisfies the Leibniz rule and
/// X(H) = <dH, X>.
inline NCPoly apply_derivation(const DerivationSpec &X, const NCPoly &H, const AlgebraSpec &spec) {
    if (X.images.size() != spec.num_gens())
        throw Error("apply_derivation: derivation must give an image for every generator");
    NCPoly out(spec.context());
    for (size_t k = 0; k < spec.num_gens(); ++k) {
        if (X.images[k].is_zero()) continue;
        out += op_partial(H, k, X.images[k], spec);
    }
    return out;
}

/// Inner derivation ad_F = L_F - R_F.
inline NCPoly ad(const NCPoly &F, const NCPoly &H, const AlgebraSpec &spec) {
    return commutator(F, H, spec);
}

/// Substitute images[k] for generator k throughout H; coefficients pass
/// unchanged (both algebras must share the scalar context).
inline NCPoly substitute_generators(const NCPoly &H, const std::vector<NCPoly> &images,
                                    const AlgebraSpec &target) {
    if (H.context() != target.context())
        throw Error("substitute_generators: scalar contexts differ");
    NCPoly out(target.context());
    for (auto &[w, s] : H.terms()) {
        NCPoly t = NCPoly::from_scalar(s);
        for (auto g : w) {
            if (g >= images.size()) throw Error("substitute_generators: missing image");
            t = nc_mul(t, images[g], target);
        }
        out += t;
    }
    return out;
}

namespace detail {

/// op_partial of H with all generators simultaneously substituted: each
/// occurrence of u_k contributes images(prefix) * y * images(suffix).
inline NCPoly op_partial_substituted(const NCPoly &H, size_t k, const std::vector<NCPoly> &images,
                                     const NCPoly &y, const AlgebraSpec &target) {
    NCPoly out(target.context());
    for (auto &[w, s] : H.terms()) {
        for (size_t t = 0; t < w.size(); ++t) {
            if (w[t] != k) continue;
            NCPoly acc = NCPoly::from_scalar(s);
            for (size_t a = 0; a < t; ++a) acc = nc_mul(acc, images[w[a]], target);
            acc = nc_mul(acc, y, target);
            for (size_t b = t + 1; b < w.size(); ++b) acc = nc_mul(acc, images[w[b]], target);
            out += acc;
        }
    }
    return out;
}

}  // namespace detail

/// Checks the chain rule for operator-valued partials on one argument:
/// op_partial(H o u, alpha)(x) against sum_k (op_partial(H, k) composed with
/// op_partial(u_k, alpha))(x), everything written in the phi-algebra.
inline bool chain_rule_check(const NCPoly &H, const AlgebraSpec &u_spec,
                             const std::vector<NCPoly> &u_images, const AlgebraSpec &phi_spec,
                             size_t alpha, const NCPoly &x) {
    if (u_images.size() != u_spec.num_gens())
        throw Error("chain_rule_check: one image per u-generator required");
    if (alpha >= phi_spec.num_gens()) throw Error("chain_rule_check: bad phi index");
    detail::validate(H, u_spec);
    NCPoly composed = substitute_generators(H, u_images, phi_spec);
    NCPoly lhs = op_partial(composed, alpha, x, phi_spec);
    NCPoly rhs(phi_spec.context());
    for (size_t k = 0; k < u_spec.num_gens(); ++k) {
        NCPoly yk = op_partial(u_images[k], alpha, x, phi_spec);
        if (yk.is_zero()) continue;
        rhs += detail::op_partial_substituted(H, k, u_images, yk, phi_spec);
    }
    return lhs == rhs;
}

/// Cyclic (variational) derivative in a free algebra: rotate each occurrence
/// of x_j to the front of its word, delete it, and sum. Defined modulo
/// commutators of words, which is where the defining congruence lives.
inline NCPoly cyclic_variational(const NCPoly &F, size_t j, const AlgebraSpec &spec) {
    if (spec.mode() != AlgebraMode::free_algebra)
        throw Error("cyclic_variational requires a free algebra");
    if (j >= spec.num_gens()) throw Error("cyclic_variational: generator index out of range");
    detail::validate(F, spec);
    NCPoly out(spec.context());
    for (auto &[w, s] : F.terms()) {
        for (size_t t = 0; t < w.size(); ++t) {
            if (w[t] != j) continue;
            Word rot;
            rot.insert(rot.end(), w.begin() + static_cast<long>(t) + 1, w.end());
            rot.insert(rot.end(), w.begin(), w.begin() + static_cast<long>(t));
            out.add_term(rot, s);
        }
    }
    return out;
}

inline std::string to_string(const OneForm &omega, const AlgebraSpec &spec) {
    if (omega.parts.empty()) return "0";
    std::string out;
    for (size_t i = 0; i < omega.parts.size(); ++i) {
        if (i) out += " + ";
        auto &p = omega.parts[i];
        out += "(" + to_string(p.left, spec) + ") d" + spec.gen_name(p.index) + " (" +
               to_string(p.right, spec) + ")";
    }
    return out;
}

}  // namespace weylcalc
