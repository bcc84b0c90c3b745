#pragma once

#include "weylcalc/scalar.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace weylcalc {

enum class AlgebraMode {
    free_algebra,         // no relations between generators
    constant_commutator,  // [u_i, u_j] = h c_ij with constant c
    weyl_diffop,          // momentum generators acting on q-dependent scalars
};

/// Descriptor of a noncommutative algebra over a scalar context. Scalars are
/// central in free and constant-commutator mode; in weyl_diffop mode every
/// generator is a momentum paired with one context coordinate and satisfies
/// p_i f(q) = f(q) p_i + h df/dq_i.
class AlgebraSpec {
public:
    static AlgebraSpec free_algebra(ScalarContextPtr ctx, std::vector<std::string> gens) {
        AlgebraSpec s;
        s.mode_ = AlgebraMode::free_algebra;
        s.ctx_ = std::move(ctx);
        s.gens_ = std::move(gens);
        return s;
    }

    static AlgebraSpec constant_commutator(ScalarContextPtr ctx, std::vector<std::string> gens,
                                           std::vector<std::vector<Rational>> c) {
        AlgebraSpec s;
        s.mode_ = AlgebraMode::constant_commutator;
        s.ctx_ = std::move(ctx);
        s.gens_ = std::move(gens);
        size_t m = s.gens_.size();
        if (c.size() != m) throw Error("commutator table size mismatch");
        for (size_t i = 0; i < m; ++i) {
            if (c[i].size() != m) throw Error("commutator table size mismatch");
            for (size_t j = 0; j < m; ++j)
                if (c[i][j] != -c[j][i]) throw Error("commutator table must be antisymmetric");
        }
        s.c_ = std::move(c);
        return s;
    }

    /// The h-scaled Weyl algebra on q_1..q_N, p_1..p_N as a constant-
    /// commutator algebra ([p_i, q_j] = h delta_ij), q's declared first so
    /// the normal form is the normal quantization.
    static AlgebraSpec weyl_polynomial(size_t n) {
        std::vector<std::string> gens;
        for (size_t i = 0; i < n; ++i) gens.push_back(n == 1 ? "q" : "q" + std::to_string(i + 1));
        for (size_t i = 0; i < n; ++i) gens.push_back(n == 1 ? "p" : "p" + std::to_string(i + 1));
        std::vector<std::vector<Rational>> c(2 * n, std::vector<Rational>(2 * n, Rational(0)));
        for (size_t i = 0; i < n; ++i) {
            c[n + i][i] = Rational(1);   // [p_i, q_i] = h
            c[i][n + i] = Rational(-1);
        }
        AlgebraSpec s = constant_commutator(plain_context({}), std::move(gens), std::move(c));
        s.weyl_n_ = n;
        return s;
    }

    /// Weyl algebra in differential-operator form over a scalar context: one
    /// momentum generator per context coordinate, q-dependence in the scalars.
    static AlgebraSpec weyl_over(ScalarContextPtr ctx, std::vector<std::string> momentum_names = {}) {
        AlgebraSpec s;
        s.mode_ = AlgebraMode::weyl_diffop;
        s.ctx_ = std::move(ctx);
        size_t n = s.ctx_->num_coords();
        if (n == 0) throw Error("weyl algebra needs at least one coordinate");
        if (momentum_names.empty()) {
            for (size_t i = 0; i < n; ++i) {
                const std::string &q = s.ctx_->coord_name(i);
                momentum_names.push_back(n == 1 && q == "q" ? "p" : "p_" + q);
            }
        }
        if (momentum_names.size() != n) throw Error("one momentum per coordinate required");
        s.gens_ = std::move(momentum_names);
        s.weyl_n_ = n;
        return s;
    }

    AlgebraMode mode() const { return mode_; }
    const ScalarContextPtr &context() const { return ctx_; }
    size_t num_gens() const { return gens_.size(); }
    const std::string &gen_name(size_t i) const { return gens_[i]; }
    int gen_index(const std::string &name) const {
        for (size_t i = 0; i < gens_.size(); ++i)
            if (gens_[i] == name) return static_cast<int>(i);
        return -1;
    }
    const Rational &c(size_t i, size_t j) const { return c_[i][j]; }

    /// Degrees of freedom when this is a Weyl algebra (either form), else 0.
    size_t weyl_n() const { return weyl_n_; }
    bool is_weyl() const { return weyl_n_ > 0; }

    /// Weyl generator bookkeeping. In constant-commutator form q_i sits at
    /// index i and p_i at index n+i; in diffop form generator i is p_i.
    size_t q_gen(size_t i) const { return i; }
    size_t p_gen(size_t i) const { return mode_ == AlgebraMode::weyl_diffop ? i : weyl_n_ + i; }

private:
    AlgebraMode mode_ = AlgebraMode::free_algebra;
    ScalarContextPtr ctx_;
    std::vector<std::string> gens_;
    std::vector<std::vector<Rational>> c_;
    size_t weyl_n_ = 0;
};

using AlgebraSpecPtr = std::shared_ptr<const AlgebraSpec>;

/// A word in generator indices.
using Word = std::vector<uint32_t>;

/// Length first, then left-to-right index comparison.
struct WordLess {
    bool operator()(const Word &a, const Word &b) const {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    }
};

/// Sparse noncommutative polynomial: finite map word -> Scalar, zero
/// coefficients never stored. Canonical form (normal words) is maintained by
/// the operations below, not by this container.
class NCPoly {
public:
    using TermMap = std::map<Word, Scalar, WordLess>;

    NCPoly() = default;
    explicit NCPoly(ScalarContextPtr ctx) : ctx_(std::move(ctx)) {}

    static NCPoly zero(ScalarContextPtr ctx) { return NCPoly(std::move(ctx)); }
    static NCPoly from_scalar(const Scalar &s) {
        NCPoly r(s.context());
        r.add_term(Word{}, s);
        return r;
    }
    static NCPoly generator(const AlgebraSpec &spec, size_t i) {
        NCPoly r(spec.context());
        r.add_term(Word{static_cast<uint32_t>(i)}, Scalar::one(spec.context()));
        return r;
    }
    static NCPoly from_word(const ScalarContextPtr &ctx, Word w, const Scalar &coeff) {
        NCPoly r(ctx);
        r.add_term(std::move(w), coeff);
        return r;
    }

    const ScalarContextPtr &context() const { return ctx_; }
    const TermMap &terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    size_t max_word_len() const {
        size_t d = 0;
        for (auto &[w, s] : terms_) d = std::max(d, w.size());
        return d;
    }

    void add_term(const Word &w, const Scalar &s) {
        if (s.is_zero()) return;
        auto it = terms_.find(w);
        if (it == terms_.end()) {
            terms_.emplace(w, s);
        } else {
            it->second += s;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    NCPoly operator-() const {
        NCPoly r(ctx_);
        for (auto &[w, s] : terms_) r.terms_.emplace(w, -s);
        return r;
    }
    NCPoly operator+(const NCPoly &o) const {
        NCPoly r = *this;
        for (auto &[w, s] : o.terms_) r.add_term(w, s);
        return r;
    }
    NCPoly operator-(const NCPoly &o) const {
        NCPoly r = *this;
        for (auto &[w, s] : o.terms_) r.add_term(w, -s);
        return r;
    }
    NCPoly &operator+=(const NCPoly &o) { return *this = *this + o; }
    NCPoly &operator-=(const NCPoly &o) { return *this = *this - o; }

    /// Left multiplication by a scalar (coefficients sit left of the words).
    NCPoly scaled(const Scalar &s) const {
        NCPoly r(ctx_);
        if (s.is_zero()) return r;
        for (auto &[w, t] : terms_) r.add_term(w, s * t);
        return r;
    }

    bool operator==(const NCPoly &o) const {
        if (terms_.size() != o.terms_.size()) return false;
        auto it = terms_.begin();
        auto jt = o.terms_.begin();
        for (; it != terms_.end(); ++it, ++jt) {
            if (it->first != jt->first) return false;
            if (!(it->second == jt->second)) return false;
        }
        return true;
    }
    bool operator!=(const NCPoly &o) const { return !(*this == o); }

private:
    ScalarContextPtr ctx_;
    TermMap terms_;
};

namespace detail {

inline void validate(const NCPoly &x, const AlgebraSpec &spec) {
    if (x.context() != spec.context())
        throw Error("operand does not belong to this algebra (context mismatch)");
    for (auto &[w, s] : x.terms())
        for (auto g : w)
            if (g >= spec.num_gens()) throw Error("operand uses a generator unknown to this algebra");
}

/// weyl_diffop: move a word of momenta through a scalar, collecting the
/// Leibniz corrections: p_i g = g p_i + h dg/dq_i.
inline std::vector<std::pair<Scalar, Word>> push_word_through(const Word &w, const Scalar &g,
                                                              const AlgebraSpec &spec) {
    std::vector<std::pair<Scalar, Word>> acc{{g, Word{}}};
    const Scalar h = Scalar::h(spec.context());
    for (size_t pos = w.size(); pos-- > 0;) {
        uint32_t i = w[pos];
        std::vector<std::pair<Scalar, Word>> next;
        next.reserve(acc.size() * 2);
        for (auto &[s, tail] : acc) {
            Word with = tail;
            with.insert(with.begin(), i);
            next.emplace_back(s, std::move(with));
            Scalar ds = h * s.diff(i);
            if (!ds.is_zero()) next.emplace_back(std::move(ds), tail);
        }
        acc = std::move(next);
    }
    return acc;
}

}  // namespace detail

/// Bring a raw term list into canonical normal form. In constant-commutator
/// mode this repeatedly applies u_i u_j = u_j u_i + h c_ij to the first
/// out-of-order adjacent pair, with an explicit work stack (the h-term is
/// shorter and the swap removes one inversion, so the stack drains). The
/// result is independent of the rewrite order; the randomized-order oracle in
/// the test suite checks that.
inline NCPoly normalize(std::vector<std::pair<Scalar, Word>> raw, const AlgebraSpec &spec) {
    NCPoly out(spec.context());
    for (auto &[s, w] : raw)
        for (auto g : w)
            if (g >= spec.num_gens()) throw Error("normalize: generator index out of range");
    switch (spec.mode()) {
    case AlgebraMode::free_algebra:
        for (auto &[s, w] : raw) out.add_term(w, s);
        return out;
    case AlgebraMode::weyl_diffop:
        for (auto &[s, w] : raw) {
            Word sorted = w;
            std::sort(sorted.begin(), sorted.end());
            out.add_term(sorted, s);
        }
        return out;
    case AlgebraMode::constant_commutator: {
        const Scalar h = Scalar::h(spec.context());
        std::vector<std::pair<Scalar, Word>> stack = std::move(raw);
        while (!stack.empty()) {
            auto [s, w] = std::move(stack.back());
            stack.pop_back();
            if (s.is_zero()) continue;
            size_t k = 0;
            bool sorted = true;
            for (; k + 1 < w.size(); ++k) {
                if (w[k] > w[k + 1]) {
                    sorted = false;
                    break;
                }
            }
            if (sorted) {
                out.add_term(w, s);
                continue;
            }
            uint32_t i = w[k], j = w[k + 1];
            Word swapped = w;
            std::swap(swapped[k], swapped[k + 1]);
            const Rational &cij = spec.c(i, j);
            if (cij != 0) {
                Word shorter = w;
                shorter.erase(shorter.begin() + k, shorter.begin() + k + 2);
                stack.emplace_back(s * h * Scalar::constant(spec.context(), cij), std::move(shorter));
            }
            stack.emplace_back(std::move(s), std::move(swapped));
        }
        return out;
    }
    }
    throw Error("normalize: unknown algebra mode");
}

/// Ring product, normalized.
inline NCPoly nc_mul(const NCPoly &a, const NCPoly &b, const AlgebraSpec &spec) {
    detail::validate(a, spec);
    detail::validate(b, spec);
    if (spec.mode() == AlgebraMode::weyl_diffop) {
        NCPoly out(spec.context());
        for (auto &[wa, sa] : a.terms()) {
            for (auto &[wb, sb] : b.terms()) {
                // (sa wa)(sb wb) = sa (wa sb) wb with wa pushed through sb
                for (auto &[s, mid] : detail::push_word_through(wa, sb, spec)) {
                    Word w = mid;
                    w.insert(w.end(), wb.begin(), wb.end());
                    std::sort(w.begin(), w.end());
                    out.add_term(w, sa * s);
                }
            }
        }
        return out;
    }
    std::vector<std::pair<Scalar, Word>> raw;
    raw.reserve(a.terms().size() * b.terms().size());
    for (auto &[wa, sa] : a.terms()) {
        for (auto &[wb, sb] : b.terms()) {
            Word w = wa;
            w.insert(w.end(), wb.begin(), wb.end());
            raw.emplace_back(sa * sb, std::move(w));
        }
    }
    return normalize(std::move(raw), spec);
}

inline NCPoly commutator(const NCPoly &a, const NCPoly &b, const AlgebraSpec &spec) {
    return nc_mul(a, b, spec) - nc_mul(b, a, spec);
}

inline NCPoly nc_pow(const NCPoly &a, unsigned e, const AlgebraSpec &spec) {
    NCPoly acc = NCPoly::from_scalar(Scalar::one(spec.context()));
    for (unsigned k = 0; k < e; ++k) acc = nc_mul(acc, a, spec);
    return acc;
}

/// Commutative product on the same representation: words concatenate and
/// sort, scalars multiply, no h-corrections. This is the classical shadow
/// used by the Poisson-side checkers.
inline NCPoly mul_classical(const NCPoly &a, const NCPoly &b) {
    NCPoly out(a.context());
    for (auto &[wa, sa] : a.terms()) {
        for (auto &[wb, sb] : b.terms()) {
            Word w = wa;
            w.insert(w.end(), wb.begin(), wb.end());
            std::sort(w.begin(), w.end());
            out.add_term(w, sa * sb);
        }
    }
    return out;
}

/// Embed a normal-form element of the polynomial Weyl algebra (constant-
/// commutator form, q's left) into the diffop form over `target`: the q-part
/// of each word becomes a scalar factor, the p-part stays a word.
inline NCPoly weyl_cc_to_diffop(const NCPoly &x, const AlgebraSpec &cc, const AlgebraSpec &target) {
    if (!cc.is_weyl() || cc.mode() != AlgebraMode::constant_commutator)
        throw Error("embedding source must be a constant-commutator Weyl algebra");
    if (target.mode() != AlgebraMode::weyl_diffop || target.weyl_n() != cc.weyl_n())
        throw Error("embedding target must be a diffop Weyl algebra of the same size");
    size_t n = cc.weyl_n();
    const auto &tctx = target.context();
    NCPoly out(tctx);
    for (auto &[w, s] : x.terms()) {
        // coefficient lives in F[h]; rebuild it over the target context
        if (!s.is_polynomial()) throw Error("embedding expects polynomial coefficients");
        MultiPoly np(tctx->vars());
        for (auto &[m, c] : s.num().terms()) {
            for (size_t v = 1; v < m.exp.size(); ++v)
                if (m.exp[v] != 0) throw Error("embedding expects coefficients in h only");
            Mono tm(tctx->vars()->size());
            tm.exp[0] = m.exp[0];
            np.add_term(tm, c);
        }
        Scalar coeff = Scalar(tctx, np) / Scalar::constant(tctx, s.den().constant_value());
        Word pword;
        for (auto g : w) {
            if (g < n) {
                coeff = coeff * Scalar::coordinate(tctx, g);
            } else {
                pword.push_back(static_cast<uint32_t>(g - n));
            }
        }
        std::sort(pword.begin(), pword.end());
        out.add_term(pword, coeff);
    }
    return out;
}

inline std::string to_string(const NCPoly &x, const AlgebraSpec &spec) {
    if (x.is_zero()) return "0";
    std::vector<const std::pair<const Word, Scalar> *> order;
    for (auto &t : x.terms()) order.push_back(&t);
    std::stable_sort(order.begin(), order.end(), [](auto *a, auto *b) {
        if (a->first.size() != b->first.size()) return a->first.size() > b->first.size();
        return a->first < b->first;
    });
    std::string out;
    bool first = true;
    for (auto *t : order) {
        Scalar s = t->second;
        bool neg = !s.num().is_zero() && s.num().leading_coeff() < 0;
        if (neg) s = -s;
        out += first ? (neg ? "-" : "") : (neg ? " - " : " + ");
        first = false;
        std::string coeff = s.to_string();
        bool print_coeff = true;
        if (!t->first.empty() && coeff == "1") print_coeff = false;
        if (print_coeff) {
            bool parens = s.num().terms().size() > 1 || !s.den().is_one();
            out += parens ? "(" + coeff + ")" : coeff;
            if (!t->first.empty()) out += " ";
        }
        for (size_t k = 0; k < t->first.size(); ++k) {
            if (k) out += " ";
            out += spec.gen_name(t->first[k]);
        }
    }
    return out;
}

}  // namespace weylcalc
