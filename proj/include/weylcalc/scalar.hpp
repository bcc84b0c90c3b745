#pragma once

#include "weylcalc/multipoly.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace weylcalc {

/// One rewrite rule: a monomial rewrites to a polynomial strictly below it
/// in the deg-lex order (so rewriting terminates).
struct RewriteRule {
    Mono lhs;
    MultiPoly rhs;
};

/// The commutative coefficient world: the central parameter h (always
/// variable 0), coordinate symbols, and constrained function symbols
/// carrying a derivative table. Immutable once built.
class ScalarContext {
public:
    /// Collects declarations, then finalize() validates and freezes them.
    /// Derivative entries may be mutually recursive (e.g. cos/sin), which is
    /// why names are fixed before any table entry is written.
    class Builder {
    public:
        Builder &coordinates(const std::vector<std::string> &names) {
            for (auto &n : names) coords_.push_back(n);
            return *this;
        }
        Builder &function_symbol(const std::string &name) {
            funcs_.push_back(name);
            return *this;
        }
        /// Variable table available once all names are declared; derivative
        /// and relation expressions are built against it.
        VarTablePtr vars() {
            if (!table_) {
                std::vector<std::string> names;
                names.push_back("h");
                for (auto &c : coords_) names.push_back(c);
                for (auto &f : funcs_) names.push_back(f);
                table_ = std::make_shared<VarTable>(std::move(names));
            }
            return table_;
        }
        Builder &derivative(const std::string &sym, const std::string &coord, MultiPoly value) {
            dentries_.emplace_back(sym, coord, std::move(value));
            return *this;
        }
        Builder &relation(MultiPoly lhs, MultiPoly rhs) {
            rentries_.emplace_back(std::move(lhs), std::move(rhs));
            return *this;
        }
        std::shared_ptr<const ScalarContext> finalize();

    private:
        std::vector<std::string> coords_, funcs_;
        VarTablePtr table_;
        std::vector<std::tuple<std::string, std::string, MultiPoly>> dentries_;
        std::vector<std::pair<MultiPoly, MultiPoly>> rentries_;
        friend class ScalarContext;
    };

    const VarTablePtr &vars() const { return vars_; }
    size_t num_coords() const { return n_coords_; }
    int h_index() const { return 0; }
    int coord_var(size_t i) const { return 1 + static_cast<int>(i); }
    const std::string &coord_name(size_t i) const { return vars_->names[1 + i]; }
    int coord_index_of(const std::string &name) const {
        for (size_t i = 0; i < n_coords_; ++i)
            if (coord_name(i) == name) return static_cast<int>(i);
        return -1;
    }
    const std::vector<RewriteRule> &rules() const { return rules_; }

    /// Derivative of table variable `var` w.r.t. coordinate `coord`.
    const MultiPoly &var_derivative(int var, size_t coord) const {
        return dtable_[static_cast<size_t>(var)][coord];
    }

    /// Rewrite to the unique normal form under the declared relations.
    /// Terminates because every rule replaces a monomial by strictly smaller
    /// ones; uniqueness relies on the local-confluence check in finalize().
    MultiPoly reduce(MultiPoly p) const {
        if (rules_.empty()) return p;
        bool changed = true;
        while (changed) {
            changed = false;
            for (auto &[m, c] : p.terms()) {
                for (auto &rule : rules_) {
                    if (!rule.lhs.divides(m)) continue;
                    Mono rest = m.quotient(rule.lhs);
                    MultiPoly repl = rule.rhs * MultiPoly::monomial(vars_, rest, c);
                    p.add_term(m, -c);
                    p += repl;
                    changed = true;
                    break;
                }
                if (changed) break;  // term map was modified; restart scan
            }
        }
        return p;
    }

    /// Chain-rule derivative of a polynomial w.r.t. coordinate `coord`,
    /// reduced afterwards.
    MultiPoly diff_poly(const MultiPoly &p, size_t coord) const {
        MultiPoly r(vars_);
        for (size_t v = 0; v < vars_->size(); ++v) {
            if (!p.uses_var(static_cast<int>(v))) continue;
            const MultiPoly &dv = dtable_[v][coord];
            if (dv.is_zero()) continue;
            r += p.formal_diff(static_cast<int>(v)) * dv;
        }
        return reduce(r);
    }

    /// Checks every critical pair of the rule set: for each pair of rules the
    /// lcm of their left-hand monomials must rewrite to the same normal form
    /// via either rule first.
    bool locally_confluent(std::string *diag = nullptr) const {
        for (size_t i = 0; i < rules_.size(); ++i) {
            for (size_t j = i; j < rules_.size(); ++j) {
                Mono lcm(vars_->size());
                for (size_t v = 0; v < lcm.exp.size(); ++v)
                    lcm.exp[v] = std::max(rules_[i].lhs.exp[v], rules_[j].lhs.exp[v]);
                auto one_step = [&](const RewriteRule &r) {
                    return reduce(r.rhs * MultiPoly::monomial(vars_, lcm.quotient(r.lhs), Rational(1)));
                };
                MultiPoly a = one_step(rules_[i]);
                MultiPoly b = one_step(rules_[j]);
                if (!(a == b)) {
                    if (diag) {
                        *diag = "critical pair of rules " + std::to_string(i) + " and " +
                                std::to_string(j) + " does not join";
                    }
                    return false;
                }
            }
        }
        return true;
    }

private:
    ScalarContext() = default;
    VarTablePtr vars_;
    size_t n_coords_ = 0;
    std::vector<std::vector<MultiPoly>> dtable_;  // [var][coord]
    std::vector<RewriteRule> rules_;
};

using ScalarContextPtr = std::shared_ptr<const ScalarContext>;

inline std::shared_ptr<const ScalarContext> ScalarContext::Builder::finalize() {
    auto ctx = std::shared_ptr<ScalarContext>(new ScalarContext());
    ctx->vars_ = vars();
    ctx->n_coords_ = coords_.size();
    size_t nv = ctx->vars_->size();
    size_t nc = coords_.size();
    ctx->dtable_.assign(nv, std::vector<MultiPoly>(nc, MultiPoly::zero(ctx->vars_)));
    // h is constant; each coordinate differentiates to delta
    for (size_t i = 0; i < nc; ++i)
        ctx->dtable_[1 + i][i] = MultiPoly::constant(ctx->vars_, Rational(1));
    for (auto &[sym, coord, value] : dentries_) {
        int v = ctx->vars_->index_of(sym);
        int c = ctx->coord_index_of(coord);
        if (v < 0) throw Error("derivative table: unknown symbol '" + sym + "'");
        if (v <= static_cast<int>(nc)) throw Error("derivative table: '" + sym + "' is not a function symbol");
        if (c < 0) throw Error("derivative table: unknown coordinate '" + coord + "'");
        ctx->dtable_[static_cast<size_t>(v)][static_cast<size_t>(c)] = value;
    }
    for (auto &[lhs, rhs] : rentries_) {
        if (lhs.terms().size() != 1) throw Error("relation left side must be a single monomial");
        Mono m = lhs.leading_mono();
        Rational c = lhs.leading_coeff();
        MultiPoly r = rhs * (Rational(1) / c);
        for (auto &[mr, cr] : r.terms()) {
            if (!MonoLess{}(mr, m))
                throw Error("relation replacement must be strictly below its left side "
                            "in the monomial order (termination)");
        }
        ctx->rules_.push_back(RewriteRule{m, r});
    }
    std::string diag;
    if (!ctx->locally_confluent(&diag))
        throw Error("relation set is not locally confluent: " + diag);
    return ctx;
}

/// The polar-coordinate context of the free-particle example:
/// coordinates r, theta; c = cos theta, s = sin theta with the usual
/// derivative table and the circle relation s^2 -> 1 - c^2.
inline ScalarContextPtr polar_context() {
    ScalarContext::Builder b;
    b.coordinates({"r", "theta"});
    b.function_symbol("c").function_symbol("s");
    auto vars = b.vars();
    int ci = vars->index_of("c"), si = vars->index_of("s");
    b.derivative("c", "theta", -MultiPoly::variable(vars, si));
    b.derivative("s", "theta", MultiPoly::variable(vars, ci));
    b.relation(MultiPoly::variable(vars, si, 2),
               MultiPoly::constant(vars, Rational(1)) - MultiPoly::variable(vars, ci, 2));
    return b.finalize();
}

/// Context with coordinates only (plus h), no relations.
inline ScalarContextPtr plain_context(const std::vector<std::string> &coords) {
    ScalarContext::Builder b;
    b.coordinates(coords);
    return b.finalize();
}

/// Exact rational function num/den over a ScalarContext, kept canonical:
/// both parts relation-reduced, gcd-cancelled, jointly scaled to coprime
/// integer coefficients, denominator leading coefficient positive.
class Scalar {
public:
    Scalar() = default;
    explicit Scalar(ScalarContextPtr ctx)
        : ctx_(std::move(ctx)),
          num_(MultiPoly::zero(ctx_->vars())),
          den_(MultiPoly::constant(ctx_->vars(), Rational(1))) {}
    Scalar(ScalarContextPtr ctx, MultiPoly num)
        : ctx_(std::move(ctx)), num_(std::move(num)),
          den_(MultiPoly::constant(ctx_->vars(), Rational(1))) {
        canonicalize();
    }
    Scalar(ScalarContextPtr ctx, MultiPoly num, MultiPoly den)
        : ctx_(std::move(ctx)), num_(std::move(num)), den_(std::move(den)) {
        canonicalize();
    }

    static Scalar zero(ScalarContextPtr ctx) { return Scalar(std::move(ctx)); }
    static Scalar constant(ScalarContextPtr ctx, const Rational &c) {
        auto vars = ctx->vars();
        return Scalar(std::move(ctx), MultiPoly::constant(vars, c));
    }
    static Scalar one(ScalarContextPtr ctx) { return constant(std::move(ctx), Rational(1)); }
    static Scalar variable(ScalarContextPtr ctx, int var, uint32_t power = 1) {
        auto vars = ctx->vars();
        return Scalar(std::move(ctx), MultiPoly::variable(vars, var, power));
    }
    static Scalar h(ScalarContextPtr ctx) { return variable(std::move(ctx), 0); }
    static Scalar coordinate(ScalarContextPtr ctx, size_t i) {
        int v = ctx->coord_var(i);
        return variable(std::move(ctx), v);
    }

    const ScalarContextPtr &context() const { return ctx_; }
    const MultiPoly &num() const { return num_; }
    const MultiPoly &den() const { return den_; }
    bool is_zero() const { return num_.is_zero(); }
    bool is_polynomial() const { return den_.is_constant(); }
    bool is_rational_constant() const { return num_.is_constant() && den_.is_constant(); }
    Rational rational_value() const { return num_.constant_value() / den_.constant_value(); }

    Scalar operator-() const {
        Scalar r = *this;
        r.num_ = -r.num_;
        r.fix_sign();
        return r;
    }
    Scalar operator+(const Scalar &o) const {
        require_same(o);
        return Scalar(ctx_, num_ * o.den_ + o.num_ * den_, den_ * o.den_);
    }
    Scalar operator-(const Scalar &o) const {
        require_same(o);
        return Scalar(ctx_, num_ * o.den_ - o.num_ * den_, den_ * o.den_);
    }
    Scalar operator*(const Scalar &o) const {
        require_same(o);
        return Scalar(ctx_, num_ * o.num_, den_ * o.den_);
    }
    Scalar operator/(const Scalar &o) const {
        require_same(o);
        if (o.is_zero()) throw Error("scalar division by zero");
        return Scalar(ctx_, num_ * o.den_, den_ * o.num_);
    }
    Scalar &operator+=(const Scalar &o) { return *this = *this + o; }
    Scalar &operator-=(const Scalar &o) { return *this = *this - o; }
    Scalar &operator*=(const Scalar &o) { return *this = *this * o; }
    Scalar &operator/=(const Scalar &o) { return *this = *this / o; }

    /// Semantic equality: cross-multiplied difference reduces to zero. For
    /// relation-free denominators this coincides with representational
    /// equality of the canonical forms.
    bool operator==(const Scalar &o) const {
        if (num_ == o.num_ && den_ == o.den_) return true;
        return ctx_->reduce(num_ * o.den_ - o.num_ * den_).is_zero();
    }
    bool operator!=(const Scalar &o) const { return !(*this == o); }

    /// Derivative w.r.t. coordinate i (quotient rule + context chain data).
    Scalar diff(size_t coord) const {
        if (coord >= ctx_->num_coords()) throw Error("diff: unknown coordinate index");
        MultiPoly dn = ctx_->diff_poly(num_, coord);
        MultiPoly dd = ctx_->diff_poly(den_, coord);
        return Scalar(ctx_, dn * den_ - num_ * dd, den_ * den_);
    }

    Scalar pow(unsigned e) const {
        Scalar acc = one(ctx_);
        Scalar b = *this;
        while (e > 0) {
            if (e & 1u) acc = acc * b;
            b = b * b;
            e >>= 1u;
        }
        return acc;
    }

    /// Substitute h = 0. Errors when the denominator vanishes there.
    Scalar at_h_zero() const {
        MultiPoly n = num_.substituted(0, MultiPoly::zero(ctx_->vars()));
        MultiPoly d = den_.substituted(0, MultiPoly::zero(ctx_->vars()));
        if (d.is_zero()) throw Error("value has a pole at h = 0");
        return Scalar(ctx_, n, d);
    }

    std::string to_string() const {
        if (num_.is_zero()) return "0";
        std::string n = num_.to_string();
        if (den_.is_one()) return n;
        if (num_.terms().size() > 1) n = "(" + n + ")";
        std::string d = den_.to_string();
        if (den_.terms().size() > 1 || needs_parens_as_factor(den_)) d = "(" + d + ")";
        return n + "/" + d;
    }

private:
    static bool needs_parens_as_factor(const MultiPoly &p) {
        // single term: parenthesize when it mixes a non-unit coefficient
        // with variables, or several variables (e.g. 3*q^2, q*r)
        auto &[m, c] = *p.terms().begin();
        int nfac = (c == 1 || c == -1) ? 0 : 1;
        for (auto e : m.exp)
            if (e > 0) ++nfac;
        return nfac > 1 || c < 0;
    }

    void require_same(const Scalar &o) const {
        if (ctx_ != o.ctx_) throw Error("scalar operands come from different contexts");
    }

    void fix_sign() {
        if (!den_.is_zero() && den_.leading_coeff() < 0) {
            num_ = -num_;
            den_ = -den_;
        }
    }

    void canonicalize() {
        num_ = ctx_->reduce(num_);
        den_ = ctx_->reduce(den_);
        if (den_.is_zero()) throw Error("scalar with zero denominator");
        if (num_.is_zero()) {
            den_ = MultiPoly::constant(ctx_->vars(), Rational(1));
            return;
        }
        for (;;) {
            MultiPoly g = poly_gcd(num_, den_);
            if (!g.is_constant()) {
                num_ = *exact_divide(num_, g);
                den_ = *exact_divide(den_, g);
            }
            MultiPoly rn = ctx_->reduce(num_);
            MultiPoly rd = ctx_->reduce(den_);
            bool stable = (rn == num_) && (rd == den_);
            num_ = std::move(rn);
            den_ = std::move(rd);
            if (g.is_constant() && stable) break;
            if (den_.is_zero()) throw Error("scalar with zero denominator");
            if (num_.is_zero()) {
                den_ = MultiPoly::constant(ctx_->vars(), Rational(1));
                return;
            }
        }
        // joint scaling to coprime integer coefficients
        Rational g = rational_gcd(num_.content(), den_.content());
        Rational inv = Rational(1) / g;
        num_ = num_ * inv;
        den_ = den_ * inv;
        fix_sign();
    }

    ScalarContextPtr ctx_;
    MultiPoly num_, den_;
};

/// Substitute each table variable of `p` by the given Scalar (images indexed
/// like the table; h must map to h). Used for composing expressions with a
/// point map.
inline Scalar substitute_poly(const MultiPoly &p, const std::vector<Scalar> &images,
                              const ScalarContextPtr &target) {
    return p.evaluate<Scalar>(images, [&](const Rational &c) { return Scalar::constant(target, c); });
}

}  // namespace weylcalc
