#pragma once

#include "weylcalc/error.hpp"
#include "weylcalc/rational.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace weylcalc {

/// Shared, immutable list of commuting variable names. A MultiPoly refers to
/// one table; two polynomials are compatible iff they share the same table
/// object. Variables declared later are larger in the monomial order.
struct VarTable {
    std::vector<std::string> names;

    explicit VarTable(std::vector<std::string> n = {}) : names(std::move(n)) {}

    int index_of(const std::string &name) const {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }
    size_t size() const { return names.size(); }
};

using VarTablePtr = std::shared_ptr<const VarTable>;

/// Exponent vector; size always matches the variable table.
struct Mono {
    std::vector<uint32_t> exp;

    Mono() = default;
    explicit Mono(size_t nvars) : exp(nvars, 0) {}

    unsigned degree() const {
        unsigned d = 0;
        for (auto e : exp) d += e;
        return d;
    }
    bool is_one() const {
        for (auto e : exp)
            if (e != 0) return false;
        return true;
    }
    bool divides(const Mono &m) const {
        for (size_t i = 0; i < exp.size(); ++i)
            if (exp[i] > m.exp[i]) return false;
        return true;
    }
    Mono times(const Mono &m) const {
        Mono r = *this;
        for (size_t i = 0; i < exp.size(); ++i) r.exp[i] += m.exp[i];
        return r;
    }
    Mono quotient(const Mono &m) const {
        Mono r = *this;
        for (size_t i = 0; i < exp.size(); ++i) r.exp[i] -= m.exp[i];
        return r;
    }
    bool operator==(const Mono &o) const { return exp == o.exp; }
};

/// Degree-lexicographic order: total degree first, ties broken from the
/// highest variable index down (later-declared variables are larger).
struct MonoLess {
    bool operator()(const Mono &a, const Mono &b) const {
        unsigned da = a.degree(), db = b.degree();
        if (da != db) return da < db;
        for (size_t i = a.exp.size(); i-- > 0;)
            if (a.exp[i] != b.exp[i]) return a.exp[i] < b.exp[i];
        return false;
    }
};

/// Sparse multivariate polynomial over Q with exact arithmetic.
class MultiPoly {
public:
    using TermMap = std::map<Mono, Rational, MonoLess>;

    MultiPoly() = default;
    explicit MultiPoly(VarTablePtr table) : table_(std::move(table)) {}

    static MultiPoly zero(VarTablePtr table) { return MultiPoly(std::move(table)); }

    static MultiPoly constant(VarTablePtr table, Rational c) {
        MultiPoly p(std::move(table));
        if (c != 0) p.terms_[Mono(p.table_->size())] = std::move(c);
        return p;
    }

    static MultiPoly variable(VarTablePtr table, int idx, uint32_t power = 1) {
        MultiPoly p(std::move(table));
        Mono m(p.table_->size());
        m.exp[static_cast<size_t>(idx)] = power;
        p.terms_[m] = Rational(1);
        return p;
    }

    static MultiPoly monomial(VarTablePtr table, Mono m, Rational c) {
        MultiPoly p(std::move(table));
        if (c != 0) p.terms_[std::move(m)] = std::move(c);
        return p;
    }

    const VarTablePtr &table() const { return table_; }
    const TermMap &terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    bool is_constant() const {
        return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.is_one());
    }
    Rational constant_value() const {
        if (terms_.empty()) return Rational(0);
        auto it = terms_.find(Mono(table_->size()));
        return it == terms_.end() ? Rational(0) : it->second;
    }
    bool is_one() const { return is_constant() && constant_value() == 1; }

    unsigned degree() const {
        return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
    }
    unsigned degree_in(int var) const {
        unsigned d = 0;
        for (auto &[m, c] : terms_) d = std::max(d, m.exp[static_cast<size_t>(var)]);
        return d;
    }
    bool uses_var(int var) const {
        for (auto &[m, c] : terms_)
            if (m.exp[static_cast<size_t>(var)] != 0) return true;
        return false;
    }

    /// Largest monomial under deg-lex (precondition: nonzero).
    const Mono &leading_mono() const { return terms_.rbegin()->first; }
    const Rational &leading_coeff() const { return terms_.rbegin()->second; }

    void add_term(const Mono &m, const Rational &c) {
        if (c == 0) return;
        auto it = terms_.find(m);
        if (it == terms_.end()) {
            terms_.emplace(m, c);
        } else {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }

    MultiPoly operator-() const {
        MultiPoly r(table_);
        for (auto &[m, c] : terms_) r.terms_[m] = -c;
        return r;
    }
    MultiPoly operator+(const MultiPoly &o) const {
        MultiPoly r = *this;
        for (auto &[m, c] : o.terms_) r.add_term(m, c);
        return r;
    }
    MultiPoly operator-(const MultiPoly &o) const {
        MultiPoly r = *this;
        for (auto &[m, c] : o.terms_) r.add_term(m, -c);
        return r;
    }
    MultiPoly operator*(const MultiPoly &o) const {
        MultiPoly r(table_);
        for (auto &[ma, ca] : terms_)
            for (auto &[mb, cb] : o.terms_) r.add_term(ma.times(mb), ca * cb);
        return r;
    }
    MultiPoly operator*(const Rational &c) const {
        MultiPoly r(table_);
        if (c == 0) return r;
        for (auto &[m, k] : terms_) r.terms_[m] = k * c;
        return r;
    }
    MultiPoly &operator+=(const MultiPoly &o) { return *this = *this + o; }
    MultiPoly &operator-=(const MultiPoly &o) { return *this = *this - o; }
    MultiPoly &operator*=(const MultiPoly &o) { return *this = *this * o; }
    bool operator==(const MultiPoly &o) const { return terms_ == o.terms_; }
    bool operator!=(const MultiPoly &o) const { return !(*this == o); }

    MultiPoly pow(unsigned e) const {
        MultiPoly acc = constant(table_, Rational(1));
        MultiPoly b = *this;
        while (e > 0) {
            if (e & 1u) acc = acc * b;
            b = b * b;
            e >>= 1u;
        }
        return acc;
    }

    /// Formal partial derivative by one table variable.
    MultiPoly formal_diff(int var) const {
        MultiPoly r(table_);
        auto v = static_cast<size_t>(var);
        for (auto &[m, c] : terms_) {
            if (m.exp[v] == 0) continue;
            Mono n = m;
            n.exp[v] -= 1;
            r.add_term(n, c * Rational(m.exp[v]));
        }
        return r;
    }

    /// Antiderivative in one variable (exact over Q).
    MultiPoly formal_integrate(int var) const {
        MultiPoly r(table_);
        auto v = static_cast<size_t>(var);
        for (auto &[m, c] : terms_) {
            Mono n = m;
            n.exp[v] += 1;
            r.add_term(n, c / Rational(n.exp[v]));
        }
        return r;
    }

    /// Substitute a polynomial (over the same table) for one variable.
    MultiPoly substituted(int var, const MultiPoly &image) const {
        MultiPoly r(table_);
        auto v = static_cast<size_t>(var);
        for (auto &[m, c] : terms_) {
            Mono rest = m;
            uint32_t e = rest.exp[v];
            rest.exp[v] = 0;
            MultiPoly t = monomial(table_, rest, c);
            if (e > 0) t = t * image.pow(e);
            r += t;
        }
        return r;
    }

    /// Evaluate through a generic coefficient ring: images[i] substitutes
    /// variable i. Ring needs +, *, pow-by-repeated-mul and a constant lift.
    template <typename Ring, typename ConstLift>
    Ring evaluate(const std::vector<Ring> &images, ConstLift lift) const {
        Ring acc = lift(Rational(0));
        for (auto &[m, c] : terms_) {
            Ring t = lift(c);
            for (size_t i = 0; i < m.exp.size(); ++i)
                for (uint32_t k = 0; k < m.exp[i]; ++k) t = t * images[i];
            acc = acc + t;
        }
        return acc;
    }

    /// gcd of all rational coefficients, positive; 0 for the zero polynomial.
    Rational content() const {
        Rational g(0);
        for (auto &[m, c] : terms_) g = rational_gcd(g, c);
        return g;
    }

    /// Scale to coprime integer coefficients with positive leading coefficient.
    MultiPoly primitive() const {
        if (is_zero()) return *this;
        Rational g = content();
        MultiPoly r = *this * (Rational(1) / g);
        if (r.leading_coeff() < 0) r = -r;
        return r;
    }

    std::string to_string() const;

private:
    VarTablePtr table_;
    TermMap terms_;
};

inline MultiPoly operator*(const Rational &c, const MultiPoly &p) { return p * c; }

/// Exact division: returns nullopt unless divisor divides evenly.
inline std::optional<MultiPoly> exact_divide(const MultiPoly &a, const MultiPoly &b) {
    if (b.is_zero()) throw Error("polynomial division by zero");
    MultiPoly q(a.table());
    MultiPoly r = a;
    while (!r.is_zero()) {
        const Mono &mr = r.leading_mono();
        const Mono &mb = b.leading_mono();
        if (!mb.divides(mr)) return std::nullopt;
        MultiPoly t = MultiPoly::monomial(a.table(), mr.quotient(mb),
                                          r.leading_coeff() / b.leading_coeff());
        q += t;
        r -= t * b;
    }
    return q;
}

namespace detail {

inline int top_var(const MultiPoly &a, const MultiPoly &b) {
    int nv = static_cast<int>(a.table()->size());
    for (int v = nv - 1; v >= 0; --v)
        if (a.uses_var(v) || b.uses_var(v)) return v;
    return -1;
}

/// Coefficient of x^k when the polynomial is read as univariate in x.
inline MultiPoly coeff_in(const MultiPoly &p, int var, uint32_t k) {
    MultiPoly r(p.table());
    auto v = static_cast<size_t>(var);
    for (auto &[m, c] : p.terms()) {
        if (m.exp[v] != k) continue;
        Mono n = m;
        n.exp[v] = 0;
        r.add_term(n, c);
    }
    return r;
}

inline MultiPoly shift_in(const MultiPoly &p, int var, uint32_t k) {
    MultiPoly r(p.table());
    auto v = static_cast<size_t>(var);
    for (auto &[m, c] : p.terms()) {
        Mono n = m;
        n.exp[v] += k;
        r.add_term(n, c);
    }
    return r;
}

/// Pseudo-remainder of a by b, both read as univariate in var.
inline MultiPoly pseudo_rem(MultiPoly a, const MultiPoly &b, int var) {
    unsigned db = b.degree_in(var);
    MultiPoly lb = coeff_in(b, var, db);
    while (!a.is_zero() && a.degree_in(var) >= db) {
        unsigned da = a.degree_in(var);
        MultiPoly la = coeff_in(a, var, da);
        a = a * lb - shift_in(la, var, da - db) * b;
    }
    return a;
}

}  // namespace detail

MultiPoly poly_gcd(const MultiPoly &a, const MultiPoly &b);

namespace detail {

/// Content of p w.r.t. var: gcd of its univariate coefficients.
inline MultiPoly content_in(const MultiPoly &p, int var) {
    MultiPoly g(p.table());
    for (uint32_t k = 0; k <= p.degree_in(var); ++k) {
        MultiPoly c = coeff_in(p, var, k);
        if (c.is_zero()) continue;
        g = poly_gcd(g, c);
        if (g.is_one()) break;
    }
    return g;
}

}  // namespace detail

/// Multivariate gcd over Q, primitive with positive leading coefficient.
/// Primitive PRS in the highest shared variable, recursing on contents.
inline MultiPoly poly_gcd(const MultiPoly &a, const MultiPoly &b) {
    if (a.is_zero()) return b.primitive();
    if (b.is_zero()) return a.primitive();
    if (a.is_constant() || b.is_constant())
        return MultiPoly::constant(a.table(), Rational(1));
    // monomial fast path: componentwise-min monomial dividing every term
    auto mono_gcd_with = [](const Mono &m, const MultiPoly &p) {
        Mono g = m;
        for (auto &[n, c] : p.terms())
            for (size_t i = 0; i < g.exp.size(); ++i) g.exp[i] = std::min(g.exp[i], n.exp[i]);
        return g;
    };
    if (a.terms().size() == 1) {
        Mono g = mono_gcd_with(a.leading_mono(), b);
        return MultiPoly::monomial(a.table(), g, Rational(1));
    }
    if (b.terms().size() == 1) {
        Mono g = mono_gcd_with(b.leading_mono(), a);
        return MultiPoly::monomial(a.table(), g, Rational(1));
    }

    int x = detail::top_var(a, b);
    if (x < 0) return MultiPoly::constant(a.table(), Rational(1));
    if (!a.uses_var(x) || !b.uses_var(x)) {
        // x appears in only one argument: gcd divides the other's x-coefficients
        const MultiPoly &with = a.uses_var(x) ? a : b;
        const MultiPoly &without = a.uses_var(x) ? b : a;
        return poly_gcd(detail::content_in(with, x), without);
    }

    MultiPoly ca = detail::content_in(a, x);
    MultiPoly cb = detail::content_in(b, x);
    MultiPoly ppa = *exact_divide(a, ca);
    MultiPoly ppb = *exact_divide(b, cb);
    MultiPoly cg = poly_gcd(ca, cb);

    MultiPoly u = ppa, v = ppb;
    if (u.degree_in(x) < v.degree_in(x)) std::swap(u, v);
    for (;;) {
        if (v.is_zero()) break;
        if (v.degree_in(x) == 0) {
            // coprime in x; only the content survives
            return cg.primitive();
        }
        MultiPoly r = detail::pseudo_rem(u, v, x);
        u = v;
        if (r.is_zero()) {
            v = r;
        } else {
            v = *exact_divide(r, detail::content_in(r, x));
        }
    }
    return (cg * *exact_divide(u, detail::content_in(u, x))).primitive();
}

inline std::string MultiPoly::to_string() const {
    if (terms_.empty()) return "0";
    // degree descending, then increasing deg-lex
    std::vector<const std::pair<const Mono, Rational> *> order;
    for (auto &t : terms_) order.push_back(&t);
    std::stable_sort(order.begin(), order.end(), [](auto *p, auto *q) {
        unsigned dp = p->first.degree(), dq = q->first.degree();
        if (dp != dq) return dp > dq;
        return MonoLess{}(p->first, q->first);
    });
    std::ostringstream os;
    bool first = true;
    for (auto *t : order) {
        Rational c = t->second;
        bool neg = c < 0;
        if (neg) c = -c;
        if (first) {
            if (neg) os << "-";
            first = false;
        } else {
            os << (neg ? " - " : " + ");
        }
        std::string factors;
        for (size_t i = 0; i < t->first.exp.size(); ++i) {
            uint32_t e = t->first.exp[i];
            if (e == 0) continue;
            if (!factors.empty()) factors += "*";
            factors += table_->names[i];
            if (e > 1) factors += "^" + std::to_string(e);
        }
        if (factors.empty()) {
            os << c.str();
        } else if (c == 1) {
            os << factors;
        } else {
            os << c.str() << "*" << factors;
        }
    }
    return os.str();
}

}  // namespace weylcalc
