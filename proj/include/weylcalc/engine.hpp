#pragma once

#include "weylcalc/canon.hpp"
#include "weylcalc/parse.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace weylcalc {

/// Commutative symbol value carried through the evaluator.
struct SymbolValue {
    PhaseVars pv;
    MultiPoly poly;
};

using Value = std::variant<Scalar, NCPoly, SymbolValue, OneForm, DerivationSpec>;

struct ReportEntry {
    std::string stmt;
    bool ok = true;
    std::string error;
    std::vector<std::string> output;
    std::vector<std::pair<std::string, bool>> checks;
};

struct Report {
    std::vector<ReportEntry> entries;

    bool all_ok() const {
        for (auto &e : entries) {
            if (!e.ok) return false;
            for (auto &[n, p] : e.checks)
                if (!p) return false;
        }
        return true;
    }
};

inline std::string emit_text(const Report &rep) {
    std::string out;
    for (auto &e : rep.entries) {
        out += "> " + e.stmt + "\n";
        if (!e.ok) out += "ERROR: " + e.error + "\n";
        for (auto &l : e.output) out += l + "\n";
        for (auto &[n, p] : e.checks) out += "CHECK " + n + ": " + (p ? "PASS" : "FAIL") + "\n";
    }
    return out;
}

inline std::string emit_json(const Report &rep) {
    nlohmann::json j;
    j["schema"] = "weylcalc-report/1";
    j["entries"] = nlohmann::json::array();
    for (auto &e : rep.entries) {
        nlohmann::json je;
        je["stmt"] = e.stmt;
        je["ok"] = e.ok;
        if (!e.ok) je["error"] = e.error;
        je["output"] = e.output;
        je["checks"] = nlohmann::json::array();
        for (auto &[n, p] : e.checks) je["checks"].push_back({{"name", n}, {"pass", p}});
        j["entries"].push_back(std::move(je));
    }
    return j.dump(2) + "\n";
}

/// NCPoly as spec'd JSON: a list of {coeff, word}.
inline nlohmann::json ncpoly_json(const NCPoly &x, const AlgebraSpec &spec) {
    nlohmann::json arr = nlohmann::json::array();
    for (auto &[w, s] : x.terms()) {
        nlohmann::json names = nlohmann::json::array();
        for (auto g : w) names.push_back(spec.gen_name(g));
        arr.push_back({{"coeff", s.to_string()}, {"word", names}});
    }
    return arr;
}

/// Script evaluator: owns the context under construction, the active
/// algebra, the current point map and the name bindings. Statements are
/// evaluated in order; a failing statement reports its error and leaves
/// previously established state untouched.
class Engine {
public:
    Engine() = default;

    Report run(const script::Script &s) {
        Report rep;
        for (auto &st : s.statements) rep.entries.push_back(eval_statement(st));
        return rep;
    }

    ReportEntry eval_statement(const script::Statement &st) {
        ReportEntry e;
        e.stmt = st.echo;
        try {
            dispatch(st, e);
        } catch (const Error &err) {
            e.ok = false;
            e.error = err.what();
        }
        return e;
    }

private:
    // ---- context under construction -------------------------------------
    struct Draft {
        std::vector<std::string> coords;
        std::vector<std::string> syms;
        std::vector<std::tuple<std::string, std::string, script::ExprPtr>> diffs;
        std::vector<std::pair<script::ExprPtr, script::ExprPtr>> relations;
    };

    Draft draft_;
    ScalarContextPtr ctx_;
    AlgebraSpecPtr algebra_;
    std::optional<PointMap> map_;
    ScalarContextPtr target_ctx_;
    std::map<std::string, Value> env_;
    long htrunc_ = -1;

    void invalidate_context() {
        ctx_.reset();
        algebra_.reset();
        map_.reset();
        target_ctx_.reset();
        env_.clear();
    }

    const ScalarContextPtr &context() {
        if (!ctx_) {
            ScalarContext::Builder b;
            b.coordinates(draft_.coords);
            for (auto &s : draft_.syms) b.function_symbol(s);
            auto vars = b.vars();
            for (auto &[sym, coord, expr] : draft_.diffs)
                b.derivative(sym, coord, eval_poly_expr(*expr, vars));
            for (auto &[l, r] : draft_.relations)
                b.relation(eval_poly_expr(*l, vars), eval_poly_expr(*r, vars));
            ctx_ = b.finalize();
        }
        return ctx_;
    }

    const AlgebraSpecPtr &algebra() {
        if (!algebra_) throw Error("no algebra declared (use 'algebra weyl ...;' first)");
        return algebra_;
    }

    const PointMap &current_map() {
        if (!map_) throw Error("no point map declared (use 'map ...;' first)");
        return *map_;
    }

    // ---- polynomial mini-evaluator over a bare variable table -----------
    static MultiPoly eval_poly_expr(const script::Expr &e, const VarTablePtr &vars) {
        using script::Expr;
        switch (e.kind) {
        case Expr::Number:
            return MultiPoly::constant(vars, e.number);
        case Expr::Name: {
            int idx = vars->index_of(e.name);
            if (idx < 0) throw Error("unknown symbol '" + e.name + "' in context expression");
            return MultiPoly::variable(vars, idx);
        }
        case Expr::Unary:
            return -eval_poly_expr(*e.args[0], vars);
        case Expr::Binary: {
            if (e.op == '^') {
                long k = integer_exponent(*e.args[1]);
                if (k < 0) throw Error("negative power in a polynomial expression");
                return eval_poly_expr(*e.args[0], vars).pow(static_cast<unsigned>(k));
            }
            MultiPoly a = eval_poly_expr(*e.args[0], vars);
            MultiPoly b = eval_poly_expr(*e.args[1], vars);
            switch (e.op) {
            case '+': return a + b;
            case '-': return a - b;
            case '*': return a * b;
            case '/':
                if (!b.is_constant() || b.is_zero())
                    throw Error("only division by rational constants is allowed here");
                return a * (Rational(1) / b.constant_value());
            }
            throw Error("bad operator");
        }
        default:
            throw Error("this expression form is not allowed in context declarations");
        }
    }

    static long integer_exponent(const script::Expr &e) {
        if (e.kind == script::Expr::Number) {
            if (denominator(e.number) != 1) throw Error("exponent must be an integer");
            return static_cast<long>(numerator(e.number));
        }
        if (e.kind == script::Expr::Unary && e.op == '-') return -integer_exponent(*e.args[0]);
        throw Error("exponent must be an integer literal");
    }

    // ---- scalar evaluator over an arbitrary context ----------------------
    static Scalar eval_scalar_expr(const script::Expr &e, const ScalarContextPtr &ctx) {
        using script::Expr;
        switch (e.kind) {
        case Expr::Number:
            return Scalar::constant(ctx, e.number);
        case Expr::Name: {
            int idx = ctx->vars()->index_of(e.name);
            if (idx < 0) throw Error("unknown symbol '" + e.name + "'");
            return Scalar::variable(ctx, idx);
        }
        case Expr::Unary:
            return -eval_scalar_expr(*e.args[0], ctx);
        case Expr::Binary: {
            if (e.op == '^') {
                long k = integer_exponent(*e.args[1]);
                Scalar b = eval_scalar_expr(*e.args[0], ctx);
                if (k >= 0) return b.pow(static_cast<unsigned>(k));
                return Scalar::one(ctx) / b.pow(static_cast<unsigned>(-k));
            }
            Scalar a = eval_scalar_expr(*e.args[0], ctx);
            Scalar b = eval_scalar_expr(*e.args[1], ctx);
            switch (e.op) {
            case '+': return a + b;
            case '-': return a - b;
            case '*': return a * b;
            case '/': return a / b;
            }
            throw Error("bad operator");
        }
        case Expr::Call:
            if (e.name == "diff" && e.args.size() == 2) {
                Scalar a = eval_scalar_expr(*e.args[0], ctx);
                if (e.args[1]->kind != Expr::Name) throw Error("diff needs a coordinate name");
                int ci = ctx->coord_index_of(e.args[1]->name);
                if (ci < 0) throw Error("unknown coordinate '" + e.args[1]->name + "'");
                return a.diff(static_cast<size_t>(ci));
            }
            throw Error("function '" + e.name + "' is not available in scalar expressions");
        default:
            throw Error("only scalar expressions are allowed here");
        }
    }

    // ---- value helpers ----------------------------------------------------
    NCPoly to_ncpoly(const Value &v) {
        if (auto *s = std::get_if<Scalar>(&v)) return NCPoly::from_scalar(*s);
        if (auto *x = std::get_if<NCPoly>(&v)) return *x;
        throw Error("an algebra element is required here");
    }

    Scalar value_to_scalar(const Value &v) {
        if (auto *s = std::get_if<Scalar>(&v)) return *s;
        if (auto *x = std::get_if<NCPoly>(&v)) {
            if (x->is_zero()) return Scalar::zero(context());
            if (x->terms().size() == 1 && x->terms().begin()->first.empty())
                return x->terms().begin()->second;
        }
        throw Error("a scalar value is required here");
    }

    SymbolValue to_symbol(const Value &v) {
        if (auto *s = std::get_if<SymbolValue>(&v)) return *s;
        PhaseVars pv = phase_vars(*algebra());
        if (auto *s = std::get_if<Scalar>(&v)) {
            if (!s->is_polynomial()) throw Error("cannot convert a rational scalar to a symbol");
            MultiPoly p = detail::ctx_poly_to_phase(s->num(), *context(), pv) *
                          (Rational(1) / s->den().constant_value());
            return {pv, p};
        }
        if (auto *x = std::get_if<NCPoly>(&v)) return {pv, smbl(*x, *algebra(), pv)};
        throw Error("a commutative symbol is required here");
    }

    /// q-polynomial view (h kept) for the divergence machinery.
    SymbolValue to_q_symbol(const Value &v) {
        if (auto *s = std::get_if<SymbolValue>(&v)) return *s;
        PhaseVars pv = phase_vars(*algebra());
        if (auto *s = std::get_if<Scalar>(&v)) {
            if (!s->is_polynomial()) throw Error("polynomial value required");
            MultiPoly p = detail::ctx_poly_to_phase(s->num(), *context(), pv) *
                          (Rational(1) / s->den().constant_value());
            return {pv, p};
        }
        if (auto *x = std::get_if<NCPoly>(&v)) return {pv, q_part_symbol(*x, *algebra(), pv)};
        throw Error("a q-polynomial is required here");
    }

    // ---- expression evaluation -------------------------------------------
    Value eval(const script::Expr &e) {
        using script::Expr;
        switch (e.kind) {
        case Expr::Number:
            return Scalar::constant(context(), e.number);
        case Expr::Name:
            return lookup(e.name);
        case Expr::Unary:
            return negate(eval(*e.args[0]));
        case Expr::Binary:
            return binary(e.op, *e.args[0], *e.args[1]);
        case Expr::Commutator: {
            NCPoly a = to_ncpoly(eval(*e.args[0]));
            NCPoly b = to_ncpoly(eval(*e.args[1]));
            return commutator(a, b, *algebra());
        }
        case Expr::Poisson: {
            SymbolValue a = to_symbol(eval(*e.args[0]));
            SymbolValue b = to_symbol(eval(*e.args[1]));
            return SymbolValue{a.pv, poisson(a.poly, b.poly, a.pv)};
        }
        case Expr::Call:
            return call(e);
        }
        throw Error("bad expression");
    }

    Value lookup(const std::string &name) {
        auto it = env_.find(name);
        if (it != env_.end()) return it->second;
        if (algebra_) {
            int g = algebra_->gen_index(name);
            if (g >= 0) return NCPoly::generator(*algebra_, static_cast<size_t>(g));
        }
        int idx = context()->vars()->index_of(name);
        if (idx >= 0) return Scalar::variable(context(), idx);
        throw Error("unknown identifier '" + name + "'");
    }

    Value negate(Value v) {
        if (auto *s = std::get_if<Scalar>(&v)) return -*s;
        if (auto *x = std::get_if<NCPoly>(&v)) return -*x;
        if (auto *y = std::get_if<SymbolValue>(&v)) return SymbolValue{y->pv, -y->poly};
        throw Error("cannot negate this value");
    }

    Value binary(char op, const script::Expr &lhs_e, const script::Expr &rhs_e) {
        if (op == '^') {
            long k = integer_exponent(rhs_e);
            Value base = eval(lhs_e);
            if (auto *s = std::get_if<Scalar>(&base)) {
                if (k >= 0) return s->pow(static_cast<unsigned>(k));
                return Scalar::one(context()) / s->pow(static_cast<unsigned>(-k));
            }
            if (auto *x = std::get_if<NCPoly>(&base)) {
                if (k < 0) throw Error("negative powers need a scalar base");
                return nc_pow(*x, static_cast<unsigned>(k), *algebra());
            }
            if (auto *y = std::get_if<SymbolValue>(&base)) {
                if (k < 0) throw Error("negative powers need a scalar base");
                return SymbolValue{y->pv, y->poly.pow(static_cast<unsigned>(k))};
            }
            throw Error("cannot raise this value to a power");
        }
        Value a = eval(lhs_e), b = eval(rhs_e);
        // symbol arithmetic wins when either side is a symbol
        if (std::holds_alternative<SymbolValue>(a) || std::holds_alternative<SymbolValue>(b)) {
            SymbolValue x = to_symbol(a), y = to_symbol(b);
            switch (op) {
            case '+': return SymbolValue{x.pv, x.poly + y.poly};
            case '-': return SymbolValue{x.pv, x.poly - y.poly};
            case '*': return SymbolValue{x.pv, x.poly * y.poly};
            case '/':
                if (!y.poly.is_constant() || y.poly.is_zero())
                    throw Error("symbols divide by rational constants only");
                return SymbolValue{x.pv, x.poly * (Rational(1) / y.poly.constant_value())};
            }
        }
        if (std::holds_alternative<NCPoly>(a) || std::holds_alternative<NCPoly>(b)) {
            switch (op) {
            case '+': return to_ncpoly(a) + to_ncpoly(b);
            case '-': return to_ncpoly(a) - to_ncpoly(b);
            case '*':
                if (auto *s = std::get_if<Scalar>(&a)) return to_ncpoly(b).scaled(*s);
                return nc_mul(to_ncpoly(a), to_ncpoly(b), *algebra());
            case '/': {
                Scalar d = value_to_scalar(b);
                if (d.is_zero()) throw Error("division by zero");
                return to_ncpoly(a).scaled(Scalar::one(context()) / d);
            }
            }
        }
        Scalar x = value_to_scalar(a), y = value_to_scalar(b);
        switch (op) {
        case '+': return x + y;
        case '-': return x - y;
        case '*': return x * y;
        case '/': return x / y;
        }
        throw Error("bad operator");
    }

    Value call(const script::Expr &e) {
        const std::string &f = e.name;
        auto arity = [&](size_t n) {
            if (e.args.size() != n)
                throw Error(f + " expects " + std::to_string(n) + " argument(s)");
        };
        auto gen_name_arg = [&](size_t i) -> const std::string & {
            if (e.args[i]->kind != script::Expr::Name)
                throw Error(f + ": argument " + std::to_string(i + 1) + " must be a name");
            return e.args[i]->name;
        };
        if (f == "normalize") {
            arity(1);
            return to_ncpoly(eval(*e.args[0]));
        }
        if (f == "reduce") {
            arity(1);
            return value_to_scalar(eval(*e.args[0]));
        }
        if (f == "diff") {
            arity(2);
            Scalar a = value_to_scalar(eval(*e.args[0]));
            int ci = context()->coord_index_of(gen_name_arg(1));
            if (ci < 0) throw Error("unknown coordinate '" + gen_name_arg(1) + "'");
            return a.diff(static_cast<size_t>(ci));
        }
        if (f == "partial") {
            if (e.args.size() != 2 && e.args.size() != 3) throw Error("partial expects 2 or 3 arguments");
            NCPoly H = to_ncpoly(eval(*e.args[0]));
            const std::string &name = gen_name_arg(1);
            long count = e.args.size() == 3 ? integer_exponent(*e.args[2]) : 1;
            if (count < 0) throw Error("partial: negative order");
            NCPoly r = H;
            int g = algebra()->gen_index(name);
            if (g >= 0) {
                for (long k = 0; k < count; ++k) r = partial(r, static_cast<size_t>(g), *algebra());
                return r;
            }
            int ci = context()->coord_index_of(name);
            if (ci >= 0 && algebra()->mode() == AlgebraMode::weyl_diffop) {
                for (long k = 0; k < count; ++k)
                    r = partial_coord(r, static_cast<size_t>(ci), *algebra());
                return r;
            }
            throw Error("partial: unknown generator or coordinate '" + name + "'");
        }
        if (f == "opartial") {
            arity(3);
            NCPoly H = to_ncpoly(eval(*e.args[0]));
            int g = algebra()->gen_index(gen_name_arg(1));
            if (g < 0) throw Error("opartial: unknown generator");
            NCPoly x = to_ncpoly(eval(*e.args[2]));
            return op_partial(H, static_cast<size_t>(g), x, *algebra());
        }
        if (f == "d") {
            arity(1);
            return differential(to_ncpoly(eval(*e.args[0])), *algebra());
        }
        if (f == "pairform") {
            arity(2);
            Value w = eval(*e.args[0]);
            Value x = eval(*e.args[1]);
            auto *omega = std::get_if<OneForm>(&w);
            auto *X = std::get_if<DerivationSpec>(&x);
            if (!omega || !X) throw Error("pairform expects a 1-form and a derivation");
            return pair_form(*omega, *X, *algebra());
        }
        if (f == "apply") {
            arity(2);
            Value x = eval(*e.args[0]);
            auto *X = std::get_if<DerivationSpec>(&x);
            if (!X) throw Error("apply expects a derivation and an element");
            return apply_derivation(*X, to_ncpoly(eval(*e.args[1])), *algebra());
        }
        if (f == "ad") {
            arity(2);
            return ad(to_ncpoly(eval(*e.args[0])), to_ncpoly(eval(*e.args[1])), *algebra());
        }
        if (f == "cyclic") {
            arity(2);
            NCPoly F = to_ncpoly(eval(*e.args[0]));
            int g = algebra()->gen_index(gen_name_arg(1));
            if (g < 0) throw Error("cyclic: unknown generator");
            return cyclic_variational(F, static_cast<size_t>(g), *algebra());
        }
        if (f == "smbl") {
            arity(1);
            PhaseVars pv = phase_vars(*algebra());
            return SymbolValue{pv, smbl(to_ncpoly(eval(*e.args[0])), *algebra(), pv)};
        }
        if (f == "quantize") {
            arity(1);
            SymbolValue a = to_symbol(eval(*e.args[0]));
            return normal_quantize(a.poly, *algebra(), a.pv);
        }
        if (f == "star") {
            arity(2);
            SymbolValue a = to_symbol(eval(*e.args[0]));
            SymbolValue b = to_symbol(eval(*e.args[1]));
            return SymbolValue{a.pv, star_normal(a.poly, b.poly, a.pv)};
        }
        if (f == "symform") {
            arity(2);
            return symmetric_form(to_ncpoly(eval(*e.args[0])), to_ncpoly(eval(*e.args[1])),
                                  *algebra());
        }
        if (f == "dag") {
            arity(1);
            return dagger(to_ncpoly(eval(*e.args[0])), *algebra());
        }
        if (f == "res") {
            arity(1);
            return res(to_ncpoly(eval(*e.args[0])), *algebra());
        }
        if (f == "resform") {
            arity(2);
            return res_form(to_ncpoly(eval(*e.args[0])), to_ncpoly(eval(*e.args[1])), *algebra());
        }
        if (f == "expandpair") {
            arity(2);
            return bracket_expansion_pair(to_ncpoly(eval(*e.args[0])), to_ncpoly(eval(*e.args[1])),
                                          *algebra());
        }
        if (f == "expandtheta") {
            arity(2);
            return bracket_expansion_theta(to_ncpoly(eval(*e.args[0])), to_ncpoly(eval(*e.args[1])),
                                           *algebra());
        }
        throw Error("unknown function '" + f + "'");
    }

    // ---- value printing ----------------------------------------------------
    std::string print_value(const Value &v) {
        if (auto *s = std::get_if<Scalar>(&v)) return print_scalar(*s);
        if (auto *x = std::get_if<NCPoly>(&v)) return print_ncpoly(*x);
        if (auto *y = std::get_if<SymbolValue>(&v)) return y->poly.to_string();
        if (auto *w = std::get_if<OneForm>(&v)) return to_string(*w, *algebra());
        if (std::get_if<DerivationSpec>(&v)) return "<derivation>";
        return "?";
    }

    std::string print_scalar(const Scalar &s) {
        if (htrunc_ < 0 || s.num().degree_in(0) <= static_cast<unsigned>(htrunc_) ||
            s.den().uses_var(0))
            return s.to_string();
        MultiPoly kept(s.num().table());
        for (auto &[m, c] : s.num().terms())
            if (m.exp[0] <= static_cast<uint32_t>(htrunc_)) kept.add_term(m, c);
        Scalar t(s.context(), kept, s.den());
        return t.to_string() + " + O(h^" + std::to_string(htrunc_ + 1) + ")";
    }

    std::string print_ncpoly(const NCPoly &x) {
        if (htrunc_ < 0) return to_string(x, *algebra());
        NCPoly kept(x.context());
        bool dropped = false;
        for (auto &[w, s] : x.terms()) {
            if (!s.is_polynomial() && s.den().uses_var(0)) {
                kept.add_term(w, s);
                continue;
            }
            MultiPoly nn(s.num().table());
            for (auto &[m, c] : s.num().terms()) {
                if (m.exp[0] <= static_cast<uint32_t>(htrunc_)) nn.add_term(m, c);
                else dropped = true;
            }
            if (!nn.is_zero()) kept.add_term(w, Scalar(s.context(), nn, s.den()));
        }
        std::string out = to_string(kept, *algebra());
        if (dropped) out += " + O(h^" + std::to_string(htrunc_ + 1) + ")";
        return out;
    }

    // ---- statements ---------------------------------------------------------
    void dispatch(const script::Statement &st, ReportEntry &e) {
        using script::Statement;
        switch (st.kind) {
        case Statement::Context:
            draft_ = Draft{};
            draft_.coords = st.names;
            invalidate_context();
            return;
        case Statement::Symbols:
            for (auto &n : st.names) draft_.syms.push_back(n);
            invalidate_context();
            return;
        case Statement::DiffRule:
            draft_.diffs.emplace_back(st.names[0], st.names[1], st.exprs[0]);
            invalidate_context();
            return;
        case Statement::Relation:
            draft_.relations.emplace_back(st.exprs[0], st.exprs[1]);
            invalidate_context();
            return;
        case Statement::Algebra:
            do_algebra(st);
            return;
        case Statement::Let:
            env_[st.names[0]] = eval(*st.exprs[0]);
            return;
        case Statement::Map:
            do_map(st, e);
            return;
        case Statement::Print:
            e.output.push_back(print_value(eval(*st.exprs[0])));
            return;
        case Statement::Lift:
            do_lift(st, e, false);
            return;
        case Statement::CheckLift:
            do_lift(st, e, true);
            return;
        case Statement::CheckPair:
            do_check_pair(st, e);
            return;
        case Statement::CheckChain:
            do_check_chain(st, e);
            return;
        case Statement::Psi:
            do_psi(e);
            return;
        case Statement::JacobianCmd:
            do_jacobian(e);
            return;
        case Statement::GradLogDet: {
            int ci = context()->coord_index_of(st.names[0]);
            if (ci < 0) throw Error("unknown coordinate '" + st.names[0] + "'");
            JacobianMatrix J = jacobian(current_map());
            Scalar g = grad_log_det(J, static_cast<size_t>(ci), context());
            e.output.push_back("dlndet/d" + st.names[0] + " = " + print_scalar(g));
            return;
        }
        case Statement::Mechanical:
            do_mechanical(st, e);
            return;
        case Statement::Naive:
            do_naive(st, e);
            return;
        case Statement::LrDiff:
            do_lrdiff(st, e);
            return;
        case Statement::Inverse:
            do_inverse(st, e);
            return;
        case Statement::NcJacobianCmd:
            do_ncjacobian(st, e);
            return;
        case Statement::Theta:
            do_theta(st, e);
            return;
        case Statement::Derivation: {
            DerivationSpec X;
            if (st.exprs.size() != algebra()->num_gens())
                throw Error("derivation needs one image per generator");
            for (auto &ex : st.exprs) X.images.push_back(to_ncpoly(eval(*ex)));
            env_[st.names[0]] = std::move(X);
            return;
        }
        case Statement::SetOpt:
            htrunc_ = st.number;
            return;
        case Statement::Expand:
            do_expand(st, e);
            return;
        case Statement::DivWitness:
            do_divwitness(st, e);
            return;
        }
        throw Error("unhandled statement");
    }

    void do_algebra(const script::Statement &st) {
        const std::string &kind = st.names[0];
        if (kind == "weyl") {
            if (st.number > 0) {
                algebra_ = std::make_shared<AlgebraSpec>(
                    AlgebraSpec::weyl_polynomial(static_cast<size_t>(st.number)));
                ctx_ = algebra_->context();
                draft_ = Draft{};  // fresh h-only context owned by the algebra
            } else {
                algebra_ = std::make_shared<AlgebraSpec>(AlgebraSpec::weyl_over(context()));
            }
        } else if (kind == "free") {
            std::vector<std::string> gens(st.names.begin() + 1, st.names.end());
            algebra_ = std::make_shared<AlgebraSpec>(AlgebraSpec::free_algebra(context(), gens));
        } else {  // cc
            std::vector<std::string> gens(st.names.begin() + 1, st.names.end());
            size_t m = gens.size();
            std::vector<std::vector<Rational>> c(m, std::vector<Rational>(m, Rational(0)));
            auto index = [&](const std::string &n) {
                for (size_t i = 0; i < m; ++i)
                    if (gens[i] == n) return i;
                throw Error("commutator table mentions unknown generator '" + n + "'");
            };
            for (auto &[gg, v] : st.pairs) {
                size_t i = index(gg.first), j = index(gg.second);
                c[i][j] = v;
                c[j][i] = -v;
            }
            algebra_ =
                std::make_shared<AlgebraSpec>(AlgebraSpec::constant_commutator(context(), gens, c));
        }
        map_.reset();
        target_ctx_.reset();
        env_.clear();
    }

    void do_map(const script::Statement &st, ReportEntry &e) {
        std::vector<Scalar> targets;
        for (auto &ex : st.exprs) targets.push_back(eval_scalar_expr(*ex, context()));
        map_ = make_point_map(context(), st.names, targets);
        target_ctx_ = plain_context(st.names);
        JacobianMatrix J = jacobian(*map_);
        e.output.push_back("det J = " + print_scalar(J.det));
    }

    CandidatePair eval_lift(const script::Statement &st) {
        const std::string &which = st.names[0];
        if (which == "right") return lift_right(current_map(), algebra());
        if (which == "left") return lift_left(current_map(), algebra());
        if (which == "classical") return classical_lift(current_map(), algebra());
        Scalar g = eval_scalar_expr(*st.exprs[0], context());
        return gauge_lift(current_map(), g, algebra());
    }

    void require_diffop() {
        if (algebra()->mode() != AlgebraMode::weyl_diffop)
            throw Error("this command needs 'algebra weyl;' over the current context");
    }

    void do_lift(const script::Statement &st, ReportEntry &e, bool check) {
        require_diffop();
        CandidatePair cand = eval_lift(st);
        for (size_t i = 0; i < cand.P.size(); ++i)
            e.output.push_back("P" + std::to_string(i + 1) + " = " + print_ncpoly(cand.P[i]));
        for (size_t i = 0; i < cand.Q.size(); ++i)
            e.output.push_back("Q" + std::to_string(i + 1) + " = " + print_ncpoly(cand.Q[i]));
        if (check) {
            CanonicalReport rep =
                cand.classical ? check_canonical_classical(cand) : check_canonical_quantum(cand);
            for (auto &r : rep.residuals)
                if (!r.zero) e.output.push_back("residual " + r.label + " = " + print_ncpoly(r.value));
            e.checks.emplace_back("canonical (" + st.names[0] + " lift)", rep.canonical);
        }
    }

    void do_check_pair(const script::Statement &st, ReportEntry &e) {
        require_diffop();
        CandidatePair cand;
        cand.classical = st.names[0] == "classical";
        cand.spec = algebra();
        for (auto &ex : st.exprs) cand.P.push_back(to_ncpoly(eval(*ex)));
        for (auto &ex : st.exprs2) cand.Q.push_back(to_ncpoly(eval(*ex)));
        if (cand.P.size() != cand.Q.size()) throw Error("check pair: need as many P's as Q's");
        CanonicalReport rep =
            cand.classical ? check_canonical_classical(cand) : check_canonical_quantum(cand);
        for (auto &r : rep.residuals)
            if (!r.zero) e.output.push_back("residual " + r.label + " = " + print_ncpoly(r.value));
        e.checks.emplace_back(st.names[0] + " canonical", rep.canonical);
    }

    void do_check_chain(const script::Statement &st, ReportEntry &e) {
        NCPoly H = to_ncpoly(eval(*st.exprs[0]));
        std::vector<NCPoly> images;
        for (auto &ex : st.exprs2) images.push_back(to_ncpoly(eval(*ex)));
        int g = algebra()->gen_index(st.names[0]);
        if (g < 0) throw Error("unknown generator '" + st.names[0] + "'");
        NCPoly x = to_ncpoly(eval(*st.exprs[1]));
        bool ok = chain_rule_check(H, *algebra(), images, *algebra(), static_cast<size_t>(g), x);
        e.checks.emplace_back("chain rule", ok);
    }

    void do_psi(ReportEntry &e) {
        require_diffop();
        std::vector<NCPoly> psi = psi_map(current_map(), *algebra());
        std::vector<NCPoly> defect = psi_defect(current_map(), *algebra());
        bool all_zero = true;
        for (size_t i = 0; i < psi.size(); ++i) {
            e.output.push_back("Psi(" + algebra()->gen_name(i) + ") = " + print_ncpoly(psi[i]));
            if (!defect[i].is_zero()) {
                all_zero = false;
                e.output.push_back("defect " + std::to_string(i + 1) + " = " + print_ncpoly(defect[i]));
            }
        }
        e.checks.emplace_back("Psi(p) = p + h grad ln det J", all_zero);
    }

    void do_jacobian(ReportEntry &e) {
        JacobianMatrix J = jacobian(current_map());
        for (size_t i = 0; i < J.n; ++i)
            for (size_t j = 0; j < J.n; ++j)
                e.output.push_back("J[" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                   "] = " + print_scalar(J.entry[i][j]));
        e.output.push_back("det J = " + print_scalar(J.det));
        for (size_t i = 0; i < J.n; ++i)
            for (size_t j = 0; j < J.n; ++j)
                e.output.push_back("adj[" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                   "] = " + print_scalar(J.adj[i][j]));
    }

    std::vector<std::vector<Scalar>> eval_matrix(const script::Statement &st) {
        if (!target_ctx_) throw Error("no point map declared");
        std::vector<std::vector<Scalar>> a;
        for (auto &row : st.matrix) {
            std::vector<Scalar> r;
            for (auto &ex : row) r.push_back(eval_scalar_expr(*ex, target_ctx_));
            a.push_back(std::move(r));
        }
        return a;
    }

    void do_mechanical(const script::Statement &st, ReportEntry &e) {
        require_diffop();
        auto a = eval_matrix(st);
        Scalar V = eval_scalar_expr(*st.exprs[0], target_ctx_);
        MechanicalPair mech = mechanical_lr(current_map(), a, V, target_ctx_, algebra());
        e.output.push_back("H_lr = " + print_ncpoly(mech.Hlr));
        e.output.push_back("H_rl = " + print_ncpoly(mech.Hrl));
        e.checks.emplace_back("dag(H_lr) = H_lr", dagger(mech.Hlr, *algebra()) == mech.Hlr);
        e.checks.emplace_back("dag(H_rl) = H_rl", dagger(mech.Hrl, *algebra()) == mech.Hrl);
        bool swap_ok = true;
        for (size_t i = 0; i < mech.P_left.size(); ++i)
            if (!(dagger(mech.P_left[i], *algebra()) == -mech.P_right[i])) swap_ok = false;
        e.checks.emplace_back("dag(P_left) = -P_right", swap_ok);
    }

    void do_naive(const script::Statement &st, ReportEntry &e) {
        require_diffop();
        NaiveTransformed nt =
            naive_transformed_hamiltonian(current_map(), st.names[0] == "left", algebra());
        e.output.push_back("H = " + print_ncpoly(nt.H));
        e.output.push_back("H - dag(H) = " + print_ncpoly(nt.self_adjoint_defect));
        return;
    }

    void do_lrdiff(const script::Statement &st, ReportEntry &e) {
        require_diffop();
        auto a = eval_matrix(st);
        LrDifference d = lr_difference(current_map(), a, target_ctx_, algebra());
        e.output.push_back("direct = " + print_ncpoly(d.direct));
        e.output.push_back("closed = " + print_ncpoly(d.closed));
        e.checks.emplace_back("h^-2 (H_lr - H_rl) routes agree", d.defect.is_zero());
        e.checks.emplace_back("inverse-Jacobian contraction identity", d.contraction_ok);
    }

    void do_inverse(const script::Statement &st, ReportEntry &e) {
        unsigned bound = static_cast<unsigned>(st.number);
        InverseSearch inv;
        bool verified = false;
        if (st.names[0] == "map") {
            inv = attempt_inverse(current_map(), bound);
            verified = inv.found && verify_inverse(current_map(), inv);
        } else if (st.names[0] == "pair") {
            CandidatePair cand;
            cand.classical = true;
            cand.spec = algebra();
            for (auto &ex : st.exprs) cand.P.push_back(to_ncpoly(eval(*ex)));
            for (auto &ex : st.exprs2) cand.Q.push_back(to_ncpoly(eval(*ex)));
            inv = attempt_inverse(cand, bound);
            verified = inv.found;
        } else {  // free
            std::vector<NCPoly> F;
            for (auto &ex : st.exprs) F.push_back(to_ncpoly(eval(*ex)));
            inv = attempt_inverse_free(F, *algebra(), bound);
            verified = inv.found;
        }
        if (!inv.found) {
            e.output.push_back("no inverse up to degree " + std::to_string(bound) +
                               " (not a refutation)");
            return;
        }
        for (size_t i = 0; i < inv.inverse.size(); ++i)
            e.output.push_back("G" + std::to_string(i + 1) + " = " + inv.inverse[i].to_string());
        e.checks.emplace_back("G(F) = id verified by substitution", verified);
    }

    void do_ncjacobian(const script::Statement &st, ReportEntry &e) {
        std::vector<NCPoly> F;
        for (auto &ex : st.exprs) F.push_back(to_ncpoly(eval(*ex)));
        NcJacobian J = nc_jacobian(F, algebra());
        NCPoly one = NCPoly::from_scalar(Scalar::one(context()));
        for (size_t i = 0; i < F.size(); ++i)
            for (size_t j = 0; j < J.m; ++j) {
                e.output.push_back("Jvar[" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                   "] = " + print_ncpoly(J.variational[i][j]));
            }
        for (size_t i = 0; i < F.size(); ++i)
            for (size_t j = 0; j < J.m; ++j)
                e.output.push_back("J[" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                   "](1) = " + print_ncpoly(J.op[i][j](one)));
    }

    void do_theta(const script::Statement &st, ReportEntry &e) {
        if (algebra()->mode() != AlgebraMode::constant_commutator)
            throw Error("theta needs a constant-commutator algebra");
        size_t m = algebra()->num_gens();
        std::vector<std::vector<Rational>> c(m, std::vector<Rational>(m));
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < m; ++j) c[i][j] = algebra()->c(i, j);
        ThetaTable th = theta_table(c, static_cast<unsigned>(st.number));
        for (auto &[key, v] : th.coeff) {
            std::string sig = "(", sigp = "(";
            for (size_t i = 0; i < m; ++i) {
                if (i) sig += ",", sigp += ",";
                sig += std::to_string(key.first[i]);
                sigp += std::to_string(key.second[i]);
            }
            e.output.push_back("theta[" + sig + ")," + sigp + ")] = " + v.str());
        }
    }

    void do_expand(const script::Statement &st, ReportEntry &e) {
        NCPoly H = to_ncpoly(eval(*st.exprs[0]));
        NCPoly F = to_ncpoly(eval(*st.exprs[1]));
        NCPoly expansion = st.names[0] == "pair" ? bracket_expansion_pair(H, F, *algebra())
                                                 : bracket_expansion_theta(H, F, *algebra());
        NCPoly reference =
            commutator(H, F, *algebra()).scaled(Scalar::one(context()) / Scalar::h(context()));
        e.output.push_back("expansion = " + print_ncpoly(expansion));
        e.output.push_back("h^-1 [H,F] = " + print_ncpoly(reference));
        e.checks.emplace_back("expansion equals h^-1 [H,F]", expansion == reference);
    }

    void do_divwitness(const script::Statement &st, ReportEntry &e) {
        SymbolValue a = to_q_symbol(eval(*st.exprs[0]));
        SymbolValue b = to_q_symbol(eval(*st.exprs[1]));
        auto g = divergence_witness(a.poly, b.poly, a.pv);
        for (size_t i = 0; i < g.size(); ++i)
            e.output.push_back("g" + std::to_string(i + 1) + " = " + g[i].to_string());
        MultiPoly back(a.pv.table);
        for (size_t i = 0; i < g.size(); ++i) back += g[i].formal_diff(a.pv.q(i));
        e.checks.emplace_back("sum dg_i/dq_i = a - b", back == a.poly - b.poly);
    }
};

}  // namespace weylcalc
