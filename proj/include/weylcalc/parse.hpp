#pragma once

#include "weylcalc/error.hpp"
#include "weylcalc/rational.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace weylcalc {

struct SyntaxError : Error {
    int line, col;
    SyntaxError(const std::string &msg, int line_, int col_)
        : Error("syntax error at " + std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg),
          line(line_), col(col_) {}
};

namespace script {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

struct Token {
    enum Kind { Ident, Integer, Punct, End } kind = End;
    std::string text;
    int line = 1, col = 1;
    size_t offset = 0;      // byte offset of the token start
    size_t end_offset = 0;  // one past the token end
};

class Lexer {
public:
    explicit Lexer(std::string src) : src_(std::move(src)) { advance(); }

    const Token &peek() const { return tok_; }
    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        skip_space();
        tok_.line = line_;
        tok_.col = col_;
        tok_.offset = pos_;
        if (pos_ >= src_.size()) {
            tok_.kind = Token::End;
            tok_.text.clear();
            tok_.end_offset = pos_;
            return;
        }
        char c = src_[pos_];
        if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                bump();
            tok_.kind = Token::Ident;
            tok_.text = src_.substr(start, pos_ - start);
            tok_.end_offset = pos_;
            return;
        }
        if (isdigit(static_cast<unsigned char>(c))) {
            size_t start = pos_;
            while (pos_ < src_.size() && isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
            tok_.kind = Token::Integer;
            tok_.text = src_.substr(start, pos_ - start);
            tok_.end_offset = pos_;
            return;
        }
        static const std::string punct = "()[]{},;=^*/+-|";
        if (punct.find(c) != std::string::npos) {
            tok_.kind = Token::Punct;
            tok_.text = std::string(1, c);
            bump();
            tok_.end_offset = pos_;
            return;
        }
        throw SyntaxError(std::string("unexpected character '") + c + "'", line_, col_);
    }

    void skip_space() {
        for (;;) {
            while (pos_ < src_.size() && isspace(static_cast<unsigned char>(src_[pos_]))) bump();
            if (pos_ < src_.size() && src_[pos_] == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') bump();
                continue;
            }
            break;
        }
    }

    void bump() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    std::string src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

// ---------------------------------------------------------------------------
// Expression AST
// ---------------------------------------------------------------------------

struct Expr;
using ExprPtr = std::shared_ptr<Expr>;

struct Expr {
    enum Kind {
        Number,      // integer literal
        Name,        // identifier
        Unary,       // -a
        Binary,      // a op b with op in + - * / ^
        Call,        // f(a, b, ...); the called name is in `name`
        Commutator,  // [a, b]
        Poisson,     // {a, b}
    } kind;
    Rational number;
    std::string name;
    char op = 0;
    std::vector<ExprPtr> args;
    int line = 1, col = 1;
};

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

struct Statement {
    enum Kind {
        Context,      // context q1 q2;
        Symbols,      // symbols c s;
        DiffRule,     // diff c theta = expr;
        Relation,     // relation expr = expr;
        Algebra,      // algebra weyl n=1; | algebra weyl; | algebra free a b; | algebra cc a b with [a,b]=1, ...;
        Let,          // let H = expr;
        Map,          // map x = expr, y = expr;
        Print,        // print expr;
        Lift,         // lift right|left|classical; lift gauge expr;
        CheckLift,    // check lift <same forms>;
        CheckPair,    // check quantum [..|..]; check classical [..|..];
        CheckChain,   // check chain H, [e..], gen, x;
        Psi,          // psi;
        JacobianCmd,  // jacobian;
        GradLogDet,   // gradlogdet r;
        Mechanical,   // mechanical [[..],[..]], V;
        Naive,        // naive left|right;
        LrDiff,       // lrdiff [[..],[..]];
        Inverse,      // inverse bound=4; | inverse free [F..] bound=4; | inverse pair [..|..] bound=4;
        NcJacobianCmd,// ncjacobian [F1, F2];
        Theta,        // theta 3;
        Derivation,   // derivation X [e1, e2];
        SetOpt,       // set htrunc 2; set htrunc off;
        Expand,       // expand pair H, F; | expand theta H, F;
        DivWitness,   // divwitness a, b;
    } kind;
    int line = 1, col = 1;
    std::string echo;                       // source text of the statement
    std::vector<std::string> names;         // identifiers (context coords, gens, lhs names, flags...)
    std::vector<ExprPtr> exprs;             // general expression operands
    std::vector<ExprPtr> exprs2;            // second expression group ([..|..] right part)
    std::vector<std::vector<ExprPtr>> matrix;  // nested list (mechanical/lrdiff)
    std::vector<std::pair<std::pair<std::string, std::string>, Rational>> pairs;  // cc table
    long number = 0;                        // n=, bound=, theta order, htrunc
};

struct Script {
    std::vector<Statement> statements;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
public:
    explicit Parser(std::string src) : src_(src), lex_(std::move(src)) {}

    Script parse_script() {
        Script s;
        while (lex_.peek().kind != Token::End) s.statements.push_back(parse_statement());
        return s;
    }

    Statement parse_statement() {
        Token head = expect(Token::Ident, "statement keyword");
        Statement st;
        st.line = head.line;
        st.col = head.col;
        size_t echo_from = head.offset;
        const std::string &k = head.text;
        if (k == "context") {
            st.kind = Statement::Context;
            while (lex_.peek().kind == Token::Ident) st.names.push_back(lex_.next().text);
            if (st.names.empty()) fail("context needs at least one coordinate name");
        } else if (k == "symbols") {
            st.kind = Statement::Symbols;
            while (lex_.peek().kind == Token::Ident) st.names.push_back(lex_.next().text);
            if (st.names.empty()) fail("symbols needs at least one name");
        } else if (k == "diff") {
            st.kind = Statement::DiffRule;
            st.names.push_back(expect(Token::Ident, "function symbol").text);
            st.names.push_back(expect(Token::Ident, "coordinate").text);
            expect_punct("=");
            st.exprs.push_back(parse_expr());
        } else if (k == "relation") {
            st.kind = Statement::Relation;
            st.exprs.push_back(parse_expr());
            expect_punct("=");
            st.exprs.push_back(parse_expr());
        } else if (k == "algebra") {
            st.kind = Statement::Algebra;
            std::string which = expect(Token::Ident, "algebra kind (weyl|free|cc)").text;
            st.names.push_back(which);
            if (which == "weyl") {
                if (is_ident("n")) {
                    lex_.next();
                    expect_punct("=");
                    st.number = parse_integer();
                } else {
                    st.number = 0;  // over the current context
                }
            } else if (which == "free" || which == "cc") {
                while (lex_.peek().kind == Token::Ident && lex_.peek().text != "with")
                    st.names.push_back(lex_.next().text);
                if (st.names.size() < 2) fail("algebra needs at least one generator");
                if (which == "cc" && is_ident("with")) {
                    lex_.next();
                    for (;;) {
                        expect_punct("[");
                        std::string a = expect(Token::Ident, "generator").text;
                        expect_punct(",");
                        std::string b = expect(Token::Ident, "generator").text;
                        expect_punct("]");
                        expect_punct("=");
                        Rational v = parse_rational();
                        st.pairs.push_back({{a, b}, v});
                        if (!is_punct(",")) break;
                        lex_.next();
                    }
                }
            } else {
                fail("unknown algebra kind '" + which + "'");
            }
        } else if (k == "let") {
            st.kind = Statement::Let;
            st.names.push_back(expect(Token::Ident, "name").text);
            expect_punct("=");
            st.exprs.push_back(parse_expr());
        } else if (k == "map") {
            st.kind = Statement::Map;
            for (;;) {
                st.names.push_back(expect(Token::Ident, "target name").text);
                expect_punct("=");
                st.exprs.push_back(parse_expr());
                if (!is_punct(",")) break;
                lex_.next();
            }
        } else if (k == "print") {
            st.kind = Statement::Print;
            st.exprs.push_back(parse_expr());
        } else if (k == "lift") {
            st.kind = Statement::Lift;
            parse_lift_tail(st);
        } else if (k == "check") {
            std::string what = expect(Token::Ident, "check kind").text;
            if (what == "lift") {
                st.kind = Statement::CheckLift;
                parse_lift_tail(st);
            } else if (what == "quantum" || what == "classical") {
                st.kind = Statement::CheckPair;
                st.names.push_back(what);
                parse_pair_lists(st);
            } else if (what == "chain") {
                st.kind = Statement::CheckChain;
                st.exprs.push_back(parse_expr());
                expect_punct(",");
                expect_punct("[");
                st.exprs2 = parse_expr_list("]");
                expect_punct(",");
                st.names.push_back(expect(Token::Ident, "generator name").text);
                expect_punct(",");
                st.exprs.push_back(parse_expr());
            } else {
                fail("unknown check '" + what + "'");
            }
        } else if (k == "psi") {
            st.kind = Statement::Psi;
        } else if (k == "jacobian") {
            st.kind = Statement::JacobianCmd;
        } else if (k == "gradlogdet") {
            st.kind = Statement::GradLogDet;
            st.names.push_back(expect(Token::Ident, "coordinate").text);
        } else if (k == "mechanical") {
            st.kind = Statement::Mechanical;
            st.matrix = parse_matrix();
            expect_punct(",");
            st.exprs.push_back(parse_expr());
        } else if (k == "naive") {
            st.kind = Statement::Naive;
            std::string side = expect(Token::Ident, "left|right").text;
            if (side != "left" && side != "right") fail("naive expects left or right");
            st.names.push_back(side);
        } else if (k == "lrdiff") {
            st.kind = Statement::LrDiff;
            st.matrix = parse_matrix();
        } else if (k == "inverse") {
            st.kind = Statement::Inverse;
            if (is_ident("free")) {
                lex_.next();
                st.names.push_back("free");
                expect_punct("[");
                st.exprs = parse_expr_list("]");
            } else if (is_ident("pair")) {
                lex_.next();
                st.names.push_back("pair");
                parse_pair_lists(st);
            } else {
                st.names.push_back("map");
            }
            if (!is_ident("bound")) fail("inverse needs bound=<k>");
            lex_.next();
            expect_punct("=");
            st.number = parse_integer();
        } else if (k == "ncjacobian") {
            st.kind = Statement::NcJacobianCmd;
            expect_punct("[");
            st.exprs = parse_expr_list("]");
        } else if (k == "theta") {
            st.kind = Statement::Theta;
            st.number = parse_integer();
        } else if (k == "derivation") {
            st.kind = Statement::Derivation;
            st.names.push_back(expect(Token::Ident, "name").text);
            expect_punct("[");
            st.exprs = parse_expr_list("]");
        } else if (k == "set") {
            st.kind = Statement::SetOpt;
            std::string opt = expect(Token::Ident, "option name").text;
            if (opt != "htrunc") fail("unknown option '" + opt + "'");
            st.names.push_back(opt);
            if (is_ident("off")) {
                lex_.next();
                st.number = -1;
            } else {
                st.number = parse_integer();
            }
        } else if (k == "expand") {
            st.kind = Statement::Expand;
            std::string which = expect(Token::Ident, "pair|theta").text;
            if (which != "pair" && which != "theta") fail("expand expects pair or theta");
            st.names.push_back(which);
            st.exprs.push_back(parse_expr());
            expect_punct(",");
            st.exprs.push_back(parse_expr());
        } else if (k == "divwitness") {
            st.kind = Statement::DivWitness;
            st.exprs.push_back(parse_expr());
            expect_punct(",");
            st.exprs.push_back(parse_expr());
        } else {
            fail("unknown statement '" + k + "'");
        }
        Token semi = lex_.peek();
        if (!(semi.kind == Token::Punct && semi.text == ";"))
            throw SyntaxError("expected ';'", semi.line, semi.col);
        lex_.next();
        st.echo = snippet(echo_from, semi.end_offset);
        return st;
    }

    ExprPtr parse_expr() { return parse_binary(0); }

private:
    void parse_lift_tail(Statement &st) {
        std::string which = expect(Token::Ident, "right|left|classical|gauge").text;
        if (which == "gauge") {
            st.names.push_back(which);
            st.exprs.push_back(parse_expr());
        } else if (which == "right" || which == "left" || which == "classical") {
            st.names.push_back(which);
        } else {
            fail("lift expects right, left, classical or gauge");
        }
    }

    void parse_pair_lists(Statement &st) {
        expect_punct("[");
        st.exprs = parse_expr_list("|");
        st.exprs2 = parse_expr_list("]");
    }

    std::vector<ExprPtr> parse_expr_list(const char *closer) {
        std::vector<ExprPtr> list;
        for (;;) {
            list.push_back(parse_expr());
            if (is_punct(",")) {
                lex_.next();
                continue;
            }
            expect_punct(closer);
            break;
        }
        return list;
    }

    std::vector<std::vector<ExprPtr>> parse_matrix() {
        std::vector<std::vector<ExprPtr>> rows;
        expect_punct("[");
        for (;;) {
            expect_punct("[");
            rows.push_back(parse_expr_list("]"));
            if (is_punct(",")) {
                lex_.next();
                continue;
            }
            expect_punct("]");
            break;
        }
        return rows;
    }

    // precedence climbing: 1 for +/-, 2 for */, 3 unary minus, 4 for ^
    ExprPtr parse_binary(int min_prec) {
        ExprPtr lhs = parse_unary();
        for (;;) {
            Token t = lex_.peek();
            if (t.kind != Token::Punct) break;
            int prec;
            if (t.text == "+" || t.text == "-") prec = 1;
            else if (t.text == "*" || t.text == "/") prec = 2;
            else break;
            if (prec < min_prec) break;
            lex_.next();
            ExprPtr rhs = parse_binary(prec + 1);
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Binary;
            e->op = t.text[0];
            e->args = {lhs, rhs};
            e->line = t.line;
            e->col = t.col;
            lhs = e;
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        Token t = lex_.peek();
        if (t.kind == Token::Punct && t.text == "-") {
            lex_.next();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Unary;
            e->op = '-';
            e->args = {parse_unary()};
            e->line = t.line;
            e->col = t.col;
            return e;
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_primary();
        Token t = lex_.peek();
        if (t.kind == Token::Punct && t.text == "^") {
            lex_.next();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Binary;
            e->op = '^';
            e->args = {base, parse_unary()};  // right-associative, allows -k
            e->line = t.line;
            e->col = t.col;
            return e;
        }
        return base;
    }

    ExprPtr parse_primary() {
        Token t = lex_.next();
        auto e = std::make_shared<Expr>();
        e->line = t.line;
        e->col = t.col;
        if (t.kind == Token::Integer) {
            e->kind = Expr::Number;
            e->number = Rational(Int(t.text));
            return e;
        }
        if (t.kind == Token::Ident) {
            if (is_punct("(")) {
                lex_.next();
                e->kind = Expr::Call;
                e->name = t.text;
                if (!is_punct(")")) {
                    e->args = parse_expr_list(")");
                } else {
                    lex_.next();
                }
                return e;
            }
            e->kind = Expr::Name;
            e->name = t.text;
            return e;
        }
        if (t.kind == Token::Punct && t.text == "(") {
            ExprPtr inner = parse_expr();
            expect_punct(")");
            return inner;
        }
        if (t.kind == Token::Punct && t.text == "[") {
            e->kind = Expr::Commutator;
            e->args.push_back(parse_expr());
            expect_punct(",");
            e->args.push_back(parse_expr());
            expect_punct("]");
            return e;
        }
        if (t.kind == Token::Punct && t.text == "{") {
            e->kind = Expr::Poisson;
            e->args.push_back(parse_expr());
            expect_punct(",");
            e->args.push_back(parse_expr());
            expect_punct("}");
            return e;
        }
        throw SyntaxError("expected an expression", t.line, t.col);
    }

    long parse_integer() {
        bool neg = false;
        if (is_punct("-")) {
            lex_.next();
            neg = true;
        }
        Token t = expect(Token::Integer, "integer");
        long v = std::stol(t.text);
        return neg ? -v : v;
    }

    Rational parse_rational() {
        bool neg = false;
        if (is_punct("-")) {
            lex_.next();
            neg = true;
        }
        Token t = expect(Token::Integer, "number");
        Rational v{Int(t.text)};
        if (is_punct("/")) {
            lex_.next();
            Token d = expect(Token::Integer, "denominator");
            v /= Rational(Int(d.text));
        }
        return neg ? -v : v;
    }

    bool is_punct(const char *p) const {
        return lex_.peek().kind == Token::Punct && lex_.peek().text == p;
    }
    bool is_ident(const char *name) const {
        return lex_.peek().kind == Token::Ident && lex_.peek().text == name;
    }
    void expect_punct(const char *p) {
        Token t = lex_.peek();
        if (!is_punct(p)) throw SyntaxError(std::string("expected '") + p + "'", t.line, t.col);
        lex_.next();
    }
    Token expect(Token::Kind kind, const char *what) {
        Token t = lex_.peek();
        if (t.kind != kind) throw SyntaxError(std::string("expected ") + what, t.line, t.col);
        return lex_.next();
    }
    [[noreturn]] void fail(const std::string &msg) {
        throw SyntaxError(msg, lex_.peek().line, lex_.peek().col);
    }

    /// Source slice with whitespace runs collapsed, for statement echoes.
    std::string snippet(size_t from, size_t to) const {
        std::string out;
        bool space = false;
        for (size_t i = from; i < to && i < src_.size(); ++i) {
            char c = src_[i];
            if (isspace(static_cast<unsigned char>(c))) {
                space = !out.empty();
                continue;
            }
            if (space) out += ' ';
            space = false;
            out += c;
        }
        return out;
    }

    std::string src_;
    Lexer lex_;
};

}  // namespace script

}  // namespace weylcalc
