#include "expr_internal.hpp"

#include "hlap/error.hpp"

#include <cctype>
#include <sstream>

namespace hlap {

// ---------------------------------------------------------------------------
// Printer

std::string to_string(const Rational& q)
{
    return q.get_str();
}

namespace {

std::string print_node(const Expr& e, const Chart& chart);

std::string var_name(const Chart& chart, int i)
{
    if (i >= 0 && i < chart.dim())
        return chart.names[static_cast<size_t>(i)];
    return "x" + std::to_string(i);
}

std::string print_factor(const Factor& f, const Chart& chart)
{
    switch (f.kind) {
    case AtomKind::Coord: {
        std::string s = var_name(chart, f.var);
        if (f.exp != 1)
            s += "^" + to_string(f.exp);
        return s;
    }
    case AtomKind::Flat: {
        std::string s = "flatplus(" + var_name(chart, f.var) + ")";
        if (f.exp != 1)
            s += "^(" + to_string(f.exp) + ")";
        return s;
    }
    case AtomKind::Exp:
        return "exp(" + print_node(Expr(f.arg), chart) + ")";
    case AtomKind::Base: {
        std::string s = "recip(" + print_node(Expr(f.arg), chart) + ")";
        if (f.exp != -1)
            s += "^" + to_string(Rational(-f.exp));
        return s;
    }
    }
    return {};
}

std::string print_node(const Expr& e, const Chart& chart)
{
    if (e.is_piecewise()) {
        return "piecewise(" + var_name(chart, e.pw_var()) + " > " + to_string(e.pw_cut()) + "; " +
               print_node(e.pw_then(), chart) + "; " + print_node(e.pw_else(), chart) + ")";
    }
    if (e.is_zero())
        return "0";
    std::string out;
    bool first = true;
    for (const auto& t : e.terms()) {
        Rational c = t.coeff;
        bool neg = sgn(c) < 0;
        if (neg)
            c = -c;
        if (first)
            out += neg ? "-" : "";
        else
            out += neg ? " - " : " + ";
        first = false;
        std::string body;
        for (const auto& f : t.factors) {
            if (!body.empty())
                body += "*";
            body += print_factor(f, chart);
        }
        if (body.empty())
            out += to_string(c);
        else if (c == 1)
            out += body;
        else
            out += to_string(c) + "*" + body;
    }
    return out;
}

} // namespace

std::string to_string(const Expr& e, const Chart& chart)
{
    return print_node(e, chart);
}

// ---------------------------------------------------------------------------
// Parser (recursive descent)
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | '+' unary | power
//   power   := primary ('^' exponent)?
//   exponent:= ['-'] number | '(' ['-'] number ['/' number] ')'
//   primary := number | name | '(' expr ')' | exp(expr) | recip(expr)
//            | flatplus(name) | piecewise(name > number; expr; expr)

namespace {

Rational decimal_to_rational(std::string_view s)
{
    std::string digits;
    long scale = 0;
    long exp10 = 0;
    size_t i = 0;
    bool seen_dot = false;
    for (; i < s.size(); ++i) {
        char ch = s[i];
        if (std::isdigit(static_cast<unsigned char>(ch))) {
            digits += ch;
            if (seen_dot)
                ++scale;
        } else if (ch == '.' && !seen_dot) {
            seen_dot = true;
        } else {
            break;
        }
    }
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E'))
        exp10 = std::stol(std::string(s.substr(i + 1)));
    if (digits.empty())
        throw Error(ErrorKind::ParseError, "malformed number '" + std::string(s) + "'");
    mpz_class num(digits, 10);
    mpz_class ten = 10;
    long net = exp10 - scale;
    mpz_class p;
    mpz_pow_ui(p.get_mpz_t(), ten.get_mpz_t(), static_cast<unsigned long>(net < 0 ? -net : net));
    Rational q = net < 0 ? Rational(num, p) : Rational(num * p);
    q.canonicalize();
    return q;
}

class Parser {
public:
    Parser(std::string_view s, const Chart& chart) : s_(s), chart_(chart) {}

    Expr parse_all()
    {
        Expr e = expr();
        skip();
        if (pos_ != s_.size())
            fail("unexpected trailing input");
        return e;
    }

    Rational rational_all()
    {
        skip();
        bool neg = accept('-');
        Rational q = number();
        skip();
        if (accept('/')) {
            Rational d = number();
            if (sgn(d) == 0)
                fail("zero denominator");
            q /= d;
        }
        skip();
        if (pos_ != s_.size())
            fail("unexpected trailing input");
        return neg ? Rational(-q) : q;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const
    {
        throw Error(ErrorKind::ParseError, msg + " at position " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
    }

    void skip()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
    }

    bool peek(char c)
    {
        skip();
        return pos_ < s_.size() && s_[pos_] == c;
    }

    bool accept(char c)
    {
        if (peek(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c))
            fail(std::string("expected '") + c + "'");
    }

    bool at_digit()
    {
        skip();
        return pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.');
    }

    Rational number()
    {
        skip();
        size_t start = pos_;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
            ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            size_t save = pos_;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '-' || s_[pos_] == '+'))
                ++pos_;
            if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
                    ++pos_;
            } else {
                pos_ = save;
            }
        }
        if (start == pos_)
            fail("expected a number");
        return decimal_to_rational(s_.substr(start, pos_ - start));
    }

    std::string ident()
    {
        skip();
        size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        if (start == pos_ || std::isdigit(static_cast<unsigned char>(s_[start])))
            fail("expected an identifier");
        return std::string(s_.substr(start, pos_ - start));
    }

    int coordinate(const std::string& name)
    {
        int i = chart_.index_of(name);
        if (i < 0)
            fail("unknown coordinate '" + name + "'");
        return i;
    }

    Expr expr()
    {
        Expr acc = term();
        for (;;) {
            if (accept('+'))
                acc = acc + term();
            else if (accept('-'))
                acc = acc - term();
            else
                return acc;
        }
    }

    Expr term()
    {
        Expr acc = unary();
        for (;;) {
            if (accept('*')) {
                acc = acc * unary();
            } else if (accept('/')) {
                Expr d = unary();
                if (d.is_zero())
                    fail("division by zero");
                acc = acc * d.recip();
            } else {
                return acc;
            }
        }
    }

    Expr unary()
    {
        if (accept('-'))
            return -unary();
        if (accept('+'))
            return unary();
        return power();
    }

    Rational exponent()
    {
        if (accept('(')) {
            bool neg = accept('-');
            Rational q = number();
            if (accept('/')) {
                Rational d = number();
                if (sgn(d) == 0)
                    fail("zero denominator in exponent");
                q /= d;
            }
            expect(')');
            return neg ? Rational(-q) : q;
        }
        bool neg = accept('-');
        Rational q = number();
        if (q.get_den() != 1)
            fail("unparenthesized fractional exponent");
        return neg ? Rational(-q) : q;
    }

    Expr power()
    {
        Expr base = primary();
        if (!accept('^'))
            return base;
        Rational q = exponent();
        bool monomial = !base.is_piecewise() && base.terms().size() == 1 && base.terms()[0].coeff == 1;
        if (q.get_den() == 1 && !(monomial && sgn(q) == 0)) {
            if (sgn(q) < 0 && base.is_zero())
                fail("negative power of zero");
            return base.pow(q.get_num().get_si());
        }
        if (!monomial)
            fail("fractional power of a non-monomial");
        try {
            return base.pow_rational(q);
        } catch (const Error& e) {
            fail(e.what());
        }
    }

    Expr primary()
    {
        if (accept('(')) {
            Expr e = expr();
            expect(')');
            return e;
        }
        if (at_digit())
            return Expr(number());
        std::string id = ident();
        if (peek('(')) {
            expect('(');
            if (id == "exp") {
                Expr a = expr();
                expect(')');
                return exp(a);
            }
            if (id == "recip") {
                Expr a = expr();
                expect(')');
                if (a.is_zero())
                    fail("reciprocal of zero");
                return a.recip();
            }
            if (id == "flatplus") {
                int i = coordinate(ident());
                expect(')');
                return Expr::flatplus(i);
            }
            if (id == "piecewise") {
                int i = coordinate(ident());
                expect('>');
                bool neg = accept('-');
                Rational cut = number();
                if (accept('/'))
                    cut /= number();
                if (neg)
                    cut = -cut;
                expect(';');
                Expr a = expr();
                expect(';');
                Expr b = expr();
                expect(')');
                return piecewise(i, cut, a, b);
            }
            fail("unknown function '" + id + "'");
        }
        return Expr::coord(coordinate(id));
    }

    std::string_view s_;
    const Chart& chart_;
    size_t pos_ = 0;
};

} // namespace

Expr parse_expr(std::string_view text, const Chart& chart)
{
    return Parser(text, chart).parse_all();
}

Rational parse_rational(std::string_view text)
{
    static const Chart none({"_"});
    return Parser(text, none).rational_all();
}

} // namespace hlap
