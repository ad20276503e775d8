#include "polyreg/forlang.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace polyreg {

ForCond ForCond::boolVar(std::string b) {
    ForCond c;
    c.kind = Kind::BoolVar;
    c.x = std::move(b);
    return c;
}
ForCond ForCond::label(std::string sym, std::string var) {
    ForCond c;
    c.kind = Kind::Label;
    c.symbol = std::move(sym);
    c.x = std::move(var);
    return c;
}
ForCond ForCond::cmp(Kind k, std::string x, std::string y) {
    ForCond c;
    c.kind = k;
    c.x = std::move(x);
    c.y = std::move(y);
    return c;
}
ForCond ForCond::conj(ForCond a, ForCond b) {
    ForCond c;
    c.kind = Kind::And;
    c.args = {std::move(a), std::move(b)};
    return c;
}
ForCond ForCond::disj(ForCond a, ForCond b) {
    ForCond c;
    c.kind = Kind::Or;
    c.args = {std::move(a), std::move(b)};
    return c;
}
ForCond ForCond::neg(ForCond a) {
    ForCond c;
    c.kind = Kind::Not;
    c.args = {std::move(a)};
    return c;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

struct Token {
    std::string text;
    int line = 1, col = 1;
};

std::vector<Token> lex(const std::string& text) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto isSpecial = [](char c) {
        return c == '{' || c == '}' || c == '(' || c == ')' || c == ':' || c == '.' ||
               c == '<' || c == '=' || c == '#';
    };
    while (i < text.size()) {
        char c = text[i];
        if (c == '\n') {
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++col;
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
            continue;
        }
        int startCol = col;
        auto push2 = [&](const std::string& t) {
            out.push_back({t, line, startCol});
            i += t.size();
            col += static_cast<int>(t.size());
        };
        if (text.compare(i, 2, "..") == 0) {
            push2("..");
            continue;
        }
        if (text.compare(i, 2, ":=") == 0) {
            push2(":=");
            continue;
        }
        if (text.compare(i, 2, "<=") == 0) {
            push2("<=");
            continue;
        }
        if (text.compare(i, 2, "=<") == 0) {
            push2("=<");
            continue;
        }
        if (isSpecial(c)) {
            push2(std::string(1, c));
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) &&
               !isSpecial(text[j]))
            ++j;
        out.push_back({text.substr(i, j - i), line, startCol});
        col += static_cast<int>(j - i);
        i = j;
    }
    return out;
}

struct ForParser {
    std::vector<Token> toks;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& msg) {
        if (pos < toks.size())
            throw ParseError("forp parse error at line " + std::to_string(toks[pos].line) +
                             ", col " + std::to_string(toks[pos].col) + ": " + msg);
        throw ParseError("forp parse error at end of input: " + msg);
    }
    bool atEnd() const { return pos >= toks.size(); }
    bool peekIs(const std::string& t) { return !atEnd() && toks[pos].text == t; }
    std::string take() {
        if (atEnd()) fail("unexpected end of input");
        return toks[pos++].text;
    }
    void expect(const std::string& t) {
        if (atEnd() || toks[pos].text != t) fail("expected '" + t + "'");
        ++pos;
    }

    static bool isKeyword(const std::string& t) {
        static const std::set<std::string> kw{"for",  "in",    "if",   "then", "else",
                                              "output", "bool", "first", "last", "and",
                                              "or",   "not",   "true", "false", "input"};
        return kw.count(t) > 0;
    }

    std::vector<std::string> headerTokens() {
        std::vector<std::string> v;
        while (!atEnd()) {
            const std::string& t = toks[pos].text;
            if (t == "for" || t == "if" || t == "bool" || t == "input" || t == "output" ||
                t == "}" || t == "{")
                break;
            v.push_back(take());
        }
        return v;
    }

    ForCond parseAtom() {
        if (peekIs("(")) {
            take();
            ForCond c = parseCond();
            expect(")");
            return c;
        }
        if (peekIs("not")) {
            take();
            return ForCond::neg(parseAtom());
        }
        if (peekIs("true")) {
            take();
            return ForCond::mkTrue();
        }
        std::string first = take();
        if (peekIs("(")) {  // label test sym(x)
            take();
            std::string var = take();
            expect(")");
            return ForCond::label(first, var);
        }
        if (peekIs("<=") || peekIs("=<")) {
            take();
            return ForCond::cmp(ForCond::Kind::Le, first, take());
        }
        if (peekIs("<")) {
            take();
            return ForCond::cmp(ForCond::Kind::Lt, first, take());
        }
        if (peekIs("=")) {
            take();
            std::string rhs = take();
            if (rhs == "first") return ForCond::cmp(ForCond::Kind::EqFirst, first, "");
            if (rhs == "last") return ForCond::cmp(ForCond::Kind::EqLast, first, "");
            return ForCond::cmp(ForCond::Kind::Eq, first, rhs);
        }
        return ForCond::boolVar(first);
    }

    ForCond parseConj() {
        ForCond c = parseAtom();
        while (peekIs("and")) {
            take();
            c = ForCond::conj(std::move(c), parseAtom());
        }
        return c;
    }

    ForCond parseCond() {
        ForCond c = parseConj();
        while (peekIs("or")) {
            take();
            c = ForCond::disj(std::move(c), parseConj());
        }
        return c;
    }

    std::vector<ForStmt> parseBlockOrStmt() {
        std::vector<ForStmt> v;
        if (peekIs("{")) {
            take();
            while (!peekIs("}")) v.push_back(parseStmt());
            take();
        } else {
            v.push_back(parseStmt());
        }
        return v;
    }

    ForStmt parseStmt() {
        if (peekIs("for")) {
            take();
            ForStmt s;
            s.kind = ForStmt::Kind::For;
            s.var = take();
            expect("in");
            std::string from = take();
            expect("..");
            std::string to = take();
            auto boundOf = [](const std::string& t, BoundKind& k, std::string& v) {
                if (t == "first")
                    k = BoundKind::First;
                else if (t == "last")
                    k = BoundKind::Last;
                else {
                    k = BoundKind::Var;
                    v = t;
                }
            };
            boundOf(from, s.fromKind, s.fromVar);
            boundOf(to, s.toKind, s.toVar);
            s.body = parseBlockOrStmt();
            return s;
        }
        if (peekIs("if")) {
            take();
            ForStmt s;
            s.kind = ForStmt::Kind::If;
            s.cond = parseCond();
            expect("then");
            s.thenBody = parseBlockOrStmt();
            if (peekIs("else")) {
                take();
                s.elseBody = parseBlockOrStmt();
            }
            return s;
        }
        if (peekIs("output")) {
            take();
            ForStmt s;
            s.kind = ForStmt::Kind::Output;
            s.symbol = take();
            return s;
        }
        if (peekIs("bool")) {
            take();
            ForStmt s;
            s.kind = ForStmt::Kind::BoolDecl;
            s.name = take();
            return s;
        }
        std::string name = take();
        if (isKeyword(name)) fail("unexpected keyword '" + name + "'");
        expect(":=");
        ForStmt s;
        s.kind = ForStmt::Kind::BoolSet;
        s.name = name;
        std::string v = take();
        if (v != "true" && v != "false") fail("boolean assignment must be true or false");
        s.value = v == "true";
        return s;
    }
};

void collectSymbols(const std::vector<ForStmt>& body, std::set<std::string>& labels,
                    std::set<std::string>& outputs) {
    std::function<void(const ForCond&)> condSyms = [&](const ForCond& c) {
        if (c.kind == ForCond::Kind::Label) labels.insert(c.symbol);
        for (const auto& a : c.args) condSyms(a);
    };
    for (const auto& s : body) {
        switch (s.kind) {
            case ForStmt::Kind::For:
                collectSymbols(s.body, labels, outputs);
                break;
            case ForStmt::Kind::If:
                condSyms(s.cond);
                collectSymbols(s.thenBody, labels, outputs);
                collectSymbols(s.elseBody, labels, outputs);
                break;
            case ForStmt::Kind::Output:
                outputs.insert(s.symbol);
                break;
            default:
                break;
        }
    }
}

void collectBoolDecls(const std::vector<ForStmt>& body, std::vector<std::string>& out) {
    for (const auto& s : body) {
        switch (s.kind) {
            case ForStmt::Kind::For:
                collectBoolDecls(s.body, out);
                break;
            case ForStmt::Kind::If:
                collectBoolDecls(s.thenBody, out);
                collectBoolDecls(s.elseBody, out);
                break;
            case ForStmt::Kind::BoolDecl:
                out.push_back(s.name);
                break;
            default:
                break;
        }
    }
}

struct ScopeChecker {
    std::set<std::string> posVars;
    std::vector<std::set<std::string>> boolScopes{{}};

    bool boolKnown(const std::string& b) const {
        for (const auto& s : boolScopes)
            if (s.count(b)) return true;
        return false;
    }

    void checkCond(const ForCond& c) {
        switch (c.kind) {
            case ForCond::Kind::Le:
            case ForCond::Kind::Lt:
            case ForCond::Kind::Eq:
                if (!posVars.count(c.x)) throw ParseError("unbound position variable " + c.x);
                if (!posVars.count(c.y)) throw ParseError("unbound position variable " + c.y);
                break;
            case ForCond::Kind::EqFirst:
            case ForCond::Kind::EqLast:
            case ForCond::Kind::Label:
                if (!posVars.count(c.x)) throw ParseError("unbound position variable " + c.x);
                break;
            case ForCond::Kind::BoolVar:
                if (!boolKnown(c.x)) throw ParseError("unbound boolean variable " + c.x);
                break;
            default:
                break;
        }
        for (const auto& a : c.args) checkCond(a);
    }

    void checkBound(BoundKind k, const std::string& v) {
        if (k == BoundKind::Var && !posVars.count(v))
            throw ParseError("unbound position variable " + v);
    }

    void check(const std::vector<ForStmt>& body) {
        boolScopes.emplace_back();
        for (const auto& s : body) {
            switch (s.kind) {
                case ForStmt::Kind::For:
                    if (posVars.count(s.var))
                        throw ParseError("position variable " + s.var + " rebound");
                    checkBound(s.fromKind, s.fromVar);
                    checkBound(s.toKind, s.toVar);
                    posVars.insert(s.var);
                    check(s.body);
                    posVars.erase(s.var);
                    break;
                case ForStmt::Kind::If:
                    checkCond(s.cond);
                    check(s.thenBody);
                    check(s.elseBody);
                    break;
                case ForStmt::Kind::BoolDecl:
                    if (boolKnown(s.name))
                        throw ParseError("boolean variable " + s.name + " redeclared");
                    boolScopes.back().insert(s.name);
                    break;
                case ForStmt::Kind::BoolSet:
                    if (!boolKnown(s.name))
                        throw ParseError("unbound boolean variable " + s.name);
                    break;
                default:
                    break;
            }
        }
        boolScopes.pop_back();
    }
};

}  // namespace

void ForProgram::validate() const {
    ScopeChecker sc;
    sc.check(body);
}

ForProgram forpParse(const std::string& text) {
    ForParser p{lex(text)};
    ForProgram prog;
    std::vector<std::string> declaredIn, declaredOut;
    while (!p.atEnd()) {
        if (p.peekIs("input") && p.pos + 1 < p.toks.size() && p.toks[p.pos + 1].text == ":") {
            p.take();
            p.take();
            auto v = p.headerTokens();
            declaredIn.insert(declaredIn.end(), v.begin(), v.end());
            continue;
        }
        if (p.peekIs("output") && p.pos + 1 < p.toks.size() && p.toks[p.pos + 1].text == ":") {
            p.take();
            p.take();
            auto v = p.headerTokens();
            declaredOut.insert(declaredOut.end(), v.begin(), v.end());
            continue;
        }
        break;
    }
    while (!p.atEnd()) prog.body.push_back(p.parseStmt());

    std::set<std::string> labels, outputs;
    collectSymbols(prog.body, labels, outputs);
    if (!declaredIn.empty())
        prog.inputAlphabet = Alphabet::make(declaredIn);
    else if (!labels.empty())
        prog.inputAlphabet = Alphabet::make({labels.begin(), labels.end()});
    if (!declaredOut.empty())
        prog.outputAlphabet = Alphabet::make(declaredOut);
    else if (!outputs.empty())
        prog.outputAlphabet = Alphabet::make({outputs.begin(), outputs.end()});
    else
        prog.outputAlphabet = Alphabet::make({"a"});
    if (prog.inputAlphabet) {
        for (const auto& t : labels)
            if (!prog.inputAlphabet->contains(t))
                throw ParseError("label test uses symbol outside the input alphabet: " + t);
    }
    for (const auto& t : outputs)
        if (!prog.outputAlphabet->contains(t))
            throw ParseError("output uses symbol outside the output alphabet: " + t);
    prog.validate();
    return prog;
}

namespace {

void printCond(std::ostringstream& os, const ForCond& c) {
    switch (c.kind) {
        case ForCond::Kind::True:
            os << "true";
            break;
        case ForCond::Kind::And:
            os << "(";
            printCond(os, c.args[0]);
            os << " and ";
            printCond(os, c.args[1]);
            os << ")";
            break;
        case ForCond::Kind::Or:
            os << "(";
            printCond(os, c.args[0]);
            os << " or ";
            printCond(os, c.args[1]);
            os << ")";
            break;
        case ForCond::Kind::Not:
            os << "not (";
            printCond(os, c.args[0]);
            os << ")";
            break;
        case ForCond::Kind::Le:
            os << c.x << " <= " << c.y;
            break;
        case ForCond::Kind::Lt:
            os << c.x << " < " << c.y;
            break;
        case ForCond::Kind::Eq:
            os << c.x << " = " << c.y;
            break;
        case ForCond::Kind::EqFirst:
            os << c.x << " = first";
            break;
        case ForCond::Kind::EqLast:
            os << c.x << " = last";
            break;
        case ForCond::Kind::Label:
            os << c.symbol << "(" << c.x << ")";
            break;
        case ForCond::Kind::BoolVar:
            os << c.x;
            break;
    }
}

void printStmts(std::ostringstream& os, const std::vector<ForStmt>& body, int indent) {
    std::string pad(indent * 2, ' ');
    for (const auto& s : body) {
        switch (s.kind) {
            case ForStmt::Kind::For: {
                auto boundStr = [](BoundKind k, const std::string& v) {
                    return k == BoundKind::First  ? std::string("first")
                           : k == BoundKind::Last ? std::string("last")
                                                  : v;
                };
                os << pad << "for " << s.var << " in " << boundStr(s.fromKind, s.fromVar) << ".."
                   << boundStr(s.toKind, s.toVar) << " {\n";
                printStmts(os, s.body, indent + 1);
                os << pad << "}\n";
                break;
            }
            case ForStmt::Kind::If:
                os << pad << "if ";
                printCond(os, s.cond);
                os << " then {\n";
                printStmts(os, s.thenBody, indent + 1);
                os << pad << "}";
                if (!s.elseBody.empty()) {
                    os << " else {\n";
                    printStmts(os, s.elseBody, indent + 1);
                    os << pad << "}";
                }
                os << "\n";
                break;
            case ForStmt::Kind::Output:
                os << pad << "output " << s.symbol << "\n";
                break;
            case ForStmt::Kind::BoolDecl:
                os << pad << "bool " << s.name << "\n";
                break;
            case ForStmt::Kind::BoolSet:
                os << pad << s.name << " := " << (s.value ? "true" : "false") << "\n";
                break;
        }
    }
}

}  // namespace

std::string forpPrint(const ForProgram& p) {
    std::ostringstream os;
    if (p.inputAlphabet) {
        os << "input:";
        for (const auto& t : p.inputAlphabet->tokens()) os << " " << t;
        os << "\n";
    }
    os << "output:";
    for (const auto& t : p.outputAlphabet->tokens()) os << " " << t;
    os << "\n";
    printStmts(os, p.body, 0);
    return os.str();
}

// ---------------------------------------------------------------------------
// Interpretation
// ---------------------------------------------------------------------------

namespace {

struct ForInterp {
    const Word& w;
    const AlphabetRef& outAlpha;
    std::vector<SymbolId> out;
    std::map<std::string, std::size_t> pos;
    std::map<std::string, std::pair<bool, std::size_t>> bools;  // value, change count
    std::size_t maxChanges = 0;

    std::size_t resolveBound(BoundKind k, const std::string& v) const {
        if (k == BoundKind::First) return 1;
        if (k == BoundKind::Last) return w.size();
        return pos.at(v);
    }

    bool evalCond(const ForCond& c) {
        switch (c.kind) {
            case ForCond::Kind::True:
                return true;
            case ForCond::Kind::And:
                return evalCond(c.args[0]) && evalCond(c.args[1]);
            case ForCond::Kind::Or:
                return evalCond(c.args[0]) || evalCond(c.args[1]);
            case ForCond::Kind::Not:
                return !evalCond(c.args[0]);
            case ForCond::Kind::Le:
                return pos.at(c.x) <= pos.at(c.y);
            case ForCond::Kind::Lt:
                return pos.at(c.x) < pos.at(c.y);
            case ForCond::Kind::Eq:
                return pos.at(c.x) == pos.at(c.y);
            case ForCond::Kind::EqFirst:
                return pos.at(c.x) == 1;
            case ForCond::Kind::EqLast:
                return pos.at(c.x) == w.size();
            case ForCond::Kind::Label:
                return w.tokenAt(pos.at(c.x) - 1) == c.symbol;
            case ForCond::Kind::BoolVar:
                return bools.at(c.x).first;
        }
        return false;
    }

    void run(const std::vector<ForStmt>& body) {
        std::vector<std::pair<std::string, std::optional<std::pair<bool, std::size_t>>>> saved;
        for (const auto& s : body) {
            switch (s.kind) {
                case ForStmt::Kind::For: {
                    if (w.empty()) break;
                    std::size_t from = resolveBound(s.fromKind, s.fromVar);
                    std::size_t to = resolveBound(s.toKind, s.toVar);
                    if (from <= to) {
                        for (std::size_t x = from; x <= to; ++x) {
                            pos[s.var] = x;
                            run(s.body);
                        }
                    } else {
                        for (std::size_t x = from;; --x) {
                            pos[s.var] = x;
                            run(s.body);
                            if (x == to) break;
                        }
                    }
                    pos.erase(s.var);
                    break;
                }
                case ForStmt::Kind::If:
                    if (evalCond(s.cond))
                        run(s.thenBody);
                    else
                        run(s.elseBody);
                    break;
                case ForStmt::Kind::Output:
                    out.push_back(outAlpha->id(s.symbol));
                    break;
                case ForStmt::Kind::BoolDecl: {
                    auto it = bools.find(s.name);
                    if (it != bools.end())
                        saved.push_back({s.name, it->second});
                    else
                        saved.push_back({s.name, std::nullopt});
                    bools[s.name] = {false, 0};
                    break;
                }
                case ForStmt::Kind::BoolSet: {
                    auto& cell = bools.at(s.name);
                    if (cell.first != s.value) {
                        cell.first = s.value;
                        ++cell.second;
                        maxChanges = std::max(maxChanges, cell.second);
                    }
                    break;
                }
            }
        }
        for (auto it = saved.rbegin(); it != saved.rend(); ++it) {
            if (it->second)
                bools[it->first] = *it->second;
            else
                bools.erase(it->first);
        }
    }
};

}  // namespace

Word forpEval(const ForProgram& p, const Word& w, ForEvalStats* stats) {
    ForInterp interp{w, p.outputAlphabet, {}, {}, {}, 0};
    interp.run(p.body);
    if (stats) stats->maxInstanceChanges = interp.maxChanges;
    return Word{p.outputAlphabet, std::move(interp.out)};
}

namespace {

bool anyFalseAssign(const std::vector<ForStmt>& body) {
    for (const auto& s : body) {
        switch (s.kind) {
            case ForStmt::Kind::For:
                if (anyFalseAssign(s.body)) return true;
                break;
            case ForStmt::Kind::If:
                if (anyFalseAssign(s.thenBody) || anyFalseAssign(s.elseBody)) return true;
                break;
            case ForStmt::Kind::BoolSet:
                if (!s.value) return true;
                break;
            default:
                break;
        }
    }
    return false;
}

}  // namespace

bool forpIsFirstOrder(const ForProgram& p) { return !anyFalseAssign(p.body); }

// ---------------------------------------------------------------------------
// Prenex normal form
// ---------------------------------------------------------------------------

namespace {

struct Renamer {
    std::size_t counter = 0;
    std::string fresh(const std::string& base) {
        return base + "_" + std::to_string(counter++);
    }
};

void renameCond(ForCond& c, const std::map<std::string, std::string>& m) {
    auto sub = [&](std::string& v) {
        auto it = m.find(v);
        if (it != m.end()) v = it->second;
    };
    switch (c.kind) {
        case ForCond::Kind::Le:
        case ForCond::Kind::Lt:
        case ForCond::Kind::Eq:
            sub(c.x);
            sub(c.y);
            break;
        case ForCond::Kind::EqFirst:
        case ForCond::Kind::EqLast:
        case ForCond::Kind::Label:
        case ForCond::Kind::BoolVar:
            sub(c.x);
            break;
        default:
            break;
    }
    for (auto& a : c.args) renameCond(a, m);
}

// Rename every bound name so fragments can be merged without collisions.
void uniquify(std::vector<ForStmt>& body, std::map<std::string, std::string> env, Renamer& rn) {
    for (auto& s : body) {
        switch (s.kind) {
            case ForStmt::Kind::For: {
                auto sub = [&](BoundKind k, std::string& v) {
                    if (k == BoundKind::Var) {
                        auto it = env.find(v);
                        if (it != env.end()) v = it->second;
                    }
                };
                sub(s.fromKind, s.fromVar);
                sub(s.toKind, s.toVar);
                std::string nn = rn.fresh(s.var);
                env[s.var] = nn;
                s.var = nn;
                uniquify(s.body, env, rn);
                break;
            }
            case ForStmt::Kind::If:
                renameCond(s.cond, env);
                uniquify(s.thenBody, env, rn);
                uniquify(s.elseBody, env, rn);
                break;
            case ForStmt::Kind::BoolDecl: {
                std::string nn = rn.fresh(s.name);
                env[s.name] = nn;
                s.name = nn;
                break;
            }
            case ForStmt::Kind::BoolSet: {
                auto it = env.find(s.name);
                if (it != env.end()) s.name = it->second;
                break;
            }
            default:
                break;
        }
    }
}

ForCond boundLeVar(BoundKind k, const std::string& bv, const std::string& x) {
    if (k == BoundKind::First) return ForCond::mkTrue();
    if (k == BoundKind::Last) return ForCond::cmp(ForCond::Kind::EqLast, x, "");
    return ForCond::cmp(ForCond::Kind::Le, bv, x);
}

ForCond varLeBound(const std::string& x, BoundKind k, const std::string& bv) {
    if (k == BoundKind::Last) return ForCond::mkTrue();
    if (k == BoundKind::First) return ForCond::cmp(ForCond::Kind::EqFirst, x, "");
    return ForCond::cmp(ForCond::Kind::Le, x, bv);
}

// Rewrite loops to full range; variable-bounded loops split into an
// ascending sweep and a strictly-descending one (the interval guard keeps
// exactly one of them active).
void fullRangeLoops(std::vector<ForStmt>& body, Renamer& rn) {
    std::vector<ForStmt> out;
    for (auto& s : body) {
        if (s.kind == ForStmt::Kind::If) {
            fullRangeLoops(s.thenBody, rn);
            fullRangeLoops(s.elseBody, rn);
            out.push_back(std::move(s));
            continue;
        }
        if (s.kind != ForStmt::Kind::For) {
            out.push_back(std::move(s));
            continue;
        }
        fullRangeLoops(s.body, rn);
        bool fromFirst = s.fromKind == BoundKind::First;
        bool fromLast = s.fromKind == BoundKind::Last;
        bool toFirst = s.toKind == BoundKind::First;
        bool toLast = s.toKind == BoundKind::Last;
        if ((fromFirst && toLast) || (fromLast && toFirst)) {
            out.push_back(std::move(s));
            continue;
        }
        auto guarded = [&](bool descending, ForCond guard, std::vector<ForStmt> innerBody,
                           const std::string& var) {
            ForStmt loop;
            loop.kind = ForStmt::Kind::For;
            loop.var = var;
            loop.fromKind = descending ? BoundKind::Last : BoundKind::First;
            loop.toKind = descending ? BoundKind::First : BoundKind::Last;
            ForStmt gif;
            gif.kind = ForStmt::Kind::If;
            gif.cond = std::move(guard);
            gif.thenBody = std::move(innerBody);
            loop.body.push_back(std::move(gif));
            return loop;
        };
        if (fromFirst && toFirst) {
            out.push_back(guarded(false, ForCond::cmp(ForCond::Kind::EqFirst, s.var, ""),
                                  std::move(s.body), s.var));
            continue;
        }
        if (fromLast && toLast) {
            out.push_back(guarded(false, ForCond::cmp(ForCond::Kind::EqLast, s.var, ""),
                                  std::move(s.body), s.var));
            continue;
        }
        bool staticAsc = fromFirst || toLast;
        bool staticDesc = fromLast || toFirst;
        ForCond lower = boundLeVar(s.fromKind, s.fromVar, s.var);   // from <= x
        ForCond upper = varLeBound(s.var, s.toKind, s.toVar);       // x <= to
        if (staticAsc) {
            out.push_back(guarded(false, ForCond::conj(std::move(lower), std::move(upper)),
                                  std::move(s.body), s.var));
            continue;
        }
        if (staticDesc) {
            ForCond lowerD = boundLeVar(s.toKind, s.toVar, s.var);
            ForCond upperD = varLeBound(s.var, s.fromKind, s.fromVar);
            out.push_back(guarded(true, ForCond::conj(std::move(lowerD), std::move(upperD)),
                                  std::move(s.body), s.var));
            continue;
        }
        // both bounds are variables: direction decided at run time
        std::vector<ForStmt> cloned = s.body;
        std::map<std::string, std::string> env;
        std::string var2 = rn.fresh(s.var);
        env[s.var] = var2;
        uniquify(cloned, env, rn);
        out.push_back(guarded(false, ForCond::conj(std::move(lower), std::move(upper)),
                              std::move(s.body), s.var));
        ForCond strict = ForCond::cmp(ForCond::Kind::Lt, s.toVar, s.fromVar);
        ForCond lower2 = boundLeVar(s.toKind, s.toVar, var2);
        ForCond upper2 = varLeBound(var2, s.fromKind, s.fromVar);
        out.push_back(guarded(true,
                              ForCond::conj(ForCond::conj(std::move(lower2), std::move(upper2)),
                                            std::move(strict)),
                              std::move(cloned), var2));
    }
    body = std::move(out);
}

struct Fragment {
    std::vector<PrenexLoop> loops;
    std::vector<ForStmt> kernel;
    std::vector<std::string> hoistBools;
};

ForCond loopsAtInit(const std::vector<PrenexLoop>& loops) {
    ForCond c = ForCond::mkTrue();
    bool any = false;
    for (const auto& l : loops) {
        ForCond a = ForCond::cmp(l.descending ? ForCond::Kind::EqLast : ForCond::Kind::EqFirst,
                                 l.var, "");
        c = any ? ForCond::conj(std::move(c), std::move(a)) : std::move(a);
        any = true;
    }
    return c;
}

ForCond loopsAtFinal(const std::vector<PrenexLoop>& loops) {
    ForCond c = ForCond::mkTrue();
    bool any = false;
    for (const auto& l : loops) {
        ForCond a = ForCond::cmp(l.descending ? ForCond::Kind::EqFirst : ForCond::Kind::EqLast,
                                 l.var, "");
        c = any ? ForCond::conj(std::move(c), std::move(a)) : std::move(a);
        any = true;
    }
    return c;
}

std::vector<ForStmt> gate(ForCond c, std::vector<ForStmt> body) {
    if (body.empty()) return {};
    if (c.kind == ForCond::Kind::True) return body;
    ForStmt s;
    s.kind = ForStmt::Kind::If;
    s.cond = std::move(c);
    s.thenBody = std::move(body);
    std::vector<ForStmt> v;
    v.push_back(std::move(s));
    return v;
}

Fragment mergeFragments(Fragment a, Fragment b) {
    Fragment m;
    m.hoistBools = std::move(a.hoistBools);
    m.hoistBools.insert(m.hoistBools.end(), b.hoistBools.begin(), b.hoistBools.end());
    ForCond bInit = loopsAtInit(b.loops);
    ForCond aFinal = loopsAtFinal(a.loops);
    m.loops = std::move(a.loops);
    m.loops.insert(m.loops.end(), b.loops.begin(), b.loops.end());
    auto part1 = gate(std::move(bInit), std::move(a.kernel));
    auto part2 = gate(std::move(aFinal), std::move(b.kernel));
    m.kernel = std::move(part1);
    m.kernel.insert(m.kernel.end(), part2.begin(), part2.end());
    return m;
}

bool stmtsHaveLoop(const std::vector<ForStmt>& b) {
    for (const auto& st : b) {
        if (st.kind == ForStmt::Kind::For) return true;
        if (st.kind == ForStmt::Kind::If &&
            (stmtsHaveLoop(st.thenBody) || stmtsHaveLoop(st.elseBody)))
            return true;
    }
    return false;
}

Fragment compileFragment(std::vector<ForStmt>& body, Renamer& rn);

Fragment compileStmt(ForStmt& s, Renamer& rn) {
    Fragment f;
    switch (s.kind) {
        case ForStmt::Kind::For: {
            Fragment inner = compileFragment(s.body, rn);
            PrenexLoop l;
            l.var = s.var;
            l.descending = s.fromKind == BoundKind::Last;
            l.bools = std::move(inner.hoistBools);
            f.loops.push_back(std::move(l));
            f.loops.insert(f.loops.end(), inner.loops.begin(), inner.loops.end());
            f.kernel = std::move(inner.kernel);
            return f;
        }
        case ForStmt::Kind::If: {
            if (!stmtsHaveLoop(s.thenBody) && !stmtsHaveLoop(s.elseBody)) {
                f.kernel.push_back(std::move(s));
                return f;
            }
            Fragment ft = compileFragment(s.thenBody, rn);
            Fragment fe = compileFragment(s.elseBody, rn);
            std::string cb = rn.fresh("c");
            Fragment snap;
            snap.hoistBools.push_back(cb);
            ForStmt setIf;
            setIf.kind = ForStmt::Kind::If;
            setIf.cond = std::move(s.cond);
            ForStmt setTrue;
            setTrue.kind = ForStmt::Kind::BoolSet;
            setTrue.name = cb;
            setTrue.value = true;
            setIf.thenBody.push_back(std::move(setTrue));
            snap.kernel.push_back(std::move(setIf));

            ft.kernel = gate(ForCond::boolVar(cb), std::move(ft.kernel));
            fe.kernel = gate(ForCond::neg(ForCond::boolVar(cb)), std::move(fe.kernel));
            return mergeFragments(std::move(snap),
                                  mergeFragments(std::move(ft), std::move(fe)));
        }
        case ForStmt::Kind::BoolDecl:
            // hoist: a kernel-resident declaration would not survive from one
            // kernel execution to the next
            f.hoistBools.push_back(s.name);
            return f;
        default:
            f.kernel.push_back(std::move(s));
            return f;
    }
}

Fragment compileFragment(std::vector<ForStmt>& body, Renamer& rn) {
    Fragment acc;
    bool first = true;
    for (auto& s : body) {
        Fragment fs = compileStmt(s, rn);
        if (first) {
            acc = std::move(fs);
            first = false;
        } else {
            acc = mergeFragments(std::move(acc), std::move(fs));
        }
    }
    return acc;
}

void checkLoopFree(const std::vector<ForStmt>& body) {
    for (const auto& s : body) {
        if (s.kind == ForStmt::Kind::For) throw PolyregError("prenex kernel contains a loop");
        if (s.kind == ForStmt::Kind::If) {
            checkLoopFree(s.thenBody);
            checkLoopFree(s.elseBody);
        }
    }
}

}  // namespace

void PrenexProgram::validate() const { checkLoopFree(kernel); }

PrenexProgram forpPrenex(const ForProgram& p) {
    ForProgram q = p;
    Renamer rn;
    uniquify(q.body, {}, rn);
    fullRangeLoops(q.body, rn);
    Fragment top = compileFragment(q.body, rn);

    PrenexProgram out;
    out.preBools = std::move(top.hoistBools);
    out.loops = std::move(top.loops);
    out.kernel = std::move(top.kernel);
    out.inputAlphabet = p.inputAlphabet;
    out.outputAlphabet = p.outputAlphabet;
    out.emptyOutput = forpEval(p, Word{p.outputAlphabet, {}}).syms;
    out.validate();
    return out;
}

ForProgram PrenexProgram::toForProgram() const {
    ForProgram p;
    p.inputAlphabet = inputAlphabet;
    p.outputAlphabet = outputAlphabet;

    // The empty-word output cannot come from inside a loop nest, so detect
    // emptiness up front.
    if (!emptyOutput.empty()) {
        ForStmt decl;
        decl.kind = ForStmt::Kind::BoolDecl;
        decl.name = "__nonempty";
        p.body.push_back(std::move(decl));
        ForStmt loop;
        loop.kind = ForStmt::Kind::For;
        loop.var = "__z";
        loop.fromKind = BoundKind::First;
        loop.toKind = BoundKind::Last;
        ForStmt set;
        set.kind = ForStmt::Kind::BoolSet;
        set.name = "__nonempty";
        set.value = true;
        loop.body.push_back(std::move(set));
        p.body.push_back(std::move(loop));
        ForStmt iff;
        iff.kind = ForStmt::Kind::If;
        iff.cond = ForCond::neg(ForCond::boolVar("__nonempty"));
        for (auto sym : emptyOutput) {
            ForStmt o;
            o.kind = ForStmt::Kind::Output;
            o.symbol = outputAlphabet->token(sym);
            iff.thenBody.push_back(std::move(o));
        }
        p.body.push_back(std::move(iff));
    }
    for (const auto& b : preBools) {
        ForStmt d;
        d.kind = ForStmt::Kind::BoolDecl;
        d.name = b;
        p.body.push_back(std::move(d));
    }
    std::vector<ForStmt>* where = &p.body;
    for (const auto& l : loops) {
        ForStmt loop;
        loop.kind = ForStmt::Kind::For;
        loop.var = l.var;
        loop.fromKind = l.descending ? BoundKind::Last : BoundKind::First;
        loop.toKind = l.descending ? BoundKind::First : BoundKind::Last;
        where->push_back(std::move(loop));
        ForStmt& placed = where->back();
        for (const auto& b : l.bools) {
            ForStmt d;
            d.kind = ForStmt::Kind::BoolDecl;
            d.name = b;
            placed.body.push_back(std::move(d));
        }
        where = &placed.body;
    }
    where->insert(where->end(), kernel.begin(), kernel.end());
    return p;
}

Word prenexEval(const PrenexProgram& p, const Word& w) {
    if (w.empty()) return Word{p.outputAlphabet, p.emptyOutput};
    return forpEval(p.toForProgram(), w);
}

// ---------------------------------------------------------------------------
// Compilation to pebble transducers
// ---------------------------------------------------------------------------

namespace {

struct KInstr {
    enum class Op { Out, Set, Decl, Branch, Jump };
    Op op = Op::Jump;
    SymbolId sym = 0;
    std::size_t boolIdx = 0;
    bool value = false;
    ForCond cond;
    std::size_t target = 0;  // Branch: where to go when the condition fails
};

struct FoldedGuard {
    bool isConst = false;
    bool cval = false;
    GuardExpr g;

    static FoldedGuard constant(bool v) { return {true, v, {}}; }
    static FoldedGuard guard(GuardExpr e) { return {false, false, std::move(e)}; }
};

FoldedGuard foldNot(FoldedGuard a) {
    if (a.isConst) return FoldedGuard::constant(!a.cval);
    return FoldedGuard::guard(GuardExpr::neg(std::move(a.g)));
}
FoldedGuard foldAnd(FoldedGuard a, FoldedGuard b) {
    if (a.isConst) return a.cval ? std::move(b) : FoldedGuard::constant(false);
    if (b.isConst) return b.cval ? std::move(a) : FoldedGuard::constant(false);
    return FoldedGuard::guard(GuardExpr::conj(std::move(a.g), std::move(b.g)));
}
FoldedGuard foldOr(FoldedGuard a, FoldedGuard b) {
    if (a.isConst) return a.cval ? FoldedGuard::constant(true) : std::move(b);
    if (b.isConst) return b.cval ? FoldedGuard::constant(true) : std::move(a);
    return FoldedGuard::guard(GuardExpr::disj(std::move(a.g), std::move(b.g)));
}

struct SymEnv {
    std::vector<bool> bools;
    std::vector<SymbolId> labels;

    std::string encode() const {
        std::string s;
        for (bool b : bools) s += b ? '1' : '0';
        s += '/';
        for (auto l : labels) {
            s += std::to_string(l);
            s += ',';
        }
        return s;
    }
};

}  // namespace

PebbleTransducer forpToPebble(const ForProgram& prog) {
    if (!prog.inputAlphabet)
        throw PolyregError("forp_to_pebble needs an input alphabet (add an input: header)");
    PrenexProgram p = forpPrenex(prog);
    const AlphabetRef& sigma = p.inputAlphabet;
    const AlphabetRef& gamma = p.outputAlphabet;
    std::size_t n = p.loops.size();

    struct Builder {
        PebbleTransducer t;
        std::map<std::string, std::size_t> index;
        std::size_t state(const std::string& name, std::vector<SymbolId> output = {}) {
            auto it = index.find(name);
            if (it != index.end()) return it->second;
            std::size_t id = t.stateNames.size();
            index.emplace(name, id);
            t.stateNames.push_back(name);
            t.stateOutput.push_back(std::move(output));
            return id;
        }
        void rule(std::size_t src, std::vector<bool> letters, GuardExpr g, std::size_t dst,
                  PebbleAction a) {
            t.rules.push_back(GuardedRule{src, std::move(letters), std::move(g), dst, a});
        }
    } bld;

    bld.t.inputAlphabet = sigma;
    bld.t.outputAlphabet = gamma;
    bld.t.maxPebbles = std::max<std::size_t>(n, 1);
    bld.t.emptyInputOutput = p.emptyOutput;
    std::vector<bool> ALL(sigma->size(), true);

    if (n == 0) {
        // a loop-free program ignores everything but emptiness
        Word constOut = forpEval(p.toForProgram(), wordFromTokens(sigma, {sigma->token(0)}));
        std::size_t fin = bld.state("final");
        std::size_t start = bld.state("start", constOut.syms);
        bld.t.initial = start;
        bld.t.final = fin;
        bld.rule(start, ALL, GuardExpr::mkTrue(), fin, PebbleAction::Stay);
        bld.t.validate();
        return bld.t;
    }

    // bool universe and kernel bytecode
    std::map<std::string, std::size_t> boolIndex;
    std::vector<std::size_t> boolDepth;
    auto boolBit = [&](const std::string& name, std::size_t depth) {
        auto it = boolIndex.find(name);
        if (it != boolIndex.end()) return it->second;
        std::size_t id = boolIndex.size();
        boolIndex.emplace(name, id);
        boolDepth.push_back(depth);
        return id;
    };
    for (const auto& bn : p.preBools) boolBit(bn, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& bn : p.loops[i].bools) boolBit(bn, i + 1);
    {
        std::vector<std::string> kernelDecls;
        collectBoolDecls(p.kernel, kernelDecls);
        for (const auto& bn : kernelDecls) boolBit(bn, 1);  // reset on every iteration
    }

    std::map<std::string, std::size_t> varIndex;
    for (std::size_t i = 0; i < n; ++i) varIndex[p.loops[i].var] = i + 1;

    std::vector<KInstr> code;
    std::function<void(const std::vector<ForStmt>&)> compileK =
        [&](const std::vector<ForStmt>& body) {
            for (const auto& s : body) {
                switch (s.kind) {
                    case ForStmt::Kind::Output: {
                        KInstr k;
                        k.op = KInstr::Op::Out;
                        k.sym = gamma->id(s.symbol);
                        code.push_back(std::move(k));
                        break;
                    }
                    case ForStmt::Kind::BoolSet: {
                        KInstr k;
                        k.op = KInstr::Op::Set;
                        k.boolIdx = boolIndex.at(s.name);
                        k.value = s.value;
                        code.push_back(std::move(k));
                        break;
                    }
                    case ForStmt::Kind::BoolDecl: {
                        KInstr k;
                        k.op = KInstr::Op::Decl;
                        k.boolIdx = boolIndex.at(s.name);
                        code.push_back(std::move(k));
                        break;
                    }
                    case ForStmt::Kind::If: {
                        KInstr br;
                        br.op = KInstr::Op::Branch;
                        br.cond = s.cond;
                        std::size_t brAt = code.size();
                        code.push_back(std::move(br));
                        compileK(s.thenBody);
                        if (s.elseBody.empty()) {
                            code[brAt].target = code.size();
                        } else {
                            KInstr jmp;
                            jmp.op = KInstr::Op::Jump;
                            std::size_t jmpAt = code.size();
                            code.push_back(std::move(jmp));
                            code[brAt].target = code.size();
                            compileK(s.elseBody);
                            code[jmpAt].target = code.size();
                        }
                        break;
                    }
                    case ForStmt::Kind::For:
                        throw PolyregError("prenex kernel contains a loop");
                }
            }
        };
    compileK(p.kernel);

    std::size_t nbools = boolIndex.size();

    auto resetFromDepth = [&](SymEnv env, std::size_t depth) {
        for (std::size_t bit = 0; bit < nbools; ++bit)
            if (boolDepth[bit] >= depth) env.bools[bit] = false;
        for (std::size_t i = depth; i <= n; ++i)
            if (i >= 1) env.labels[i - 1] = 0;
        return env;
    };

    auto foldCond = [&](const ForCond& c, const SymEnv& env) {
        std::function<FoldedGuard(const ForCond&)> go = [&](const ForCond& c2) -> FoldedGuard {
            switch (c2.kind) {
                case ForCond::Kind::True:
                    return FoldedGuard::constant(true);
                case ForCond::Kind::And:
                    return foldAnd(go(c2.args[0]), go(c2.args[1]));
                case ForCond::Kind::Or:
                    return foldOr(go(c2.args[0]), go(c2.args[1]));
                case ForCond::Kind::Not:
                    return foldNot(go(c2.args[0]));
                case ForCond::Kind::Le:
                    return FoldedGuard::guard(
                        GuardExpr::le(varIndex.at(c2.x), varIndex.at(c2.y)));
                case ForCond::Kind::Lt:
                    return foldNot(FoldedGuard::guard(
                        GuardExpr::le(varIndex.at(c2.y), varIndex.at(c2.x))));
                case ForCond::Kind::Eq: {
                    std::size_t i = varIndex.at(c2.x), j = varIndex.at(c2.y);
                    return FoldedGuard::guard(
                        GuardExpr::conj(GuardExpr::le(i, j), GuardExpr::le(j, i)));
                }
                case ForCond::Kind::EqFirst:
                    return FoldedGuard::guard(GuardExpr::atFirst(varIndex.at(c2.x)));
                case ForCond::Kind::EqLast:
                    return FoldedGuard::guard(GuardExpr::atLast(varIndex.at(c2.x)));
                case ForCond::Kind::Label: {
                    std::size_t i = varIndex.at(c2.x);
                    return FoldedGuard::constant(env.labels[i - 1] == sigma->id(c2.symbol));
                }
                case ForCond::Kind::BoolVar:
                    return FoldedGuard::constant(env.bools[boolIndex.at(c2.x)]);
            }
            return FoldedGuard::constant(false);
        };
        return go(c);
    };

    std::size_t fin = bld.state("final");
    bld.t.final = fin;

    struct Pending {
        enum class Kind { Seek, Read, KernelAt, Advance } kind;
        std::size_t i = 0;
        std::size_t pc = 0;
        SymEnv env;
        std::size_t stateId = 0;
    };
    std::vector<Pending> work;
    std::map<std::string, std::size_t> made;

    auto enqueue = [&](Pending pd, const std::string& name, std::vector<SymbolId> output) {
        auto it = made.find(name);
        if (it != made.end()) return it->second;
        std::size_t id = bld.state(name, std::move(output));
        made.emplace(name, id);
        pd.stateId = id;
        work.push_back(std::move(pd));
        return id;
    };

    auto renderOut = [&](const std::vector<SymbolId>& w) {
        std::string s;
        for (auto a : w) {
            s += std::to_string(a);
            s += '.';
        }
        return s;
    };

    auto seekState = [&](std::size_t i, SymEnv env) {
        env = resetFromDepth(env, i);
        Pending pd;
        pd.kind = Pending::Kind::Seek;
        pd.i = i;
        pd.env = env;
        return enqueue(pd, "S" + std::to_string(i) + ":" + env.encode(), {});
    };

    std::function<std::size_t(std::size_t, SymEnv)> kernelState = [&](std::size_t pcStart,
                                                                      SymEnv env) {
        std::vector<SymbolId> emitted;
        std::size_t ip = pcStart;
        for (;;) {
            if (ip >= code.size()) {
                Pending pd;
                pd.kind = Pending::Kind::Advance;
                pd.i = n;
                pd.env = env;
                std::string name =
                    "A" + std::to_string(n) + ":" + env.encode() + ":" + renderOut(emitted);
                return enqueue(pd, name, std::move(emitted));
            }
            const KInstr& k = code[ip];
            if (k.op == KInstr::Op::Out) {
                emitted.push_back(k.sym);
                ++ip;
                continue;
            }
            if (k.op == KInstr::Op::Set) {
                env.bools[k.boolIdx] = k.value;
                ++ip;
                continue;
            }
            if (k.op == KInstr::Op::Decl) {
                env.bools[k.boolIdx] = false;
                ++ip;
                continue;
            }
            if (k.op == KInstr::Op::Jump) {
                ip = k.target;
                continue;
            }
            FoldedGuard fg = foldCond(k.cond, env);
            if (fg.isConst) {
                ip = fg.cval ? ip + 1 : k.target;
                continue;
            }
            Pending pd;
            pd.kind = Pending::Kind::KernelAt;
            pd.pc = ip;
            pd.env = env;
            std::string name =
                "K" + std::to_string(ip) + ":" + env.encode() + ":" + renderOut(emitted);
            return enqueue(pd, name, std::move(emitted));
        }
    };

    {
        SymEnv env;
        env.bools.assign(nbools, false);
        env.labels.assign(n, 0);
        bld.t.initial = seekState(1, env);
    }

    while (!work.empty()) {
        Pending pd = work.back();
        work.pop_back();
        switch (pd.kind) {
            case Pending::Kind::Seek: {
                bool desc = p.loops[pd.i - 1].descending;
                GuardExpr atStart = desc ? GuardExpr::atLast(pd.i) : GuardExpr::atFirst(pd.i);
                Pending rd;
                rd.kind = Pending::Kind::Read;
                rd.i = pd.i;
                rd.env = pd.env;
                std::size_t readId =
                    enqueue(rd, "R" + std::to_string(pd.i) + ":" + pd.env.encode(), {});
                bld.rule(pd.stateId, ALL, atStart, readId, PebbleAction::Stay);
                bld.rule(pd.stateId, ALL, GuardExpr::mkTrue(), pd.stateId,
                         desc ? PebbleAction::MoveRight : PebbleAction::MoveLeft);
                break;
            }
            case Pending::Kind::Read: {
                for (SymbolId a = 0; a < sigma->size(); ++a) {
                    SymEnv env = pd.env;
                    env.labels[pd.i - 1] = a;
                    std::vector<bool> letter(sigma->size(), false);
                    letter[a] = true;
                    if (pd.i < n) {
                        std::size_t nxt = seekState(pd.i + 1, env);
                        bld.rule(pd.stateId, letter, GuardExpr::mkTrue(), nxt,
                                 PebbleAction::Push);
                    } else {
                        std::size_t nxt = kernelState(0, env);
                        bld.rule(pd.stateId, letter, GuardExpr::mkTrue(), nxt,
                                 PebbleAction::Stay);
                    }
                }
                break;
            }
            case Pending::Kind::KernelAt: {
                const KInstr& k = code[pd.pc];
                FoldedGuard fg = foldCond(k.cond, pd.env);
                std::size_t thenId = kernelState(pd.pc + 1, pd.env);
                std::size_t elseId = kernelState(k.target, pd.env);
                bld.rule(pd.stateId, ALL, fg.g, thenId, PebbleAction::Stay);
                bld.rule(pd.stateId, ALL, GuardExpr::mkTrue(), elseId, PebbleAction::Stay);
                break;
            }
            case Pending::Kind::Advance: {
                bool desc = p.loops[pd.i - 1].descending;
                GuardExpr atEnd = desc ? GuardExpr::atFirst(pd.i) : GuardExpr::atLast(pd.i);
                if (pd.i == 1) {
                    bld.rule(pd.stateId, ALL, atEnd, fin, PebbleAction::Stay);
                } else {
                    SymEnv up = resetFromDepth(pd.env, pd.i);
                    Pending adv;
                    adv.kind = Pending::Kind::Advance;
                    adv.i = pd.i - 1;
                    adv.env = up;
                    std::size_t upId = enqueue(
                        adv, "A" + std::to_string(pd.i - 1) + ":" + up.encode() + ":", {});
                    bld.rule(pd.stateId, ALL, atEnd, upId, PebbleAction::Pop);
                }
                SymEnv env = resetFromDepth(pd.env, pd.i);
                Pending rd;
                rd.kind = Pending::Kind::Read;
                rd.i = pd.i;
                rd.env = env;
                std::size_t readId =
                    enqueue(rd, "R" + std::to_string(pd.i) + ":" + env.encode(), {});
                bld.rule(pd.stateId, ALL, GuardExpr::mkTrue(), readId,
                         desc ? PebbleAction::MoveLeft : PebbleAction::MoveRight);
                break;
            }
        }
    }

    bld.t.validate();
    return bld.t;
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

namespace {

std::size_t maxKernelOutputs(const std::vector<ForStmt>& body) {
    std::size_t total = 0;
    for (const auto& s : body) {
        if (s.kind == ForStmt::Kind::Output) total += 1;
        if (s.kind == ForStmt::Kind::If)
            total += std::max(maxKernelOutputs(s.thenBody), maxKernelOutputs(s.elseBody));
    }
    return total;
}

bool condUses(const ForCond& c, ForCond::Kind k) {
    if (c.kind == k) return true;
    for (const auto& a : c.args)
        if (condUses(a, k)) return true;
    return false;
}
bool stmtsUse(const std::vector<ForStmt>& body, ForCond::Kind k) {
    for (const auto& s : body) {
        if (s.kind == ForStmt::Kind::If &&
            (condUses(s.cond, k) || stmtsUse(s.thenBody, k) || stmtsUse(s.elseBody, k)))
            return true;
        if (s.kind == ForStmt::Kind::For && stmtsUse(s.body, k)) return true;
    }
    return false;
}

struct SlotNames {
    std::vector<std::string> tupleVars;
    std::vector<std::string> cnt;               // cnt[k]: at least k+1 outputs
    std::vector<std::vector<std::string>> let;  // let[k][midSym]
    std::string outBefore;
    std::string outAfter;
};

}  // namespace

ForProgram forpCompose(const ForProgram& f, const ForProgram& g) {
    if (!f.inputAlphabet) throw PolyregError("forp_compose: f needs an input alphabet");
    if (!g.inputAlphabet) throw PolyregError("forp_compose: g needs an input alphabet");
    for (const auto& t : f.outputAlphabet->tokens())
        if (!g.inputAlphabet->contains(t))
            throw AlphabetMismatchError(
                "forp_compose: f's output alphabet is not contained in g's input alphabet");

    PrenexProgram fp = forpPrenex(f);
    PrenexProgram gp = forpPrenex(g);
    std::size_t n = fp.loops.size();
    std::size_t m = gp.loops.size();
    std::size_t K = maxKernelOutputs(fp.kernel);
    AlphabetRef mid = g.inputAlphabet;
    Renamer rn;

    ForProgram out;
    out.inputAlphabet = f.inputAlphabet;
    out.outputAlphabet = g.outputAlphabet;

    Word fEps{f.outputAlphabet, fp.emptyOutput};
    Word gOfFEps = forpEval(g, rebaseWord(fEps, mid));
    Word gEps{g.outputAlphabet, gp.emptyOutput};

    auto emitConst = [&](const Word& w, std::vector<ForStmt>& into) {
        for (auto sym : w.syms) {
            ForStmt o;
            o.kind = ForStmt::Kind::Output;
            o.symbol = w.alphabet->token(sym);
            into.push_back(std::move(o));
        }
    };

    std::string inNonempty = rn.fresh("inNonempty");
    {
        ForStmt d;
        d.kind = ForStmt::Kind::BoolDecl;
        d.name = inNonempty;
        out.body.push_back(std::move(d));
        ForStmt loop;
        loop.kind = ForStmt::Kind::For;
        loop.var = rn.fresh("z");
        loop.fromKind = BoundKind::First;
        loop.toKind = BoundKind::Last;
        ForStmt set;
        set.kind = ForStmt::Kind::BoolSet;
        set.name = inNonempty;
        set.value = true;
        loop.body.push_back(std::move(set));
        out.body.push_back(std::move(loop));
        ForStmt iff;
        iff.kind = ForStmt::Kind::If;
        iff.cond = ForCond::neg(ForCond::boolVar(inNonempty));
        emitConst(gOfFEps, iff.thenBody);
        out.body.push_back(std::move(iff));
    }

    if (n == 0 || K == 0) {
        // f emits a constant on every nonempty input
        Word fConst = n == 0 ? forpEval(f, wordFromTokens(f.inputAlphabet,
                                                          {f.inputAlphabet->token(0)}))
                             : Word{f.outputAlphabet, {}};
        if (K == 0) fConst = Word{f.outputAlphabet, {}};
        Word gOfConst = forpEval(g, rebaseWord(fConst, mid));
        ForStmt iff;
        iff.kind = ForStmt::Kind::If;
        iff.cond = ForCond::boolVar(inNonempty);
        emitConst(gOfConst, iff.thenBody);
        out.body.push_back(std::move(iff));
        out.validate();
        return out;
    }

    // fresh copy names for g's booleans (pre, per-depth and kernel-local)
    std::map<std::string, std::string> gBoolMap;
    for (const auto& bn : gp.preBools) gBoolMap[bn] = rn.fresh("gb");
    for (const auto& l : gp.loops)
        for (const auto& bn : l.bools) gBoolMap[bn] = rn.fresh("gb");
    {
        std::vector<std::string> kd;
        collectBoolDecls(gp.kernel, kd);
        for (const auto& bn : kd) gBoolMap[bn] = rn.fresh("gb");
    }

    auto makeSlotNames = [&]() {
        SlotNames sn;
        for (std::size_t i = 0; i < n; ++i) sn.tupleVars.push_back(rn.fresh("u"));
        for (std::size_t k = 0; k < K; ++k) sn.cnt.push_back(rn.fresh("cnt"));
        sn.let.resize(K);
        for (std::size_t k = 0; k < K; ++k)
            for (SymbolId a = 0; a < mid->size(); ++a) sn.let[k].push_back(rn.fresh("let"));
        sn.outBefore = rn.fresh("outBefore");
        sn.outAfter = rn.fresh("outAfter");
        return sn;
    };

    // Builds an enumeration nest of f's loops over fresh variables,
    // declaring fresh copies of f's booleans; returns the innermost body.
    auto buildFNest = [&](std::vector<ForStmt>& into, const std::vector<std::string>& tupleVars,
                          std::map<std::string, std::string>& boolMap, bool flip) {
        boolMap.clear();
        for (const auto& bn : fp.preBools) boolMap[bn] = rn.fresh("fb");
        for (const auto& l : fp.loops)
            for (const auto& bn : l.bools) boolMap[bn] = rn.fresh("fb");
        {
            std::vector<std::string> kd;
            collectBoolDecls(fp.kernel, kd);
            for (const auto& bn : kd) boolMap[bn] = rn.fresh("fb");
        }
        for (const auto& bn : fp.preBools) {
            ForStmt d;
            d.kind = ForStmt::Kind::BoolDecl;
            d.name = boolMap[bn];
            into.push_back(std::move(d));
        }
        std::vector<ForStmt>* where = &into;
        for (std::size_t i = 0; i < n; ++i) {
            ForStmt loop;
            loop.kind = ForStmt::Kind::For;
            loop.var = tupleVars[i];
            bool desc = fp.loops[i].descending != flip;
            loop.fromKind = desc ? BoundKind::Last : BoundKind::First;
            loop.toKind = desc ? BoundKind::First : BoundKind::Last;
            where->push_back(std::move(loop));
            ForStmt& placed = where->back();
            for (const auto& bn : fp.loops[i].bools) {
                ForStmt d;
                d.kind = ForStmt::Kind::BoolDecl;
                d.name = boolMap[bn];
                placed.body.push_back(std::move(d));
            }
            where = &placed.body;
        }
        return where;
    };

    auto varMapFor = [&](const std::vector<std::string>& tupleVars) {
        std::map<std::string, std::string> vm;
        for (std::size_t i = 0; i < n; ++i) vm[fp.loops[i].var] = tupleVars[i];
        return vm;
    };

    // f's kernel with bools/vars renamed; outputs either dropped or recorded
    // into the given cnt/let names (an if-else chain per output instruction).
    std::function<std::vector<ForStmt>(const std::vector<ForStmt>&,
                                       const std::map<std::string, std::string>&,
                                       const std::map<std::string, std::string>&,
                                       const std::vector<std::string>*,
                                       const std::vector<std::vector<std::string>>*)>
        fKernel = [&](const std::vector<ForStmt>& body,
                      const std::map<std::string, std::string>& boolMap,
                      const std::map<std::string, std::string>& varMap,
                      const std::vector<std::string>* cnt,
                      const std::vector<std::vector<std::string>>* let)
        -> std::vector<ForStmt> {
        std::vector<ForStmt> res;
        for (const auto& s : body) {
            switch (s.kind) {
                case ForStmt::Kind::Output: {
                    if (!cnt || cnt->empty()) break;
                    SymbolId a = mid->id(s.symbol);
                    ForStmt* attach = nullptr;
                    std::vector<ForStmt> chain;
                    for (std::size_t k = 0; k < cnt->size(); ++k) {
                        ForStmt iff;
                        iff.kind = ForStmt::Kind::If;
                        iff.cond = ForCond::neg(ForCond::boolVar((*cnt)[k]));
                        if (let) {
                            ForStmt setLet;
                            setLet.kind = ForStmt::Kind::BoolSet;
                            setLet.name = (*let)[k][a];
                            setLet.value = true;
                            iff.thenBody.push_back(std::move(setLet));
                        }
                        ForStmt setCnt;
                        setCnt.kind = ForStmt::Kind::BoolSet;
                        setCnt.name = (*cnt)[k];
                        setCnt.value = true;
                        iff.thenBody.push_back(std::move(setCnt));
                        if (!attach) {
                            chain.push_back(std::move(iff));
                            attach = &chain.back();
                        } else {
                            attach->elseBody.push_back(std::move(iff));
                            attach = &attach->elseBody.back();
                        }
                    }
                    for (auto& c : chain) res.push_back(std::move(c));
                    break;
                }
                case ForStmt::Kind::BoolDecl: {
                    ForStmt d = s;
                    d.name = boolMap.at(s.name);
                    res.push_back(std::move(d));
                    break;
                }
                case ForStmt::Kind::BoolSet: {
                    ForStmt d = s;
                    d.name = boolMap.at(s.name);
                    res.push_back(std::move(d));
                    break;
                }
                case ForStmt::Kind::If: {
                    ForStmt d;
                    d.kind = ForStmt::Kind::If;
                    d.cond = s.cond;
                    std::map<std::string, std::string> all = varMap;
                    for (const auto& [k, v] : boolMap) all[k] = v;
                    renameCond(d.cond, all);
                    d.thenBody = fKernel(s.thenBody, boolMap, varMap, cnt, let);
                    d.elseBody = fKernel(s.elseBody, boolMap, varMap, cnt, let);
                    res.push_back(std::move(d));
                    break;
                }
                case ForStmt::Kind::For:
                    throw PolyregError("prenex kernel contains a loop");
            }
        }
        return res;
    };

    // lexicographic order of f-tuples under the enumeration directions
    auto lexLt = [&](const std::vector<std::string>& xs, const std::vector<std::string>& ys) {
        ForCond result = ForCond::neg(ForCond::mkTrue());
        for (std::size_t i = n; i-- > 0;) {
            bool desc = fp.loops[i].descending;
            ForCond less = desc ? ForCond::cmp(ForCond::Kind::Lt, ys[i], xs[i])
                                : ForCond::cmp(ForCond::Kind::Lt, xs[i], ys[i]);
            ForCond eq = ForCond::cmp(ForCond::Kind::Eq, xs[i], ys[i]);
            result =
                ForCond::disj(std::move(less), ForCond::conj(std::move(eq), std::move(result)));
        }
        return result;
    };
    auto lexEq = [&](const std::vector<std::string>& xs, const std::vector<std::string>& ys) {
        ForCond c = ForCond::mkTrue();
        for (std::size_t i = 0; i < n; ++i) {
            ForCond eq = ForCond::cmp(ForCond::Kind::Eq, xs[i], ys[i]);
            c = i == 0 ? std::move(eq) : ForCond::conj(std::move(c), std::move(eq));
        }
        return c;
    };

    std::string fwNonempty = rn.fresh("fwNonempty");
    {
        ForStmt d;
        d.kind = ForStmt::Kind::BoolDecl;
        d.name = fwNonempty;
        out.body.push_back(std::move(d));
        SlotNames sc = makeSlotNames();
        std::map<std::string, std::string> bm;
        auto* inner = buildFNest(out.body, sc.tupleVars, bm, false);
        ForStmt d0;
        d0.kind = ForStmt::Kind::BoolDecl;
        d0.name = sc.cnt[0];
        inner->push_back(std::move(d0));
        std::vector<std::string> cnt1{sc.cnt[0]};
        auto rec = fKernel(fp.kernel, bm, varMapFor(sc.tupleVars), &cnt1, nullptr);
        inner->insert(inner->end(), rec.begin(), rec.end());
        ForStmt iff;
        iff.kind = ForStmt::Kind::If;
        iff.cond = ForCond::boolVar(sc.cnt[0]);
        ForStmt set;
        set.kind = ForStmt::Kind::BoolSet;
        set.name = fwNonempty;
        set.value = true;
        iff.thenBody.push_back(std::move(set));
        inner->push_back(std::move(iff));
    }
    {
        ForStmt iff;
        iff.kind = ForStmt::Kind::If;
        iff.cond = ForCond::conj(ForCond::boolVar(inNonempty),
                                 ForCond::neg(ForCond::boolVar(fwNonempty)));
        emitConst(gEps, iff.thenBody);
        out.body.push_back(std::move(iff));
    }

    for (const auto& bn : gp.preBools) {
        ForStmt d;
        d.kind = ForStmt::Kind::BoolDecl;
        d.name = gBoolMap[bn];
        out.body.push_back(std::move(d));
    }

    bool needFirst = stmtsUse(gp.kernel, ForCond::Kind::EqFirst);
    bool needAfter = stmtsUse(gp.kernel, ForCond::Kind::EqLast);

    std::vector<SlotNames> levels;
    for (std::size_t j = 0; j < m; ++j) levels.push_back(makeSlotNames());

    std::map<std::string, std::size_t> gVarLevel;
    for (std::size_t j = 0; j < m; ++j) gVarLevel[gp.loops[j].var] = j;

    std::function<ForCond(const ForCond&, const std::vector<std::size_t>&)> translateCond =
        [&](const ForCond& c, const std::vector<std::size_t>& slots) -> ForCond {
        switch (c.kind) {
            case ForCond::Kind::True:
                return c;
            case ForCond::Kind::And:
                return ForCond::conj(translateCond(c.args[0], slots),
                                     translateCond(c.args[1], slots));
            case ForCond::Kind::Or:
                return ForCond::disj(translateCond(c.args[0], slots),
                                     translateCond(c.args[1], slots));
            case ForCond::Kind::Not:
                return ForCond::neg(translateCond(c.args[0], slots));
            case ForCond::Kind::BoolVar: {
                ForCond d = c;
                auto it = gBoolMap.find(c.x);
                if (it != gBoolMap.end()) d.x = it->second;
                return d;
            }
            case ForCond::Kind::Label: {
                std::size_t j = gVarLevel.at(c.x);
                return ForCond::boolVar(levels[j].let[slots[j]][mid->id(c.symbol)]);
            }
            case ForCond::Kind::EqFirst: {
                std::size_t j = gVarLevel.at(c.x);
                if (slots[j] != 0) return ForCond::neg(ForCond::mkTrue());
                return ForCond::neg(ForCond::boolVar(levels[j].outBefore));
            }
            case ForCond::Kind::EqLast: {
                std::size_t j = gVarLevel.at(c.x);
                ForCond noneAfter = ForCond::neg(ForCond::boolVar(levels[j].outAfter));
                if (slots[j] + 1 < K)
                    return ForCond::conj(
                        std::move(noneAfter),
                        ForCond::neg(ForCond::boolVar(levels[j].cnt[slots[j] + 1])));
                return noneAfter;
            }
            case ForCond::Kind::Le:
            case ForCond::Kind::Lt:
            case ForCond::Kind::Eq: {
                std::size_t i = gVarLevel.at(c.x);
                std::size_t j = gVarLevel.at(c.y);
                const auto& xs = levels[i].tupleVars;
                const auto& ys = levels[j].tupleVars;
                bool slotLt = slots[i] < slots[j];
                bool slotEq = slots[i] == slots[j];
                ForCond eq = slotEq ? lexEq(xs, ys) : ForCond::neg(ForCond::mkTrue());
                ForCond lt = slotLt ? ForCond::disj(lexLt(xs, ys), lexEq(xs, ys)) : lexLt(xs, ys);
                if (c.kind == ForCond::Kind::Eq) return eq;
                if (c.kind == ForCond::Kind::Lt) return lt;
                return ForCond::disj(std::move(lt), std::move(eq));
            }
        }
        return ForCond::mkTrue();
    };

    std::function<std::vector<ForStmt>(const std::vector<ForStmt>&,
                                       const std::vector<std::size_t>&)>
        translateG = [&](const std::vector<ForStmt>& body,
                         const std::vector<std::size_t>& slots) -> std::vector<ForStmt> {
        std::vector<ForStmt> res;
        for (const auto& s : body) {
            switch (s.kind) {
                case ForStmt::Kind::Output:
                    res.push_back(s);
                    break;
                case ForStmt::Kind::BoolDecl: {
                    ForStmt d = s;
                    d.name = gBoolMap.at(s.name);
                    res.push_back(std::move(d));
                    break;
                }
                case ForStmt::Kind::BoolSet: {
                    ForStmt d = s;
                    d.name = gBoolMap.at(s.name);
                    res.push_back(std::move(d));
                    break;
                }
                case ForStmt::Kind::If: {
                    ForStmt d;
                    d.kind = ForStmt::Kind::If;
                    d.cond = translateCond(s.cond, slots);
                    d.thenBody = translateG(s.thenBody, slots);
                    d.elseBody = translateG(s.elseBody, slots);
                    res.push_back(std::move(d));
                    break;
                }
                case ForStmt::Kind::For:
                    throw PolyregError("prenex kernel contains a loop");
            }
        }
        return res;
    };

    std::function<std::vector<ForStmt>(std::size_t, std::vector<std::size_t>&)> buildLoop =
        [&](std::size_t j, std::vector<std::size_t>& slots) -> std::vector<ForStmt> {
        if (j == m) return translateG(gp.kernel, slots);
        const SlotNames& lv = levels[j];
        bool gDesc = gp.loops[j].descending;

        std::vector<ForStmt> res;
        // tracker threaded across the enumeration: "first" info for forward
        // loops, "last" info for reversed ones
        if (!gDesc && needFirst) {
            ForStmt d;
            d.kind = ForStmt::Kind::BoolDecl;
            d.name = lv.outBefore;
            res.push_back(std::move(d));
        }
        if (gDesc && needAfter) {
            ForStmt d;
            d.kind = ForStmt::Kind::BoolDecl;
            d.name = lv.outAfter;
            res.push_back(std::move(d));
        }

        std::map<std::string, std::string> fb;
        std::vector<ForStmt> nestHolder;
        auto* inner = buildFNest(nestHolder, lv.tupleVars, fb, gDesc);

        for (std::size_t k = 0; k < K; ++k) {
            ForStmt d;
            d.kind = ForStmt::Kind::BoolDecl;
            d.name = lv.cnt[k];
            inner->push_back(std::move(d));
            for (SymbolId a = 0; a < mid->size(); ++a) {
                ForStmt dl;
                dl.kind = ForStmt::Kind::BoolDecl;
                dl.name = lv.let[k][a];
                inner->push_back(std::move(dl));
            }
        }
        // per-tuple variant of the tracker that cannot be threaded
        if (!gDesc && needAfter) {
            ForStmt d;
            d.kind = ForStmt::Kind::BoolDecl;
            d.name = lv.outAfter;
            inner->push_back(std::move(d));
        }
        if (gDesc && needFirst) {
            ForStmt d;
            d.kind = ForStmt::Kind::BoolDecl;
            d.name = lv.outBefore;
            inner->push_back(std::move(d));
        }

        if (!gDesc) {
            // forward enumeration threads f's booleans directly
            auto rec = fKernel(fp.kernel, fb, varMapFor(lv.tupleVars), &lv.cnt, &lv.let);
            inner->insert(inner->end(), rec.begin(), rec.end());
        } else {
            // reversed enumeration re-simulates f from scratch at each tuple
            SlotNames re = makeSlotNames();
            std::map<std::string, std::string> fb2;
            std::vector<ForStmt> reNest;
            auto* reInner = buildFNest(reNest, re.tupleVars, fb2, false);
            std::string locCnt = rn.fresh("cnt");
            {
                ForStmt d;
                d.kind = ForStmt::Kind::BoolDecl;
                d.name = locCnt;
                reInner->push_back(std::move(d));
            }
            ForCond before = lexLt(re.tupleVars, lv.tupleVars);
            ForCond equal = lexEq(re.tupleVars, lv.tupleVars);
            auto vm = varMapFor(re.tupleVars);
            {
                ForStmt iff;
                iff.kind = ForStmt::Kind::If;
                iff.cond = std::move(before);
                std::vector<std::string> loc{locCnt};
                iff.thenBody = fKernel(fp.kernel, fb2, vm, &loc, nullptr);
                if (needFirst) {
                    ForStmt mark;
                    mark.kind = ForStmt::Kind::If;
                    mark.cond = ForCond::boolVar(locCnt);
                    ForStmt set;
                    set.kind = ForStmt::Kind::BoolSet;
                    set.name = lv.outBefore;
                    set.value = true;
                    mark.thenBody.push_back(std::move(set));
                    iff.thenBody.push_back(std::move(mark));
                }
                reInner->push_back(std::move(iff));
                ForStmt iff2;
                iff2.kind = ForStmt::Kind::If;
                iff2.cond = std::move(equal);
                iff2.thenBody = fKernel(fp.kernel, fb2, vm, &lv.cnt, &lv.let);
                reInner->push_back(std::move(iff2));
            }
            inner->insert(inner->end(), reNest.begin(), reNest.end());
        }
        if (needAfter && !gDesc) {
            // lookahead scan for outputs strictly after the current tuple
            SlotNames la = makeSlotNames();
            std::map<std::string, std::string> fb3;
            std::vector<ForStmt> laNest;
            auto* laInner = buildFNest(laNest, la.tupleVars, fb3, false);
            std::string locCnt = rn.fresh("cnt");
            {
                ForStmt d;
                d.kind = ForStmt::Kind::BoolDecl;
                d.name = locCnt;
                laInner->push_back(std::move(d));
            }
            std::vector<std::string> loc{locCnt};
            auto rec3 = fKernel(fp.kernel, fb3, varMapFor(la.tupleVars), &loc, nullptr);
            laInner->insert(laInner->end(), rec3.begin(), rec3.end());
            ForStmt iff;
            iff.kind = ForStmt::Kind::If;
            iff.cond = ForCond::conj(lexLt(lv.tupleVars, la.tupleVars),
                                     ForCond::boolVar(locCnt));
            ForStmt set;
            set.kind = ForStmt::Kind::BoolSet;
            set.name = lv.outAfter;
            set.value = true;
            iff.thenBody.push_back(std::move(set));
            laInner->push_back(std::move(iff));
            inner->insert(inner->end(), laNest.begin(), laNest.end());
        }
        if (needFirst && gDesc) {
            // handled inside the re-simulation above
        }

        std::vector<std::size_t> slotOrder(K);
        for (std::size_t k = 0; k < K; ++k) slotOrder[k] = gDesc ? K - 1 - k : k;
        for (std::size_t k : slotOrder) {
            ForStmt iff;
            iff.kind = ForStmt::Kind::If;
            iff.cond = ForCond::boolVar(lv.cnt[k]);
            slots.push_back(k);
            for (const auto& bn : gp.loops[j].bools) {
                ForStmt d;
                d.kind = ForStmt::Kind::BoolDecl;
                d.name = gBoolMap.at(bn);
                iff.thenBody.push_back(std::move(d));
            }
            auto deeper = buildLoop(j + 1, slots);
            iff.thenBody.insert(iff.thenBody.end(), deeper.begin(), deeper.end());
            slots.pop_back();
            inner->push_back(std::move(iff));
        }
        // threaded tracker updates, applied after this tuple's work
        if (!gDesc && needFirst) {
            ForStmt iff;
            iff.kind = ForStmt::Kind::If;
            iff.cond = ForCond::boolVar(lv.cnt[0]);
            ForStmt set;
            set.kind = ForStmt::Kind::BoolSet;
            set.name = lv.outBefore;
            set.value = true;
            iff.thenBody.push_back(std::move(set));
            inner->push_back(std::move(iff));
        }
        if (gDesc && needAfter) {
            ForStmt iff;
            iff.kind = ForStmt::Kind::If;
            iff.cond = ForCond::boolVar(lv.cnt[0]);
            ForStmt set;
            set.kind = ForStmt::Kind::BoolSet;
            set.name = lv.outAfter;
            set.value = true;
            iff.thenBody.push_back(std::move(set));
            inner->push_back(std::move(iff));
        }
        res.insert(res.end(), nestHolder.begin(), nestHolder.end());
        return res;
    };

    std::vector<std::size_t> slots;
    auto main = buildLoop(0, slots);
    out.body.insert(out.body.end(), main.begin(), main.end());
    out.validate();
    return out;
}

}  // namespace polyreg
