#pragma once

// The for-transducer language: parser, validator, interpreter, prenex
// normal form, first-order check, compilation to pebble transducers, and
// composition.

#include "polyreg/pebble.hpp"

namespace polyreg {

struct ForCond {
    enum class Kind { True, And, Or, Not, Le, Lt, Eq, EqFirst, EqLast, Label, BoolVar };
    Kind kind = Kind::True;
    std::string x, y;    // position variables (x doubles as the bool name)
    std::string symbol;  // label tests
    std::vector<ForCond> args;

    static ForCond mkTrue() { return {}; }
    static ForCond boolVar(std::string b);
    static ForCond label(std::string sym, std::string var);
    static ForCond cmp(Kind k, std::string x, std::string y);
    static ForCond conj(ForCond a, ForCond b);
    static ForCond disj(ForCond a, ForCond b);
    static ForCond neg(ForCond a);
};

enum class BoundKind { First, Last, Var };

struct ForStmt {
    enum class Kind { For, If, Output, BoolDecl, BoolSet };
    Kind kind = Kind::Output;
    // For
    std::string var;
    BoundKind fromKind = BoundKind::First, toKind = BoundKind::Last;
    std::string fromVar, toVar;
    std::vector<ForStmt> body;
    // If
    ForCond cond;
    std::vector<ForStmt> thenBody, elseBody;
    // Output / BoolDecl / BoolSet
    std::string symbol;  // output token
    std::string name;    // bool name
    bool value = false;  // BoolSet value
};

struct ForProgram {
    std::vector<ForStmt> body;
    AlphabetRef inputAlphabet;   // declared via "input:" or inferred
    AlphabetRef outputAlphabet;  // declared via "output:" or inferred

    void validate() const;
};

struct ForEvalStats {
    // max number of value changes of any single boolean variable instance
    std::size_t maxInstanceChanges = 0;
};

ForProgram forpParse(const std::string& text);
std::string forpPrint(const ForProgram& p);
Word forpEval(const ForProgram& p, const Word& w, ForEvalStats* stats = nullptr);
bool forpIsFirstOrder(const ForProgram& p);

struct PrenexLoop {
    std::string var;
    bool descending = false;            // last..first
    std::vector<std::string> bools;     // declared at this depth
};

struct PrenexProgram {
    std::vector<std::string> preBools;  // declared before all loops
    std::vector<PrenexLoop> loops;
    std::vector<ForStmt> kernel;        // loop-free
    std::vector<SymbolId> emptyOutput;  // output on the empty word
    AlphabetRef inputAlphabet;
    AlphabetRef outputAlphabet;

    ForProgram toForProgram() const;
    void validate() const;
};

PrenexProgram forpPrenex(const ForProgram& p);
Word prenexEval(const PrenexProgram& p, const Word& w);

PebbleTransducer forpToPebble(const ForProgram& p);
ForProgram forpCompose(const ForProgram& f, const ForProgram& g);

}  // namespace polyreg
