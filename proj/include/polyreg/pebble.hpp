#pragma once

// k-pebble transducers with stack discipline: guarded-rule syntax,
// configuration semantics, run-word serialization, builders for the atomic
// functions, and crossing types for two-way automata.

#include <optional>

#include "polyreg/atomic.hpp"

namespace polyreg {

struct GuardExpr {
    enum class Kind { True, Le, AtFirst, AtLast, Height, Placed, And, Or, Not };
    Kind kind = Kind::True;
    std::size_t i = 0, j = 0;  // pebble indices (1-based) or height value in i
    std::vector<GuardExpr> args;

    static GuardExpr mkTrue() { return {}; }
    static GuardExpr le(std::size_t i, std::size_t j) {
        return {Kind::Le, i, j, {}};
    }
    static GuardExpr atFirst(std::size_t i) { return {Kind::AtFirst, i, 0, {}}; }
    static GuardExpr atLast(std::size_t i) { return {Kind::AtLast, i, 0, {}}; }
    static GuardExpr height(std::size_t h) { return {Kind::Height, h, 0, {}}; }
    static GuardExpr placed(std::size_t i) { return {Kind::Placed, i, 0, {}}; }
    static GuardExpr conj(GuardExpr a, GuardExpr b) {
        return {Kind::And, 0, 0, {std::move(a), std::move(b)}};
    }
    static GuardExpr disj(GuardExpr a, GuardExpr b) {
        return {Kind::Or, 0, 0, {std::move(a), std::move(b)}};
    }
    static GuardExpr neg(GuardExpr a) { return {Kind::Not, 0, 0, {std::move(a)}}; }
    std::string print() const;
};

enum class PebbleAction { MoveLeft, Stay, MoveRight, Push, Pop };

struct GuardedRule {
    std::size_t sourceState = 0;
    std::vector<bool> letters;  // predicate on the label under the head
    GuardExpr guard;
    std::size_t targetState = 0;
    PebbleAction action = PebbleAction::Stay;
};

struct PebbleTransducer {
    AlphabetRef inputAlphabet;
    AlphabetRef outputAlphabet;
    std::size_t maxPebbles = 1;
    std::vector<std::string> stateNames;
    std::size_t initial = 0;
    std::size_t final = 0;
    std::vector<GuardedRule> rules;  // first match wins
    std::vector<std::vector<SymbolId>> stateOutput;
    std::vector<SymbolId> emptyInputOutput;

    std::size_t numStates() const { return stateNames.size(); }
    void validate() const;
};

// Marks on a partial input: whether its boundary positions really are the
// first/last positions of the full word.
struct PartialMarks {
    bool first = false;
    bool last = false;
};

struct PebbleConfig {
    std::size_t state = 0;
    std::vector<std::size_t> stack;  // positions, 1-based; back() is the head
};

struct PebbleRunResult {
    std::vector<PebbleConfig> run;
    bool accepted = false;
};

// One deterministic step; nullopt when the successor is undefined.
std::optional<PebbleConfig> pebbleStep(const PebbleTransducer& t, const Word& w,
                                       const PebbleConfig& c,
                                       PartialMarks marks = {true, true});

PebbleRunResult pebbleRun(const PebbleTransducer& t, const Word& w);
Word pebbleEval(const PebbleTransducer& t, const Word& w);
Word pebbleRunWord(const PebbleTransducer& t, const Word& w);

PebbleTransducer pebbleFromSequential(const SequentialTransducer& t);
PebbleTransducer pebbleSquaring(const AlphabetRef& alphabet);
PebbleTransducer pebbleIteratedReverse(const IterRevSpec& spec);

struct PebbleComposition {
    PebbleTransducer outer;
    PebbleTransducer inner;
    Word eval(const Word& w) const;
};
PebbleComposition pebbleComposeRuntime(const PebbleTransducer& outer,
                                       const PebbleTransducer& inner);

struct PebbleValidationReport {
    bool ok = true;
    std::vector<std::string> problems;
    std::vector<std::string> overlapWarnings;
};
PebbleValidationReport pebbleValidate(const PebbleTransducer& t);

// ---------------------------------------------------------------------------
// Crossing types of two-way (1-pebble) automata.
// ---------------------------------------------------------------------------

struct CrossingOutcome {
    enum class Kind { Accept, Reject, Exit };
    Kind kind = Kind::Reject;
    std::size_t state = 0;
    bool exitRight = false;

    bool operator==(const CrossingOutcome& o) const {
        if (kind != o.kind) return false;
        if (kind != Kind::Exit) return true;
        return state == o.state && exitRight == o.exitRight;
    }
};

struct CrossingType {
    std::size_t numStates = 0;
    PartialMarks marks;
    // index: state * 2 + (entered from the right ? 1 : 0)
    std::vector<CrossingOutcome> behavior;

    bool operator==(const CrossingType& o) const {
        return numStates == o.numStates && marks.first == o.marks.first &&
               marks.last == o.marks.last && behavior == o.behavior;
    }
    bool operator<(const CrossingType& o) const;
};

CrossingType crossingType(const PebbleTransducer& t, const Word& partial, PartialMarks marks);
CrossingType crossingIdentity(std::size_t numStates);
CrossingType crossingCompose(const CrossingType& a, const CrossingType& b);
std::pair<MonoidRef, LetterHom> crossingSemigroup(const PebbleTransducer& t,
                                                  std::size_t cap = 100000);

}  // namespace polyreg
