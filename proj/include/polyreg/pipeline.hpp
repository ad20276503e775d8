#pragma once

// Polyregular functions as pipelines of atomic stages, plus the closure
// combinators (if-then-else, domain extension, pairwise concatenation,
// iterated append, blockwise map). Every combinator emits a plain pipeline
// so preimage analysis and first-order tracking apply to its result.

#include <variant>

#include "polyreg/atomic.hpp"

namespace polyreg {

struct Stage {
    std::variant<SequentialTransducer, SquaringSpec, IterRevSpec> v;

    const AlphabetRef& inputAlphabet() const;
    const AlphabetRef& outputAlphabet() const;
    bool isSequential() const { return std::holds_alternative<SequentialTransducer>(v); }
};

struct Pipeline {
    std::vector<Stage> stages;

    const AlphabetRef& inputAlphabet() const { return stages.front().inputAlphabet(); }
    const AlphabetRef& outputAlphabet() const { return stages.back().outputAlphabet(); }
};

struct PipelineReport {
    bool ok = true;
    bool firstOrder = true;
    std::size_t errorIndex = 0;
    std::string message;
};

Word pipelineEval(const Pipeline& p, const Word& w);
PipelineReport pipelineValidate(const Pipeline& p);

// Concatenation; the alphabets must chain.
Pipeline composePipelines(const Pipeline& first, const Pipeline& then);
Pipeline pipelineFromStage(Stage s);

// Full-word reverse: embed into alphabet+separator, iterated reverse, project.
Pipeline pipelineReverse(const AlphabetRef& alphabet);

// left o reverse o right o reverse (Elgot-Mezei shape).
Pipeline rationalFromBidirectional(const SequentialTransducer& left,
                                   const SequentialTransducer& right);

// w |-> f(w) if w in L else g(w).
Pipeline combIfThenElse(const Dfa& L, const Pipeline& f, const Pipeline& g);

// Extension over (Sigma+Delta)* agreeing with h on Sigma* and the identity
// on nonempty Delta*; empty input follows the h branch.
Pipeline combDomainExtend(const Pipeline& h, const AlphabetRef& delta);

// w |-> f(w) g(w).
Pipeline combPairConcat(const Pipeline& f, const Pipeline& g);

// v1|...|vn|v |-> v1v|...|vnv.
Pipeline combIterAppend(const AlphabetRef& alphabet, const std::string& sepToken);

// w1|...|wn |-> f(w1)|...|f(wn) for a separator foreign to f's alphabets.
Pipeline combBlockwiseMap(const Pipeline& f, const std::string& sepToken);

// The reverses-of-all-prefixes function over {a,b}: append |, squaring,
// rational cleanup, iterated reverse.
Pipeline runningExamplePipeline();

// Helpers shared with other modules.
std::string freshTagToken(const std::vector<AlphabetRef>& avoid);
std::string freshSeparatorToken(const std::vector<AlphabetRef>& avoid);
AlphabetRef tagAlphabet(const AlphabetRef& base, const std::string& tag);
AlphabetRef unionAlphabet(const AlphabetRef& a, const AlphabetRef& b);
AlphabetRef extendAlphabet(const AlphabetRef& a, const std::vector<std::string>& extraTokens);

// w |-> w when w in L, else the tag-recolored copy of w (bidirectional
// rational; empty input maps to itself).
std::vector<Stage> recolorByMembership(const Dfa& L, const std::string& tag);

}  // namespace polyreg
