#pragma once

// Builds a SequentialTransducer from a step function by exploring the
// reachable state space. States are caller-encoded strings; the exploration
// fails if the machine is not finite.

#include <functional>
#include <map>

#include "polyreg/atomic.hpp"

namespace polyreg {

struct SeqStep {
    std::string next;
    std::vector<SymbolId> output;  // over the output alphabet
};

// step(state, symbol) -> (next state, emitted word)
// endWord(state) -> word appended when input ends in that state
SequentialTransducer buildSequential(
    const AlphabetRef& input, const AlphabetRef& output, const std::string& initialState,
    const std::function<SeqStep(const std::string&, SymbolId)>& step,
    const std::function<std::vector<SymbolId>(const std::string&)>& endWord,
    std::size_t stateCap = 100000);

}  // namespace polyreg
