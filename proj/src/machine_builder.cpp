#include "polyreg/machine_builder.hpp"

#include <deque>

namespace polyreg {

SequentialTransducer buildSequential(
    const AlphabetRef& input, const AlphabetRef& output, const std::string& initialState,
    const std::function<SeqStep(const std::string&, SymbolId)>& step,
    const std::function<std::vector<SymbolId>(const std::string&)>& endWord,
    std::size_t stateCap) {
    std::map<std::string, std::size_t> index;
    std::vector<std::string> states;
    auto intern = [&](const std::string& s) {
        auto it = index.find(s);
        if (it != index.end()) return it->second;
        std::size_t id = states.size();
        if (id >= stateCap) throw PolyregError("buildSequential: state cap exceeded");
        index.emplace(s, id);
        states.push_back(s);
        return id;
    };
    intern(initialState);

    std::vector<std::vector<std::size_t>> deltaRows;
    std::vector<std::vector<std::vector<SymbolId>>> outRows;
    for (std::size_t cur = 0; cur < states.size(); ++cur) {
        std::vector<std::size_t> drow(input->size());
        std::vector<std::vector<SymbolId>> orow(input->size());
        for (SymbolId a = 0; a < input->size(); ++a) {
            SeqStep s = step(states[cur], a);
            drow[a] = intern(s.next);
            orow[a] = std::move(s.output);
        }
        deltaRows.push_back(std::move(drow));
        outRows.push_back(std::move(orow));
    }

    SequentialTransducer t;
    t.inputAlphabet = input;
    t.outputAlphabet = output;
    t.dfa.alphabet = input;
    t.dfa.stateNames = states;
    t.dfa.initial = 0;
    t.dfa.accepting.assign(states.size(), true);
    t.dfa.delta.resize(states.size() * input->size());
    t.transitionOutput.resize(states.size() * input->size());
    t.endOfInput.resize(states.size());
    for (std::size_t q = 0; q < states.size(); ++q) {
        t.endOfInput[q] = endWord(states[q]);
        for (SymbolId a = 0; a < input->size(); ++a) {
            t.dfa.delta[q * input->size() + a] = deltaRows[q][a];
            t.transitionOutput[q * input->size() + a] = std::move(outRows[q][a]);
        }
    }
    t.validate();
    return t;
}

}  // namespace polyreg
