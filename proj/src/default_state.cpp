#include "robustcredit/default_state.hpp"

#include "robustcredit/errors.hpp"

#include <algorithm>

namespace robustcredit {

DefaultState DefaultState::with_default(int obligor) const {
    if (defaulted(obligor)) {
        throw DomainError("obligor " + std::to_string(obligor + 1) + " has already defaulted");
    }
    return DefaultState(mask_ | (1u << obligor));
}

std::vector<int> DefaultState::alive_obligors(int M) const {
    std::vector<int> out;
    for (int i = 0; i < M; ++i) {
        if (alive(i)) out.push_back(i);
    }
    return out;
}

std::string DefaultState::bitstring(int M) const {
    std::string s(static_cast<std::size_t>(M), '0');
    for (int i = 0; i < M; ++i) {
        if (defaulted(i)) s[static_cast<std::size_t>(i)] = '1';
    }
    return s;
}

DefaultState DefaultState::from_bitstring(std::string_view bits) {
    if (bits.empty() || bits.size() > static_cast<std::size_t>(kMaxObligors)) {
        throw SchemaError("bad default-state string '" + std::string(bits) + "'");
    }
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') {
            mask |= 1u << i;
        } else if (bits[i] != '0') {
            throw SchemaError("bad default-state string '" + std::string(bits) + "'");
        }
    }
    return DefaultState(mask);
}

std::vector<DefaultState> enumerate_states(int M) {
    if (M < 1 || M > kMaxObligors) {
        throw CapacityError("obligor count " + std::to_string(M) + " outside [1, " +
                            std::to_string(kMaxObligors) + "]");
    }
    std::vector<DefaultState> states;
    const std::uint32_t n = 1u << M;
    states.reserve(n);
    for (std::uint32_t mask = 0; mask < n; ++mask) states.emplace_back(mask);
    std::stable_sort(states.begin(), states.end(), [](DefaultState a, DefaultState b) {
        if (a.m_count() != b.m_count()) return a.m_count() > b.m_count();
        return a.mask() < b.mask();
    });
    return states;
}

}  // namespace robustcredit
