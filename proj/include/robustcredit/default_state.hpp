#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace robustcredit {

/// Hard cap on the number of obligors; every solve touches all 2^M states.
inline constexpr int kMaxObligors = 12;

/// Set of defaulted obligors. Bit i set means obligor i (zero-based) has
/// defaulted.
class DefaultState {
public:
    constexpr DefaultState() = default;
    constexpr explicit DefaultState(std::uint32_t mask) : mask_(mask) {}

    [[nodiscard]] constexpr std::uint32_t mask() const { return mask_; }
    [[nodiscard]] constexpr int m_count() const { return std::popcount(mask_); }
    [[nodiscard]] constexpr bool defaulted(int obligor) const {
        return (mask_ >> obligor) & 1u;
    }
    [[nodiscard]] constexpr bool alive(int obligor) const { return !defaulted(obligor); }

    /// State reached when `obligor` defaults next. Throws if already defaulted.
    [[nodiscard]] DefaultState with_default(int obligor) const;

    /// Zero-based indices of obligors still alive among the first `M`.
    [[nodiscard]] std::vector<int> alive_obligors(int M) const;

    [[nodiscard]] constexpr bool all_defaulted(int M) const {
        return mask_ == (M >= 32 ? ~0u : ((1u << M) - 1u));
    }

    /// Character k is '1' iff obligor k+1 has defaulted (obligor order, not
    /// binary digit order). The M=2 state where obligor 2 defaulted is "01".
    [[nodiscard]] std::string bitstring(int M) const;
    static DefaultState from_bitstring(std::string_view bits);

    friend constexpr bool operator==(DefaultState, DefaultState) = default;

private:
    std::uint32_t mask_ = 0;
};

/// All 2^M states ordered by descending default count, then ascending mask.
/// Every z^j precedes z, so the order is a valid recursion order.
/// Throws CapacityError when M is outside [1, kMaxObligors].
std::vector<DefaultState> enumerate_states(int M);

}  // namespace robustcredit
