#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chaintrace {

/// Value in a chain's smallest integer unit. All matching paths use exact
/// integer arithmetic; floating point never touches an Amount.
using Amount = std::int64_t;

class AmountError : public std::runtime_error {
public:
    explicit AmountError(const std::string& what) : std::runtime_error(what) {}
};

/// Parses a non-negative decimal string ("249.9999") into smallest units
/// given the chain's decimal scale. Conversion is exact: more fractional
/// digits than `decimals` is an error, never a rounding.
Amount parse_decimal(std::string_view text, int decimals);

/// Inverse of parse_decimal. Trailing fractional zeros are trimmed.
std::string format_decimal(Amount units, int decimals);

/// Exact parse that returns nullopt instead of throwing.
std::optional<Amount> try_parse_decimal(std::string_view text, int decimals);

}  // namespace chaintrace
